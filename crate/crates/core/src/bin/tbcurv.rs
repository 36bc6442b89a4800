use clap::Parser;

use tbcurv::cli::{execute, Cli};

fn main() {
    if let Some(n) = std::env::var("TBCURV_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
    let cli = Cli::parse();
    std::process::exit(execute(&cli));
}
