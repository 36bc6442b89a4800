//! Command-line front end: argument parsing, config overrides, and
//! assembly of task outputs into CSV or JSON.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::metricfamily::FamilyPreset;
use crate::numdiff::StepStrategy;

pub use commands::{Status, TaskOutput};
pub use config::{Format, GridSpec, OutputSpec, PointSpec, PointsSpec, RunConfig, Task};

#[derive(Debug, Parser)]
#[command(
    name = "tbcurv",
    version,
    about = "Curvature of tangent bundles with natural metrics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a family and check the F/H properties
    FamilyCheck(Flags),
    /// Full curvature table in the adapted frame
    Curvature(Flags),
    /// Sectional curvatures of the frame planes
    Sectional(Flags),
    /// Ricci tensor in the adapted frame
    Ricci(Flags),
    /// Scalar curvature
    Scalar(Flags),
    /// Closed forms against the numerical oracle
    Verify(Flags),
    /// Scalar curvature, F and H over a sweep of |v|
    Scan(Flags),
    /// Run the tasks listed in the config file
    Run(Flags),
}

impl Command {
    fn split(&self) -> (Option<Task>, &Flags) {
        match self {
            Command::FamilyCheck(f) => (Some(Task::FamilyCheck), f),
            Command::Curvature(f) => (Some(Task::Curvature), f),
            Command::Sectional(f) => (Some(Task::Sectional), f),
            Command::Ricci(f) => (Some(Task::Ricci), f),
            Command::Scalar(f) => (Some(Task::Scalar), f),
            Command::Verify(f) => (Some(Task::Verify), f),
            Command::Scan(f) => (Some(Task::Scan), f),
            Command::Run(f) => (None, f),
        }
    }
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    /// JSON run configuration; other flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// euclidean:N, sphere:N[:R], sphere-polar:N[:R], hyperbolic:N,
    /// conformal:N:[[c,e1..eN],...] or a JSON object
    #[arg(long)]
    pub manifold: Option<String>,
    /// sasaki, cheeger-gromoll, exp+ or exp-
    #[arg(long)]
    pub family: Option<String>,
    /// alpha(s) as an expression in t (the argument is |v|^2)
    #[arg(long)]
    pub alpha: Option<String>,
    /// beta(s) as an expression in t
    #[arg(long, conflicts_with = "beta_flatness")]
    pub beta: Option<String>,
    /// derive beta from alpha so that F vanishes
    #[arg(long)]
    pub beta_flatness: bool,
    /// base point, comma separated; repeatable
    #[arg(long = "point", allow_hyphen_values = true)]
    pub points: Vec<String>,
    /// tangent vector, comma separated; one per point, or one for all
    /// points; with --grid, the direction of v
    #[arg(long = "v", allow_hyphen_values = true)]
    pub vectors: Vec<String>,
    /// |v| values: a,b,c or lo:hi:count
    #[arg(long)]
    pub grid: Option<String>,
    /// output file; stdout if absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// output format, csv by default
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// absolute tolerance of the oracle comparison
    #[arg(long)]
    pub tol_abs: Option<f64>,
    /// relative tolerance of the oracle comparison
    #[arg(long)]
    pub tol_rel: Option<f64>,
    /// finite-difference step of the oracle
    #[arg(long)]
    pub h: Option<f64>,
    /// samples used to validate the family and bound F and H
    #[arg(long)]
    pub steps: Option<usize>,
    /// end of the validated range of s = |v|^2
    #[arg(long)]
    pub t_max: Option<f64>,
}

/// Loads the config named by `--config` (if any) and applies the flags.
pub fn resolve(task: Option<Task>, f: &Flags) -> Result<RunConfig> {
    let mut cfg = match &f.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(t) = task {
        cfg.tasks = vec![t];
    }
    if let Some(m) = &f.manifold {
        cfg.manifold = Some(m.parse()?);
    }
    cfg.family = match (&f.family, &f.alpha, &f.beta, f.beta_flatness) {
        (Some(_), Some(_), _, _) => {
            return Err(Error::Config("--family and --alpha are exclusive".into()));
        }
        (Some(p), None, None, false) => Some(p.parse()?),
        (Some(_), None, _, _) => {
            return Err(Error::Config(
                "--beta and --beta-flatness need --alpha".into(),
            ));
        }
        (None, Some(a), Some(b), false) => Some(FamilyPreset::Custom {
            alpha: a.clone(),
            beta: b.clone(),
        }),
        (None, Some(a), None, true) => Some(FamilyPreset::Flatness { alpha: a.clone() }),
        (None, Some(_), None, false) => {
            return Err(Error::Config(
                "--alpha needs --beta or --beta-flatness".into(),
            ));
        }
        (None, None, Some(_), _) | (None, None, None, true) => {
            return Err(Error::Config(
                "--beta and --beta-flatness need --alpha".into(),
            ));
        }
        (None, None, None, false) => cfg.family.take(),
        (_, Some(_), Some(_), true) => {
            return Err(Error::Config(
                "--beta and --beta-flatness are exclusive".into(),
            ));
        }
    };
    apply_points(&mut cfg, f)?;
    if let Some(p) = &f.out {
        cfg.output.path = Some(p.clone());
    }
    if let Some(fmt) = f.format {
        cfg.output.format = fmt;
    }
    if let Some(h) = f.h {
        cfg.oracle.step = match cfg.oracle.step {
            StepStrategy::Fixed { .. } => StepStrategy::Fixed { h },
            _ => StepStrategy::Richardson { h },
        };
    }
    if let Some(a) = f.tol_abs {
        cfg.oracle.tolerance.abs = a;
    }
    if let Some(r) = f.tol_rel {
        cfg.oracle.tolerance.rel = r;
    }
    if let Some(s) = f.steps {
        cfg.validation.samples = s;
    }
    if let Some(t) = f.t_max {
        cfg.validation.t_max = t;
    }
    cfg.check()?;
    Ok(cfg)
}

fn apply_points(cfg: &mut RunConfig, f: &Flags) -> Result<()> {
    let xs: Vec<Vec<f64>> = f
        .points
        .iter()
        .map(|s| config::parse_list(s))
        .collect::<Result<_>>()?;
    let vs: Vec<Vec<f64>> = f
        .vectors
        .iter()
        .map(|s| config::parse_list(s))
        .collect::<Result<_>>()?;
    if let Some(g) = &f.grid {
        let speeds = config::parse_grid(g)?;
        let mut grid = cfg.points.grid.take().unwrap_or(GridSpec {
            base: vec![],
            speeds: vec![],
            directions: vec![],
        });
        grid.speeds = speeds;
        if !xs.is_empty() {
            grid.base = xs;
            cfg.points.explicit.clear();
        }
        if !vs.is_empty() {
            grid.directions = vs;
        }
        cfg.points.grid = Some(grid);
        return Ok(());
    }
    if xs.is_empty() {
        if !vs.is_empty() {
            return Err(Error::Config("--v needs --point".into()));
        }
        return Ok(());
    }
    let v_for = |k: usize| -> Result<Option<Vec<f64>>> {
        match vs.len() {
            0 => Ok(None),
            1 => Ok(Some(vs[0].clone())),
            n if n == xs.len() => Ok(Some(vs[k].clone())),
            _ => Err(Error::Config(
                "give one --v per --point, or a single --v".into(),
            )),
        }
    };
    cfg.points = PointsSpec {
        explicit: xs
            .iter()
            .enumerate()
            .map(|(k, x)| {
                Ok(PointSpec {
                    x: x.clone(),
                    v: v_for(k)?,
                })
            })
            .collect::<Result<_>>()?,
        grid: None,
    };
    Ok(())
}

pub fn run_task(cfg: &RunConfig, task: Task) -> Result<TaskOutput> {
    match task {
        Task::FamilyCheck => commands::family_check(cfg),
        Task::Curvature => commands::curvature(cfg),
        Task::Sectional => commands::sectional(cfg),
        Task::Ricci => commands::ricci(cfg),
        Task::Scalar => commands::scalar(cfg),
        Task::Verify => commands::verify(cfg),
        Task::Scan => commands::scan(cfg),
    }
}

/// Rendered output of a whole run.
pub struct RunOutput {
    pub body: String,
    pub status: Status,
}

/// Runs every task in `cfg` in order. A configuration error anywhere stops
/// the run.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    let outputs: Vec<(Task, TaskOutput)> = cfg
        .tasks
        .iter()
        .map(|&t| run_task(cfg, t).map(|o| (t, o)))
        .collect::<Result<_>>()?;
    let status = outputs
        .iter()
        .map(|(_, o)| o.status)
        .max()
        .unwrap_or(Status::Ok);
    let body = match cfg.output.format {
        Format::Json => render_json(&outputs)?,
        Format::Csv => render_csv(&outputs)?,
    };
    Ok(RunOutput { body, status })
}

fn render_json(outputs: &[(Task, TaskOutput)]) -> Result<String> {
    let value = if let [(_, o)] = outputs {
        o.json.clone()
    } else {
        let mut map = Map::new();
        for (t, o) in outputs {
            map.insert(t.name().to_string(), o.json.clone());
        }
        Value::Object(map)
    };
    let mut s = serde_json::to_string_pretty(&value).map_err(|e| Error::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn render_csv(outputs: &[(Task, TaskOutput)]) -> Result<String> {
    let mut out = String::new();
    for (t, o) in outputs {
        if outputs.len() > 1 {
            out.push_str(&format!("# task: {}\n", t.name()));
        }
        for c in &o.comments {
            out.push_str(c);
            out.push('\n');
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Config(format!("csv: {e}"));
        w.write_record(&o.header).map_err(io)?;
        for r in &o.rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Config(format!("csv: {e}")))?;
        out.push_str(&String::from_utf8_lossy(&bytes));
    }
    Ok(out)
}

/// Entry point used by the binary: returns the exit code after writing the
/// output to `--out` or stdout. Errors go to stderr.
pub fn execute(cli: &Cli) -> i32 {
    let (task, flags) = cli.command.split();
    let result = resolve(task, flags).and_then(|cfg| {
        let out = run(&cfg)?;
        match &cfg.output.path {
            Some(p) => std::fs::write(p, &out.body)
                .map_err(|e| Error::Config(format!("cannot write {}: {e}", p.display())))?,
            None => print!("{}", out.body),
        }
        Ok(out.status)
    });
    match result {
        Ok(s) => s as i32,
        Err(e) => {
            eprintln!("tbcurv: {e}");
            Status::Config as i32
        }
    }
}
