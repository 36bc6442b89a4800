//! Run configuration: one JSON document, with command-line flags applied on
//! top of it.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::basemanifold::{ChartManifold, ManifoldSpec};
use crate::bundlemetric::BundlePoint;
use crate::error::{Error, Result};
use crate::metricfamily::{FamilyPreset, NaturalMetricFamily, DEFAULT_GRID, DEFAULT_T_MAX};
use crate::oracle::OracleConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    FamilyCheck,
    Curvature,
    Sectional,
    Ricci,
    Scalar,
    Verify,
    Scan,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::FamilyCheck => "family-check",
            Task::Curvature => "curvature",
            Task::Sectional => "sectional",
            Task::Ricci => "ricci",
            Task::Scalar => "scalar",
            Task::Verify => "verify",
            Task::Scan => "scan",
        }
    }

    pub fn needs_points(self) -> bool {
        self != Task::FamilyCheck
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<std::path::PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub x: Vec<f64>,
    #[serde(default)]
    pub v: Option<Vec<f64>>,
}

/// Base points x directions x `|v|` values, in that nesting order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub base: Vec<Vec<f64>>,
    pub speeds: Vec<f64>,
    /// Directions of `v` in chart coordinates; the first chart axis if empty.
    #[serde(default)]
    pub directions: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointsSpec {
    pub explicit: Vec<PointSpec>,
    pub grid: Option<GridSpec>,
}

impl PointsSpec {
    pub fn is_empty(&self) -> bool {
        self.explicit.is_empty()
            && self
                .grid
                .as_ref()
                .is_none_or(|g| g.base.is_empty() || g.speeds.is_empty())
    }

    /// Bundle points in a fixed order: explicit points first, then the grid.
    pub fn expand(&self, m: &ChartManifold) -> Result<Vec<BundlePoint>> {
        let n = m.dim();
        let check = |what: &str, x: &[f64]| {
            if x.len() == n {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{what} {x:?} has {} entries, manifold has dimension {n}",
                    x.len()
                )))
            }
        };
        let mut out = Vec::new();
        for p in &self.explicit {
            check("point", &p.x)?;
            let v = p.v.clone().unwrap_or_else(|| vec![0.0; n]);
            check("vector", &v)?;
            out.push(BundlePoint::new(p.x.clone(), v));
        }
        if let Some(g) = &self.grid {
            let axis: Vec<f64> = (0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
            let dirs = if g.directions.is_empty() {
                std::slice::from_ref(&axis)
            } else {
                &g.directions[..]
            };
            for x in &g.base {
                check("point", x)?;
                for d in dirs {
                    check("direction", d)?;
                    let len = m.norm_sq(x, d)?.sqrt();
                    if len == 0.0 {
                        return Err(Error::Config("zero grid direction".into()));
                    }
                    for &s in &g.speeds {
                        if s.is_nan() || s < 0.0 {
                            return Err(Error::Config(format!("|v| = {s} is not a norm")));
                        }
                        out.push(BundlePoint::new(
                            x.clone(),
                            d.iter().map(|c| c * s / len).collect(),
                        ));
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSpec {
    pub samples: usize,
    pub t_max: f64,
}

impl Default for ValidationSpec {
    fn default() -> Self {
        ValidationSpec {
            samples: DEFAULT_GRID,
            t_max: DEFAULT_T_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(deserialize_with = "manifold_de", serialize_with = "display_ser")]
    pub manifold: Option<ManifoldSpec>,
    #[serde(deserialize_with = "family_de")]
    pub family: Option<FamilyPreset>,
    pub points: PointsSpec,
    pub tasks: Vec<Task>,
    pub output: OutputSpec,
    pub oracle: OracleConfig,
    pub validation: ValidationSpec,
}

fn manifold_de<'de, D: Deserializer<'de>>(
    d: D,
) -> std::result::Result<Option<ManifoldSpec>, D::Error> {
    use serde::de::Error as _;
    match serde_json::Value::deserialize(d)? {
        serde_json::Value::Null => Ok(None),
        serde_json::Value::String(s) => s.parse().map(Some).map_err(D::Error::custom),
        v => serde_json::from_value(v)
            .map(Some)
            .map_err(D::Error::custom),
    }
}

fn family_de<'de, D: Deserializer<'de>>(
    d: D,
) -> std::result::Result<Option<FamilyPreset>, D::Error> {
    use serde::de::Error as _;
    match serde_json::Value::deserialize(d)? {
        serde_json::Value::Null => Ok(None),
        serde_json::Value::String(s) => s.parse().map(Some).map_err(D::Error::custom),
        v => serde_json::from_value(v)
            .map(Some)
            .map_err(D::Error::custom),
    }
}

fn display_ser<S: Serializer>(
    m: &Option<ManifoldSpec>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match m {
        Some(m) => s.serialize_str(&m.to_string()),
        None => s.serialize_none(),
    }
}

impl RunConfig {
    pub fn from_json(src: &str) -> Result<Self> {
        serde_json::from_str(src).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&src)
    }

    pub fn manifold(&self) -> Result<ChartManifold> {
        self.manifold
            .as_ref()
            .ok_or_else(|| Error::Config("no manifold given".into()))?
            .build()
    }

    pub fn family(&self) -> Result<NaturalMetricFamily> {
        let p = self
            .family
            .as_ref()
            .ok_or_else(|| Error::Config("no family given".into()))?;
        Ok(p.build()?.with_t_max(self.validation.t_max))
    }

    /// Checks everything that can be checked without evaluating anything.
    pub fn check(&self) -> Result<()> {
        if self.tasks.is_empty() {
            return Err(Error::Config("no task given".into()));
        }
        if self.family.is_none() {
            return Err(Error::Config("no family given".into()));
        }
        let need_points = self.tasks.iter().any(|t| t.needs_points());
        if need_points && self.manifold.is_none() {
            return Err(Error::Config("no manifold given".into()));
        }
        if need_points && self.points.is_empty() {
            return Err(Error::Config("no points given".into()));
        }
        if self.validation.samples < 2 {
            return Err(Error::Config("validation needs at least 2 samples".into()));
        }
        if !(self.validation.t_max > 0.0 && self.validation.t_max.is_finite()) {
            return Err(Error::Config("t_max must be positive".into()));
        }
        self.oracle.validate()
    }
}

/// `a,b,c` as a list of numbers.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("`{x}` is not a number in `{s}`")))
        })
        .collect()
}

/// `a,b,c` or `lo:hi:count` (inclusive, evenly spaced).
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [_] => parse_list(s),
        [lo, hi, count] => {
            let bad = || Error::Config(format!("cannot parse grid `{s}`"));
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            let count: usize = count.trim().parse().map_err(|_| bad())?;
            match count {
                0 => Err(bad()),
                1 => Ok(vec![lo]),
                _ => Ok((0..count)
                    .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
                    .collect()),
            }
        }
        _ => Err(Error::Config(format!("cannot parse grid `{s}`"))),
    }
}
