//! Run configuration: a TOML file with one table per concern.
//!
//! ```toml
//! [chart.line]
//! catalog = "euclidean:1"
//!
//! [chart.surface]
//! vars = ["u", "v"]
//! domain = [[0.5, 2.0], [-1.0, 1.0]]
//! metric = ["1", "0", "u^2"]          # upper triangle, row by row
//!
//! [warp]
//! base = "line"
//! fiber = "surface"
//! f1 = "x1"
//! f2 = "1 + u"
//! c = 0.5
//! variant = "G"
//!
//! [fields]                             # optional test functions
//! base = ["x1^2"]
//! fiber = ["u*v"]
//!
//! [sampling]                           # all optional
//! count = 100
//! seed = 42
//! margin = 1e-3
//! points = [[1.0, 1.2, 0.3]]           # replaces sampling when present
//!
//! [tolerances]                         # per-task overrides
//! laplacian = 1e-6
//!
//! [tasks]
//! run = ["metric", "laplacian"]
//! formulas = "published"               # or "rederived", for curvature
//!
//! [output]
//! csv = "report.csv"
//! ```
//!
//! Catalog charts name their coordinates `x1, x2, …` on the base and
//! `y1, y2, …` on the fiber unless `prefix` says otherwise.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::Deserialize;

use crate::chart::{Chart, ScalarField};
use crate::curvature::Formulas;
use crate::error::{Error, Result};
use crate::metric::{Side, Variant, WarpSpec};
use crate::sample::{DEFAULT_COUNT, DEFAULT_MARGIN, DEFAULT_SEED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Task {
    Metric,
    Cometric,
    Connection,
    Frame,
    Laplacian,
    Curvature,
    Identities,
}

impl Task {
    pub const ALL: [Task; 7] = [
        Task::Metric,
        Task::Cometric,
        Task::Connection,
        Task::Frame,
        Task::Laplacian,
        Task::Curvature,
        Task::Identities,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Metric => "metric",
            Task::Cometric => "cometric",
            Task::Connection => "connection",
            Task::Frame => "frame",
            Task::Laplacian => "laplacian",
            Task::Curvature => "curvature",
            Task::Identities => "identities",
        }
    }

    /// Default pass tolerance, relative to `max(1, |oracle|)`.
    pub fn default_tolerance(self) -> f64 {
        match self {
            Task::Metric | Task::Cometric | Task::Frame | Task::Identities => 1e-10,
            Task::Connection => 1e-6,
            Task::Laplacian | Task::Curvature => 1e-5,
        }
    }

    /// Whether the task compares against the coordinate oracle.
    pub fn uses_oracle(self) -> bool {
        matches!(self, Task::Connection | Task::Laplacian | Task::Curvature)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Task> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::config(s, "unknown task"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sampling {
    pub count: usize,
    pub seed: u64,
    pub margin: f64,
    /// Explicit product points; replace sampling when present.
    pub points: Option<Vec<Vec<f64>>>,
}

/// A validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec: WarpSpec,
    pub base_fields: Vec<ScalarField>,
    pub fiber_fields: Vec<ScalarField>,
    pub sampling: Sampling,
    pub tolerances: BTreeMap<Task, f64>,
    pub tasks: Vec<Task>,
    pub formulas: Formulas,
    pub csv: Option<PathBuf>,
}

impl RunConfig {
    pub fn tolerance(&self, task: Task) -> f64 {
        self.tolerances.get(&task).copied().unwrap_or_else(|| task.default_tolerance())
    }

    pub fn fields(&self, side: Side) -> &[ScalarField] {
        match side {
            Side::Base => &self.base_fields,
            Side::Fiber => &self.fiber_fields,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    chart: BTreeMap<String, RawChart>,
    warp: RawWarp,
    #[serde(default)]
    fields: RawFields,
    #[serde(default)]
    sampling: RawSampling,
    #[serde(default)]
    tolerances: BTreeMap<String, f64>,
    tasks: RawTasks,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChart {
    catalog: Option<String>,
    prefix: Option<String>,
    vars: Option<Vec<String>>,
    domain: Option<Vec<[f64; 2]>>,
    metric: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWarp {
    base: String,
    fiber: String,
    f1: String,
    f2: String,
    c: f64,
    #[serde(default = "default_variant")]
    variant: String,
}

fn default_variant() -> String {
    "G".to_string()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFields {
    #[serde(default)]
    base: Vec<String>,
    #[serde(default)]
    fiber: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampling {
    count: Option<usize>,
    seed: Option<u64>,
    margin: Option<f64>,
    points: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTasks {
    run: Vec<String>,
    formulas: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    csv: Option<PathBuf>,
}

/// Reads and validates a config file. Relative output paths resolve
/// against the current directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    parse_config(&text)
}

/// Parses and validates config text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::config("toml", e.to_string().trim_end()))?;
    resolve(raw)
}

fn with_key(key: &str, err: Error) -> Error {
    match err {
        Error::Config { .. } => err,
        other => Error::config(key, other.to_string()),
    }
}

fn build_chart(charts: &BTreeMap<String, RawChart>, key: &str, name: &str, default_prefix: &str) -> Result<Chart> {
    let raw = charts
        .get(name)
        .ok_or_else(|| Error::config(key, format!("undefined chart `{name}`")))?;
    let ckey = format!("chart.{name}");
    match (&raw.catalog, &raw.vars, &raw.domain, &raw.metric) {
        (Some(catalog), None, None, None) => {
            let prefix = raw.prefix.as_deref().unwrap_or(default_prefix);
            Chart::from_catalog(catalog, prefix).map_err(|e| with_key(&format!("{ckey}.catalog"), e))
        }
        (None, Some(vars), Some(domain), Some(metric)) => {
            if raw.prefix.is_some() {
                return Err(Error::config(format!("{ckey}.prefix"), "prefix only applies to catalog charts"));
            }
            let domain: Vec<(f64, f64)> = domain.iter().map(|[a, b]| (*a, *b)).collect();
            Chart::custom(name, vars, &domain, metric).map_err(|e| with_key(&ckey, e))
        }
        _ => Err(Error::config(ckey, "give either `catalog` or all of `vars`, `domain`, `metric`")),
    }
}

fn resolve(raw: RawConfig) -> Result<RunConfig> {
    let base = Arc::new(build_chart(&raw.chart, "warp.base", &raw.warp.base, "x")?);
    let fiber = Arc::new(build_chart(&raw.chart, "warp.fiber", &raw.warp.fiber, "y")?);
    let variant = match raw.warp.variant.as_str() {
        "G" | "g" => Variant::G,
        "H" | "h" => Variant::H,
        other => return Err(Error::config("warp.variant", format!("expected G or H, found `{other}`"))),
    };
    let f1 = ScalarField::new(base.clone(), &raw.warp.f1).map_err(|e| with_key("warp.f1", e))?;
    let f2 = ScalarField::new(fiber.clone(), &raw.warp.f2).map_err(|e| with_key("warp.f2", e))?;
    let spec = WarpSpec::new(f1, f2, raw.warp.c, variant).map_err(|e| with_key("warp", e))?;

    let parse_fields = |chart: &Arc<Chart>, sources: &[String], key: &str| -> Result<Vec<ScalarField>> {
        sources
            .iter()
            .enumerate()
            .map(|(i, s)| ScalarField::new(chart.clone(), s).map_err(|e| with_key(&format!("{key}[{i}]"), e)))
            .collect()
    };
    let base_fields = parse_fields(&base, &raw.fields.base, "fields.base")?;
    let fiber_fields = parse_fields(&fiber, &raw.fields.fiber, "fields.fiber")?;

    let s = raw.sampling;
    let sampling = Sampling {
        count: s.count.unwrap_or(DEFAULT_COUNT),
        seed: s.seed.unwrap_or(DEFAULT_SEED),
        margin: s.margin.unwrap_or(DEFAULT_MARGIN),
        points: s.points,
    };
    if sampling.count == 0 && sampling.points.is_none() {
        return Err(Error::config("sampling.count", "must be positive"));
    }
    if !(0.0..0.5).contains(&sampling.margin) {
        return Err(Error::config("sampling.margin", "must lie in [0, 0.5)"));
    }
    if let Some(points) = &sampling.points {
        if points.is_empty() {
            return Err(Error::config("sampling.points", "must not be empty"));
        }
        for (i, p) in points.iter().enumerate() {
            spec.point(p).map_err(|e| with_key(&format!("sampling.points[{i}]"), e))?;
        }
    }

    let mut tolerances = BTreeMap::new();
    for (key, value) in raw.tolerances {
        let task: Task = key.parse().map_err(|_| Error::config(format!("tolerances.{key}"), "unknown task"))?;
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::config(format!("tolerances.{key}"), "must be positive"));
        }
        tolerances.insert(task, value);
    }

    if raw.tasks.run.is_empty() {
        return Err(Error::config("tasks.run", "at least one task is required"));
    }
    let mut tasks = Vec::new();
    for name in &raw.tasks.run {
        let task: Task = name.parse().map_err(|_| Error::config("tasks.run", format!("unknown task `{name}`")))?;
        if task == Task::Curvature && variant == Variant::G {
            return Err(Error::config("tasks.run", "closed-form curvature exists only for variant H"));
        }
        if !tasks.contains(&task) {
            tasks.push(task);
        }
    }
    let formulas = match raw.tasks.formulas.as_deref() {
        None | Some("published") => Formulas::Published,
        Some("rederived") => Formulas::Rederived,
        Some(other) => return Err(Error::config("tasks.formulas", format!("unknown formulas `{other}`"))),
    };

    Ok(RunConfig {
        spec,
        base_fields,
        fiber_fields,
        sampling,
        tolerances,
        tasks,
        formulas,
        csv: raw.output.csv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[chart.a]
catalog = "euclidean:1"
[chart.b]
catalog = "euclidean:1"
[warp]
base = "a"
fiber = "b"
f1 = "x1"
f2 = "y1"
c = 0.5
[tasks]
run = ["metric"]
"#;

    #[test]
    fn minimal_config_is_valid() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.tasks, vec![Task::Metric]);
        assert_eq!(cfg.spec.variant(), Variant::G);
        assert_eq!(cfg.sampling.count, 100);
        assert_eq!(cfg.sampling.seed, 42);
        assert_eq!(cfg.tolerance(Task::Metric), 1e-10);
    }

    #[test]
    fn undefined_chart_is_named() {
        let text = MINIMAL.replace("fiber = \"b\"", "fiber = \"m3\"");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("m3"), "{err}");
        assert!(err.to_string().contains("warp.fiber"));
    }

    #[test]
    fn bad_inputs_name_their_keys() {
        let cases = [
            (MINIMAL.replace("run = [\"metric\"]", "run = []"), "tasks.run"),
            (MINIMAL.replace("run = [\"metric\"]", "run = [\"bogus\"]"), "bogus"),
            (MINIMAL.replace("f2 = \"y1\"", "f2 = \"z1\""), "warp.f2"),
            (MINIMAL.replace("c = 0.5", "c = 0.5\nvariant = \"K\""), "warp.variant"),
            (format!("{MINIMAL}[tolerances]\nmetrik = 1e-3\n"), "tolerances.metrik"),
            (MINIMAL.replace("run = [\"metric\"]", "run = [\"curvature\"]"), "tasks.run"),
            (format!("{MINIMAL}[sampling]\npoints = [[9.0, 1.0]]\n"), "sampling.points[0]"),
        ];
        for (text, key) in cases {
            let err = parse_config(&text).unwrap_err();
            assert!(err.to_string().contains(key), "{key}: {err}");
        }
    }

    #[test]
    fn syntax_errors_carry_location() {
        let err = parse_config("[warp\nbase = 1").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn custom_chart() {
        let text = r#"
[chart.s]
vars = ["u", "v"]
domain = [[0.5, 2.0], [-1.0, 1.0]]
metric = ["1", "0", "u^2"]
[chart.l]
catalog = "euclidean:1"
prefix = "t"
[warp]
base = "s"
fiber = "l"
f1 = "u"
f2 = "1 + t1"
c = 0.2
variant = "H"
[fields]
base = ["u*v"]
[tasks]
run = ["laplacian", "curvature", "laplacian"]
formulas = "rederived"
"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.spec.base().vars(), ["u", "v"]);
        assert_eq!(cfg.spec.fiber().vars(), ["t1"]);
        assert_eq!(cfg.tasks, vec![Task::Laplacian, Task::Curvature]);
        assert_eq!(cfg.formulas, Formulas::Rederived);
        assert_eq!(cfg.base_fields.len(), 1);
    }
}
