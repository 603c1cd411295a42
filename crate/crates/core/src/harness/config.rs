use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Pattern {
    MovingAverage,
    Stair,
}

impl Pattern {
    pub fn as_str(self) -> &'static str {
        match self {
            Pattern::MovingAverage => "moving-average",
            Pattern::Stair => "stair",
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pattern {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "moving-average" => Ok(Pattern::MovingAverage),
            "stair" => Ok(Pattern::Stair),
            _ => Err(format!("unknown pattern `{s}` (moving-average, stair)")),
        }
    }
}

/// Flat `key = value` configuration. Every field is optional in the file;
/// unset fields take per-experiment defaults when an experiment runs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    pub experiment: String,
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub output: Option<PathBuf>,
    pub depth: Option<usize>,
    pub lambda_count: Option<usize>,
    pub p: Option<Vec<usize>>,
    pub n: Option<usize>,
    pub k: Option<Vec<usize>>,
    pub k_stair: Option<Vec<usize>>,
    pub patterns: Option<Vec<Pattern>>,
    pub estimators: Option<Vec<String>>,
    pub grid_size: Option<usize>,
    pub grid_ratio: Option<f64>,
    pub x: Option<f64>,
    pub instances: Option<usize>,
    pub path_instances: Option<usize>,
    pub max_p: Option<usize>,
    pub tol: Option<f64>,
    pub timing: Option<bool>,
}

/// Keys accepted in a config file, with a one-line description each.
pub const KEYS: &[(&str, &str)] = &[
    ("experiment", "shrinkage-profile | rate-check | mse-comparison | psd-diagnostics | prox-benchmark"),
    ("seed", "base seed; replicate r uses seed + r"),
    ("replicates", "replicates per setting"),
    ("output", "CSV path (the CLI --output flag overrides it)"),
    ("depth", "path length D for shrinkage-profile"),
    ("lambda_count", "number of λ values in [0, 1] for shrinkage-profile"),
    ("p", "comma-separated matrix orders"),
    ("n", "sample size"),
    ("k", "comma-separated bandwidth parameters (moving-average)"),
    ("k_stair", "comma-separated bandwidth parameters (stair, multiples of 5)"),
    ("patterns", "comma-separated: moving-average, stair"),
    ("estimators", "comma-separated: gl, mgl, log"),
    ("grid_size", "number of λ values in the log grid"),
    ("grid_ratio", "smallest grid λ as a fraction of λ_max"),
    ("x", "constant in λ_theory = x·sqrt(log p / n)"),
    ("instances", "random DAGs for prox-benchmark"),
    ("path_instances", "random path graphs for prox-benchmark"),
    ("max_p", "largest parameter count for prox-benchmark"),
    ("tol", "BCD tolerance for prox-benchmark"),
    ("timing", "true to add wall-time columns (output is then not reproducible)"),
];

fn list<T: FromStr>(v: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    v.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|e| format!("`{}`: {e}", t.trim())))
        .collect()
}

fn one<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("`{v}`: {e}"))
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        let mut cfg = Config::default();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| HarnessError::Config { line, message: "expected `key = value`".into() })?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(first) = seen.insert(key.to_string(), line) {
                return Err(HarnessError::Config { line, message: format!("`{key}` already set on line {first}") });
            }
            cfg.set(key, value).map_err(|e| match e {
                None => HarnessError::UnknownKey { line, key: key.to_string() },
                Some(message) => HarnessError::Config { line, message: format!("{key}: {message}") },
            })?;
        }
        if cfg.experiment.is_empty() {
            return Err(HarnessError::MissingExperiment);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), Option<String>> {
        match key {
            "experiment" => self.experiment = v.to_string(),
            "seed" => self.seed = Some(one(v)?),
            "replicates" => self.replicates = Some(one(v)?),
            "output" => self.output = Some(PathBuf::from(v)),
            "depth" => self.depth = Some(one(v)?),
            "lambda_count" => self.lambda_count = Some(one(v)?),
            "p" => self.p = Some(list(v)?),
            "n" => self.n = Some(one(v)?),
            "k" => self.k = Some(list(v)?),
            "k_stair" => self.k_stair = Some(list(v)?),
            "patterns" => self.patterns = Some(list(v)?),
            "estimators" => self.estimators = Some(list(v)?),
            "grid_size" => self.grid_size = Some(one(v)?),
            "grid_ratio" => self.grid_ratio = Some(one(v)?),
            "x" => self.x = Some(one(v)?),
            "instances" => self.instances = Some(one(v)?),
            "path_instances" => self.path_instances = Some(one(v)?),
            "max_p" => self.max_p = Some(one(v)?),
            "tol" => self.tol = Some(one(v)?),
            "timing" => self.timing = Some(one(v)?),
            _ => return Err(None),
        }
        Ok(())
    }

    /// Grids must be positive and the replicate count at least one.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |message: String| Err(HarnessError::Config { line: 0, message });
        for (name, grid) in [("p", &self.p), ("k", &self.k), ("k_stair", &self.k_stair)] {
            if let Some(g) = grid {
                if g.is_empty() || g.contains(&0) {
                    return bad(format!("{name} values must be positive"));
                }
            }
        }
        for (name, v) in [
            ("replicates", self.replicates),
            ("depth", self.depth),
            ("lambda_count", self.lambda_count),
            ("grid_size", self.grid_size),
            ("instances", self.instances),
            ("max_p", self.max_p),
        ] {
            if v == Some(0) {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.n.is_some_and(|n| n < 2) {
            return bad("n must be at least 2".into());
        }
        for (name, v) in [("grid_ratio", self.grid_ratio), ("x", self.x), ("tol", self.tol)] {
            if v.is_some_and(|v| !(v > 0.0 && v.is_finite())) {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.grid_ratio.is_some_and(|r| r >= 1.0) {
            return bad("grid_ratio must be below 1".into());
        }
        if let Some(es) = &self.estimators {
            if let Some(e) = es.iter().find(|e| crate::covband::build_estimator(e).is_err()) {
                return bad(format!("unknown estimator `{e}`"));
            }
        }
        Ok(())
    }

    /// `key = value` lines for every field that is set, in key order.
    pub fn entries(&self) -> Vec<(String, String)> {
        fn join<T: ToString>(v: &[T]) -> String {
            v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
        }
        let mut out = vec![("experiment".to_string(), self.experiment.clone())];
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        push("seed", self.seed.map(|v| v.to_string()));
        push("replicates", self.replicates.map(|v| v.to_string()));
        push("depth", self.depth.map(|v| v.to_string()));
        push("lambda_count", self.lambda_count.map(|v| v.to_string()));
        push("p", self.p.as_deref().map(join));
        push("n", self.n.map(|v| v.to_string()));
        push("k", self.k.as_deref().map(join));
        push("k_stair", self.k_stair.as_deref().map(join));
        push("patterns", self.patterns.as_deref().map(join));
        push("estimators", self.estimators.as_deref().map(join));
        push("grid_size", self.grid_size.map(|v| v.to_string()));
        push("grid_ratio", self.grid_ratio.map(|v| v.to_string()));
        push("x", self.x.map(|v| v.to_string()));
        push("instances", self.instances.map(|v| v.to_string()));
        push("path_instances", self.path_instances.map(|v| v.to_string()));
        push("max_p", self.max_p.map(|v| v.to_string()));
        push("tol", self.tol.map(|v| v.to_string()));
        push("timing", self.timing.map(|v| v.to_string()));
        out
    }
}
