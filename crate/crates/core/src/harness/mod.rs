//! Experiment runner: each experiment turns a [`Config`] into a CSV [`Table`].
//!
//! Results are a pure function of the config. Replicates run in parallel on
//! a rayon pool (capped by `HSM_THREADS`), each with its own generator
//! seeded `seed + replicate`, and rows are written in a fixed order.

mod benchmark;
mod config;
mod covariance;
mod random;
mod shrinkage;

use std::fmt::Write as _;
use std::path::Path;

pub use benchmark::{bench_rows, BenchRow, ProxBenchmark};
pub use config::{Config, Pattern, KEYS};
pub use covariance::{best_study, draw, population, BestStudy, MseComparison, PsdDiagnostics, RateCheck, Replicate};
pub use random::{random_dag, random_path};
pub use shrinkage::ShrinkageProfile;

use crate::covband::CovError;
use crate::prox::ProxError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("config line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("config has no `experiment` key")]
    MissingExperiment,
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("invalid setting: {0}")]
    Setting(String),
    #[error(transparent)]
    Cov(#[from] CovError),
    #[error(transparent)]
    Prox(#[from] ProxError),
    #[error(transparent)]
    Groups(#[from] crate::hierarchy::GroupError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// CSV output with a `#` metadata block above the header row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), ..Default::default() }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            writeln!(out, "# {k} = {v}").expect("writing to a string");
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, cfg: &Config) -> Result<Table, HarnessError>;
}

pub static EXPERIMENTS: &[&dyn Experiment] =
    &[&ShrinkageProfile, &RateCheck, &MseComparison, &PsdDiagnostics, &ProxBenchmark];

pub fn experiment(name: &str) -> Result<&'static dyn Experiment, HarnessError> {
    EXPERIMENTS
        .iter()
        .copied()
        .find(|e| e.name() == name)
        .ok_or_else(|| HarnessError::UnknownExperiment(name.to_string()))
}

/// Runs the configured experiment on a pool sized by `HSM_THREADS`, with
/// the config, seed and crate version in the metadata block.
pub fn run(cfg: &Config) -> Result<Table, HarnessError> {
    let exp = experiment(&cfg.experiment)?;
    let mut table = thread_pool().install(|| exp.run(cfg))?;
    let mut meta = vec![("version".to_string(), env!("CARGO_PKG_VERSION").to_string())];
    meta.extend(cfg.entries().into_iter().filter(|(k, _)| k != "output"));
    meta.append(&mut table.metadata);
    table.metadata = meta;
    Ok(table)
}

pub fn run_to_file(cfg: &Config, path: &Path) -> Result<Table, HarnessError> {
    let table = run(cfg)?;
    std::fs::write(path, table.to_csv())?;
    Ok(table)
}

/// Worker count from `HSM_THREADS`, else the machine's parallelism.
pub fn thread_count() -> usize {
    std::env::var("HSM_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn thread_pool() -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(thread_count()).build().expect("thread pool")
}

pub(crate) fn fmt_f(v: f64) -> String {
    format!("{v}")
}

pub(crate) fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_csv_layout() {
        let mut t = Table::new(&["a", "b"]);
        t.meta("seed", 3);
        t.push(vec!["1".into(), fmt_f(0.1)]);
        assert_eq!(t.to_csv(), "# seed = 3\na,b\n1,0.1\n");
        assert_eq!(t.column("b"), Some(1));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn unknown_experiment() {
        let cfg = Config { experiment: "nope".into(), ..Default::default() };
        assert!(matches!(run(&cfg), Err(HarnessError::UnknownExperiment(_))));
    }
}
