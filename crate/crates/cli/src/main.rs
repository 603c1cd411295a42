use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hsm_core::covband::{self, min_eigenvalue, sample_covariance, CovError, SymMatrix};
use hsm_core::harness::{self, Config, HarnessError};
use hsm_core::hierarchy::format::{parse_hierarchy, FormatError};
use hsm_core::hierarchy::{path_decompose, Hierarchy};
use hsm_core::io::{parse_matrix, parse_vector, write_matrix, write_vector, ParseError};
use hsm_core::prox::registry::{build, Algorithm, ProxSetup, Regularizer};
use hsm_core::prox::{BcdOptions, ProxError};

const AFTER_HELP: &str = "\
Exit codes: 0 success, 1 usage error, 2 input error, 3 numerical failure.
HSM_THREADS caps the number of worker threads.";

const SIMULATE_HELP: &str = "\
Config keys (one `key = value` per line, `#` starts a comment; lists are comma-separated):
  experiment      shrinkage-profile | rate-check | mse-comparison | psd-diagnostics | prox-benchmark
  seed            base seed; replicate r uses seed + r
  replicates      number of replicates
  output          CSV path (overridden by --output)
  depth           path depth D for shrinkage-profile
  lambda_count    number of λ values for shrinkage-profile
  p, n            dimensions (p may be a list)
  k, k_stair      bandwidth grids for the moving-average and stair patterns
  patterns        moving-average, stair
  estimators      gl, mgl, log
  grid_size       λ grid length
  grid_ratio      smallest/largest λ on the grid
  x               constant in λ = x·sqrt(log p / n)
  instances       random DAG instances for prox-benchmark
  path_instances  random path instances for prox-benchmark
  max_p           largest p of a random DAG instance
  tol             solver tolerance
  timing          true to add wall-time columns";

#[derive(Parser)]
#[command(name = "hsm", version, about = "Hierarchical group penalties: prox operators, banded covariance estimation and experiments", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a prox operator on a vector.
    Prox(ProxArgs),
    /// Banded covariance estimation.
    Covband(CovbandArgs),
    /// Decompose a hierarchy into directed paths.
    Decompose(DecomposeArgs),
    /// Run an experiment from a config file.
    #[command(after_help = SIMULATE_HELP)]
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct ProxArgs {
    #[arg(long = "reg", value_parser = parse_reg)]
    regularizer: Regularizer,
    /// Hierarchy file.
    #[arg(long)]
    hierarchy: PathBuf,
    /// Vector file, one number per line.
    #[arg(long)]
    vector: PathBuf,
    #[arg(long)]
    lambda: f64,
    /// One weight per group in node order.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// auto, naive, path, dual, tree or path-bcd.
    #[arg(long, default_value = "auto", value_parser = parse_algo)]
    algorithm: Algorithm,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Write the solution here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["matrix", "data"]))]
#[command(group = clap::ArgGroup::new("penalty").required(true).args(["lambda", "lambda_grid"]))]
struct CovbandArgs {
    /// gl, mgl or log.
    #[arg(long, default_value = "log")]
    estimator: String,
    /// Symmetric matrix, comma-separated rows.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// n×p data, one observation per row; the sample covariance is banded.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Comma-separated λ values.
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    /// Output file for one λ, or a directory for a grid.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DecomposeArgs {
    hierarchy: PathBuf,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    config: PathBuf,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn parse_reg(s: &str) -> Result<Regularizer, String> {
    s.parse()
}

fn parse_algo(s: &str) -> Result<Algorithm, String> {
    s.parse()
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Numerical(m) => m,
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_err(path: &Path, e: ParseError) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

fn format_err(path: &Path, e: FormatError) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

impl From<ProxError> for Failure {
    fn from(e: ProxError) -> Self {
        match e {
            ProxError::NotConverged { .. } | ProxError::RootFinding { .. } => Failure::Numerical(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<CovError> for Failure {
    fn from(e: CovError) -> Self {
        match e {
            CovError::Prox(p) => p.into(),
            CovError::Factorization => Failure::Numerical(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Prox(p) => p.into(),
            HarnessError::Cov(c) => c.into(),
            _ => Failure::Input(e.to_string()),
        }
    }
}

fn load_hierarchy(path: &Path) -> Result<Hierarchy, Failure> {
    parse_hierarchy(&read(path)?).map_err(|e| format_err(path, e))
}

fn cmd_prox(a: &ProxArgs) -> Result<(), Failure> {
    let h = load_hierarchy(&a.hierarchy)?;
    let y = parse_vector(&read(&a.vector)?).map_err(|e| parse_err(&a.vector, e))?;
    let weights = match &a.weights {
        Some(p) => Some(parse_vector(&read(p)?).map_err(|e| parse_err(p, e))?),
        None => None,
    };
    let mut setup = ProxSetup::new(h);
    setup.weights = weights;
    setup.opts = BcdOptions { tol: a.tol, ..BcdOptions::default() };
    setup.certify = true;
    let op = build(a.regularizer, a.algorithm, &setup)?;
    let out = op.apply(&y, a.lambda)?;

    let mut summary = String::new();
    let knots: Vec<String> = out.knots.iter().map(|k| k.to_string()).collect();
    writeln!(summary, "# operator: {}", op.name()).unwrap();
    writeln!(summary, "# knots: {}", knots.join(" ")).unwrap();
    writeln!(summary, "# cycles: {}", out.cycles).unwrap();
    writeln!(summary, "# penalty: {}", out.penalty).unwrap();
    if let Some(v) = out.kkt {
        writeln!(summary, "# max_kkt_violation: {v}").unwrap();
    }
    match &a.output {
        Some(p) => {
            write_out(Some(p), &write_vector(&out.beta))?;
            print!("{summary}");
        }
        None => print!("{summary}{}", write_vector(&out.beta)),
    }
    Ok(())
}

fn cmd_covband(a: &CovbandArgs) -> Result<(), Failure> {
    let est = covband::build_estimator(&a.estimator)?;
    let s = if let Some(p) = &a.matrix {
        SymMatrix::from_rows(&parse_matrix(&read(p)?).map_err(|e| parse_err(p, e))?)?
    } else {
        let p = a.data.as_ref().expect("clap requires one input");
        let rows = parse_matrix(&read(p)?).map_err(|e| parse_err(p, e))?;
        let data = nalgebra::DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
        sample_covariance(&data)?
    };

    if let Some(lambda) = a.lambda {
        let e = est.estimate(&s, lambda)?;
        let min_eig = min_eigenvalue(&e.sigma_hat);
        write_out(a.output.as_deref(), &write_matrix(&e.sigma_hat.to_rows()))?;
        let target = if a.output.is_some() { "stdout" } else { "stderr" };
        let line = format!("# lambda: {lambda}\n# bandwidth: {}\n# min_eigenvalue: {min_eig}\n", e.bandwidth);
        if target == "stdout" {
            print!("{line}");
        } else {
            eprint!("{line}");
        }
        return Ok(());
    }

    let grid = a.lambda_grid.as_ref().expect("clap requires a penalty");
    if grid.is_empty() || grid.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Failure::Input("lambda grid must be non-empty, finite and non-negative".into()));
    }
    let dir = a
        .output
        .as_ref()
        .ok_or_else(|| Failure::Input("--lambda-grid needs --output <directory>".into()))?;
    std::fs::create_dir_all(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
    let mut summary = String::from("index,lambda,bandwidth,min_eigenvalue,frobenius_distance\n");
    for (k, &lambda) in grid.iter().enumerate() {
        let e = est.estimate(&s, lambda)?;
        let path = dir.join(format!("estimate_{k}.csv"));
        write_out(Some(&path), &write_matrix(&e.sigma_hat.to_rows()))?;
        let dist = e.sigma_hat.frobenius_distance(&s)?;
        writeln!(summary, "{k},{lambda},{},{},{dist}", e.bandwidth, min_eigenvalue(&e.sigma_hat)).unwrap();
    }
    write_out(Some(&dir.join("summary.csv")), &summary)
}

fn cmd_decompose(a: &DecomposeArgs) -> Result<(), Failure> {
    let h = load_hierarchy(&a.hierarchy)?;
    let pd = path_decompose(&h);
    let mut out = String::new();
    for path in pd.paths() {
        let labels: Vec<&str> = path.iter().map(|&n| h.label(n)).collect();
        writeln!(out, "path {}", labels.join(" ")).unwrap();
    }
    for (l, groups) in pd.induced_partition().iter().enumerate() {
        writeln!(out).unwrap();
        writeln!(out, "partition {}", l + 1).unwrap();
        for (node, g) in pd.paths()[l].iter().zip(groups) {
            let idx: Vec<String> = g.iter().map(|i| (i + 1).to_string()).collect();
            writeln!(out, "group {} {}", h.label(*node), idx.join(" ")).unwrap();
        }
    }
    write_out(a.output.as_deref(), &out)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let cfg = Config::parse(&read(&a.config)?).map_err(|e| Failure::Input(format!("{}: {e}", a.config.display())))?;
    let output = a.output.clone().or_else(|| cfg.output.clone());
    let table = harness::run(&cfg)?;
    write_out(output.as_deref(), &table.to_csv())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Prox(a) => cmd_prox(a),
        Command::Covband(a) => cmd_covband(a),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
