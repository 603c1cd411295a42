use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{fmt_f, random_dag, random_path, Config, Experiment, HarnessError, Table};
use crate::hierarchy::{group_structure_log, path_decompose, Hierarchy, WeightRule};
use crate::prox::{prox_log_naive_bcd, prox_log_path, prox_log_path_bcd, BcdOptions};

/// Outer cycles of naive and path-based BCD for the LOG prox on random
/// DAGs and paths, plus knot and loop counts of the closed form on paths.
pub struct ProxBenchmark;

pub struct BenchRow {
    pub family: &'static str,
    pub instance: usize,
    pub nodes: usize,
    pub p: usize,
    pub edges: usize,
    pub paths: usize,
    pub lambda: f64,
    pub naive_cycles: usize,
    pub path_cycles: usize,
    /// Knots and loop-head evaluations of the closed form (paths only).
    pub knots: Option<(usize, usize)>,
    pub max_diff: f64,
    pub seconds: (f64, f64),
}

/// `λ = 0.3 ‖y‖∞` with `y` standard normal; standard weights `√|g|`.
pub fn bench_instance(
    family: &'static str,
    instance: usize,
    h: &Hierarchy,
    rng: &mut ChaCha8Rng,
    opts: BcdOptions,
) -> Result<BenchRow, HarnessError> {
    let y: Vec<f64> = (0..h.p()).map(|_| StandardNormal.sample(rng)).collect();
    let lambda = 0.3 * y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gs = group_structure_log(h, &WeightRule::SqrtSize)?;
    let pd = path_decompose(h);
    let clock = Instant::now();
    let naive = prox_log_naive_bcd(&y, &gs, lambda, opts)?;
    let t_naive = clock.elapsed().as_secs_f64();
    let clock = Instant::now();
    let path = prox_log_path_bcd(&y, h, &pd, lambda, &gs.weights(), opts)?;
    let t_path = clock.elapsed().as_secs_f64();
    let knots = match h.as_path() {
        Some(order) => {
            let sizes: Vec<usize> = order.iter().map(|&n| h.node(n).len()).collect();
            let yy: Vec<f64> = order.iter().flat_map(|&n| h.node(n).iter().map(|&i| y[i])).collect();
            let w: Vec<f64> = order.iter().map(|&n| gs.group(n).weight).collect();
            let sol = prox_log_path(&yy, &sizes, lambda, &w)?;
            Some((sol.knots.len(), sol.loop_count))
        }
        None => None,
    };
    Ok(BenchRow {
        family,
        instance,
        nodes: h.num_nodes(),
        p: h.p(),
        edges: h.edges().count(),
        paths: pd.len(),
        lambda,
        naive_cycles: naive.cycles,
        path_cycles: path.cycles,
        knots,
        max_diff: naive.beta.iter().zip(&path.beta).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())),
        seconds: (t_naive, t_path),
    })
}

/// Instance `i` of a family uses the generator seeded `seed + i` (paths are
/// offset by 1_000_000). DAGs get 2 to `max_p/5` nodes of size 1 to 4 and
/// edge probability uniform in `[0.05, 0.3]`; paths get depth 2 to 60 and
/// node sizes 1 to 5.
pub fn bench_rows(cfg: &Config) -> Result<Vec<BenchRow>, HarnessError> {
    let seed = cfg.seed.unwrap_or(1);
    let max_p = cfg.max_p.unwrap_or(200);
    let opts = BcdOptions { tol: cfg.tol.unwrap_or(1e-10), ..Default::default() };
    let max_nodes = (max_p / 5).max(2);
    let dags = (0..cfg.instances.unwrap_or(100)).into_par_iter().map(|i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let nodes = rng.random_range(2..=max_nodes);
        let prob = rng.random_range(0.05..=0.3);
        let h = random_dag(&mut rng, nodes, 4, prob);
        bench_instance("dag", i, &h, &mut rng, opts)
    });
    let paths = (0..cfg.path_instances.unwrap_or(20)).into_par_iter().map(|i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1_000_000 + i as u64));
        let depth = rng.random_range(2..=60);
        let h = random_path(&mut rng, depth, 5);
        bench_instance("path", i, &h, &mut rng, opts)
    });
    dags.chain(paths).collect()
}

impl Experiment for ProxBenchmark {
    fn name(&self) -> &'static str {
        "prox-benchmark"
    }

    fn run(&self, cfg: &Config) -> Result<Table, HarnessError> {
        let timing = cfg.timing.unwrap_or(false);
        let mut header = vec![
            "family",
            "instance",
            "nodes",
            "p",
            "edges",
            "paths",
            "lambda",
            "naive_cycles",
            "path_cycles",
            "knots",
            "loops",
            "max_diff",
        ];
        if timing {
            header.extend(["naive_seconds", "path_seconds"]);
        }
        let mut t = Table::new(&header);
        t.meta("lambda", "0.3 * max|y|, y standard normal");
        for r in bench_rows(cfg)? {
            let (knots, loops) = match r.knots {
                Some((k, l)) => (k.to_string(), l.to_string()),
                None => (String::new(), String::new()),
            };
            let mut row = vec![
                r.family.to_string(),
                r.instance.to_string(),
                r.nodes.to_string(),
                r.p.to_string(),
                r.edges.to_string(),
                r.paths.to_string(),
                fmt_f(r.lambda),
                r.naive_cycles.to_string(),
                r.path_cycles.to_string(),
                knots,
                loops,
                fmt_f(r.max_diff),
            ];
            if timing {
                row.push(fmt_f(r.seconds.0));
                row.push(fmt_f(r.seconds.1));
            }
            t.push(row);
        }
        Ok(t)
    }
}
