use super::{fmt_f, Config, Experiment, HarnessError, Table};
use crate::prox::{mgl_weights, prox_gl_path, prox_log_path, prox_mgl_path};

/// Noiseless depth profiles on a path with one parameter per node: the
/// prox of each regularizer applied to a fixed signal, for λ evenly
/// spaced in `[0, 1]`.
pub struct ShrinkageProfile;

/// `(name, signal)` for the two profiles: linear decay and a half-height step.
pub fn signals(depth: usize) -> Vec<(&'static str, Vec<f64>)> {
    let d = depth as f64;
    vec![
        ("linear", (0..depth).map(|i| 1.0 - i as f64 / d).collect()),
        ("step", (0..depth).map(|i| if 2 * (i + 1) <= depth { 1.0 } else { 0.5 }).collect()),
    ]
}

/// GL with unit weights, LOG with `w_i = √i`, mGL with `w_{ℓ,m} = 1/(m − ℓ + 1)`.
pub fn profile(regularizer: &str, y: &[f64], lambda: f64) -> Result<Vec<f64>, HarnessError> {
    let d = y.len();
    let sizes = vec![1; d];
    Ok(match regularizer {
        "gl" => prox_gl_path(y, &sizes, lambda, &vec![1.0; d])?.beta,
        "log" => {
            let w: Vec<f64> = (1..=d).map(|i| (i as f64).sqrt()).collect();
            prox_log_path(y, &sizes, lambda, &w)?.beta
        }
        "mgl" => prox_mgl_path(y, &sizes, lambda, &mgl_weights(&sizes)?)?.beta,
        other => return Err(HarnessError::Setting(format!("unknown regularizer `{other}`"))),
    })
}

impl Experiment for ShrinkageProfile {
    fn name(&self) -> &'static str {
        "shrinkage-profile"
    }

    fn run(&self, cfg: &Config) -> Result<Table, HarnessError> {
        let depth = cfg.depth.unwrap_or(50);
        let count = cfg.lambda_count.unwrap_or(10);
        let lambdas: Vec<f64> =
            (0..count).map(|k| if count == 1 { 0.0 } else { k as f64 / (count - 1) as f64 }).collect();
        let mut t = Table::new(&["pattern", "regularizer", "lambda", "index", "value"]);
        t.meta("signals", "linear: 1-(i-1)/D; step: 1 for i <= D/2 else 0.5");
        t.meta("weights", "gl: 1; log: sqrt(i); mgl: 1/(m-l+1)");
        for (pattern, y) in signals(depth) {
            for reg in ["gl", "log", "mgl"] {
                for &lambda in &lambdas {
                    for (i, v) in profile(reg, &y, lambda)?.into_iter().enumerate() {
                        t.push(vec![pattern.into(), reg.into(), fmt_f(lambda), (i + 1).to_string(), fmt_f(v)]);
                    }
                }
            }
        }
        Ok(t)
    }
}
