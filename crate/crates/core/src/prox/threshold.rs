use super::ProxError;

fn check(mu: f64) -> Result<(), ProxError> {
    if mu >= 0.0 {
        Ok(())
    } else {
        Err(ProxError::NegativeThreshold(mu))
    }
}

/// Elementwise soft-threshold `y_i (1 - mu/|y_i|)_+`.
pub fn soft_threshold(y: &[f64], mu: f64) -> Result<Vec<f64>, ProxError> {
    check(mu)?;
    Ok(y.iter().map(|&v| soft(v, mu)).collect())
}

/// Groupwise soft-threshold `y (1 - mu/‖y‖₂)_+`; the zero vector maps to itself.
pub fn group_soft_threshold(y: &[f64], mu: f64) -> Result<Vec<f64>, ProxError> {
    check(mu)?;
    let c = shrink_factor(norm(y), mu);
    Ok(y.iter().map(|&v| c * v).collect())
}

pub(crate) fn soft(v: f64, mu: f64) -> f64 {
    if v > mu {
        v - mu
    } else if v < -mu {
        v + mu
    } else {
        0.0
    }
}

/// `(1 - mu/r)_+` with the convention that `r = 0` gives 0.
pub(crate) fn shrink_factor(r: f64, mu: f64) -> f64 {
    if r > mu {
        1.0 - mu / r
    } else if mu == 0.0 && r > 0.0 {
        1.0
    } else {
        0.0
    }
}

pub(crate) fn norm(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}
