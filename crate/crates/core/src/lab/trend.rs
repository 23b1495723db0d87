//! Trend rules applied to study columns.

use crate::error::{Error, Result};

/// Per-step slack of the monotonicity rules, relative to the current value.
pub const SLACK: f64 = 0.02;

/// `x_{i+1} < x_i + slack·|x_i|` for every consecutive pair.
pub fn decreasing(vals: &[f64], slack: f64) -> bool {
    vals.windows(2).all(|w| w[1] < w[0] + slack * w[0].abs())
}

/// `x_{i+1} > x_i - slack·|x_i|` for every consecutive pair.
pub fn increasing(vals: &[f64], slack: f64) -> bool {
    vals.windows(2).all(|w| w[1] > w[0] - slack * w[0].abs())
}

/// `max <= factor·min` over `vals[skip..]`, all values finite and non-negative.
pub fn bounded(vals: &[f64], skip: usize, factor: f64) -> bool {
    let tail = &vals[skip.min(vals.len())..];
    if tail.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return false;
    }
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = tail.iter().copied().fold(0.0, f64::max);
    tail.is_empty() || hi <= factor * lo
}

/// Least-squares slope of `ln y` against `ln x`; `None` with fewer than two
/// positive pairs.
pub fn fit_exponent(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Non-empty, positive, strictly decreasing.
pub fn check_eps_list(eps: &[f64]) -> Result<()> {
    if eps.is_empty() {
        return Err(Error::Config("eps list is empty".into()));
    }
    if eps.iter().any(|e| !(*e > 0.0 && *e < f64::INFINITY)) {
        return Err(Error::Config(format!("eps values must be positive, got {eps:?}")));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config(format!(
            "eps list must be strictly decreasing, got {eps:?}"
        )));
    }
    Ok(())
}
