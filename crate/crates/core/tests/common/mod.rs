//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

/// Classical RK4 for `y'' = f(y)` written as a first-order system.
fn rk4_step(f: &dyn Fn(f64) -> f64, y: f64, yp: f64, dx: f64) -> (f64, f64) {
    let k1 = (yp, f(y));
    let k2 = (yp + 0.5 * dx * k1.1, f(y + 0.5 * dx * k1.0));
    let k3 = (yp + 0.5 * dx * k2.1, f(y + 0.5 * dx * k2.0));
    let k4 = (yp + dx * k3.1, f(y + dx * k3.0));
    (
        y + dx / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        yp + dx / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    )
}

/// Integrates `y'' = f(y)` from `y(0) = y0, y'(0) = 0` over `[0, len]`,
/// returning samples at spacing `dx`.
fn integrate(f: &dyn Fn(f64) -> f64, y0: f64, len: f64, dx: f64) -> Vec<f64> {
    let steps = (len / dx).ceil() as usize;
    let dx = len / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let (mut y, mut yp) = (y0, 0.0);
    out.push(y);
    for _ in 0..steps {
        (y, yp) = rk4_step(f, y, yp, dx);
        out.push(y);
    }
    out
}

fn sample(table: &[f64], len: f64, s: f64) -> f64 {
    let pos = (s / len * (table.len() - 1) as f64).clamp(0.0, (table.len() - 1) as f64);
    let i = (pos.floor() as usize).min(table.len() - 2);
    let w = pos - i as f64;
    table[i] * (1.0 - w) + table[i + 1] * w
}

/// Steady state of `-u'' = (1 - u)₊` on `(0, 1)` with zero boundary data,
/// found by shooting from the symmetry point `x = 1/2` on the peak value.
pub struct ReactionShooting {
    table: Vec<f64>,
}

impl ReactionShooting {
    pub fn solve() -> Self {
        let f = |u: f64| -(1.0 - u).max(0.0);
        let end = |peak: f64| *integrate(&f, peak, 0.5, 1e-4).last().unwrap();
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if end(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let peak = 0.5 * (lo + hi);
        ReactionShooting {
            table: integrate(&f, peak, 0.5, 1e-5),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        sample(&self.table, 0.5, (x - 0.5).abs())
    }
}

/// Positive solution of `-φ'' = φ^p` on `(0, 1)` with zero boundary data.
///
/// The profile `f'' = -f^p, f(0) = 1, f'(0) = 0` is shot until its first zero
/// `X`; the scaling `φ(x) = s f(k(x - 1/2))` with `k = 2X`, `s = k^{2/(p-1)}`
/// then fits the interval.
pub struct SublinearShooting {
    table: Vec<f64>,
    reach: f64,
    k: f64,
    s: f64,
}

impl SublinearShooting {
    pub fn solve(p: f64) -> Self {
        let f = move |y: f64| -y.max(0.0).powf(p);
        let dx = 1e-5;
        let (mut y, mut yp) = (1.0, 0.0);
        let mut table = vec![y];
        let reach = loop {
            let (ny, nyp) = rk4_step(&f, y, yp, dx);
            if ny <= 0.0 {
                let frac = y / (y - ny);
                break (table.len() - 1) as f64 * dx + frac * dx;
            }
            (y, yp) = (ny, nyp);
            table.push(y);
        };
        table.push(0.0);
        let k = 2.0 * reach;
        SublinearShooting {
            table,
            reach,
            k,
            s: k.powf(2.0 / (p - 1.0)),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let r = (self.k * (x - 0.5)).abs().min(self.reach);
        let len = (self.table.len() - 1) as f64 * 1e-5;
        self.s * sample(&self.table, len, r).max(0.0)
    }
}

/// Barenblatt profile of `u_t = Δ(u^m)` in `R^n`.
pub fn barenblatt(x: &[f64], t: f64, m: f64, c: f64) -> f64 {
    let n = x.len() as f64;
    let alpha = n / (n * (m - 1.0) + 2.0);
    let beta = alpha / n;
    let k = alpha * (m - 1.0) / (2.0 * m * n);
    let r2: f64 = x.iter().map(|v| v * v).sum();
    t.powf(-alpha) * (c - k * r2 * t.powf(-2.0 * beta)).max(0.0).powf(1.0 / (m - 1.0))
}

/// Directory holding the study configurations shipped with the repository.
pub fn studies_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../studies")
}
