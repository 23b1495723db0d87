//! Radially symmetric two-point problems `w'' + (n-1)/r w' = k` on an annulus.
//!
//! Integrated with classical RK4 in `s = ln r` on the flux form
//! `(w, F = r^{n-1} w')`; the problem is linear, so two shots fix the
//! outer condition exactly.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OuterCondition {
    /// `w'(R) = 0`.
    Neumann,
    /// `w(R) = value`.
    Dirichlet(f64),
}

#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub n: usize,
    /// Sample radii, increasing from the inner radius to the outer radius.
    pub r: Vec<f64>,
    pub w: Vec<f64>,
    /// `r^{n-1} w'(r)`.
    pub flux: Vec<f64>,
}

impl RadialProfile {
    /// Linear interpolation in `ln r`.
    pub fn eval(&self, r: f64) -> f64 {
        let last = self.r.len() - 1;
        if r <= self.r[0] {
            return self.w[0];
        }
        if r >= self.r[last] {
            return self.w[last];
        }
        let j = self.r.partition_point(|&x| x <= r).min(last).max(1);
        let (s0, s1) = (self.r[j - 1].ln(), self.r[j].ln());
        let t = (r.ln() - s0) / (s1 - s0);
        self.w[j - 1] * (1.0 - t) + self.w[j] * t
    }

    /// `w'(a)` at the inner radius.
    pub fn inner_slope(&self) -> f64 {
        self.flux[0] / self.r[0].powi(self.n as i32 - 1)
    }
}

fn integrate(n: usize, a: f64, big_r: f64, k: f64, w0: f64, f0: f64, steps: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let s0 = a.ln();
    let ds = (big_r.ln() - s0) / steps as f64;
    let nf = n as f64;
    let rhs = |s: f64, _w: f64, f: f64| -> (f64, f64) {
        let r = s.exp();
        (f * r.powf(2.0 - nf), k * r.powf(nf))
    };
    let mut r = Vec::with_capacity(steps + 1);
    let mut w = Vec::with_capacity(steps + 1);
    let mut fl = Vec::with_capacity(steps + 1);
    let (mut wc, mut fc) = (w0, f0);
    r.push(a);
    w.push(wc);
    fl.push(fc);
    for i in 0..steps {
        let s = s0 + i as f64 * ds;
        let (k1w, k1f) = rhs(s, wc, fc);
        let (k2w, k2f) = rhs(s + 0.5 * ds, wc + 0.5 * ds * k1w, fc + 0.5 * ds * k1f);
        let (k3w, k3f) = rhs(s + 0.5 * ds, wc + 0.5 * ds * k2w, fc + 0.5 * ds * k2f);
        let (k4w, k4f) = rhs(s + ds, wc + ds * k3w, fc + ds * k3f);
        wc += ds / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        fc += ds / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f);
        r.push((s + ds).exp());
        w.push(wc);
        fl.push(fc);
    }
    (r, w, fl)
}

/// Solves `w'' + (n-1)/r w' = k` on `a < r < R` with `w(a) = inner` and the
/// given outer condition.
pub fn solve_radial(
    n: usize,
    a: f64,
    big_r: f64,
    k: f64,
    inner: f64,
    outer: OuterCondition,
    steps: usize,
) -> Result<RadialProfile> {
    if n < 2 {
        return Err(Error::InvalidDimension(n, "radial problems need n >= 2"));
    }
    if !(a > 0.0 && big_r > a) {
        return Err(Error::Geometry(format!(
            "radial annulus needs 0 < a < R, got a = {a}, R = {big_r}"
        )));
    }
    let steps = steps.max(16);
    // particular shot: w(a) = inner, F(a) = 0; homogeneous shot: w(a) = 0, F(a) = 1
    let (r, wp, fp) = integrate(n, a, big_r, k, inner, 0.0, steps);
    let (_, wh, fh) = integrate(n, a, big_r, 0.0, 0.0, 1.0, steps);
    let c = match outer {
        OuterCondition::Neumann => -fp[steps] / fh[steps],
        OuterCondition::Dirichlet(v) => (v - wp[steps]) / wh[steps],
    };
    let w = wp.iter().zip(&wh).map(|(p, q)| p + c * q).collect();
    let flux = fp.iter().zip(&fh).map(|(p, q)| p + c * q).collect();
    Ok(RadialProfile { n, r, w, flux })
}

/// Surface measure of the unit sphere in `R^n`.
pub fn unit_sphere_area(n: usize) -> f64 {
    // σ_{n-1} = 2 π^{n/2} / Γ(n/2), with Γ at half-integers by recursion
    let half = n as f64 / 2.0;
    let gamma = if n.is_multiple_of(2) {
        (1..n / 2).map(|i| i as f64).product::<f64>()
    } else {
        let mut g = std::f64::consts::PI.sqrt();
        let mut x = 0.5;
        while x < half - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    };
    2.0 * std::f64::consts::PI.powf(half) / gamma
}
