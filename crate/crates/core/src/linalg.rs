//! Matrix-free conjugate gradients for masked Dirichlet stencils, plus an
//! n-dimensional FFT built from 1-D passes.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{PerforatedGrid, Region};

/// Below this many nodes the sweeps stay on the calling thread.
const PAR_MIN: usize = 1 << 14;

#[derive(Debug, Clone, Copy)]
pub struct CgStats {
    pub iterations: usize,
    /// Max-norm of the final residual.
    pub residual: f64,
}

/// Which interior nodes carry unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unknowns {
    /// FLUID nodes only: zero Dirichlet data on holes and the outer boundary.
    Fluid,
    /// Every node off the outer boundary; holes are ignored.
    Interior,
}

/// `(-Δ_h + κ)` restricted to an unknown set with zero data elsewhere.
pub struct DirichletOperator<'a> {
    grid: &'a PerforatedGrid,
    active: Vec<bool>,
    kappa: f64,
}

impl<'a> DirichletOperator<'a> {
    pub fn new(grid: &'a PerforatedGrid, unknowns: Unknowns, kappa: f64) -> Self {
        let active = grid
            .mask()
            .iter()
            .map(|&r| match unknowns {
                Unknowns::Fluid => r == Region::Fluid,
                Unknowns::Interior => r != Region::OuterBoundary,
            })
            .collect();
        DirichletOperator { grid, active, kappa }
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let g = self.grid;
        let diag = 2.0 * g.dim() as f64 / (g.h() * g.h()) + self.kappa;
        let inv_h2 = 1.0 / (g.h() * g.h());
        let strides = g.strides();
        let active = &self.active;
        let body = |(i, yi): (usize, &mut f64)| {
            if !active[i] {
                *yi = 0.0;
                return;
            }
            let mut nb = 0.0;
            for &s in strides {
                nb += x[i - s] + x[i + s];
            }
            *yi = diag * x[i] - nb * inv_h2;
        };
        if y.len() >= PAR_MIN {
            y.par_iter_mut().enumerate().for_each(body);
        } else {
            y.iter_mut().enumerate().for_each(body);
        }
    }

    /// Solves `(-Δ_h + κ) x = b` on the active nodes by conjugate gradients,
    /// starting from `x`. Inactive entries of `x` are forced to zero.
    pub fn solve(&self, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<CgStats> {
        for (xi, &a) in x.iter_mut().zip(&self.active) {
            if !a {
                *xi = 0.0;
            }
        }
        let bm: Vec<f64> = b
            .iter()
            .zip(&self.active)
            .map(|(&v, &a)| if a { v } else { 0.0 })
            .collect();
        let g = self.grid;
        let diag = 2.0 * g.dim() as f64 / (g.h() * g.h()) + self.kappa;
        cg(|u, v| self.apply(u, v), &bm, x, tol, max_iter, diag)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    if a.len() >= PAR_MIN {
        a.par_iter().zip(b).map(|(x, y)| x * y).sum()
    } else {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Conjugate gradients for a symmetric positive (semi)definite operator.
/// Stops when the max-norm of the residual is at most `tol`, or at most the
/// rounding floor `64 ε_mach · diag · ‖x‖∞` where `diag` bounds the operator's
/// diagonal.
pub fn cg<A>(apply: A, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize, diag: f64) -> Result<CgStats>
where
    A: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let target = |x: &[f64]| tol.max(64.0 * f64::EPSILON * diag * max_abs(x));
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut res = max_abs(&r);
    if res <= target(x) {
        return Ok(CgStats {
            iterations: 0,
            residual: res,
        });
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::IterationLimit {
                iterations: it,
                residual: res,
            });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = max_abs(&r);
        if res <= target(x) {
            // Guard against drift of the recursive residual.
            apply(x, &mut ap);
            let true_res = b.iter().zip(&ap).fold(0.0f64, |m, (bi, ai)| m.max((bi - ai).abs()));
            if true_res <= target(x) {
                return Ok(CgStats {
                    iterations: it,
                    residual: true_res,
                });
            }
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
            res = true_res;
            // restart along the true residual
            p.copy_from_slice(&r);
            rr = dot(&r, &r);
            continue;
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(Error::IterationLimit {
        iterations: max_iter,
        residual: res,
    })
}

/// In-place FFT over a row-major `size^dim` array, one axis at a time.
/// The inverse is unnormalized.
pub fn fft_nd(data: &mut [Complex64], dim: usize, size: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(size)
    } else {
        planner.plan_fft_forward(size)
    };
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut line = vec![Complex64::new(0.0, 0.0); size];
    for axis in 0..dim {
        let stride = size.pow((dim - 1 - axis) as u32);
        if stride == 1 {
            for chunk in data.chunks_exact_mut(size) {
                fft.process_with_scratch(chunk, &mut scratch);
            }
            continue;
        }
        let block = stride * size;
        for outer in (0..data.len()).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (k, c) in line.iter_mut().enumerate() {
                    *c = data[base + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, c) in line.iter().enumerate() {
                    data[base + k * stride] = *c;
                }
            }
        }
    }
}

/// Eigenvalues of `-h²Δ_h` on the periodic `size^dim` torus, row-major.
pub fn periodic_symbol(dim: usize, size: usize) -> Vec<f64> {
    let one_d: Vec<f64> = (0..size)
        .map(|k| 2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / size as f64).cos())
        .collect();
    let total = size.pow(dim as u32);
    let mut out = vec![0.0; total];
    for (idx, o) in out.iter_mut().enumerate() {
        let mut rem = idx;
        let mut s = 0.0;
        for _ in 0..dim {
            s += one_d[rem % size];
            rem /= size;
        }
        *o = s;
    }
    out
}

/// Mean-zero periodic Green function of `-Δ` on the unit-spacing torus:
/// `-Δ G = δ_0 - 1/size^dim`.
pub fn periodic_green(dim: usize, size: usize) -> Vec<f64> {
    let symbol = periodic_symbol(dim, size);
    let mut buf: Vec<Complex64> = symbol
        .iter()
        .map(|&l| Complex64::new(if l > 0.0 { 1.0 / l } else { 0.0 }, 0.0))
        .collect();
    buf[0] = Complex64::new(0.0, 0.0);
    fft_nd(&mut buf, dim, size, true);
    let scale = 1.0 / symbol.len() as f64;
    buf.iter().map(|c| c.re * scale).collect()
}
