//! Sublinear eigenvalue problem `Δφ + φ^p = 0` by monotone iteration.
//!
//! Each sweep solves `(-Δ_h + κ) φ^{k+1} = (φ^k)^p` with zero data on holes
//! and the outer boundary. Started above the solution the iterates decrease
//! pointwise; started below they increase. Both limits coincide with the
//! positive solution.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::correctors::{CellSolution, Regime, RegimeSpec};
use crate::error::{Error, Result};
use crate::grid::{Field, PerforatedGrid, Region};
use crate::linalg::{DirichletOperator, Unknowns};

#[derive(Debug, Clone)]
pub struct EigenProblem {
    pub grid: Arc<PerforatedGrid>,
    pub p: f64,
    pub kappa: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl EigenProblem {
    pub fn new(grid: Arc<PerforatedGrid>, p: f64) -> Self {
        EigenProblem {
            grid,
            p,
            kappa: 0.0,
            tol: 1e-10,
            max_iter: 500,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::Config(format!("exponent p must lie in (0, 1), got {}", self.p)));
        }
        if !(self.kappa >= 0.0) {
            return Err(Error::Config(format!("kappa must be non-negative, got {}", self.kappa)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Starting point of the monotone iteration.
#[derive(Debug, Clone)]
pub enum Start {
    /// Barrier `h⁺` with `(-Δ_h + κ) h⁺ = M^p + 1`; iterates decrease.
    Supersolution,
    /// Small multiple of the principal Dirichlet eigenfunction; iterates increase.
    Subsolution,
    /// Caller-supplied start; no monotonicity is asserted.
    Given(Field),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Decreasing,
    Increasing,
    Unchecked,
}

#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub phi: Field,
    pub lambda: f64,
    pub iterations: usize,
    /// Max-norm of the last update.
    pub residual: f64,
    /// Max-norm of `(-Δ_h + κ) φ - φ^p` over the unknowns.
    pub equation_residual: f64,
    pub p: f64,
    pub kappa: f64,
}

impl EigenSolution {
    /// `φ̃ = φ / ‖φ‖_{p+1}`.
    pub fn normalized(&self) -> Field {
        let norm = lp_norm(&self.phi, self.p + 1.0);
        let v = self.phi.values().iter().map(|x| x / norm).collect();
        Field::new(self.phi.grid().clone(), v).expect("same grid")
    }
}

fn lp_norm(f: &Field, q: f64) -> f64 {
    let vol = f.grid().cell_volume();
    (f.values().iter().map(|v| v.abs().powf(q)).sum::<f64>() * vol).powf(1.0 / q)
}

/// Discrete Dirichlet energy `Σ_edges ((φ_i - φ_j)/h)² h^n + κ Σ φ² h^n`.
pub fn dirichlet_energy(f: &Field, kappa: f64) -> f64 {
    let g = f.grid();
    let v = f.values();
    let mut acc = 0.0;
    let mut idx = [0usize; 4];
    for i in 0..g.len() {
        g.multi_index(i, &mut idx);
        for d in 0..g.dim() {
            if idx[d] + 1 < g.counts()[d] {
                let j = i + g.strides()[d];
                let diff = (v[j] - v[i]) / g.h();
                acc += diff * diff;
            }
        }
        acc += kappa * v[i] * v[i];
    }
    acc * g.cell_volume()
}

/// `λ = ‖φ‖²_{p+1} / E(φ)`, so that `φ = λ^{1/(1-p)} φ̃` at a solution.
pub fn variational_lambda(phi: &Field, p: f64, kappa: f64) -> f64 {
    let num = lp_norm(phi, p + 1.0);
    num * num / dirichlet_energy(phi, kappa)
}

fn solve_impl(prob: &EigenProblem, unknowns: Unknowns, start: Start) -> Result<EigenSolution> {
    prob.validate()?;
    let grid = &prob.grid;
    let op = DirichletOperator::new(grid, unknowns, prob.kappa);
    let inner_tol = prob.tol / 10.0;
    let inner_max = 50 * grid.len().max(100);
    let p = prob.p;

    let (mut phi, direction) = match start {
        Start::Supersolution => {
            let mut e = vec![0.0; grid.len()];
            let ones: Vec<f64> = vec![1.0; grid.len()];
            op.solve(&ones, &mut e, inner_tol.min(1e-12), inner_max)?;
            let big_e = e.iter().copied().fold(0.0, f64::max);
            // any M with (M^p + 1)·E <= M keeps h⁺ <= M
            let m = 1.0 + (2.0 * big_e).powf(1.0 / (1.0 - p)) + 2.0 * big_e;
            let rhs = vec![m.powf(p) + 1.0; grid.len()];
            let mut hp = e;
            for v in hp.iter_mut() {
                *v *= m.powf(p) + 1.0;
            }
            op.solve(&rhs, &mut hp, inner_tol, inner_max)?;
            (hp, Direction::Decreasing)
        }
        Start::Subsolution => {
            let (e1, lambda1) = principal_eigenfunction(&op, inner_tol, inner_max)?;
            // c e₁ is a subsolution when λ₁ c e₁ <= (c e₁)^p, i.e. c <= λ₁^{-1/(1-p)}
            let c = (0.5 / lambda1).powf(1.0 / (1.0 - p));
            (e1.iter().map(|v| c * v).collect(), Direction::Increasing)
        }
        Start::Given(f) => {
            if f.values().len() != grid.len() {
                return Err(Error::Config("start field does not match the grid".into()));
            }
            (f.into_values(), Direction::Unchecked)
        }
    };
    for (v, &a) in phi.iter_mut().zip(op.active()) {
        if !a {
            *v = 0.0;
        }
    }

    let mut rhs = vec![0.0; grid.len()];
    let mut iterations = 0;
    let mut update = f64::INFINITY;
    while iterations < prob.max_iter {
        iterations += 1;
        for (r, &v) in rhs.iter_mut().zip(&phi) {
            *r = v.max(0.0).powf(p);
        }
        let mut next = phi.clone();
        op.solve(&rhs, &mut next, inner_tol, inner_max)?;
        update = 0.0;
        for (i, (&a, &b)) in phi.iter().zip(&next).enumerate() {
            let d = b - a;
            update = update.max(d.abs());
            let excess = match direction {
                Direction::Decreasing => d,
                Direction::Increasing => -d,
                Direction::Unchecked => continue,
            };
            if excess > prob.tol / 2.0 {
                return Err(Error::Monotonicity {
                    iteration: iterations,
                    node: i,
                    excess,
                });
            }
        }
        phi = next;
        if phi.iter().all(|&v| v.abs() < prob.tol) {
            return Err(Error::Degenerate(format!(
                "iteration collapsed to the zero solution after {iterations} steps"
            )));
        }
        if update <= prob.tol {
            break;
        }
    }
    if update > prob.tol {
        return Err(Error::IterationLimit {
            iterations,
            residual: update,
        });
    }

    let mut lhs = vec![0.0; grid.len()];
    op.apply(&phi, &mut lhs);
    let equation_residual = lhs
        .iter()
        .zip(&phi)
        .zip(op.active())
        .filter(|(_, &a)| a)
        .fold(0.0f64, |m, ((l, v), _)| m.max((l - v.max(0.0).powf(p)).abs()));
    let field = Field::new(grid.clone(), phi)?;
    let lambda = variational_lambda(&field, p, prob.kappa);
    Ok(EigenSolution {
        phi: field,
        lambda,
        iterations,
        residual: update,
        equation_residual,
        p,
        kappa: prob.kappa,
    })
}

/// Inverse power iteration for the smallest eigenpair of the operator,
/// normalized to unit maximum.
fn principal_eigenfunction(op: &DirichletOperator<'_>, tol: f64, max_iter: usize) -> Result<(Vec<f64>, f64)> {
    let mut v: Vec<f64> = op.active().iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
    let mut lambda = 0.0;
    for _ in 0..200 {
        let mut next = v.clone();
        op.solve(&v, &mut next, tol, max_iter)?;
        let max = next.iter().copied().fold(0.0, f64::max);
        if !(max > 0.0) {
            return Err(Error::Degenerate("no interior unknowns".into()));
        }
        let new_lambda = 1.0 / max;
        for x in next.iter_mut() {
            *x /= max;
        }
        let change = next.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        v = next;
        let settled = (new_lambda - lambda).abs() <= 1e-10 * new_lambda && change < 1e-8;
        lambda = new_lambda;
        if settled {
            break;
        }
    }
    Ok((v, lambda))
}

/// Positive solution of `Δφ + φ^p = 0` on the fluid nodes of a perforated grid.
pub fn solve_eigen_perforated(prob: &EigenProblem) -> Result<EigenSolution> {
    solve_eigen_from(prob, Start::Supersolution)
}

/// As [`solve_eigen_perforated`] with an explicit start.
pub fn solve_eigen_from(prob: &EigenProblem, start: Start) -> Result<EigenSolution> {
    if prob.kappa != 0.0 {
        return Err(Error::Config("the perforated problem has kappa = 0".into()));
    }
    solve_impl(prob, Unknowns::Fluid, start)
}

/// Positive solution of `Δφ - κφ + φ^p = 0` on the unperforated box.
pub fn solve_eigen_homogenized(prob: &EigenProblem) -> Result<EigenSolution> {
    solve_eigen_homogenized_from(prob, Start::Supersolution)
}

pub fn solve_eigen_homogenized_from(prob: &EigenProblem, start: Start) -> Result<EigenSolution> {
    solve_impl(prob, Unknowns::Interior, start)
}

/// Correctibility residual `|-bκ - (k_{b,ε} - b^p)|` where `k_{b,ε}` is the
/// fluid average of `-b Δ_h w + (b(1-w))^p`, the first term taken from the
/// flux identity.
pub fn correctibility_i_residual(b: f64, spec: &RegimeSpec, cell: &CellSolution, p: f64) -> Result<f64> {
    let kappa = critical_kappa(spec)?;
    if b == 0.0 {
        return Ok(0.0);
    }
    let flux_term = b * cell.hole_flux / cell.fluid_volume;
    let reaction = cell.fluid_average(|w, _| (b * (1.0 - w).max(0.0)).powf(p));
    let k_b = flux_term + reaction;
    Ok((-b * kappa - (k_b - b.powf(p))).abs())
}

pub(crate) fn critical_kappa(spec: &RegimeSpec) -> Result<f64> {
    if spec.regime != Regime::Critical {
        return Err(Error::Regime(format!(
            "expected a critical regime, got {:?}",
            spec.regime
        )));
    }
    spec.kappa
        .ok_or_else(|| Error::Regime("critical regime without kappa".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nondegeneracy {
    pub c_low: f64,
    pub c_high: f64,
    pub degenerate: bool,
    pub samples: usize,
}

/// Min and max of `φ(x + ε n_in)/ε` over face nodes `x` of the box (edges and
/// corners excluded) whose inward ε-neighbour is a fluid node. `φ` is zero on
/// the boundary, so this is the magnitude of the ε-difference quotient.
pub fn discrete_nondegeneracy_report(sol: &EigenSolution, eps: f64) -> Result<Nondegeneracy> {
    let g = sol.phi.grid();
    let steps = (eps / g.h()).round();
    if (steps * g.h() - eps).abs() > 1e-9 * eps || steps < 1.0 {
        return Err(Error::Alignment(format!(
            "eps = {eps} is not a multiple of h = {}",
            g.h()
        )));
    }
    let steps = steps as isize;
    let v = sol.phi.values();
    let (mut lo, mut hi, mut count) = (f64::INFINITY, 0.0f64, 0usize);
    let mut idx = [0usize; 4];
    for i in 0..g.len() {
        if g.boundary_faces(i) != 1 {
            continue;
        }
        g.multi_index(i, &mut idx);
        let d = (0..g.dim())
            .find(|&d| idx[d] == 0 || idx[d] + 1 == g.counts()[d])
            .expect("face node");
        let dir = if idx[d] == 0 { steps } else { -steps };
        let Some(j) = g.shift(i, d, dir) else { continue };
        if g.region(j) != Region::Fluid {
            continue;
        }
        let q = (v[j] - v[i]).abs() / eps;
        lo = lo.min(q);
        hi = hi.max(q);
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptySet(
            "no boundary nodes with a fluid inward neighbour".into(),
        ));
    }
    Ok(Nondegeneracy {
        c_low: lo,
        c_high: hi,
        degenerate: lo <= 0.0,
        samples: count,
    })
}
