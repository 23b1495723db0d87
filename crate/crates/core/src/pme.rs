//! Porous medium equation on perforated grids.
//!
//! Two explicit solvers: the density form `u_t = Δ_h(u^m)` and the pressure
//! form `v_t = v^{1-1/m}(Δ_h v - κ v₊)`. The pressure form runs on its own
//! clock: the density solution at time `t` corresponds to the pressure
//! solution at time `m·t`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correctors::{CellSolution, RegimeSpec};
use crate::eigen::critical_kappa;
use crate::error::{Error, Result};
use crate::grid::{Field, PerforatedGrid, Region, TimeField};
use crate::heat_obstacle::{beta_delta, ParabolicRunConfig, PenaltyConfig};
use crate::linalg::cg;

const PAR_MIN: usize = 1 << 14;

#[derive(Debug, Clone)]
pub struct PmeProblem {
    pub grid: Arc<PerforatedGrid>,
    pub m: f64,
    /// Initial density, already multiplied by the cutoff if one is used.
    pub g: Field,
    pub rcfg: ParabolicRunConfig,
}

#[derive(Debug, Clone)]
pub struct PmeRun {
    pub trajectory: TimeField,
    /// Largest negative excursion removed by clamping at zero.
    pub clamp_max: f64,
    pub steps: usize,
}

fn check_m(m: f64) -> Result<()> {
    if !(m > 1.0) {
        return Err(Error::Config(format!("PME exponent must exceed 1, got {m}")));
    }
    Ok(())
}

fn evolving(grid: &PerforatedGrid, i: usize) -> bool {
    grid.region(i) == Region::Fluid
}

/// Density form on the fluid nodes; zero on holes and the outer boundary.
pub fn solve_pme_perforated(prob: &PmeProblem) -> Result<PmeRun> {
    check_m(prob.m)?;
    let grid = &prob.grid;
    let m = prob.m;
    if prob.g.values().iter().any(|&v| v < 0.0) {
        return Err(Error::Domain("initial density must be non-negative".into()));
    }
    let (steps, dt) = prob.rcfg.schedule()?;
    let every = prob.rcfg.save_every.max(1);
    let h2 = grid.h() * grid.h();
    let n = grid.dim() as f64;
    let mut u: Vec<f64> = (0..grid.len())
        .map(|i| if evolving(grid, i) { prob.g.values()[i] } else { 0.0 })
        .collect();
    let mut snaps = vec![Field::new(grid.clone(), u.clone())?];
    let mut pw = vec![0.0; u.len()];
    let mut next = vec![0.0; u.len()];
    let mut clamp_max = 0.0f64;
    for k in 0..steps {
        let umax = u.iter().copied().fold(0.0, f64::max);
        let limit = prob.rcfg.cfl_safety * h2 / (2.0 * n * m * umax.powf(m - 1.0));
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::Instability {
                step: k,
                detail: format!("dt = {dt:e} exceeds the degenerate CFL bound {limit:e}"),
            });
        }
        for (p, &v) in pw.iter_mut().zip(&u) {
            *p = v.powf(m);
        }
        let body = |(i, out): (usize, &mut f64)| {
            *out = if evolving(grid, i) {
                u[i] + dt * grid.laplacian(&pw, i)
            } else {
                0.0
            };
        };
        if next.len() >= PAR_MIN {
            next.par_iter_mut().enumerate().for_each(body);
        } else {
            next.iter_mut().enumerate().for_each(body);
        }
        for v in next.iter_mut() {
            if *v < 0.0 {
                if *v < -prob.rcfg.tol {
                    return Err(Error::PositivityLoss { step: k + 1, min: *v });
                }
                clamp_max = clamp_max.max(-*v);
                *v = 0.0;
            }
        }
        std::mem::swap(&mut u, &mut next);
        if (k + 1) % every == 0 {
            snaps.push(Field::new(grid.clone(), u.clone())?);
        }
    }
    Ok(PmeRun {
        trajectory: TimeField::new(dt * every as f64, 0.0, snaps)?,
        clamp_max,
        steps,
    })
}

/// `v = u^m` on the pressure clock `s = m t`.
pub fn pressure_transform(u: &TimeField, m: f64) -> Result<TimeField> {
    check_m(m)?;
    let mut snaps = Vec::with_capacity(u.len());
    for s in u.snapshots() {
        if let Some(bad) = s.values().iter().find(|&&x| x < 0.0) {
            return Err(Error::Domain(format!("negative density {bad} cannot be transformed")));
        }
        let v = s.values().iter().map(|x| x.powf(m)).collect();
        snaps.push(Field::new(s.grid().clone(), v)?);
    }
    Ok(TimeField::new(u.dt(), u.t0(), snaps)?.rescale_time(m))
}

/// `α = (m/(m-1))^{m/(m-1)}`.
pub fn barrier_alpha(m: f64) -> f64 {
    let b = barrier_exponent(m);
    b.powf(b)
}

/// `β = m/(m-1)`, the decay exponent of the barrier.
pub fn barrier_exponent(m: f64) -> f64 {
    m / (m - 1.0)
}

/// `V_{ε,λ}(x, t) = α φ_ε(x) / (λ + t)^{m/(m-1)}`.
pub fn self_similar_barrier(phi_eps: &Field, m: f64, lambda: f64, t: f64) -> Field {
    let scale = barrier_alpha(m) / (lambda + t).powf(barrier_exponent(m));
    let v = phi_eps.values().iter().map(|p| scale * p).collect();
    Field::new(phi_eps.grid().clone(), v).expect("same grid")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichResult {
    /// Lower-barrier parameter; infinite when the lower barrier is trivial.
    pub lambda1: f64,
    pub lambda2: f64,
    pub pass: bool,
    /// Largest `V_{λ₁} - v` over all snapshots.
    pub lower_excess: f64,
    /// Largest `v - V_{λ₂}` over all snapshots.
    pub upper_excess: f64,
    /// `(snapshot, node)` of the first violation, if any.
    pub first_violation: Option<(usize, usize)>,
}

/// Calibrates `λ₁ >= λ₂` at the first snapshot and checks
/// `V_{λ₁} <= v <= V_{λ₂}` (up to `tol`) at every snapshot.
pub fn barrier_sandwich_check(v: &TimeField, phi_eps: &Field, m: f64, tol: f64) -> Result<SandwichResult> {
    check_m(m)?;
    let alpha = barrier_alpha(m);
    let beta = barrier_exponent(m);
    let v0 = v.snapshots()[0].values();
    let t0 = v.t0();
    let phi = phi_eps.values();
    if phi.len() != v0.len() {
        return Err(Error::Config(
            "barrier profile does not match the trajectory grid".into(),
        ));
    }
    let (mut l1, mut l2) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut comparable = 0;
    for (&vi, &pi) in v0.iter().zip(phi) {
        if vi > tol {
            comparable += 1;
            if pi <= 0.0 {
                // no finite upper barrier dominates mass outside supp φ
                l2 = f64::NEG_INFINITY;
                continue;
            }
            let lam = (alpha * pi / vi).powf(1.0 / beta) - t0;
            l1 = l1.max(lam);
            l2 = l2.min(lam);
        } else if pi > 0.0 {
            l1 = f64::INFINITY;
        }
    }
    if comparable == 0 {
        return Err(Error::Degenerate("trajectory vanishes at t = 0".into()));
    }
    let mut lower_excess = f64::NEG_INFINITY;
    let mut upper_excess = f64::NEG_INFINITY;
    let mut first_violation = None;
    for (k, snap) in v.snapshots().iter().enumerate() {
        let t = v.time(k);
        let low = if l1.is_finite() {
            alpha / (l1 + t).powf(beta)
        } else {
            0.0
        };
        let high = if l2.is_finite() && l2 + t > 0.0 {
            alpha / (l2 + t).powf(beta)
        } else {
            f64::INFINITY
        };
        for (i, (&vi, &pi)) in snap.values().iter().zip(phi).enumerate() {
            let lo = low * pi - vi;
            let hi = if high.is_finite() {
                vi - high * pi
            } else if vi > tol {
                f64::INFINITY
            } else {
                0.0
            };
            lower_excess = lower_excess.max(lo);
            upper_excess = upper_excess.max(hi);
            if first_violation.is_none() && (lo > tol || hi > tol) {
                first_violation = Some((k, i));
            }
        }
    }
    Ok(SandwichResult {
        lambda1: l1,
        lambda2: l2,
        pass: first_violation.is_none() && l2 > f64::NEG_INFINITY,
        lower_excess,
        upper_excess,
        first_violation,
    })
}

/// Max over fluid nodes of `|(V(t+dt) - V(t))/dt - V^{1-1/m} Δ_h V(t)|` for
/// the barrier built on `phi_eps`.
pub fn barrier_residual(phi_eps: &Field, m: f64, lambda: f64, t: f64, dt: f64) -> Result<f64> {
    check_m(m)?;
    if !(dt > 0.0) || !(lambda + t > 0.0) {
        return Err(Error::Config(format!(
            "need dt > 0 and λ + t > 0, got dt = {dt}, λ + t = {}",
            lambda + t
        )));
    }
    let grid = phi_eps.grid();
    let now = self_similar_barrier(phi_eps, m, lambda, t);
    let later = self_similar_barrier(phi_eps, m, lambda, t + dt);
    let q = 1.0 - 1.0 / m;
    let (a, b) = (now.values(), later.values());
    Ok((0..grid.len())
        .filter(|&i| grid.region(i) == Region::Fluid)
        .map(|i| ((b[i] - a[i]) / dt - a[i].max(0.0).powf(q) * grid.laplacian(a, i)).abs())
        .fold(0.0, f64::max))
}

/// Penalized initial-data enforcement for the pressure form:
/// `v_t = v^{1-1/m}(Δ_h v + β_δ(δ + Mξ - v))`, fixed value `δ` off the fluid.
#[derive(Debug, Clone)]
pub struct PmePenalty {
    pub penalty: PenaltyConfig,
    pub big_m: f64,
    pub xi: Field,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VNodes {
    /// Fluid nodes evolve; holes and the outer boundary are fixed.
    Fluid,
    /// Every node off the outer boundary evolves.
    Interior,
}

#[derive(Debug, Clone)]
pub struct VFormOptions {
    pub kappa: f64,
    pub nodes: VNodes,
    pub penalty: Option<PmePenalty>,
}

impl VFormOptions {
    pub fn plain(nodes: VNodes) -> Self {
        VFormOptions {
            kappa: 0.0,
            nodes,
            penalty: None,
        }
    }
}

/// Pressure form `v_t = v^{1-1/m}(Δ_h v - κ v₊ [+ β_δ(δ + Mξ - v)])` on the
/// pressure clock.
pub fn solve_pme_vform(
    grid: &Arc<PerforatedGrid>,
    m: f64,
    v0: &Field,
    rcfg: &ParabolicRunConfig,
    opts: &VFormOptions,
) -> Result<PmeRun> {
    check_m(m)?;
    if !(opts.kappa >= 0.0) {
        return Err(Error::Config(format!("kappa must be non-negative, got {}", opts.kappa)));
    }
    let q = 1.0 - 1.0 / m;
    let (steps, dt) = rcfg.schedule()?;
    let every = rcfg.save_every.max(1);
    let h2 = grid.h() * grid.h();
    let n = grid.dim() as f64;
    let evolves: Vec<bool> = (0..grid.len())
        .map(|i| match opts.nodes {
            VNodes::Fluid => grid.region(i) == Region::Fluid,
            VNodes::Interior => grid.region(i) != Region::OuterBoundary,
        })
        .collect();
    let fixed = opts.penalty.as_ref().map_or(0.0, |p| p.penalty.delta);
    let obstacle: Option<Vec<f64>> = opts
        .penalty
        .as_ref()
        .map(|p| p.xi.values().iter().map(|x| p.penalty.delta + p.big_m * x).collect());
    let mut v: Vec<f64> = (0..grid.len())
        .map(|i| if evolves[i] { v0.values()[i].max(0.0) } else { fixed })
        .collect();
    let mut snaps = vec![Field::new(grid.clone(), v.clone())?];
    let mut next = v.clone();
    let mut clamp_max = 0.0f64;
    let slope = opts.penalty.as_ref().map_or(0.0, |p| 1.0 / p.penalty.delta);
    for k in 0..steps {
        let vmax = v.iter().copied().fold(0.0, f64::max);
        let limit = rcfg.cfl_safety / (vmax.powf(q) * (2.0 * n / h2 + opts.kappa + slope)).max(1e-300);
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::Instability {
                step: k,
                detail: format!("dt = {dt:e} exceeds the pressure-form CFL bound {limit:e}"),
            });
        }
        let pen = opts.penalty.as_ref();
        let obs = obstacle.as_deref();
        let body = |(i, out): (usize, &mut f64)| {
            if !evolves[i] {
                *out = fixed;
                return;
            }
            let vi = v[i];
            let vp = vi.max(0.0);
            let mut drive = grid.laplacian(&v, i) - opts.kappa * vp;
            if let (Some(p), Some(o)) = (pen, obs) {
                drive += beta_delta(o[i] - vi, &p.penalty);
            }
            *out = vi + dt * vp.powf(q) * drive;
        };
        if next.len() >= PAR_MIN {
            next.par_iter_mut().enumerate().for_each(body);
        } else {
            next.iter_mut().enumerate().for_each(body);
        }
        for x in next.iter_mut() {
            if *x < 0.0 {
                if *x < -rcfg.tol {
                    return Err(Error::PositivityLoss { step: k + 1, min: *x });
                }
                clamp_max = clamp_max.max(-*x);
                *x = 0.0;
            }
        }
        std::mem::swap(&mut v, &mut next);
        if (k + 1) % every == 0 {
            snaps.push(Field::new(grid.clone(), v.clone())?);
        }
    }
    Ok(PmeRun {
        trajectory: TimeField::new(dt * every as f64, 0.0, snaps)?,
        clamp_max,
        steps,
    })
}

/// Homogenized pressure equation `v_t = v^{1-1/m}(Δ_h v - κ v₊)` on the
/// unperforated grid with `v⁰ = g^m`.
pub fn solve_pme_homogenized(
    grid: &Arc<PerforatedGrid>,
    m: f64,
    kappa: f64,
    g: &Field,
    rcfg: &ParabolicRunConfig,
) -> Result<PmeRun> {
    check_m(m)?;
    let v0 = Field::new(grid.clone(), g.values().iter().map(|x| x.max(0.0).powf(m)).collect())?;
    let opts = VFormOptions {
        kappa,
        nodes: VNodes::Interior,
        penalty: None,
    };
    solve_pme_vform(grid, m, &v0, rcfg, &opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub pass: bool,
    /// `(step, node, increase)` of the first violation.
    pub first_violation: Option<(usize, usize, f64)>,
    pub max_increase: f64,
}

/// Checks `v^{k+1} <= v^k + tol` for all snapshots. The first snapshot must
/// satisfy `Δ_h v⁰ <= 0` at every node that evolves (non-fixed interior
/// nodes whose value differs from the boundary data).
pub fn monotonicity_check(v: &TimeField, tol: f64) -> Result<MonotonicityReport> {
    let grid = v.grid();
    let v0 = v.snapshots()[0].values();
    let scale = v0.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    let mut offending = Vec::new();
    for i in 0..grid.len() {
        if grid.region(i) != Region::Fluid {
            continue;
        }
        let lap = grid.laplacian(v0, i);
        if lap * grid.h() * grid.h() > 1e-12 * scale {
            offending.push(i);
        }
    }
    if !offending.is_empty() {
        let shown: Vec<String> = offending.iter().take(8).map(|i| i.to_string()).collect();
        return Err(Error::Precondition(format!(
            "initial data is not discretely superharmonic at {} nodes (first: {})",
            offending.len(),
            shown.join(", ")
        )));
    }
    let mut first = None;
    let mut max_increase = f64::NEG_INFINITY;
    for (k, w) in v.snapshots().windows(2).enumerate() {
        for (i, (a, b)) in w[0].values().iter().zip(w[1].values()).enumerate() {
            let inc = b - a;
            max_increase = max_increase.max(inc);
            if first.is_none() && inc > tol {
                first = Some((k + 1, i, inc));
            }
        }
    }
    Ok(MonotonicityReport {
        pass: first.is_none(),
        first_violation: first,
        max_increase: max_increase.max(0.0),
    })
}

/// Correctibility residual `|-d^{1+p} κ - avg|` with `avg` the fluid average of
/// `((1-w)^p - 1) d^p c - d^{1+p} (1-w)^p Δ_h w`.
pub fn correctibility_ii_residual(c: f64, d: f64, p: f64, spec: &RegimeSpec, cell: &CellSolution) -> Result<f64> {
    let kappa = critical_kappa(spec)?;
    if d == 0.0 {
        return Ok(0.0);
    }
    let dp = d.powf(p);
    let avg = cell.fluid_average(|w, lap| {
        let s = (1.0 - w).max(0.0).powf(p);
        (s - 1.0) * dp * c - d * dp * s * lap
    });
    Ok((-d * dp * kappa - avg).abs())
}

#[derive(Debug, Clone)]
pub struct CutoffField {
    pub xi: Field,
    pub inner_radius: f64,
    pub outer_radius: f64,
    /// Max of `|Δ_h ξ|·h²/(2n)` over annulus nodes.
    pub harmonic_residual: f64,
}

/// Periodic cutoff: `ξ = 0` within the hole radius, `ξ = 1` beyond
/// `ε^{(n-1)/(n-2)}`, discrete harmonic in between, tiled with period ε.
pub fn build_cutoff_xi(grid: &Arc<PerforatedGrid>) -> Result<CutoffField> {
    let lat = grid
        .lattice()
        .ok_or_else(|| Error::Geometry("cutoff needs a perforated grid".into()))?;
    let n = grid.dim();
    if n < 3 {
        return Err(Error::InvalidDimension(n, "cutoff outer radius needs n >= 3"));
    }
    let h = grid.h();
    let eps = lat.eps;
    let inner = lat.hole_radius;
    let outer = eps.powf((n as f64 - 1.0) / (n as f64 - 2.0));
    if grid.flags().unresolved_hole {
        return Err(Error::Geometry(format!("hole radius {inner} is below h = {h}")));
    }
    if outer < 4.0 * h {
        return Err(Error::Geometry(format!(
            "outer cutoff radius {outer} is below 4h = {}",
            4.0 * h
        )));
    }
    if outer <= inner {
        return Err(Error::Geometry(format!(
            "outer radius {outer} does not exceed the hole radius {inner}"
        )));
    }
    let size = grid.eps_steps().expect("lattice grid");
    let total = size.pow(n as u32);
    // torus cell with the lattice point at index 0
    let offset_of = |idx: usize, out: &mut [f64; 4]| {
        let mut rem = idx;
        for o in out.iter_mut().take(n).rev() {
            let i = rem % size;
            rem /= size;
            *o = if i > size / 2 { i as f64 - size as f64 } else { i as f64 } * h;
        }
    };
    let mut kind = vec![0u8; total]; // 0 inner, 1 annulus, 2 outer
    let mut off = [0.0; 4];
    for (idx, k) in kind.iter_mut().enumerate() {
        offset_of(idx, &mut off);
        let r = off[..n].iter().map(|x| x * x).sum::<f64>().sqrt();
        *k = if grid.in_hole(&off[..n]) {
            0
        } else if r >= outer * (1.0 - 1e-12) {
            2
        } else {
            1
        };
    }
    let neighbours = |idx: usize, out: &mut [usize; 8]| {
        let mut stride = 1;
        for d in 0..n {
            let i = (idx / stride) % size;
            out[2 * d] = if i + 1 == size {
                idx + stride - size * stride
            } else {
                idx + stride
            };
            out[2 * d + 1] = if i == 0 {
                idx + (size - 1) * stride
            } else {
                idx - stride
            };
            stride *= size;
        }
    };
    // -Δ ξ = 0 on the annulus with ξ = 1 on the outer set: rhs from outer neighbours
    let mut rhs = vec![0.0; total];
    let mut nb = [0usize; 8];
    for idx in 0..total {
        if kind[idx] != 1 {
            continue;
        }
        neighbours(idx, &mut nb);
        rhs[idx] = nb[..2 * n].iter().filter(|&&j| kind[j] == 2).count() as f64;
    }
    let apply = |x: &[f64], y: &mut [f64]| {
        let mut nb = [0usize; 8];
        for idx in 0..total {
            if kind[idx] != 1 {
                y[idx] = 0.0;
                continue;
            }
            neighbours(idx, &mut nb);
            let s: f64 = nb[..2 * n].iter().filter(|&&j| kind[j] == 1).map(|&j| x[j]).sum();
            y[idx] = 2.0 * n as f64 * x[idx] - s;
        }
    };
    let mut x = vec![0.0; total];
    cg(apply, &rhs, &mut x, 1e-12, 20 * total, 2.0 * n as f64)?;
    let cell: Vec<f64> = (0..total)
        .map(|i| match kind[i] {
            0 => 0.0,
            1 => x[i].clamp(0.0, 1.0),
            _ => 1.0,
        })
        .collect();
    let mut residual = 0.0f64;
    for idx in 0..total {
        if kind[idx] == 1 {
            neighbours(idx, &mut nb);
            let s: f64 = nb[..2 * n].iter().map(|&j| cell[j]).sum();
            residual = residual.max((s - 2.0 * n as f64 * cell[idx]).abs() / (2.0 * n as f64));
        }
    }
    // tile onto the grid
    let mut xi = vec![0.0; grid.len()];
    let mut multi = [0usize; 4];
    for (i, out) in xi.iter_mut().enumerate() {
        grid.multi_index(i, &mut multi);
        let mut t = 0;
        for d in 0..n {
            let pos = ((grid.lo()[d] / h).round() as i64 + multi[d] as i64).rem_euclid(size as i64);
            t = t * size + pos as usize;
        }
        grid.coords(i, &mut off);
        // lattice points on the outer boundary carry no hole
        *out = if grid.nearest_hole_center(&off[..n]).is_some() {
            cell[t]
        } else {
            1.0
        };
        if grid.region(i) == Region::Hole {
            *out = 0.0;
        }
    }
    Ok(CutoffField {
        xi: Field::new(grid.clone(), xi)?,
        inner_radius: inner,
        outer_radius: outer,
        harmonic_residual: residual,
    })
}

/// `ξ = 0` on hole nodes and 1 elsewhere; used when the cutoff annulus is
/// below grid resolution.
pub fn fluid_indicator(grid: &Arc<PerforatedGrid>) -> Field {
    let v = grid
        .mask()
        .iter()
        .map(|&r| if r == Region::Hole { 0.0 } else { 1.0 })
        .collect();
    Field::new(grid.clone(), v).expect("same grid")
}
