//! Explicit solvers for the oscillating-obstacle heat problem and its limits.
//!
//! All schemes update interior nodes from a read-only copy of the previous
//! step (double buffering) and keep `u = 0` on the outer boundary. The
//! obstacle acts only at HOLE nodes, where `φ_ε = φ`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correctors::{Regime, RegimeSpec};
use crate::error::{Error, Result};
use crate::grid::{Field, PerforatedGrid, Region, TimeField};

const PAR_MIN: usize = 1 << 14;

/// Blow-up threshold relative to the initial scale.
pub const BLOWUP_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PenaltyShape {
    PiecewiseLinear,
    /// `-(1 - s/δ)²` on `s <= δ`: concave, nondecreasing, smooth at `s = δ`.
    SmoothConcave,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub delta: f64,
    pub shape: PenaltyShape,
}

impl PenaltyConfig {
    pub fn linear(delta: f64) -> Self {
        PenaltyConfig {
            delta,
            shape: PenaltyShape::PiecewiseLinear,
        }
    }

    /// Largest slope of `β_δ` on the range the scheme visits.
    fn max_slope(&self) -> f64 {
        match self.shape {
            PenaltyShape::PiecewiseLinear => 1.0 / self.delta,
            // slope 2(1 - s/δ)/δ; gaps below -δ are not expected in practice
            PenaltyShape::SmoothConcave => 4.0 / self.delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParabolicRunConfig {
    pub dt: f64,
    pub t_final: f64,
    pub cfl_safety: f64,
    pub tol: f64,
    /// Keep every `save_every`-th step (at least 1).
    pub save_every: usize,
}

impl ParabolicRunConfig {
    pub fn new(dt: f64, t_final: f64) -> Self {
        ParabolicRunConfig {
            dt,
            t_final,
            cfl_safety: 1.0,
            tol: 1e-10,
            save_every: 1,
        }
    }

    /// Largest stable step for the heat stencil with this safety factor.
    pub fn heat_limit(&self, grid: &PerforatedGrid) -> f64 {
        self.cfl_safety * grid.h() * grid.h() / (2.0 * grid.dim() as f64)
    }

    /// Time step actually used: `T / steps` with `steps` a multiple of
    /// `save_every` and `T/steps <= dt`.
    pub fn schedule(&self) -> Result<(usize, f64)> {
        if !(self.dt > 0.0) || !(self.t_final > 0.0) {
            return Err(Error::Config(format!(
                "need dt > 0 and T > 0, got dt = {}, T = {}",
                self.dt, self.t_final
            )));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::Config(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        let every = self.save_every.max(1);
        let mut steps = (self.t_final / self.dt - 1e-9).ceil().max(1.0) as usize;
        steps = steps.div_ceil(every) * every;
        Ok((steps, self.t_final / steps as f64))
    }

    fn check_cfl(&self, grid: &PerforatedGrid, dt: f64) -> Result<()> {
        let limit = self.heat_limit(grid);
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::Config(format!("dt = {dt:e} exceeds the CFL bound {limit:e}")));
        }
        Ok(())
    }
}

/// Penalty profile `β_δ`.
pub fn beta_delta(s: f64, cfg: &PenaltyConfig) -> f64 {
    if s > cfg.delta {
        return 0.0;
    }
    match cfg.shape {
        PenaltyShape::PiecewiseLinear => (s - cfg.delta) / cfg.delta,
        PenaltyShape::SmoothConcave => {
            let t = 1.0 - s / cfg.delta;
            -t * t
        }
    }
}

/// Obstacle evaluated at hole nodes over time.
pub trait Obstacle: Sync {
    fn value(&self, x: &[f64], t: f64) -> f64;
    /// Time-independent obstacles are sampled once.
    fn is_static(&self) -> bool {
        false
    }
}

/// Wraps a closure as an obstacle.
pub struct FnObstacle<F> {
    f: F,
    is_static: bool,
}

impl<F: Fn(&[f64], f64) -> f64 + Sync> FnObstacle<F> {
    pub fn new(f: F) -> Self {
        FnObstacle { f, is_static: false }
    }
    pub fn stationary(f: F) -> Self {
        FnObstacle { f, is_static: true }
    }
}

impl<F: Fn(&[f64], f64) -> f64 + Sync> Obstacle for FnObstacle<F> {
    fn value(&self, x: &[f64], t: f64) -> f64 {
        (self.f)(x, t)
    }
    fn is_static(&self) -> bool {
        self.is_static
    }
}

/// Constant obstacle.
pub struct ConstObstacle(pub f64);

impl Obstacle for ConstObstacle {
    fn value(&self, _x: &[f64], _t: f64) -> f64 {
        self.0
    }
    fn is_static(&self) -> bool {
        true
    }
}

struct ObstacleSampler<'a> {
    obstacle: &'a dyn Obstacle,
    nodes: Vec<usize>,
    coords: Vec<f64>,
    n: usize,
    values: Vec<f64>,
    cached_at: Option<f64>,
}

impl<'a> ObstacleSampler<'a> {
    fn new(grid: &PerforatedGrid, obstacle: &'a dyn Obstacle, nodes: Vec<usize>) -> Self {
        let n = grid.dim();
        let mut coords = vec![0.0; nodes.len() * n];
        for (k, &i) in nodes.iter().enumerate() {
            grid.coords(i, &mut coords[k * n..(k + 1) * n]);
        }
        let values = vec![0.0; nodes.len()];
        ObstacleSampler {
            obstacle,
            nodes,
            coords,
            n,
            values,
            cached_at: None,
        }
    }

    fn at(&mut self, t: f64) -> &[f64] {
        if self.obstacle.is_static() && self.cached_at.is_some() {
            return &self.values;
        }
        if self.cached_at != Some(t) {
            for k in 0..self.nodes.len() {
                self.values[k] = self.obstacle.value(&self.coords[k * self.n..(k + 1) * self.n], t);
            }
            self.cached_at = Some(t);
        }
        &self.values
    }
}

fn hole_nodes(grid: &PerforatedGrid) -> Vec<usize> {
    (0..grid.len()).filter(|&i| grid.region(i) == Region::Hole).collect()
}

fn interior_nodes(grid: &PerforatedGrid) -> Vec<usize> {
    (0..grid.len())
        .filter(|&i| grid.region(i) != Region::OuterBoundary)
        .collect()
}

/// One explicit heat step `next = cur + dt Δ_h cur` on interior nodes.
fn heat_step(grid: &PerforatedGrid, cur: &[f64], next: &mut [f64], dt: f64) {
    let mask = grid.mask();
    let body = |(i, out): (usize, &mut f64)| {
        *out = if mask[i] == Region::OuterBoundary {
            0.0
        } else {
            cur[i] + dt * grid.laplacian(cur, i)
        };
    };
    if next.len() >= PAR_MIN {
        next.par_iter_mut().enumerate().for_each(body);
    } else {
        next.iter_mut().enumerate().for_each(body);
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Marcher {
    grid: Arc<PerforatedGrid>,
    steps: usize,
    dt: f64,
    every: usize,
    scale: f64,
}

impl Marcher {
    fn new(grid: &Arc<PerforatedGrid>, initial: &Field, rcfg: &ParabolicRunConfig, extra_scale: f64) -> Result<Self> {
        if !Arc::ptr_eq(initial.grid(), grid) && initial.grid().len() != grid.len() {
            return Err(Error::Config("initial data lives on a different grid".into()));
        }
        let (steps, dt) = rcfg.schedule()?;
        rcfg.check_cfl(grid, dt)?;
        let scale = initial.max_abs().max(extra_scale).max(1.0);
        Ok(Marcher {
            grid: grid.clone(),
            steps,
            dt,
            every: rcfg.save_every.max(1),
            scale,
        })
    }

    /// Runs `step(k, t_k, cur, next)` and collects snapshots.
    fn run<S>(&self, initial: &[f64], mut step: S) -> Result<TimeField>
    where
        S: FnMut(usize, f64, &[f64], &mut [f64]) -> Result<()>,
    {
        let mut cur = initial.to_vec();
        for (i, v) in cur.iter_mut().enumerate() {
            if self.grid.region(i) == Region::OuterBoundary {
                *v = 0.0;
            }
        }
        let mut next = vec![0.0; cur.len()];
        let mut snaps = vec![Field::new(self.grid.clone(), initial.to_vec())?];
        for k in 0..self.steps {
            step(k, k as f64 * self.dt, &cur, &mut next)?;
            std::mem::swap(&mut cur, &mut next);
            let m = max_abs(&cur);
            if !(m <= BLOWUP_FACTOR * self.scale) {
                return Err(Error::Instability {
                    step: k + 1,
                    detail: format!("max |u| = {m:e} exceeds {BLOWUP_FACTOR}·{:e}", self.scale),
                });
            }
            if (k + 1) % self.every == 0 {
                snaps.push(Field::new(self.grid.clone(), cur.clone())?);
            }
        }
        TimeField::new(self.dt * self.every as f64, 0.0, snaps)
    }
}

/// Plain explicit heat equation with zero data on the outer boundary; holes
/// are ordinary nodes.
pub fn solve_plain_heat(grid: &Arc<PerforatedGrid>, g: &Field, rcfg: &ParabolicRunConfig) -> Result<TimeField> {
    let m = Marcher::new(grid, g, rcfg, 0.0)?;
    let dt = m.dt;
    m.run(g.values(), |_, _, cur, next| {
        heat_step(grid, cur, next, dt);
        Ok(())
    })
}

fn check_compatible(grid: &PerforatedGrid, obstacle: &dyn Obstacle, g: &Field, tol: f64) -> Result<()> {
    let n = grid.dim();
    let mut x = [0.0; 4];
    for i in hole_nodes(grid) {
        grid.coords(i, &mut x);
        let phi = obstacle.value(&x[..n], 0.0);
        if g.values()[i] < phi - tol {
            return Err(Error::Precondition(format!(
                "initial data below the obstacle at node {i}: g = {}, phi = {phi}",
                g.values()[i]
            )));
        }
    }
    Ok(())
}

/// Penalized scheme `u += dt (Δ_h u - β_δ(u - φ_ε))`, penalty at hole nodes.
pub fn solve_obstacle_heat_penalized(
    grid: &Arc<PerforatedGrid>,
    obstacle: &dyn Obstacle,
    g: &Field,
    pcfg: &PenaltyConfig,
    rcfg: &ParabolicRunConfig,
) -> Result<TimeField> {
    if !(pcfg.delta > 0.0) {
        return Err(Error::Config(format!(
            "penalty width must be positive, got {}",
            pcfg.delta
        )));
    }
    check_compatible(grid, obstacle, g, rcfg.tol)?;
    let holes = hole_nodes(grid);
    let phi_scale = {
        let mut s = ObstacleSampler::new(grid, obstacle, holes.clone());
        max_abs(s.at(0.0))
    };
    let m = Marcher::new(grid, g, rcfg, phi_scale)?;
    let dt = m.dt;
    // explicit penalty term stays monotone only if dt·(2n/h² + β') <= 1
    let bound = 1.0 / (2.0 * grid.dim() as f64 / (grid.h() * grid.h()) + pcfg.max_slope());
    if dt > bound * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "dt = {dt:e} exceeds the penalized stability bound {bound:e}"
        )));
    }
    let mut sampler = ObstacleSampler::new(grid, obstacle, holes.clone());
    m.run(g.values(), |_, t, cur, next| {
        heat_step(grid, cur, next, dt);
        let phi = sampler.at(t);
        for (k, &i) in holes.iter().enumerate() {
            next[i] -= dt * beta_delta(cur[i] - phi[k], pcfg);
        }
        Ok(())
    })
}

/// Projected scheme `u = max(u + dt Δ_h u, φ_ε(t_{k+1}))` at hole nodes.
pub fn solve_obstacle_heat_projected(
    grid: &Arc<PerforatedGrid>,
    obstacle: &dyn Obstacle,
    g: &Field,
    rcfg: &ParabolicRunConfig,
) -> Result<TimeField> {
    project_on(grid, obstacle, g, rcfg, hole_nodes(grid))
}

fn project_on(
    grid: &Arc<PerforatedGrid>,
    obstacle: &dyn Obstacle,
    g: &Field,
    rcfg: &ParabolicRunConfig,
    nodes: Vec<usize>,
) -> Result<TimeField> {
    let phi_scale = {
        let mut s = ObstacleSampler::new(grid, obstacle, nodes.clone());
        max_abs(s.at(0.0)).min(1e6)
    };
    let m = Marcher::new(grid, g, rcfg, phi_scale)?;
    let dt = m.dt;
    let mut sampler = ObstacleSampler::new(grid, obstacle, nodes.clone());
    m.run(g.values(), |_, t, cur, next| {
        heat_step(grid, cur, next, dt);
        let phi = sampler.at(t + dt);
        for (k, &i) in nodes.iter().enumerate() {
            if next[i] < phi[k] {
                next[i] = phi[k];
            }
        }
        Ok(())
    })
}

/// Homogenized equation `u_t = Δ_h u + κ (φ - u)₊` on the unperforated grid.
pub fn solve_homogenized_heat(
    grid: &Arc<PerforatedGrid>,
    obstacle: &dyn Obstacle,
    g: &Field,
    kappa: f64,
    rcfg: &ParabolicRunConfig,
) -> Result<TimeField> {
    if !(kappa >= 0.0) {
        return Err(Error::Config(format!("kappa must be non-negative, got {kappa}")));
    }
    let (_, dt) = rcfg.schedule()?;
    if dt * kappa > rcfg.cfl_safety {
        return Err(Error::Config(format!(
            "reaction bound violated: dt·kappa = {} > {}",
            dt * kappa,
            rcfg.cfl_safety
        )));
    }
    let interior = interior_nodes(grid);
    let phi_scale = {
        let mut s = ObstacleSampler::new(grid, obstacle, interior.clone());
        max_abs(s.at(0.0)).min(1e6)
    };
    let m = Marcher::new(grid, g, rcfg, phi_scale)?;
    let mut sampler = ObstacleSampler::new(grid, obstacle, interior.clone());
    let mut pos = vec![usize::MAX; grid.len()];
    for (k, &i) in interior.iter().enumerate() {
        pos[i] = k;
    }
    let mask = grid.mask();
    m.run(g.values(), |_, t, cur, next| {
        let phi = sampler.at(t);
        let body = |(i, out): (usize, &mut f64)| {
            *out = if mask[i] == Region::OuterBoundary {
                0.0
            } else {
                let react = kappa * (phi[pos[i]] - cur[i]).max(0.0);
                cur[i] + dt * (grid.laplacian(cur, i) + react)
            };
        };
        if next.len() >= PAR_MIN {
            next.par_iter_mut().enumerate().for_each(body);
        } else {
            next.iter_mut().enumerate().for_each(body);
        }
        Ok(())
    })
}

/// Limit problem selected by the regime.
///
/// `grid` should be unperforated; holes, if present, are treated as ordinary
/// nodes. VANISHING ignores the obstacle, CRITICAL adds the capacity
/// reaction, DOMINANT projects onto the full obstacle everywhere.
pub fn regime_limit_solver(
    spec: &RegimeSpec,
    grid: &Arc<PerforatedGrid>,
    obstacle: &dyn Obstacle,
    g: &Field,
    rcfg: &ParabolicRunConfig,
) -> Result<TimeField> {
    match spec.regime {
        Regime::Vanishing => solve_plain_heat(grid, g, rcfg),
        Regime::Critical => {
            let kappa = spec
                .kappa
                .ok_or_else(|| Error::Regime("critical regime without kappa".into()))?;
            solve_homogenized_heat(grid, obstacle, g, kappa, rcfg)
        }
        Regime::Dominant => project_on(grid, obstacle, g, rcfg, interior_nodes(grid)),
    }
}

/// Max over interior nodes and steps of `|u^{k+1} - u^k - dt Δ_h u^k|/dt`.
pub fn heat_residual(u: &TimeField) -> f64 {
    let grid = u.grid();
    let dt = u.dt();
    let mut worst = 0.0f64;
    for w in u.snapshots().windows(2) {
        let (a, b) = (w[0].values(), w[1].values());
        for i in 0..grid.len() {
            if grid.region(i) == Region::OuterBoundary {
                continue;
            }
            let r = (b[i] - a[i]) / dt - grid.laplacian(a, i);
            worst = worst.max(r.abs());
        }
    }
    worst
}
