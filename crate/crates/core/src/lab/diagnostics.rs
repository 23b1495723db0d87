//! Diagnostic functionals measured on solver output.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{critical_radius, Field, PerforatedGrid, Region, TimeField};

/// Default layer radius `(ε a*_ε/2)^{1/2}` around each hole, `a*_ε` the
/// critical radius in dimension `n`.
pub fn default_layer_radius(eps: f64, n: usize) -> Result<f64> {
    Ok((eps * critical_radius(eps, n)? / 2.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerError {
    pub max: f64,
    /// Largest time offset between matched snapshots.
    pub skew: f64,
    pub nodes: usize,
}

/// Multilinear interpolation of a field at `x`, clamped to the box.
pub fn interpolate(f: &Field, x: &[f64]) -> f64 {
    let g = f.grid();
    let n = g.dim();
    let mut base = [0usize; 4];
    let mut frac = [0.0; 4];
    for d in 0..n {
        let s = ((x[d] - g.lo()[d]) / g.h()).clamp(0.0, (g.counts()[d] - 1) as f64);
        let i = (s.floor() as usize).min(g.counts()[d] - 2);
        base[d] = i;
        frac[d] = s - i as f64;
    }
    let v = f.values();
    let mut acc = 0.0;
    for corner in 0..(1usize << n) {
        let mut w = 1.0;
        let mut idx = 0;
        for d in 0..n {
            let bit = (corner >> d) & 1;
            w *= if bit == 1 { frac[d] } else { 1.0 - frac[d] };
            idx += (base[d] + bit) * g.strides()[d];
        }
        if w != 0.0 {
            acc += w * v[idx];
        }
    }
    acc
}

fn same_box(a: &PerforatedGrid, b: &PerforatedGrid) -> bool {
    let tol = 1e-9 * a.h().max(b.h());
    a.dim() == b.dim()
        && a.lo().iter().zip(b.lo()).all(|(x, y)| (x - y).abs() <= tol)
        && a.hi().iter().zip(b.hi()).all(|(x, y)| (x - y).abs() <= tol)
}

/// Max of `|u_ε - u|` over snapshots and over nodes farther than
/// `layer_radius` from every lattice point; `u` is interpolated onto the grid
/// of `u_ε` and matched to the nearest snapshot in time.
pub fn error_outside_layer(u_eps: &TimeField, u_limit: &TimeField, layer_radius: Option<f64>) -> Result<LayerError> {
    let g = u_eps.grid();
    let lg = u_limit.grid();
    if !same_box(g, lg) {
        return Err(Error::Resample("trajectories live on different boxes".into()));
    }
    let span = u_eps.dt().max(u_limit.dt());
    if (u_eps.final_time() - u_limit.final_time()).abs() > span * (1.0 + 1e-9)
        || (u_eps.t0() - u_limit.t0()).abs() > span * (1.0 + 1e-9)
    {
        return Err(Error::Resample(format!(
            "time windows differ: [{}, {}] vs [{}, {}]",
            u_eps.t0(),
            u_eps.final_time(),
            u_limit.t0(),
            u_limit.final_time()
        )));
    }
    let radius = match (layer_radius, g.lattice()) {
        (Some(r), _) => r,
        (None, Some(l)) => default_layer_radius(l.eps, g.dim())?,
        (None, None) => 0.0,
    };
    let n = g.dim();
    let mut x = [0.0; 4];
    let mut nodes = Vec::new();
    for i in 0..g.len() {
        g.coords(i, &mut x);
        if g.lattice_distance(&x[..n]).is_none_or(|d| d > radius) {
            nodes.push(i);
        }
    }
    if nodes.is_empty() {
        return Err(Error::EmptySet(format!("layer of radius {radius} covers every node")));
    }
    let coords: Vec<[f64; 4]> = nodes
        .iter()
        .map(|&i| {
            let mut c = [0.0; 4];
            g.coords(i, &mut c);
            c
        })
        .collect();
    let shared = std::sync::Arc::ptr_eq(g, lg);
    let (mut worst, mut skew) = (0.0f64, 0.0f64);
    for (k, snap) in u_eps.snapshots().iter().enumerate() {
        let t = u_eps.time(k);
        let j = (((t - u_limit.t0()) / u_limit.dt()).round().max(0.0) as usize).min(u_limit.len() - 1);
        skew = skew.max((u_limit.time(j) - t).abs());
        let lim = &u_limit.snapshots()[j];
        let v = snap.values();
        for (&i, c) in nodes.iter().zip(&coords) {
            let reference = if shared {
                lim.values()[i]
            } else {
                interpolate(lim, &c[..n])
            };
            worst = worst.max((v[i] - reference).abs());
        }
    }
    Ok(LayerError {
        max: worst,
        skew,
        nodes: nodes.len(),
    })
}

fn eps_steps(g: &PerforatedGrid, eps: f64) -> Result<usize> {
    let s = (eps / g.h()).round();
    if s < 1.0 || (s * g.h() - eps).abs() > 1e-9 * eps {
        return Err(Error::Alignment(format!(
            "eps = {eps} is not a multiple of h = {}",
            g.h()
        )));
    }
    Ok(s as usize)
}

/// Max over nodes and axis directions of `|f(x + εe) - f(x)|/ε`, with `f`
/// extended by zero outside the box.
pub fn difference_quotient_field(f: &Field, eps: f64) -> Result<f64> {
    let g = f.grid();
    let s = eps_steps(g, eps)? as isize;
    let v = f.values();
    let mut worst = 0.0f64;
    for i in 0..g.len() {
        for d in 0..g.dim() {
            for dir in [s, -s] {
                let other = g.shift(i, d, dir).map_or(0.0, |j| v[j]);
                worst = worst.max((other - v[i]).abs());
            }
        }
    }
    Ok(worst / eps)
}

/// [`difference_quotient_field`] maximised over all snapshots.
pub fn difference_quotient_norm(u: &TimeField, eps: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for s in u.snapshots() {
        worst = worst.max(difference_quotient_field(s, eps)?);
    }
    Ok(worst)
}

/// Max over lattice cells of the oscillation of `f` on nodes whose distance
/// to the cell's lattice point lies in `[r_in, r_out]`.
pub fn layer_oscillation(f: &Field, band: (f64, f64)) -> Result<f64> {
    let g = f.grid();
    let lat = g
        .lattice()
        .ok_or_else(|| Error::Geometry("layer oscillation needs a perforated grid".into()))?;
    let (r_in, r_out) = band;
    let n = g.dim();
    let mut x = [0.0; 4];
    let mut cells: HashMap<[i64; 4], (f64, f64)> = HashMap::new();
    for (i, &v) in f.values().iter().enumerate() {
        g.coords(i, &mut x);
        let Some((c, dist)) = g.nearest_hole_center(&x[..n]) else {
            continue;
        };
        if dist < r_in * (1.0 - 1e-12) || dist > r_out * (1.0 + 1e-12) {
            continue;
        }
        let mut key = [0i64; 4];
        for d in 0..n {
            key[d] = (c[d] / lat.eps).round() as i64;
        }
        let e = cells.entry(key).or_insert((f64::INFINITY, f64::NEG_INFINITY));
        e.0 = e.0.min(v);
        e.1 = e.1.max(v);
    }
    if cells.is_empty() {
        return Err(Error::EmptySet(format!("no nodes in the band [{r_in}, {r_out}]")));
    }
    Ok(cells.values().map(|(lo, hi)| hi - lo).fold(0.0, f64::max))
}

/// `max |u^{k+1} - u^k| / dt` over consecutive snapshots.
pub fn time_derivative_norm(u: &TimeField) -> Result<f64> {
    if u.len() < 2 {
        return Err(Error::Precondition(
            "time derivative needs at least two snapshots".into(),
        ));
    }
    let worst = u
        .snapshots()
        .windows(2)
        .map(|w| w[0].max_diff(&w[1]))
        .fold(0.0, f64::max);
    Ok(worst / u.dt())
}

/// Max over snapshots of the one-step difference quotient `|f(x+he) - f(x)|/h`
/// on edges with an endpoint within `reach` of a hole boundary.
pub fn near_hole_gradient(u: &TimeField, reach: f64) -> Result<f64> {
    let g = u.grid();
    let lat = g
        .lattice()
        .ok_or_else(|| Error::Geometry("near-hole gradient needs a perforated grid".into()))?;
    let n = g.dim();
    let limit = lat.hole_radius + reach;
    let mut x = [0.0; 4];
    let near: Vec<usize> = (0..g.len())
        .filter(|&i| {
            g.coords(i, &mut x);
            g.lattice_distance(&x[..n]).is_some_and(|d| d <= limit)
        })
        .collect();
    if near.is_empty() {
        return Err(Error::EmptySet("no nodes near the holes".into()));
    }
    let mut worst = 0.0f64;
    for s in u.snapshots() {
        let v = s.values();
        for &i in &near {
            for d in 0..n {
                for dir in [1, -1] {
                    if let Some(j) = g.shift(i, d, dir) {
                        worst = worst.max((v[j] - v[i]).abs());
                    }
                }
            }
        }
    }
    Ok(worst / g.h())
}

/// Min over snapshots and hole nodes of `u - φ`.
pub fn min_gap_at_holes(u: &TimeField, phi: impl Fn(&[f64], f64) -> f64) -> Option<f64> {
    let g = u.grid();
    let n = g.dim();
    let holes: Vec<usize> = (0..g.len()).filter(|&i| g.region(i) == Region::Hole).collect();
    if holes.is_empty() {
        return None;
    }
    let mut x = [0.0; 4];
    let mut gap = f64::INFINITY;
    for (k, s) in u.snapshots().iter().enumerate() {
        let t = u.time(k);
        for &i in &holes {
            g.coords(i, &mut x);
            gap = gap.min(s.values()[i] - phi(&x[..n], t));
        }
    }
    Some(gap)
}
