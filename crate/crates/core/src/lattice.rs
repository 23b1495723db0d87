//! Capacity of node sets under the discrete Laplacian of `Z^n`.
//!
//! Holes below grid resolution are represented by the node ball whose
//! lattice capacity best matches the capacity of the nominal ball. The
//! free-space lattice Green function is obtained from periodic tori of two
//! sizes, eliminating the leading `size^{2-n}` finite-torus correction.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::periodic_green;
use crate::radial::unit_sphere_area;

/// Offsets up to this many steps per axis are tabulated.
const REACH: usize = 10;

struct GreenTable {
    reach: usize,
    values: Vec<f64>,
}

impl GreenTable {
    fn build(n: usize) -> Self {
        let (small, large) = match n {
            3 => (64, 128),
            _ => (32, 64),
        };
        let gs = periodic_green(n, small);
        let gl = periodic_green(n, large);
        let w = 2f64.powi(n as i32 - 2);
        let side = 2 * REACH + 1;
        let total = side.pow(n as u32);
        let mut values = vec![0.0; total];
        for (t, v) in values.iter_mut().enumerate() {
            let mut rem = t;
            let (mut is, mut il) = (0usize, 0usize);
            for _ in 0..n {
                let off = (rem % side) as isize - REACH as isize;
                rem /= side;
                is = is * small + off.rem_euclid(small as isize) as usize;
                il = il * large + off.rem_euclid(large as isize) as usize;
            }
            *v = (w * gl[il] - gs[is]) / (w - 1.0);
        }
        GreenTable { reach: REACH, values }
    }

    fn get(&self, off: &[isize]) -> f64 {
        let side = 2 * self.reach + 1;
        let mut idx = 0;
        for &o in off.iter().rev() {
            idx = idx * side + (o + self.reach as isize) as usize;
        }
        self.values[idx]
    }
}

fn table(n: usize) -> &'static GreenTable {
    static TABLES: OnceLock<Mutex<HashMap<usize, &'static GreenTable>>> = OnceLock::new();
    let map = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().expect("green table lock");
    guard
        .entry(n)
        .or_insert_with(|| Box::leak(Box::new(GreenTable::build(n))))
}

/// Free-space lattice Green function `G(x)` of `-Δ` on `Z^n` (unit spacing)
/// at an offset with every component at most 10 in magnitude.
pub fn lattice_green(n: usize, offset: &[isize]) -> Result<f64> {
    if !(3..=4).contains(&n) {
        return Err(Error::InvalidDimension(
            n,
            "lattice Green function tabulated for n = 3, 4",
        ));
    }
    if offset.len() != n || offset.iter().any(|o| o.unsigned_abs() > REACH) {
        return Err(Error::Domain(format!("offset {offset:?} outside the tabulated range")));
    }
    Ok(table(n).get(offset))
}

/// Integer offsets `x ∈ Z^n` with `|x|² <= r2`.
pub fn node_ball(n: usize, r2: usize) -> Vec<Vec<isize>> {
    let reach = (r2 as f64).sqrt().floor() as isize;
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p: Vec<isize>| {
                (-reach..=reach).map(move |o| {
                    let mut q = p.clone();
                    q.push(o);
                    q
                })
            })
            .collect();
    }
    out.retain(|p| p.iter().map(|o| (o * o) as usize).sum::<usize>() <= r2);
    out
}

/// Capacity of a node set in units of the grid spacing: `Σ q` where the
/// potential `Σ q_j G(x - x_j)` equals 1 on the set.
pub fn lattice_capacity(n: usize, nodes: &[Vec<isize>]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::EmptySet("node set is empty".into()));
    }
    let m = nodes.len();
    let mut g = DMatrix::zeros(m, m);
    let mut diff = vec![0isize; n];
    for i in 0..m {
        for j in 0..m {
            for d in 0..n {
                diff[d] = nodes[i][d] - nodes[j][d];
            }
            g[(i, j)] = lattice_green(n, &diff)?;
        }
    }
    let q = g
        .lu()
        .solve(&DVector::from_element(m, 1.0))
        .ok_or_else(|| Error::Degenerate("singular lattice capacity system".into()))?;
    Ok(q.sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchedHole {
    /// Node offsets in grid steps.
    pub offsets: Vec<Vec<isize>>,
    /// Radius of the ball with the same capacity, in grid steps.
    pub effective: f64,
}

impl MatchedHole {
    pub fn nodes(&self) -> usize {
        self.offsets.len()
    }

    pub fn offsets_i64(&self) -> Vec<Vec<i64>> {
        self.offsets
            .iter()
            .map(|o| o.iter().map(|&k| k as i64).collect())
            .collect()
    }
}

/// Candidate node sets in order of growing capacity: the origin with the
/// axis neighbours added one at a time, then node balls `|x|² <= r2` for
/// `2 <= r2 <= 30`.
fn candidates(n: usize) -> Vec<Vec<Vec<isize>>> {
    let mut out = Vec::new();
    let mut cross = vec![vec![0isize; n]];
    out.push(cross.clone());
    for d in 0..n {
        for s in [1, -1] {
            let mut e = vec![0isize; n];
            e[d] = s;
            cross.push(e);
            out.push(cross.clone());
        }
    }
    let mut last = cross.len();
    for r2 in 2..=30usize {
        let ball = node_ball(n, r2);
        if ball.len() > last {
            last = ball.len();
            out.push(ball);
        }
    }
    out
}

/// Node set whose capacity-equivalent radius is closest to `target` (both in
/// grid steps); see [`candidates`] for the sets considered.
pub fn capacity_matched_hole(n: usize, target: f64) -> Result<MatchedHole> {
    if !(target > 0.0) {
        return Err(Error::Geometry(format!("target radius must be positive, got {target}")));
    }
    let norm = (n as f64 - 2.0) * unit_sphere_area(n);
    let mut best: Option<MatchedHole> = None;
    for nodes in candidates(n) {
        let cap = lattice_capacity(n, &nodes)?;
        let effective = (cap / norm).powf(1.0 / (n as f64 - 2.0));
        let closer = best
            .as_ref()
            .is_none_or(|b| (b.effective - target).abs() > (effective - target).abs());
        if closer {
            best = Some(MatchedHole {
                offsets: nodes,
                effective,
            });
        }
        if effective > target {
            break;
        }
    }
    Ok(best.expect("at least one candidate"))
}
