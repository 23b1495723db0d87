//! Perforated Cartesian grids, scalar fields and trajectories.
//!
//! A [`PerforatedGrid`] is a uniform node grid over an axis-aligned box with
//! an ε-periodic lattice of balls removed. Hole centres sit on `εZ^n`
//! strictly inside the box; a node belongs to a hole when its distance to
//! the nearest interior lattice point is at most the membership radius.
//! Nodes on the box faces are always tagged [`Region::OuterBoundary`].

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when checking that lengths are integer multiples.
const ALIGN_TOL: f64 = 1e-9;

/// Critical hole radius `ε^{n/(n-2)}` for `n >= 3` and `exp(-1/ε²)` for `n = 2`.
pub fn critical_radius(eps: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidDimension(n, "critical radius needs n >= 2"));
    }
    if !(eps > 0.0) {
        return Err(Error::Config(format!("period must be positive, got {eps}")));
    }
    if n == 2 {
        Ok((-1.0 / (eps * eps)).exp())
    } else {
        Ok(eps.powf(critical_exponent(n)))
    }
}

/// The critical exponent `n/(n-2)` (only meaningful for `n >= 3`).
pub fn critical_exponent(n: usize) -> f64 {
    n as f64 / (n as f64 - 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Fluid,
    Hole,
    OuterBoundary,
}

impl Region {
    /// Byte code used by the binary mask export.
    pub fn code(self) -> u8 {
        match self {
            Region::Fluid => 0,
            Region::Hole => 1,
            Region::OuterBoundary => 2,
        }
    }
}

/// Hole lattice parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub eps: f64,
    /// Radius used for the node membership test.
    pub hole_radius: f64,
    /// Geometric radius the holes represent. Equal to `hole_radius` unless the
    /// grid was built with a capacity-matched node set.
    pub nominal_radius: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridFlags {
    pub unresolved_hole: bool,
    pub capacity_matched: bool,
    /// One period cell `[-ε/2, ε/2]^n` with a single hole at the origin.
    pub periodic_cell: bool,
}

#[derive(Debug, Clone)]
pub struct PerforatedGrid {
    n: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    h: f64,
    counts: Vec<usize>,
    strides: Vec<usize>,
    lattice: Option<Lattice>,
    /// Explicit hole node offsets (in grid steps from the lattice point);
    /// overrides the radius test when present.
    stencil: Option<Vec<Vec<i64>>>,
    mask: Vec<Region>,
    flags: GridFlags,
}

fn integral_ratio(num: f64, den: f64) -> Option<i64> {
    let r = num / den;
    let k = r.round();
    if (r - k).abs() <= ALIGN_TOL * r.abs().max(1.0) {
        Some(k as i64)
    } else {
        None
    }
}

impl PerforatedGrid {
    /// Grid without holes.
    pub fn plain(n: usize, bounds: &[(f64, f64)], h: f64) -> Result<Self> {
        Self::build(n, bounds, h, None)
    }

    /// Perforated grid whose holes are node balls of radius `hole_radius`.
    pub fn new(n: usize, bounds: &[(f64, f64)], eps: f64, hole_radius: f64, h: f64) -> Result<Self> {
        Self::build(
            n,
            bounds,
            h,
            Some(Lattice {
                eps,
                hole_radius,
                nominal_radius: hole_radius,
            }),
        )
    }

    /// One period cell `[-ε/2, ε/2]^n` holding a single hole at the origin.
    /// `ε/h` must be even so that the origin is a node.
    pub fn periodic_cell(n: usize, eps: f64, hole_radius: f64, h: f64) -> Result<Self> {
        let steps = integral_ratio(eps, h)
            .filter(|&k| k >= 2 && k % 2 == 0)
            .ok_or_else(|| Error::Alignment(format!("eps/h must be an even integer, got {}", eps / h)))?;
        let half = steps as f64 / 2.0 * h;
        let bounds = vec![(-half, half); n];
        Self::build_inner(
            n,
            &bounds,
            h,
            Some(Lattice {
                eps,
                hole_radius,
                nominal_radius: hole_radius,
            }),
            true,
        )
    }

    /// Perforated grid whose hole node sets use `membership_radius` while
    /// representing balls of radius `nominal_radius`. Used when the holes are
    /// below grid resolution and the node set is chosen to reproduce the
    /// capacity of the nominal ball.
    pub fn with_membership(
        n: usize,
        bounds: &[(f64, f64)],
        eps: f64,
        nominal_radius: f64,
        membership_radius: f64,
        h: f64,
    ) -> Result<Self> {
        let mut grid = Self::build(
            n,
            bounds,
            h,
            Some(Lattice {
                eps,
                hole_radius: membership_radius,
                nominal_radius,
            }),
        )?;
        grid.flags.capacity_matched = true;
        grid.flags.unresolved_hole = nominal_radius < h;
        Ok(grid)
    }

    /// Perforated grid whose holes are the given node offsets (in grid steps)
    /// around each lattice point, representing balls of radius `nominal_radius`.
    pub fn with_hole_nodes(
        n: usize,
        bounds: &[(f64, f64)],
        eps: f64,
        nominal_radius: f64,
        offsets: &[Vec<i64>],
        h: f64,
    ) -> Result<Self> {
        if offsets.is_empty() || offsets.iter().any(|o| o.len() != n) {
            return Err(Error::Geometry(format!("hole offsets must be non-empty {n}-vectors")));
        }
        let reach = offsets
            .iter()
            .map(|o| o.iter().map(|&k| (k * k) as f64).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let mut stencil = offsets.to_vec();
        stencil.sort();
        stencil.dedup();
        let mut grid = Self::build_full(
            n,
            bounds,
            h,
            Some(Lattice {
                eps,
                hole_radius: reach * h,
                nominal_radius,
            }),
            false,
            Some(stencil),
        )?;
        grid.flags.capacity_matched = true;
        grid.flags.unresolved_hole = nominal_radius < h;
        Ok(grid)
    }

    fn build(n: usize, bounds: &[(f64, f64)], h: f64, lattice: Option<Lattice>) -> Result<Self> {
        Self::build_inner(n, bounds, h, lattice, false)
    }

    fn build_inner(n: usize, bounds: &[(f64, f64)], h: f64, lattice: Option<Lattice>, cell: bool) -> Result<Self> {
        Self::build_full(n, bounds, h, lattice, cell, None)
    }

    fn build_full(
        n: usize,
        bounds: &[(f64, f64)],
        h: f64,
        lattice: Option<Lattice>,
        cell: bool,
        stencil: Option<Vec<Vec<i64>>>,
    ) -> Result<Self> {
        if n == 0 || n > 4 {
            return Err(Error::InvalidDimension(n, "grids support 1 <= n <= 4"));
        }
        if bounds.len() != n {
            return Err(Error::Config(format!("expected {n} box extents, got {}", bounds.len())));
        }
        if !(h > 0.0) {
            return Err(Error::Config(format!("grid spacing must be positive, got {h}")));
        }
        let mut counts = Vec::with_capacity(n);
        for &(lo, hi) in bounds {
            if !(hi > lo) {
                return Err(Error::Geometry(format!("empty box extent [{lo}, {hi}]")));
            }
            let cells = integral_ratio(hi - lo, h)
                .ok_or_else(|| Error::Alignment(format!("h = {h} does not divide the extent [{lo}, {hi}]")))?;
            if cells < 2 {
                return Err(Error::Geometry(format!(
                    "extent [{lo}, {hi}] holds fewer than two cells"
                )));
            }
            counts.push(cells as usize + 1);
        }
        if let Some(lat) = &lattice {
            if !(lat.eps > 0.0) || !(lat.hole_radius >= 0.0) {
                return Err(Error::Geometry(format!(
                    "invalid lattice eps = {}, radius = {}",
                    lat.eps, lat.hole_radius
                )));
            }
            if 2.0 * lat.hole_radius >= lat.eps || 2.0 * lat.nominal_radius >= lat.eps {
                return Err(Error::Geometry(format!(
                    "holes touch: 2a = {} >= eps = {}",
                    2.0 * lat.hole_radius.max(lat.nominal_radius),
                    lat.eps
                )));
            }
            if integral_ratio(lat.eps, h).filter(|&k| k >= 1).is_none() {
                return Err(Error::Alignment(format!("h = {h} does not divide eps = {}", lat.eps)));
            }
            for &(lo, hi) in bounds.iter().filter(|_| !cell) {
                if integral_ratio(lo, lat.eps).is_none() || integral_ratio(hi, lat.eps).is_none() {
                    return Err(Error::Alignment(format!(
                        "box extent [{lo}, {hi}] is not a union of eps = {} cells",
                        lat.eps
                    )));
                }
            }
        }
        let mut strides = vec![1usize; n];
        for d in (0..n.saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * counts[d + 1];
        }
        let total: usize = counts.iter().product();
        let mut grid = PerforatedGrid {
            n,
            lo: bounds.iter().map(|b| b.0).collect(),
            hi: bounds.iter().map(|b| b.1).collect(),
            h,
            counts,
            strides,
            lattice,
            stencil,
            mask: Vec::new(),
            flags: GridFlags {
                periodic_cell: cell,
                ..GridFlags::default()
            },
        };
        grid.flags.unresolved_hole = lattice.is_some_and(|l| l.hole_radius < h);
        grid.mask = (0..total).map(|i| grid.classify(i)).collect();
        Ok(grid)
    }

    /// Region of node `idx` recomputed from geometry.
    pub fn classify(&self, idx: usize) -> Region {
        let mut x = [0.0; 4];
        let mut on_boundary = false;
        let mut rem = idx;
        for d in 0..self.n {
            let i = rem / self.strides[d];
            rem %= self.strides[d];
            if i == 0 || i + 1 == self.counts[d] {
                on_boundary = true;
            }
            x[d] = self.lo[d] + i as f64 * self.h;
        }
        if on_boundary {
            return Region::OuterBoundary;
        }
        match self.nearest_hole_center(&x[..self.n]) {
            Some((c, _)) => {
                let mut off = [0.0; 4];
                for d in 0..self.n {
                    off[d] = x[d] - c[d];
                }
                if self.in_hole(&off[..self.n]) {
                    Region::Hole
                } else {
                    Region::Fluid
                }
            }
            None => Region::Fluid,
        }
    }

    /// Whether the displacement `off` from a hole center lies in the hole.
    pub fn in_hole(&self, off: &[f64]) -> bool {
        let Some(lat) = &self.lattice else {
            return false;
        };
        match &self.stencil {
            Some(stencil) => {
                let key: Vec<i64> = off[..self.n].iter().map(|v| (v / self.h).round() as i64).collect();
                stencil.binary_search(&key).is_ok()
            }
            None => {
                let dist = off[..self.n].iter().map(|v| v * v).sum::<f64>().sqrt();
                dist <= lat.hole_radius * (1.0 + 1e-12) + 1e-14
            }
        }
    }

    /// Nearest lattice point strictly inside the box, with its distance to `x`.
    pub fn nearest_hole_center(&self, x: &[f64]) -> Option<([f64; 4], f64)> {
        let lat = self.lattice.as_ref()?;
        let mut c = [0.0; 4];
        let mut d2 = 0.0;
        for d in 0..self.n {
            let m = (x[d] / lat.eps).round() * lat.eps;
            let margin = 1e-9 * lat.eps;
            if m <= self.lo[d] + margin || m >= self.hi[d] - margin {
                return None;
            }
            c[d] = m;
            d2 += (x[d] - m) * (x[d] - m);
        }
        Some((c, d2.sqrt()))
    }

    /// Distance to the nearest lattice point of `εZ^n`, whether or not it carries a hole.
    pub fn lattice_distance(&self, x: &[f64]) -> Option<f64> {
        let lat = self.lattice.as_ref()?;
        let mut d2 = 0.0;
        for &xd in &x[..self.n] {
            let m = (xd / lat.eps).round() * lat.eps;
            d2 += (xd - m) * (xd - m);
        }
        Some(d2.sqrt())
    }

    pub fn hole_centers(&self) -> Vec<Vec<f64>> {
        let Some(lat) = &self.lattice else {
            return Vec::new();
        };
        let per_axis: Vec<Vec<f64>> = (0..self.n)
            .map(|d| {
                let first = (self.lo[d] / lat.eps).round() as i64 + 1;
                let last = (self.hi[d] / lat.eps).round() as i64 - 1;
                (first..=last).map(|k| k as f64 * lat.eps).collect()
            })
            .collect();
        let mut out = vec![Vec::new()];
        for axis in &per_axis {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&c| {
                        let mut p = prefix.clone();
                        p.push(c);
                        p
                    })
                })
                .collect();
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn lo(&self) -> &[f64] {
        &self.lo
    }
    pub fn hi(&self) -> &[f64] {
        &self.hi
    }
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }
    pub fn strides(&self) -> &[usize] {
        &self.strides
    }
    pub fn lattice(&self) -> Option<&Lattice> {
        self.lattice.as_ref()
    }
    pub fn eps(&self) -> Option<f64> {
        self.lattice.map(|l| l.eps)
    }
    pub fn flags(&self) -> &GridFlags {
        &self.flags
    }
    pub fn mask(&self) -> &[Region] {
        &self.mask
    }
    pub fn region(&self, idx: usize) -> Region {
        self.mask[idx]
    }
    pub fn len(&self) -> usize {
        self.mask.len()
    }
    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }
    /// Cell volume `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.n as i32)
    }

    /// Number of grid steps per lattice period.
    pub fn eps_steps(&self) -> Option<usize> {
        self.lattice.map(|l| (l.eps / self.h).round() as usize)
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, idx: usize, out: &mut [usize]) {
        let mut rem = idx;
        for d in 0..self.n {
            out[d] = rem / self.strides[d];
            rem %= self.strides[d];
        }
    }

    pub fn coords(&self, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        for d in 0..self.n {
            let i = rem / self.strides[d];
            rem %= self.strides[d];
            out[d] = self.lo[d] + i as f64 * self.h;
        }
    }

    /// Node reached from `idx` by `steps` grid steps along `axis`, if inside the box.
    pub fn shift(&self, idx: usize, axis: usize, steps: isize) -> Option<usize> {
        let i = (idx / self.strides[axis]) % self.counts[axis];
        let j = i as isize + steps;
        if j < 0 || j as usize >= self.counts[axis] {
            None
        } else {
            Some((idx as isize + steps * self.strides[axis] as isize) as usize)
        }
    }

    /// Number of box faces node `idx` lies on.
    pub fn boundary_faces(&self, idx: usize) -> usize {
        let mut rem = idx;
        let mut faces = 0;
        for d in 0..self.n {
            let i = rem / self.strides[d];
            rem %= self.strides[d];
            if i == 0 || i + 1 == self.counts[d] {
                faces += 1;
            }
        }
        faces
    }

    /// Standard `2n+1`-point Laplacian at a node not on the outer boundary.
    #[inline]
    pub fn laplacian(&self, values: &[f64], idx: usize) -> f64 {
        let centre = values[idx];
        let mut acc = 0.0;
        for &s in &self.strides {
            acc += values[idx - s] + values[idx + s];
        }
        (acc - 2.0 * self.n as f64 * centre) / (self.h * self.h)
    }

    pub fn count_region(&self, region: Region) -> usize {
        self.mask.iter().filter(|&&r| r == region).count()
    }

    pub fn descriptor(&self) -> GridDescriptor {
        let mut flags = Vec::new();
        if self.flags.unresolved_hole {
            flags.push("unresolved_hole".to_string());
        }
        if self.flags.capacity_matched {
            flags.push("capacity_matched".to_string());
        }
        if self.flags.periodic_cell {
            flags.push("periodic_cell".to_string());
        }
        GridDescriptor {
            dimension: self.n,
            r#box: self.lo.iter().zip(&self.hi).map(|(&a, &b)| [a, b]).collect(),
            eps: self.lattice.map(|l| l.eps),
            hole_radius: self.lattice.map(|l| l.hole_radius),
            nominal_radius: self.lattice.map(|l| l.nominal_radius),
            h: self.h,
            counts: self.counts.clone(),
            flags,
            hole_nodes: self.stencil.clone(),
        }
    }

    /// Rebuild a grid from its descriptor.
    pub fn from_descriptor(desc: &GridDescriptor) -> Result<Self> {
        let bounds: Vec<(f64, f64)> = desc.r#box.iter().map(|b| (b[0], b[1])).collect();
        match (desc.eps, desc.hole_radius) {
            (Some(eps), Some(a)) if desc.flags.iter().any(|f| f == "periodic_cell") => {
                Self::periodic_cell(desc.dimension, eps, a, desc.h)
            }
            (Some(eps), Some(a)) => {
                let nominal = desc.nominal_radius.unwrap_or(a);
                if let Some(nodes) = &desc.hole_nodes {
                    Self::with_hole_nodes(desc.dimension, &bounds, eps, nominal, nodes, desc.h)
                } else if desc.flags.iter().any(|f| f == "capacity_matched") {
                    Self::with_membership(desc.dimension, &bounds, eps, nominal, a, desc.h)
                } else {
                    Self::new(desc.dimension, &bounds, eps, a, desc.h)
                }
            }
            _ => Self::plain(desc.dimension, &bounds, desc.h),
        }
    }

    /// One byte per node in row-major order: 0 fluid, 1 hole, 2 outer boundary.
    pub fn mask_bytes(&self) -> Vec<u8> {
        self.mask.iter().map(|r| r.code()).collect()
    }

    pub fn write_mask(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.mask_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn write_descriptor(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.descriptor())?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// JSON form of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDescriptor {
    pub dimension: usize,
    pub r#box: Vec<[f64; 2]>,
    pub eps: Option<f64>,
    pub hole_radius: Option<f64>,
    #[serde(default)]
    pub nominal_radius: Option<f64>,
    pub h: f64,
    pub counts: Vec<usize>,
    pub flags: Vec<String>,
    /// Explicit hole node offsets of capacity-matched grids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hole_nodes: Option<Vec<Vec<i64>>>,
}

/// Scalar values on every node of a grid.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<PerforatedGrid>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<PerforatedGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Arc<PerforatedGrid>) -> Self {
        let values = vec![0.0; grid.len()];
        Field { grid, values }
    }

    pub fn grid(&self) -> &Arc<PerforatedGrid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max-norm distance to another field on the same node set.
    pub fn max_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Riemann sum `Σ v h^n`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Writes one `x_1 … x_n value` line per node.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let n = self.grid.dim();
        let header: Vec<String> = (1..=n).map(|d| format!("x{d}")).chain(["value".into()]).collect();
        writeln!(w, "{}", header.join(",")).map_err(|e| Error::io(path, e))?;
        let mut x = [0.0; 4];
        for (i, v) in self.values.iter().enumerate() {
            self.grid.coords(i, &mut x);
            let row: Vec<String> = x[..n].iter().chain([v]).map(|c| format!("{c:.17e}")).collect();
            writeln!(w, "{}", row.join(",")).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Sequence of fields at equally spaced times `t0, t0 + dt, …`.
#[derive(Debug, Clone)]
pub struct TimeField {
    dt: f64,
    t0: f64,
    snapshots: Vec<Field>,
}

impl TimeField {
    pub fn new(dt: f64, t0: f64, snapshots: Vec<Field>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("snapshot spacing must be positive, got {dt}")));
        }
        if let Some(first) = snapshots.first() {
            if snapshots.iter().any(|s| !Arc::ptr_eq(s.grid(), first.grid())) {
                return Err(Error::Config("snapshots must share one grid".into()));
            }
        }
        Ok(TimeField { dt, t0, snapshots })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn t0(&self) -> f64 {
        self.t0
    }
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }
    pub fn final_time(&self) -> f64 {
        self.time(self.snapshots.len().saturating_sub(1))
    }
    pub fn snapshots(&self) -> &[Field] {
        &self.snapshots
    }
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }
    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
    pub fn last(&self) -> &Field {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }
    pub fn grid(&self) -> &Arc<PerforatedGrid> {
        self.snapshots[0].grid()
    }

    /// Same snapshots on a rescaled clock `t -> factor * t`.
    pub fn rescale_time(mut self, factor: f64) -> Self {
        self.dt *= factor;
        self.t0 *= factor;
        self
    }

    /// Max over snapshots of the max-norm gap to another trajectory.
    pub fn max_diff(&self, other: &TimeField) -> f64 {
        self.snapshots
            .iter()
            .zip(&other.snapshots)
            .fold(0.0, |m, (a, b)| m.max(a.max_diff(b)))
    }

    /// Writes `values.bin` (little-endian f64, snapshot-major, row-major nodes)
    /// and `trajectory.json` (grid descriptor, dt, t0, T) into `dir`.
    pub fn write_binary(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let bin = dir.join("values.bin");
        let mut bytes = Vec::with_capacity(self.snapshots.len() * self.grid().len() * 8);
        for s in &self.snapshots {
            for v in s.values() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        std::fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
        let meta = serde_json::json!({
            "grid": self.grid().descriptor(),
            "dt": self.dt,
            "t0": self.t0,
            "T": self.final_time(),
            "snapshots": self.snapshots.len(),
        });
        let json = dir.join("trajectory.json");
        std::fs::write(&json, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&json, e))
    }
}

/// Constructs the perforated grid; see [`PerforatedGrid::new`].
pub fn build_perforated_grid(
    n: usize,
    bounds: &[(f64, f64)],
    eps: f64,
    hole_radius: f64,
    h: f64,
) -> Result<PerforatedGrid> {
    PerforatedGrid::new(n, bounds, eps, hole_radius, h)
}

/// `φ(x, t)` at hole nodes and zero elsewhere.
pub fn oscillating_obstacle<F>(phi: F, grid: &Arc<PerforatedGrid>, t: f64) -> Field
where
    F: Fn(&[f64], f64) -> f64,
{
    let n = grid.dim();
    let mut x = [0.0; 4];
    let values = (0..grid.len())
        .map(|i| {
            if grid.region(i) == Region::Hole {
                grid.coords(i, &mut x);
                phi(&x[..n], t)
            } else {
                0.0
            }
        })
        .collect();
    Field {
        grid: grid.clone(),
        values,
    }
}

/// Pointwise samples of `f` at every node.
pub fn sample_field<F>(f: F, grid: &Arc<PerforatedGrid>) -> Field
where
    F: Fn(&[f64]) -> f64,
{
    let n = grid.dim();
    let mut x = [0.0; 4];
    let values = (0..grid.len())
        .map(|i| {
            grid.coords(i, &mut x);
            f(&x[..n])
        })
        .collect();
    Field {
        grid: grid.clone(),
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0); n]
    }

    #[test]
    fn critical_radius_values() {
        assert!((critical_radius(0.1, 3).unwrap() - 0.001).abs() < 1e-15);
        assert!((critical_radius(0.1, 4).unwrap() - 0.01).abs() < 1e-15);
        assert!((critical_radius(0.5, 2).unwrap() - (-4.0f64).exp()).abs() < 1e-15);
        assert!(matches!(critical_radius(0.5, 1), Err(Error::InvalidDimension(1, _))));
    }

    #[test]
    fn nine_hole_clusters_in_unit_square() {
        let g = build_perforated_grid(2, &unit(2), 0.25, 0.05, 0.0125).unwrap();
        assert_eq!(g.hole_centers().len(), 9);
        assert!(!g.flags().unresolved_hole);
        // every centre node is a hole node
        for c in g.hole_centers() {
            let idx = g.index(&[(c[0] / 0.0125).round() as usize, (c[1] / 0.0125).round() as usize]);
            assert_eq!(g.region(idx), Region::Hole);
        }
    }

    #[test]
    fn touching_holes_rejected() {
        let err = build_perforated_grid(3, &unit(3), 0.5, 0.3, 0.05).unwrap_err();
        assert!(matches!(err, Error::Geometry(_)));
    }

    #[test]
    fn misaligned_spacing_rejected() {
        let err = build_perforated_grid(2, &unit(2), 0.25, 0.05, 0.03).unwrap_err();
        assert!(matches!(err, Error::Alignment(_)));
    }

    #[test]
    fn unresolved_hole_is_flagged() {
        let g = build_perforated_grid(2, &unit(2), 0.25, 0.001, 0.0125).unwrap();
        assert!(g.flags().unresolved_hole);
        assert_eq!(g.count_region(Region::Hole), 9);
    }

    #[test]
    fn classification_is_idempotent_and_exclusive() {
        let g = build_perforated_grid(3, &unit(3), 0.25, 0.06, 0.03125).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.classify(i), g.region(i));
        }
        let total =
            g.count_region(Region::Fluid) + g.count_region(Region::Hole) + g.count_region(Region::OuterBoundary);
        assert_eq!(total, g.len());
    }

    #[test]
    fn hole_volume_converges() {
        // fixed geometry, refine h: the node-count volume approaches the ball volume
        let a = 0.1;
        let exact = 9.0 * std::f64::consts::PI * a * a;
        let mut errs = Vec::new();
        for h in [0.25 / 10.0, 0.25 / 40.0, 0.25 / 160.0] {
            let g = build_perforated_grid(2, &unit(2), 0.25, a, h).unwrap();
            let vol = g.count_region(Region::Hole) as f64 * h * h;
            errs.push((vol - exact).abs() / exact);
        }
        assert!(errs[2] < errs[0]);
        assert!(errs[2] < 0.02, "{errs:?}");
    }

    #[test]
    fn obstacle_vanishes_off_holes() {
        let g = Arc::new(build_perforated_grid(2, &unit(2), 0.25, 0.05, 0.0125).unwrap());
        let one = oscillating_obstacle(|_, _| 1.0, &g, 0.0);
        let lin = oscillating_obstacle(|x, _| x[0], &g, 0.3);
        let mut x = [0.0; 4];
        for i in 0..g.len() {
            match g.region(i) {
                Region::Hole => {
                    assert_eq!(one.values()[i], 1.0);
                    g.coords(i, &mut x);
                    assert_eq!(lin.values()[i], x[0]);
                }
                _ => {
                    assert_eq!(one.values()[i], 0.0);
                    assert_eq!(lin.values()[i], 0.0);
                }
            }
        }
        assert_eq!(oscillating_obstacle(|_, _| 0.0, &g, 0.0).max_abs(), 0.0);
    }

    #[test]
    fn sampled_fields() {
        let g = Arc::new(build_perforated_grid(2, &unit(2), 0.25, 0.05, 0.0125).unwrap());
        let c = sample_field(|_| 2.5, &g);
        assert!(c.values().iter().all(|&v| v == 2.5));
        let x1 = sample_field(|x| x[0], &g);
        assert_eq!(x1.min(), 0.0);
        assert!((x1.max() - 1.0).abs() < 1e-12);
        let dist = sample_field(|x| g.lattice_distance(x).unwrap(), &g);
        let argmin = dist
            .values()
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(dist.values()[argmin], 0.0);
    }

    #[test]
    fn descriptor_round_trip() {
        let g = build_perforated_grid(2, &unit(2), 0.25, 0.001, 0.0125).unwrap();
        let desc = g.descriptor();
        let json = serde_json::to_string(&desc).unwrap();
        let back: GridDescriptor = serde_json::from_str(&json).unwrap();
        assert_eq!(back, desc);
        let g2 = PerforatedGrid::from_descriptor(&back).unwrap();
        assert_eq!(g2.mask_bytes(), g.mask_bytes());
        assert!(desc.flags.contains(&"unresolved_hole".to_string()));
    }
}
