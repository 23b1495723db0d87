//! Periodic cell correctors, ball capacities and the scaling trichotomy.
//!
//! The cell problem `Δ_h w = k` off the hole, `w = 1` on the hole, is solved
//! on the `N^n` torus by a capacitance-matrix method: the periodic Green
//! function is applied with FFTs and the dense system only involves hole
//! nodes that touch the fluid. A few passes of iterative refinement bring
//! the residual to roundoff.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{critical_exponent, critical_radius, Field, PerforatedGrid};
use crate::lab::report::{Row, StudyKind, StudyReport, Verdict};
use crate::lab::trend;
use crate::linalg::{fft_nd, periodic_green, periodic_symbol};
use crate::radial::{solve_radial, unit_sphere_area, OuterCondition, RadialProfile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellProblem {
    pub n: usize,
    pub eps: f64,
    pub hole_radius: f64,
    pub k: f64,
    pub h: f64,
}

impl CellProblem {
    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.n) {
            return Err(Error::InvalidDimension(self.n, "cell problems support 2 <= n <= 4"));
        }
        if !(self.hole_radius > 0.0) || 2.0 * self.hole_radius >= self.eps {
            return Err(Error::Geometry(format!(
                "need 0 < 2a < eps, got a = {}, eps = {}",
                self.hole_radius, self.eps
            )));
        }
        if !(self.k >= 0.0) {
            return Err(Error::Config(format!("source k must be non-negative, got {}", self.k)));
        }
        Ok(())
    }

    /// Nodes per period.
    pub fn cells(&self) -> usize {
        (self.eps / self.h).round() as usize
    }
}

/// Smallest even `N` with `a >= min_cells · ε/N`; returns `h = ε/N`.
pub fn resolving_spacing(eps: f64, hole_radius: f64, min_cells: f64) -> f64 {
    let mut cells = (min_cells * eps / hole_radius - 1e-9).ceil().max(2.0) as usize;
    if cells % 2 == 1 {
        cells += 1;
    }
    eps / cells as f64
}

#[derive(Debug, Clone)]
pub struct CellSolution {
    pub problem: CellProblem,
    /// `w` on the closed cell `[-ε/2, ε/2]^n`; opposite faces coincide.
    pub w: Field,
    pub min_w: f64,
    pub hole_flux: f64,
    /// Max over fluid nodes of `|Δ_h w - k|·h²/(2n)`.
    pub residual: f64,
    pub fluid_volume: f64,
    pub refinements: usize,
    torus: Vec<f64>,
    hole: Vec<bool>,
}

impl CellSolution {
    pub fn cells(&self) -> usize {
        self.problem.cells()
    }

    /// Torus values, row-major `N^n`, index 0 at the hole centre.
    pub fn torus_values(&self) -> &[f64] {
        &self.torus
    }

    pub fn torus_hole(&self) -> &[bool] {
        &self.hole
    }

    /// Periodic `Δ_h w` at torus node `idx`.
    pub fn laplacian(&self, idx: usize) -> f64 {
        let (n, size) = (self.problem.n, self.cells());
        let h = self.problem.h;
        let mut acc = -2.0 * n as f64 * self.torus[idx];
        let mut stride = 1;
        for _ in 0..n {
            let i = (idx / stride) % size;
            let up = if i + 1 == size {
                idx + stride - size * stride
            } else {
                idx + stride
            };
            let down = if i == 0 {
                idx + (size - 1) * stride
            } else {
                idx - stride
            };
            acc += self.torus[up] + self.torus[down];
            stride *= size;
        }
        acc / (h * h)
    }

    /// Average of `f(w, Δ_h w)` over fluid nodes of the torus.
    pub fn fluid_average<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (i, (&w, &hole)) in self.torus.iter().zip(&self.hole).enumerate() {
            if !hole {
                sum += f(w, self.laplacian(i));
                count += 1;
            }
        }
        sum / count as f64
    }

    /// `(distance to the hole centre, w)` for every torus node.
    pub fn radial_samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (n, size, h) = (self.problem.n, self.cells(), self.problem.h);
        self.torus.iter().enumerate().map(move |(idx, &w)| {
            let mut rem = idx;
            let mut r2 = 0.0;
            for _ in 0..n {
                let i = rem % size;
                rem /= size;
                let o = if i > size / 2 { i as f64 - size as f64 } else { i as f64 };
                r2 += o * o;
            }
            (r2.sqrt() * h, w)
        })
    }
}

fn torus_offset(idx: usize, n: usize, size: usize, out: &mut [isize]) {
    let mut rem = idx;
    for o in out.iter_mut().take(n).rev() {
        let i = rem % size;
        rem /= size;
        *o = if i > size / 2 {
            i as isize - size as isize
        } else {
            i as isize
        };
    }
}

fn torus_index(off: &[isize], size: usize) -> usize {
    off.iter()
        .fold(0, |acc, &o| acc * size + o.rem_euclid(size as isize) as usize)
}

struct CellSolver {
    n: usize,
    size: usize,
    h: f64,
    symbol: Vec<f64>,
    constrained: Vec<usize>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl CellSolver {
    fn new(n: usize, size: usize, h: f64, hole: &[bool]) -> Result<Self> {
        let total = hole.len();
        let mut off = [0isize; 4];
        // hole nodes adjacent to fluid carry the w = 1 constraint
        let mut constrained = Vec::new();
        for idx in 0..total {
            if !hole[idx] {
                continue;
            }
            torus_offset(idx, n, size, &mut off);
            let touches = (0..n).any(|d| {
                [-1isize, 1].iter().any(|&s| {
                    let mut o = off;
                    o[d] += s;
                    !hole[torus_index(&o[..n], size)]
                })
            });
            if touches {
                constrained.push(idx);
            }
        }
        if constrained.is_empty() {
            return Err(Error::Geometry("cell has no hole nodes".into()));
        }
        let green = periodic_green(n, size);
        let symbol = periodic_symbol(n, size);
        let m = constrained.len();
        let mut mat = DMatrix::zeros(m + 1, m + 1);
        let offs: Vec<[isize; 4]> = constrained
            .iter()
            .map(|&i| {
                let mut o = [0isize; 4];
                torus_offset(i, n, size, &mut o);
                o
            })
            .collect();
        let mut diff = [0isize; 4];
        for i in 0..m {
            for j in 0..m {
                for d in 0..n {
                    diff[d] = offs[i][d] - offs[j][d];
                }
                mat[(i, j)] = green[torus_index(&diff[..n], size)];
            }
            mat[(i, m)] = 1.0;
            mat[(m, i)] = 1.0;
        }
        Ok(CellSolver {
            n,
            size,
            h,
            symbol,
            constrained,
            lu: mat.lu(),
        })
    }

    /// `-h² G * f` on the torus (mean-zero part).
    fn convolve(&self, f: &[f64], out: &mut [f64]) {
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_nd(&mut buf, self.n, self.size, false);
        for (b, &l) in buf.iter_mut().zip(&self.symbol) {
            *b = if l > 0.0 { *b / l } else { Complex64::new(0.0, 0.0) };
        }
        fft_nd(&mut buf, self.n, self.size, true);
        let scale = -self.h * self.h / f.len() as f64;
        for (o, b) in out.iter_mut().zip(&buf) {
            *o = b.re * scale;
        }
    }

    /// Solves `Δ_h w = f` off the constrained set and `w = d` on it.
    /// Entries of `f` on constrained nodes are ignored.
    fn solve(&self, f: &[f64], d: &[f64]) -> Result<Vec<f64>> {
        let total = f.len();
        let m = self.constrained.len();
        // mean-zero particular part: -h² G * (f - mean f), then fit q, c
        let mut fz = f.to_vec();
        for &j in &self.constrained {
            fz[j] = 0.0;
        }
        let free = (total - m) as f64;
        let mean_free = fz.iter().sum::<f64>() / free;
        // constrained nodes take the free mean so that the sources sum correctly
        for &j in &self.constrained {
            fz[j] = mean_free;
        }
        let mut part = vec![0.0; total];
        self.convolve(&fz, &mut part);
        let mut rhs = DVector::zeros(m + 1);
        for (r, &j) in self.constrained.iter().enumerate() {
            rhs[r] = d[r] - part[j];
        }
        // Σ q = h² Σ f over the torus with constrained nodes at the free mean
        rhs[m] = self.h * self.h * mean_free * total as f64;
        let sol = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::Degenerate("singular capacitance system".into()))?;
        let c = sol[m];
        let mut src = vec![0.0; total];
        for (r, &j) in self.constrained.iter().enumerate() {
            src[j] = sol[r];
        }
        // Σ q_j G(x - x_j) = -(1/h²)·(-h² G * q)
        let mut pot = vec![0.0; total];
        self.convolve(&src, &mut pot);
        let inv = -1.0 / (self.h * self.h);
        Ok(part.iter().zip(&pot).map(|(p, q)| c + p + q * inv).collect())
    }
}

fn torus_laplacian(w: &[f64], n: usize, size: usize, h: f64, idx: usize) -> f64 {
    let mut acc = -2.0 * n as f64 * w[idx];
    let mut stride = 1;
    for _ in 0..n {
        let i = (idx / stride) % size;
        let up = if i + 1 == size {
            idx + stride - size * stride
        } else {
            idx + stride
        };
        let down = if i == 0 {
            idx + (size - 1) * stride
        } else {
            idx - stride
        };
        acc += w[up] + w[down];
        stride *= size;
    }
    acc / (h * h)
}

/// Solves the periodic cell problem. Rejects holes below grid resolution.
pub fn solve_cell_corrector(problem: &CellProblem, tol: f64, max_iter: usize) -> Result<CellSolution> {
    solve_cell_corrector_with(problem, tol, max_iter, false)
}

/// As [`solve_cell_corrector`], optionally accepting unresolved holes.
/// `max_iter` bounds the refinement passes.
pub fn solve_cell_corrector_with(
    problem: &CellProblem,
    tol: f64,
    max_iter: usize,
    allow_unresolved: bool,
) -> Result<CellSolution> {
    problem.validate()?;
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let grid = Arc::new(PerforatedGrid::periodic_cell(
        problem.n,
        problem.eps,
        problem.hole_radius,
        problem.h,
    )?);
    if grid.flags().unresolved_hole && !allow_unresolved {
        return Err(Error::UnresolvedHole {
            radius: problem.hole_radius,
            h: problem.h,
        });
    }
    let (n, size, h) = (problem.n, problem.cells(), problem.h);
    let total = size.pow(n as u32);
    let a_steps = problem.hole_radius / h;
    let mut off = [0isize; 4];
    let hole: Vec<bool> = (0..total)
        .map(|idx| {
            torus_offset(idx, n, size, &mut off);
            let r2: f64 = off[..n].iter().map(|&o| (o * o) as f64).sum();
            r2.sqrt() <= a_steps * (1.0 + 1e-12) + 1e-14
        })
        .collect();
    let solver = CellSolver::new(n, size, h, &hole)?;
    let m = solver.constrained.len();

    let f = vec![problem.k; total];
    let mut w = solver.solve(&f, &vec![1.0; m])?;
    let scale = h * h / (2.0 * n as f64);
    let mut refinements = 0;
    let residual_of = |w: &[f64]| -> (Vec<f64>, Vec<f64>, f64) {
        let rf: Vec<f64> = (0..total)
            .map(|i| {
                if hole[i] {
                    0.0
                } else {
                    torus_laplacian(w, n, size, h, i) - problem.k
                }
            })
            .collect();
        let rd: Vec<f64> = solver.constrained.iter().map(|&j| w[j] - 1.0).collect();
        let res = rf.iter().fold(0.0f64, |acc, v| acc.max(v.abs())) * scale;
        (rf, rd, res)
    };
    let (mut rf, mut rd, mut residual) = residual_of(&w);
    while residual > tol.min(1e-13) && refinements < max_iter.min(4) {
        let neg_f: Vec<f64> = rf.iter().map(|v| -v).collect();
        let neg_d: Vec<f64> = rd.iter().map(|v| -v).collect();
        let corr = solver.solve(&neg_f, &neg_d)?;
        let cand: Vec<f64> = w.iter().zip(&corr).map(|(a, b)| a + b).collect();
        let (rf2, rd2, res2) = residual_of(&cand);
        refinements += 1;
        if res2 >= residual {
            break;
        }
        w = cand;
        rf = rf2;
        rd = rd2;
        residual = res2;
    }
    if residual > tol {
        return Err(Error::IterationLimit {
            iterations: refinements + 1,
            residual,
        });
    }
    for (wi, &hh) in w.iter_mut().zip(&hole) {
        if hh {
            *wi = 1.0;
        }
    }

    // flux across hole/fluid edges, outward from the fluid into the hole
    let mut flux = 0.0;
    let face = h.powi(n as i32 - 1);
    for idx in 0..total {
        if hole[idx] {
            continue;
        }
        torus_offset(idx, n, size, &mut off);
        for d in 0..n {
            for s in [-1isize, 1] {
                let mut o = off;
                o[d] += s;
                if hole[torus_index(&o[..n], size)] {
                    flux += (w[idx] - 1.0) / h * face;
                }
            }
        }
    }
    let fluid_nodes = hole.iter().filter(|&&b| !b).count();

    // closed-cell field: node i on each axis sits at offset i - N/2
    let side = size + 1;
    let mut values = vec![0.0; side.pow(n as u32)];
    let mut cell_off = [0isize; 4];
    for (ci, v) in values.iter_mut().enumerate() {
        let mut rem = ci;
        for o in cell_off.iter_mut().take(n).rev() {
            *o = (rem % side) as isize - (size / 2) as isize;
            rem /= side;
        }
        *v = w[torus_index(&cell_off[..n], size)];
    }
    let field = Field::new(grid, values)?;
    let min_w = w.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(CellSolution {
        problem: *problem,
        w: field,
        min_w,
        hole_flux: flux,
        residual,
        fluid_volume: fluid_nodes as f64 * h.powi(n as i32),
        refinements,
        torus: w,
        hole,
    })
}

/// Surface integral of `∂w/∂ν` over the hole boundary (negative for `k > 0`).
pub fn hole_flux(sol: &CellSolution) -> f64 {
    sol.hole_flux
}

/// Capacity of the hole estimated from a solved cell: the flux divided by
/// the drop `1 - c`, where `c` is the constant of the fit
/// `w ≈ c + B/r + C r²` on the annulus `[2a, 4a]` (clipped to the cell).
pub fn capacity_estimate(sol: &CellSolution) -> Result<f64> {
    let n = sol.problem.n;
    if n < 3 {
        return Err(Error::InvalidDimension(n, "capacity estimate needs n >= 3"));
    }
    let a = sol.problem.hole_radius;
    let (r_in, r_out) = (2.0 * a, (4.0 * a).min(0.45 * sol.problem.eps));
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut atb = nalgebra::Vector3::<f64>::zeros();
    let mut count = 0;
    for (r, w) in sol.radial_samples() {
        if r < r_in || r > r_out {
            continue;
        }
        let row = nalgebra::Vector3::new(1.0, r.powf(2.0 - n as f64), r * r);
        ata += row * row.transpose();
        atb += row * w;
        count += 1;
    }
    if count < 3 {
        return Err(Error::EmptySet("no nodes in the fitting annulus".into()));
    }
    let coef = ata
        .lu()
        .solve(&atb)
        .ok_or_else(|| Error::Degenerate("capacity fit is singular".into()))?;
    let drop = 1.0 - coef[0];
    if !(drop > 0.0) {
        return Err(Error::Degenerate(format!(
            "no potential drop across the cell (c = {})",
            coef[0]
        )));
    }
    Ok(sol.hole_flux.abs() / drop)
}

/// Radial proxy of the cell problem on the inscribed ball: `w(a) = 1`,
/// `w'(ε/2) = 0`.
pub fn solve_radial_cell(problem: &CellProblem, steps: usize) -> Result<RadialProfile> {
    problem.validate()?;
    solve_radial(
        problem.n,
        problem.hole_radius,
        problem.eps / 2.0,
        problem.k,
        1.0,
        OuterCondition::Neumann,
        steps,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CapacityMethod {
    Analytic,
    Numeric,
}

/// Harmonic capacity of the ball `B_r` in `R^n`, `n >= 3`.
pub fn harmonic_capacity(r: f64, n: usize, method: CapacityMethod) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidDimension(n, "ball capacity is defined here for n >= 3"));
    }
    if !(r > 0.0) {
        return Err(Error::Geometry(format!("radius must be positive, got {r}")));
    }
    let sigma = unit_sphere_area(n);
    match method {
        CapacityMethod::Analytic => Ok((n as f64 - 2.0) * sigma * r.powi(n as i32 - 2)),
        CapacityMethod::Numeric => {
            let flux = |big_r: f64| -> Result<f64> {
                let prof = solve_radial(n, r, big_r, 0.0, 1.0, OuterCondition::Dirichlet(0.0), 20_000)?;
                Ok(-sigma * prof.flux[0])
            };
            let big_r = 1024.0 * r;
            let (f1, f2) = (flux(big_r)?, flux(2.0 * big_r)?);
            // shell flux exceeds the capacity by a relative O(R^{2-n})
            let w = 2f64.powi(n as i32 - 2);
            Ok((w * f2 - f1) / (w - 1.0))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Vanishing,
    Critical,
    Dominant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub n: usize,
    pub alpha: f64,
    pub alpha_star: f64,
    pub regime: Regime,
    pub r0: Option<f64>,
    pub kappa: Option<f64>,
}

impl RegimeSpec {
    /// Hole radius `c₀ ε^α` for this regime, with `c₀ = r0` in the critical case.
    pub fn hole_radius(&self, eps: f64, c0: f64) -> f64 {
        c0 * eps.powf(self.alpha)
    }
}

/// Classifies `a_ε = ε^α` against the critical exponent; `r0 = 1`.
pub fn classify_regime(n: usize, alpha: f64) -> Result<RegimeSpec> {
    classify_regime_with(n, alpha, 1.0)
}

/// As [`classify_regime`] with holes `a_ε = r0 ε^α`.
pub fn classify_regime_with(n: usize, alpha: f64, r0: f64) -> Result<RegimeSpec> {
    if n < 3 {
        return Err(Error::InvalidDimension(n, "regimes are classified for n >= 3"));
    }
    if !(alpha > 0.0) || !(r0 > 0.0) {
        return Err(Error::Config(format!("need alpha > 0 and r0 > 0, got {alpha}, {r0}")));
    }
    let alpha_star = critical_exponent(n);
    let regime = if (alpha - alpha_star).abs() <= 1e-12 * alpha_star {
        Regime::Critical
    } else if alpha > alpha_star {
        Regime::Vanishing
    } else {
        Regime::Dominant
    };
    let (r0, kappa) = if regime == Regime::Critical {
        let cap1 = harmonic_capacity(1.0, n, CapacityMethod::Analytic)?;
        (Some(r0), Some(cap1 * r0.powi(n as i32 - 2)))
    } else {
        (None, None)
    };
    Ok(RegimeSpec {
        n,
        alpha,
        alpha_star,
        regime,
        r0,
        kappa,
    })
}

/// Rule mapping `(ε, a_ε)` to a grid spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HRule {
    /// Resolve the hole by at least this many grid steps.
    ResolveHole(f64),
    /// Fixed number of grid steps per period.
    CellsPerPeriod(usize),
    /// The same spacing for every ε.
    Fixed(f64),
}

impl HRule {
    pub fn spacing(&self, eps: f64, hole_radius: f64) -> f64 {
        match *self {
            HRule::ResolveHole(c) => resolving_spacing(eps, hole_radius, c),
            HRule::CellsPerPeriod(k) => eps / (k + k % 2) as f64,
            HRule::Fixed(h) => h,
        }
    }
}

pub const CORRECTOR_COLUMNS: [&str; 7] = ["eps", "alpha", "k", "min_w", "hole_flux", "residual", "wall_ms"];

/// Options for [`corrector_limit_study`] beyond the required arguments.
#[derive(Debug, Clone, Copy)]
pub struct CorrectorStudyOptions {
    /// Hole prefactor: `a_ε = c0 ε^α`.
    pub c0: f64,
    pub tol: f64,
    pub record_wall_time: bool,
}

impl Default for CorrectorStudyOptions {
    fn default() -> Self {
        CorrectorStudyOptions {
            c0: 1.0,
            tol: 1e-8,
            record_wall_time: true,
        }
    }
}

/// Solves the cell problem along an ε list and attaches the regime verdict.
pub fn corrector_limit_study(
    n: usize,
    alpha: f64,
    k: f64,
    eps_list: &[f64],
    h_rule: HRule,
    opts: CorrectorStudyOptions,
) -> Result<StudyReport> {
    trend::check_eps_list(eps_list)?;
    let spec = classify_regime_with(n, alpha, opts.c0)?;
    let rows: Vec<Row> = crate::lab::study::par_map(eps_list, |&eps| {
        let a = spec.hole_radius(eps, opts.c0);
        let h = h_rule.spacing(eps, a);
        let problem = CellProblem {
            n,
            eps,
            hole_radius: a,
            k,
            h,
        };
        let start = Instant::now();
        match solve_cell_corrector(&problem, opts.tol, 8) {
            Ok(sol) => {
                let ms = if opts.record_wall_time {
                    start.elapsed().as_secs_f64() * 1e3
                } else {
                    0.0
                };
                Row::ok(eps, vec![eps, alpha, k, sol.min_w, sol.hole_flux, sol.residual, ms])
            }
            Err(e) => Row::failed(eps, &CORRECTOR_COLUMNS, e.to_string()),
        }
    });
    let mut report = StudyReport::new(StudyKind::Corrector, &CORRECTOR_COLUMNS);
    report.rows = rows;
    report.set_meta("n", n.to_string());
    report.set_meta("regime", format!("{:?}", spec.regime));
    report.set_meta("c0", opts.c0.to_string());
    if n >= 3 {
        report.set_meta(
            "critical_radius_at_first_eps",
            critical_radius(eps_list[0], n)?.to_string(),
        );
    }
    let cap1 = harmonic_capacity(1.0, n, CapacityMethod::Analytic)?;
    report.verdicts.push(corrector_verdict(&report, spec.regime, k, cap1));
    report.finalize()?;
    Ok(report)
}

/// Verdict for a corrector study, a pure function of the rows.
pub fn corrector_verdict(report: &StudyReport, regime: Regime, k: f64, cap1: f64) -> Verdict {
    let min_w = report.column("min_w");
    let Some(vals) = min_w.iter().copied().collect::<Option<Vec<f64>>>() else {
        return Verdict::new("trichotomy", false, "some rows failed");
    };
    match regime {
        Regime::Dominant => {
            let pass = trend::increasing(&vals, trend::SLACK) && vals.iter().all(|&v| v < 1.0);
            Verdict::new("min_w increasing toward 1", pass, format!("{vals:?}"))
        }
        Regime::Critical if (k - cap1).abs() <= 1e-9 * cap1 => {
            let mags: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
            let pass = trend::decreasing(&mags, trend::SLACK);
            Verdict::new("|min_w| decreasing toward 0", pass, format!("{vals:?}"))
        }
        Regime::Critical => {
            let pass = trend::decreasing(&vals, trend::SLACK);
            Verdict::new("min_w decreasing", pass, format!("{vals:?}"))
        }
        Regime::Vanishing => {
            let pass = trend::decreasing(&vals, trend::SLACK) && vals.last().is_some_and(|&v| v < -1.0);
            Verdict::new("min_w decreasing below -1", pass, format!("{vals:?}"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cell(k: f64) -> CellProblem {
        CellProblem {
            n: 3,
            eps: 0.5,
            hole_radius: 0.125,
            k,
            h: 0.5 / 16.0,
        }
    }

    #[test]
    fn zero_source_gives_constant() {
        let sol = solve_cell_corrector(&cell(0.0), 1e-8, 8).unwrap();
        assert!(sol.w.values().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!((sol.min_w - 1.0).abs() < 1e-12);
        assert!(sol.hole_flux.abs() < 1e-10);
    }

    #[test]
    fn flux_identity_and_maximum_principle() {
        let k = 4.0 * PI;
        let sol = solve_cell_corrector(&cell(k), 1e-8, 8).unwrap();
        assert!(sol.residual <= 1e-8);
        let expected = -k * sol.fluid_volume;
        assert!(
            (sol.hole_flux - expected).abs() < 1e-8 * expected.abs(),
            "{} vs {expected}",
            sol.hole_flux
        );
        let max = sol.w.max();
        assert!((max - 1.0).abs() < 1e-12);
        assert!(sol.min_w < 1.0);
    }

    #[test]
    fn periodic_faces_agree() {
        let sol = solve_cell_corrector(&cell(4.0 * PI), 1e-8, 8).unwrap();
        let grid = sol.w.grid().clone();
        let side = grid.counts()[0];
        let v = sol.w.values();
        for i in 0..side {
            for j in 0..side {
                let a = v[grid.index(&[0, i, j])];
                let b = v[grid.index(&[side - 1, i, j])];
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn flux_is_linear_in_k() {
        let f1 = solve_cell_corrector(&cell(3.0), 1e-8, 8).unwrap().hole_flux;
        let f2 = solve_cell_corrector(&cell(6.0), 1e-8, 8).unwrap().hole_flux;
        assert!((f2 - 2.0 * f1).abs() < 1e-9 * f2.abs());
    }

    #[test]
    fn unresolved_hole_rejected() {
        let p = CellProblem {
            n: 3,
            eps: 0.5,
            hole_radius: 0.01,
            k: 1.0,
            h: 0.5 / 16.0,
        };
        assert!(matches!(
            solve_cell_corrector(&p, 1e-8, 4),
            Err(Error::UnresolvedHole { .. })
        ));
        assert!(solve_cell_corrector_with(&p, 1e-8, 4, true).is_ok());
    }

    #[test]
    fn capacities() {
        let c1 = harmonic_capacity(1.0, 3, CapacityMethod::Analytic).unwrap();
        assert!((c1 - 4.0 * PI).abs() < 1e-12);
        let c2 = harmonic_capacity(2.0, 3, CapacityMethod::Analytic).unwrap();
        assert!((c2 - 8.0 * PI).abs() < 1e-12);
        let num = harmonic_capacity(1.0, 3, CapacityMethod::Numeric).unwrap();
        assert!((num - c1).abs() / c1 < 1e-5, "{num}");
        let num4 = harmonic_capacity(1.0, 4, CapacityMethod::Numeric).unwrap();
        let an4 = harmonic_capacity(1.0, 4, CapacityMethod::Analytic).unwrap();
        assert!((num4 - an4).abs() / an4 < 1e-5, "{num4}");
        assert!(matches!(
            harmonic_capacity(1.0, 2, CapacityMethod::Analytic),
            Err(Error::InvalidDimension(2, _))
        ));
    }

    #[test]
    fn regimes() {
        let c = classify_regime(3, 3.0).unwrap();
        assert_eq!(c.regime, Regime::Critical);
        assert_eq!(c.alpha_star, 3.0);
        assert!((c.kappa.unwrap() - 4.0 * PI).abs() < 1e-12);
        assert_eq!(classify_regime(3, 4.0).unwrap().regime, Regime::Vanishing);
        let d = classify_regime(3, 2.0).unwrap();
        assert_eq!(d.regime, Regime::Dominant);
        assert!(d.kappa.is_none() && d.r0.is_none());
        let c4 = classify_regime_with(4, 2.0, 2.0).unwrap();
        assert_eq!(c4.regime, Regime::Critical);
        let cap4 = harmonic_capacity(1.0, 4, CapacityMethod::Analytic).unwrap();
        assert!((c4.kappa.unwrap() - cap4 * 4.0).abs() < 1e-9);
    }

    #[test]
    fn resolving_spacing_rule() {
        let h = resolving_spacing(0.25, 0.25f64.powi(3), 4.0);
        assert!((0.25 / h - 64.0).abs() < 1e-9);
        let h = resolving_spacing(1.0 / 3.0, (1.0f64 / 3.0).powi(3), 4.0);
        assert!(((1.0 / 3.0) / h - 36.0).abs() < 1e-9);
    }
}
