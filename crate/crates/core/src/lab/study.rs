//! Study configuration and the per-ε pipelines.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correctors::{
    classify_regime_with, corrector_limit_study, harmonic_capacity, resolving_spacing, solve_cell_corrector,
    CapacityMethod, CellProblem, CorrectorStudyOptions, HRule, Regime, RegimeSpec,
};
use crate::eigen::{correctibility_i_residual, discrete_nondegeneracy_report, solve_eigen_perforated, EigenProblem};
use crate::error::{Error, Result};
use crate::grid::{sample_field, Field, PerforatedGrid, Region};
use crate::heat_obstacle::{
    regime_limit_solver, solve_obstacle_heat_penalized, solve_obstacle_heat_projected, FnObstacle, ParabolicRunConfig,
    PenaltyConfig,
};
use crate::lab::diagnostics::{
    default_layer_radius, difference_quotient_norm, error_outside_layer, layer_oscillation, min_gap_at_holes,
    near_hole_gradient, time_derivative_norm,
};
use crate::lab::report::{emit_report, ReportFormat, Row, StudyKind, StudyReport, Verdict};
use crate::lab::trend;
use crate::lattice::capacity_matched_hole;
use crate::linalg::{DirichletOperator, Unknowns};
use crate::pme::{
    barrier_sandwich_check, build_cutoff_xi, fluid_indicator, monotonicity_check, pressure_transform,
    solve_pme_perforated, solve_pme_vform, PmeProblem, VFormOptions, VNodes,
};

pub const HEAT_COLUMNS: [&str; 10] = [
    "eps",
    "delta",
    "h",
    "dt",
    "max_dq",
    "max_dt_norm",
    "min_gap",
    "osc_layer",
    "err_Ddelta",
    "wall_ms",
];

pub const EIGEN_COLUMNS: [&str; 10] = [
    "eps",
    "p",
    "lambda",
    "min_phi",
    "c_low",
    "C_high",
    "flatness",
    "corr_I_residual",
    "iters",
    "wall_ms",
];

pub const PME_COLUMNS: [&str; 17] = [
    "eps",
    "delta",
    "h",
    "dt",
    "max_dq",
    "max_dt_norm",
    "min_gap",
    "osc_layer",
    "err_Ddelta",
    "wall_ms",
    "m",
    "lambda1",
    "lambda2",
    "sandwich_pass",
    "mono_pass",
    "clamp_max",
    "grad_near_holes",
];

/// Initial data for the parabolic studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialData {
    /// The obstacle itself at `t = 0`.
    Obstacle,
    /// `Π sin(π x_i)` scaled by the amplitude.
    Sine,
    /// `(1 - |x - c|²/R²)₊²` with `R` a third of the box, scaled by the amplitude.
    Bump,
}

impl std::str::FromStr for InitialData {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "obstacle" => Ok(InitialData::Obstacle),
            "sine" => Ok(InitialData::Sine),
            "bump" => Ok(InitialData::Bump),
            _ => Err(Error::Config(format!("unknown initial data '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub kind: StudyKind,
    pub n: usize,
    pub alpha: f64,
    /// Hole prefactor: `a_ε = c0 ε^α` (`r0` at the critical exponent).
    pub c0: f64,
    pub eps_list: Vec<f64>,
    pub h_rule: HRule,
    pub box_lo: f64,
    pub box_hi: f64,
    /// Represent holes below the grid spacing by capacity-matched node balls.
    pub capacity_match: bool,
    /// Corrector right-hand side; `None` selects `cap(B_1)`.
    pub k: Option<f64>,
    pub tol: f64,
    /// Penalty width; zero selects the projected scheme.
    pub delta: f64,
    pub t_final: f64,
    pub cfl_safety: f64,
    pub snapshots: usize,
    pub amplitude: f64,
    pub initial: InitialData,
    pub p: f64,
    pub m: f64,
    /// Multiplier on the default layer radius `(ε a/2)^{1/2}`.
    pub layer_scale: f64,
    /// Spacing of the limit-problem grid; defaults to the finest row spacing.
    pub limit_h: Option<f64>,
    pub sandwich_tol: f64,
    /// Grid resolution of the correctibility cell problems (steps per radius).
    pub cell_resolution: f64,
    pub record_wall_time: bool,
    /// Recorded for provenance; the default studies draw no random numbers.
    pub seed: u64,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    #[serde(skip)]
    pub formats: Vec<ReportFormat>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            kind: StudyKind::Corrector,
            n: 3,
            alpha: 3.0,
            c0: 1.0,
            eps_list: vec![0.5, 1.0 / 3.0, 0.25],
            h_rule: HRule::ResolveHole(6.0),
            box_lo: 0.0,
            box_hi: 1.0,
            capacity_match: true,
            k: None,
            tol: 1e-8,
            delta: 0.0,
            t_final: 0.05,
            cfl_safety: 0.9,
            snapshots: 20,
            amplitude: 1.0,
            initial: InitialData::Obstacle,
            p: 0.5,
            m: 2.0,
            layer_scale: 1.0,
            limit_h: None,
            sandwich_tol: 1e-8,
            cell_resolution: 6.0,
            record_wall_time: true,
            seed: 0,
            output: None,
            formats: vec![ReportFormat::Csv, ReportFormat::Json],
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        trend::check_eps_list(&self.eps_list)?;
        if !(1..=4).contains(&self.n) {
            return Err(Error::InvalidDimension(self.n, "studies support 1 <= n <= 4"));
        }
        if !(self.box_hi > self.box_lo) {
            return Err(Error::Config(format!("empty box [{}, {}]", self.box_lo, self.box_hi)));
        }
        if !(self.t_final > 0.0) || self.snapshots == 0 {
            return Err(Error::Config("need t_final > 0 and at least one snapshot".into()));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::Config(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::Config(format!("delta must be non-negative, got {}", self.delta)));
        }
        Ok(())
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![(self.box_lo, self.box_hi); self.n]
    }

    fn wall(&self, start: Instant) -> f64 {
        if self.record_wall_time {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        }
    }
}

/// Parallelism cap from `HLAB_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("HLAB_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Maps `f` over `items` concurrently, honouring `HLAB_THREADS`. Results keep
/// the input order.
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match thread_cap().and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        None => items.par_iter().map(&f).collect(),
    }
}

/// Run schedule with exactly `snapshots` saved intervals and `dt <= dt_max`.
pub fn run_config(t_final: f64, dt_max: f64, snapshots: usize, tol: f64) -> ParabolicRunConfig {
    let s = snapshots.max(1);
    let steps = ((t_final / dt_max - 1e-9).ceil().max(1.0) as usize).div_ceil(s) * s;
    ParabolicRunConfig {
        dt: t_final / steps as f64,
        t_final,
        cfl_safety: 1.0,
        tol,
        save_every: steps / s,
    }
}

/// Holes smaller than this many grid steps are capacity matched.
pub const MATCH_BELOW: f64 = 5.0;

/// Perforated grid for one row; holes below [`MATCH_BELOW`] steps become
/// capacity-matched node sets when `capacity_match` is set (n = 3, 4).
pub fn study_grid(cfg: &StudyConfig, eps: f64, a: f64, h: f64) -> Result<Arc<PerforatedGrid>> {
    let bounds = cfg.bounds();
    let grid = if a >= MATCH_BELOW * h || !cfg.capacity_match || !(3..=4).contains(&cfg.n) {
        PerforatedGrid::new(cfg.n, &bounds, eps, a, h)?
    } else {
        let matched = capacity_matched_hole(cfg.n, a / h)?;
        PerforatedGrid::with_hole_nodes(cfg.n, &bounds, eps, a, &matched.offsets_i64(), h)?
    };
    Ok(Arc::new(grid))
}

fn product_sine(x: &[f64], lo: f64, hi: f64) -> f64 {
    x.iter()
        .map(|&xi| (std::f64::consts::PI * (xi - lo) / (hi - lo)).sin())
        .product()
}

fn initial_profile(cfg: &StudyConfig) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
    let (lo, hi) = (cfg.box_lo, cfg.box_hi);
    move |x: &[f64]| match cfg.initial {
        InitialData::Obstacle | InitialData::Sine => cfg.amplitude * product_sine(x, lo, hi),
        InitialData::Bump => {
            let c = 0.5 * (lo + hi);
            let r = (hi - lo) / 3.0;
            let s: f64 = x.iter().map(|xi| (xi - c) * (xi - c)).sum::<f64>() / (r * r);
            cfg.amplitude * (1.0 - s).max(0.0).powi(2)
        }
    }
}

/// Runs the configured study and writes the requested report formats.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let mut report = match cfg.kind {
        StudyKind::Corrector => corrector_study(cfg)?,
        StudyKind::HeatObstacle => heat_study(cfg)?,
        StudyKind::Eigen => eigen_study(cfg)?,
        StudyKind::Pme => pme_study(cfg)?,
    };
    report.set_config_hash(&crate::lab::config::config_hash(cfg));
    report.set_meta("seed", cfg.seed.to_string());
    report.finalize()?;
    if let Some(dir) = &cfg.output {
        emit_report(&report, ReportFormat::Json, dir)?;
        for &f in cfg.formats.iter().filter(|f| **f != ReportFormat::Json) {
            emit_report(&report, f, dir)?;
        }
    }
    Ok(report)
}

fn corrector_study(cfg: &StudyConfig) -> Result<StudyReport> {
    let k = match cfg.k {
        Some(k) => k,
        None => harmonic_capacity(1.0, cfg.n, CapacityMethod::Analytic)?,
    };
    let opts = CorrectorStudyOptions {
        c0: cfg.c0,
        tol: cfg.tol,
        record_wall_time: cfg.record_wall_time,
    };
    corrector_limit_study(cfg.n, cfg.alpha, k, &cfg.eps_list, cfg.h_rule, opts)
}

fn spec_of(cfg: &StudyConfig) -> Result<RegimeSpec> {
    classify_regime_with(cfg.n, cfg.alpha, cfg.c0)
}

fn finest_spacing(cfg: &StudyConfig, spacing: impl Fn(f64) -> f64) -> f64 {
    cfg.limit_h
        .unwrap_or_else(|| cfg.eps_list.iter().map(|&e| spacing(e)).fold(f64::INFINITY, f64::min))
}

fn heat_study(cfg: &StudyConfig) -> Result<StudyReport> {
    let spec = spec_of(cfg)?;
    let n = cfg.n;
    let (lo, hi) = (cfg.box_lo, cfg.box_hi);
    let amp = cfg.amplitude;
    let phi = move |x: &[f64], _t: f64| amp * product_sine(x, lo, hi);
    let g_of = initial_profile(cfg);
    let spacing = |eps: f64| cfg.h_rule.spacing(eps, spec.hole_radius(eps, cfg.c0));
    let dt_for = |h: f64| {
        let mut dt = cfg.cfl_safety * h * h / (2.0 * n as f64);
        if cfg.delta > 0.0 {
            dt = dt.min(cfg.cfl_safety / (2.0 * n as f64 / (h * h) + 1.0 / cfg.delta));
        }
        if let Some(k) = spec.kappa {
            dt = dt.min(cfg.cfl_safety / k);
        }
        dt
    };

    let h_lim = finest_spacing(cfg, spacing);
    let limit_grid = Arc::new(PerforatedGrid::plain(n, &cfg.bounds(), h_lim)?);
    let limit_rcfg = run_config(cfg.t_final, dt_for(h_lim), cfg.snapshots, 1e-10);
    let g_lim = sample_field(&g_of, &limit_grid);
    let limit = regime_limit_solver(&spec, &limit_grid, &FnObstacle::stationary(phi), &g_lim, &limit_rcfg)?;

    let rows = par_map(&cfg.eps_list, |&eps| {
        let start = Instant::now();
        let row = || -> Result<Row> {
            let a = spec.hole_radius(eps, cfg.c0);
            let h = spacing(eps);
            let grid = study_grid(cfg, eps, a, h)?;
            let rcfg = run_config(cfg.t_final, dt_for(h), cfg.snapshots, 1e-10);
            let g = sample_field(&g_of, &grid);
            let obstacle = FnObstacle::stationary(phi);
            let u = if cfg.delta > 0.0 {
                solve_obstacle_heat_penalized(&grid, &obstacle, &g, &PenaltyConfig::linear(cfg.delta), &rcfg)?
            } else {
                solve_obstacle_heat_projected(&grid, &obstacle, &g, &rcfg)?
            };
            let layer = cfg.layer_scale * default_layer_radius(eps, cfg.n)?;
            let err = error_outside_layer(&u, &limit, Some(layer))?;
            let dq = difference_quotient_norm(&u, eps)?;
            let dtn = time_derivative_norm(&u)?;
            let gap = min_gap_at_holes(&u, phi);
            let osc = layer_oscillation(u.last(), (layer, 2.0 * layer)).ok();
            let (_, dt) = rcfg.schedule()?;
            Ok(Row::partial(
                eps,
                vec![
                    Some(eps),
                    Some(cfg.delta),
                    Some(h),
                    Some(dt),
                    Some(dq),
                    Some(dtn),
                    gap,
                    osc,
                    Some(err.max),
                    Some(cfg.wall(start)),
                ],
            ))
        };
        row().unwrap_or_else(|e| Row::failed(eps, &HEAT_COLUMNS, e.to_string()))
    });
    let mut report = StudyReport::new(StudyKind::HeatObstacle, &HEAT_COLUMNS);
    report.rows = rows;
    describe_spec(&mut report, &spec, cfg);
    report.set_meta("limit_h", h_lim.to_string());
    report.verdicts = heat_verdicts(&report, spec.regime);
    Ok(report)
}

fn describe_spec(report: &mut StudyReport, spec: &RegimeSpec, cfg: &StudyConfig) {
    report.set_meta("n", cfg.n.to_string());
    report.set_meta("alpha", cfg.alpha.to_string());
    report.set_meta("regime", format!("{:?}", spec.regime));
    report.set_meta("c0", cfg.c0.to_string());
    if let Some(k) = spec.kappa {
        report.set_meta("kappa", k.to_string());
    }
}

/// Verdicts of a heat-obstacle study, computed from the rows only.
pub fn heat_verdicts(report: &StudyReport, regime: Regime) -> Vec<Verdict> {
    let reference = match regime {
        Regime::Vanishing => "plain heat",
        Regime::Critical => "capacity reaction limit",
        Regime::Dominant => "full obstacle",
    };
    vec![
        trend_verdict(
            report,
            "err_Ddelta",
            &format!("error against the {reference} decreasing"),
            Trend::Decreasing,
        ),
        trend_verdict(report, "max_dq", "difference quotients bounded", Trend::Bounded),
        trend_verdict(report, "max_dt_norm", "time derivatives bounded", Trend::Bounded),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    Decreasing,
    Increasing,
    /// Max at most twice the min after the first row.
    Bounded,
}

pub fn trend_verdict(report: &StudyReport, column: &str, name: &str, rule: Trend) -> Verdict {
    let Some(vals) = report.full_column(column) else {
        return Verdict::new(name, false, format!("{column}: missing values"));
    };
    let pass = match rule {
        Trend::Decreasing => trend::decreasing(&vals, trend::SLACK),
        Trend::Increasing => trend::increasing(&vals, trend::SLACK),
        Trend::Bounded => trend::bounded(&vals, 1, 2.0),
    };
    Verdict::new(name, pass, format!("{column} = {vals:?}"))
}

fn eigen_study(cfg: &StudyConfig) -> Result<StudyReport> {
    let spec = spec_of(cfg)?;
    let rows = par_map(&cfg.eps_list, |&eps| {
        let start = Instant::now();
        let row = || -> Result<Row> {
            let a = spec.hole_radius(eps, cfg.c0);
            let h = cfg.h_rule.spacing(eps, a);
            let grid = study_grid(cfg, eps, a, h)?;
            let mut prob = EigenProblem::new(grid.clone(), cfg.p);
            prob.tol = cfg.tol;
            let sol = solve_eigen_perforated(&prob)?;
            let min_phi = (0..grid.len())
                .filter(|&i| grid.region(i) == Region::Fluid)
                .map(|i| sol.phi.values()[i])
                .fold(f64::INFINITY, f64::min);
            let nd = discrete_nondegeneracy_report(&sol, eps)?;
            let layer = cfg.layer_scale * default_layer_radius(eps, cfg.n)?;
            let flat = layer_oscillation(&sol.phi, (layer, 2.0 * layer)).ok();
            let corr = match spec.regime {
                Regime::Critical => Some(correctibility_cell_residual(cfg, &spec, eps)?),
                _ => None,
            };
            Ok(Row::partial(
                eps,
                vec![
                    Some(eps),
                    Some(cfg.p),
                    Some(sol.lambda),
                    Some(min_phi),
                    Some(nd.c_low),
                    Some(nd.c_high),
                    flat,
                    corr,
                    Some(sol.iterations as f64),
                    Some(cfg.wall(start)),
                ],
            ))
        };
        row().unwrap_or_else(|e| Row::failed(eps, &EIGEN_COLUMNS, e.to_string()))
    });
    let mut report = StudyReport::new(StudyKind::Eigen, &EIGEN_COLUMNS);
    report.rows = rows;
    describe_spec(&mut report, &spec, cfg);
    report.verdicts = eigen_verdicts(&report, spec.regime);
    if let (Some(f), Some(eps)) = (report.full_column("flatness"), Some(report.column("eps"))) {
        let eps: Vec<f64> = eps.into_iter().flatten().collect();
        if let Some(gamma) = trend::fit_exponent(&eps, &f) {
            report.set_constant("flatness_exponent", gamma);
        }
    }
    Ok(report)
}

/// Correctibility-I residual with `b = 1` on the critical cell at `ε`.
fn correctibility_cell_residual(cfg: &StudyConfig, spec: &RegimeSpec, eps: f64) -> Result<f64> {
    let a = spec.hole_radius(eps, cfg.c0);
    let kappa = spec
        .kappa
        .ok_or_else(|| Error::Regime("critical regime without kappa".into()))?;
    let cell = solve_cell_corrector(
        &CellProblem {
            n: cfg.n,
            eps,
            hole_radius: a,
            k: kappa,
            h: resolving_spacing(eps, a, cfg.cell_resolution),
        },
        1e-8,
        8,
    )?;
    correctibility_i_residual(1.0, spec, &cell, cfg.p)
}

pub fn eigen_verdicts(report: &StudyReport, regime: Regime) -> Vec<Verdict> {
    let mut v = vec![
        trend_verdict(report, "flatness", "layer oscillation decreasing", Trend::Decreasing),
        trend_verdict(report, "C_high", "difference quotients bounded", Trend::Bounded),
    ];
    let c_low = report.full_column("c_low");
    v.push(Verdict::new(
        "nondegenerate",
        c_low.as_ref().is_some_and(|c| c.iter().all(|&x| x > 0.0)),
        format!("c_low = {c_low:?}"),
    ));
    if regime == Regime::Critical {
        v.push(trend_verdict(
            report,
            "corr_I_residual",
            "correctibility residual decreasing",
            Trend::Decreasing,
        ));
    }
    v
}

/// Spacing refined (by even steps per period) until the cutoff annulus and the
/// hole are resolved.
fn cutoff_spacing(n: usize, eps: f64, a: f64, h: f64) -> f64 {
    let outer = eps.powf((n as f64 - 1.0) / (n as f64 - 2.0));
    let mut cells = (eps / h).round().max(2.0) as usize;
    cells += cells % 2;
    while eps / cells as f64 > a || 4.0 * eps / cells as f64 > outer {
        cells += 2;
    }
    eps / cells as f64
}

fn pme_study(cfg: &StudyConfig) -> Result<StudyReport> {
    let spec = spec_of(cfg)?;
    let n = cfg.n;
    let m = cfg.m;
    if n < 3 {
        return Err(Error::InvalidDimension(
            n,
            "the PME study uses the cutoff, which needs n >= 3",
        ));
    }
    let g_of = initial_profile(cfg);
    let spacing = |eps: f64| {
        let a = spec.hole_radius(eps, cfg.c0);
        cutoff_spacing(n, eps, a, cfg.h_rule.spacing(eps, a))
    };
    let gmax = cfg.amplitude.abs().max(1e-300);
    // pressure-clock step bound; the density step is this divided by m
    let dt_for = |h: f64, kappa: f64| cfg.cfl_safety / (gmax.powf(m - 1.0) * (2.0 * n as f64 / (h * h) + kappa));
    let t_pressure = m * cfg.t_final;

    let h_lim = finest_spacing(cfg, spacing);
    let limit_grid = Arc::new(PerforatedGrid::plain(n, &cfg.bounds(), h_lim)?);
    let kappa = spec.kappa.unwrap_or(0.0);
    let limit = match spec.regime {
        Regime::Dominant => None,
        _ => {
            let rcfg = run_config(t_pressure, dt_for(h_lim, kappa), cfg.snapshots, 1e-10);
            let v0 = sample_field(|x| g_of(x).max(0.0).powf(m), &limit_grid);
            let opts = VFormOptions {
                kappa,
                nodes: VNodes::Interior,
                penalty: None,
            };
            Some(solve_pme_vform(&limit_grid, m, &v0, &rcfg, &opts)?.trajectory)
        }
    };

    let rows = par_map(&cfg.eps_list, |&eps| {
        let start = Instant::now();
        let row = || -> Result<Row> {
            let a = spec.hole_radius(eps, cfg.c0);
            let h = spacing(eps);
            let grid = study_grid(cfg, eps, a, h)?;
            let xi = match build_cutoff_xi(&grid) {
                Ok(c) => c.xi,
                Err(Error::Geometry(_)) => fluid_indicator(&grid),
                Err(e) => return Err(e),
            };
            let g = sample_field(&g_of, &grid);
            let g_eps = Field::new(
                grid.clone(),
                g.values()
                    .iter()
                    .zip(xi.values())
                    .map(|(a, b)| a.max(0.0) * b)
                    .collect(),
            )?;
            let prcfg = run_config(t_pressure, dt_for(h, 0.0), cfg.snapshots, 1e-10);
            let urcfg = ParabolicRunConfig {
                dt: prcfg.dt / m,
                t_final: cfg.t_final,
                ..prcfg
            };
            let run = solve_pme_perforated(&PmeProblem {
                grid: grid.clone(),
                m,
                g: g_eps,
                rcfg: urcfg,
            })?;
            let v = pressure_transform(&run.trajectory, m)?;

            let mut eprob = EigenProblem::new(grid.clone(), 1.0 / m);
            eprob.tol = 1e-10;
            let phi = solve_eigen_perforated(&eprob)?.phi;
            let sandwich = barrier_sandwich_check(&v, &phi, m, cfg.sandwich_tol)?;

            let mono = superharmonic_monotonicity(&grid, m, gmax.powf(m), &prcfg)?;

            let layer = cfg.layer_scale * default_layer_radius(eps, cfg.n)?;
            let err = match &limit {
                Some(l) => Some(error_outside_layer(&v, l, Some(layer))?.max),
                None => None,
            };
            let dq = difference_quotient_norm(&v, eps)?;
            let dtn = time_derivative_norm(&v)?;
            let min_v = v.snapshots().iter().map(Field::min).fold(f64::INFINITY, f64::min);
            let osc = layer_oscillation(v.last(), (layer, 2.0 * layer)).ok();
            let grad = near_hole_gradient(&v, 2.0 * h).ok();
            let flag = |b: bool| if b { 1.0 } else { 0.0 };
            Ok(Row::partial(
                eps,
                vec![
                    Some(eps),
                    Some(0.0),
                    Some(h),
                    Some(urcfg.dt),
                    Some(dq),
                    Some(dtn),
                    Some(min_v),
                    osc,
                    err,
                    Some(cfg.wall(start)),
                    Some(m),
                    Some(sandwich.lambda1),
                    Some(sandwich.lambda2),
                    Some(flag(sandwich.pass)),
                    Some(flag(mono)),
                    Some(run.clamp_max),
                    grad,
                ],
            ))
        };
        row().unwrap_or_else(|e| Row::failed(eps, &PME_COLUMNS, e.to_string()))
    });
    let mut report = StudyReport::new(StudyKind::Pme, &PME_COLUMNS);
    report.rows = rows;
    describe_spec(&mut report, &spec, cfg);
    report.set_meta("limit_h", h_lim.to_string());
    report.set_meta("initial", format!("{:?}", cfg.initial));
    report.verdicts = pme_verdicts(&report, spec.regime);
    Ok(report)
}

/// Pressure-form run from the fluid torsion function `-Δ_h v = 1`, scaled to
/// `peak`, checked for pointwise decrease in time.
fn superharmonic_monotonicity(
    grid: &Arc<PerforatedGrid>,
    m: f64,
    peak: f64,
    rcfg: &ParabolicRunConfig,
) -> Result<bool> {
    let op = DirichletOperator::new(grid, Unknowns::Fluid, 0.0);
    let b: Vec<f64> = op.active().iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
    let mut x = vec![0.0; grid.len()];
    op.solve(&b, &mut x, 1e-12, 50 * grid.len())?;
    let top = x.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 {
        return Err(Error::Degenerate("torsion function vanishes".into()));
    }
    let v0 = Field::new(grid.clone(), x.iter().map(|v| v * peak / top).collect())?;
    let run = solve_pme_vform(grid, m, &v0, rcfg, &VFormOptions::plain(VNodes::Fluid))?;
    Ok(monotonicity_check(&run.trajectory, 1e-12)?.pass)
}

pub fn pme_verdicts(report: &StudyReport, regime: Regime) -> Vec<Verdict> {
    let all_one = |col: &str| report.full_column(col).is_some_and(|v| v.iter().all(|&x| x == 1.0));
    let mut v = vec![
        Verdict::new(
            "barrier sandwich holds",
            all_one("sandwich_pass"),
            format!("{:?}", report.column("sandwich_pass")),
        ),
        Verdict::new(
            "pressure decreases in time",
            all_one("mono_pass"),
            format!("{:?}", report.column("mono_pass")),
        ),
        trend_verdict(report, "max_dq", "difference quotients bounded", Trend::Bounded),
        trend_verdict(
            report,
            "grad_near_holes",
            "gradient near holes grows",
            Trend::Increasing,
        ),
    ];
    if regime != Regime::Dominant {
        v.push(trend_verdict(
            report,
            "err_Ddelta",
            "error against the homogenized pressure decreasing",
            Trend::Decreasing,
        ));
    }
    v
}
