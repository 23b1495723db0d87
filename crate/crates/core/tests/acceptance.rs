//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on failure.

mod common;

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{barenblatt, studies_dir, ReactionShooting, SublinearShooting};
use hlab_core::correctors::resolving_spacing;
use hlab_core::eigen::solve_eigen_from;
use hlab_core::lab::{load_config, trend, StudyReport};
use hlab_core::linalg::{DirichletOperator, Unknowns};
use hlab_core::pme::{barrier_alpha, barrier_exponent, barrier_residual, solve_pme_vform, VFormOptions, VNodes};
use hlab_core::*;

type Outcome = std::result::Result<(bool, String), String>;

fn field(grid: &Arc<PerforatedGrid>, f: impl Fn(&[f64]) -> f64) -> Field {
    let n = grid.dim();
    let mut x = [0.0; 4];
    let v = (0..grid.len())
        .map(|i| {
            grid.coords(i, &mut x);
            f(&x[..n])
        })
        .collect();
    Field::new(grid.clone(), v).unwrap()
}

fn list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", items.join(", "))
}

fn run_config(name: &str) -> std::result::Result<StudyReport, String> {
    let mut cfg = load_config(&studies_dir().join(name)).map_err(|e| e.to_string())?;
    cfg.output = None;
    run_study(&cfg).map_err(|e| format!("{name}: {e}"))
}

fn verdict(report: &StudyReport, name_part: &str) -> (bool, String) {
    match report.verdicts.iter().find(|v| v.name.contains(name_part)) {
        Some(v) => (v.pass, v.detail.clone()),
        None => (false, format!("no verdict matching '{name_part}'")),
    }
}

fn timed(limit: Duration, start: Instant) -> (bool, String) {
    let el = start.elapsed();
    (el <= limit, format!("{:.1}s of {}s", el.as_secs_f64(), limit.as_secs()))
}

fn capacity() -> Outcome {
    let start = Instant::now();
    let numeric = harmonic_capacity(1.0, 3, CapacityMethod::Numeric).map_err(|e| e.to_string())?;
    let rel = (numeric / (4.0 * PI) - 1.0).abs();
    let eps = 0.25;
    let a = critical_radius(eps, 3).map_err(|e| e.to_string())?;
    let h = resolving_spacing(eps, a, 6.0);
    let cell = solve_cell_corrector(
        &CellProblem {
            n: 3,
            eps,
            hole_radius: a,
            k: 4.0 * PI,
            h,
        },
        1e-8,
        8,
    )
    .map_err(|e| e.to_string())?;
    let est = capacity_estimate(&cell).map_err(|e| e.to_string())?;
    let cell_rel = (est / (4.0 * PI * a) - 1.0).abs();
    let (fast, time) = timed(Duration::from_secs(60), start);
    Ok((
        rel <= 0.02 && cell_rel <= 0.05 && fast,
        format!(
            "numeric cap(B_1) off by {:.2e}, cell estimate off by {:.2}% at {} steps per radius, {time}",
            rel,
            100.0 * cell_rel,
            (a / h).round()
        ),
    ))
}

fn trichotomy() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for (alpha, rule) in [
        (2, "increasing toward 1"),
        (3, "decreasing toward 0"),
        (4, "decreasing below -1"),
    ] {
        let report = run_config(&format!("trichotomy_a{alpha}.cfg"))?;
        let (ok, d) = verdict(&report, rule);
        pass &= ok;
        detail.push(format!("alpha={alpha} {d}"));
    }
    let (fast, time) = timed(Duration::from_secs(600), start);
    Ok((pass && fast, format!("{}; {time}", detail.join("; "))))
}

fn solver_equivalence() -> Outcome {
    let h = 1.0 / 64.0;
    let grid = Arc::new(PerforatedGrid::new(1, &[(0.0, 1.0)], 0.25, 2.0 * h, h).map_err(|e| e.to_string())?);
    if grid.len() != 65 {
        return Err(format!("expected 65 nodes, got {}", grid.len()));
    }
    let profile = |x: &[f64]| 0.25 * (PI * x[0]).sin();
    let obstacle = FnObstacle::stationary(|x: &[f64], _t: f64| 0.25 * (PI * x[0]).sin());
    let g = field(&grid, profile);
    // common step, stable for the stiffest penalty
    let dt = 0.9 / (2.0 / (h * h) + 1.0 / 1e-3);
    let mut rcfg = ParabolicRunConfig::new(dt, 100.0 * dt);
    rcfg.save_every = 1;
    let projected = solve_obstacle_heat_projected(&grid, &obstacle, &g, &rcfg).map_err(|e| e.to_string())?;
    if projected.len() != 101 {
        return Err(format!("expected 100 steps, got {}", projected.len() - 1));
    }
    let mut gaps = Vec::new();
    let mut pass = true;
    for delta in [1e-2, 1e-3] {
        let pen = solve_obstacle_heat_penalized(&grid, &obstacle, &g, &PenaltyConfig::linear(delta), &rcfg)
            .map_err(|e| e.to_string())?;
        let gap = pen.max_diff(&projected);
        pass &= gap <= 10.0 * delta;
        gaps.push(gap);
    }
    pass &= gaps[1] < gaps[0];
    Ok((pass, format!("max gaps {gaps:?} for delta = [1e-2, 1e-3]")))
}

fn heat_reduction() -> Outcome {
    let h = 1.0 / 40.0;
    let grid = Arc::new(PerforatedGrid::new(2, &[(0.0, 1.0), (0.0, 1.0)], 0.25, 0.05, h).map_err(|e| e.to_string())?);
    let g = field(&grid, |x| {
        (PI * x[0]).sin() * (PI * x[1]).sin() + 0.3 * (3.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin()
    });
    let mut rcfg = ParabolicRunConfig::new(0.9 * h * h / 4.0, 0.05);
    rcfg.save_every = 10;
    let plain = solve_plain_heat(&grid, &g, &rcfg).map_err(|e| e.to_string())?;
    let obstacle = FnObstacle::stationary(|x: &[f64], _t: f64| x[0] * x[1]);
    let hom = solve_homogenized_heat(&grid, &obstacle, &g, 0.0, &rcfg).map_err(|e| e.to_string())?;
    let bitwise = plain.len() == hom.len()
        && plain.snapshots().iter().zip(hom.snapshots()).all(|(a, b)| {
            a.values()
                .iter()
                .zip(b.values())
                .all(|(x, y)| x.to_bits() == y.to_bits())
        });
    let inactive = solve_obstacle_heat_penalized(&grid, &ConstObstacle(-10.0), &g, &PenaltyConfig::linear(1e-2), &rcfg)
        .map_err(|e| e.to_string())?;
    let diff = inactive.max_diff(&plain);
    Ok((
        bitwise && diff <= 1e-12,
        format!("kappa = 0 bitwise equal: {bitwise}; inactive penalty differs by {diff:.1e}"),
    ))
}

fn steady_reaction() -> Outcome {
    let h = 1.0 / 64.0;
    let grid = Arc::new(PerforatedGrid::plain(1, &[(0.0, 1.0)], h).map_err(|e| e.to_string())?);
    let g = Field::zeros(grid.clone());
    let mut rcfg = ParabolicRunConfig::new(0.9 * h * h / 2.0, 4.0);
    rcfg.save_every = 1000;
    let u = solve_homogenized_heat(&grid, &ConstObstacle(1.0), &g, 1.0, &rcfg).map_err(|e| e.to_string())?;
    let oracle = ReactionShooting::solve();
    let mut x = [0.0; 4];
    let err = (0..grid.len())
        .map(|i| {
            grid.coords(i, &mut x);
            (u.last().values()[i] - oracle.eval(x[0])).abs()
        })
        .fold(0.0, f64::max);
    Ok((
        err <= 1e-3,
        format!("max deviation from the shooting profile {err:.2e}"),
    ))
}

fn eigen_iteration() -> Outcome {
    let h = 1.0 / 512.0;
    let grid = Arc::new(PerforatedGrid::plain(1, &[(0.0, 1.0)], h).map_err(|e| e.to_string())?);
    let mut pass = true;
    let mut detail = Vec::new();
    for p in [0.5, 2.0 / 3.0] {
        let mut prob = EigenProblem::new(grid.clone(), p);
        prob.max_iter = 2000;
        // the supersolution run errors out if any iterate increases anywhere
        let sup = solve_eigen_from(&prob, Start::Supersolution).map_err(|e| e.to_string())?;
        let sub = solve_eigen_from(&prob, Start::Subsolution).map_err(|e| e.to_string())?;
        let oracle = SublinearShooting::solve(p);
        let mut x = [0.0; 4];
        let err = (0..grid.len())
            .map(|i| {
                grid.coords(i, &mut x);
                (sup.phi.values()[i] - oracle.eval(x[0])).abs()
            })
            .fold(0.0, f64::max);
        let spread = sup.phi.max_diff(&sub.phi);
        pass &= err <= 1e-4 && spread <= 5.0 * prob.tol;
        detail.push(format!("p={p:.3}: oracle error {err:.2e}, start spread {spread:.1e}"));
    }
    Ok((pass, detail.join("; ")))
}

fn correctibility() -> Outcome {
    let spec = classify_regime_with(3, 3.0, 1.0).map_err(|e| e.to_string())?;
    let kappa = spec.kappa.ok_or("no kappa")?;
    let (mut r1, mut r2a, mut r2b) = (Vec::new(), Vec::new(), Vec::new());
    let eps_list = [0.5, 1.0 / 3.0, 0.25];
    for eps in eps_list {
        let a = spec.hole_radius(eps, 1.0);
        let cell = solve_cell_corrector(
            &CellProblem {
                n: 3,
                eps,
                hole_radius: a,
                k: kappa,
                h: resolving_spacing(eps, a, 6.0),
            },
            1e-8,
            8,
        )
        .map_err(|e| e.to_string())?;
        r1.push(correctibility_i_residual(1.0, &spec, &cell, 0.5).map_err(|e| e.to_string())?);
        r2a.push(correctibility_ii_residual(0.0, 1.0, 0.5, &spec, &cell).map_err(|e| e.to_string())?);
        r2b.push(correctibility_ii_residual(10.0, 1.0, 0.5, &spec, &cell).map_err(|e| e.to_string())?);
    }
    let gap: Vec<f64> = r2a.iter().zip(&r2b).map(|(a, b)| (a - b).abs()).collect();
    let envelope = r2a.iter().zip(&r2b).zip(&gap).all(|((a, b), g)| *g <= a.max(*b));
    let pass = trend::decreasing(&r1, trend::SLACK)
        && trend::decreasing(&r2a, trend::SLACK)
        && trend::decreasing(&r2b, trend::SLACK)
        && trend::decreasing(&gap, trend::SLACK)
        && envelope;
    Ok((
        pass,
        format!(
            "I = {}; II(c=0) = {}; II(c=10) = {}; c-gap = {}",
            list(&r1),
            list(&r2a),
            list(&r2b),
            list(&gap)
        ),
    ))
}

fn barenblatt_run() -> Outcome {
    let (m, c, t0) = (2.0, 1.0 / 16.0, 1.0);
    let h = 1.0 / 32.0;
    let grid = Arc::new(PerforatedGrid::plain(2, &[(-2.0, 2.0), (-2.0, 2.0)], h).map_err(|e| e.to_string())?);
    let g = field(&grid, |x| barenblatt(x, t0, m, c));
    let mut rcfg = ParabolicRunConfig::new(0.9 * h * h / (8.0 * c), t0);
    rcfg.save_every = 50;
    let run = solve_pme_perforated(&PmeProblem {
        grid: grid.clone(),
        m,
        g: g.clone(),
        rcfg,
    })
    .map_err(|e| e.to_string())?;
    let mass0: f64 = g.values().iter().sum();
    let (mut err, mut drift) = (0.0f64, 0.0f64);
    let mut x = [0.0; 4];
    for (k, snap) in run.trajectory.snapshots().iter().enumerate() {
        let t = t0 + run.trajectory.time(k);
        for i in 0..grid.len() {
            grid.coords(i, &mut x);
            err = err.max((snap.values()[i] - barenblatt(&x[..2], t, m, c)).abs());
        }
        let mass: f64 = snap.values().iter().sum();
        drift = drift.max(((mass - mass0) / mass0).abs());
    }
    let rel = err / c;
    Ok((
        rel <= 0.05 && drift <= 1e-10,
        format!(
            "max error {:.2}% of the peak, relative mass drift {drift:.1e}",
            100.0 * rel
        ),
    ))
}

fn barrier(pme: &StudyReport) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for m in [1.5, 2.0, 3.0] {
        let a = barrier_alpha(m).powf(1.0 - 1.0 / m) - m / (m - 1.0);
        let b = barrier_exponent(m) * (1.0 - 1.0 / m) - 1.0;
        pass &= a.abs() < 1e-12 && b.abs() < 1e-12;
        let mut samples = Vec::new();
        for hinv in [8.0, 16.0, 32.0] {
            let h = 1.0 / hinv;
            let grid = Arc::new(PerforatedGrid::new(3, &[(0.0, 1.0); 3], 0.5, 0.125, h).map_err(|e| e.to_string())?);
            let mut prob = EigenProblem::new(grid, 1.0 / m);
            prob.tol = 1e-12;
            let phi = solve_eigen_perforated(&prob).map_err(|e| e.to_string())?.phi;
            let dt = 0.09 * h * h / 6.0;
            let r = barrier_residual(&phi, m, 1.0, 0.0, dt).map_err(|e| e.to_string())?;
            samples.push((h * h + dt, r));
        }
        // fit on the two coarse levels, check the finest
        let c = samples[..2].iter().map(|(s, r)| r / s).fold(0.0, f64::max);
        let (s, r) = samples[2];
        pass &= r <= c * s;
        detail.push(format!("m={m}: C = {c:.3e}"));
    }
    let (ok, d) = verdict(pme, "sandwich");
    pass &= ok;
    detail.push(format!("sandwich {d}"));
    Ok((pass, detail.join("; ")))
}

fn time_monotonicity() -> Outcome {
    let m = 2.0;
    let h = 1.0 / 32.0;
    let grid = Arc::new(PerforatedGrid::new(3, &[(0.0, 1.0); 3], 0.5, 0.125, h).map_err(|e| e.to_string())?);
    let op = DirichletOperator::new(&grid, Unknowns::Fluid, 0.0);
    let b: Vec<f64> = op.active().iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
    let mut v = vec![0.0; grid.len()];
    op.solve(&b, &mut v, 1e-13, 100 * grid.len())
        .map_err(|e| e.to_string())?;
    let top = v.iter().copied().fold(0.0, f64::max);
    let v0 = Field::new(grid.clone(), v.iter().map(|x| x / top).collect()).map_err(|e| e.to_string())?;
    let mut rcfg = ParabolicRunConfig::new(0.9 * h * h / 6.0, 0.05);
    rcfg.save_every = 1;
    let run = solve_pme_vform(&grid, m, &v0, &rcfg, &VFormOptions::plain(VNodes::Fluid)).map_err(|e| e.to_string())?;
    let rep = monotonicity_check(&run.trajectory, 1e-12).map_err(|e| e.to_string())?;
    Ok((
        rep.pass,
        format!("{} steps, largest increase {:.1e}", run.steps, rep.max_increase),
    ))
}

fn convergence(heat: &[(&str, StudyReport)], start: Instant) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, report) in heat {
        let (ok, d) = verdict(report, "error against");
        pass &= ok;
        detail.push(format!("{name}: {d}"));
    }
    let (fast, time) = timed(Duration::from_secs(1800), start);
    Ok((pass && fast, format!("{}; {time}", detail.join("; "))))
}

fn boundedness(heat: &[(&str, StudyReport)], pme: &StudyReport) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, report) in heat {
        for part in ["difference quotients", "time derivatives"] {
            let (ok, d) = verdict(report, part);
            pass &= ok;
            detail.push(format!("{name}: {d}"));
        }
    }
    for part in ["difference quotients", "gradient near holes"] {
        let (ok, d) = verdict(pme, part);
        pass &= ok;
        detail.push(format!("pme: {d}"));
    }
    Ok((pass, detail.join("; ")))
}

fn main() {
    let mut failures = 0;
    let mut report = |k: usize, title: &str, outcome: Outcome| {
        let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        if !pass {
            failures += 1;
        }
        println!("{} {k:>2} {title}: {detail}", if pass { "PASS" } else { "FAIL" });
    };
    report(1, "capacity oracle", capacity());
    report(2, "corrector trichotomy", trichotomy());
    report(3, "penalized vs projected", solver_equivalence());
    report(4, "homogenized heat reduction", heat_reduction());
    report(5, "steady reaction oracle", steady_reaction());
    report(6, "monotone eigen iteration", eigen_iteration());
    report(7, "correctibility residuals", correctibility());
    report(8, "Barenblatt oracle", barenblatt_run());

    let pme = run_config("pme_critical.cfg");
    report(
        9,
        "self-similar barrier",
        pme.as_ref().map_err(Clone::clone).and_then(barrier),
    );
    report(10, "time monotonicity", time_monotonicity());

    let start = Instant::now();
    let heat: std::result::Result<Vec<_>, String> = [
        ("critical", "heat_critical.cfg"),
        ("vanishing", "heat_vanishing.cfg"),
        ("dominant", "heat_dominant.cfg"),
    ]
    .into_iter()
    .map(|(name, file)| run_config(file).map(|r| (name, r)))
    .collect();
    report(
        11,
        "homogenization trends",
        heat.as_ref().map_err(Clone::clone).and_then(|h| convergence(h, start)),
    );
    let both = heat.and_then(|h| pme.map(|p| (h, p)));
    report(12, "diagnostic bounds", both.and_then(|(h, p)| boundedness(&h, &p)));

    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
