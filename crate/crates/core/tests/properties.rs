use std::sync::Arc;

use hlab_core::grid::sample_field;
use hlab_core::lab::config::{config_hash, parse_config};
use hlab_core::pme::barrier_residual;
use hlab_core::*;
use proptest::prelude::*;

fn fast() -> ProptestConfig {
    ProptestConfig::with_cases(24)
}

fn slow() -> ProptestConfig {
    ProptestConfig::with_cases(8)
}

fn shape() -> impl Strategy<Value = PenaltyShape> {
    prop_oneof![Just(PenaltyShape::PiecewiseLinear), Just(PenaltyShape::SmoothConcave)]
}

proptest! {
    #![proptest_config(fast())]

    #[test]
    fn hole_tags_match_lattice_distance(period in 2usize..5, steps in 4usize..9, frac in 0.05f64..0.45) {
        let eps = 1.0 / period as f64;
        let h = eps / steps as f64;
        let a = frac * eps;
        let grid = PerforatedGrid::new(2, &[(0.0, 1.0); 2], eps, a, h).unwrap();
        let mut x = [0.0; 4];
        for i in 0..grid.len() {
            prop_assert_eq!(grid.classify(i), grid.region(i));
            if grid.region(i) == Region::Hole {
                grid.coords(i, &mut x);
                let (_, d) = grid.nearest_hole_center(&x[..2]).unwrap();
                prop_assert!(d <= a + 1e-12);
            }
        }
        let total: usize = [Region::Fluid, Region::Hole, Region::OuterBoundary]
            .iter()
            .map(|&r| grid.count_region(r))
            .sum();
        prop_assert_eq!(total, grid.len());
    }

    #[test]
    fn obstacle_vanishes_on_fluid(c in -2.0f64..2.0, sx in -3.0f64..3.0, sy in -3.0f64..3.0, t in 0.0f64..1.0) {
        let grid = Arc::new(PerforatedGrid::new(2, &[(0.0, 1.0); 2], 0.25, 0.06, 1.0 / 32.0).unwrap());
        let phi = oscillating_obstacle(|x: &[f64], t: f64| c + sx * x[0] + sy * x[1] + t, &grid, t);
        for i in 0..grid.len() {
            if grid.region(i) != Region::Hole {
                prop_assert_eq!(phi.values()[i], 0.0);
            }
        }
    }

    #[test]
    fn penalty_profile_shape(delta in 1e-4f64..1.0, shape in shape(), s in -5.0f64..5.0, ds in 1e-3f64..1.0) {
        let cfg = PenaltyConfig { delta, shape };
        prop_assert!((beta_delta(0.0, &cfg) + 1.0).abs() < 1e-12);
        prop_assert_eq!(beta_delta(delta * (1.0 + ds), &cfg), 0.0);
        let (b0, b1, b2) = (beta_delta(s - ds, &cfg), beta_delta(s, &cfg), beta_delta(s + ds, &cfg));
        prop_assert!(b0 <= b1 && b1 <= b2);
        let scale = 1.0 + b0.abs() + b2.abs();
        prop_assert!(b0 + b2 - 2.0 * b1 <= 1e-12 * scale);
    }

    #[test]
    fn penalty_diverges_as_delta_shrinks(shape in shape(), s in -1.0f64..-1e-3) {
        let coarse = beta_delta(s, &PenaltyConfig { delta: 1e-1, shape });
        let fine = beta_delta(s, &PenaltyConfig { delta: 1e-4, shape });
        prop_assert!(fine < coarse);
        prop_assert!(fine < -1.0 / 1e-3 * s.abs().min(1.0) * 0.5);
    }

    #[test]
    fn trend_rules_accept_sorted_lists(mut vals in proptest::collection::vec(0.01f64..10.0, 2..6)) {
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        prop_assert!(lab::trend::decreasing(&vals, lab::trend::SLACK));
        vals.reverse();
        prop_assert!(lab::trend::increasing(&vals, lab::trend::SLACK));
    }

    #[test]
    fn config_hash_is_deterministic(alpha in 1.0f64..5.0, c0 in 0.1f64..3.0) {
        let text = format!("kind = corrector\nn = 3\nalpha = {alpha}\nc0 = {c0}\neps = 1/2, 1/4\n");
        let a = parse_config(&text).unwrap();
        let b = parse_config(&text).unwrap();
        prop_assert_eq!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn barrier_identities(m in 1.05f64..6.0) {
        let alpha = pme::barrier_alpha(m);
        let beta = pme::barrier_exponent(m);
        prop_assert!((alpha.powf(1.0 - 1.0 / m) - m / (m - 1.0)).abs() < 1e-9 * m / (m - 1.0));
        prop_assert!((beta * (1.0 - 1.0 / m) - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(slow())]

    #[test]
    fn corrector_maximum_principle(k in 0.0f64..8.0, frac in 0.15f64..0.4) {
        let problem = CellProblem { n: 3, eps: 1.0, hole_radius: frac, k, h: 1.0 / 12.0 };
        let sol = solve_cell_corrector(&problem, 1e-9, 4).unwrap();
        let max = sol.torus_values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((max - 1.0).abs() < 1e-8);
        for (w, &hole) in sol.torus_values().iter().zip(sol.torus_hole()) {
            if hole {
                prop_assert_eq!(*w, 1.0);
            }
        }
    }

    #[test]
    fn heat_comparison(
        amp in 0.0f64..1.0,
        bump in 0.0f64..0.5,
        low in -0.5f64..0.5,
        lift in 0.0f64..0.5,
    ) {
        let h = 1.0 / 32.0;
        let grid = Arc::new(PerforatedGrid::new(1, &[(0.0, 1.0)], 0.25, 2.0 * h, h).unwrap());
        // initial data must sit above the obstacle on the holes
        let data = |scale: f64, obstacle: f64| {
            let mut g = sample_field(|x| scale * (std::f64::consts::PI * x[0]).sin(), &grid);
            for (i, v) in g.values_mut().iter_mut().enumerate() {
                if grid.region(i) == Region::Hole {
                    *v = v.max(obstacle);
                }
            }
            g
        };
        let (g1, g2) = (data(amp, low), data(amp + bump, low + lift));
        let rcfg = ParabolicRunConfig::new(0.9 / (2.0 / (h * h) + 1.0 / 1e-2), 0.02);
        let pen = PenaltyConfig::linear(1e-2);
        let u1 = solve_obstacle_heat_penalized(&grid, &ConstObstacle(low), &g1, &pen, &rcfg).unwrap();
        let u2 = solve_obstacle_heat_penalized(&grid, &ConstObstacle(low + lift), &g2, &pen, &rcfg).unwrap();
        for (a, b) in u1.snapshots().iter().zip(u2.snapshots()) {
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!(*x <= *y + 1e-10);
            }
        }
    }

    #[test]
    fn pme_comparison(amp in 0.1f64..1.0, bump in 0.0f64..0.5, m in 1.5f64..3.0) {
        let h = 1.0 / 16.0;
        let grid = Arc::new(PerforatedGrid::new(2, &[(0.0, 1.0); 2], 0.5, 0.1, h).unwrap());
        let bell = |x: &[f64]| (16.0 * x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])).powi(2);
        let mask = pme::fluid_indicator(&grid);
        let g1 = sample_field(|x| amp * bell(x), &grid);
        let g2 = sample_field(|x| (amp + bump) * bell(x), &grid);
        let mul = |f: Field| {
            let v = f.values().iter().zip(mask.values()).map(|(a, b)| a * b).collect();
            Field::new(grid.clone(), v).unwrap()
        };
        let run = |g: Field| {
            let mut rcfg = ParabolicRunConfig::new(0.2 * h * h / (4.0 * m * 1.5f64.powf(m - 1.0)), 0.05);
            rcfg.save_every = 10;
            solve_pme_perforated(&PmeProblem { grid: grid.clone(), m, g, rcfg }).unwrap()
        };
        let (r1, r2) = (run(mul(g1)), run(mul(g2)));
        for (a, b) in r1.trajectory.snapshots().iter().zip(r2.trajectory.snapshots()) {
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!(*x <= *y + 1e-10);
            }
        }
        prop_assert!(r1.clamp_max <= 1e-12 && r2.clamp_max <= 1e-12);
    }

    #[test]
    fn eigen_iteration_is_monotone_and_positive(p in 0.3f64..0.7) {
        let h = 1.0 / 64.0;
        let grid = Arc::new(PerforatedGrid::plain(1, &[(0.0, 1.0)], h).unwrap());
        let prob = EigenProblem::new(grid.clone(), p);
        // the supersolution start aborts if any iterate increases
        let sup = solve_eigen_from(&prob, Start::Supersolution).unwrap();
        let sub = solve_eigen_from(&prob, Start::Subsolution).unwrap();
        prop_assert!(sup.phi.max_diff(&sub.phi) <= 5.0 * prob.tol);
        for i in 0..grid.len() {
            if grid.region(i) == Region::Fluid {
                prop_assert!(sup.phi.values()[i] > 0.0);
            }
        }
    }

    #[test]
    fn barrier_residual_shrinks_with_dt(m in 1.5f64..3.0) {
        let h = 1.0 / 8.0;
        let grid = Arc::new(PerforatedGrid::new(3, &[(0.0, 1.0); 3], 0.5, 0.125, h).unwrap());
        let phi = solve_eigen_perforated(&EigenProblem::new(grid, 1.0 / m)).unwrap().phi;
        let coarse = barrier_residual(&phi, m, 1.0, 0.0, 1e-2).unwrap();
        let fine = barrier_residual(&phi, m, 1.0, 0.0, 1e-3).unwrap();
        prop_assert!(fine < coarse);
    }
}
