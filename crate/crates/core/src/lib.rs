//! Finite-difference laboratory for homogenization on perforated domains.
//!
//! Cell correctors and capacities, heat equations with oscillating
//! obstacles, a sublinear eigenvalue problem and the porous medium equation,
//! each paired with its homogenized limit and measured by the `lab` studies.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod correctors;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod heat_obstacle;
pub mod lab;
pub mod lattice;
pub mod linalg;
pub mod pme;
pub mod radial;

pub use correctors::{
    capacity_estimate, classify_regime, classify_regime_with, corrector_limit_study, harmonic_capacity, hole_flux,
    solve_cell_corrector, CapacityMethod, CellProblem, CellSolution, HRule, Regime, RegimeSpec,
};
pub use eigen::{
    correctibility_i_residual, discrete_nondegeneracy_report, solve_eigen_from, solve_eigen_homogenized,
    solve_eigen_perforated, EigenProblem, EigenSolution, Start,
};
pub use error::{Error, Result};
pub use grid::{
    build_perforated_grid, critical_radius, oscillating_obstacle, Field, PerforatedGrid, Region, TimeField,
};
pub use heat_obstacle::{
    beta_delta, regime_limit_solver, solve_homogenized_heat, solve_obstacle_heat_penalized,
    solve_obstacle_heat_projected, solve_plain_heat, ConstObstacle, FnObstacle, Obstacle, ParabolicRunConfig,
    PenaltyConfig, PenaltyShape,
};
pub use lab::{run_study, StudyConfig, StudyKind, StudyReport};
pub use pme::{
    barrier_sandwich_check, build_cutoff_xi, correctibility_ii_residual, monotonicity_check, pressure_transform,
    self_similar_barrier, solve_pme_homogenized, solve_pme_perforated, CutoffField, PmeProblem, PmeRun,
};
