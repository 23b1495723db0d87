//! Small, fixed problem instances shared by the benchmarks.

use std::f64::consts::PI;
use std::sync::Arc;

use hlab_core::grid::sample_field;
use hlab_core::{CellProblem, EigenProblem, Field, ParabolicRunConfig, PerforatedGrid, PmeProblem, Result};

/// Critical-scale cell at `ε = 1/2` with `cap(B_1)` on the right.
pub fn cell_problem() -> CellProblem {
    let eps: f64 = 0.5;
    let a = eps.powi(3);
    CellProblem {
        n: 3,
        eps,
        hole_radius: a,
        k: 4.0 * PI,
        h: hlab_core::correctors::resolving_spacing(eps, a, 4.0),
    }
}

/// Unit square with four holes per axis.
pub fn heat_grid() -> Result<Arc<PerforatedGrid>> {
    Ok(Arc::new(PerforatedGrid::new(
        2,
        &[(0.0, 1.0); 2],
        0.25,
        0.05,
        1.0 / 64.0,
    )?))
}

pub fn heat_data(grid: &Arc<PerforatedGrid>) -> Field {
    sample_field(|x| 1.0 + (PI * x[0]).sin() * (PI * x[1]).sin(), grid)
}

pub fn heat_run(grid: &PerforatedGrid) -> ParabolicRunConfig {
    let h = grid.h();
    let mut rcfg = ParabolicRunConfig::new(0.9 * h * h / 4.0, 0.01);
    rcfg.save_every = 10;
    rcfg
}

pub fn eigen_problem() -> Result<EigenProblem> {
    let grid = PerforatedGrid::new(3, &[(0.0, 1.0); 3], 0.5, 0.125, 1.0 / 16.0)?;
    Ok(EigenProblem::new(Arc::new(grid), 0.5))
}

pub fn pme_problem() -> Result<PmeProblem> {
    let grid = Arc::new(PerforatedGrid::new(2, &[(0.0, 1.0); 2], 0.25, 0.05, 1.0 / 64.0)?);
    let fluid = hlab_core::pme::fluid_indicator(&grid);
    let g = sample_field(|x| (PI * x[0]).sin() * (PI * x[1]).sin(), &grid);
    let values = g.values().iter().zip(fluid.values()).map(|(a, b)| a * b).collect();
    let h = grid.h();
    let mut rcfg = ParabolicRunConfig::new(0.1 * h * h, 0.005);
    rcfg.save_every = 10;
    Ok(PmeProblem {
        g: Field::new(grid.clone(), values)?,
        grid,
        m: 2.0,
        rcfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        cell_problem().validate().unwrap();
        let grid = heat_grid().unwrap();
        assert_eq!(heat_data(&grid).values().len(), grid.len());
        heat_run(&grid).schedule().unwrap();
        eigen_problem().unwrap();
        pme_problem().unwrap();
    }
}
