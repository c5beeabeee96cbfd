//! Fixtures shared by the solver benchmarks.

use std::f64::consts::PI;

use deadoil_core::coefficients::{builtin_set, DEFAULT_FAMILY};
use deadoil_core::{
    solve_forward, CoefficientSet, ControlTrajectory, CostParams, Grid2D, ScalarField, TimeGrid,
};

/// A tracking problem on an `n x n` cell square of side `n / 3`, so the
/// mesh width stays at `1/3` and `tau = 0.005` is stable for any `n`.
pub struct Fixture {
    pub grid: Grid2D,
    pub tg: TimeGrid,
    pub coef: CoefficientSet,
    pub u0: ScalarField,
    pub p0: ScalarField,
    pub params: CostParams,
    pub control: ControlTrajectory,
}

impl Fixture {
    pub fn new(n: usize, steps: usize) -> Self {
        let side = n as f64 / 3.0;
        let grid = Grid2D::new(n, n, side, side).expect("valid grid");
        let tg = TimeGrid::new(0.005 * steps as f64, steps).expect("valid time grid");
        let coef = builtin_set(DEFAULT_FAMILY, 1.0, 2.0).expect("builtin family");
        let bump = |a: f64| {
            ScalarField::from_fn(&grid, |x, y| {
                a * (PI * x / side).sin() * (PI * y / side).sin()
            })
        };
        let u0 = bump(0.5);
        let p0 = bump(0.5);
        let reference = ControlTrajectory::uniform(bump(2.0), steps);
        let traj = solve_forward(&u0, &p0, &reference, &coef, &tg).expect("stable reference solve");
        let params = CostParams::new(1e-2, 1.0, traj.u[steps].clone(), traj.p[steps].clone())
            .expect("valid cost");
        Self {
            control: ControlTrajectory::zeros(&grid, steps),
            grid,
            tg,
            coef,
            u0,
            p0,
            params,
        }
    }
}
