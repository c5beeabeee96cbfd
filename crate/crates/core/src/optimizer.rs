//! Steepest descent with Armijo backtracking on the reduced cost.

use log::{debug, warn};

use crate::adjoint::{
    kkt_residual, reduced_gradient, solve_adjoint_paper, GradientEvaluation, Linearization,
};
use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::linsolve::SolverOptions;
use crate::mesh::ScalarField;
use crate::objective::CostParams;
use crate::state::{ControlTrajectory, TimeGrid};

const MAX_SHRINKS: usize = 60;
const STEP_MIN: f64 = 1e-8;
const STEP_MAX: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub armijo_c: f64,
    pub shrink: f64,
    /// Trial step of the first iteration; later iterations use a
    /// Barzilai-Borwein guess.
    pub initial_step: f64,
    pub linearization: Linearization,
    pub kkt_solver: SolverOptions,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-6,
            max_iter: 500,
            armijo_c: 1e-4,
            shrink: 0.5,
            initial_step: 1.0,
            linearization: Linearization::Terminal,
            kkt_solver: SolverOptions::default(),
        }
    }
}

impl OptimizerOptions {
    fn validate(&self) -> Result<()> {
        let checks: [(&'static str, &'static str, f64, bool); 4] = [
            (
                "grad_tol",
                "grad_tol > 0",
                self.grad_tol,
                self.grad_tol > 0.0,
            ),
            (
                "armijo_c",
                "0 < armijo_c < 1",
                self.armijo_c,
                self.armijo_c > 0.0 && self.armijo_c < 1.0,
            ),
            (
                "shrink",
                "0 < shrink < 1",
                self.shrink,
                self.shrink > 0.0 && self.shrink < 1.0,
            ),
            (
                "initial_step",
                "initial_step > 0",
                self.initial_step,
                self.initial_step > 0.0,
            ),
        ];
        for (name, constraint, value, ok) in checks {
            if !ok || !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    constraint,
                    value,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizationStatus {
    Converged,
    IterationCap,
    LineSearchFailure,
}

impl OptimizationStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            OptimizationStatus::Converged => "converged",
            OptimizationStatus::IterationCap => "iteration-cap",
            OptimizationStatus::LineSearchFailure => "line-search-failure",
        }
    }
}

/// Histories hold one entry per accepted iterate, the initial control
/// included. `step_history[k]` and `shrink_history[k]` describe the step
/// that produced iterate `k` (zero for the initial one).
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best_control: ControlTrajectory,
    pub j_history: Vec<f64>,
    pub grad_norm_history: Vec<f64>,
    pub kkt_history: Vec<f64>,
    pub step_history: Vec<f64>,
    pub shrink_history: Vec<usize>,
    pub status: OptimizationStatus,
}

impl OptimizationResult {
    pub fn iterations(&self) -> usize {
        self.j_history.len().saturating_sub(1)
    }

    /// CSV `iter,J,grad_norm,kkt_residual,step_size,shrinks`.
    pub fn write_convergence_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "iter",
            "J",
            "grad_norm",
            "kkt_residual",
            "step_size",
            "shrinks",
        ])?;
        for k in 0..self.j_history.len() {
            w.write_record([
                k.to_string(),
                format!("{:.16e}", self.j_history[k]),
                format!("{:.16e}", self.grad_norm_history[k]),
                format!("{:.16e}", self.kkt_history[k]),
                format!("{:.16e}", self.step_history[k]),
                self.shrink_history[k].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Problem<'a> {
    u0: &'a ScalarField,
    p0: &'a ScalarField,
    params: &'a CostParams,
    coef: &'a CoefficientSet,
    tg: &'a TimeGrid,
    opts: &'a OptimizerOptions,
}

impl Problem<'_> {
    fn evaluate(&self, f: &ControlTrajectory) -> Result<GradientEvaluation> {
        reduced_gradient(self.u0, self.p0, f, self.params, self.coef, self.tg)
    }

    fn kkt(&self, f: &ControlTrajectory, eval: &GradientEvaluation) -> f64 {
        let solved = solve_adjoint_paper(
            &eval.trajectory,
            self.params,
            self.coef,
            self.tg,
            self.opts.linearization,
            &self.opts.kkt_solver,
        )
        .and_then(|s| kkt_residual(f, &s.adjoint, self.params, self.tg));
        match solved {
            Ok(r) => r,
            Err(e) => {
                warn!("aggregate multiplier system not solved: {e}");
                f64::NAN
            }
        }
    }
}

/// Minimizes `f -> J(solve_forward(u0, p0, f), f)`.
///
/// Each iteration moves along the negative discrete-adjoint gradient and
/// accepts the first trial step with
/// `J(f - a g) <= J(f) - armijo_c a |g|^2`, shrinking `a` at most 60 times.
/// Iteration stops once `|g| <= grad_tol max(1, |g_0|)`.
pub fn minimize(
    initial: &ControlTrajectory,
    u0: &ScalarField,
    p0: &ScalarField,
    params: &CostParams,
    coef: &CoefficientSet,
    tg: &TimeGrid,
    opts: &OptimizerOptions,
) -> Result<OptimizationResult> {
    opts.validate()?;
    let problem = Problem {
        u0,
        p0,
        params,
        coef,
        tg,
        opts,
    };

    let mut f = initial.clone();
    let mut eval = problem.evaluate(&f)?;
    let mut j = eval.cost.total();
    let mut gnorm = eval.gradient.norm();
    let threshold = opts.grad_tol * gnorm.max(1.0);

    let mut result = OptimizationResult {
        best_control: f.clone(),
        j_history: vec![j],
        grad_norm_history: vec![gnorm],
        kkt_history: vec![problem.kkt(&f, &eval)],
        step_history: vec![0.0],
        shrink_history: vec![0],
        status: OptimizationStatus::IterationCap,
    };
    if gnorm <= threshold {
        result.status = OptimizationStatus::Converged;
        return Ok(result);
    }

    let mut step = opts.initial_step;
    for iter in 1..=opts.max_iter {
        let g2 = gnorm * gnorm;
        let mut trial_step = step;
        let mut accepted = None;
        for shrinks in 0..=MAX_SHRINKS {
            let mut trial = f.clone();
            trial.axpy(-trial_step, &eval.gradient);
            match problem.evaluate(&trial) {
                Ok(te) if te.cost.total() <= j - opts.armijo_c * trial_step * g2 => {
                    accepted = Some((trial, te, shrinks));
                    break;
                }
                Ok(_) | Err(Error::Unstable { .. }) => {}
                Err(e) => return Err(e),
            }
            if shrinks < MAX_SHRINKS {
                trial_step *= opts.shrink;
            }
        }
        let Some((next, next_eval, shrinks)) = accepted else {
            warn!("line search failed at iteration {iter} after {MAX_SHRINKS} shrinks");
            result.status = OptimizationStatus::LineSearchFailure;
            return Ok(result);
        };

        // Barzilai-Borwein guess <s, s> / <s, y> for the next trial step.
        let mut s = next.clone();
        s.axpy(-1.0, &f);
        let mut y = next_eval.gradient.clone();
        y.axpy(-1.0, &eval.gradient);
        let sy = s.inner(&y);
        step = if sy > 0.0 {
            (s.inner(&s) / sy).clamp(STEP_MIN, STEP_MAX)
        } else {
            trial_step
        };

        f = next;
        eval = next_eval;
        j = eval.cost.total();
        gnorm = eval.gradient.norm();
        debug!("iter {iter}: J = {j:.6e}, |g| = {gnorm:.6e}, step = {trial_step:.3e}, shrinks = {shrinks}");

        result.best_control = f.clone();
        result.j_history.push(j);
        result.grad_norm_history.push(gnorm);
        result.kkt_history.push(problem.kkt(&f, &eval));
        result.step_history.push(trial_step);
        result.shrink_history.push(shrinks);
        if gnorm <= threshold {
            result.status = OptimizationStatus::Converged;
            return Ok(result);
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{builtin_set, DEFAULT_FAMILY};
    use crate::mesh::Grid2D;
    use crate::state::solve_forward;
    use std::f64::consts::PI;

    struct Instance {
        grid: Grid2D,
        tg: TimeGrid,
        coef: CoefficientSet,
        u0: ScalarField,
        p0: ScalarField,
    }

    fn instance() -> Instance {
        let grid = Grid2D::new(9, 9, 3.0, 3.0).unwrap();
        let bump = |a: f64| {
            ScalarField::from_fn(&grid, |x, y| {
                a * (PI * x / 3.0).sin() * (PI * y / 3.0).sin()
            })
        };
        Instance {
            tg: TimeGrid::new(0.04, 4).unwrap(),
            coef: builtin_set(DEFAULT_FAMILY, 1.0, 2.0).unwrap(),
            u0: bump(0.5),
            p0: bump(0.3),
            grid,
        }
    }

    fn tracking_params(inst: &Instance, beta1: f64) -> CostParams {
        let fstar = ScalarField::from_fn(&inst.grid, |x, y| {
            2.0 * (PI * x / 3.0).sin() * (PI * y / 3.0).sin()
        });
        let traj = solve_forward(
            &inst.u0,
            &inst.p0,
            &ControlTrajectory::uniform(fstar, inst.tg.steps),
            &inst.coef,
            &inst.tg,
        )
        .unwrap();
        let n = inst.tg.steps;
        CostParams::new(beta1, 1.0, traj.u[n].clone(), traj.p[n].clone()).unwrap()
    }

    #[test]
    fn stationary_start_returns_immediately() {
        let g = Grid2D::unit_square(6).unwrap();
        let z = ScalarField::zeros(&g);
        let tg = TimeGrid::new(0.003, 3).unwrap();
        let coef = builtin_set(DEFAULT_FAMILY, 1.0, 2.0).unwrap();
        let params = CostParams::new(0.01, 1.0, z.clone(), z.clone()).unwrap();
        let r = minimize(
            &ControlTrajectory::zeros(&g, 3),
            &z,
            &z,
            &params,
            &coef,
            &tg,
            &OptimizerOptions::default(),
        )
        .unwrap();
        assert_eq!(r.status, OptimizationStatus::Converged);
        assert_eq!(r.j_history.len(), 1);
        assert_eq!(r.kkt_history, vec![0.0]);
    }

    #[test]
    fn descent_is_monotone_and_satisfies_armijo() {
        let inst = instance();
        let params = tracking_params(&inst, 1e-2);
        let opts = OptimizerOptions {
            grad_tol: 1e-12,
            max_iter: 40,
            ..Default::default()
        };
        let r = minimize(
            &ControlTrajectory::zeros(&inst.grid, inst.tg.steps),
            &inst.u0,
            &inst.p0,
            &params,
            &inst.coef,
            &inst.tg,
            &opts,
        )
        .unwrap();
        assert!(r.j_history.len() > 1);
        let n = r.j_history.len();
        assert_eq!(r.grad_norm_history.len(), n);
        assert_eq!(r.kkt_history.len(), n);
        for k in 1..n {
            let bound = r.j_history[k - 1]
                - opts.armijo_c * r.step_history[k] * r.grad_norm_history[k - 1].powi(2);
            assert!(r.j_history[k] <= bound, "iteration {k}");
        }
        assert!(r.grad_norm_history[n - 1] < r.grad_norm_history[0]);
    }

    #[test]
    fn stricter_armijo_constant_shrinks_more() {
        let inst = instance();
        let params = tracking_params(&inst, 1e-2);
        let run = |c: f64| {
            let opts = OptimizerOptions {
                armijo_c: c,
                max_iter: 1,
                initial_step: 1e6,
                ..Default::default()
            };
            minimize(
                &ControlTrajectory::zeros(&inst.grid, inst.tg.steps),
                &inst.u0,
                &inst.p0,
                &params,
                &inst.coef,
                &inst.tg,
                &opts,
            )
            .unwrap()
        };
        let loose = run(1e-4);
        let strict = run(0.99);
        assert!(strict.shrink_history[1] > loose.shrink_history[1]);
        assert!(strict.j_history[1] < strict.j_history[0]);
        assert!(loose.j_history[1] < loose.j_history[0]);
    }

    #[test]
    fn heavy_regularization_keeps_control_small() {
        let inst = instance();
        let params = tracking_params(&inst, 1e6);
        let opts = OptimizerOptions {
            grad_tol: 1e-8,
            max_iter: 30,
            ..Default::default()
        };
        let r = minimize(
            &ControlTrajectory::zeros(&inst.grid, inst.tg.steps),
            &inst.u0,
            &inst.p0,
            &params,
            &inst.coef,
            &inst.tg,
            &opts,
        )
        .unwrap();
        // the first-order optimality balance gives |f| ~ |mismatch gradient| / beta1
        assert!(r.best_control.norm() < 1e-4, "{}", r.best_control.norm());
    }

    #[test]
    fn repeated_runs_are_bitwise_identical() {
        let inst = instance();
        let params = tracking_params(&inst, 1e-2);
        let opts = OptimizerOptions {
            max_iter: 10,
            ..Default::default()
        };
        let run = || {
            minimize(
                &ControlTrajectory::zeros(&inst.grid, inst.tg.steps),
                &inst.u0,
                &inst.p0,
                &params,
                &inst.coef,
                &inst.tg,
                &opts,
            )
            .unwrap()
        };
        let (a, b) = (run(), run());
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.j_history), bits(&b.j_history));
        assert_eq!(bits(&a.grad_norm_history), bits(&b.grad_norm_history));
        assert_eq!(a.best_control, b.best_control);
    }

    #[test]
    fn invalid_options_are_rejected() {
        let inst = instance();
        let params = tracking_params(&inst, 1e-2);
        for opts in [
            OptimizerOptions {
                armijo_c: 1.0,
                ..Default::default()
            },
            OptimizerOptions {
                shrink: 0.0,
                ..Default::default()
            },
            OptimizerOptions {
                grad_tol: -1.0,
                ..Default::default()
            },
        ] {
            let r = minimize(
                &ControlTrajectory::zeros(&inst.grid, inst.tg.steps),
                &inst.u0,
                &inst.p0,
                &params,
                &inst.coef,
                &inst.tg,
                &opts,
            );
            assert!(matches!(r, Err(Error::InvalidParameter { .. })));
        }
    }
}
