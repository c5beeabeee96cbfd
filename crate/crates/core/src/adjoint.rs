//! Gradients of the reduced cost `f -> J(solve_forward(f), f)`.
//!
//! Two routes are provided:
//!
//! * the exact discrete adjoint: multipliers of the step equations swept
//!   backward in time with the transposed linearized step, giving the
//!   gradient of the discrete cost to round-off;
//! * the aggregate multiplier pair `(e1, p1)` obtained from one coupled
//!   stationary elliptic system, together with the residual of the control
//!   characterization `q0 beta1 tau sum_n |f^n|^{2q0-2} f^n = p1`.
//!
//! All gradients are Riesz representatives for the quadrature inner product
//! `sum_n hx hy sum_nodes a b`.

use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::linsolve::{solve_linear, FnOperator, SolveOutcome, SolverOptions};
use crate::mesh::{
    div_coeff_grad, div_flux, dot_grad, face_grad_product, CoefficientField, ScalarField,
};
use crate::objective::{cost_breakdown, cost_control_partial, CostBreakdown, CostParams};
use crate::state::{
    solve_forward, spatial_derivative, ControlTrajectory, StateTrajectory, TimeGrid,
};

/// Linearized explicit step at `(u, p)` applied to `(e, w, h)`:
/// `(e + tau dS_u[e, w], w + tau (dS_p[e, w] + h))`.
pub fn linearized_step(
    u: &ScalarField,
    p: &ScalarField,
    e: &ScalarField,
    w: &ScalarField,
    h: &ScalarField,
    coef: &CoefficientSet,
    tg: &TimeGrid,
) -> Result<(ScalarField, ScalarField)> {
    let (du, mut dp) = spatial_derivative(u, p, e, w, coef)?;
    dp.axpy(1.0, h);
    let mut out_u = e.clone();
    out_u.axpy(tg.tau, &du);
    let mut out_p = w.clone();
    out_p.axpy(tg.tau, &dp);
    Ok((out_u, out_p))
}

/// Transpose of [`linearized_step`]: maps `(lam_u, lam_p)` to the
/// `(e, w, h)` components.
///
/// ```text
/// e: lam_u + tau (phi'(u) lap lam_u - g'(u) G(p, lam_u) - d'(u) G(p, lam_p))
/// w: lam_p + tau (div(g(u) grad lam_u) + div(d(u) grad lam_p))
/// h: tau lam_p
/// ```
///
/// where `G` is [`face_grad_product`]. Each piece is the mechanical transpose
/// of the corresponding forward stencil.
pub fn transposed_step(
    u: &ScalarField,
    p: &ScalarField,
    lam_u: &ScalarField,
    lam_p: &ScalarField,
    coef: &CoefficientSet,
    tg: &TimeGrid,
) -> Result<(ScalarField, ScalarField, ScalarField)> {
    let grid = u.grid();
    if [p, lam_u, lam_p].iter().any(|f| f.grid() != grid) {
        return Err(Error::GridMismatch("transposed_step"));
    }
    let p_full = p.padded();
    let one = CoefficientField::constant(grid, 1.0);

    let lap = div_flux(&one, &lam_u.padded())?;
    let mut te = lap.zip_map(u, |l, r| coef.dphi(r) * l);
    let gu = face_grad_product(&p_full, lam_u)?;
    te.axpy(-1.0, &gu.zip_map(u, |v, r| coef.dg(r) * v));
    let gp = face_grad_product(&p_full, lam_p)?;
    te.axpy(-1.0, &gp.zip_map(u, |v, r| coef.dd(r) * v));
    let mut out_e = lam_u.clone();
    out_e.axpy(tg.tau, &te);

    let mut tw = div_coeff_grad(&CoefficientField::of_state(u, |r| coef.g(r)), lam_u)?;
    tw.axpy(
        1.0,
        &div_coeff_grad(&CoefficientField::of_state(u, |r| coef.d(r)), lam_p)?,
    );
    let mut out_w = lam_p.clone();
    out_w.axpy(tg.tau, &tw);

    Ok((out_e, out_w, lam_p.scaled(tg.tau)))
}

/// Multipliers of the step equations written as
/// `x^{n+1} - x^n - tau S(x^n, f^n) = 0`, for `n = 0..=N`.
///
/// `lam_*[n]` belongs to the step from level `n` to `n + 1`; the entry at
/// `n = N` is the zero terminal condition.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory {
    pub lam_u: Vec<ScalarField>,
    pub lam_p: Vec<ScalarField>,
}

/// Backward sweep `lam[n] = M_{n+1}^T lam[n+1] - tau (x^{n+1} - X)`,
/// `lam[N] = 0`, where `M_{n+1}` is the linearized step at level `n + 1`.
pub fn solve_adjoint_discrete(
    traj: &StateTrajectory,
    params: &CostParams,
    coef: &CoefficientSet,
    tg: &TimeGrid,
) -> Result<AdjointTrajectory> {
    let steps = tg.steps;
    if traj.levels() != steps + 1 {
        return Err(Error::LevelMismatch(format!(
            "trajectory has {} levels, expected {}",
            traj.levels(),
            steps + 1
        )));
    }
    if traj.grid() != params.target_u().grid() {
        return Err(Error::GridMismatch("solve_adjoint_discrete"));
    }
    let grid = traj.grid();
    let mut lam_u = vec![ScalarField::zeros(grid); steps + 1];
    let mut lam_p = vec![ScalarField::zeros(grid); steps + 1];
    for n in (0..steps).rev() {
        let m = n + 1;
        let (mut au, mut ap) = if m < steps {
            let (a, b, _) =
                transposed_step(&traj.u[m], &traj.p[m], &lam_u[m], &lam_p[m], coef, tg)?;
            (a, b)
        } else {
            (ScalarField::zeros(grid), ScalarField::zeros(grid))
        };
        au.axpy(-tg.tau, &traj.u[m].sub(params.target_u()));
        ap.axpy(-tg.tau, &traj.p[m].sub(params.target_p()));
        if !(au.is_finite() && ap.is_finite()) {
            return Err(Error::NonFinite(format!(
                "adjoint multipliers at level {n}"
            )));
        }
        lam_u[n] = au;
        lam_p[n] = ap;
    }
    Ok(AdjointTrajectory { lam_u, lam_p })
}

/// `dJ/df^n = tau q0 beta1 |f^n|^{2q0-2} f^n - tau lam_p[n]`.
pub fn gradient_wrt_control(
    controls: &ControlTrajectory,
    adj: &AdjointTrajectory,
    params: &CostParams,
    tg: &TimeGrid,
) -> ControlTrajectory {
    let mut grad = cost_control_partial(controls, params, tg);
    for (g, lp) in grad.f.iter_mut().zip(&adj.lam_p) {
        g.axpy(-tg.tau, lp);
    }
    grad
}

/// Cost, state, multipliers and gradient at one control.
#[derive(Debug, Clone)]
pub struct GradientEvaluation {
    pub cost: CostBreakdown,
    pub trajectory: StateTrajectory,
    pub adjoint: AdjointTrajectory,
    pub gradient: ControlTrajectory,
}

pub fn reduced_gradient(
    u0: &ScalarField,
    p0: &ScalarField,
    controls: &ControlTrajectory,
    params: &CostParams,
    coef: &CoefficientSet,
    tg: &TimeGrid,
) -> Result<GradientEvaluation> {
    let trajectory = solve_forward(u0, p0, controls, coef, tg)?;
    let cost = cost_breakdown(&trajectory, controls, params, tg)?;
    let adjoint = solve_adjoint_discrete(&trajectory, params, coef, tg)?;
    let gradient = gradient_wrt_control(controls, &adjoint, params, tg);
    Ok(GradientEvaluation {
        cost,
        trajectory,
        adjoint,
        gradient,
    })
}

/// Which state level supplies `u`, `p` in the aggregate system's coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Linearization {
    #[default]
    Terminal,
    /// Mean of levels `1..=N`.
    TimeAverage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateAdjoint {
    pub e1: ScalarField,
    pub p1: ScalarField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateSolve {
    pub adjoint: AggregateAdjoint,
    pub iterations: usize,
    pub residual: f64,
    pub relative_residual: f64,
    pub history: Vec<f64>,
}

/// Solves the coupled stationary system for `(e1, p1)`:
///
/// ```text
/// e1 + div(phi'(u) grad e1) - d'(u) grad p . grad p1 - phi''(u) grad u . grad e1
///    - g'(u) grad p . grad e1 = tau sum_{n=1..N} (u^n - U)
/// p1 + div(d(u) grad p1) + div(g(u) grad e1) = tau sum_{n=1..N} (p^n - P)
/// ```
///
/// with homogeneous Dirichlet data, `(u, p)` chosen by `linearization`. The
/// operator is not sign-definite in general; failure to reach the relative
/// tolerance is returned as [`Error::NotConverged`].
pub fn solve_adjoint_paper(
    traj: &StateTrajectory,
    params: &CostParams,
    coef: &CoefficientSet,
    tg: &TimeGrid,
    linearization: Linearization,
    opts: &SolverOptions,
) -> Result<AggregateSolve> {
    let steps = tg.steps;
    if traj.levels() != steps + 1 {
        return Err(Error::LevelMismatch(format!(
            "trajectory has {} levels, expected {}",
            traj.levels(),
            steps + 1
        )));
    }
    let grid = *traj.grid();
    let (ubar, pbar) = match linearization {
        Linearization::Terminal => (traj.u[steps].clone(), traj.p[steps].clone()),
        Linearization::TimeAverage => {
            let mut ua = ScalarField::zeros(&grid);
            let mut pa = ScalarField::zeros(&grid);
            for n in 1..=steps {
                ua.axpy(1.0 / steps as f64, &traj.u[n]);
                pa.axpy(1.0 / steps as f64, &traj.p[n]);
            }
            (ua, pa)
        }
    };

    let mut rhs_u = ScalarField::zeros(&grid);
    let mut rhs_p = ScalarField::zeros(&grid);
    for n in 1..=steps {
        rhs_u.axpy(tg.tau, &traj.u[n].sub(params.target_u()));
        rhs_p.axpy(tg.tau, &traj.p[n].sub(params.target_p()));
    }

    let op = aggregate_operator(&ubar, &pbar, coef);
    let n = grid.interior_len();
    let mut rhs = Vec::with_capacity(2 * n);
    rhs.extend_from_slice(rhs_u.values());
    rhs.extend_from_slice(rhs_p.values());

    let SolveOutcome {
        x,
        iterations,
        residual,
        rhs_norm,
        converged,
        history,
    } = solve_linear(&op, &rhs, opts)?;
    if !converged {
        return Err(Error::NotConverged {
            iterations,
            residual,
        });
    }
    let e1 = ScalarField::from_values(&grid, x[..n].to_vec())?;
    let p1 = ScalarField::from_values(&grid, x[n..].to_vec())?;
    Ok(AggregateSolve {
        adjoint: AggregateAdjoint { e1, p1 },
        iterations,
        residual,
        relative_residual: if rhs_norm > 0.0 {
            residual / rhs_norm
        } else {
            residual
        },
        history,
    })
}

/// The block operator of [`solve_adjoint_paper`] acting on `[e1; p1]`.
pub fn aggregate_operator<'a>(
    ubar: &'a ScalarField,
    pbar: &'a ScalarField,
    coef: &'a CoefficientSet,
) -> FnOperator<impl Fn(&[f64], &mut [f64]) + 'a> {
    let grid = *ubar.grid();
    let n = grid.interior_len();
    let dphi = CoefficientField::of_state(ubar, |r| coef.dphi(r));
    let d = CoefficientField::of_state(ubar, |r| coef.d(r));
    let g = CoefficientField::of_state(ubar, |r| coef.g(r));
    let d2phi = ubar.map(|r| coef.d2phi(r));
    let dg = ubar.map(|r| coef.dg(r));
    let dd = ubar.map(|r| coef.dd(r));
    FnOperator::new(2 * n, move |x: &[f64], out: &mut [f64]| {
        let e1 = ScalarField::from_values(&grid, x[..n].to_vec())
            .expect("aggregate operator input has the grid's length");
        let p1 = ScalarField::from_values(&grid, x[n..].to_vec())
            .expect("aggregate operator input has the grid's length");
        let grad_u_e1 = dot_grad(ubar, &e1).expect("shared grid");
        let grad_p_e1 = dot_grad(pbar, &e1).expect("shared grid");
        let grad_p_p1 = dot_grad(pbar, &p1).expect("shared grid");
        let div_e1 = div_coeff_grad(&dphi, &e1).expect("shared grid");
        let div_p1 = div_coeff_grad(&d, &p1).expect("shared grid");
        let div_g_e1 = div_coeff_grad(&g, &e1).expect("shared grid");
        for k in 0..n {
            out[k] = e1.values()[k] + div_e1.values()[k]
                - dd.values()[k] * grad_p_p1.values()[k]
                - d2phi.values()[k] * grad_u_e1.values()[k]
                - dg.values()[k] * grad_p_e1.values()[k];
            out[n + k] = p1.values()[k] + div_p1.values()[k] + div_g_e1.values()[k];
        }
    })
}

/// `|| q0 beta1 tau sum_n |f^n|^{2q0-2} f^n - p1 ||_2`.
pub fn kkt_residual(
    controls: &ControlTrajectory,
    aggregate: &AggregateAdjoint,
    params: &CostParams,
    tg: &TimeGrid,
) -> Result<f64> {
    if controls.f.iter().any(|f| f.grid() != aggregate.p1.grid()) {
        return Err(Error::GridMismatch("kkt_residual"));
    }
    let mut lhs = ScalarField::zeros(aggregate.p1.grid());
    for f in &cost_control_partial(controls, params, tg).f {
        lhs.axpy(1.0, f);
    }
    Ok(lhs.sub(&aggregate.p1).norm_l2())
}
