//! The time-discrete state system: explicit stepping of the coupled
//! saturation/pressure equations
//!
//! ```text
//! (u^{n+1} - u^n) / tau - lap phi(u^n) - div(g(u^n) grad p^n) = 0
//! (p^{n+1} - p^n) / tau - div(d(u^n) grad p^n)               = f^n
//! ```
//!
//! with homogeneous Dirichlet data, its residual and its directional
//! derivative.

use log::warn;

use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::mesh::{
    div_coeff_grad, div_flux, div_product_flux, CoefficientField, Grid2D, ScalarField,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_final: f64,
    pub steps: usize,
    pub tau: f64,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if steps < 1 {
            return Err(Error::InvalidTimeGrid("need at least one step".into()));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidTimeGrid(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        Ok(Self {
            t_final,
            steps,
            tau: t_final / steps as f64,
        })
    }

    #[inline]
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.tau
    }
}

/// States `u^n`, `p^n` for `n = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub u: Vec<ScalarField>,
    pub p: Vec<ScalarField>,
}

impl StateTrajectory {
    pub fn levels(&self) -> usize {
        self.u.len()
    }

    pub fn grid(&self) -> &Grid2D {
        self.u[0].grid()
    }
}

/// Controls `f^n` for `n = 0..N-1`; `f^n` drives the step from level `n` to
/// level `n + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTrajectory {
    pub f: Vec<ScalarField>,
}

impl ControlTrajectory {
    pub fn zeros(grid: &Grid2D, steps: usize) -> Self {
        Self {
            f: vec![ScalarField::zeros(grid); steps],
        }
    }

    pub fn uniform(field: ScalarField, steps: usize) -> Self {
        Self {
            f: vec![field; steps],
        }
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    /// `sum_n <a^n, b^n>` with the quadrature inner product in space.
    pub fn inner(&self, other: &ControlTrajectory) -> f64 {
        assert_eq!(
            self.len(),
            other.len(),
            "control trajectories differ in length"
        );
        self.f.iter().zip(&other.f).map(|(a, b)| a.inner(b)).sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn axpy(&mut self, alpha: f64, x: &ControlTrajectory) {
        assert_eq!(self.len(), x.len(), "control trajectories differ in length");
        for (a, b) in self.f.iter_mut().zip(&x.f) {
            a.axpy(alpha, b);
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            f: self.f.iter().map(|v| v.scaled(alpha)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.f.iter().all(ScalarField::is_finite)
    }
}

/// A direction `(e, w, h)` in state/control space.
#[derive(Debug, Clone, PartialEq)]
pub struct GateauxDirection {
    pub e: ScalarField,
    pub w: ScalarField,
    pub h: ScalarField,
}

impl GateauxDirection {
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            e: self.e.scaled(s),
            w: self.w.scaled(s),
            h: self.h.scaled(s),
        }
    }
}

fn check_grids(fields: &[&ScalarField], what: &'static str) -> Result<()> {
    let g = fields[0].grid();
    if fields.iter().any(|f| f.grid() != g) {
        return Err(Error::GridMismatch(what));
    }
    Ok(())
}

/// Spatial right-hand sides
/// `(lap phi(u) + div(g(u) grad p), div(d(u) grad p) + f)`.
///
/// `phi(u)` carries its boundary value `phi(0)` so that a spatially constant
/// state has zero Laplacian.
pub fn spatial_operator(
    u: &ScalarField,
    p: &ScalarField,
    f: &ScalarField,
    coef: &CoefficientSet,
) -> Result<(ScalarField, ScalarField)> {
    check_grids(&[u, p, f], "spatial_operator")?;
    let grid = u.grid();
    let one = CoefficientField::constant(grid, 1.0);
    let mut su = div_flux(&one, &CoefficientField::of_state(u, |r| coef.phi(r)))?;
    su.axpy(
        1.0,
        &div_coeff_grad(&CoefficientField::of_state(u, |r| coef.g(r)), p)?,
    );
    let mut sp = div_coeff_grad(&CoefficientField::of_state(u, |r| coef.d(r)), p)?;
    sp.axpy(1.0, f);
    Ok((su, sp))
}

/// Residual rows of the step equations; the initial-data rows are carried by
/// the trajectory itself.
pub fn residual_f(
    u_n: &ScalarField,
    u_next: &ScalarField,
    p_n: &ScalarField,
    p_next: &ScalarField,
    f_n: &ScalarField,
    coef: &CoefficientSet,
    tg: &TimeGrid,
) -> Result<(ScalarField, ScalarField)> {
    check_grids(&[u_n, u_next, p_n, p_next, f_n], "residual_f")?;
    let (su, sp) = spatial_operator(u_n, p_n, f_n, coef)?;
    let inv_tau = 1.0 / tg.tau;
    let r1 = u_next.sub(u_n).scaled(inv_tau).sub(&su);
    let r2 = p_next.sub(p_n).scaled(inv_tau).sub(&sp);
    Ok((r1, r2))
}

/// The step residual with each time difference replaced by the identity:
/// `(u - S_u(u, p), p - S_p(u, p, f))`. Its directional derivative is what
/// [`gateaux_apply`] returns.
pub fn printed_residual(
    u: &ScalarField,
    p: &ScalarField,
    f: &ScalarField,
    coef: &CoefficientSet,
) -> Result<(ScalarField, ScalarField)> {
    let (su, sp) = spatial_operator(u, p, f, coef)?;
    Ok((u.sub(&su), p.sub(&sp)))
}

/// One explicit step. Returns `Error::NonFinite` if the new state is not finite.
pub fn step_forward(
    u_n: &ScalarField,
    p_n: &ScalarField,
    f_n: &ScalarField,
    coef: &CoefficientSet,
    tg: &TimeGrid,
) -> Result<(ScalarField, ScalarField)> {
    step_forward_with_source(u_n, p_n, f_n, None, coef, tg)
}

/// [`step_forward`] with an optional extra source in the saturation equation.
pub fn step_forward_with_source(
    u_n: &ScalarField,
    p_n: &ScalarField,
    f_n: &ScalarField,
    source_u: Option<&ScalarField>,
    coef: &CoefficientSet,
    tg: &TimeGrid,
) -> Result<(ScalarField, ScalarField)> {
    let (mut su, sp) = spatial_operator(u_n, p_n, f_n, coef)?;
    if let Some(s) = source_u {
        check_grids(&[u_n, s], "step_forward_with_source")?;
        su.axpy(1.0, s);
    }
    let mut u = u_n.clone();
    u.axpy(tg.tau, &su);
    let mut p = p_n.clone();
    p.axpy(tg.tau, &sp);
    if !(u.is_finite() && p.is_finite()) {
        return Err(Error::NonFinite("explicit step".into()));
    }
    Ok((u, p))
}

/// Conservative explicit step bound
/// `0.5 / (D (2/hx^2 + 2/hy^2) + c2 p_scale (1/hx + 1/hy))` with diffusion
/// scale `D = max(c2, c3)`; `c2` bounds `d`, `c3` bounds `phi'`.
pub fn stability_bound(grid: &Grid2D, coef: &CoefficientSet, p_scale: f64) -> f64 {
    let b = coef.bounds();
    let diffusion = b.c2.max(b.c3);
    let (hx, hy) = (grid.hx, grid.hy);
    0.5 / (diffusion * (2.0 / (hx * hx) + 2.0 / (hy * hy)) + b.c2 * p_scale * (1.0 / hx + 1.0 / hy))
}

/// Largest face difference quotient of `p`, boundary faces included.
pub fn pressure_gradient_scale(p: &ScalarField) -> f64 {
    let g = p.grid();
    let mut m: f64 = 0.0;
    for j in 1..g.ny {
        for i in 0..g.nx {
            m = m.max((p.at(i + 1, j) - p.at(i, j)).abs() / g.hx);
        }
    }
    for j in 0..g.ny {
        for i in 1..g.nx {
            m = m.max((p.at(i, j + 1) - p.at(i, j)).abs() / g.hy);
        }
    }
    m
}

pub fn solve_forward(
    u0: &ScalarField,
    p0: &ScalarField,
    controls: &ControlTrajectory,
    coef: &CoefficientSet,
    tg: &TimeGrid,
) -> Result<StateTrajectory> {
    solve_forward_with_sources(u0, p0, controls, None, coef, tg)
}

/// Forward solve with optional per-step saturation sources (used by
/// manufactured-solution studies).
pub fn solve_forward_with_sources(
    u0: &ScalarField,
    p0: &ScalarField,
    controls: &ControlTrajectory,
    sources_u: Option<&[ScalarField]>,
    coef: &CoefficientSet,
    tg: &TimeGrid,
) -> Result<StateTrajectory> {
    if controls.len() != tg.steps {
        return Err(Error::LevelMismatch(format!(
            "{} controls for {} steps",
            controls.len(),
            tg.steps
        )));
    }
    if let Some(s) = sources_u {
        if s.len() != tg.steps {
            return Err(Error::LevelMismatch(format!(
                "{} sources for {} steps",
                s.len(),
                tg.steps
            )));
        }
    }
    check_grids(&[u0, p0], "solve_forward")?;
    if controls.f.iter().any(|f| f.grid() != u0.grid()) {
        return Err(Error::GridMismatch("solve_forward"));
    }

    let tau_max = stability_bound(u0.grid(), coef, pressure_gradient_scale(p0));
    if tg.tau > tau_max {
        warn!(
            "time step {:.4e} exceeds the explicit stability bound {:.4e}",
            tg.tau, tau_max
        );
    }

    let mut u = Vec::with_capacity(tg.steps + 1);
    let mut p = Vec::with_capacity(tg.steps + 1);
    u.push(u0.clone());
    p.push(p0.clone());
    for n in 0..tg.steps {
        let source = sources_u.map(|s| &s[n]);
        let (un, pn) = step_forward_with_source(&u[n], &p[n], &controls.f[n], source, coef, tg)
            .map_err(|e| match e {
                Error::NonFinite(_) => Error::Unstable {
                    step: n,
                    tau: tg.tau,
                    tau_max,
                },
                other => other,
            })?;
        u.push(un);
        p.push(pn);
    }
    Ok(StateTrajectory { u, p })
}

/// Derivative of [`spatial_operator`] at `(u, p)` in direction `(e, w)`,
/// without the control contribution.
///
/// The mixed fluxes `div(c e grad v)` use face-averaged `c * e` times face
/// differences of `v`. The `phi''(u) e grad u` flux is taken as
/// `e grad phi'(u)` in face form; together with the `phi'(u) grad e` term it
/// is exactly the discrete Laplacian of `phi'(u) e`, so the result is the
/// exact derivative of the discrete operator.
pub fn spatial_derivative(
    u: &ScalarField,
    p: &ScalarField,
    e: &ScalarField,
    w: &ScalarField,
    coef: &CoefficientSet,
) -> Result<(ScalarField, ScalarField)> {
    check_grids(&[u, p, e, w], "spatial_derivative")?;
    let dphi_full = CoefficientField::of_state(u, |r| coef.dphi(r));
    let p_full = p.padded();

    let mut du = div_coeff_grad(&dphi_full, e)?;
    du.axpy(1.0, &div_flux(&e.padded(), &dphi_full)?);
    du.axpy(
        1.0,
        &div_coeff_grad(&CoefficientField::of_state(u, |r| coef.g(r)), w)?,
    );
    du.axpy(1.0, &div_product_flux(&u.map(|r| coef.dg(r)), e, &p_full)?);

    let mut dp = div_coeff_grad(&CoefficientField::of_state(u, |r| coef.d(r)), w)?;
    dp.axpy(1.0, &div_product_flux(&u.map(|r| coef.dd(r)), e, &p_full)?);
    Ok((du, dp))
}

/// Directional derivative `(xi_1, xi_3)` of the step operator at `(u, p)`:
///
/// ```text
/// xi_1 = e - div(phi'(u) grad e) - div(phi''(u) e grad u) - div(g(u) grad w) - div(g'(u) e grad p)
/// xi_3 = w - div(d(u) grad w) - div(d'(u) e grad p) - h
/// ```
///
/// This is the exact derivative of [`printed_residual`]; the trace
/// components are the direction's own initial values and are not formed.
pub fn gateaux_apply(
    u: &ScalarField,
    p: &ScalarField,
    dir: &GateauxDirection,
    coef: &CoefficientSet,
) -> Result<(ScalarField, ScalarField)> {
    check_grids(&[u, &dir.h], "gateaux_apply")?;
    let (du, dp) = spatial_derivative(u, p, &dir.e, &dir.w, coef)?;
    let xi1 = dir.e.sub(&du);
    let mut xi3 = dir.w.sub(&dp);
    xi3.axpy(-1.0, &dir.h);
    Ok((xi1, xi3))
}
