//! Discrete tracking cost
//!
//! `J = tau/2 * sum_{n=1..N} ( |u^n - U|^2 + |p^n - P|^2 + beta1 * int |f^{n-1}|^{2 q0} )`
//!
//! The control driving the step into level `n` is stored at index `n - 1`.

use crate::error::{Error, Result};
use crate::mesh::{integrate_power, ScalarField};
use crate::state::{ControlTrajectory, StateTrajectory, TimeGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct CostParams {
    beta1: f64,
    q0: f64,
    target_u: ScalarField,
    target_p: ScalarField,
}

impl CostParams {
    /// `q0 = 1` is accepted as the quadratic limit of the `q0 > 1` family.
    pub fn new(beta1: f64, q0: f64, target_u: ScalarField, target_p: ScalarField) -> Result<Self> {
        if !(beta1 > 0.0 && beta1.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "beta1",
                constraint: "beta1 > 0",
                value: beta1,
            });
        }
        if !(q0 >= 1.0 && q0.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "q0",
                constraint: "q0 > 1 (q0 = 1 allowed as the quadratic limit)",
                value: q0,
            });
        }
        if !target_u.same_grid(&target_p) {
            return Err(Error::GridMismatch("cost targets"));
        }
        Ok(Self {
            beta1,
            q0,
            target_u,
            target_p,
        })
    }

    pub fn beta1(&self) -> f64 {
        self.beta1
    }

    pub fn q0(&self) -> f64 {
        self.q0
    }

    pub fn target_u(&self) -> &ScalarField {
        &self.target_u
    }

    pub fn target_p(&self) -> &ScalarField {
        &self.target_p
    }

    pub fn with_beta1(&self, beta1: f64) -> Result<Self> {
        Self::new(beta1, self.q0, self.target_u.clone(), self.target_p.clone())
    }
}

/// Split of `J` into its three families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    pub saturation: f64,
    pub pressure: f64,
    pub control: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.saturation + self.pressure + self.control
    }
}

fn check_levels(
    traj: &StateTrajectory,
    controls: &ControlTrajectory,
    params: &CostParams,
    tg: &TimeGrid,
) -> Result<()> {
    if traj.u.len() != tg.steps + 1 || traj.p.len() != tg.steps + 1 {
        return Err(Error::LevelMismatch(format!(
            "trajectory has {} levels, expected {}",
            traj.u.len(),
            tg.steps + 1
        )));
    }
    if controls.len() != tg.steps {
        return Err(Error::LevelMismatch(format!(
            "{} controls for {} steps",
            controls.len(),
            tg.steps
        )));
    }
    if traj.grid() != params.target_u.grid() {
        return Err(Error::GridMismatch("evaluate_cost"));
    }
    Ok(())
}

pub fn cost_breakdown(
    traj: &StateTrajectory,
    controls: &ControlTrajectory,
    params: &CostParams,
    tg: &TimeGrid,
) -> Result<CostBreakdown> {
    check_levels(traj, controls, params, tg)?;
    let half_tau = 0.5 * tg.tau;
    let mut out = CostBreakdown {
        saturation: 0.0,
        pressure: 0.0,
        control: 0.0,
    };
    for n in 1..=tg.steps {
        out.saturation += integrate_power(&traj.u[n].sub(&params.target_u), 2.0)?;
        out.pressure += integrate_power(&traj.p[n].sub(&params.target_p), 2.0)?;
    }
    out.saturation *= half_tau;
    out.pressure *= half_tau;
    out.control = control_cost(controls, params, tg)?;
    Ok(out)
}

pub fn evaluate_cost(
    traj: &StateTrajectory,
    controls: &ControlTrajectory,
    params: &CostParams,
    tg: &TimeGrid,
) -> Result<f64> {
    Ok(cost_breakdown(traj, controls, params, tg)?.total())
}

/// The control penalty `tau/2 * beta1 * sum_n int |f^n|^{2 q0}` alone.
pub fn control_cost(
    controls: &ControlTrajectory,
    params: &CostParams,
    tg: &TimeGrid,
) -> Result<f64> {
    let exponent = 2.0 * params.q0;
    let mut sum = 0.0;
    for f in &controls.f {
        sum += integrate_power(f, exponent)?;
    }
    Ok(0.5 * tg.tau * params.beta1 * sum)
}

/// Gradient of [`control_cost`] with respect to the quadrature inner product:
/// `tau * q0 * beta1 * |f^n|^{2 q0 - 2} f^n` per level.
pub fn cost_control_partial(
    controls: &ControlTrajectory,
    params: &CostParams,
    tg: &TimeGrid,
) -> ControlTrajectory {
    let scale = tg.tau * params.q0 * params.beta1;
    let power = 2.0 * params.q0 - 2.0;
    ControlTrajectory {
        f: controls
            .f
            .iter()
            .map(|f| {
                if power == 0.0 {
                    f.scaled(scale)
                } else {
                    f.map(|v| scale * v.abs().powf(power) * v)
                }
            })
            .collect(),
    }
}
