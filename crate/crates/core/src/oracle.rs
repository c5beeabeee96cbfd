//! Independent checks: central-difference derivative oracles and
//! manufactured-solution convergence studies for the forward scheme.

use std::io::Write;

use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::mesh::{Grid2D, ScalarField};
use crate::state::{
    printed_residual, solve_forward_with_sources, ControlTrajectory, GateauxDirection, TimeGrid,
};

fn check_step(s: f64) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "s",
            constraint: "s > 0",
            value: s,
        });
    }
    Ok(())
}

/// `(evaluate(at + s dir) - evaluate(at - s dir)) / (2 s)`.
pub fn fd_directional<F>(
    mut evaluate: F,
    at: &ControlTrajectory,
    dir: &ControlTrajectory,
    s: f64,
) -> Result<f64>
where
    F: FnMut(&ControlTrajectory) -> Result<f64>,
{
    check_step(s)?;
    let mut plus = at.clone();
    plus.axpy(s, dir);
    let mut minus = at.clone();
    minus.axpy(-s, dir);
    let jp = evaluate(&plus)?;
    let jm = evaluate(&minus)?;
    let d = (jp - jm) / (2.0 * s);
    if !d.is_finite() {
        return Err(Error::NonFinite("finite-difference evaluation".into()));
    }
    Ok(d)
}

/// Central difference of [`printed_residual`] at `(u, p, f)` along
/// `(e, w, h)`; the comparator for [`crate::state::gateaux_apply`].
pub fn fd_gateaux(
    u: &ScalarField,
    p: &ScalarField,
    f: &ScalarField,
    dir: &GateauxDirection,
    coef: &CoefficientSet,
    s: f64,
) -> Result<(ScalarField, ScalarField)> {
    check_step(s)?;
    let shifted = |sign: f64| {
        let mut uu = u.clone();
        uu.axpy(sign * s, &dir.e);
        let mut pp = p.clone();
        pp.axpy(sign * s, &dir.w);
        let mut ff = f.clone();
        ff.axpy(sign * s, &dir.h);
        printed_residual(&uu, &pp, &ff, coef)
    };
    let (r1p, r3p) = shifted(1.0)?;
    let (r1m, r3m) = shifted(-1.0)?;
    let inv = 1.0 / (2.0 * s);
    let d1 = r1p.sub(&r1m).scaled(inv);
    let d3 = r3p.sub(&r3m).scaled(inv);
    if !(d1.is_finite() && d3.is_finite()) {
        return Err(Error::NonFinite(
            "finite-difference Gateaux evaluation".into(),
        ));
    }
    Ok((d1, d3))
}

/// Closed-form space-time fields vanishing on the boundary of `[0, lx] x [0, ly]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Manufactured {
    Zero,
    /// `amplitude * sin(pi x / lx) sin(pi y / ly) exp(-decay t)`
    SineProduct {
        amplitude: f64,
        decay: f64,
    },
}

/// Value, time derivative, gradient and Laplacian at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointJet {
    pub value: f64,
    pub dt: f64,
    pub grad: (f64, f64),
    pub lap: f64,
}

impl Manufactured {
    pub fn jet(&self, grid: &Grid2D, x: f64, y: f64, t: f64) -> PointJet {
        match *self {
            Manufactured::Zero => PointJet {
                value: 0.0,
                dt: 0.0,
                grad: (0.0, 0.0),
                lap: 0.0,
            },
            Manufactured::SineProduct { amplitude, decay } => {
                let kx = std::f64::consts::PI / grid.lx;
                let ky = std::f64::consts::PI / grid.ly;
                let a = amplitude * (-decay * t).exp();
                let (sx, cx) = (kx * x).sin_cos();
                let (sy, cy) = (ky * y).sin_cos();
                let value = a * sx * sy;
                PointJet {
                    value,
                    dt: -decay * value,
                    grad: (a * kx * cx * sy, a * ky * sx * cy),
                    lap: -(kx * kx + ky * ky) * value,
                }
            }
        }
    }

    pub fn field(&self, grid: &Grid2D, t: f64) -> ScalarField {
        ScalarField::from_fn(grid, |x, y| self.jet(grid, x, y, t).value)
    }
}

/// Residuals of the continuous system at the exact pair, i.e. the forcing
/// `(r_u, r_p)` that makes `(u, p)` an exact solution.
pub fn manufactured_forcing(
    u: &Manufactured,
    p: &Manufactured,
    coef: &CoefficientSet,
    grid: &Grid2D,
    t: f64,
) -> (ScalarField, ScalarField) {
    let mut ru = ScalarField::zeros(grid);
    let mut rp = ScalarField::zeros(grid);
    for (k, (i, j)) in grid.interior_nodes().enumerate() {
        let (x, y) = grid.coords(i, j);
        let ju = u.jet(grid, x, y, t);
        let jp = p.jet(grid, x, y, t);
        let r = ju.value;
        let gu_gu = ju.grad.0 * ju.grad.0 + ju.grad.1 * ju.grad.1;
        let gu_gp = ju.grad.0 * jp.grad.0 + ju.grad.1 * jp.grad.1;
        let lap_phi = coef.dphi(r) * ju.lap + coef.d2phi(r) * gu_gu;
        let div_g = coef.g(r) * jp.lap + coef.dg(r) * gu_gp;
        let div_d = coef.d(r) * jp.lap + coef.dd(r) * gu_gp;
        ru.values_mut()[k] = ju.dt - lap_phi - div_g;
        rp.values_mut()[k] = jp.dt - div_d;
    }
    (ru, rp)
}

/// Runs the scheme with the manufactured forcing: the saturation residual as
/// an extra source, the pressure residual as the control.
pub fn solve_manufactured(
    u: &Manufactured,
    p: &Manufactured,
    coef: &CoefficientSet,
    grid: &Grid2D,
    tg: &TimeGrid,
) -> Result<(ScalarField, ScalarField)> {
    let mut sources = Vec::with_capacity(tg.steps);
    let mut controls = Vec::with_capacity(tg.steps);
    for n in 0..tg.steps {
        let (ru, rp) = manufactured_forcing(u, p, coef, grid, tg.time(n));
        sources.push(ru);
        controls.push(rp);
    }
    let traj = solve_forward_with_sources(
        &u.field(grid, 0.0),
        &p.field(grid, 0.0),
        &ControlTrajectory { f: controls },
        Some(&sources),
        coef,
        tg,
    )?;
    Ok((traj.u[tg.steps].clone(), traj.p[tg.steps].clone()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Spatial,
    Temporal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub hx: f64,
    pub tau: f64,
    pub err_u: f64,
    pub err_p: f64,
    /// Observed order against the previous row; `None` on the first row.
    pub order_u: Option<f64>,
    pub order_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub kind: StudyKind,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    fn from_errors(kind: StudyKind, mut rows: Vec<ConvergenceRow>) -> Self {
        for k in 1..rows.len() {
            let (prev, cur) = (rows[k - 1], rows[k]);
            let ratio = match kind {
                StudyKind::Spatial => prev.hx / cur.hx,
                StudyKind::Temporal => prev.tau / cur.tau,
            };
            let order = |a: f64, b: f64| {
                if a == 0.0 && b == 0.0 {
                    None
                } else {
                    Some((a / b).ln() / ratio.ln())
                }
            };
            rows[k].order_u = order(prev.err_u, cur.err_u);
            rows[k].order_p = order(prev.err_p, cur.err_p);
        }
        Self { kind, rows }
    }

    /// Observed orders of both variables over all refinements.
    pub fn orders(&self) -> Vec<f64> {
        self.rows
            .iter()
            .flat_map(|r| [r.order_u, r.order_p])
            .flatten()
            .collect()
    }

    pub fn max_error(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.err_u.max(r.err_p))
            .fold(0.0, f64::max)
    }

    /// CSV with header `hx,tau,err_u,err_p,order_u,order_p`; orders of the
    /// first row are left empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["hx", "tau", "err_u", "err_p", "order_u", "order_p"])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                format!("{:.16e}", r.hx),
                format!("{:.16e}", r.tau),
                format!("{:.16e}", r.err_u),
                format!("{:.16e}", r.err_p),
                opt(r.order_u),
                opt(r.order_p),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_nonempty(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "refinement list",
            constraint: "at least one configuration",
            value: 0.0,
        });
    }
    Ok(())
}

/// Max-norm errors at the final time against the exact pair, one row per
/// `(grid, time grid)` configuration; orders are taken with respect to `hx`.
pub fn mms_spatial_study(
    u: &Manufactured,
    p: &Manufactured,
    coef: &CoefficientSet,
    configs: &[(Grid2D, TimeGrid)],
) -> Result<ConvergenceReport> {
    check_nonempty(configs.len())?;
    let mut rows = Vec::with_capacity(configs.len());
    for (grid, tg) in configs {
        let (un, pn) = solve_manufactured(u, p, coef, grid, tg)?;
        let t = tg.t_final;
        rows.push(ConvergenceRow {
            hx: grid.hx,
            tau: tg.tau,
            err_u: un.sub(&u.field(grid, t)).norm_max(),
            err_p: pn.sub(&p.field(grid, t)).norm_max(),
            order_u: None,
            order_p: None,
        });
    }
    Ok(ConvergenceReport::from_errors(StudyKind::Spatial, rows))
}

/// Temporal study on one grid. Errors are measured against the same scheme
/// run with `reference_steps` steps, so the fixed spatial error cancels and
/// the observed order is that of the time discretization alone.
pub fn mms_temporal_study(
    u: &Manufactured,
    p: &Manufactured,
    coef: &CoefficientSet,
    grid: &Grid2D,
    time_grids: &[TimeGrid],
    reference_steps: usize,
) -> Result<ConvergenceReport> {
    check_nonempty(time_grids.len())?;
    let t_final = time_grids[0].t_final;
    if time_grids.iter().any(|tg| tg.t_final != t_final) {
        return Err(Error::InvalidTimeGrid(
            "temporal study needs a common final time".into(),
        ));
    }
    let (uref, pref) =
        solve_manufactured(u, p, coef, grid, &TimeGrid::new(t_final, reference_steps)?)?;
    let mut rows = Vec::with_capacity(time_grids.len());
    for tg in time_grids {
        let (un, pn) = solve_manufactured(u, p, coef, grid, tg)?;
        rows.push(ConvergenceRow {
            hx: grid.hx,
            tau: tg.tau,
            err_u: un.sub(&uref).norm_max(),
            err_p: pn.sub(&pref).norm_max(),
            order_u: None,
            order_p: None,
        });
    }
    Ok(ConvergenceReport::from_errors(StudyKind::Temporal, rows))
}

/// Unit-square spatial refinement `n = 8, 16, 32, 64` with `tau` proportional
/// to `h^2`, followed by halving `tau` on the 16-cell grid.
pub fn standard_mms_studies(
    coef: &CoefficientSet,
    t_final: f64,
) -> Result<(ConvergenceReport, ConvergenceReport)> {
    let pair = Manufactured::SineProduct {
        amplitude: 1.0,
        decay: 1.0,
    };
    let mut configs = Vec::new();
    for (n, steps) in [(8, 64), (16, 256), (32, 1024), (64, 4096)] {
        configs.push((Grid2D::unit_square(n)?, TimeGrid::new(t_final, steps)?));
    }
    let spatial = mms_spatial_study(&pair, &pair, coef, &configs)?;
    let grid = Grid2D::unit_square(16)?;
    let tgs = [512, 1024, 2048, 4096]
        .iter()
        .map(|&s| TimeGrid::new(t_final, s))
        .collect::<Result<Vec<_>>>()?;
    let temporal = mms_temporal_study(&pair, &pair, coef, &grid, &tgs, 65536)?;
    Ok((spatial, temporal))
}
