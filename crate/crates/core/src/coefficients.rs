//! Constitutive nonlinearities `phi`, `g`, `d` and sampled checks of the
//! structural bounds the solver relies on.
//!
//! Bounds, for all sampled `r`:
//!
//! * `0 < c1 <= d(r) <= c2` and `c1 <= phi(r) <= c2`
//! * `|d'(r)|, |phi'(r)|, |phi''(r)| <= c3`
//! * `|phi'''(r)| <= c_phi3`
//!
//! `phi` must provide derivatives up to order 3, `g` up to 2 and `d` up to 1.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

pub const DEFAULT_FAMILY: &str = "logistic";
pub const BUILTIN_FAMILIES: &[&str] = &["logistic", "decoupled"];

/// A scalar function of one real variable together with its derivatives.
pub trait Profile: Send + Sync + fmt::Debug {
    /// Derivative of order `order` at `r`; order 0 is the value.
    fn eval(&self, order: usize, r: f64) -> f64;
    /// Highest derivative order `eval` supports.
    fn max_order(&self) -> usize;
}

/// `lo + (hi - lo) / (1 + exp(-r))`
#[derive(Debug, Clone, Copy)]
pub struct Logistic {
    pub lo: f64,
    pub hi: f64,
}

impl Profile for Logistic {
    fn eval(&self, order: usize, r: f64) -> f64 {
        let s = 1.0 / (1.0 + (-r).exp());
        let k = self.hi - self.lo;
        let q = s * (1.0 - s);
        match order {
            0 => self.lo + k * s,
            1 => k * q,
            2 => k * q * (1.0 - 2.0 * s),
            3 => k * q * (1.0 - 6.0 * q),
            _ => panic!("Logistic provides derivatives up to order 3"),
        }
    }

    fn max_order(&self) -> usize {
        3
    }
}

/// `amp * tanh(r) * exp(-r^2 / 2)`
#[derive(Debug, Clone, Copy)]
pub struct TanhGauss {
    pub amp: f64,
}

impl Profile for TanhGauss {
    fn eval(&self, order: usize, r: f64) -> f64 {
        let t = r.tanh();
        let sech2 = 1.0 - t * t;
        let gauss = (-0.5 * r * r).exp();
        match order {
            0 => self.amp * t * gauss,
            1 => self.amp * gauss * (sech2 - r * t),
            2 => self.amp * gauss * (-2.0 * sech2 * t - t - 2.0 * r * sech2 + r * r * t),
            _ => panic!("TanhGauss provides derivatives up to order 2"),
        }
    }

    fn max_order(&self) -> usize {
        2
    }
}

/// `intercept + slope * r`; every derivative exists.
#[derive(Debug, Clone, Copy)]
pub struct Affine {
    pub intercept: f64,
    pub slope: f64,
}

impl Affine {
    pub fn constant(value: f64) -> Self {
        Self {
            intercept: value,
            slope: 0.0,
        }
    }
}

impl Profile for Affine {
    fn eval(&self, order: usize, r: f64) -> f64 {
        match order {
            0 => self.intercept + self.slope * r,
            1 => self.slope,
            _ => 0.0,
        }
    }

    fn max_order(&self) -> usize {
        usize::MAX
    }
}

/// Uniformly sampled function with one table per derivative order.
///
/// The order-`k` table is interpolated by cubic Hermite segments using the
/// order-`k + 1` table as slopes; the highest table uses finite-difference
/// slopes. Arguments outside the table range are clamped to it.
#[derive(Debug, Clone)]
pub struct Tabulated {
    r0: f64,
    dr: f64,
    tables: Vec<Vec<f64>>,
}

impl Tabulated {
    pub fn new(r0: f64, dr: f64, tables: Vec<Vec<f64>>) -> Result<Self> {
        if !(dr > 0.0) || !r0.is_finite() {
            return Err(Error::InvalidTable(format!(
                "bad sampling r0 = {r0}, dr = {dr}"
            )));
        }
        let len = tables.first().map_or(0, Vec::len);
        if len < 2 {
            return Err(Error::InvalidTable("need at least two samples".into()));
        }
        if tables.iter().any(|t| t.len() != len) {
            return Err(Error::InvalidTable(
                "derivative tables differ in length".into(),
            ));
        }
        if tables.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidTable("non-finite entry".into()));
        }
        Ok(Self { r0, dr, tables })
    }

    pub fn range(&self) -> (f64, f64) {
        let n = self.tables[0].len();
        (self.r0, self.r0 + (n - 1) as f64 * self.dr)
    }

    fn slope(&self, order: usize, k: usize) -> f64 {
        if let Some(next) = self.tables.get(order + 1) {
            return next[k];
        }
        let t = &self.tables[order];
        let n = t.len();
        if k == 0 {
            (t[1] - t[0]) / self.dr
        } else if k == n - 1 {
            (t[n - 1] - t[n - 2]) / self.dr
        } else {
            (t[k + 1] - t[k - 1]) / (2.0 * self.dr)
        }
    }
}

impl Profile for Tabulated {
    fn eval(&self, order: usize, r: f64) -> f64 {
        assert!(
            order < self.tables.len(),
            "no table for derivative order {order}"
        );
        let (lo, hi) = self.range();
        let r = r.clamp(lo, hi);
        let n = self.tables[order].len();
        let pos = (r - self.r0) / self.dr;
        let k = (pos.floor() as usize).min(n - 2);
        let t = pos - k as f64;
        let (y0, y1) = (self.tables[order][k], self.tables[order][k + 1]);
        let (m0, m1) = (
            self.slope(order, k) * self.dr,
            self.slope(order, k + 1) * self.dr,
        );
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1
    }

    fn max_order(&self) -> usize {
        self.tables.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Bound on `|phi'''|`.
    pub c_phi3: f64,
}

#[derive(Debug, Clone)]
pub struct CoefficientSet {
    name: String,
    phi: Arc<dyn Profile>,
    g: Arc<dyn Profile>,
    d: Arc<dyn Profile>,
    bounds: Bounds,
}

impl CoefficientSet {
    pub fn new(
        name: impl Into<String>,
        phi: Arc<dyn Profile>,
        g: Arc<dyn Profile>,
        d: Arc<dyn Profile>,
        bounds: Bounds,
    ) -> Result<Self> {
        if phi.max_order() < 3 || g.max_order() < 2 || d.max_order() < 1 {
            return Err(Error::InvalidTable(
                "phi needs derivatives to order 3, g to order 2, d to order 1".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            phi,
            g,
            d,
            bounds,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    #[inline]
    pub fn phi(&self, r: f64) -> f64 {
        self.phi.eval(0, r)
    }
    #[inline]
    pub fn dphi(&self, r: f64) -> f64 {
        self.phi.eval(1, r)
    }
    #[inline]
    pub fn d2phi(&self, r: f64) -> f64 {
        self.phi.eval(2, r)
    }
    #[inline]
    pub fn d3phi(&self, r: f64) -> f64 {
        self.phi.eval(3, r)
    }
    #[inline]
    pub fn g(&self, r: f64) -> f64 {
        self.g.eval(0, r)
    }
    #[inline]
    pub fn dg(&self, r: f64) -> f64 {
        self.g.eval(1, r)
    }
    #[inline]
    pub fn d2g(&self, r: f64) -> f64 {
        self.g.eval(2, r)
    }
    #[inline]
    pub fn d(&self, r: f64) -> f64 {
        self.d.eval(0, r)
    }
    #[inline]
    pub fn dd(&self, r: f64) -> f64 {
        self.d.eval(1, r)
    }

    /// Loads a coefficient table with header
    /// `r,phi,dphi,d2phi,d3phi,g,dg,d2g,d,dd` and uniformly spaced `r`.
    ///
    /// `c3` and `c_phi3` are taken as the sup of the relevant interpolated
    /// derivatives on a sampling ten times finer than the table.
    pub fn from_table_csv(path: &Path, c1: f64, c2: f64) -> Result<Self> {
        check_c1_c2(c1, c2)?;
        const HEADER: [&str; 10] = [
            "r", "phi", "dphi", "d2phi", "d3phi", "g", "dg", "d2g", "d", "dd",
        ];
        let mut reader = csv::Reader::from_path(path)?;
        let header: Vec<String> = reader
            .headers()?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        if header != HEADER {
            return Err(Error::InvalidTable(format!(
                "{}: expected header {}, got {}",
                path.display(),
                HEADER.join(","),
                header.join(",")
            )));
        }
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); HEADER.len()];
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            for (c, field) in record.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::InvalidTable(format!(
                        "{}: row {} column {c}: `{field}`",
                        path.display(),
                        line + 2
                    ))
                })?;
                cols[c].push(v);
            }
        }
        let r = &cols[0];
        if r.len() < 2 {
            return Err(Error::InvalidTable(format!(
                "{}: need at least two rows",
                path.display()
            )));
        }
        let dr = (r[r.len() - 1] - r[0]) / (r.len() - 1) as f64;
        for (k, &rk) in r.iter().enumerate() {
            if (rk - (r[0] + k as f64 * dr)).abs() > 1e-9 * (1.0 + rk.abs()) {
                return Err(Error::InvalidTable(format!(
                    "{}: r is not uniformly spaced at row {}",
                    path.display(),
                    k + 2
                )));
            }
        }
        let phi = Tabulated::new(r[0], dr, cols[1..5].to_vec())?;
        let g = Tabulated::new(r[0], dr, cols[5..8].to_vec())?;
        let d = Tabulated::new(r[0], dr, cols[8..10].to_vec())?;

        let (lo, hi) = phi.range();
        let fine = 10 * (r.len() - 1) + 1;
        let mut c3: f64 = 0.0;
        let mut c_phi3: f64 = 0.0;
        for k in 0..fine {
            let x = lo + (hi - lo) * k as f64 / (fine - 1) as f64;
            c3 = c3
                .max(d.eval(1, x).abs())
                .max(phi.eval(1, x).abs())
                .max(phi.eval(2, x).abs());
            c_phi3 = c_phi3.max(phi.eval(3, x).abs());
        }
        Self::new(
            format!("table:{}", path.display()),
            Arc::new(phi),
            Arc::new(g),
            Arc::new(d),
            Bounds { c1, c2, c3, c_phi3 },
        )
    }
}

fn check_c1_c2(c1: f64, c2: f64) -> Result<()> {
    if !(c1 > 0.0 && c1.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "c1",
            constraint: "c1 > 0",
            value: c1,
        });
    }
    if !(c2 > c1 && c2.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "c2",
            constraint: "c2 > c1",
            value: c2,
        });
    }
    Ok(())
}

/// Named smooth families satisfying the bounds by construction.
///
/// * `logistic`: `phi = d = c1 + (c2 - c1) / (1 + exp(-r))`,
///   `g = (c2 - c1) tanh(r) exp(-r^2 / 2)`
/// * `decoupled`: as `logistic` but `g = 0`
pub fn builtin_set(name: &str, c1: f64, c2: f64) -> Result<CoefficientSet> {
    check_c1_c2(c1, c2)?;
    let k = c2 - c1;
    let logistic = Arc::new(Logistic { lo: c1, hi: c2 });
    let g: Arc<dyn Profile> = match name {
        "logistic" => Arc::new(TanhGauss { amp: k }),
        "decoupled" => Arc::new(Affine::constant(0.0)),
        _ => return Err(Error::UnknownFamily(name.to_string())),
    };
    CoefficientSet::new(
        name,
        logistic.clone(),
        g,
        logistic,
        Bounds {
            c1,
            c2,
            c3: 0.25 * k,
            c_phi3: 0.125 * k,
        },
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Sample point with the smallest margin (or largest error).
    pub worst_r: f64,
    /// Signed margin of the inequality at `worst_r` (negative means violated),
    /// or the relative error for derivative-consistency checks.
    pub worst_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const DERIVATIVE_STEP: f64 = 1e-5;
pub const DERIVATIVE_RTOL: f64 = 1e-6;

// Slack for inequalities that hold with equality at some sample (e.g.
// |phi'''(0)| = c_phi3 for the logistic family).
const BOUND_SLACK: f64 = 1e-12;

/// Samples `samples` equispaced points of `[r_min, r_max]` and checks every
/// bound plus consistency of each stored derivative with a central difference
/// of its parent (step `1e-5`, error relative to the derivative's sampled sup
/// norm, threshold `1e-6`).
pub fn verify_hypotheses(
    coef: &CoefficientSet,
    r_min: f64,
    r_max: f64,
    samples: usize,
) -> HypothesisReport {
    assert!(
        r_min < r_max && samples >= 2,
        "need r_min < r_max and samples >= 2"
    );
    let rs: Vec<f64> = (0..samples)
        .map(|k| r_min + (r_max - r_min) * k as f64 / (samples - 1) as f64)
        .collect();
    let b = coef.bounds;
    let mut checks = Vec::new();

    // margin(r) >= 0 must hold everywhere
    let mut bound = |name: &'static str, extra_ok: bool, margin: &dyn Fn(f64) -> (f64, f64)| {
        let mut worst = (f64::NAN, f64::INFINITY);
        let mut passed = extra_ok;
        for &r in &rs {
            let (m, scale) = margin(r);
            if m < worst.1 || m.is_nan() {
                worst = (r, m);
            }
            if !(m >= -BOUND_SLACK * scale.max(1.0)) {
                passed = false;
            }
        }
        checks.push(HypothesisCheck {
            name,
            passed,
            worst_r: worst.0,
            worst_value: worst.1,
        });
    };

    bound("0 < c1 <= d(r)", b.c1 > 0.0, &|r| (coef.d(r) - b.c1, b.c1));
    bound("d(r) <= c2", true, &|r| (b.c2 - coef.d(r), b.c2));
    bound("c1 <= phi(r)", b.c1 > 0.0, &|r| (coef.phi(r) - b.c1, b.c1));
    bound("phi(r) <= c2", true, &|r| (b.c2 - coef.phi(r), b.c2));
    bound("|d'(r)| <= c3", true, &|r| (b.c3 - coef.dd(r).abs(), b.c3));
    bound("|phi'(r)| <= c3", true, &|r| {
        (b.c3 - coef.dphi(r).abs(), b.c3)
    });
    bound("|phi''(r)| <= c3", true, &|r| {
        (b.c3 - coef.d2phi(r).abs(), b.c3)
    });
    bound("|phi'''(r)| <= c", true, &|r| {
        (b.c_phi3 - coef.d3phi(r).abs(), b.c_phi3)
    });

    let consistency: [(&'static str, &dyn Profile, usize); 6] = [
        ("phi' consistent with phi", coef.phi.as_ref(), 1),
        ("phi'' consistent with phi'", coef.phi.as_ref(), 2),
        ("phi''' consistent with phi''", coef.phi.as_ref(), 3),
        ("g' consistent with g", coef.g.as_ref(), 1),
        ("g'' consistent with g'", coef.g.as_ref(), 2),
        ("d' consistent with d", coef.d.as_ref(), 1),
    ];
    for (name, profile, order) in consistency {
        checks.push(derivative_consistency(name, profile, order, &rs));
    }
    HypothesisReport { checks }
}

fn derivative_consistency(
    name: &'static str,
    profile: &dyn Profile,
    order: usize,
    rs: &[f64],
) -> HypothesisCheck {
    let h = DERIVATIVE_STEP;
    let stored: Vec<f64> = rs.iter().map(|&r| profile.eval(order, r)).collect();
    let sup = stored.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if sup > 0.0 { sup } else { 1.0 };
    let mut worst = (f64::NAN, 0.0f64);
    for (&r, &s) in rs.iter().zip(&stored) {
        let fd = (profile.eval(order - 1, r + h) - profile.eval(order - 1, r - h)) / (2.0 * h);
        let err = (fd - s).abs() / scale;
        if err > worst.1 || err.is_nan() {
            worst = (r, err);
        }
    }
    HypothesisCheck {
        name,
        passed: worst.1 <= DERIVATIVE_RTOL,
        worst_r: worst.0,
        worst_value: worst.1,
    }
}
