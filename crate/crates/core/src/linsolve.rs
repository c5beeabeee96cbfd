//! Restarted GMRES for matrix-free linear operators.
//!
//! The solver minimizes the residual over each Krylov cycle, so it handles the
//! nonsymmetric, possibly indefinite block systems of the aggregate adjoint.

use rand::Rng;

use crate::error::{Error, Result};

/// A linear map on `R^dim`, applied matrix-free.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

/// Wraps a closure as a [`LinearOperator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative tolerance on `|A x - b| / |b|`.
    pub tol: f64,
    pub max_iter: usize,
    /// Krylov dimension before restart.
    pub restart: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 2000,
            restart: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final true residual `|A x - b|_2`.
    pub residual: f64,
    pub rhs_norm: f64,
    pub converged: bool,
    /// Estimated residual norm after each inner iteration.
    pub history: Vec<f64>,
}

impl SolveOutcome {
    pub fn relative_residual(&self) -> f64 {
        if self.rhs_norm > 0.0 {
            self.residual / self.rhs_norm
        } else {
            self.residual
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn residual_norm(op: &dyn LinearOperator, x: &[f64], rhs: &[f64]) -> f64 {
    let mut ax = vec![0.0; op.dim()];
    op.apply(x, &mut ax);
    ax.iter()
        .zip(rhs)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Solves `op(x) = rhs` from `x = 0`.
///
/// Returns the iterate whether or not it converged; check `converged`.
/// A happy breakdown (exact solution in the current Krylov space) is a
/// success; a breakdown with a remaining residual is reported as
/// [`Error::Breakdown`].
pub fn solve_linear(
    op: &dyn LinearOperator,
    rhs: &[f64],
    opts: &SolverOptions,
) -> Result<SolveOutcome> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            constraint: "tol > 0",
            value: opts.tol,
        });
    }
    if opts.max_iter < 1 {
        return Err(Error::InvalidParameter {
            name: "max_iter",
            constraint: "max_iter >= 1",
            value: opts.max_iter as f64,
        });
    }
    let n = op.dim();
    assert_eq!(rhs.len(), n, "rhs length does not match operator dimension");
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("linear solve right-hand side".into()));
    }

    let rhs_norm = norm(rhs);
    let mut x = vec![0.0; n];
    let mut history = Vec::new();
    if rhs_norm == 0.0 {
        return Ok(SolveOutcome {
            x,
            iterations: 0,
            residual: 0.0,
            rhs_norm,
            converged: true,
            history,
        });
    }
    let target = opts.tol * rhs_norm;
    let m = opts.restart.clamp(1, n.max(1));
    let mut iterations = 0;
    let mut scratch = vec![0.0; n];

    while iterations < opts.max_iter {
        // r = b - A x
        op.apply(&x, &mut scratch);
        let r: Vec<f64> = rhs.iter().zip(&scratch).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        if beta <= target {
            break;
        }
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        // Hessenberg columns, rotated in place to upper triangular form
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut cs = Vec::with_capacity(m);
        let mut sn = Vec::<f64>::with_capacity(m);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        let mut happy = false;

        for k in 0..m {
            if iterations >= opts.max_iter {
                break;
            }
            iterations += 1;
            let mut w = vec![0.0; n];
            op.apply(&basis[k], &mut w);
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("operator application".into()));
            }
            let w_norm0 = norm(&w);
            let mut col = vec![0.0; k + 2];
            // modified Gram-Schmidt, one reorthogonalization pass
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = dot(&w, v);
                    col[i] += c;
                    for (wj, vj) in w.iter_mut().zip(v) {
                        *wj -= c * vj;
                    }
                }
            }
            let w_norm = norm(&w);
            col[k + 1] = w_norm;
            for i in 0..k {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let denom = col[k].hypot(col[k + 1]);
            if denom == 0.0 {
                return Err(Error::Breakdown {
                    iteration: iterations,
                });
            }
            let (c, s) = (col[k] / denom, col[k + 1] / denom);
            col[k] = denom;
            col[k + 1] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;
            cs.push(c);
            sn.push(s);
            h.push(col);
            k_used = k + 1;
            history.push(g[k + 1].abs());

            let lucky = w_norm <= 1e-14 * w_norm0.max(f64::MIN_POSITIVE);
            if g[k + 1].abs() <= target || lucky {
                happy = lucky;
                break;
            }
            basis.push(w.iter().map(|v| v / w_norm).collect());
        }

        // back substitution on the triangular system
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for (j, yj) in y.iter().enumerate().skip(i + 1) {
                acc -= h[j][i] * yj;
            }
            y[i] = acc / h[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            for (xj, vj) in x.iter_mut().zip(&basis[i]) {
                *xj += yi * vj;
            }
        }
        if happy {
            let res = residual_norm(op, &x, rhs);
            if res > target {
                return Err(Error::Breakdown {
                    iteration: iterations,
                });
            }
            break;
        }
    }

    let residual = residual_norm(op, &x, rhs);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("linear solve iterate".into()));
    }
    Ok(SolveOutcome {
        x,
        iterations,
        residual,
        rhs_norm,
        converged: residual <= target,
        history,
    })
}

/// Probes `op(a x + b y) = a op(x) + b op(y)` on random inputs; returns the
/// worst relative discrepancy.
pub fn linearity_defect(op: &dyn LinearOperator, rng: &mut impl Rng, probes: usize) -> f64 {
    let n = op.dim();
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let combo: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| a * xi + b * yi).collect();
        let (mut ox, mut oy, mut oc) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        op.apply(&x, &mut ox);
        op.apply(&y, &mut oy);
        op.apply(&combo, &mut oc);
        let expected: Vec<f64> = ox.iter().zip(&oy).map(|(p, q)| a * p + b * q).collect();
        let diff: Vec<f64> = oc.iter().zip(&expected).map(|(p, q)| p - q).collect();
        worst = worst.max(norm(&diff) / (1.0 + norm(&expected)));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{div_coeff_grad, CoefficientField, Grid2D, ScalarField};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn neg_laplacian(grid: Grid2D) -> impl LinearOperator {
        FnOperator::new(grid.interior_len(), move |x: &[f64], out: &mut [f64]| {
            let v = ScalarField::from_values(&grid, x.to_vec()).unwrap();
            let lap = div_coeff_grad(&CoefficientField::constant(&grid, 1.0), &v).unwrap();
            for (o, l) in out.iter_mut().zip(lap.values()) {
                *o = -l;
            }
        })
    }

    #[test]
    fn identity_solves_in_one_iteration() {
        let op = FnOperator::new(5, |x: &[f64], out: &mut [f64]| out.copy_from_slice(x));
        let rhs = [1.0, -2.0, 3.0, 0.5, 0.0];
        let out = solve_linear(&op, &rhs, &SolverOptions::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        for (a, b) in out.x.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn sine_mode_is_divided_by_discrete_eigenvalue() {
        let g = Grid2D::unit_square(16).unwrap();
        let mode = ScalarField::from_fn(&g, |x, y| (PI * x).sin() * (PI * y).sin());
        let lam = 4.0 / (g.hx * g.hx) * (PI * g.hx / 2.0).sin().powi(2)
            + 4.0 / (g.hy * g.hy) * (PI * g.hy / 2.0).sin().powi(2);
        let op = neg_laplacian(g);
        let out = solve_linear(&op, mode.values(), &SolverOptions::default()).unwrap();
        assert!(out.converged);
        assert!(out.residual <= 1e-10);
        for (x, m) in out.x.iter().zip(mode.values()) {
            assert!((x - m / lam).abs() < 1e-12);
        }
    }

    #[test]
    fn forced_early_stop_is_flagged() {
        let g = Grid2D::unit_square(16).unwrap();
        let op = neg_laplacian(g);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rhs: Vec<f64> = (0..op.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let opts = SolverOptions {
            max_iter: 1,
            ..Default::default()
        };
        let out = solve_linear(&op, &rhs, &opts).unwrap();
        assert!(!out.converged);
        assert!(out.residual > opts.tol * out.rhs_norm);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn reported_residual_matches_recomputation_and_recovers_solution() {
        // nonsymmetric indefinite: (I + 0.05 lap) plus a skew shift
        let g = Grid2D::unit_square(10).unwrap();
        let n = g.interior_len();
        let op = FnOperator::new(n, move |x: &[f64], out: &mut [f64]| {
            let v = ScalarField::from_values(&g, x.to_vec()).unwrap();
            let lap = div_coeff_grad(&CoefficientField::constant(&g, 1.0), &v).unwrap();
            for k in 0..x.len() {
                let skew = if k + 1 < x.len() { x[k + 1] } else { 0.0 }
                    - if k > 0 { x[k - 1] } else { 0.0 };
                out[k] = x[k] + 0.05 * lap.values()[k] + 0.3 * skew;
            }
        });
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x_star: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut rhs = vec![0.0; n];
        op.apply(&x_star, &mut rhs);
        let opts = SolverOptions {
            tol: 1e-10,
            max_iter: 2000,
            restart: 40,
        };
        let out = solve_linear(&op, &rhs, &opts).unwrap();
        assert!(out.converged, "residual {}", out.relative_residual());
        let recomputed = residual_norm(&op, &out.x, &rhs);
        assert!((recomputed - out.residual).abs() <= 10.0 * f64::EPSILON * out.rhs_norm.max(1.0));
        let err: f64 = out
            .x
            .iter()
            .zip(&x_star)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(
            err / norm(&x_star) <= 10.0 * opts.tol * 1e3,
            "error {}",
            err / norm(&x_star)
        );
        assert!(linearity_defect(&op, &mut rng, 5) < 1e-14);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let op = neg_laplacian(Grid2D::unit_square(6).unwrap());
        let out = solve_linear(&op, &vec![0.0; op.dim()], &SolverOptions::default()).unwrap();
        assert!(out.converged);
        assert!(out.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_options() {
        let op = FnOperator::new(2, |x: &[f64], out: &mut [f64]| out.copy_from_slice(x));
        let bad = SolverOptions {
            tol: 0.0,
            ..Default::default()
        };
        assert!(solve_linear(&op, &[1.0, 1.0], &bad).is_err());
        let bad = SolverOptions {
            max_iter: 0,
            ..Default::default()
        };
        assert!(solve_linear(&op, &[1.0, 1.0], &bad).is_err());
    }
}
