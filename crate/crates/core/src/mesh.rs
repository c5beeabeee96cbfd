//! Uniform rectangular grids, nodal fields and the finite-difference
//! operators built on them.
//!
//! Fields live on the interior nodes `(i, j)`, `1 <= i < nx`, `1 <= j < ny`,
//! with an implicit zero on the boundary. Coefficients that enter
//! divergence-form operators need boundary values too, so they are stored on
//! the full node set as a [`CoefficientField`].

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub hx: f64,
    pub hy: f64,
}

impl Grid2D {
    /// `nx`, `ny` are cell counts; the grid has `(nx - 1) * (ny - 1)` interior nodes.
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 cells per axis to hold an interior node, got {nx}x{ny}"
            )));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "side lengths must be positive, got lx = {lx}, ly = {ly}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            hx: lx / nx as f64,
            hy: ly / ny as f64,
        })
    }

    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    #[inline]
    pub fn interior_len(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    #[inline]
    pub fn full_len(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    /// Flat index of interior node `(i, j)`; row-major with `i` fastest.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= 1 && i < self.nx && j >= 1 && j < self.ny);
        (j - 1) * (self.nx - 1) + (i - 1)
    }

    #[inline]
    pub fn full_idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.nx && j <= self.ny);
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.hx, j as f64 * self.hy)
    }

    /// Interior nodes in storage order.
    pub fn interior_nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..self.ny).flat_map(move |j| (1..self.nx).map(move |i| (i, j)))
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx || j == self.ny
    }
}

/// Nodal values on the interior of a grid; zero on the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid2D) -> Self {
        Self {
            grid: *grid,
            values: vec![0.0; grid.interior_len()],
        }
    }

    pub fn constant(grid: &Grid2D, value: f64) -> Self {
        Self {
            grid: *grid,
            values: vec![value; grid.interior_len()],
        }
    }

    pub fn from_fn(grid: &Grid2D, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let values = grid
            .interior_nodes()
            .map(|(i, j)| {
                let (x, y) = grid.coords(i, j);
                f(x, y)
            })
            .collect();
        Self {
            grid: *grid,
            values,
        }
    }

    pub fn from_values(grid: &Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.interior_len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} interior values, got {}",
                grid.interior_len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values".into()));
        }
        Ok(Self {
            grid: *grid,
            values,
        })
    }

    #[inline]
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        if self.grid.is_boundary(i, j) {
            0.0
        } else {
            self.values[self.grid.idx(i, j)]
        }
    }

    pub fn same_grid(&self, other: &ScalarField) -> bool {
        self.grid == other.grid
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination; panics when the grids differ.
    pub fn zip_map(&self, other: &ScalarField, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        assert!(
            self.same_grid(other),
            "zip_map on fields of different grids"
        );
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: f64, x: &ScalarField) {
        assert!(self.same_grid(x), "axpy on fields of different grids");
        for (s, &v) in self.values.iter_mut().zip(&x.values) {
            *s += alpha * v;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        self.map(|v| alpha * v)
    }

    pub fn add(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    /// Quadrature inner product `hx * hy * sum(a * b)`.
    pub fn inner(&self, other: &ScalarField) -> f64 {
        assert!(
            self.same_grid(other),
            "inner product of fields on different grids"
        );
        self.grid.cell_area()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn norm_max(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// The field on the full node set with its zero boundary filled in.
    pub fn padded(&self) -> CoefficientField {
        CoefficientField::from_interior(self, 0.0)
    }
}

/// Nodal values on every grid node, boundary included.
///
/// Used for diffusion coefficients and for potentials such as `phi'(u)` whose
/// boundary value is not zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl CoefficientField {
    pub fn constant(grid: &Grid2D, value: f64) -> Self {
        Self {
            grid: *grid,
            values: vec![value; grid.full_len()],
        }
    }

    /// Samples `f` at every node, boundary included.
    pub fn from_fn(grid: &Grid2D, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.full_len());
        for j in 0..=grid.ny {
            for i in 0..=grid.nx {
                let (x, y) = grid.coords(i, j);
                values.push(f(x, y));
            }
        }
        Self {
            grid: *grid,
            values,
        }
    }

    /// Interior values from `field`, a constant on the boundary.
    pub fn from_interior(field: &ScalarField, boundary: f64) -> Self {
        let grid = *field.grid();
        let mut values = vec![boundary; grid.full_len()];
        for (i, j) in grid.interior_nodes() {
            values[grid.full_idx(i, j)] = field.values[grid.idx(i, j)];
        }
        Self { grid, values }
    }

    /// Interior values from `field`; each boundary node copies its interior
    /// neighbour. Corners are never read by the five-point stencils.
    pub fn extrapolated(field: &ScalarField) -> Self {
        let grid = *field.grid();
        let mut out = Self::from_interior(field, 0.0);
        for j in 1..grid.ny {
            out.values[grid.full_idx(0, j)] = field.at(1, j);
            out.values[grid.full_idx(grid.nx, j)] = field.at(grid.nx - 1, j);
        }
        for i in 1..grid.nx {
            out.values[grid.full_idx(i, 0)] = field.at(i, 1);
            out.values[grid.full_idx(i, grid.ny)] = field.at(i, grid.ny - 1);
        }
        out
    }

    /// `f` applied to a state with homogeneous Dirichlet data: interior nodes
    /// get `f(state)`, boundary nodes get `f(0)`.
    pub fn of_state(state: &ScalarField, f: impl Fn(f64) -> f64) -> Self {
        Self::from_interior(&state.map(&f), f(0.0))
    }

    #[inline]
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.full_idx(i, j)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interior(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self
                .grid
                .interior_nodes()
                .map(|(i, j)| self.at(i, j))
                .collect(),
        }
    }
}

/// Conservative five-point operator `div(a grad v)` with face coefficient
/// `(a_c + a_nb) / 2`. Both arguments carry boundary values.
pub fn div_flux(a: &CoefficientField, v: &CoefficientField) -> Result<ScalarField> {
    if a.grid != v.grid {
        return Err(Error::GridMismatch("div_flux"));
    }
    let g = a.grid;
    let (rx, ry) = (1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy));
    let mut out = Vec::with_capacity(g.interior_len());
    for (i, j) in g.interior_nodes() {
        let ac = a.at(i, j);
        let vc = v.at(i, j);
        let sx = 0.5 * (ac + a.at(i + 1, j)) * (v.at(i + 1, j) - vc)
            + 0.5 * (ac + a.at(i - 1, j)) * (v.at(i - 1, j) - vc);
        let sy = 0.5 * (ac + a.at(i, j + 1)) * (v.at(i, j + 1) - vc)
            + 0.5 * (ac + a.at(i, j - 1)) * (v.at(i, j - 1) - vc);
        out.push(rx * sx + ry * sy);
    }
    Ok(ScalarField {
        grid: g,
        values: out,
    })
}

/// `div(a grad v)` for a field `v` with zero boundary data.
pub fn div_coeff_grad(a: &CoefficientField, v: &ScalarField) -> Result<ScalarField> {
    if a.grid != v.grid {
        return Err(Error::GridMismatch("div_coeff_grad"));
    }
    div_flux(a, &v.padded())
}

/// Discrete `div(c e grad v)`: face-averaged `c * e` times face differences
/// of `v`. `e` vanishes on the boundary, so only the interior of `c` is read.
pub fn div_product_flux(
    c: &ScalarField,
    e: &ScalarField,
    v: &CoefficientField,
) -> Result<ScalarField> {
    if !c.same_grid(e) || c.grid != v.grid {
        return Err(Error::GridMismatch("div_product_flux"));
    }
    div_flux(&c.mul(e).padded(), v)
}

/// Face-based gradient product
/// `1/2 * sum over the four faces of (v_nb - v_c)(w_nb - w_c) / h^2`.
///
/// This is the exact transpose partner of [`div_product_flux`]: for any
/// interior fields `c`, `e`, `lam`,
/// `<div_product_flux(c, e, v), lam> = -<e, c * face_grad_product(v, lam)>`.
pub fn face_grad_product(v: &CoefficientField, w: &ScalarField) -> Result<ScalarField> {
    if v.grid != w.grid {
        return Err(Error::GridMismatch("face_grad_product"));
    }
    let g = v.grid;
    let (rx, ry) = (0.5 / (g.hx * g.hx), 0.5 / (g.hy * g.hy));
    let mut out = Vec::with_capacity(g.interior_len());
    for (i, j) in g.interior_nodes() {
        let (vc, wc) = (v.at(i, j), w.at(i, j));
        let fx = (v.at(i + 1, j) - vc) * (w.at(i + 1, j) - wc)
            + (v.at(i - 1, j) - vc) * (w.at(i - 1, j) - wc);
        let fy = (v.at(i, j + 1) - vc) * (w.at(i, j + 1) - wc)
            + (v.at(i, j - 1) - vc) * (w.at(i, j - 1) - wc);
        out.push(rx * fx + ry * fy);
    }
    Ok(ScalarField {
        grid: g,
        values: out,
    })
}

/// Nodewise `grad a . grad b` from central differences, zero boundary data.
pub fn dot_grad(a: &ScalarField, b: &ScalarField) -> Result<ScalarField> {
    if !a.same_grid(b) {
        return Err(Error::GridMismatch("dot_grad"));
    }
    let g = a.grid;
    let (cx, cy) = (0.5 / g.hx, 0.5 / g.hy);
    let values = g
        .interior_nodes()
        .map(|(i, j)| {
            let ax = cx * (a.at(i + 1, j) - a.at(i - 1, j));
            let ay = cy * (a.at(i, j + 1) - a.at(i, j - 1));
            let bx = cx * (b.at(i + 1, j) - b.at(i - 1, j));
            let by = cy * (b.at(i, j + 1) - b.at(i, j - 1));
            ax * bx + ay * by
        })
        .collect();
    Ok(ScalarField { grid: g, values })
}

/// `integral over the domain of |v|^exponent`, nodal rule with weight `hx * hy`.
pub fn integrate_power(v: &ScalarField, exponent: f64) -> Result<f64> {
    if !(exponent >= 1.0) {
        return Err(Error::InvalidParameter {
            name: "exponent",
            constraint: "exponent >= 1",
            value: exponent,
        });
    }
    let sum: f64 = if exponent == 2.0 {
        v.values.iter().map(|x| x * x).sum()
    } else {
        v.values.iter().map(|x| x.abs().powf(exponent)).sum()
    };
    Ok(v.grid.cell_area() * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sine(grid: &Grid2D) -> ScalarField {
        ScalarField::from_fn(grid, |x, y| (PI * x).sin() * (PI * y).sin())
    }

    #[test]
    fn build_grid_examples() {
        let g = Grid2D::new(4, 4, 1.0, 1.0).unwrap();
        assert_eq!(g.hx, 0.25);
        assert_eq!(g.hy, 0.25);
        assert_eq!(g.interior_len(), 9);

        let g = Grid2D::new(2, 3, 1.0, 1.0).unwrap();
        assert_eq!(g.hx, 0.5);
        assert_eq!(g.hy, 1.0 / 3.0);
        assert_eq!(g.interior_len(), 2);
        assert_eq!(g.coords(1, 2), (0.5, 2.0 / 3.0));

        assert!(Grid2D::new(1, 4, 1.0, 1.0).is_err());
        assert!(Grid2D::new(4, 4, 0.0, 1.0).is_err());
        assert!(Grid2D::new(4, 4, 1.0, -2.0).is_err());
    }

    #[test]
    fn storage_order_is_row_major() {
        let g = Grid2D::new(4, 3, 1.0, 1.0).unwrap();
        let nodes: Vec<_> = g.interior_nodes().collect();
        assert_eq!(nodes[0], (1, 1));
        assert_eq!(nodes[1], (2, 1));
        assert_eq!(nodes[3], (1, 2));
        for (k, (i, j)) in nodes.into_iter().enumerate() {
            assert_eq!(g.idx(i, j), k);
        }
    }

    #[test]
    fn laplacian_of_zero_is_zero() {
        let g = Grid2D::unit_square(6).unwrap();
        let out = div_coeff_grad(
            &CoefficientField::constant(&g, 1.0),
            &ScalarField::zeros(&g),
        )
        .unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let a = Grid2D::unit_square(4).unwrap();
        let b = Grid2D::unit_square(5).unwrap();
        let err = div_coeff_grad(
            &CoefficientField::constant(&a, 1.0),
            &ScalarField::zeros(&b),
        );
        assert!(matches!(err, Err(Error::GridMismatch(_))));
        assert!(dot_grad(&ScalarField::zeros(&a), &ScalarField::zeros(&b)).is_err());
    }

    #[test]
    fn laplacian_of_sine_mode_converges_at_second_order() {
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let g = Grid2D::unit_square(n).unwrap();
            let v = sine(&g);
            let lap = div_coeff_grad(&CoefficientField::constant(&g, 1.0), &v).unwrap();
            let exact = v.scaled(-2.0 * PI * PI);
            let err = lap.sub(&exact).norm_max() / exact.norm_max();
            errs.push(err);
        }
        assert!(errs[2] <= 5e-3, "64x64 relative error {}", errs[2]);
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.6..4.4).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn variable_coefficient_operator_converges_at_second_order() {
        // div((1 + x) grad v) = v_x + (1 + x) lap v for v = sin(pi x) sin(pi y)
        let exact = |x: f64, y: f64| {
            PI * (PI * x).cos() * (PI * y).sin()
                - (1.0 + x) * 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin()
        };
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let g = Grid2D::unit_square(n).unwrap();
            let a = CoefficientField::from_fn(&g, |x, _| 1.0 + x);
            let out = div_coeff_grad(&a, &sine(&g)).unwrap();
            let reference = ScalarField::from_fn(&g, exact);
            errs.push(out.sub(&reference).norm_max());
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((1.8..2.2).contains(&order), "order {order}");
        }
    }

    #[test]
    fn extrapolated_coefficient_copies_interior_neighbour() {
        let g = Grid2D::unit_square(4).unwrap();
        let f = ScalarField::from_fn(&g, |x, y| 10.0 * x + y);
        let c = CoefficientField::extrapolated(&f);
        assert_eq!(c.at(0, 2), f.at(1, 2));
        assert_eq!(c.at(4, 1), f.at(3, 1));
        assert_eq!(c.at(2, 0), f.at(2, 1));
        assert_eq!(c.at(3, 4), f.at(3, 3));
        assert_eq!(c.interior(), f);
    }

    #[test]
    fn dot_grad_examples() {
        let g = Grid2D::unit_square(8).unwrap();
        let c = ScalarField::constant(&g, 3.0);
        let b = sine(&g);
        // a constant field with zero boundary data has zero gradient only away
        // from the boundary
        let out = dot_grad(&c, &b).unwrap();
        for (i, j) in g.interior_nodes() {
            if i > 1 && i < g.nx - 1 && j > 1 && j < g.ny - 1 {
                assert_eq!(out.at(i, j), 0.0);
            }
        }

        let ax = ScalarField::from_fn(&g, |x, _| x);
        let by = ScalarField::from_fn(&g, |_, y| y);
        let out = dot_grad(&ax, &by).unwrap();
        for (i, j) in g.interior_nodes() {
            if i > 1 && i < g.nx - 1 && j > 1 && j < g.ny - 1 {
                assert_eq!(out.at(i, j), 0.0);
            }
        }
    }

    #[test]
    fn dot_grad_of_sine_converges_at_second_order() {
        let exact = |x: f64, y: f64| {
            PI * PI
                * (((PI * x).cos() * (PI * y).sin()).powi(2)
                    + ((PI * x).sin() * (PI * y).cos()).powi(2))
        };
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let g = Grid2D::unit_square(n).unwrap();
            let v = sine(&g);
            let out = dot_grad(&v, &v).unwrap();
            errs.push(out.sub(&ScalarField::from_fn(&g, exact)).norm_max());
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((1.8..2.2).contains(&order), "order {order}");
        }
    }

    #[test]
    fn integrate_power_examples() {
        let g = Grid2D::unit_square(4).unwrap();
        assert_eq!(integrate_power(&ScalarField::zeros(&g), 3.0).unwrap(), 0.0);
        assert_eq!(
            integrate_power(&ScalarField::constant(&g, 2.0), 2.0).unwrap(),
            2.25
        );
        assert!(integrate_power(&ScalarField::zeros(&g), 0.5).is_err());
        for n in [8, 16, 32] {
            let g = Grid2D::unit_square(n).unwrap();
            assert_relative_eq!(
                integrate_power(&sine(&g), 2.0).unwrap(),
                0.25,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn product_flux_and_face_product_are_transposes() {
        let g = Grid2D::new(7, 5, 1.3, 0.8).unwrap();
        let c = ScalarField::from_fn(&g, |x, y| 1.0 + x * y);
        let e = ScalarField::from_fn(&g, |x, y| (3.0 * x).sin() + y);
        let lam = ScalarField::from_fn(&g, |x, y| x - y * y);
        let v = CoefficientField::from_fn(&g, |x, y| (x + 2.0 * y).cos());
        let lhs = div_product_flux(&c, &e, &v).unwrap().inner(&lam);
        let rhs = -e.inner(&c.mul(&face_grad_product(&v, &lam).unwrap()));
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
    }

    fn field_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0f64..1.0, (n - 1) * (n - 1))
    }

    proptest! {
        #[test]
        fn div_coeff_grad_is_linear(v1 in field_strategy(6), v2 in field_strategy(6),
                                    alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let g = Grid2D::new(6, 6, 1.0, 2.0).unwrap();
            let a = CoefficientField::from_fn(&g, |x, y| 1.0 + x + y * y);
            let v1 = ScalarField::from_values(&g, v1).unwrap();
            let v2 = ScalarField::from_values(&g, v2).unwrap();
            let combo = v1.scaled(alpha).add(&v2.scaled(beta));
            let lhs = div_coeff_grad(&a, &combo).unwrap();
            let rhs = div_coeff_grad(&a, &v1).unwrap().scaled(alpha)
                .add(&div_coeff_grad(&a, &v2).unwrap().scaled(beta));
            let scale = 1.0 + rhs.norm_max();
            prop_assert!(lhs.sub(&rhs).norm_max() <= 1e-13 * scale);
        }

        #[test]
        fn laplacian_is_symmetric(v in field_strategy(7), w in field_strategy(7)) {
            let g = Grid2D::unit_square(7).unwrap();
            let one = CoefficientField::constant(&g, 1.0);
            let v = ScalarField::from_values(&g, v).unwrap();
            let w = ScalarField::from_values(&g, w).unwrap();
            let lhs = div_coeff_grad(&one, &v).unwrap().inner(&w);
            let rhs = v.inner(&div_coeff_grad(&one, &w).unwrap());
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn positive_coefficient_operator_is_nonpositive(v in field_strategy(7), k in 0.1f64..5.0) {
            let g = Grid2D::unit_square(7).unwrap();
            let a = CoefficientField::from_fn(&g, |x, y| k + x * (1.0 - y));
            let v = ScalarField::from_values(&g, v).unwrap();
            prop_assert!(div_coeff_grad(&a, &v).unwrap().inner(&v) <= 1e-12);
        }

        #[test]
        fn dot_grad_is_symmetric_and_bilinear(a in field_strategy(6), b in field_strategy(6),
                                              c in field_strategy(6), s in -2.0f64..2.0) {
            let g = Grid2D::unit_square(6).unwrap();
            let a = ScalarField::from_values(&g, a).unwrap();
            let b = ScalarField::from_values(&g, b).unwrap();
            let c = ScalarField::from_values(&g, c).unwrap();
            let ab = dot_grad(&a, &b).unwrap();
            prop_assert!(ab.sub(&dot_grad(&b, &a).unwrap()).norm_max() <= 1e-12);
            let lhs = dot_grad(&a.scaled(s).add(&c), &b).unwrap();
            let rhs = ab.scaled(s).add(&dot_grad(&c, &b).unwrap());
            prop_assert!(lhs.sub(&rhs).norm_max() <= 1e-11 * (1.0 + rhs.norm_max()));
        }

        #[test]
        fn squared_norm_is_nonnegative(v in field_strategy(5)) {
            let g = Grid2D::unit_square(5).unwrap();
            let zero = v.iter().all(|&x| x == 0.0);
            let v = ScalarField::from_values(&g, v).unwrap();
            let q = integrate_power(&v, 2.0).unwrap();
            prop_assert!(q >= 0.0);
            prop_assert_eq!(q == 0.0, zero);
        }
    }
}
