//! Explicit finite-difference solver and adjoint-based optimal control for a
//! coupled saturation-pressure system on a rectangle.
//!
//! The crate is organized bottom-up: [`mesh`] holds grids, fields and the
//! divergence-form stencils; [`coefficients`] the model nonlinearities;
//! [`state`] the explicit scheme and its linearization; [`objective`] the
//! tracking cost; [`adjoint`] the gradient engines; [`linsolve`] a
//! matrix-free GMRES; [`optimizer`] the descent loop; [`oracle`] the
//! finite-difference and manufactured-solution checks; [`io`] CSV files.

// `!(x > 0.0)` rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod coefficients;
pub mod error;
pub mod io;
pub mod linsolve;
pub mod mesh;
pub mod objective;
pub mod optimizer;
pub mod oracle;
pub mod state;

pub use adjoint::{
    kkt_residual, reduced_gradient, solve_adjoint_discrete, solve_adjoint_paper, AdjointTrajectory,
    AggregateAdjoint, GradientEvaluation, Linearization,
};
pub use coefficients::{builtin_set, verify_hypotheses, CoefficientSet, HypothesisReport};
pub use error::{Error, Result};
pub use linsolve::SolverOptions;
pub use mesh::{CoefficientField, Grid2D, ScalarField};
pub use objective::{evaluate_cost, CostParams};
pub use optimizer::{minimize, OptimizationResult, OptimizationStatus, OptimizerOptions};
pub use state::{
    gateaux_apply, solve_forward, ControlTrajectory, GateauxDirection, StateTrajectory, TimeGrid,
};
