//! Concavifier estimation, spectral bounds and verified gradient descent.
//!
//! An objective `f` has *concavifier* `α` when `(α/2)‖x‖² − f(x)` is convex, or
//! equivalently when `f` admits the quadratic upper model
//! `f(y) ≤ f(x) + ∇f(x)ᵀ(y − x) + (α/2)‖y − x‖²` everywhere. Gradient descent
//! with step `η ≤ 1/α` then decreases `f` by at least `(η/2)‖∇f‖²` per step.
//!
//! Modules:
//! - [`objective`]: the [`Objective`] trait, concavifier estimators and the
//!   upper-model check;
//! - [`eigen`]: symmetric matrices, power iteration and the Gershgorin and
//!   Brauer–Cassini upper bounds;
//! - [`relu`]: the one-hidden-layer ReLU regression model, its bounds `α₁…α₄`
//!   and an empirical oracle for the true concavifier;
//! - [`descent`]: fixed-step gradient descent with per-step auditing;
//! - [`io`]: CSV formats for datasets and traces.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod descent;
pub mod eigen;
pub mod error;
pub mod io;
pub mod objective;
pub mod relu;

pub use descent::{gd_step, run_descent, DescentConfig, DescentTrace, TraceStep, DEFAULT_DESCENT_TOL};
pub use eigen::{
    brauer_cassini_upper, gershgorin_upper, lambda_max, power_iteration, power_iteration_with,
    CassiniVariant, EigenResult, PowerIterationOptions, SymMatrix,
};
pub use error::{Error, Result};
pub use objective::{
    estimate_concavifier_hessian, estimate_concavifier_midpoint, midpoint_acceleration,
    upper_quadratic_check, BoxDomain, ConcavifierEstimate, EstimateMethod, FnObjective, Objective,
    QuadraticCheck, Quadratic,
};
pub use relu::{
    compute_bounds, generate_dataset, BoundReport, NetConfig, OracleStrategy, ReluDataset,
    ReluLoss, StudentInit, Weights,
};
