//! Liquid scorecards: additive scoring models whose continuous characteristic
//! scores are shape-constrained B-splines instead of attribute step functions.
//!
//! A traditional scorecard is a sum of step functions over binned predictors;
//! the step heights are the score weights. A liquid scorecard replaces the
//! step function of a continuous characteristic by a spline. The attribute
//! indicators are exactly the order-1 B-spline basis, so the traditional
//! scorecard is the order-1 special case and simple linear regression is the
//! two-knot order-2 case. Fitting maximizes divergence, the squared
//! good/bad mean separation over the pooled score variance, which reduces to
//! a convex quadratic program under linear score engineering (in-weights,
//! cross restrictions, centering, pattern constraints).
//!
//! Module map:
//! * [`splines`]: B-spline basis construction and evaluation, orders 1 to 4,
//!   plus the second-derivative roughness Gram matrix.
//! * [`divstats`]: divergence statistics (C, d, e), the QP Hessian, score
//!   divergence, and weight-of-evidence rescaling.
//! * [`engineering`]: equality/inequality constraint matrix assembly.
//! * [`qpsolver`]: dense primal active-set convex QP solver with KKT
//!   diagnostics.
//! * [`scorecard`]: the end-to-end pipeline, from design matrix and dev/val
//!   split through fit and plot-series generation.

pub mod divstats;
pub mod engineering;
mod error;
pub mod qpsolver;
pub mod scorecard;
pub mod splines;

pub use error::Error;
/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

// Dense linear algebra types used throughout the public API.
pub use nalgebra::{DMatrix, DVector};
