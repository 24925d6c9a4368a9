//! Symbolic-numeric engine for holomorphic Lie algebroids.
//!
//! The crate parses closed-form complex expressions in which conjugated
//! variables are independent symbols, differentiates them exactly with
//! forward-mode Wirtinger calculus, and uses that machinery to validate
//! algebroid structure data, derive sprays and nonlinear connections from
//! Lagrangians, evaluate torsion/curvature coefficient tables on the tangent
//! bundle and the prolongation, and transport Lagrange structures between an
//! algebroid and the tangent bundle of its base in the three constant-rank
//! regimes of the anchor.
//!
//! Everything is pointwise and pure: expressions are immutable after parse,
//! evaluation allocates nothing shared, and every check reports a residual
//! against an explicit tolerance instead of asserting silently.

// Index loops mirror the tensor formulas they implement; iterator rewrites
// would hide the index structure the code is checked against.
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod expr;
pub mod linalg;
pub mod scalar;
pub mod wirtinger;

pub mod algebroid;
pub mod catalog;
pub mod chart;
pub mod induction;
pub mod prolongation;
pub mod report;
pub mod sampling;
pub mod scenario;
pub mod spray;
pub mod tangent;

pub use error::{Error, Result};
pub use expr::{Expression, Var, VarClass, VariableContext};
pub use wirtinger::{JetSpec, WPoint, WirtingerJet};
