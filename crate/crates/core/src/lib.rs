//! Inexact symmetric Gauss-Seidel based majorized indefinite-proximal ADMM
//! for multi-block convex composite programs
//!
//! ```text
//! min  p1(x1) + f(x1..xm) + q1(y1) + g(y1..yn)   s.t.  A*x + B*y = c
//! ```
//!
//! The crate provides the two-block inexact majorized indefinite-proximal
//! ADMM ([`imipadmm`]), the multi-block sGS variant built on top of it
//! ([`sgsadmm`]), the block sGS decomposition machinery ([`sgs`]), problem
//! generators with an independent active-set oracle ([`instances`]), and a
//! ledger that checks the convergence-analysis inequalities along recorded
//! trajectories ([`verify`]).

// `!(a <= b)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blockalg;
pub mod error;
pub mod imipadmm;
pub mod instances;
pub mod model;
pub mod parallel;
pub mod problem_file;
pub mod schedule;
pub mod sgs;
pub mod sgsadmm;
pub mod trials;
pub mod verify;

pub use blockalg::{BlockOperator, BlockStructure, BlockVector, OperatorSplit};
pub use error::{Error, Result};
pub use model::{KktResidual, ProblemSpec, ProxFriendlyFunction, SmoothConvexFunction};
pub use parallel::Execution;
pub use schedule::ToleranceSchedule;
