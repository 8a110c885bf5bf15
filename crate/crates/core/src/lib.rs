//! Numerical laboratory for the stochastic-control route to the functional
//! Santalo inequality: Borell's variational formula and its optimal drift,
//! Gaussian property (tau) with constants 1/4 and 1/2, the time-reversed
//! coupling, and the convex-duality bridge to polar functions and bodies.

// Negated float comparisons are deliberate: they reject NaN along with the failing case.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod coupling;
pub mod duality;
pub mod error;
pub mod follmer;
pub mod grid;
pub mod inequality;
pub mod numeric;
pub mod potential;
pub mod quad;
pub mod quadratic;

pub use error::{Error, Result};
pub use grid::{Axis, GridFunction, Polarity};
pub use potential::{santalo_to_tau, tau_to_santalo, Potential};
pub use quad::{McEstimate, QuadratureRule};
