//! Numerical toolkit for multiscale energy landscapes.
//!
//! * [`potentials`]: analytic test landscapes and their derivatives.
//! * [`dynamics`]: overdamped and inertial Langevin integrators, transition
//!   detection and empirical escape rates.
//! * [`string_zero`]: zero-temperature string method, nudged elastic band,
//!   saddle refinement and the inertial phase-space minimum energy path.
//! * [`string_finite`]: finite-temperature string method with hyperplane
//!   statistics, self-consistency diagnostics and free energy profiles.
//! * [`rates`]: transition state theory, the κ line integral, two-state
//!   relaxation, basin weights and the Markov graph of metastable sets.

// `!(x > 0.0)` guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod potentials;
pub mod quadrature;
pub mod rates;
pub mod seeding;
pub mod string_finite;
pub mod string_zero;

pub use error::{Error, Result};
pub use potentials::{Hessian, Landscape, PotentialSpec};
