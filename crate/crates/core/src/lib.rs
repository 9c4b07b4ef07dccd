//! Conservative bounds on rare-event failure probabilities `p = P(g(X) < y)`
//! for black-box functions `g` on the unit cube with uniform inputs.
//!
//! Three families of bounders are provided:
//!
//! - [`dyadic`]: deterministic bounds for Lipschitz `g` by recursive
//!   labeling of dyadic cubes.
//! - [`monotone`] and [`mcmc`]: deterministic (or ledger-estimated) bounds
//!   for globally increasing `g` from the volumes of dominated orthant unions,
//!   with uniform sampling inside the shrinking staircase region.
//! - [`surrogate`]: shifted regression surrogates with Bernstein certificates
//!   and stochastic-dominance constrained fitting.
//!
//! [`bench`] holds closed-form benchmark problems with exactly known `p`.
//!
//! The numeric core is generic over [`Scalar`]; the aliases at the crate root
//! fix the common `f64` instantiations.

// `!(x > 0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod dyadic;
pub mod error;
pub mod estimate;
pub mod mcmc;
pub mod monotone;
pub mod rng;
pub mod scalar;
pub mod surrogate;
pub mod trace;

pub use error::{Error, Result};
pub use estimate::{
    intersect_bounds, mc_estimate, surrogate_mc_estimate, BlackBoxFunction, BoundKind,
    MCEstimate, ProbabilityBounds,
};
pub use rng::RandomStream;
pub use scalar::{ExactRing, Scalar};

/// Double-precision black-box function.
pub type BlackBox = BlackBoxFunction<f64>;
/// Single-precision black-box function.
pub type BlackBox32 = BlackBoxFunction<f32>;
/// Double-precision probability bounds.
pub type Bounds = ProbabilityBounds<f64>;
/// Single-precision probability bounds.
pub type Bounds32 = ProbabilityBounds<f32>;
/// Double-precision Monte Carlo estimate.
pub type Estimate = MCEstimate<f64>;
/// Single-precision Monte Carlo estimate.
pub type Estimate32 = MCEstimate<f32>;
/// Double-precision dyadic cube run.
pub type DyadicRun = dyadic::DyadicRun<f64>;
