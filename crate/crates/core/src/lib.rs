//! MCMC sampling of un-normalized densities on manifolds defined by equality
//! and inequality constraints in Euclidean space, and multi-phase Monte Carlo
//! integration over such manifolds with single-run error bars.
//!
//! The sampler makes an isotropic Gaussian move in the tangent space at the
//! current point and projects back to the surface along the constraint
//! gradients with plain Newton iteration; a reverse-projection check keeps
//! the chain reversible. The integrator expresses an integral over the
//! manifold as an integral over the smallest of a nested family of balls
//! times a telescoping product of per-ball ratio estimates.

// Comparisons written as `!(x > 0.0)` are deliberate: they treat NaN as a
// validation failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod frame;
pub mod integrator;
pub mod linalg;
pub mod manifold;
pub mod newton;
pub mod sampler;
pub mod stats;
pub mod zoo;

pub use error::{Error, Result};
pub use frame::{cross_jacobian, tangent_frame, tangential_decompose, TangentFrame};
pub use manifold::{check_gradient, BallRestricted, ConstraintManifold, FnManifold};
pub use newton::{project, NewtonParams, ProjectionResult};
pub use sampler::{
    mcmc_step, run_chain, run_chain_observed, sample_tangent, tangent_density, ChainState,
    ChainStats, ProposalParams, StepDiagnostics, StepOutcome,
};
