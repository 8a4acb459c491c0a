//! Stochastic stabilization of deterministic input-affine control systems.
//!
//! A deterministic system `ẋ = f(x) + g(x)u` is randomized by feeding a
//! Wiener process through the inputs, `u dt = v dt + B(x) ∘ dw`. The
//! Stratonovich interpretation forced by smooth-noise limits adds a drift
//! correction `½σ'σ`, and a Sontag-type feedback built from a stochastic
//! control Lyapunov function closes the loop.
//!
//! The Brockett integrator is worked out in full in [`brockett`]; the
//! [`verification`] module checks the resulting stability claims numerically.

// `!(a > b)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod brockett;
pub mod cli;
pub mod error;
pub mod lyapunov;
pub mod sde;
pub mod verification;

pub use error::{Error, Result};

/// Version string written into every output header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
