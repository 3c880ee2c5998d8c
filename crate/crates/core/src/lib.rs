//! Stochastic quasi-Newton optimisation with a Gaussian-process model of the
//! Hessian.
//!
//! The optimiser only sees noisy costs `f̂(x)` and gradients `g(x)`. Gradient
//! differences along the iterate path are treated as noisy linear
//! observations of the Hessian, which is modelled by a GP over its unique
//! elements ([`gp`]). The posterior mean gives a curvature estimate that is
//! shifted to be positive definite ([`direction`]), and step lengths come from
//! a backtracking search on noisy costs whose budget shrinks to zero, leaving
//! a `ξ/k` schedule ([`linesearch`]). [`optimizer::run`] ties these together.
//!
//! [`ssm`] provides the state-space identification problems: an exact Kalman
//! likelihood for a linear model and a bootstrap particle filter for a
//! nonlinear benchmark.
//!
//! The crate is `no_std` and needs only `alloc`.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
#[macro_use]
extern crate std;

pub mod direction;
pub mod error;
pub mod gp;
pub mod linesearch;
pub mod optimizer;
pub mod oracle;
pub mod quadrature;
pub mod ssm;
pub mod streams;
pub mod symtools;

pub use error::{Error, Result};
pub use nalgebra;
