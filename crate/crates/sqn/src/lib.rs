//! Experiment harness for the stochastic quasi-Newton optimiser in
//! [`sqn_core`]: configuration, CSV/JSON output and the experiments behind
//! the `sqn` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod output;
