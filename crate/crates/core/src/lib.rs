//! Gradient-only line searches for training under dynamic mini-batch sub-sampling.
//!
//! A fresh mini-batch is drawn at every loss/gradient evaluation, so the loss
//! along a search direction is discontinuous while its directional derivative
//! still changes sign near the full-batch minimizer. The line searches here
//! look only at that sign:
//!
//! * [`surrogate::gos_step`] fits a linear model to two directional derivatives
//!   and steps to its root.
//! * [`goals::goals_step`] adds an immediate-accept test and a Regula-Falsi
//!   bracketing phase.
//!
//! Baselines, descent directions, an MLP problem and a budgeted training
//! harness complete the crate.

// `!(a < b)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data;
pub mod directions;
pub mod error;
pub mod goals;
pub mod harness;
pub mod network;
pub mod oracle;
pub mod registry;
pub mod strategy;
pub mod surrogate;

pub use error::{Error, Result};
pub use goals::{goals_step, GoalsConfig, InitialGuess};
pub use oracle::{BatchSpec, DirectionalSlice, Oracle, SampledLoss, StochasticOracle};
pub use strategy::{build_strategy, StepStrategy, StrategyParams};
pub use surrogate::{gos_step, LineSearchResult, Termination};
