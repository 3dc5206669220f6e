//! Core library for combinatorial allocation bandits.
//!
//! Each round, `N` users are each assigned to one of `K` arms, per-user
//! feedback arrives through a generalized linear model, and the learner's
//! objective is the sum over arms of a concave satisfaction function applied
//! to each arm's expected-match total. This crate provides:
//!
//! - [`glm`]: link families, satisfaction functions, the allocation objective,
//!   and the ridge-regularized maximum-likelihood estimator;
//! - [`linalg`]: small dense positive-definite matrices with cached Cholesky
//!   factors, inverse-norms, and correlated Gaussian sampling;
//! - [`oracle`]: the greedy submodular-welfare allocation oracle plus an exact
//!   brute-force solver for testing;
//! - [`policy`]: the CAB-UCB and CAB-TS policies and the Max-match, FairX,
//!   Random, and full-information reference baselines;
//! - [`env`]: the synthetic environment with tunable arm popularity, GLM
//!   feedback sampling, and per-round metrics.

pub mod env;
pub mod error;
pub mod glm;
pub mod linalg;
pub mod oracle;
pub mod policy;

pub use error::CabError;
pub use glm::{Allocation, ContextSlate, GlmModel, LinkFamily, ObservationLog, Satisfaction};
pub use linalg::PsdMatrix;
