//! Sampler and verification suite for a Markov jump process whose jump rates
//! are driven by a unitarily evolving state vector.
//!
//! A finite label set carries a positive-operator-valued measure (POVM) on a
//! finite-dimensional Hilbert space. The state evolves unitarily under a
//! Hermitian generator; each label `x` carries the weight `<psi_t|P(x)psi_t>`,
//! and jumps from `x` to `y` occur at rate
//! `[Im <psi_t|P(y) H P(x) psi_t>]^+ / <psi_t|P(x)psi_t>`.
//! The resulting process has the weight profile as its time-marginal law, and
//! that identity is what most of the verification machinery checks.
//!
//! Module map:
//! - [`hilbert`]: state vectors, Hermitian operators, spectral decomposition,
//!   unitary propagation, POVMs.
//! - [`rates`]: jump rates, total rates, weight profiles and their time
//!   derivatives, admissible labels, destination laws.
//! - [`sampler`]: cumulative hazards, holding-time sampling by inverse
//!   transform, trajectory simulation.
//! - [`oracle`]: independent expectations (master equation, series iteration,
//!   expected jump counts) that the sampler is tested against.
//! - [`checks`]: operator-norm and contraction inequalities that bound the
//!   process globally.
//! - [`models`]: bundled example systems, including closed-form ones.
//! - [`ensemble`]: parallel trajectory ensembles with order-independent
//!   aggregation.
//! - [`cli`]: command-line entry points.

pub mod checks;
pub mod cli;
pub mod ensemble;
pub mod error;
pub mod hilbert;
pub mod io;
pub mod models;
pub mod numeric;
pub mod oracle;
pub mod rates;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
