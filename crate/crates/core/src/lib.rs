//! Belief-network inference for classifying ships from weighted feature
//! descriptions.
//!
//! Two engines run over networks compiled from the same feature model:
//!
//! * [`prospector`]: subjective-Bayes updating over binary propositions joined by
//!   `(lambda1, lambda2)` evidential links.
//! * [`bms`]: polytree belief maintenance with causal (pi) and diagnostic (lambda)
//!   support, propagated to equilibrium by an agenda under a pluggable policy.
//!
//! [`merit`] picks the next question by expected change per unit cost,
//! [`session`] drives a mixed-initiative classification dialogue, and
//! [`harness`] holds the generators, the scheduler benchmark and the
//! engine-agreement runner.

pub mod bms;
pub mod compiler;
pub mod harness;
pub mod merit;
pub mod net;
pub mod prospector;
mod rank;
pub mod session;

pub use rank::{rank, Ranking};
