//! Conditional Gaussian network (CGN) classifiers.
//!
//! Two parameter back ends share one structure representation:
//!
//! * maximum likelihood ([`model::fit_ml`]), defined only on samples that
//!   are *acceptable* for the structure, and
//! * exact Bayesian averaging over parameters ([`bayes`]) under a conjugate
//!   Dirichlet / normal-inverse-gamma hyper-distribution, whose predictive
//!   density is a product of Dirichlet ratios and Student-t factors.
//!
//! [`search`] provides the greedy wrapper structure search over joint
//! augmented naive Bayes partitions and the banded `k-BOX` / `k-BAND`
//! families; [`experiment`] wires everything into repeated cross
//! validation with Mann-Whitney comparisons.

pub mod bayes;
pub mod classifier;
pub mod dataset;
pub mod distributions;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod model;
pub mod search;

pub use error::{CgnError, Result};
