//! Two-stage Bayesian transfer learning for the normal-means problem.
//!
//! A source task with abundant data gives β̂₁; the target estimate is
//! β̂₂ = β̂₁ + δ̂ where δ̂ shrinks the observed difference Z = Ȳ₂ − β̂₁. Two
//! priors on the difference are provided: a horseshoe for sparse differences
//! ([`shrinkage`], [`hs_gibbs`]) and a penalized-complexity prior for
//! differences bounded in norm ([`pcp`]). [`regression`] extends both to a
//! second-stage linear model, and [`harness`] runs the Monte Carlo studies.

pub mod baselines;
pub mod classical;
pub mod error;
pub mod harness;
pub mod hs_gibbs;
pub mod pcp;
pub mod quadrature;
pub mod regression;
pub mod rng;
pub mod shrinkage;
pub mod simgen;
pub mod summary;
pub mod types;

pub use error::{Error, Result};
pub use rng::RngStream;
pub use types::{EstimateResult, Method, PosteriorDraws, SufficientStats};
