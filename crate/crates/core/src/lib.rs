//! Neural estimation of f-divergences.
//!
//! KL divergence, χ² divergence and the squared Hellinger distance all admit a
//! variational form `sup_g E_P[g] - E_Q[γ(g)]`. This crate restricts `g` to a
//! shallow sigmoid network with box-bounded parameters, replaces expectations
//! by sample means and maximizes with projected Adam. Alongside the estimator
//! it ships exact ground-truth oracles for product-form distributions on boxes,
//! the non-asymptotic estimation-error constants of the bounded network class,
//! and a reproducible sweep harness.
//!
//! Module map:
//!
//! - [`distributions`]: product distributions on boxes, sampling, quadrature
//! - [`divergences`]: γ functions, optimal witnesses, ground truth, objectives
//! - [`network`]: the bounded shallow network classes
//! - [`training`]: projected minibatch Adam
//! - [`bounds`]: estimation-error constants, Barron constant, k/n schedules
//! - [`experiments`]: multi-seed sweeps, aggregation, rate fits, CSV output

pub mod bounds;
pub mod distributions;
pub mod divergences;
pub mod error;
pub mod experiments;
pub mod network;
pub mod rng;
pub mod training;

pub use distributions::{BoxSupport, DistributionPair, Marginal1D, PointSet, ProductDistribution};
pub use divergences::{DivergenceKind, GroundTruthReport};
pub use error::{Error, Result};
pub use network::{NetParams, NetworkClassSpec, ParamBounds};
pub use training::{TrainConfig, TrainResult};
