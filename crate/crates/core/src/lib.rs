//! Polynomial log-density estimation from truncated samples.
//!
//! Samples are observed only inside a survival set `S ⊂ [0,1]^d`. The crate
//! fits an exponential-family density `∝ exp(v·m_k(x))` by maximum likelihood
//! on `S` and evaluates the fit on the whole cube.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`basis`] | multi-indices, monomial profile, polynomial coefficients, sup-norm oracle |
//! | [`integrate`] | Gauss–Legendre / Monte Carlo rules, survival sets, volumes |
//! | [`density`] | log-partition, pdf, KL / TV distances, Taylor log-densities |
//! | [`sampler`] | seeded rejection samplers |
//! | [`mle`] | objective, gradients, projection onto the sup-norm ball, PSGD, population MLE |
//! | [`verify`] | executable checks of the inequalities the estimator relies on |
//!
//! With the default `parallel` feature the inner loops run on rayon. All
//! reductions use fixed chunking, so results are bit-identical with the
//! feature off or with any thread count.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
mod dd;
pub mod density;
pub mod error;
pub mod integrate;
pub mod mle;
pub mod par;
pub mod rng;
pub mod sampler;
pub mod verify;

pub use basis::{MonomialBasis, MultiIndex, PolyCoeffs};
pub use density::{LogDensity, LogDensityFn, TruncatedDensity};
pub use error::{Error, Result};
pub use integrate::{QuadMode, QuadratureSpec, SurvivalSet};
pub use mle::{Averaging, FitConfig, FitReport};
pub use sampler::SamplerStats;
pub use verify::CheckReport;

/// A point in `R^d`, stored densely.
pub type Point = Vec<f64>;

/// Version tag written into every JSON artifact.
pub const SCHEMA_VERSION: &str = "1";
