//! Maximum-likelihood fitting of polynomial log-densities on a survival set.
//!
//! The objective is `L(v) = KL(P(f,S) ‖ P(v,S))`, convex in `v`, with gradient
//! `E_{P(v,S)}[m_k] − E_{P(f,S)}[m_k]` and Hessian `Cov_{P(v,S)}[m_k]`.
//! Two solvers are provided:
//!
//! * [`psgd_fit`]: projected stochastic gradient descent onto
//!   `D = {v : sup_{[0,1]^d} |q_v| ≤ C}` from one data sample per step;
//! * [`population_mle_1d`]: a deterministic solver on quadrature moments,
//!   used when the target density is known (1D only).

mod objective;
mod population;
mod projection;
mod psgd;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::basis::{binomial, coeff_l1_bound, PolyCoeffs};
use crate::error::{Error, Result};
use crate::integrate::QuadratureSpec;
use crate::sampler::SamplerStats;

pub use objective::{hessian, kl_objective, population_gradient, stochastic_gradient};
pub use population::{population_mle_1d, population_mle_1d_detailed, PopulationFit};
pub use projection::{project_onto_d, project_onto_d_detailed, Projection, PROJECTION_MAX_ROUNDS};
pub use psgd::psgd_fit;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    Final,
    #[default]
    UniformAverage,
}

impl fmt::Display for Averaging {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Averaging::Final => "final",
            Averaging::UniformAverage => "uniform_average",
        })
    }
}

/// PSGD hyperparameters. `bound_c` is the radius of `D` in sup-norm; `3B`
/// for a target with `sup|f| ≤ B` is the default the theory calls for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub degree: u32,
    #[serde(rename = "bound_C")]
    pub bound_c: f64,
    pub steps: usize,
    /// `None` selects `R/(ρ√T)` with `R = coeff_l1_bound(C,d,k)` and `ρ² = 2·C(d+k,k)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub averaging: Averaging,
    pub quadrature: QuadratureSpec,
}

impl FitConfig {
    pub fn new(d: usize, degree: u32, bound_c: f64, steps: usize) -> Self {
        FitConfig {
            degree,
            bound_c,
            steps,
            step_size: None,
            seed: 0,
            averaging: Averaging::UniformAverage,
            quadrature: QuadratureSpec::for_degree(d, degree),
        }
    }

    pub fn with_step_size(mut self, eta: f64) -> Self {
        self.step_size = Some(eta);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_averaging(mut self, averaging: Averaging) -> Self {
        self.averaging = averaging;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid("steps must be at least 1"));
        }
        if !(self.bound_c > 0.0) {
            return Err(Error::invalid("bound_C must be positive"));
        }
        if let Some(eta) = self.step_size {
            if !(eta > 0.0) {
                return Err(Error::invalid("step_size must be positive"));
            }
        }
        Ok(())
    }

    /// Squared bound on the stochastic gradient norm, `2·C(d+k,k)`.
    pub fn rho_squared(&self, d: usize) -> f64 {
        2.0 * binomial(d as u64 + self.degree as u64, self.degree as u64).unwrap_or(u128::MAX) as f64
    }

    /// Step size actually used by [`psgd_fit`].
    pub fn effective_step_size(&self, d: usize) -> f64 {
        self.step_size.unwrap_or_else(|| {
            let r = coeff_l1_bound(self.bound_c, d, self.degree);
            r / (self.rho_squared(d) * self.steps as f64).sqrt()
        })
    }
}

/// Objective estimates at the end of one tenth of the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub end_step: usize,
    /// `ψ(v̄,S) − mean q_v̄(y)` over the epoch's data: the negative
    /// log-likelihood up to a constant independent of `v`.
    pub nll: f64,
    /// `KL(P(f,S)‖P(v̄,S))` by quadrature, when the target is known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kl: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitReport {
    pub schema_version: &'static str,
    pub coeffs: PolyCoeffs,
    pub steps: usize,
    pub step_size: f64,
    pub bound_c: f64,
    pub averaging: Averaging,
    pub trajectory: Vec<EpochSummary>,
    pub sampler_stats: SamplerStats,
    /// Steps whose gradient update left `D` and had to be projected back.
    pub projection_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_kl_on_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tv_on_k: Option<f64>,
}
