//! Seeded rejection samplers: uniform on the cube → uniform on `S` →
//! `P(v,S)` or `P(f,S)`.
//!
//! Output is produced in fixed-size batches. Batch `b` draws from its own
//! stream `(seed, tag, b)`, and batches are concatenated in index order, so
//! the points do not depend on how batches are scheduled.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{poly_sup_norm, PolyCoeffs};
use crate::density::{LogDensity, LogDensityFn};
use crate::error::{Error, Result};
use crate::integrate::SurvivalSet;
use crate::{par, rng, Point};

/// Points per sampling batch.
pub const BATCH: usize = 4096;
/// Slack on `sup|q_v| ≤ C` before a coefficient vector is rejected.
pub const FEASIBILITY_TOL: f64 = 1e-6;

const TAG_UNIFORM: &str = "sample-uniform-set";
const TAG_EXP_FAMILY: &str = "sample-exp-family";
const TAG_TARGET: &str = "sample-target";

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplerStats {
    /// Proposals offered to the final accept/reject test.
    pub proposals: u64,
    pub accepts: u64,
    pub acceptance_rate: f64,
    /// Uniform draws on the cube spent to produce those proposals.
    pub cube_draws: u64,
}

impl SamplerStats {
    pub(crate) fn finish(mut self) -> Self {
        self.acceptance_rate = if self.proposals == 0 {
            0.0
        } else {
            self.accepts as f64 / self.proposals as f64
        };
        self
    }

    pub fn merge(self, other: SamplerStats) -> SamplerStats {
        SamplerStats {
            proposals: self.proposals + other.proposals,
            accepts: self.accepts + other.accepts,
            cube_draws: self.cube_draws + other.cube_draws,
            acceptance_rate: 0.0,
        }
        .finish()
    }

    /// Binomial standard error of the acceptance rate.
    pub fn rate_stderr(&self) -> f64 {
        if self.proposals == 0 {
            return 0.0;
        }
        let p = self.acceptance_rate;
        (p * (1.0 - p) / self.proposals as f64).sqrt()
    }
}

/// Hard ceiling on cube draws per batch. The worst-case acceptance bound
/// `α·e^{-2B}` underflows for large `B`, which would otherwise leave the
/// loop unbounded.
pub const MAX_CUBE_DRAWS: u64 = 1 << 32;

/// Cap on cube draws for `n` points at overall acceptance `rate`:
/// `⌈(n/rate)·ln(n·10³)⌉`, clamped to [`MAX_CUBE_DRAWS`].
fn proposal_cap(n: usize, rate: f64) -> u64 {
    let n = n.max(1) as f64;
    let cap = ((n / rate) * (n * 1e3).ln()).ceil();
    if cap.is_finite() && cap < MAX_CUBE_DRAWS as f64 {
        cap as u64
    } else {
        MAX_CUBE_DRAWS
    }
}

/// State for drawing one point at a time from a fixed stream.
pub(crate) struct Draw<'a> {
    set: &'a SurvivalSet,
    x: Vec<f64>,
}

impl<'a> Draw<'a> {
    pub(crate) fn new(set: &'a SurvivalSet) -> Self {
        Draw {
            set,
            x: vec![0.0; set.dim()],
        }
    }

    /// Uniform on `S` by rejection from the cube; `None` once `budget` is spent.
    fn uniform_on_set<R: Rng>(&mut self, rng: &mut R, stats: &mut SamplerStats, budget: u64) -> Option<&[f64]> {
        loop {
            if stats.cube_draws >= budget {
                return None;
            }
            stats.cube_draws += 1;
            rng::unit_point(rng, self.x.len(), &mut self.x);
            if self.set.contains(&self.x) {
                return Some(&self.x);
            }
        }
    }

    /// One draw from `∝ 1_S e^{g}` with envelope `e^{g − bound}`.
    pub(crate) fn exp_family<R: Rng, G: Fn(&[f64]) -> f64>(
        &mut self,
        rng: &mut R,
        log_density: G,
        bound: f64,
        stats: &mut SamplerStats,
        budget: u64,
    ) -> Result<Option<Point>> {
        loop {
            let Some(x) = self.uniform_on_set(rng, stats, budget) else {
                return Ok(None);
            };
            stats.proposals += 1;
            let g = log_density(x);
            if g > bound + 1e-9 * bound.abs().max(1.0) {
                return Err(Error::EnvelopeViolated {
                    point: x.to_vec(),
                    value: g,
                    bound,
                });
            }
            if rng.random::<f64>() < (g - bound).exp() {
                stats.accepts += 1;
                return Ok(Some(x.to_vec()));
            }
        }
    }
}

fn batched<F>(n: usize, f: F) -> Result<(Vec<Point>, SamplerStats)>
where
    F: Fn(usize, usize) -> Result<(Vec<Point>, SamplerStats)> + Sync + Send,
{
    let batches = n.div_ceil(BATCH);
    let parts = par::map(batches, |b| {
        let m = BATCH.min(n - b * BATCH);
        f(b, m)
    });
    let mut points = Vec::with_capacity(n);
    let mut stats = SamplerStats::default();
    for part in parts {
        let (p, s) = part?;
        points.extend(p);
        stats = stats.merge(s);
    }
    Ok((points, stats.finish()))
}

/// `n` i.i.d. uniform points on `S`.
pub fn sample_uniform_set(set: &SurvivalSet, n: usize, seed: u64) -> Result<(Vec<Point>, SamplerStats)> {
    let alpha = set.volume_estimate();
    if !(alpha > 0.0) {
        return Err(Error::EmptySet);
    }
    batched(n, |b, m| {
        let mut rng = rng::stream(seed, TAG_UNIFORM, b as u64);
        let mut draw = Draw::new(set);
        let mut stats = SamplerStats::default();
        let budget = proposal_cap(m, alpha);
        let mut out = Vec::with_capacity(m);
        while out.len() < m {
            match draw.uniform_on_set(&mut rng, &mut stats, budget) {
                Some(x) => out.push(x.to_vec()),
                None => {
                    return Err(Error::ProposalCap {
                        proposals: stats.cube_draws,
                        accepted: out.len() as u64,
                    })
                }
            }
        }
        // every point on S is accepted at this stage
        stats.proposals = stats.cube_draws;
        stats.accepts = m as u64;
        Ok((out, stats))
    })
}

/// `n` i.i.d. draws from `P(v,S)`, accepting a uniform-on-`S` proposal with
/// probability `e^{q_v(x) − C}`. Requires `sup|q_v| ≤ C` on the cube.
pub fn sample_exp_family(
    v: &PolyCoeffs,
    set: &SurvivalSet,
    bound_c: f64,
    n: usize,
    seed: u64,
) -> Result<(Vec<Point>, SamplerStats)> {
    if v.dim() != set.dim() {
        return Err(Error::Dimension {
            expected: set.dim(),
            got: v.dim(),
        });
    }
    let sup = poly_sup_norm(v, 1e-8).value;
    if sup > bound_c + FEASIBILITY_TOL * bound_c.max(1.0) {
        return Err(Error::OutsideFeasibleSet {
            sup_norm: sup,
            bound: bound_c,
        });
    }
    sample_exp_family_unchecked(v, set, bound_c, n, seed, TAG_EXP_FAMILY)
}

pub(crate) fn sample_exp_family_unchecked(
    v: &PolyCoeffs,
    set: &SurvivalSet,
    bound_c: f64,
    n: usize,
    seed: u64,
    tag: &str,
) -> Result<(Vec<Point>, SamplerStats)> {
    let alpha = set.volume_estimate();
    if !(alpha > 0.0) {
        return Err(Error::EmptySet);
    }
    let rate = alpha * (-2.0 * bound_c).exp();
    batched(n, |b, m| {
        let mut rng = rng::stream(seed, tag, b as u64);
        rejection_batch(
            &mut rng,
            set,
            |x| v.eval_unchecked(x),
            bound_c,
            m,
            proposal_cap(m, rate),
        )
    })
}

fn rejection_batch<R: Rng, G: Fn(&[f64]) -> f64>(
    rng: &mut R,
    set: &SurvivalSet,
    g: G,
    bound: f64,
    m: usize,
    budget: u64,
) -> Result<(Vec<Point>, SamplerStats)> {
    let mut draw = Draw::new(set);
    let mut stats = SamplerStats::default();
    let mut out = Vec::with_capacity(m);
    while out.len() < m {
        match draw.exp_family(rng, &g, bound, &mut stats, budget)? {
            Some(x) => out.push(x),
            None => {
                return Err(Error::ProposalCap {
                    proposals: stats.cube_draws,
                    accepted: out.len() as u64,
                })
            }
        }
    }
    Ok((out, stats))
}

/// `n` i.i.d. draws from `P(f,S)` with envelope `e^{f − B}`.
pub fn sample_target(f: &LogDensity, set: &SurvivalSet, n: usize, seed: u64) -> Result<(Vec<Point>, SamplerStats)> {
    if f.dim() != set.dim() {
        return Err(Error::Dimension {
            expected: set.dim(),
            got: f.dim(),
        });
    }
    let alpha = set.volume_estimate();
    if !(alpha > 0.0) {
        return Err(Error::EmptySet);
    }
    let bound = f.bound();
    let rate = alpha * (-2.0 * bound).exp();
    batched(n, |b, m| {
        let mut rng = rng::stream(seed, TAG_TARGET, b as u64);
        rejection_batch(&mut rng, set, |x| f.log_value(x), bound, m, proposal_cap(m, rate))
    })
}

/// Tag and cap used by the PSGD loop for its one-point model draws.
pub(crate) const TAG_PSGD_MODEL: &str = "psgd-model";

pub(crate) fn single_draw_budget(set: &SurvivalSet, bound_c: f64) -> u64 {
    proposal_cap(1, set.volume_estimate() * (-2.0 * bound_c).exp()).max(1_000)
}
