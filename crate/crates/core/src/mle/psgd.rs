use crate::basis::{MonomialBasis, PolyCoeffs};
use crate::density::{log_partition_on, tv_distance, LogDensity, LogDensityFn, TruncatedDensity};
use crate::error::{Error, Result};
use crate::integrate::{Rule, SurvivalSet};
use crate::rng;
use crate::sampler::{single_draw_budget, Draw, SamplerStats, TAG_PSGD_MODEL};
use crate::Point;

use super::objective::kl_objective;
use super::projection::project_onto_d_detailed;
use super::{Averaging, EpochSummary, FitConfig, FitReport};

const EPOCHS: usize = 10;

/// Relative feasibility tolerance of the per-step projection.
const PROJECTION_TOL: f64 = 1e-6;

/// Projected SGD from `v = 0`, one fresh data point per step.
///
/// Step `t` draws the model point from `P(v_{t−1},S)` by rejection on its own
/// seeded stream, forms `g = m(x) − m(y_t)`, and projects `v_{t−1} − η g`
/// back onto `D`. When `target` is given the report carries the final KL on
/// `S` and the TV distance on the cube against it.
pub fn psgd_fit(data: &[Point], set: &SurvivalSet, cfg: &FitConfig, target: Option<&LogDensity>) -> Result<FitReport> {
    cfg.validate()?;
    let d = set.dim();
    cfg.quadrature.validate(d)?;
    if data.len() < cfg.steps {
        return Err(Error::invalid(format!(
            "{} data points for {} steps; each step needs a fresh point",
            data.len(),
            cfg.steps
        )));
    }
    if let Some(x) = data.iter().find(|x| x.len() != d) {
        return Err(Error::Dimension {
            expected: d,
            got: x.len(),
        });
    }
    if let Some(f) = target {
        if f.dim() != d {
            return Err(Error::Dimension {
                expected: d,
                got: f.dim(),
            });
        }
    }

    let basis = std::sync::Arc::new(MonomialBasis::new(d, cfg.degree)?);
    let width = basis.len();
    let eta = cfg.effective_step_size(d);
    let tol = PROJECTION_TOL * cfg.bound_c;
    // iterates are feasible only to within the projection tolerance
    let envelope = cfg.bound_c + tol;
    let budget = single_draw_budget(set, envelope);
    let epoch_rule = Rule::for_set(set, &cfg.quadrature)?;

    let mut v = PolyCoeffs::zeros(basis.clone());
    let mut sum = vec![0.0; width];
    let mut stats = SamplerStats::default();
    let mut projections = 0;
    let mut draw = Draw::new(set);
    let mut m_model = vec![0.0; width];
    let mut m_data = vec![0.0; width];
    let mut trajectory = Vec::with_capacity(EPOCHS);
    let mut epoch_start = 0;

    for step in 0..cfg.steps {
        let mut stream = rng::stream(cfg.seed, TAG_PSGD_MODEL, step as u64);
        let mut step_stats = SamplerStats::default();
        let x = draw
            .exp_family(&mut stream, |x| v.eval_unchecked(x), envelope, &mut step_stats, budget)?
            .ok_or(Error::ProposalCap {
                proposals: step_stats.cube_draws,
                accepted: 0,
            })?;
        stats = stats.merge(step_stats);
        basis.profile_into(&x, &mut m_model);
        basis.profile_into(&data[step], &mut m_data);
        let w: Vec<f64> = v
            .coeffs()
            .iter()
            .zip(m_model.iter().zip(&m_data))
            .map(|(vi, (a, b))| vi - eta * (a - b))
            .collect();
        let proj = project_onto_d_detailed(&v.with_coeffs(w)?, cfg.bound_c, tol)?;
        if proj.moved {
            projections += 1;
        }
        v = proj.coeffs;
        for (s, c) in sum.iter_mut().zip(v.coeffs()) {
            *s += c;
        }

        let done = step + 1;
        if done * EPOCHS / cfg.steps > trajectory.len() || done == cfg.steps {
            let avg = v.with_coeffs(sum.iter().map(|s| s / done as f64).collect())?;
            let current = match cfg.averaging {
                Averaging::UniformAverage => &avg,
                Averaging::Final => &v,
            };
            let psi = log_partition_on(current, &epoch_rule)?;
            let mean_q = data[epoch_start..done]
                .iter()
                .map(|y| current.eval_unchecked(y))
                .sum::<f64>()
                / (done - epoch_start) as f64;
            let kl = target
                .map(|f| kl_objective(current, f, set, &cfg.quadrature))
                .transpose()?;
            trajectory.push(EpochSummary {
                epoch: trajectory.len() + 1,
                end_step: done,
                nll: psi - mean_q,
                kl,
            });
            epoch_start = done;
        }
    }

    let coeffs = match cfg.averaging {
        Averaging::UniformAverage => v.with_coeffs(sum.iter().map(|s| s / cfg.steps as f64).collect())?,
        Averaging::Final => v,
    };
    let (final_kl_on_s, tv_on_k) = match target {
        Some(f) => {
            let kl = kl_objective(&coeffs, f, set, &cfg.quadrature)?;
            let cube = SurvivalSet::cube(d)?;
            let quad = crate::integrate::QuadratureSpec::for_degree(d, cfg.degree);
            let truth = TruncatedDensity::new(f.clone(), cube.clone(), quad)?;
            let fit = TruncatedDensity::new(coeffs.clone(), cube, quad)?;
            (Some(kl), Some(tv_distance(&truth, &fit, &quad)?))
        }
        None => (None, None),
    };

    Ok(FitReport {
        schema_version: crate::SCHEMA_VERSION,
        coeffs,
        steps: cfg.steps,
        step_size: eta,
        bound_c: cfg.bound_c,
        averaging: cfg.averaging,
        trajectory,
        sampler_stats: stats.finish(),
        projection_count: projections,
        final_kl_on_s,
        tv_on_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::poly_sup_norm;
    use crate::sampler::{sample_exp_family, sample_uniform_set};

    #[test]
    fn zero_target_fits_near_zero() {
        let cube = SurvivalSet::cube(1).unwrap();
        let (data, _) = sample_uniform_set(&cube, 10_000, 3).unwrap();
        let cfg = FitConfig::new(1, 1, 3.0, 10_000).with_step_size(0.05).with_seed(11);
        let rep = psgd_fit(&data, &cube, &cfg, None).unwrap();
        assert!(rep.coeffs.coeffs()[0].abs() < 0.05, "{:?}", rep.coeffs.coeffs());
        assert_eq!(rep.trajectory.len(), 10);
        assert_eq!(rep.trajectory.last().unwrap().end_step, 10_000);
    }

    #[test]
    fn single_step_report() {
        let half = SurvivalSet::interval(0.0, 0.5).unwrap();
        let cfg = FitConfig::new(1, 3, 3.0, 1);
        let rep = psgd_fit(&[vec![0.25]], &half, &cfg, Some(&LogDensity::sin10())).unwrap();
        assert_eq!(rep.steps, 1);
        assert_eq!(rep.trajectory.len(), 1);
        assert!(poly_sup_norm(&rep.coeffs, 1e-9).value <= 3.0 * (1.0 + 2e-6));
        assert!(rep.final_kl_on_s.is_some() && rep.tv_on_k.is_some());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let half = SurvivalSet::interval(0.0, 0.5).unwrap();
        let truth = PolyCoeffs::from_vec(1, 2, vec![0.5, -0.5]).unwrap();
        let (data, _) = sample_exp_family(&truth, &half, 1.0, 2000, 5).unwrap();
        let cfg = FitConfig::new(1, 2, 3.0, 2000).with_step_size(5.0).with_seed(1);
        let a = psgd_fit(&data, &half, &cfg, None).unwrap();
        let b = psgd_fit(&data, &half, &cfg, None).unwrap();
        assert_eq!(a.coeffs.coeffs(), b.coeffs.coeffs());
        let c = psgd_fit(&data, &half, &cfg.clone().with_seed(2), None).unwrap();
        assert_ne!(a.coeffs.coeffs(), c.coeffs.coeffs());
    }

    #[test]
    fn rejects_short_data() {
        let cube = SurvivalSet::cube(1).unwrap();
        let cfg = FitConfig::new(1, 1, 3.0, 10);
        assert!(psgd_fit(&vec![vec![0.5]; 9], &cube, &cfg, None).is_err());
        assert!(psgd_fit(&vec![vec![0.5, 0.5]; 10], &cube, &cfg, None).is_err());
    }
}
