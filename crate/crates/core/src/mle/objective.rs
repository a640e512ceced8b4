use nalgebra::DMatrix;

use crate::basis::PolyCoeffs;
use crate::density::LogDensityFn;
use crate::error::{Error, Result};
use crate::integrate::{QuadratureSpec, Rule, SurvivalSet};
use crate::par;

/// Normalized weights `w_i e^{g(x_i)} / Z` on a rule, plus `log Z`.
pub(crate) fn gibbs_weights<F: LogDensityFn + ?Sized>(f: &F, rule: &Rule) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let values = rule.map(|x| f.log_value(x));
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            point: rule.point(i).to_vec(),
        });
    }
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, v)| rule.weight(i) * (v - m).exp())
        .collect();
    let z: f64 = w.iter().sum();
    if !(z > 0.0) {
        return Err(Error::Underflow);
    }
    for wi in w.iter_mut() {
        *wi /= z;
    }
    Ok((w, values, m + z.ln()))
}

/// `E[m_k]` under normalized weights.
pub(crate) fn profile_mean(basis: &crate::basis::MonomialBasis, rule: &Rule, w: &[f64]) -> Vec<f64> {
    let width = basis.len();
    par::sum_vec(rule.len(), width, |i, acc| {
        let mut m = vec![0.0; width];
        basis.profile_into(rule.point(i), &mut m);
        for (a, mi) in acc.iter_mut().zip(m) {
            *a += w[i] * mi;
        }
    })
}

fn check_dims(v: &PolyCoeffs, f_dim: usize, set: &SurvivalSet) -> Result<()> {
    if v.dim() != set.dim() || f_dim != set.dim() {
        return Err(Error::Dimension {
            expected: set.dim(),
            got: if v.dim() != set.dim() { v.dim() } else { f_dim },
        });
    }
    Ok(())
}

/// `L(v) = KL(P(f,S) ‖ P(v,S)) = E_f[f] − ψ(f,S) − E_f[q_v] + ψ(v,S)`.
pub fn kl_objective<F: LogDensityFn + ?Sized>(
    v: &PolyCoeffs,
    f: &F,
    set: &SurvivalSet,
    spec: &QuadratureSpec,
) -> Result<f64> {
    check_dims(v, f.dim(), set)?;
    let rule = Rule::for_set(set, spec)?;
    let (wf, fvals, psi_f) = gibbs_weights(f, &rule)?;
    let (_, _, psi_v) = gibbs_weights(v, &rule)?;
    let cross = par::sum(rule.len(), |i| wf[i] * (fvals[i] - v.eval_unchecked(rule.point(i))));
    // E_f[f − q_v] − ψ_f + ψ_v; nonnegative up to rounding
    Ok(cross - psi_f + psi_v)
}

/// `∇L(v) = E_{P(v,S)}[m_k] − E_{P(f,S)}[m_k]`.
pub fn population_gradient<F: LogDensityFn + ?Sized>(
    v: &PolyCoeffs,
    f: &F,
    set: &SurvivalSet,
    spec: &QuadratureSpec,
) -> Result<Vec<f64>> {
    check_dims(v, f.dim(), set)?;
    let rule = Rule::for_set(set, spec)?;
    let (wv, _, _) = gibbs_weights(v, &rule)?;
    let (wf, _, _) = gibbs_weights(f, &rule)?;
    let basis = v.basis();
    let ev = profile_mean(basis, &rule, &wv);
    let ef = profile_mean(basis, &rule, &wf);
    Ok(ev.iter().zip(&ef).map(|(a, b)| a - b).collect())
}

/// `∇²L(v) = Cov_{P(v,S)}[m_k]`; independent of the target.
pub fn hessian(v: &PolyCoeffs, set: &SurvivalSet, spec: &QuadratureSpec) -> Result<DMatrix<f64>> {
    if v.dim() != set.dim() {
        return Err(Error::Dimension {
            expected: set.dim(),
            got: v.dim(),
        });
    }
    let rule = Rule::for_set(set, spec)?;
    let (w, _, _) = gibbs_weights(v, &rule)?;
    let basis = v.basis();
    let n = basis.len();
    let mean = profile_mean(basis, &rule, &w);
    let second = par::sum_vec(rule.len(), n * n, |i, acc| {
        let mut m = vec![0.0; n];
        basis.profile_into(rule.point(i), &mut m);
        for a in 0..n {
            let wa = w[i] * (m[a] - mean[a]);
            for b in 0..n {
                acc[a * n + b] += wa * (m[b] - mean[b]);
            }
        }
    });
    Ok(DMatrix::from_row_slice(n, n, &second))
}

/// `m_k(x) − m_k(y)` for a model draw `x` and a data draw `y`.
pub fn stochastic_gradient(v: &PolyCoeffs, x_model: &[f64], y_data: &[f64]) -> Result<Vec<f64>> {
    let basis = v.basis();
    let mut g = basis.profile(x_model)?;
    let my = basis.profile(y_data)?;
    for (gi, yi) in g.iter_mut().zip(my) {
        *gi -= yi;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::LogDensity;

    fn gl() -> QuadratureSpec {
        QuadratureSpec::gauss_legendre(32 * 64)
    }

    #[test]
    fn objective_vanishes_at_truth() {
        let half = SurvivalSet::interval(0.0, 0.5).unwrap();
        let v = PolyCoeffs::from_vec(1, 3, vec![0.4, -1.1, 0.7]).unwrap();
        let f = LogDensity::from_poly(&v);
        assert!(kl_objective(&v, &f, &half, &gl()).unwrap().abs() < 1e-12);
        let zero = PolyCoeffs::from_vec(1, 2, vec![0.0, 0.0]).unwrap();
        assert!(
            kl_objective(&zero, &LogDensity::zero(1).unwrap(), &half, &gl())
                .unwrap()
                .abs()
                < 1e-14
        );
    }

    #[test]
    fn gradient_vanishes_at_truth() {
        let half = SurvivalSet::interval(0.0, 0.5).unwrap();
        let v = PolyCoeffs::from_vec(1, 3, vec![0.4, -1.1, 0.7]).unwrap();
        let g = population_gradient(&v, &LogDensity::from_poly(&v), &half, &gl()).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-12));
        let z = PolyCoeffs::from_vec(1, 1, vec![0.0]).unwrap();
        let g = population_gradient(&z, &LogDensity::zero(1).unwrap(), &SurvivalSet::cube(1).unwrap(), &gl()).unwrap();
        assert!(g[0].abs() < 1e-15);
    }

    #[test]
    fn stochastic_gradient_examples() {
        let v = PolyCoeffs::from_vec(1, 2, vec![0.0, 0.0]).unwrap();
        assert_eq!(stochastic_gradient(&v, &[0.3], &[0.3]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(stochastic_gradient(&v, &[1.0], &[0.0]).unwrap(), vec![1.0, 1.0]);
        assert!(stochastic_gradient(&v, &[1.0, 0.0], &[0.0]).is_err());
    }

    #[test]
    fn stochastic_gradient_norm_bound() {
        let v = PolyCoeffs::from_vec(2, 3, vec![0.0; 9]).unwrap();
        let rho2 = 2.0 * 10.0; // 2·C(5,3)
        for (x, y) in [
            ([1.0, 1.0], [0.0, 0.0]),
            ([0.0, 0.0], [1.0, 1.0]),
            ([0.3, 0.9], [0.7, 0.1]),
        ] {
            let g = stochastic_gradient(&v, &x, &y).unwrap();
            assert!(g.iter().map(|a| a * a).sum::<f64>() <= rho2);
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let cube = SurvivalSet::cube(1).unwrap();
        let v = PolyCoeffs::from_vec(1, 3, vec![0.5, -0.2, 0.3]).unwrap();
        let f = LogDensity::sin10();
        let h = hessian(&v, &cube, &gl()).unwrap();
        let step = 1e-5;
        for j in 0..3 {
            let mut up = v.coeffs().to_vec();
            let mut dn = v.coeffs().to_vec();
            up[j] += step;
            dn[j] -= step;
            let gu = population_gradient(&v.with_coeffs(up).unwrap(), &f, &cube, &gl()).unwrap();
            let gd = population_gradient(&v.with_coeffs(dn).unwrap(), &f, &cube, &gl()).unwrap();
            for i in 0..3 {
                let fd = (gu[i] - gd[i]) / (2.0 * step);
                assert!((fd - h[(i, j)]).abs() < 1e-7, "H[{i},{j}]");
            }
        }
    }
}
