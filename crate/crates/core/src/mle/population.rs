use nalgebra::{DMatrix, DVector};

use crate::basis::PolyCoeffs;
use crate::dd::Dd;
use crate::density::LogDensityFn;
use crate::error::{Error, Result};
use crate::integrate::{QuadratureSpec, Rule, SurvivalSet};

use super::objective::population_gradient;

const MAX_NEWTON: usize = 200;
const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Outcome of [`population_mle_1d_detailed`].
#[derive(Clone, Debug)]
pub struct PopulationFit {
    pub coeffs: PolyCoeffs,
    pub iterations: usize,
    /// `‖population_gradient(coeffs)‖₂` in the monomial basis.
    pub gradient_norm: f64,
    /// `KL(P(f,S)‖P(q,S))` on the quadrature rule at every accepted iterate.
    pub objective_trace: Vec<f64>,
}

/// `argmin_{deg q ≤ k} KL(P(f,S) ‖ P(q,S))` for `d = 1`.
pub fn population_mle_1d<F: LogDensityFn + ?Sized>(
    f: &F,
    set: &SurvivalSet,
    k: u32,
    spec: &QuadratureSpec,
    opt_tol: f64,
) -> Result<PolyCoeffs> {
    population_mle_1d_detailed(f, set, k, spec, opt_tol).map(|r| r.coeffs)
}

/// Damped Newton on quadrature moments.
///
/// The optimization runs in a shifted Legendre basis on the hull of `S`,
/// `φ_n(x) = P_n(t(x)) − P_n(t(0))`, which spans the same polynomials as the
/// monomials without a constant term but is well conditioned. Partition
/// sums and moments are accumulated in double-double so that gradients far
/// below `f64` resolution of the individual terms stay meaningful, and the
/// final change of basis to monomials is done in double-double as well.
pub fn population_mle_1d_detailed<F: LogDensityFn + ?Sized>(
    f: &F,
    set: &SurvivalSet,
    k: u32,
    spec: &QuadratureSpec,
    opt_tol: f64,
) -> Result<PopulationFit> {
    if f.dim() != 1 || set.dim() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            got: if f.dim() != 1 { f.dim() } else { set.dim() },
        });
    }
    let intervals = set
        .exact_1d()
        .ok_or_else(|| Error::invalid("population MLE needs a set given by exact intervals"))?;
    if k == 0 {
        return Err(Error::invalid("degree must be at least 1"));
    }
    if !(opt_tol > 0.0) {
        return Err(Error::invalid("opt_tol must be positive"));
    }
    let k = k as usize;
    let lo = intervals[0][0];
    let hi = intervals[intervals.len() - 1][1];
    let scale = 2.0 / (hi - lo);
    let shift = -(hi + lo) / (hi - lo);

    let rule = Rule::for_set(set, spec)?;
    let n = rule.len();
    let origin = legendre_values(shift, k);
    let mut phi = vec![0.0; n * k];
    for i in 0..n {
        let t = scale * rule.point(i)[0] + shift;
        let p = legendre_values(t, k);
        for j in 0..k {
            phi[i * k + j] = p[j + 1] - origin[j + 1];
        }
    }

    let fvals: Vec<f64> = (0..n).map(|i| f.log_value(rule.point(i))).collect();
    if let Some(i) = fvals.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            point: rule.point(i).to_vec(),
        });
    }
    let target = Moments::new(&rule, &fvals, &phi, k)?;
    // E_f[f] − ψ_f, the part of the KL that does not depend on q
    let mut cross = Dd::ZERO;
    for (i, fv) in fvals.iter().enumerate() {
        cross = cross + Dd::new(target.weights[i]) * Dd::new(*fv);
    }
    let offset = cross - target.log_z;

    let objective = |c: &[f64]| -> Result<(Moments, Dd)> {
        let q = eval_basis(&phi, c, k);
        let m = Moments::new(&rule, &q, &phi, k)?;
        let mut lin = Dd::ZERO;
        for (cj, mj) in c.iter().zip(&target.mean) {
            lin = lin + Dd::new(*cj) * *mj;
        }
        let value = offset - lin + m.log_z;
        Ok((m, value))
    };

    let mut c = vec![0.0; k];
    let (mut model, mut value) = objective(&c)?;
    let mut trace = vec![value.to_f64()];
    let mut iterations = 0;
    while iterations < MAX_NEWTON {
        iterations += 1;
        let grad: Vec<f64> = (0..k).map(|j| (model.mean[j] - target.mean[j]).to_f64()).collect();
        let h = model.covariance(&rule, &phi, k);
        let dir = newton_direction(h, &grad);
        let decrement: f64 = grad.iter().zip(&dir).map(|(g, s)| g * s).sum();
        if !(decrement > 1e-30) {
            break;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = c.iter().zip(&dir).map(|(ci, si)| ci - step * si).collect();
            if let Ok((m, v)) = objective(&trial) {
                if (v - value).to_f64() <= -ARMIJO_C * step * decrement {
                    accepted = Some((trial, m, v));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((trial, m, v)) = accepted else {
            break;
        };
        c = trial;
        model = m;
        value = v;
        trace.push(value.to_f64());
    }

    let coeffs = PolyCoeffs::from_vec(1, k as u32, to_monomials(&c, scale, shift))?;
    let grad = population_gradient(&coeffs, f, set, spec)?;
    let gradient_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if !(gradient_norm <= opt_tol) {
        return Err(Error::NoConvergence {
            what: "population MLE",
            iterations,
            residual: gradient_norm,
        });
    }
    Ok(PopulationFit {
        coeffs,
        iterations,
        gradient_norm,
        objective_trace: trace,
    })
}

/// `P_0(t), …, P_k(t)` by the three-term recurrence.
fn legendre_values(t: f64, k: usize) -> Vec<f64> {
    let mut p = vec![0.0; k + 1];
    p[0] = 1.0;
    if k >= 1 {
        p[1] = t;
    }
    for m in 1..k {
        let mf = m as f64;
        p[m + 1] = ((2.0 * mf + 1.0) * t * p[m] - mf * p[m - 1]) / (mf + 1.0);
    }
    p
}

fn eval_basis(phi: &[f64], c: &[f64], k: usize) -> Vec<f64> {
    phi.chunks_exact(k)
        .map(|row| row.iter().zip(c).map(|(a, b)| a * b).sum())
        .collect()
}

/// Normalized Gibbs weights of `g` on the rule with double-double moments.
struct Moments {
    weights: Vec<f64>,
    mean: Vec<Dd>,
    log_z: Dd,
}

impl Moments {
    fn new(rule: &Rule, g: &[f64], phi: &[f64], k: usize) -> Result<Self> {
        let top = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::Overflow("log-density on the quadrature rule"));
        }
        let raw: Vec<f64> = g
            .iter()
            .enumerate()
            .map(|(i, v)| rule.weight(i) * (v - top).exp())
            .collect();
        let mut z = Dd::ZERO;
        let mut sums = vec![Dd::ZERO; k];
        for (i, w) in raw.iter().enumerate() {
            z = z + Dd::new(*w);
            let wd = Dd::new(*w);
            for j in 0..k {
                sums[j] = sums[j] + wd * Dd::new(phi[i * k + j]);
            }
        }
        if !(z.to_f64() > 0.0) {
            return Err(Error::Underflow);
        }
        let zf = z.to_f64();
        Ok(Moments {
            weights: raw.iter().map(|w| w / zf).collect(),
            mean: sums.into_iter().map(|s| s / z).collect(),
            log_z: Dd::new(top) + z.ln(),
        })
    }

    fn covariance(&self, rule: &Rule, phi: &[f64], k: usize) -> DMatrix<f64> {
        let mean: Vec<f64> = self.mean.iter().map(|m| m.to_f64()).collect();
        let mut h = DMatrix::zeros(k, k);
        let mut centered = vec![0.0; k];
        for i in 0..rule.len() {
            for j in 0..k {
                centered[j] = phi[i * k + j] - mean[j];
            }
            let w = self.weights[i];
            for a in 0..k {
                let wa = w * centered[a];
                for b in a..k {
                    h[(a, b)] += wa * centered[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
        }
        h
    }
}

fn newton_direction(h: DMatrix<f64>, grad: &[f64]) -> Vec<f64> {
    let g = DVector::from_column_slice(grad);
    let scale = h.diagonal().max().max(f64::MIN_POSITIVE);
    let mut ridge = 0.0;
    loop {
        let mut m = h.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += ridge;
        }
        if let Some(ch) = m.cholesky() {
            return ch.solve(&g).iter().copied().collect();
        }
        ridge = if ridge == 0.0 { 1e-14 * scale } else { ridge * 10.0 };
    }
}

/// Monomial coefficients (degree 1..k) of `Σ c_n φ_n` with `t = scale·x + shift`.
fn to_monomials(c: &[f64], scale: f64, shift: f64) -> Vec<f64> {
    let k = c.len();
    // Legendre polynomials as coefficient vectors in t
    let mut legendre: Vec<Vec<Dd>> = vec![vec![Dd::new(1.0)]];
    if k >= 1 {
        legendre.push(vec![Dd::ZERO, Dd::new(1.0)]);
    }
    for m in 1..k {
        let mf = m as f64;
        let mut next = vec![Dd::ZERO; m + 2];
        for (j, a) in legendre[m].iter().enumerate() {
            next[j + 1] = next[j + 1] + Dd::new(2.0 * mf + 1.0) * *a;
        }
        for (j, a) in legendre[m - 1].iter().enumerate() {
            next[j] = next[j] - Dd::new(mf) * *a;
        }
        let denom = Dd::new(mf + 1.0);
        legendre.push(next.into_iter().map(|a| a / denom).collect());
    }
    // combined polynomial in t, then substitute t = scale·x + shift by Horner
    let mut in_t = vec![Dd::ZERO; k + 1];
    for (n, cn) in c.iter().enumerate() {
        for (j, a) in legendre[n + 1].iter().enumerate() {
            in_t[j] = in_t[j] + Dd::new(*cn) * *a;
        }
    }
    let (s, b) = (Dd::new(scale), Dd::new(shift));
    let mut in_x = vec![Dd::ZERO; k + 1];
    for coef in in_t.iter().rev() {
        let mut next = vec![Dd::ZERO; k + 1];
        for j in 0..k {
            next[j + 1] = next[j + 1] + in_x[j] * s;
        }
        for j in 0..=k {
            next[j] = next[j] + in_x[j] * b;
        }
        next[0] = next[0] + *coef;
        in_x = next;
    }
    in_x[1..].iter().map(|a| a.to_f64()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::LogDensity;

    #[test]
    fn monomial_conversion_matches_direct_evaluation() {
        let c = [0.3, -1.2, 0.05, 2.0];
        let (scale, shift) = (4.0, -1.0);
        let mono = to_monomials(&c, scale, shift);
        let p = PolyCoeffs::from_vec(1, 4, mono).unwrap();
        let origin = legendre_values(shift, 4);
        for x in [0.0, 0.1, 0.37, 0.5, 1.0] {
            let t = scale * x + shift;
            let leg = legendre_values(t, 4);
            let direct: f64 = (0..4).map(|j| c[j] * (leg[j + 1] - origin[j + 1])).sum();
            assert!(
                (p.eval(&[x]).unwrap() - direct).abs() < 1e-12 * direct.abs().max(1.0),
                "x={x}"
            );
        }
    }

    #[test]
    fn recovers_polynomial_truth() {
        let half = SurvivalSet::interval(0.0, 0.5).unwrap();
        let truth = PolyCoeffs::from_vec(1, 3, vec![0.8, -2.1, 1.4]).unwrap();
        let f = LogDensity::from_poly(&truth);
        let spec = QuadratureSpec::for_degree(1, 3);
        let fit = population_mle_1d_detailed(&f, &half, 3, &spec, 1e-9).unwrap();
        for (a, b) in fit.coeffs.coeffs().iter().zip(truth.coeffs()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        // extra degrees stay at zero
        let fit5 = population_mle_1d(&f, &half, 5, &QuadratureSpec::for_degree(1, 5), 1e-9).unwrap();
        assert!(fit5.coeffs()[3].abs() < 1e-6 && fit5.coeffs()[4].abs() < 1e-6);
    }

    #[test]
    fn objective_never_increases() {
        let half = SurvivalSet::interval(0.0, 0.5).unwrap();
        let fit = population_mle_1d_detailed(&LogDensity::sin10(), &half, 8, &QuadratureSpec::for_degree(1, 8), 1e-9)
            .unwrap();
        assert!(fit.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(fit.gradient_norm <= 1e-9);
    }

    #[test]
    fn works_on_interval_unions() {
        let set = SurvivalSet::intervals(vec![[0.0, 0.2], [0.4, 0.7]]).unwrap();
        let truth = PolyCoeffs::from_vec(1, 2, vec![1.0, -1.5]).unwrap();
        let fit = population_mle_1d(
            &LogDensity::from_poly(&truth),
            &set,
            2,
            &QuadratureSpec::for_degree(1, 2),
            1e-9,
        )
        .unwrap();
        assert!((fit.coeffs()[0] - 1.0).abs() < 1e-8 && (fit.coeffs()[1] + 1.5).abs() < 1e-8);
    }

    #[test]
    fn rejects_wrong_dimension() {
        let sq = SurvivalSet::cube(2).unwrap();
        assert!(population_mle_1d(&LogDensity::zero(2).unwrap(), &sq, 2, &QuadratureSpec::tensor(64), 1e-9).is_err());
    }
}
