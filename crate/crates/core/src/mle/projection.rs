use nalgebra::{DMatrix, DVector};

use crate::basis::{dot, local_extrema, PolyCoeffs};
use crate::error::{Error, Result};

/// Cutting-plane rounds before [`project_onto_d`] gives up.
pub const PROJECTION_MAX_ROUNDS: usize = 200;

/// Outcome of [`project_onto_d_detailed`].
#[derive(Clone, Debug)]
pub struct Projection {
    pub coeffs: PolyCoeffs,
    /// `false` when the input was already feasible and returned unchanged.
    pub moved: bool,
    pub rounds: usize,
    pub cuts: usize,
    pub sup_norm: f64,
}

/// Euclidean projection of `v` onto `D = {u : sup_{[0,1]^d} |q_u| ≤ C}`.
pub fn project_onto_d(v: &PolyCoeffs, bound_c: f64, tol: f64) -> Result<PolyCoeffs> {
    project_onto_d_detailed(v, bound_c, tol).map(|p| p.coeffs)
}

/// Cutting planes on `min ‖u − v‖²`: every violated local extremum `x*` of
/// the current iterate adds the half-space `sign(q(x*))·u·m(x*) ≤ C`, and the
/// QP over the accumulated cuts is solved exactly by a dual active-set method.
pub fn project_onto_d_detailed(v: &PolyCoeffs, bound_c: f64, tol: f64) -> Result<Projection> {
    if !(bound_c > 0.0) {
        return Err(Error::invalid("projection bound must be positive"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("projection tolerance must be positive"));
    }
    if v.coeffs().iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("coefficients must be finite"));
    }
    let basis = v.basis().clone();
    let ext = local_extrema(v, tol);
    let sup = ext.first().map_or(0.0, |e| e.value.abs());
    if sup <= bound_c + tol {
        return Ok(Projection {
            coeffs: v.clone(),
            moved: false,
            rounds: 0,
            cuts: 0,
            sup_norm: sup,
        });
    }

    let mut cuts: Vec<Vec<f64>> = Vec::new();
    let add_cuts = |cuts: &mut Vec<Vec<f64>>, ext: &[crate::basis::Extremum]| {
        for e in ext.iter().filter(|e| e.value.abs() > bound_c + 0.5 * tol) {
            let mut a = basis.profile(&e.point).expect("extremum lies in the cube");
            if e.value < 0.0 {
                a.iter_mut().for_each(|c| *c = -*c);
            }
            cuts.push(a);
        }
    };
    add_cuts(&mut cuts, &ext);

    let mut violation = sup - bound_c;
    for round in 1..=PROJECTION_MAX_ROUNDS {
        let u = qp_project(v.coeffs(), &cuts, bound_c)?;
        let candidate = v.with_coeffs(u)?;
        let ext = local_extrema(&candidate, tol);
        let sup = ext.first().map_or(0.0, |e| e.value.abs());
        violation = sup - bound_c;
        if violation <= tol {
            return Ok(Projection {
                coeffs: candidate,
                moved: true,
                rounds: round,
                cuts: cuts.len(),
                sup_norm: sup,
            });
        }
        add_cuts(&mut cuts, &ext);
    }
    Err(Error::ProjectionDiverged {
        rounds: PROJECTION_MAX_ROUNDS,
        violation,
        cuts: cuts.len(),
    })
}

/// `argmin ‖u − v‖²` subject to `a_i·u ≤ b` for every cut `a_i`.
///
/// Goldfarb–Idnani dual method with identity Hessian: start from the
/// unconstrained minimizer and add the most violated constraint, dropping
/// active ones whose multipliers would turn negative. Primal and dual stay
/// linked by `u = v − Σ λ_j a_j`.
fn qp_project(v: &[f64], cuts: &[Vec<f64>], b: f64) -> Result<Vec<f64>> {
    let n = v.len();
    let mut u = v.to_vec();
    let mut active: Vec<usize> = Vec::new();
    let mut lambda: Vec<f64> = Vec::new();
    let feas_tol = 1e-13 * b.max(1.0);
    let max_iter = 20 * (cuts.len() + n) + 100;

    let mut iter = 0;
    loop {
        let Some((p, worst)) = cuts
            .iter()
            .enumerate()
            .filter(|(i, _)| !active.contains(i))
            .map(|(i, a)| (i, dot(a, &u) - b))
            .max_by(|x, y| x.1.total_cmp(&y.1))
        else {
            return Ok(u);
        };
        if worst <= feas_tol {
            return Ok(u);
        }
        let ap = &cuts[p];
        let ap_norm2 = dot(ap, ap);
        let mut lambda_p = 0.0;
        loop {
            iter += 1;
            if iter > max_iter {
                return Err(Error::NoConvergence {
                    what: "projection QP",
                    iterations: iter,
                    residual: dot(ap, &u) - b,
                });
            }
            // r solves (N Nᵀ) r = N a_p; z = a_p − Nᵀ r is a_p's part orthogonal to the active rows
            let r = active_coefficients(cuts, &active, ap);
            let mut z = ap.clone();
            for (j, &i) in active.iter().enumerate() {
                for (zk, ak) in z.iter_mut().zip(&cuts[i]) {
                    *zk -= r[j] * ak;
                }
            }
            let zz = dot(&z, &z);
            let independent = zz > 1e-12 * ap_norm2;

            let mut blocking = None;
            let mut t1 = f64::INFINITY;
            for (j, &rj) in r.iter().enumerate() {
                if rj > 0.0 && lambda[j] / rj < t1 {
                    t1 = lambda[j] / rj;
                    blocking = Some(j);
                }
            }
            let t2 = if independent {
                (dot(ap, &u) - b) / zz
            } else {
                f64::INFINITY
            };
            if !t1.is_finite() && !t2.is_finite() {
                return Err(Error::invalid("projection cuts are infeasible"));
            }
            let t = t1.min(t2);
            if independent {
                for (uk, zk) in u.iter_mut().zip(&z) {
                    *uk -= t * zk;
                }
            }
            for (lj, rj) in lambda.iter_mut().zip(&r) {
                *lj -= t * rj;
            }
            lambda_p += t;
            if t2 <= t1 {
                active.push(p);
                lambda.push(lambda_p);
                break;
            }
            let j = blocking.expect("finite t1 has a blocking constraint");
            active.remove(j);
            lambda.remove(j);
        }
    }
}

fn active_coefficients(cuts: &[Vec<f64>], active: &[usize], ap: &[f64]) -> Vec<f64> {
    let m = active.len();
    if m == 0 {
        return Vec::new();
    }
    let gram = DMatrix::from_fn(m, m, |i, j| dot(&cuts[active[i]], &cuts[active[j]]));
    let rhs = DVector::from_fn(m, |i, _| dot(&cuts[active[i]], ap));
    let sol = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .expect("SVD was computed with both factors"),
    };
    sol.iter().copied().collect()
}
