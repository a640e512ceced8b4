//! Multi-indices, the degree-`k` monomial profile and polynomials in it.
//!
//! A polynomial without constant term is stored as a coefficient vector `v`
//! over the multi-indices `0 < |α| ≤ k`, listed in ascending lexicographic
//! order of their exponent tuples. That order is canonical: serialized
//! coefficient vectors always use it.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::par;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(d: usize) -> Self {
        MultiIndex(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    /// `|α| = Σ αᵢ`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `α! = α₁!⋯α_d!`, exact in 128 bits.
    pub fn factorial(&self) -> Result<u128> {
        self.0.iter().try_fold(1u128, |acc, &a| {
            factorial(a).and_then(|f| acc.checked_mul(f).ok_or(Error::Overflow("multi-index factorial")))
        })
    }

    /// `x^α`.
    pub fn monomial(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(&a, &xi)| xi.powi(a as i32)).product()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

pub fn factorial(n: u32) -> Result<u128> {
    (1..=n as u128).try_fold(1u128, |acc, i| acc.checked_mul(i).ok_or(Error::Overflow("factorial")))
}

pub fn binomial(n: u64, k: u64) -> Result<u128> {
    let k = k.min(n.saturating_sub(k));
    let mut acc: u128 = 1;
    for i in 0..k as u128 {
        acc = acc.checked_mul(n as u128 - i).ok_or(Error::Overflow("binomial"))? / (i + 1);
    }
    Ok(acc)
}

/// All multi-indices `0 < |α| ≤ k` in `d` variables, lexicographically ordered.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonomialBasis {
    d: usize,
    k: u32,
    indices: Vec<MultiIndex>,
}

impl MonomialBasis {
    pub fn new(d: usize, k: u32) -> Result<Self> {
        enumerate_basis(d, k)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn degree(&self) -> u32 {
        self.k
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// Number of coefficients, `t_k − 1`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `t_k = C(d+k, k)`, the dimension of polynomials of degree ≤ k including constants.
    pub fn t_k(&self) -> u128 {
        binomial(self.d as u64 + self.k as u64, self.k as u64).expect("validated at construction")
    }

    /// `m_k(x)`.
    pub fn profile(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let mut out = vec![0.0; self.len()];
        self.profile_into(x, &mut out);
        Ok(out)
    }

    /// Writes `m_k(x)` into `out` without checking dimensions.
    pub fn profile_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        if self.d == 1 {
            let mut p = 1.0;
            for o in out.iter_mut() {
                p *= x[0];
                *o = p;
            }
            return;
        }
        let k = self.k as usize;
        let mut powers = vec![1.0; self.d * (k + 1)];
        for (i, &xi) in x.iter().enumerate() {
            for e in 1..=k {
                powers[i * (k + 1) + e] = powers[i * (k + 1) + e - 1] * xi;
            }
        }
        for (o, alpha) in out.iter_mut().zip(&self.indices) {
            *o = alpha
                .exponents()
                .iter()
                .enumerate()
                .map(|(i, &a)| powers[i * (k + 1) + a as usize])
                .product();
        }
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::Dimension {
                expected: self.d,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Position of `α` in the canonical order.
    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.indices.binary_search(alpha).ok()
    }
}

/// Enumerates the monomial basis of degree `k` in `d` variables.
pub fn enumerate_basis(d: usize, k: u32) -> Result<MonomialBasis> {
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let t_k = binomial(d as u64 + k as u64, k as u64)?;
    if t_k > 1 << 24 {
        return Err(Error::invalid(format!("basis too large: t_k = {t_k}")));
    }
    let mut indices = Vec::with_capacity(t_k as usize - 1);
    let mut current = vec![0u32; d];
    push_lex(&mut indices, &mut current, 0, k);
    indices.retain(|a| a.order() > 0);
    Ok(MonomialBasis { d, k, indices })
}

fn push_lex(out: &mut Vec<MultiIndex>, current: &mut [u32], pos: usize, budget: u32) {
    if pos == current.len() {
        out.push(MultiIndex(current.to_vec()));
        return;
    }
    for a in 0..=budget {
        current[pos] = a;
        push_lex(out, current, pos + 1, budget - a);
    }
    current[pos] = 0;
}

/// `B·(2(d+k))^{3k}`: ℓ1 bound on the coefficients of any degree-`k` polynomial
/// bounded by `B` on `[0,1]^d`.
pub fn coeff_l1_bound(bound: f64, d: usize, k: u32) -> f64 {
    bound * (2.0 * (d as f64 + k as f64)).powi(3 * k as i32)
}

/// A polynomial `q_v(x) = v·m_k(x)` with zero constant term.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyCoeffs {
    basis: Arc<MonomialBasis>,
    coeffs: Vec<f64>,
}

impl PolyCoeffs {
    pub fn new(basis: Arc<MonomialBasis>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::Dimension {
                expected: basis.len(),
                got: coeffs.len(),
            });
        }
        Ok(PolyCoeffs { basis, coeffs })
    }

    pub fn zeros(basis: Arc<MonomialBasis>) -> Self {
        let coeffs = vec![0.0; basis.len()];
        PolyCoeffs { basis, coeffs }
    }

    /// Convenience constructor: builds the basis too.
    pub fn from_vec(d: usize, k: u32, coeffs: Vec<f64>) -> Result<Self> {
        PolyCoeffs::new(Arc::new(MonomialBasis::new(d, k)?), coeffs)
    }

    pub fn basis(&self) -> &Arc<MonomialBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Result<Self> {
        PolyCoeffs::new(self.basis.clone(), coeffs)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Largest `|α|` carrying a nonzero coefficient (0 for the zero polynomial).
    pub fn effective_degree(&self) -> u32 {
        self.basis
            .indices()
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, &c)| c != 0.0)
            .map(|(a, _)| a.order())
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.basis.check_point(x)?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        if self.basis.dim() == 1 {
            // Horner in x: q = x(c1 + x(c2 + ...)).
            let t = x[0];
            let acc = self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c);
            return acc * t;
        }
        let mut m = vec![0.0; self.coeffs.len()];
        self.basis.profile_into(x, &mut m);
        dot(&self.coeffs, &m)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `v·m_k(x)`.
pub fn eval_poly(p: &PolyCoeffs, x: &[f64]) -> Result<f64> {
    p.eval(x)
}

/// `m_k(x)`.
pub fn monomial_profile(basis: &MonomialBasis, x: &[f64]) -> Result<Vec<f64>> {
    basis.profile(x)
}

pub fn multi_index_factorial(alpha: &MultiIndex) -> Result<u128> {
    alpha.factorial()
}

#[derive(Serialize, Deserialize)]
struct PolyCoeffsRepr {
    d: usize,
    k: u32,
    coeffs: Vec<f64>,
}

impl Serialize for PolyCoeffs {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolyCoeffsRepr {
            d: self.basis.dim(),
            k: self.basis.degree(),
            coeffs: self.coeffs.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PolyCoeffs {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let r = PolyCoeffsRepr::deserialize(de)?;
        PolyCoeffs::from_vec(r.d, r.k, r.coeffs).map_err(serde::de::Error::custom)
    }
}

/// Result of the sup-norm oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct SupNorm {
    pub value: f64,
    pub witness: Vec<f64>,
}

/// A refined local extremum of `q` on the cube: signed value and location.
#[derive(Clone, Debug)]
pub(crate) struct Extremum {
    pub value: f64,
    pub point: Vec<f64>,
}

const CANDIDATES: usize = 8;

fn grid_resolution(d: usize, k: u32, tol: f64) -> usize {
    let wanted = (4.0 * k.max(1) as f64 / tol.sqrt()).ceil();
    let cap = match d {
        1 => 512,
        2 => 128,
        3 => 64,
        // keep the grid near 2^20 points
        _ => ((1u64 << 20) as f64).powf(1.0 / d as f64).floor() as usize,
    };
    (wanted.min(cap as f64) as usize).max(2)
}

fn grid_point(mut index: usize, d: usize, res: usize, out: &mut [f64]) {
    let step = 1.0 / (res - 1) as f64;
    for i in (0..d).rev() {
        out[i] = (index % res) as f64 * step;
        index /= res;
    }
}

/// `max_{x∈[0,1]^d} |q_v(x)|` within additive `tol`, with a maximizer.
///
/// Dense grid, then coordinate ascent from the best discrete local maxima.
/// Ties resolve to the lexicographically smallest grid point.
pub fn poly_sup_norm(p: &PolyCoeffs, tol: f64) -> SupNorm {
    let d = p.dim();
    if p.is_zero() {
        return SupNorm {
            value: 0.0,
            witness: vec![0.0; d],
        };
    }
    let best = local_extrema(p, tol)
        .into_iter()
        .fold(None::<Extremum>, |acc, e| match acc {
            Some(a) if a.value.abs() >= e.value.abs() => Some(a),
            _ => Some(e),
        })
        .expect("grid is never empty");
    SupNorm {
        value: best.value.abs(),
        witness: best.point,
    }
}

/// Refined local maxima of `|q|` sorted by decreasing `|q|`, at most [`CANDIDATES`].
pub(crate) fn local_extrema(p: &PolyCoeffs, tol: f64) -> Vec<Extremum> {
    let d = p.dim();
    let res = grid_resolution(d, p.basis().degree(), tol);
    let n = res.pow(d as u32);
    let values: Vec<f64> = par::map_chunks(n, par::CHUNK, |r| {
        let mut x = vec![0.0; d];
        r.map(|i| {
            grid_point(i, d, res, &mut x);
            p.eval_unchecked(&x).abs()
        })
        .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();

    let mut peaks: Vec<usize> = (0..n).filter(|&i| is_discrete_peak(&values, i, d, res)).collect();
    // stable sort keeps ascending index among equal values
    peaks.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    peaks.truncate(CANDIDATES);

    let h = 1.0 / (res - 1) as f64;
    let mut out: Vec<Extremum> = peaks
        .into_iter()
        .map(|i| {
            let mut x = vec![0.0; d];
            grid_point(i, d, res, &mut x);
            refine(p, x, h)
        })
        .collect();
    out.sort_by(|a, b| b.value.abs().total_cmp(&a.value.abs()));
    out
}

fn is_discrete_peak(values: &[f64], i: usize, d: usize, res: usize) -> bool {
    let v = values[i];
    let mut stride = 1;
    for _ in 0..d {
        let coord = (i / stride) % res;
        if coord > 0 && values[i - stride] > v {
            return false;
        }
        if coord + 1 < res && values[i + stride] > v {
            return false;
        }
        stride *= res;
    }
    true
}

fn refine(p: &PolyCoeffs, mut x: Vec<f64>, h: f64) -> Extremum {
    let d = x.len();
    let mut best = p.eval_unchecked(&x).abs();
    let cycles = if d == 1 { 1 } else { 12 };
    for _ in 0..cycles {
        let before = best;
        for i in 0..d {
            let lo = (x[i] - h).max(0.0);
            let hi = (x[i] + h).min(1.0);
            let (xi, val) = golden_max(lo, hi, |t| {
                let mut y = x.clone();
                y[i] = t;
                p.eval_unchecked(&y).abs()
            });
            if val > best {
                best = val;
                x[i] = xi;
            }
        }
        if best - before <= 1e-15 * best.max(1.0) {
            break;
        }
    }
    let value = p.eval_unchecked(&x);
    Extremum { value, point: x }
}

/// Golden-section maximization on `[lo, hi]`, also comparing the endpoints.
fn golden_max<F: Fn(f64) -> f64>(mut lo: f64, mut hi: f64, f: F) -> (f64, f64) {
    let (a0, b0) = (lo, hi);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - g * (hi - lo);
    let mut e = lo + g * (hi - lo);
    let mut fc = f(c);
    let mut fe = f(e);
    for _ in 0..80 {
        if hi - lo < 1e-13 {
            break;
        }
        if fc >= fe {
            hi = e;
            e = c;
            fe = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = e;
            fc = fe;
            e = lo + g * (hi - lo);
            fe = f(e);
        }
    }
    let mid = 0.5 * (lo + hi);
    [(mid, f(mid)), (a0, f(a0)), (b0, f(b0))]
        .into_iter()
        .fold(
            (mid, f64::NEG_INFINITY),
            |acc, (t, v)| if v > acc.1 { (t, v) } else { acc },
        )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basis_counts_match_binomial() {
        for d in 1..=6 {
            for k in 0..=10 {
                let b = enumerate_basis(d, k).unwrap();
                assert_eq!(
                    b.len() as u128,
                    binomial((d + k as usize) as u64, k as u64).unwrap() - 1
                );
                assert_eq!(b.t_k() - 1, b.len() as u128);
            }
        }
    }

    #[test]
    fn basis_examples() {
        let b = enumerate_basis(1, 3).unwrap();
        let got: Vec<_> = b.indices().iter().map(|a| a.exponents().to_vec()).collect();
        assert_eq!(got, vec![vec![1], vec![2], vec![3]]);
        assert_eq!(enumerate_basis(2, 2).unwrap().len(), 5);
        assert!(enumerate_basis(3, 0).unwrap().is_empty());
        assert!(enumerate_basis(0, 2).is_err());
    }

    #[test]
    fn ordering_is_strict_lexicographic() {
        let b = enumerate_basis(3, 4).unwrap();
        assert!(b.indices().windows(2).all(|w| w[0] < w[1]));
        assert!(b.indices().iter().all(|a| a.order() > 0 && a.order() <= 4));
        let first: Vec<_> = enumerate_basis(2, 2)
            .unwrap()
            .indices()
            .iter()
            .map(|a| a.exponents().to_vec())
            .collect();
        assert_eq!(first, vec![vec![0, 1], vec![0, 2], vec![1, 0], vec![1, 1], vec![2, 0]]);
    }

    #[test]
    fn profile_examples() {
        let b = enumerate_basis(3, 2).unwrap();
        assert!(b.profile(&[0.0, 0.0, 0.0]).unwrap().iter().all(|&v| v == 0.0));
        let b = enumerate_basis(1, 2).unwrap();
        assert_eq!(b.profile(&[0.5]).unwrap(), vec![0.5, 0.25]);
        let b = enumerate_basis(2, 1).unwrap();
        assert_eq!(b.profile(&[1.0, 1.0]).unwrap(), vec![1.0, 1.0]);
        assert!(matches!(b.profile(&[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn profile_matches_direct_monomials() {
        let b = enumerate_basis(3, 4).unwrap();
        let x = [0.3, 0.7, 0.9];
        let m = b.profile(&x).unwrap();
        for (a, v) in b.indices().iter().zip(m) {
            assert!((a.monomial(&x) - v).abs() < 1e-15);
        }
    }

    #[test]
    fn eval_examples() {
        let p = PolyCoeffs::from_vec(2, 2, vec![0.0; 5]).unwrap();
        assert_eq!(p.eval(&[0.3, 0.4]).unwrap(), 0.0);
        let p = PolyCoeffs::from_vec(2, 2, vec![1.0, -2.0, 3.0, 0.5, 1.5]).unwrap();
        assert_eq!(p.eval(&[0.0, 0.0]).unwrap(), 0.0);
        let p = PolyCoeffs::from_vec(1, 2, vec![1.0, -1.0]).unwrap();
        assert!((p.eval(&[0.5]).unwrap() - 0.25).abs() < 1e-15);
        assert!(p.eval(&[0.5, 0.1]).is_err());
        assert!(PolyCoeffs::from_vec(1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn factorial_examples() {
        assert_eq!(MultiIndex::new(vec![0, 0]).factorial().unwrap(), 1);
        assert_eq!(MultiIndex::new(vec![2, 3]).factorial().unwrap(), 12);
        assert_eq!(MultiIndex::new(vec![1, 1, 1]).factorial().unwrap(), 1);
        assert_eq!(
            MultiIndex::new(vec![30]).factorial().unwrap(),
            265252859812191058636308480000000
        );
        assert!(matches!(MultiIndex::new(vec![40]).factorial(), Err(Error::Overflow(_))));
    }

    #[test]
    fn coeff_bound_examples() {
        assert_eq!(coeff_l1_bound(1.0, 1, 1), 64.0);
        assert_eq!(coeff_l1_bound(2.0, 1, 1), 128.0);
        assert_eq!(coeff_l1_bound(1.0, 2, 2), 262144.0);
    }

    #[test]
    fn sup_norm_examples() {
        let z = PolyCoeffs::from_vec(2, 3, vec![0.0; 9]).unwrap();
        assert_eq!(poly_sup_norm(&z, 1e-6).value, 0.0);
        let p = PolyCoeffs::from_vec(1, 1, vec![2.0]).unwrap();
        let s = poly_sup_norm(&p, 1e-6);
        assert!((s.value - 2.0).abs() < 1e-12 && (s.witness[0] - 1.0).abs() < 1e-12);
        let p = PolyCoeffs::from_vec(1, 2, vec![1.0, -1.0]).unwrap();
        let s = poly_sup_norm(&p, 1e-6);
        assert!((s.value - 0.25).abs() < 1e-12, "{s:?}");
        assert!((s.witness[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn sup_norm_2d_interior_peak() {
        // q = x + y - x² - y², max 0.5 at (1/2, 1/2); order (0,1),(0,2),(1,0),(1,1),(2,0)
        let p = PolyCoeffs::from_vec(2, 2, vec![1.0, -1.0, 1.0, 0.0, -1.0]).unwrap();
        let s = poly_sup_norm(&p, 1e-6);
        assert!((s.value - 0.5).abs() < 1e-10, "{s:?}");
    }

    #[test]
    fn json_shape() {
        let p = PolyCoeffs::from_vec(1, 2, vec![1.0, -1.0]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"d":1,"k":2,"coeffs":[1.0,-1.0]}"#);
        let back: PolyCoeffs = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<PolyCoeffs>(r#"{"d":1,"k":2,"coeffs":[1.0]}"#).is_err());
    }

    fn coeffs_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-3.0f64..3.0, len)
    }

    proptest! {
        #[test]
        fn eval_is_linear(v1 in coeffs_strategy(9), v2 in coeffs_strategy(9),
                          a in -2.0f64..2.0, b in -2.0f64..2.0,
                          x in proptest::collection::vec(0.0f64..1.0, 2)) {
            let basis = Arc::new(enumerate_basis(2, 3).unwrap());
            let p1 = PolyCoeffs::new(basis.clone(), v1.clone()).unwrap();
            let p2 = PolyCoeffs::new(basis.clone(), v2.clone()).unwrap();
            let mix = PolyCoeffs::new(basis, v1.iter().zip(&v2).map(|(u, w)| a * u + b * w).collect()).unwrap();
            let lhs = mix.eval(&x).unwrap();
            let rhs = a * p1.eval(&x).unwrap() + b * p2.eval(&x).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn sup_norm_dominates_pointwise(v in coeffs_strategy(4), seed in 0u64..1000) {
            use rand::Rng;
            let p = PolyCoeffs::from_vec(1, 4, v).unwrap();
            let s = poly_sup_norm(&p, 1e-6);
            let mut rng = crate::rng::stream(seed, "proptest-sup", 0);
            for _ in 0..1000 {
                let x = [rng.random::<f64>()];
                prop_assert!(s.value + 1e-9 >= p.eval(&x).unwrap().abs());
            }
        }

        #[test]
        fn sup_norm_dominates_pointwise_2d(v in coeffs_strategy(9), seed in 0u64..1000) {
            use rand::Rng;
            let p = PolyCoeffs::from_vec(2, 3, v).unwrap();
            let s = poly_sup_norm(&p, 1e-6);
            let mut rng = crate::rng::stream(seed, "proptest-sup2", 0);
            for _ in 0..1000 {
                let x = [rng.random::<f64>(), rng.random::<f64>()];
                prop_assert!(s.value + 1e-9 >= p.eval(&x).unwrap().abs());
            }
        }

        #[test]
        fn coefficient_bound_holds(v in coeffs_strategy(5), d in 1usize..3) {
            let k = if d == 1 { 5 } else { 2 };
            let p = PolyCoeffs::from_vec(d, k, v).unwrap();
            let b = poly_sup_norm(&p, 1e-6).value;
            let l1: f64 = p.coeffs().iter().map(|c| c.abs()).sum();
            prop_assert!(l1 <= coeff_l1_bound(b, d, k) * (1.0 + 1e-9));
        }
    }
}
