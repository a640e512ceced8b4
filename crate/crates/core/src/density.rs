//! Truncated exponential-family densities `P(f,S) ∝ 1_S(x)·e^{f(x)}`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::basis::{MonomialBasis, MultiIndex, PolyCoeffs};
use crate::error::{Error, Result};
use crate::integrate::{composite, gauss_legendre, Estimate, QuadratureSpec, Rule, SurvivalSet, PANEL_NODES};
use crate::rng;

/// Anything usable as a log-density on `[0,1]^d`.
pub trait LogDensityFn: Send + Sync {
    fn dim(&self) -> usize;
    fn log_value(&self, x: &[f64]) -> f64;
}

impl LogDensityFn for PolyCoeffs {
    fn dim(&self) -> usize {
        PolyCoeffs::dim(self)
    }

    fn log_value(&self, x: &[f64]) -> f64 {
        self.eval_unchecked(x)
    }
}

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type DerivativeFn = Arc<dyn Fn(&MultiIndex, &[f64]) -> f64 + Send + Sync>;

/// A log-density `f` with its class metadata: `sup|f| ≤ B` and
/// `‖D^k f‖∞ ≤ M^k` for `k ≥ k₀`.
#[derive(Clone)]
pub struct LogDensity {
    name: String,
    d: usize,
    f: ScalarFn,
    bound: f64,
    smoothness: f64,
    k0: u32,
    derivatives: Option<DerivativeFn>,
}

impl fmt::Debug for LogDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LogDensity")
            .field("name", &self.name)
            .field("d", &self.d)
            .field("bound", &self.bound)
            .field("smoothness", &self.smoothness)
            .field("derivatives", &self.derivatives.is_some())
            .finish()
    }
}

const TAG_BOUND_CHECK: &str = "log-density-bound-check";
const BOUND_CHECK_POINTS: usize = 1000;

impl LogDensity {
    /// Wraps `f`, checking `|f| ≤ bound` on 10³ seeded random points.
    pub fn new<F>(name: impl Into<String>, d: usize, f: F, bound: f64, smoothness: f64) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if d == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if !(bound >= 0.0) || !(smoothness >= 0.0) {
            return Err(Error::invalid("bound and smoothness must be nonnegative"));
        }
        let density = LogDensity {
            name: name.into(),
            d,
            f: Arc::new(f),
            bound,
            smoothness,
            k0: 1,
            derivatives: None,
        };
        let mut rng = rng::stream(0, TAG_BOUND_CHECK, 0);
        let mut x = vec![0.0; d];
        for _ in 0..BOUND_CHECK_POINTS {
            for xi in x.iter_mut() {
                *xi = rng.random::<f64>();
            }
            let v = (density.f)(&x);
            if !(v.abs() <= bound * (1.0 + 1e-12) + 1e-12) {
                return Err(Error::invalid(format!(
                    "`{}`: |f({x:?})| = {} exceeds the declared bound {bound}",
                    density.name,
                    v.abs()
                )));
            }
        }
        Ok(density)
    }

    /// Attaches an oracle for `D_α f(x)`.
    pub fn with_derivatives<D>(mut self, derivatives: D) -> Self
    where
        D: Fn(&MultiIndex, &[f64]) -> f64 + Send + Sync + 'static,
    {
        self.derivatives = Some(Arc::new(derivatives));
        self
    }

    pub fn with_k0(mut self, k0: u32) -> Self {
        self.k0 = k0;
        self
    }

    /// `f ≡ 0` on `[0,1]^d` (uniform density).
    pub fn zero(d: usize) -> Result<Self> {
        Ok(LogDensity::new("zero", d, |_| 0.0, 0.0, 0.0)?.with_derivatives(|_, _| 0.0))
    }

    /// `f(x) = sin(10·x)` on `[0,1]`, with `B = 1`, `M = 10`.
    pub fn sin10() -> Self {
        LogDensity::new("sin10", 1, |x| (10.0 * x[0]).sin(), 1.0, 10.0)
            .expect("sin is bounded by 1")
            .with_derivatives(|alpha, x| {
                let n = alpha.exponents()[0] as i32;
                10f64.powi(n) * (10.0 * x[0] + n as f64 * std::f64::consts::FRAC_PI_2).sin()
            })
    }

    /// `f(x) = exp(a·(x₁+⋯+x_d))`, with `B = e^{|a|d}`, `M = |a|`.
    pub fn exp_scaled(d: usize, a: f64) -> Result<Self> {
        let bound = (a.abs() * d as f64).exp();
        Ok(LogDensity::new(
            format!("exp_scaled({a})"),
            d,
            move |x| (a * x.iter().sum::<f64>()).exp(),
            bound,
            a.abs(),
        )?
        .with_derivatives(move |alpha, x| a.powi(alpha.order() as i32) * (a * x.iter().sum::<f64>()).exp()))
    }

    /// The polynomial `q_v` as a log-density with exact derivatives.
    pub fn from_poly(p: &PolyCoeffs) -> Self {
        let bound = crate::basis::poly_sup_norm(p, 1e-8).value * (1.0 + 1e-9) + 1e-12;
        let smoothness = poly_smoothness(p);
        let eval = p.clone();
        let deriv = p.clone();
        LogDensity {
            name: "polynomial".into(),
            d: p.dim(),
            f: Arc::new(move |x| eval.eval_unchecked(x)),
            bound,
            smoothness,
            k0: 1,
            derivatives: Some(Arc::new(move |alpha, x| poly_derivative(&deriv, alpha, x))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn k0(&self) -> u32 {
        self.k0
    }

    pub fn has_derivatives(&self) -> bool {
        self.derivatives.is_some()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    pub fn derivative(&self, alpha: &MultiIndex, x: &[f64]) -> Result<f64> {
        let d = self
            .derivatives
            .as_ref()
            .ok_or_else(|| Error::MissingDerivatives(self.name.clone()))?;
        Ok(d(alpha, x))
    }
}

impl LogDensityFn for LogDensity {
    fn dim(&self) -> usize {
        self.d
    }

    fn log_value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

fn poly_derivative(p: &PolyCoeffs, alpha: &MultiIndex, x: &[f64]) -> f64 {
    p.basis()
        .indices()
        .iter()
        .zip(p.coeffs())
        .filter(|(beta, _)| beta.exponents().iter().zip(alpha.exponents()).all(|(b, a)| b >= a))
        .map(|(beta, &c)| {
            let mut term = c;
            for ((&b, &a), &xi) in beta.exponents().iter().zip(alpha.exponents()).zip(x) {
                let falling: f64 = ((b - a + 1)..=b).map(|j| j as f64).product();
                term *= falling * xi.powi((b - a) as i32);
            }
            term
        })
        .sum()
}

/// Smallest `M` with `Σ_α |c_α|·|α|!/(|α|−j)! ≤ M^j` for every order `j`.
fn poly_smoothness(p: &PolyCoeffs) -> f64 {
    let k = p.effective_degree();
    (1..=k)
        .map(|j| {
            let total: f64 = p
                .basis()
                .indices()
                .iter()
                .zip(p.coeffs())
                .filter(|(a, _)| a.order() >= j)
                .map(|(a, c)| {
                    let n = a.order();
                    c.abs() * ((n - j + 1)..=n).map(|i| i as f64).product::<f64>()
                })
                .sum();
            total.powf(1.0 / j as f64)
        })
        .fold(0.0, f64::max)
}

/// Either a general log-density or a polynomial one.
#[derive(Clone, Debug)]
pub enum Source {
    Function(LogDensity),
    Poly(PolyCoeffs),
}

impl From<LogDensity> for Source {
    fn from(f: LogDensity) -> Self {
        Source::Function(f)
    }
}

impl From<PolyCoeffs> for Source {
    fn from(p: PolyCoeffs) -> Self {
        Source::Poly(p)
    }
}

impl LogDensityFn for Source {
    fn dim(&self) -> usize {
        match self {
            Source::Function(f) => f.dim(),
            Source::Poly(p) => LogDensityFn::dim(p),
        }
    }

    fn log_value(&self, x: &[f64]) -> f64 {
        match self {
            Source::Function(f) => f.log_value(x),
            Source::Poly(p) => p.eval_unchecked(x),
        }
    }
}

/// `ψ(f,S) = log ∫_S e^f`, max-shifted over the quadrature nodes.
pub fn log_partition<F: LogDensityFn + ?Sized>(f: &F, set: &SurvivalSet, spec: &QuadratureSpec) -> Result<f64> {
    if f.dim() != set.dim() {
        return Err(Error::Dimension {
            expected: set.dim(),
            got: f.dim(),
        });
    }
    if !(set.volume_estimate() > 0.0) {
        return Err(Error::EmptySet);
    }
    let rule = Rule::for_set(set, spec)?;
    log_partition_on(f, &rule)
}

pub(crate) fn log_partition_on<F: LogDensityFn + ?Sized>(f: &F, rule: &Rule) -> Result<f64> {
    let values = rule.map(|x| f.log_value(x));
    logsumexp(&values, rule)
}

fn logsumexp(values: &[f64], rule: &Rule) -> Result<f64> {
    if let Some(i) = values.iter().position(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::NonFinite {
            point: rule.point(i).to_vec(),
        });
    }
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::Underflow);
    }
    let z: f64 = values
        .iter()
        .enumerate()
        .map(|(i, v)| rule.weight(i) * (v - m).exp())
        .sum();
    if !(z > 0.0) {
        return Err(Error::Underflow);
    }
    Ok(m + z.ln())
}

/// `P(f,S)` with its log-partition computed eagerly.
#[derive(Clone, Debug)]
pub struct TruncatedDensity {
    source: Source,
    set: SurvivalSet,
    psi: f64,
    quad: QuadratureSpec,
}

impl TruncatedDensity {
    pub fn new(source: impl Into<Source>, set: SurvivalSet, quad: QuadratureSpec) -> Result<Self> {
        let source = source.into();
        let psi = log_partition(&source, &set, &quad)?;
        Ok(TruncatedDensity { source, set, psi, quad })
    }

    /// Same density, log-partition recomputed under `quad`.
    pub fn with_quadrature(&self, quad: QuadratureSpec) -> Result<Self> {
        TruncatedDensity::new(self.source.clone(), self.set.clone(), quad)
    }

    /// Same log-density conditioned on another set.
    pub fn conditioned_on(&self, set: SurvivalSet) -> Result<Self> {
        TruncatedDensity::new(self.source.clone(), set, self.quad)
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    pub fn set(&self) -> &SurvivalSet {
        &self.set
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn quadrature(&self) -> &QuadratureSpec {
        &self.quad
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    /// `log pdf`, `-∞` outside the set.
    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        if self.set.contains(x) {
            self.source.log_value(x) - self.psi
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        if self.set.contains(x) {
            (self.source.log_value(x) - self.psi).exp()
        } else {
            0.0
        }
    }
}

pub fn pdf(p: &TruncatedDensity, x: &[f64]) -> f64 {
    p.pdf(x)
}

/// `KL(P‖Q) = ∫_S p log(p/q)` for densities on the same set.
///
/// Both densities are renormalized on the same quadrature rule, so the result
/// is the KL of two discrete measures and is never negative beyond rounding.
pub fn kl_divergence(p: &TruncatedDensity, q: &TruncatedDensity, spec: &QuadratureSpec) -> Result<f64> {
    if !p.set.same_as(&q.set) {
        return Err(Error::SetMismatch);
    }
    let rule = Rule::for_set(&p.set, spec)?;
    let fp = rule.map(|x| p.source.log_value(x));
    let fq = rule.map(|x| q.source.log_value(x));
    let psi_p = logsumexp(&fp, &rule)?;
    let psi_q = match logsumexp(&fq, &rule) {
        Ok(v) => v,
        Err(Error::Underflow) => {
            return Err(Error::SupportMismatch {
                point: rule.point(0).to_vec(),
            })
        }
        Err(e) => return Err(e),
    };
    let mut total = 0.0;
    for i in 0..rule.len() {
        let lp = fp[i] - psi_p;
        let lq = fq[i] - psi_q;
        let dens = lp.exp();
        if dens == 0.0 {
            continue;
        }
        if !lq.is_finite() {
            return Err(Error::SupportMismatch {
                point: rule.point(i).to_vec(),
            });
        }
        total += rule.weight(i) * dens * (lp - lq);
    }
    Ok(total.max(0.0))
}

/// `½∫|p − q|` over the union of supports.
pub fn tv_distance(p: &TruncatedDensity, q: &TruncatedDensity, spec: &QuadratureSpec) -> Result<f64> {
    tv_on(p, q, spec)
}

/// TV with an error estimate from doubling the resolution.
pub fn tv_distance_with_error(p: &TruncatedDensity, q: &TruncatedDensity, spec: &QuadratureSpec) -> Result<Estimate> {
    let coarse = tv_on(p, q, spec)?;
    let fine = tv_on(p, q, &spec.refined())?;
    Ok(Estimate {
        value: coarse,
        error: (fine - coarse).abs(),
    })
}

fn tv_on(p: &TruncatedDensity, q: &TruncatedDensity, spec: &QuadratureSpec) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::Dimension {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    if let (Some(a), Some(b)) = (p.set.exact_1d(), q.set.exact_1d()) {
        if spec.mode != crate::integrate::QuadMode::MonteCarlo {
            return Ok(tv_1d(p, q, a, b, spec));
        }
    }
    let d = p.dim();
    let diff = |x: &[f64]| (p.pdf(x) - q.pdf(x)).abs();
    if d <= 3 && spec.mode != crate::integrate::QuadMode::MonteCarlo {
        if let (Some((plo, phi)), Some((qlo, qhi))) = (p.set.as_box(), q.set.as_box()) {
            return Ok(0.5 * tv_boxes(&diff, &[(&plo, &phi), (&qlo, &qhi)], spec)?);
        }
    }
    let cube = SurvivalSet::cube(d)?;
    let rule = Rule::for_set(
        &cube,
        &QuadratureSpec::monte_carlo(spec.resolution.max(100_000), spec.seed),
    )?;
    Ok(0.5 * rule.integrate(diff)?.value)
}

/// 1D TV: integrate on pieces cut at every interval endpoint, then at every
/// sign change of `p − q`, so no panel contains a jump or a kink.
fn tv_1d(p: &TruncatedDensity, q: &TruncatedDensity, a: &[[f64; 2]], b: &[[f64; 2]], spec: &QuadratureSpec) -> f64 {
    let mut cuts: Vec<f64> = vec![0.0, 1.0];
    cuts.extend(a.iter().chain(b).flatten());
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let per = PANEL_NODES.min(spec.resolution.max(2));
    let (nodes, weights) = gauss_legendre(per);
    let panels_per_unit = (spec.resolution / PANEL_NODES).max(1) as f64;
    let diff = |x: f64| p.pdf(&[x]) - q.pdf(&[x]);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let mid = [0.5 * (lo + hi)];
        if !p.set.contains(&mid) && !q.set.contains(&mid) {
            continue;
        }
        // Interior evaluations only: pdf jumps exactly at the endpoints.
        let inner = |x: f64| diff(x.clamp(lo + (hi - lo) * 1e-14, hi - (hi - lo) * 1e-14));
        let panels = ((panels_per_unit * (hi - lo)).ceil() as usize).max(2);
        let h = (hi - lo) / panels as f64;
        for k in 0..panels {
            let (pa, pb) = (lo + k as f64 * h, lo + (k + 1) as f64 * h);
            let mut pts = vec![pa];
            pts.extend(nodes.iter().map(|t| pa + 0.5 * h * (t + 1.0)));
            pts.push(pb);
            let mut roots = Vec::new();
            let mut prev = (pts[0], inner(pts[0]));
            for &x in &pts[1..] {
                let v = inner(x);
                if prev.1 * v < 0.0 {
                    roots.push(bisect(&inner, prev.0, x, prev.1));
                }
                prev = (x, v);
            }
            let mut edges = vec![pa];
            edges.extend(roots);
            edges.push(pb);
            for e in edges.windows(2) {
                let (ea, eb) = (e[0], e[1]);
                if eb <= ea {
                    continue;
                }
                total += nodes
                    .iter()
                    .zip(&weights)
                    .map(|(t, wt)| 0.5 * (eb - ea) * wt * inner(ea + 0.5 * (eb - ea) * (t + 1.0)).abs())
                    .sum::<f64>();
            }
        }
    }
    0.5 * total
}

fn bisect<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, fa: f64) -> f64 {
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Tensor rule on the grid of sub-boxes cut at every box face.
fn tv_boxes<G>(g: &G, boxes: &[(&Vec<f64>, &Vec<f64>)], spec: &QuadratureSpec) -> Result<f64>
where
    G: Fn(&[f64]) -> f64 + Sync + Send,
{
    let d = boxes[0].0.len();
    let per = PANEL_NODES.min(spec.resolution.max(2));
    let panels_per_unit = (spec.resolution / PANEL_NODES).max(1) as f64;
    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..d)
        .map(|i| {
            let mut cuts = vec![0.0, 1.0];
            for (lo, hi) in boxes {
                cuts.push(lo[i]);
                cuts.push(hi[i]);
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let mut xs = Vec::new();
            let mut ws = Vec::new();
            for w in cuts.windows(2) {
                let panels = ((panels_per_unit * (w[1] - w[0])).ceil() as usize).max(1);
                let (x, wt) = composite(w[0], w[1], panels, per);
                xs.extend(x);
                ws.extend(wt);
            }
            (xs, ws)
        })
        .collect();
    let n: usize = axes.iter().map(|a| a.0.len()).product();
    let total = crate::par::sum(n, |mut idx| {
        let mut x = [0.0; 3];
        let mut w = 1.0;
        for i in (0..d).rev() {
            let m = axes[i].0.len();
            let j = idx % m;
            idx /= m;
            x[i] = axes[i].0[j];
            w *= axes[i].1[j];
        }
        w * g(&x[..d])
    });
    Ok(total)
}

/// Taylor polynomial of order `k` at `center`, returned as coefficients with the
/// constant term removed, together with that constant `f̄_k(0)`.
pub fn taylor_expansion(f: &LogDensity, k: u32, center: &[f64]) -> Result<(PolyCoeffs, f64)> {
    if center.len() != f.dim() {
        return Err(Error::Dimension {
            expected: f.dim(),
            got: center.len(),
        });
    }
    if !f.has_derivatives() {
        return Err(Error::MissingDerivatives(f.name.clone()));
    }
    let d = f.dim();
    let basis = Arc::new(MonomialBasis::new(d, k)?);
    let mut coeffs = vec![0.0; basis.len()];
    let mut constant = 0.0;
    let mut all = vec![MultiIndex::zero(d)];
    all.extend(basis.indices().iter().cloned());
    for alpha in &all {
        let c = f.derivative(alpha, center)? / alpha.factorial()? as f64;
        if c == 0.0 {
            continue;
        }
        // (x − c)^α expanded: Π_i Σ_{j≤α_i} C(α_i, j) x_i^j (−c_i)^{α_i−j}
        let mut terms: Vec<(Vec<u32>, f64)> = vec![(Vec::new(), c)];
        for (i, &ai) in alpha.exponents().iter().enumerate() {
            let mut next = Vec::with_capacity(terms.len() * (ai as usize + 1));
            for (exps, coef) in &terms {
                for j in 0..=ai {
                    let binom = crate::basis::binomial(ai as u64, j as u64)? as f64;
                    let factor = binom * (-center[i]).powi((ai - j) as i32);
                    if factor == 0.0 {
                        continue;
                    }
                    let mut e = exps.clone();
                    e.push(j);
                    next.push((e, coef * factor));
                }
            }
            terms = next;
        }
        for (exps, coef) in terms {
            let beta = MultiIndex::new(exps);
            match basis.position(&beta) {
                Some(pos) => coeffs[pos] += coef,
                None => constant += coef,
            }
        }
    }
    Ok((PolyCoeffs::new(basis, coeffs)?, constant))
}

/// Degree-`k` Taylor log-density at `center`, constant term dropped.
pub fn taylor_log_density(f: &LogDensity, k: u32, center: &[f64]) -> Result<PolyCoeffs> {
    taylor_expansion(f, k, center).map(|(p, _)| p)
}

/// One row of an exported density curve.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub x: Vec<f64>,
    pub pdf: f64,
    pub log_pdf: f64,
}

/// Density on a uniform grid with `resolution` points per axis (endpoints included).
pub fn density_curve(p: &TruncatedDensity, resolution: usize) -> Vec<CurvePoint> {
    let d = p.dim();
    let res = resolution.max(2);
    let n = res.pow(d as u32);
    crate::par::map(n, |mut idx| {
        let mut x = vec![0.0; d];
        for i in (0..d).rev() {
            x[i] = (idx % res) as f64 / (res - 1) as f64;
            idx /= res;
        }
        let log_pdf = p.log_pdf(&x);
        CurvePoint {
            pdf: log_pdf.exp(),
            log_pdf,
            x,
        }
    })
}
