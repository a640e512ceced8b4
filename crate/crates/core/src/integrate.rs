//! Quadrature over the unit cube and over survival sets.
//!
//! Sets with an exact description (interval unions in 1D, axis-aligned boxes)
//! are integrated with composite Gauss–Legendre rules whose panels never
//! straddle the set boundary. Anything else falls back to Monte Carlo on the
//! cube with the indicator folded into the integrand.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{par, rng};

/// Gauss–Legendre nodes per panel for composite rules.
pub const PANEL_NODES: usize = 32;
/// Cells in the scan that brackets a 1D membership oracle into intervals.
pub const BRACKET_CELLS: usize = 1 << 14;
/// Monte Carlo draws used when a set's volume has to be estimated at construction.
pub const DEFAULT_VOLUME_DRAWS: usize = 1_000_000;

const TAG_VOLUME: &str = "volume";
const TAG_MC_RULE: &str = "mc-rule";

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = ((i as f64 + 0.75) / (n as f64 + 0.5) * PI).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite rule on `[lo, hi]` with `panels` panels of `per_panel` nodes each.
pub(crate) fn composite(lo: f64, hi: f64, panels: usize, per_panel: usize) -> (Vec<f64>, Vec<f64>) {
    let (r, w) = gauss_legendre(per_panel);
    let h = (hi - lo) / panels as f64;
    let mut xs = Vec::with_capacity(panels * per_panel);
    let mut ws = Vec::with_capacity(panels * per_panel);
    for p in 0..panels {
        let a = lo + p as f64 * h;
        for (ri, wi) in r.iter().zip(&w) {
            xs.push(a + 0.5 * h * (ri + 1.0));
            ws.push(0.5 * h * wi);
        }
    }
    (xs, ws)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadMode {
    #[serde(rename = "gauss_legendre_1d")]
    GaussLegendre1d,
    TensorGrid,
    MonteCarlo,
}

impl fmt::Display for QuadMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuadMode::GaussLegendre1d => "gauss_legendre_1d",
            QuadMode::TensorGrid => "tensor_grid",
            QuadMode::MonteCarlo => "monte_carlo",
        })
    }
}

/// How integrals are discretized. `resolution` counts nodes per axis for the
/// Gauss–Legendre modes and total draws for Monte Carlo.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub mode: QuadMode,
    pub resolution: usize,
    #[serde(default)]
    pub seed: u64,
}

impl QuadratureSpec {
    pub fn gauss_legendre(resolution: usize) -> Self {
        QuadratureSpec {
            mode: QuadMode::GaussLegendre1d,
            resolution,
            seed: 0,
        }
    }

    pub fn tensor(resolution: usize) -> Self {
        QuadratureSpec {
            mode: QuadMode::TensorGrid,
            resolution,
            seed: 0,
        }
    }

    pub fn monte_carlo(draws: usize, seed: u64) -> Self {
        QuadratureSpec {
            mode: QuadMode::MonteCarlo,
            resolution: draws,
            seed,
        }
    }

    /// Default discretization for integrands `e^q` with `deg q = k`.
    pub fn for_degree(d: usize, k: u32) -> Self {
        match d {
            1 => Self::gauss_legendre(PANEL_NODES * 64usize.max(8 * k as usize)),
            2 => Self::tensor(PANEL_NODES * 8),
            3 => Self::tensor(PANEL_NODES * 2),
            _ => Self::monte_carlo(DEFAULT_VOLUME_DRAWS, 0),
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::invalid("quadrature resolution must be at least 2"));
        }
        match self.mode {
            QuadMode::GaussLegendre1d if d != 1 => {
                Err(Error::invalid(format!("gauss_legendre_1d requested for d = {d}")))
            }
            QuadMode::TensorGrid if d > 3 => Err(Error::invalid(format!("tensor_grid supports d <= 3, got {d}"))),
            _ => Ok(()),
        }
    }

    pub(crate) fn refined(&self) -> Self {
        QuadratureSpec {
            resolution: self.resolution * 2,
            ..*self
        }
    }

    fn panel_layout(&self) -> (usize, usize) {
        if self.resolution < PANEL_NODES {
            (1, self.resolution)
        } else {
            (self.resolution / PANEL_NODES, PANEL_NODES)
        }
    }

    fn fallback_draws(&self, d: usize) -> usize {
        match self.mode {
            QuadMode::MonteCarlo => self.resolution,
            _ => (self.resolution as f64).powi(d as i32).clamp(100_000.0, 4_000_000.0) as usize,
        }
    }
}

type Membership = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// Geometric description of a survival set.
#[derive(Clone)]
pub enum Region {
    /// The whole cube `[0,1]^d`.
    Cube,
    /// Disjoint, sorted closed intervals in `[0,1]` (d = 1).
    Intervals(Vec<[f64; 2]>),
    /// Axis-aligned box `Π [lo_i, hi_i]`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// `{x : normal·x ≤ offset}`.
    Halfspace { normal: Vec<f64>, offset: f64 },
    /// Euclidean ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// Arbitrary membership oracle.
    Custom(Membership),
}

impl fmt::Debug for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Cube => write!(f, "Cube"),
            Region::Intervals(iv) => write!(f, "Intervals({iv:?})"),
            Region::Box { lo, hi } => write!(f, "Box({lo:?}, {hi:?})"),
            Region::Halfspace { normal, offset } => write!(f, "Halfspace({normal:?} <= {offset})"),
            Region::Ball { center, radius } => write!(f, "Ball({center:?}, {radius})"),
            Region::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Region {
    fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Cube => true,
            Region::Intervals(iv) => iv.iter().any(|&[a, b]| x[0] >= a && x[0] <= b),
            Region::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(&xi, (&l, &h))| xi >= l && xi <= h),
            Region::Halfspace { normal, offset } => normal.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() <= *offset,
            Region::Ball { center, radius } => {
                center.iter().zip(x).map(|(c, xi)| (xi - c) * (xi - c)).sum::<f64>() <= radius * radius
            }
            Region::Custom(f) => f(x),
        }
    }

    fn same_as(&self, other: &Region) -> bool {
        match (self, other) {
            (Region::Cube, Region::Cube) => true,
            (Region::Intervals(a), Region::Intervals(b)) => a == b,
            (Region::Box { lo: a, hi: b }, Region::Box { lo: c, hi: e }) => a == c && b == e,
            (Region::Halfspace { normal: a, offset: b }, Region::Halfspace { normal: c, offset: e }) => {
                a == c && b == e
            }
            (Region::Ball { center: a, radius: b }, Region::Ball { center: c, radius: e }) => a == c && b == e,
            (Region::Custom(a), Region::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

/// A measurable subset `S` of `[0,1]^d` with its (estimated) volume.
#[derive(Clone, Debug)]
pub struct SurvivalSet {
    d: usize,
    region: Region,
    volume: f64,
    volume_stderr: f64,
}

#[derive(Serialize, Deserialize)]
struct IntervalsRepr {
    d: usize,
    intervals: Vec<[f64; 2]>,
}

impl SurvivalSet {
    pub fn cube(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if d == 1 {
            return Self::intervals(vec![[0.0, 1.0]]);
        }
        Ok(SurvivalSet {
            d,
            region: Region::Cube,
            volume: 1.0,
            volume_stderr: 0.0,
        })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::intervals(vec![[lo, hi]])
    }

    /// Union of intervals in `[0,1]`. Touching or overlapping pieces are merged.
    pub fn intervals(mut iv: Vec<[f64; 2]>) -> Result<Self> {
        for &[a, b] in &iv {
            if !(a.is_finite() && b.is_finite() && 0.0 <= a && a < b && b <= 1.0) {
                return Err(Error::invalid(format!("interval [{a}, {b}] not inside [0,1]")));
            }
        }
        iv.sort_by(|x, y| x[0].total_cmp(&y[0]));
        let mut merged: Vec<[f64; 2]> = Vec::with_capacity(iv.len());
        for [a, b] in iv {
            match merged.last_mut() {
                Some(last) if a <= last[1] => last[1] = last[1].max(b),
                _ => merged.push([a, b]),
            }
        }
        if merged.is_empty() {
            return Err(Error::EmptySet);
        }
        let volume = merged.iter().map(|[a, b]| b - a).sum();
        Ok(SurvivalSet {
            d: 1,
            region: Region::Intervals(merged),
            volume,
            volume_stderr: 0.0,
        })
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::invalid("box corners must have equal, nonzero length"));
        }
        for (&l, &h) in lo.iter().zip(&hi) {
            if !(0.0 <= l && l < h && h <= 1.0) {
                return Err(Error::invalid(format!("box side [{l}, {h}] not inside [0,1]")));
            }
        }
        if lo.len() == 1 {
            return Self::intervals(vec![[lo[0], hi[0]]]);
        }
        let volume = lo.iter().zip(&hi).map(|(l, h)| h - l).product();
        Ok(SurvivalSet {
            d: lo.len(),
            region: Region::Box { lo, hi },
            volume,
            volume_stderr: 0.0,
        })
    }

    /// `{x ∈ [0,1]^d : normal·x ≤ offset}`.
    pub fn halfspace(normal: Vec<f64>, offset: f64) -> Result<Self> {
        if normal.is_empty() {
            return Err(Error::invalid("halfspace normal must be nonempty"));
        }
        if normal.len() == 1 {
            let a = normal[0];
            let (lo, hi) = if a > 0.0 {
                (0.0, (offset / a).min(1.0))
            } else if a < 0.0 {
                ((offset / a).max(0.0), 1.0)
            } else if offset >= 0.0 {
                (0.0, 1.0)
            } else {
                return Err(Error::EmptySet);
            };
            if hi <= lo {
                return Err(Error::EmptySet);
            }
            return Self::interval(lo, hi);
        }
        Self::with_estimated_volume(normal.len(), Region::Halfspace { normal, offset })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || !(radius > 0.0) {
            return Err(Error::invalid("ball needs a center and a positive radius"));
        }
        if center.len() == 1 {
            let lo = (center[0] - radius).max(0.0);
            let hi = (center[0] + radius).min(1.0);
            if hi <= lo {
                return Err(Error::EmptySet);
            }
            return Self::interval(lo, hi);
        }
        Self::with_estimated_volume(center.len(), Region::Ball { center, radius })
    }

    /// Set given only by a membership predicate. In 1D it is bracketed into an
    /// interval union on a `2^-14` scan; otherwise its volume is estimated by
    /// Monte Carlo.
    pub fn from_membership<F>(d: usize, membership: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        if d == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if d == 1 {
            return Self::intervals(bracket_intervals(&membership));
        }
        Self::with_estimated_volume(d, Region::Custom(Arc::new(membership)))
    }

    fn with_estimated_volume(d: usize, region: Region) -> Result<Self> {
        let mut set = SurvivalSet {
            d,
            region,
            volume: 1.0,
            volume_stderr: 0.0,
        };
        let (v, se) = estimate_volume(&set, DEFAULT_VOLUME_DRAWS, 0)?;
        set.volume = v;
        set.volume_stderr = se;
        Ok(set)
    }

    /// Replaces the Monte Carlo volume estimate with one from `n` fresh draws.
    pub fn with_volume_estimate(mut self, n: usize, seed: u64) -> Result<Self> {
        let (v, se) = estimate_volume(&self, n, seed)?;
        self.volume = v;
        self.volume_stderr = se;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|&xi| (0.0..=1.0).contains(&xi)) && self.region.contains(x)
    }

    pub fn volume_estimate(&self) -> f64 {
        self.volume
    }

    pub fn volume_stderr(&self) -> f64 {
        self.volume_stderr
    }

    /// The interval union, when `d = 1`.
    pub fn exact_1d(&self) -> Option<&[[f64; 2]]> {
        match &self.region {
            Region::Intervals(iv) => Some(iv),
            _ => None,
        }
    }

    /// Corners when the set is an axis-aligned box (including the cube).
    pub fn as_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match &self.region {
            Region::Cube => Some((vec![0.0; self.d], vec![1.0; self.d])),
            Region::Box { lo, hi } => Some((lo.clone(), hi.clone())),
            Region::Intervals(iv) if iv.len() == 1 => Some((vec![iv[0][0]], vec![iv[0][1]])),
            _ => None,
        }
    }

    pub fn is_full_cube(&self) -> bool {
        match &self.region {
            Region::Cube => true,
            Region::Intervals(iv) => iv.len() == 1 && iv[0] == [0.0, 1.0],
            Region::Box { lo, hi } => lo.iter().all(|&l| l == 0.0) && hi.iter().all(|&h| h == 1.0),
            _ => false,
        }
    }

    /// Whether both values describe the same set (custom oracles compare by identity).
    pub fn same_as(&self, other: &SurvivalSet) -> bool {
        self.d == other.d && (self.region.same_as(&other.region) || (self.is_full_cube() && other.is_full_cube()))
    }

    /// JSON form `{"d":1,"intervals":[[a,b],...]}`; only interval unions serialize.
    pub fn to_json(&self) -> Result<String> {
        let iv = self
            .exact_1d()
            .ok_or_else(|| Error::invalid("only 1D interval unions serialize to JSON"))?;
        Ok(serde_json::to_string(&IntervalsRepr {
            d: 1,
            intervals: iv.to_vec(),
        })
        .expect("plain data"))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: IntervalsRepr =
            serde_json::from_str(s).map_err(|e| Error::invalid(format!("survival set JSON: {e}")))?;
        if r.d != 1 {
            return Err(Error::invalid("interval-union JSON requires d = 1"));
        }
        Self::intervals(r.intervals)
    }
}

fn bracket_intervals<F: Fn(&[f64]) -> bool>(membership: &F) -> Vec<[f64; 2]> {
    let n = BRACKET_CELLS;
    let inside: Vec<bool> = (0..=n).map(|j| membership(&[j as f64 / n as f64])).collect();
    let boundary = |lo: f64, hi: f64, lo_inside: bool| {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if membership(&[m]) == lo_inside {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    };
    let mut out = Vec::new();
    let mut start = if inside[0] { Some(0.0) } else { None };
    for j in 0..n {
        let (x0, x1) = (j as f64 / n as f64, (j + 1) as f64 / n as f64);
        if inside[j] != inside[j + 1] {
            let t = boundary(x0, x1, inside[j]);
            if inside[j + 1] {
                start = Some(t);
            } else if let Some(s) = start.take() {
                if t > s {
                    out.push([s, t]);
                }
            }
        }
    }
    if let Some(s) = start {
        if s < 1.0 {
            out.push([s, 1.0]);
        }
    }
    out
}

/// A discretized measure: `∫ g ≈ Σ w_i g(x_i)`.
#[derive(Clone, Debug)]
pub struct Rule {
    d: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    /// Total draws when the rule is Monte Carlo (points outside the set are dropped).
    mc_draws: Option<usize>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn is_monte_carlo(&self) -> bool {
        self.mc_draws.is_some()
    }

    /// Tensor Gauss–Legendre rule on a box.
    pub fn tensor_box(lo: &[f64], hi: &[f64], spec: &QuadratureSpec) -> Rule {
        let (panels, per) = spec.panel_layout();
        let axes: Vec<(Vec<f64>, Vec<f64>)> = lo.iter().zip(hi).map(|(&l, &h)| composite(l, h, panels, per)).collect();
        tensor_product(&axes)
    }

    /// Composite Gauss–Legendre on each interval, panels proportional to length.
    pub fn intervals(iv: &[[f64; 2]], spec: &QuadratureSpec) -> Rule {
        let (panels, per) = spec.panel_layout();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for &[a, b] in iv {
            let p = ((panels as f64 * (b - a)).ceil() as usize).max(if panels > 1 { 2 } else { 1 });
            let (x, w) = composite(a, b, p, per);
            points.extend(x);
            weights.extend(w);
        }
        Rule {
            d: 1,
            points,
            weights,
            mc_draws: None,
        }
    }

    fn monte_carlo(set: Option<&SurvivalSet>, d: usize, draws: usize, seed: u64) -> Rule {
        let w = 1.0 / draws as f64;
        let parts = par::map_chunks(draws, par::CHUNK, |r| {
            let mut rng = rng::stream(seed, TAG_MC_RULE, (r.start / par::CHUNK) as u64);
            let mut x = vec![0.0; d];
            let mut pts = Vec::new();
            for _ in r {
                rng::unit_point(&mut rng, d, &mut x);
                if set.is_none_or(|s| s.contains(&x)) {
                    pts.extend_from_slice(&x);
                }
            }
            pts
        });
        let points: Vec<f64> = parts.into_iter().flatten().collect();
        let n = points.len() / d;
        Rule {
            d,
            points,
            weights: vec![w; n],
            mc_draws: Some(draws),
        }
    }

    /// Rule for `∫_{[0,1]^d}`.
    pub fn for_cube(d: usize, spec: &QuadratureSpec) -> Result<Rule> {
        spec.validate(d)?;
        Ok(match spec.mode {
            QuadMode::MonteCarlo => Rule::monte_carlo(None, d, spec.resolution, spec.seed),
            _ => Rule::tensor_box(&vec![0.0; d], &vec![1.0; d], spec),
        })
    }

    /// Rule for `∫_S`, exact-boundary when the set allows it.
    pub fn for_set(set: &SurvivalSet, spec: &QuadratureSpec) -> Result<Rule> {
        let d = set.dim();
        if spec.resolution < 2 {
            return Err(Error::invalid("quadrature resolution must be at least 2"));
        }
        if spec.mode == QuadMode::MonteCarlo {
            return Ok(Rule::monte_carlo(Some(set), d, spec.resolution, spec.seed));
        }
        if let Some(iv) = set.exact_1d() {
            return Ok(Rule::intervals(iv, spec));
        }
        if d <= 3 {
            if let Some((lo, hi)) = set.as_box() {
                return Ok(Rule::tensor_box(&lo, &hi, spec));
            }
        }
        Ok(Rule::monte_carlo(Some(set), d, spec.fallback_draws(d), spec.seed))
    }

    /// `Σ w_i g(x_i)`, failing on non-finite integrand values.
    pub fn integrate<G>(&self, g: G) -> Result<Estimate>
    where
        G: Fn(&[f64]) -> f64 + Sync + Send,
    {
        let d = self.d;
        let parts = par::map_chunks(self.len(), par::CHUNK, |r| {
            let (mut s, mut s2) = (0.0, 0.0);
            for i in r {
                let x = &self.points[i * d..(i + 1) * d];
                let v = g(x);
                if !v.is_finite() {
                    return Err(Error::NonFinite { point: x.to_vec() });
                }
                s += self.weights[i] * v;
                s2 += v * v;
            }
            Ok((s, s2))
        });
        let (mut value, mut sq) = (0.0, 0.0);
        for p in parts {
            let (s, s2) = p?;
            value += s;
            sq += s2;
        }
        let error = match self.mc_draws {
            Some(n) => {
                let n = n as f64;
                let mean_sq = sq / n;
                ((mean_sq - value * value).max(0.0) / n).sqrt()
            }
            None => 0.0,
        };
        Ok(Estimate { value, error })
    }

    /// Evaluates `g` on every node, in node order.
    pub fn map<T, G>(&self, g: G) -> Vec<T>
    where
        T: Send,
        G: Fn(&[f64]) -> T + Sync + Send,
    {
        let d = self.d;
        par::map_chunks(self.len(), par::CHUNK, |r| {
            r.map(|i| g(&self.points[i * d..(i + 1) * d])).collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect()
    }
}

fn tensor_product(axes: &[(Vec<f64>, Vec<f64>)]) -> Rule {
    let d = axes.len();
    let n: usize = axes.iter().map(|a| a.0.len()).product();
    let mut points = Vec::with_capacity(n * d);
    let mut weights = Vec::with_capacity(n);
    for mut idx in 0..n {
        let mut w = 1.0;
        let start = points.len();
        points.resize(start + d, 0.0);
        for i in (0..d).rev() {
            let m = axes[i].0.len();
            let j = idx % m;
            idx /= m;
            points[start + i] = axes[i].0[j];
            w *= axes[i].1[j];
        }
        weights.push(w);
    }
    Rule {
        d,
        points,
        weights,
        mc_draws: None,
    }
}

/// Value with an error estimate (resolution-doubling difference or MC stderr).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// `∫_{[0,1]^d} g`.
pub fn integrate_box<G>(g: G, d: usize, spec: &QuadratureSpec) -> Result<Estimate>
where
    G: Fn(&[f64]) -> f64 + Sync + Send,
{
    let coarse = Rule::for_cube(d, spec)?.integrate(&g)?;
    if spec.mode == QuadMode::MonteCarlo {
        return Ok(coarse);
    }
    let fine = Rule::for_cube(d, &spec.refined())?.integrate(&g)?;
    Ok(Estimate {
        value: coarse.value,
        error: (fine.value - coarse.value).abs(),
    })
}

/// `∫_S g`.
pub fn integrate_set<G>(g: G, set: &SurvivalSet, spec: &QuadratureSpec) -> Result<Estimate>
where
    G: Fn(&[f64]) -> f64 + Sync + Send,
{
    if !(set.volume_estimate() > 0.0) {
        return Err(Error::EmptySet);
    }
    let rule = Rule::for_set(set, spec)?;
    let coarse = rule.integrate(&g)?;
    if rule.is_monte_carlo() {
        return Ok(coarse);
    }
    let fine = Rule::for_set(set, &spec.refined())?.integrate(&g)?;
    Ok(Estimate {
        value: coarse.value,
        error: (fine.value - coarse.value).abs(),
    })
}

/// Volume of `S`: exact for interval unions and boxes, Monte Carlo hit rate otherwise.
pub fn estimate_volume(set: &SurvivalSet, n: usize, seed: u64) -> Result<(f64, f64)> {
    if n < 100 {
        return Err(Error::invalid("volume estimation needs at least 100 draws"));
    }
    match &set.region {
        Region::Cube | Region::Intervals(_) | Region::Box { .. } => {
            return Ok((set.volume, 0.0));
        }
        _ => {}
    }
    let d = set.dim();
    let hits: usize = par::map_chunks(n, par::CHUNK, |r| {
        let mut rng = rng::stream(seed, TAG_VOLUME, (r.start / par::CHUNK) as u64);
        let mut x = vec![0.0; d];
        r.filter(|_| {
            for xi in x.iter_mut() {
                *xi = rng.random::<f64>();
            }
            set.contains(&x)
        })
        .count()
    })
    .into_iter()
    .sum();
    if hits == 0 {
        return Err(Error::EmptySet);
    }
    let p = hits as f64 / n as f64;
    Ok((p, (p * (1.0 - p) / n as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 16, 32] {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((got - exact).abs() <= 1e-12 * exact.abs().max(1.0), "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn box_integral_examples() {
        for d in 1..=3 {
            let spec = if d == 1 {
                QuadratureSpec::gauss_legendre(64)
            } else {
                QuadratureSpec::tensor(32)
            };
            let e = integrate_box(|_| 1.0, d, &spec).unwrap();
            assert!((e.value - 1.0).abs() < 1e-12);
        }
        let e = integrate_box(|_| 1.0, 5, &QuadratureSpec::monte_carlo(10_000, 1)).unwrap();
        assert!((e.value - 1.0).abs() < 1e-12);
        let e = integrate_box(|x| x[0], 1, &QuadratureSpec::gauss_legendre(64)).unwrap();
        assert!((e.value - 0.5).abs() < 1e-14);
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::gauss_legendre(1).validate(1).is_err());
        assert!(QuadratureSpec::gauss_legendre(64).validate(2).is_err());
        assert!(QuadratureSpec::tensor(8).validate(4).is_err());
        assert!(QuadratureSpec::monte_carlo(100, 0).validate(7).is_ok());
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let r = integrate_box(|x| 1.0 / (x[0] - x[0]), 1, &QuadratureSpec::gauss_legendre(8));
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn set_integral_examples() {
        let half = SurvivalSet::interval(0.0, 0.5).unwrap();
        let e = integrate_set(|_| 1.0, &half, &QuadratureSpec::gauss_legendre(256)).unwrap();
        assert!((e.value - 0.5).abs() < 1e-15);

        let halfspace = SurvivalSet::halfspace(vec![1.0, 0.0], 0.5).unwrap();
        let e = integrate_set(|_| 1.0, &halfspace, &QuadratureSpec::monte_carlo(200_000, 3)).unwrap();
        assert!((e.value - 0.5).abs() <= 3.0 * e.error, "{e:?}");
    }

    #[test]
    fn volume_examples() {
        let half = SurvivalSet::interval(0.0, 0.5).unwrap();
        assert_eq!(estimate_volume(&half, 1000, 0).unwrap(), (0.5, 0.0));

        let full = SurvivalSet::from_membership(2, |_| true).unwrap();
        let (v, se) = estimate_volume(&full, 10_000, 4).unwrap();
        assert_eq!((v, se), (1.0, 0.0));

        let ball = SurvivalSet::ball(vec![0.5, 0.5], 0.5).unwrap();
        let (v, se) = estimate_volume(&ball, 400_000, 9).unwrap();
        assert!((v - PI / 16.0 * 4.0).abs() <= 3.0 * se, "{v} ± {se}");

        let empty = SurvivalSet::from_membership(2, |_| false);
        assert!(matches!(empty, Err(Error::EmptySet)));
        assert!(estimate_volume(&half, 10, 0).is_err());
    }

    #[test]
    fn bracketing_recovers_intervals() {
        let s = SurvivalSet::from_membership(1, |x| (0.1..=0.3).contains(&x[0]) || x[0] >= 0.7).unwrap();
        let iv = s.exact_1d().unwrap();
        assert_eq!(iv.len(), 2);
        assert!((iv[0][0] - 0.1).abs() < 1e-12 && (iv[0][1] - 0.3).abs() < 1e-12);
        assert!((iv[1][0] - 0.7).abs() < 1e-12 && iv[1][1] == 1.0);
        assert!((s.volume_estimate() - 0.5).abs() < 1e-12);
        for x in [0.05, 0.2, 0.5, 0.8] {
            assert_eq!(s.contains(&[x]), (0.1..=0.3).contains(&x) || x >= 0.7);
        }
    }

    #[test]
    fn interval_json_round_trip() {
        let s = SurvivalSet::intervals(vec![[0.5, 0.75], [0.0, 0.25]]).unwrap();
        let j = s.to_json().unwrap();
        assert_eq!(j, r#"{"d":1,"intervals":[[0.0,0.25],[0.5,0.75]]}"#);
        let back = SurvivalSet::from_json(&j).unwrap();
        assert!(back.same_as(&s));
        assert!(SurvivalSet::from_json(r#"{"d":1,"intervals":[[0.5,0.2]]}"#).is_err());
    }

    #[test]
    fn linearity_on_gl_path() {
        let spec = QuadratureSpec::gauss_legendre(256);
        let g = |x: &[f64]| (3.0 * x[0]).sin();
        let h = |x: &[f64]| x[0].exp();
        let (a, b) = (1.7, -0.4);
        let lhs = integrate_box(|x| a * g(x) + b * h(x), 1, &spec).unwrap().value;
        let rhs = a * integrate_box(g, 1, &spec).unwrap().value + b * integrate_box(h, 1, &spec).unwrap().value;
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn set_integral_bounded_by_box_integral() {
        let spec = QuadratureSpec::tensor(64);
        let s = SurvivalSet::boxed(vec![0.1, 0.2], vec![0.6, 0.9]).unwrap();
        let g = |x: &[f64]| (x[0] * x[1]).exp();
        let a = integrate_set(g, &s, &spec).unwrap();
        let b = integrate_box(g, 2, &spec).unwrap();
        assert!(a.value <= b.value + a.error + b.error);
    }
}
