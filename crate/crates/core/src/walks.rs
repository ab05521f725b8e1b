//! Quantum random walks: sampled compositions of random shifts and momentum
//! shifts, Monte Carlo and exact estimates of their averaged pairings, and
//! the semigroup pairings they converge to.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::{pair_modulated, pair_with, Block, CertifiedValue, ModulatedBlock};
use crate::error::{Error, Result};
use crate::kernels::{heat_pair_kernel, mehler_pair_kernel, multiplier_kernel, osc_kernel, overlap_kernel, GaussKernel, Interval1D};
use crate::operators::{pair_u, pair_uhat, DiagLabel, DiagOp, HypothesisReport};

/// Precision of every per-sample pairing.
pub const SAMPLE_EPS: f64 = 1e-12;

/// Upper limit on enumerated states.
pub const MAX_ENUM_STATES: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncrementKind {
    Gaussian,
    Rademacher,
    Uniform,
}

impl IncrementKind {
    /// `E|ξ|³` for the standardized increment.
    pub fn third_abs_moment(&self) -> f64 {
        match self {
            IncrementKind::Gaussian => 2.0 * (2.0 / PI).sqrt(),
            IncrementKind::Rademacher => 1.0,
            IncrementKind::Uniform => 3.0 * 3f64.sqrt() / 4.0,
        }
    }

    fn standard<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            IncrementKind::Gaussian => rng.sample(StandardNormal),
            IncrementKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            IncrementKind::Uniform => 3f64.sqrt() * rng.random_range(-1.0..1.0),
        }
    }
}

/// Independent coordinates `√d_k ξ_k` for `k ≤ trunc_dim`, zero beyond.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IncrementDist {
    pub kind: IncrementKind,
    pub d: DiagOp,
    pub trunc_dim: usize,
}

impl IncrementDist {
    pub fn new(kind: IncrementKind, d: DiagOp, trunc_dim: usize) -> Result<Self> {
        if trunc_dim == 0 {
            return Err(Error::InvalidArgument("trunc_dim must be at least 1".into()));
        }
        Ok(Self { kind, d, trunc_dim })
    }

    pub fn scales(&self) -> Vec<f64> {
        (1..=self.trunc_dim).map(|k| self.d.eig(k).sqrt()).collect()
    }

    pub fn sample_into<R: Rng>(&self, scales: &[f64], rng: &mut R, out: &mut [f64]) {
        for (o, s) in out.iter_mut().zip(scales) {
            *o = s * self.kind.standard(rng);
        }
    }

    /// The first `trunc_dim` eigenvalues.
    pub fn truncated_d(&self) -> DiagOp {
        self.d.truncated(self.trunc_dim)
    }

    /// `√(2t/π) Σ_{k>N} √d_k`: the shift-continuity bound on the coordinates
    /// that are not sampled.
    pub fn truncation_bound(&self, t: f64) -> f64 {
        (2.0 * t / PI).sqrt() * self.d.sqrt_eigs().tail_abs_sum(self.trunc_dim).hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum WalkMode {
    /// `S_{√τ h}` per step.
    Coordinate,
    /// `Ŝ_{√τ a}` per step.
    Momentum,
    /// `S_{√τ h} Ŝ_{√τ a}` per step.
    Alternating,
    /// `S_{√τ h}` with probability `p`, else `Ŝ_{√τ a}`.
    Pmix { p: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WalkSpec {
    pub mode: WalkMode,
    pub t: f64,
    pub m: usize,
    pub dist_x: Option<IncrementDist>,
    pub dist_p: Option<IncrementDist>,
    pub q: Block,
    pub w: Block,
}

impl WalkSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::InvalidArgument(format!("t must be positive, got {}", self.t)));
        }
        if self.m == 0 {
            return Err(Error::InvalidArgument("m must be at least 1".into()));
        }
        if let WalkMode::Pmix { p } = self.mode {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidArgument(format!("p must lie in (0, 1), got {p}")));
            }
        }
        if self.needs_x() && self.dist_x.is_none() {
            return Err(Error::InvalidArgument("walk mode needs dist_x".into()));
        }
        if self.needs_p() && self.dist_p.is_none() {
            return Err(Error::InvalidArgument("walk mode needs dist_p".into()));
        }
        Ok(())
    }

    fn needs_x(&self) -> bool {
        !matches!(self.mode, WalkMode::Momentum)
    }

    fn needs_p(&self) -> bool {
        !matches!(self.mode, WalkMode::Coordinate)
    }

    pub fn with_m(&self, m: usize) -> Self {
        Self { m, ..self.clone() }
    }

    /// Hypotheses of the limit theorem for this mode, on the untruncated
    /// operators.
    pub fn hypotheses(&self) -> HypothesisReport {
        let mut r = HypothesisReport::default();
        match self.mode {
            WalkMode::Coordinate => {
                if let Some(x) = &self.dist_x {
                    r.check_sqrt_nuclear(&x.d.relabeled(DiagLabel::D));
                }
            }
            WalkMode::Momentum => {
                if let Some(p) = &self.dist_p {
                    r.check_nuclear(&p.d.relabeled(DiagLabel::D));
                }
            }
            WalkMode::Alternating | WalkMode::Pmix { .. } => {
                if let Some(x) = &self.dist_x {
                    r.check_sqrt_nuclear(&x.d.relabeled(DiagLabel::Dx));
                }
                if let Some(p) = &self.dist_p {
                    r.check_nuclear(&p.d.relabeled(DiagLabel::Dp));
                }
            }
        }
        r
    }

    fn require_hypotheses(&self) -> Result<()> {
        self.validate()?;
        let r = self.hypotheses();
        if r.all_hold() {
            Ok(())
        } else {
            Err(Error::Hypothesis(r.violations().join(", ")))
        }
    }
}

/// Monte Carlo mean of a complex pairing with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: Complex64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
}

// ---------------------------------------------------------------------------
// Random streams

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for sample `index` under `(seed, key)`.
pub fn walk_stream(seed: u64, key: u64, index: u64) -> ChaCha8Rng {
    let mut state = seed;
    state = splitmix64(&mut state) ^ key;
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(bytes);
    rng.set_stream(index);
    rng
}

/// Stable 64-bit key for a label.
pub fn stream_key(label: &str) -> u64 {
    // FNV-1a
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

// ---------------------------------------------------------------------------
// Sampling

/// Apply `m` sampled step operators to `χ_Q`.
pub fn sample_walk<R: Rng>(spec: &WalkSpec, rng: &mut R) -> ModulatedBlock {
    let s = (spec.t / spec.m as f64).sqrt();
    let nx = spec.dist_x.as_ref().map_or(0, |d| d.trunc_dim);
    let np = spec.dist_p.as_ref().map_or(0, |d| d.trunc_dim);
    let sx = spec.dist_x.as_ref().map(|d| d.scales()).unwrap_or_default();
    let sp = spec.dist_p.as_ref().map(|d| d.scales()).unwrap_or_default();
    let mut h = vec![0.0; nx];
    let mut a = vec![0.0; np];
    let mut shift = vec![0.0; nx];
    let mut freq = vec![0.0; np];
    let mut phase = 0.0;

    let mut step_x = |rng: &mut R, freq: &[f64], phase: &mut f64, shift: &mut [f64]| {
        let d = spec.dist_x.as_ref().expect("validated");
        d.sample_into(&sx, rng, &mut h);
        let mut dot = 0.0;
        for (k, hk) in h.iter().enumerate() {
            let v = s * hk;
            shift[k] += v;
            if let Some(th) = freq.get(k) {
                dot += th * v;
            }
        }
        *phase -= dot;
    };
    let mut step_p = |rng: &mut R, freq: &mut [f64]| {
        let d = spec.dist_p.as_ref().expect("validated");
        d.sample_into(&sp, rng, &mut a);
        for (f, ak) in freq.iter_mut().zip(&a) {
            *f += s * ak;
        }
    };

    for _ in 0..spec.m {
        match spec.mode {
            WalkMode::Coordinate => step_x(rng, &freq, &mut phase, &mut shift),
            WalkMode::Momentum => step_p(rng, &mut freq),
            WalkMode::Alternating => {
                step_p(rng, &mut freq);
                step_x(rng, &freq, &mut phase, &mut shift);
            }
            WalkMode::Pmix { p } => {
                if rng.random_bool(p) {
                    step_x(rng, &freq, &mut phase, &mut shift);
                } else {
                    step_p(rng, &mut freq);
                }
            }
        }
    }
    while freq.last() == Some(&0.0) {
        freq.pop();
    }
    ModulatedBlock {
        amp: if phase == 0.0 { Complex64::new(1.0, 0.0) } else { Complex64::from_polar(1.0, phase) },
        freq,
        block: spec.q.shift_explicit(&shift),
    }
}

fn pairwise_sum<T: Copy + std::ops::Add<Output = T>>(v: &[T], zero: T) -> T {
    match v.len() {
        0 => zero,
        1 => v[0],
        n if n <= 32 => v.iter().fold(zero, |a, b| a + *b),
        n => {
            let (l, r) = v.split_at(n / 2);
            pairwise_sum(l, zero) + pairwise_sum(r, zero)
        }
    }
}

/// Mean and standard error of pairings of independent samples.
pub fn estimate_from(values: &[Complex64], seed: u64) -> Estimate {
    let n = values.len();
    let mean = pairwise_sum(values, Complex64::new(0.0, 0.0)) / n as f64;
    let dev: Vec<f64> = values.iter().map(|z| (z - mean).norm_sqr()).collect();
    let var = if n > 1 { pairwise_sum(&dev, 0.0) / (n - 1) as f64 } else { 0.0 };
    Estimate { mean, stderr: (var / n as f64).sqrt(), samples: n, seed }
}

/// Monte Carlo estimate of `⟨(V(t/m))^m χ_Q, χ_W⟩` from `samples`
/// independent walks.
pub fn mc_pairing(spec: &WalkSpec, samples: usize, seed: u64) -> Result<Estimate> {
    mc_pairing_keyed(spec, samples, seed, 0)
}

/// As [`mc_pairing`], drawing from streams `(seed, key, i)`.
pub fn mc_pairing_keyed(spec: &WalkSpec, samples: usize, seed: u64, key: u64) -> Result<Estimate> {
    spec.validate()?;
    if samples < 2 {
        return Err(Error::InvalidArgument("at least 2 samples needed".into()));
    }
    let values: Vec<Complex64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = walk_stream(seed, key, i);
            let f = sample_walk(spec, &mut rng);
            pair_modulated(&f, &spec.w, SAMPLE_EPS).mid
        })
        .collect();
    Ok(estimate_from(&values, seed))
}

// ---------------------------------------------------------------------------
// Exact enumeration

fn binomial_weights(m: usize) -> Vec<f64> {
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=m).scan(0.0, |acc, k| {
            *acc += (k as f64).ln();
            Some(*acc)
        }))
        .collect();
    let ln2m = m as f64 * std::f64::consts::LN_2;
    (0..=m).map(|j| (ln_fact[m] - ln_fact[j] - ln_fact[m - j] - ln2m).exp()).collect()
}

/// Exact `E⟨(V(t/m))^m χ_Q, χ_W⟩` for Rademacher increments, summing the
/// binomial distribution of each coordinate's net displacement.
pub fn enum_pairing(spec: &WalkSpec, eps: f64) -> Result<CertifiedValue> {
    spec.validate()?;
    let dist = match spec.mode {
        WalkMode::Coordinate => spec.dist_x.as_ref(),
        WalkMode::Momentum => spec.dist_p.as_ref(),
        _ => return Err(Error::InvalidArgument("enumeration supports coordinate and momentum walks".into())),
    }
    .expect("validated");
    if dist.kind != IncrementKind::Rademacher {
        return Err(Error::InvalidArgument("enumeration needs Rademacher increments".into()));
    }
    let states = dist.trunc_dim.saturating_mul(spec.m + 1);
    if states > MAX_ENUM_STATES {
        return Err(Error::TooManyStates { states: states as u128, limit: MAX_ENUM_STATES as u128 });
    }
    let weights = binomial_weights(spec.m);
    let s = (spec.t / spec.m as f64).sqrt();
    let m = spec.m as f64;
    let n = dist.trunc_dim;
    let coordinate = spec.mode == WalkMode::Coordinate;
    Ok(pair_with(
        &spec.q,
        &spec.w,
        n,
        eps,
        (spec.m as f64 + 2.0) * 1e-15,
        |k, a, b| {
            if k > n {
                return Complex64::new(overlap_kernel(a, b), 0.0);
            }
            let step = s * dist.d.eig(k).sqrt();
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, wj) in weights.iter().enumerate() {
                let x = step * (2.0 * j as f64 - m);
                acc += *wj
                    * if coordinate {
                        Complex64::new(overlap_kernel(&a.translated(x), b), 0.0)
                    } else {
                        osc_kernel(a, b, x)
                    };
            }
            acc
        },
        |_| (0.0, 0.0),
    ))
}

// ---------------------------------------------------------------------------
// Limits and deterministic iterates

/// Per-coordinate coefficients `(x, p)` of the limit generator
/// `(x/2)∂² − (p/2)x²`, zero beyond the truncation.
fn generator_coeffs(spec: &WalkSpec, k: usize) -> (f64, f64) {
    let coef = |d: &Option<IncrementDist>| d.as_ref().map_or(0.0, |d| if k <= d.trunc_dim { d.d.eig(k) } else { 0.0 });
    let (x, p) = (coef(&spec.dist_x), coef(&spec.dist_p));
    match spec.mode {
        WalkMode::Coordinate => (x, 0.0),
        WalkMode::Momentum => (0.0, p),
        WalkMode::Alternating => (x, p),
        WalkMode::Pmix { p: prob } => (prob * x, (1.0 - prob) * p),
    }
}

fn max_dim(spec: &WalkSpec) -> usize {
    spec.dist_x.as_ref().map_or(0, |d| d.trunc_dim).max(spec.dist_p.as_ref().map_or(0, |d| d.trunc_dim))
}

/// `⟨e^{tL} χ_Q, χ_W⟩` for the generator `L` the walk converges to:
/// convolution with `ν_{tD}` for coordinate walks, multiplication by
/// `e^{−t(Dx,x)/2}` for momentum walks, and the Mehler semigroup of
/// `Σ_k (x_k/2)∂_k² − (p_k/2)x_k²` otherwise.
pub fn target_pairing(spec: &WalkSpec, eps: f64) -> Result<CertifiedValue> {
    spec.require_hypotheses()?;
    let t = spec.t;
    match spec.mode {
        WalkMode::Coordinate => {
            let d = spec.dist_x.as_ref().expect("validated").truncated_d();
            Ok(pair_u(t, &d, &spec.q, &spec.w, eps))
        }
        WalkMode::Momentum => {
            let d = spec.dist_p.as_ref().expect("validated").truncated_d();
            pair_uhat(t, &d, &spec.q, &spec.w, eps)
        }
        WalkMode::Alternating | WalkMode::Pmix { .. } => {
            let n = max_dim(spec);
            let failure = std::cell::Cell::new(None);
            let v = pair_with(
                &spec.q,
                &spec.w,
                n,
                eps,
                1e-11,
                |k, a, b| match limit_factor(spec, k, a, b) {
                    Ok(v) => Complex64::new(v, 0.0),
                    Err(e) => {
                        failure.set(Some(e));
                        Complex64::new(f64::NAN, 0.0)
                    }
                },
                |_| (0.0, 0.0),
            );
            match failure.into_inner() {
                Some(e) => Err(e),
                None => Ok(v),
            }
        }
    }
}

fn limit_factor(spec: &WalkSpec, k: usize, a: &Interval1D, b: &Interval1D) -> Result<f64> {
    let (x, p) = generator_coeffs(spec, k);
    let t = spec.t;
    match (x > 0.0, p > 0.0) {
        (true, true) => mehler_pair_kernel(a, b, x, p, t),
        (true, false) => Ok(heat_pair_kernel(a, b, t * x)),
        (false, true) => multiplier_kernel(a, b, t * p, 0),
        (false, false) => Ok(overlap_kernel(a, b)),
    }
}

/// `⟨(V(t/m))^m χ_Q, χ_W⟩` for Gaussian alternating walks, where each
/// averaged step is the Gaussian kernel `ρ_{τ x_k} ⋆ (e^{−τ p_k x²/2} ·)`
/// in every coordinate.
pub fn chernoff_iterate(spec: &WalkSpec, eps: f64) -> Result<CertifiedValue> {
    spec.validate()?;
    if spec.mode != WalkMode::Alternating {
        return Err(Error::InvalidArgument("Gaussian-kernel iterate needs an alternating walk".into()));
    }
    let gaussian = |d: &Option<IncrementDist>| d.as_ref().is_some_and(|d| d.kind == IncrementKind::Gaussian);
    if !gaussian(&spec.dist_x) || !gaussian(&spec.dist_p) {
        return Err(Error::InvalidArgument("Gaussian-kernel iterate needs Gaussian increments".into()));
    }
    let tau = spec.t / spec.m as f64;
    let m = spec.m as u32;
    let n = max_dim(spec);
    let failure = std::cell::Cell::new(None);
    let v = pair_with(
        &spec.q,
        &spec.w,
        n,
        eps,
        1e-11,
        |k, a, b| {
            let (x, p) = generator_coeffs(spec, k);
            let r = if x > 0.0 {
                GaussKernel::shift_after_multiply(tau * x, tau * p)
                    .and_then(|g| g.power(m).pair(a, b, 1e-13))
            } else if p > 0.0 {
                multiplier_kernel(a, b, spec.t * p, 0)
            } else {
                Ok(overlap_kernel(a, b))
            };
            match r {
                Ok(v) => Complex64::new(v, 0.0),
                Err(e) => {
                    failure.set(Some(e));
                    Complex64::new(f64::NAN, 0.0)
                }
            }
        },
        |_| (0.0, 0.0),
    );
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// How each row of a convergence study is estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyMethod {
    MonteCarlo,
    Enumeration,
    Iterate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub m: usize,
    pub estimate: Complex64,
    /// Standard error for Monte Carlo rows, certified radius otherwise.
    pub uncertainty: f64,
    pub target: Complex64,
    pub gap: f64,
}

/// One row per `m`: estimate of the `m`-step walk pairing and its distance
/// to the limit pairing.
pub fn convergence_study(
    spec: &WalkSpec,
    m_list: &[usize],
    method: StudyMethod,
    samples: usize,
    seed: u64,
) -> Result<Vec<ConvergenceRow>> {
    if m_list.is_empty() {
        return Err(Error::InvalidArgument("m_list must not be empty".into()));
    }
    let target = target_pairing(spec, 1e-10)?;
    m_list
        .iter()
        .map(|&m| {
            let s = spec.with_m(m);
            let (estimate, uncertainty) = match method {
                StudyMethod::MonteCarlo => {
                    let e = mc_pairing_keyed(&s, samples, seed, m as u64)?;
                    (e.mean, e.stderr)
                }
                StudyMethod::Enumeration => {
                    let v = enum_pairing(&s, 1e-12)?;
                    (v.mid, v.rad)
                }
                StudyMethod::Iterate => {
                    let v = chernoff_iterate(&s, 1e-12)?;
                    (v.mid, v.rad)
                }
            };
            Ok(ConvergenceRow { m, estimate, uncertainty, target: target.mid, gap: (estimate - target.mid).norm() })
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).0
}

/// `(slope, intercept, r²)` of the least-squares line through `(x, y)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{inner, norm_sq, SimpleFn};
    use crate::kernels::integrate;
    use crate::operators::{apply_mom_shift, apply_shift};
    use crate::seq::ParamSeq;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn dist(kind: IncrementKind, d: ParamSeq, n: usize) -> IncrementDist {
        IncrementDist::new(kind, DiagOp::new(d, DiagLabel::D).unwrap(), n).unwrap()
    }

    fn finite(v: &[f64]) -> ParamSeq {
        ParamSeq::finite(v.to_vec()).unwrap()
    }

    fn spec(mode: WalkMode, t: f64, m: usize, x: Option<IncrementDist>, p: Option<IncrementDist>) -> WalkSpec {
        WalkSpec { mode, t, m, dist_x: x, dist_p: p, q: Block::unit(), w: Block::unit() }
    }

    fn gauss1() -> Option<IncrementDist> {
        Some(dist(IncrementKind::Gaussian, finite(&[1.0]), 1))
    }

    #[test]
    fn increments_have_unit_scaled_variance() {
        for kind in [IncrementKind::Gaussian, IncrementKind::Rademacher, IncrementKind::Uniform] {
            let d = dist(kind, finite(&[4.0]), 1);
            let sc = d.scales();
            let mut rng = walk_stream(1, 2, 3);
            let mut x = [0.0];
            let n = 200_000;
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                d.sample_into(&sc, &mut rng, &mut x);
                s1 += x[0];
                s2 += x[0] * x[0];
            }
            assert!((s1 / n as f64).abs() < 0.03, "{kind:?}");
            assert!((s2 / n as f64 - 4.0).abs() < 0.06, "{kind:?}");
        }
        let r = dist(IncrementKind::Rademacher, finite(&[4.0]), 1);
        let mut rng = walk_stream(0, 0, 0);
        let mut x = [0.0];
        for _ in 0..100 {
            r.sample_into(&r.scales(), &mut rng, &mut x);
            assert_eq!(x[0].abs(), 2.0);
        }
    }

    #[test]
    fn sample_walk_examples() {
        let sp = spec(WalkMode::Coordinate, 1.0, 4, gauss1(), None);
        let f = sample_walk(&sp, &mut walk_stream(3, 0, 0));
        assert!(f.freq.is_empty());
        assert_eq!(f.amp, Complex64::new(1.0, 0.0));

        let sp = spec(WalkMode::Momentum, 1.0, 4, None, gauss1());
        let f = sample_walk(&sp, &mut walk_stream(3, 0, 0));
        assert_eq!(f.block, Block::unit());
        assert_eq!(f.freq.len(), 1);

        // One alternating step: Ŝ first, so no phase is picked up.
        let sp = spec(WalkMode::Alternating, 1.0, 1, gauss1(), gauss1());
        let f = sample_walk(&sp, &mut walk_stream(5, 0, 0));
        let mut rng = walk_stream(5, 0, 0);
        let (mut a, mut h) = ([0.0], [0.0]);
        sp.dist_p.as_ref().unwrap().sample_into(&[1.0], &mut rng, &mut a);
        sp.dist_x.as_ref().unwrap().sample_into(&[1.0], &mut rng, &mut h);
        let expected = apply_shift(
            &apply_mom_shift(&SimpleFn::indicator(Block::unit()), 1.0, &a),
            1.0,
            &finite(&h),
        );
        assert_eq!(f.freq, a.to_vec());
        assert_eq!(f.block, expected.terms[0].block);
        assert!((f.amp - expected.terms[0].amp).norm() < 1e-15);
        assert!((f.amp - Complex64::from_polar(1.0, -a[0] * h[0])).norm() < 1e-15);
    }

    #[test]
    fn coordinate_walk_collapses() {
        for m in 1..=16 {
            let sp = spec(WalkMode::Coordinate, 0.7, m, Some(dist(IncrementKind::Gaussian, finite(&[1.0, 0.5]), 2)), None);
            let f = sample_walk(&sp, &mut walk_stream(11, 0, m as u64));
            let mut rng = walk_stream(11, 0, m as u64);
            let s = (0.7 / m as f64).sqrt();
            let scales = sp.dist_x.as_ref().unwrap().scales();
            let mut block = Block::unit();
            let mut h = [0.0; 2];
            for _ in 0..m {
                sp.dist_x.as_ref().unwrap().sample_into(&scales, &mut rng, &mut h);
                block = block.shift_explicit(&[s * h[0], s * h[1]]);
            }
            assert_eq!(f.block, block, "m={m}");
        }
    }

    #[test]
    fn mc_is_thread_invariant() {
        let sp = spec(WalkMode::Alternating, 0.5, 8, gauss1(), gauss1());
        let run = |threads| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| mc_pairing(&sp, 5000, 42).unwrap())
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(a.mean.re.to_bits(), b.mean.re.to_bits());
        assert_eq!(a.mean.im.to_bits(), b.mean.im.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn estimator_definition() {
        let e = estimate_from(&[Complex64::new(0.3, 0.1), Complex64::new(0.3, 0.1)], 0);
        assert_eq!(e.stderr, 0.0);
        let e = estimate_from(&[Complex64::new(1.0, 0.0), Complex64::new(3.0, 0.0)], 0);
        assert_eq!(e.mean.re, 2.0);
        assert_abs_diff_eq!(e.stderr, 1.0, epsilon = 1e-15);
        // A walk with zero variance coincides across samples.
        let sp = spec(WalkMode::Coordinate, 1.0, 1, Some(dist(IncrementKind::Gaussian, finite(&[0.0]), 1)), None);
        assert_eq!(mc_pairing(&sp, 2, 9).unwrap().stderr, 0.0);
    }

    #[test]
    fn momentum_mc_matches_oracle() {
        // E ∫_{-1/2}^{1/2} e^{iax} dx with a ~ N(0,1) is ∫ e^{−x²/2} dx.
        let sp = spec(WalkMode::Momentum, 1.0, 1, None, gauss1());
        let e = mc_pairing(&sp, 100_000, 1).unwrap();
        let oracle = integrate(|x| (-0.5 * x * x).exp(), -0.5, 0.5, 1e-14).unwrap().value;
        assert!((e.mean.re - oracle).abs() <= 3.0 * e.stderr, "{e:?} vs {oracle}");
    }

    #[test]
    fn gaussian_coordinate_mc_is_exact_in_m() {
        let d = dist(IncrementKind::Gaussian, ParamSeq::geometric(0.5, 0.5).unwrap(), 3);
        let sp = spec(WalkMode::Coordinate, 1.0, 1, Some(d), None);
        let target = target_pairing(&sp, 1e-10).unwrap();
        for m in [1, 2, 4, 8] {
            let e = mc_pairing_keyed(&sp.with_m(m), 20_000, 3, m as u64).unwrap();
            assert!((e.mean - target.mid).norm() <= 3.0 * e.stderr, "m={m}: {e:?} vs {target:?}");
        }
    }

    #[test]
    fn enum_two_point_average() {
        let sp = spec(WalkMode::Coordinate, 1.0, 1, Some(dist(IncrementKind::Rademacher, finite(&[1.0]), 1)), None);
        let v = enum_pairing(&sp, 1e-12).unwrap();
        assert_eq!(v.mid.re, 0.0);
        let sp = spec(WalkMode::Coordinate, 0.25, 1, Some(dist(IncrementKind::Rademacher, finite(&[1.0]), 1)), None);
        assert_abs_diff_eq!(enum_pairing(&sp, 1e-12).unwrap().mid.re, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn enum_matches_sign_pattern_brute_force() {
        for m in 1..=10usize {
            let sp = spec(WalkMode::Coordinate, 0.8, m, Some(dist(IncrementKind::Rademacher, finite(&[0.6]), 1)), None);
            let s = (0.8 / m as f64).sqrt() * 0.6f64.sqrt();
            let mut acc = 0.0;
            for pattern in 0u32..(1 << m) {
                let net: f64 = (0..m).map(|i| if pattern >> i & 1 == 1 { s } else { -s }).sum();
                acc += overlap_kernel(&Interval1D::unit().translated(net), &Interval1D::unit());
            }
            acc /= (1u64 << m) as f64;
            assert_abs_diff_eq!(enum_pairing(&sp, 1e-12).unwrap().mid.re, acc, epsilon = 1e-14);
        }
    }

    #[test]
    fn enum_matches_mc() {
        for (mode, m) in [(WalkMode::Coordinate, 3), (WalkMode::Momentum, 5)] {
            let d = Some(dist(IncrementKind::Rademacher, finite(&[0.8, 0.3]), 2));
            let sp = match mode {
                WalkMode::Coordinate => spec(mode, 0.6, m, d, None),
                _ => spec(mode, 0.6, m, None, d),
            };
            let exact = enum_pairing(&sp, 1e-12).unwrap();
            let e = mc_pairing(&sp, 100_000, 17).unwrap();
            assert!((e.mean - exact.mid).norm() <= 4.0 * e.stderr, "{mode:?}");
        }
    }

    #[test]
    fn enum_rejects_large_state_spaces() {
        let sp = spec(WalkMode::Coordinate, 1.0, 10_000_000, Some(dist(IncrementKind::Rademacher, finite(&[1.0]), 1)), None);
        assert!(matches!(enum_pairing(&sp, 1e-9), Err(Error::TooManyStates { .. })));
    }

    #[test]
    fn rademacher_chernoff_rate() {
        let d = dist(IncrementKind::Rademacher, finite(&[1.0, 0.5]), 2);
        let sp = spec(WalkMode::Coordinate, 1.0, 1, Some(d), None);
        let ms = [1, 2, 4, 8, 16, 32, 64];
        let rows = convergence_study(&sp, &ms, StudyMethod::Enumeration, 0, 0).unwrap();
        assert!(rows[6].gap <= 0.25 * rows[2].gap);
        let slope = loglog_slope(&ms.map(|m| m as f64), &rows.iter().map(|r| r.gap).collect::<Vec<_>>());
        assert!((-1.5..=-0.5).contains(&slope), "{slope}");
    }

    #[test]
    fn target_limits() {
        let dp_small = Some(dist(IncrementKind::Gaussian, finite(&[1e-12]), 1));
        let osc = target_pairing(&spec(WalkMode::Alternating, 0.5, 1, gauss1(), dp_small), 1e-10).unwrap();
        let diff = target_pairing(&spec(WalkMode::Coordinate, 0.5, 1, gauss1(), None), 1e-10).unwrap();
        assert_abs_diff_eq!(osc.mid.re, diff.mid.re, epsilon = 1e-9);

        let pm = |p| target_pairing(&spec(WalkMode::Pmix { p }, 0.5, 1, gauss1(), gauss1()), 1e-10).unwrap().mid.re;
        let mom = target_pairing(&spec(WalkMode::Momentum, 0.5, 1, None, gauss1()), 1e-10).unwrap();
        assert_abs_diff_eq!(pm(1.0 - 1e-12), diff.mid.re, epsilon = 1e-9);
        assert_abs_diff_eq!(pm(1e-12), mom.mid.re, epsilon = 1e-9);
    }

    #[test]
    fn iterate_converges_to_mehler() {
        let mut sp = spec(WalkMode::Alternating, 0.5, 1, gauss1(), gauss1());
        sp.w = Block::unit().shift_explicit(&[0.5]);
        let ms = [1, 2, 4, 8, 16, 32, 64];
        let rows = convergence_study(&sp, &ms, StudyMethod::Iterate, 0, 0).unwrap();
        let slope = loglog_slope(&ms.map(|m| m as f64), &rows.iter().map(|r| r.gap).collect::<Vec<_>>());
        assert!((-1.5..=-0.5).contains(&slope), "{slope}");
        assert!(rows.last().unwrap().gap < 1e-3);
    }

    #[test]
    fn hypotheses_refuse_non_nuclear() {
        let bad = dist(IncrementKind::Gaussian, ParamSeq::power(0.1, 2.0).unwrap(), 10);
        let sp = spec(WalkMode::Coordinate, 1.0, 1, Some(bad), None);
        assert_eq!(sp.hypotheses().violations(), vec!["D^{1/2} not nuclear".to_string()]);
        assert!(matches!(target_pairing(&sp, 1e-9), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn truncation_bound_controls_dimension() {
        let d = ParamSeq::geometric(0.5, 0.25).unwrap();
        let full = DiagOp::new(d.clone(), DiagLabel::D).unwrap();
        let lo = dist(IncrementKind::Gaussian, d, 3);
        let a = pair_u(1.0, &lo.truncated_d(), &Block::unit(), &Block::unit(), 1e-12);
        let b = pair_u(1.0, &full, &Block::unit(), &Block::unit(), 1e-12);
        assert!((a.mid - b.mid).norm() <= lo.truncation_bound(1.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn walks_preserve_norm(seed in any::<u64>(), m in 1usize..12, pm in 0.05..0.95f64, mode in 0usize..4) {
            let mode = [WalkMode::Coordinate, WalkMode::Momentum, WalkMode::Alternating, WalkMode::Pmix { p: pm }][mode];
            let d = Some(dist(IncrementKind::Uniform, finite(&[1.0, 0.3, 0.1]), 3));
            let sp = spec(mode, 0.9, m, d.clone(), d);
            let f = SimpleFn::from_terms(vec![sample_walk(&sp, &mut walk_stream(seed, 0, 0))]);
            prop_assert!((norm_sq(&f, 1e-12).mid.re - 1.0).abs() <= 1e-12);
            let g = inner(&f, &SimpleFn::indicator(Block::unit()), 1e-12);
            prop_assert!(g.mid.norm() <= 1.0 + 1e-12);
        }
    }
}
