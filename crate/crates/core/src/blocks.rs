//! Blocks, the shift-invariant measure on them, and phase-modulated block
//! indicators with certified pairings.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{osc_kernel, overlap_kernel, Interval1D};
use crate::seq::{Divergence, ParamSeq, SeqCombo};

/// Largest truncation index the product engine will try.
pub const MAX_TRUNCATION: usize = 1 << 22;

const ROUNDING: f64 = 4.0 * f64::EPSILON;

/// Midpoint-radius enclosure of a (possibly infinite) product or pairing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CertifiedValue {
    pub mid: Complex64,
    pub rad: f64,
    pub trunc_index: usize,
}

impl CertifiedValue {
    pub fn exact(mid: Complex64, trunc_index: usize) -> Self {
        Self { mid, rad: 0.0, trunc_index }
    }

    pub fn zero() -> Self {
        Self::exact(Complex64::new(0.0, 0.0), 0)
    }

    pub fn is_exact_zero(&self) -> bool {
        self.mid == Complex64::new(0.0, 0.0) && self.rad == 0.0
    }

    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.mid).norm() <= self.rad
    }

    /// Real interval `[mid.re − rad, mid.re + rad]`.
    pub fn re_bounds(&self) -> (f64, f64) {
        (self.mid.re - self.rad, self.mid.re + self.rad)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { mid: self.mid * c, rad: self.rad * c.norm(), trunc_index: self.trunc_index }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            mid: self.mid + other.mid,
            rad: self.rad + other.rad + ROUNDING * (self.mid + other.mid).norm(),
            trunc_index: self.trunc_index.max(other.trunc_index),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Enclosure of the product of two enclosed values.
    pub fn mul(&self, other: &Self) -> Self {
        let mid = self.mid * other.mid;
        Self {
            mid,
            rad: self.mid.norm() * other.rad
                + other.mid.norm() * self.rad
                + self.rad * other.rad
                + ROUNDING * mid.norm(),
            trunc_index: self.trunc_index.max(other.trunc_index),
        }
    }
}

fn tail_spread(s: f64) -> (f64, f64) {
    ((-1.5 * s).exp(), s.exp())
}

/// Certified product `∏_{k≥1} f_k`.
///
/// `factor(k)` gives the explicit factors. `tail(n)` returns `(Σ, sup)` of
/// bounds `ε_k ≥ |f_k − 1|` over `k > n`; it is only consulted for
/// `n ≥ min_n`. With `sup ≤ 1/2` the tail product lies in
/// `[e^{−3Σ/2}, e^{Σ}]`. `factor_err` is the relative error of one factor.
pub fn certified_product<F, T>(min_n: usize, eps: f64, factor_err: f64, factor: F, tail: T) -> CertifiedValue
where
    F: Fn(usize) -> Complex64,
    T: Fn(usize) -> (f64, f64),
{
    let budget = 0.5 * eps;
    let spread = |s: f64| {
        let (lo, hi) = tail_spread(s);
        0.5 * (hi - lo)
    };
    let mut n = min_n.max(1);
    let (mut sum, mut sup) = tail(n);
    let mut p = Complex64::new(1.0, 0.0);
    let mut nonunit = 0usize;
    let mut done = 0usize;
    loop {
        for k in done + 1..=n {
            let f = factor(k);
            if f == Complex64::new(0.0, 0.0) {
                return CertifiedValue::exact(f, k);
            }
            if f != Complex64::new(1.0, 0.0) {
                nonunit += 1;
                p *= f;
            }
        }
        done = n;
        if (sup <= 0.5 && p.norm().max(1.0) * spread(sum) <= budget) || n >= MAX_TRUNCATION {
            break;
        }
        n = (2 * n).min(MAX_TRUNCATION);
        (sum, sup) = tail(n);
    }

    if !(sup <= 0.5 && sum.is_finite()) {
        return CertifiedValue { mid: p, rad: f64::INFINITY, trunc_index: n };
    }
    let (lo, hi) = tail_spread(sum);
    let mid = p * (0.5 * (hi + lo));
    let rad = p.norm() * (0.5 * (hi - lo) + hi * nonunit as f64 * (factor_err + ROUNDING));
    CertifiedValue { mid, rad, trunc_index: n }
}

/// Serializable description of a [`Block`]: explicit leading edges, then
/// unit-width edges with centres `shift_k` and widths `1 + delta_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    #[serde(default)]
    pub edges: Vec<[f64; 2]>,
    #[serde(default = "ParamSeq::zero")]
    pub shift: ParamSeq,
    #[serde(default = "ParamSeq::zero")]
    pub delta: ParamSeq,
}

impl Default for BlockSpec {
    fn default() -> Self {
        Self::unit()
    }
}

impl BlockSpec {
    pub fn unit() -> Self {
        Self { edges: Vec::new(), shift: ParamSeq::zero(), delta: ParamSeq::zero() }
    }

    pub fn from_edges(edges: &[[f64; 2]]) -> Self {
        Self { edges: edges.to_vec(), ..Self::unit() }
    }

    pub fn build(&self) -> Result<Block> {
        let prefix = self.edges.iter().map(|[lo, hi]| Interval1D::new(*lo, *hi)).collect::<Result<Vec<_>>>()?;
        Block::new(prefix, self.shift.clone(), self.delta.clone())
    }
}

/// An infinite-dimensional rectangle `∏_k [a_k, b_k)`.
///
/// The first edges are explicit; beyond them edge `k` has width `1 + δ_k`
/// and is centred at zero before translation. Translations are kept as an
/// explicit offset vector plus a linear combination of parametric sequences.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Block {
    prefix: Vec<Interval1D>,
    tail_delta: ParamSeq,
    offset: Vec<f64>,
    shift: SeqCombo,
}

impl Block {
    /// `Π₀`, all edges `[−1/2, 1/2)`.
    pub fn unit() -> Self {
        Self { prefix: Vec::new(), tail_delta: ParamSeq::zero(), offset: Vec::new(), shift: SeqCombo::new() }
    }

    /// Explicit leading edges followed by unit edges.
    pub fn from_edges(prefix: Vec<Interval1D>) -> Result<Self> {
        Self::new(prefix, ParamSeq::zero(), ParamSeq::zero())
    }

    /// `tail_shift` moves the centres of the edges beyond the prefix and
    /// `tail_delta` perturbs their widths.
    pub fn new(prefix: Vec<Interval1D>, tail_shift: ParamSeq, tail_delta: ParamSeq) -> Result<Self> {
        if let Some(e) = prefix.iter().find(|e| !(e.len() > 0.0 && e.len().is_finite())) {
            return Err(Error::InvalidBlock(format!("edge [{}, {}) has no positive width", e.lo, e.hi)));
        }
        let p = prefix.len();
        let delta_combo = SeqCombo::single(1.0, tail_delta.without_head(p));
        if delta_combo.divergence() == Some(Divergence::ToPlusInfinity) {
            return Err(Error::InvalidBlock(format!(
                "widths 1 + δ_k with δ = {} make Σ max(0, ln width) diverge",
                tail_delta.describe()
            )));
        }
        let mut k = p + 1;
        while tail_delta.sup_abs_from(k) >= 1.0 {
            if 1.0 + tail_delta.term(k) <= 0.0 {
                return Err(Error::InvalidBlock(format!("tail width 1 + δ_{k} is not positive")));
            }
            if k > 10_000_000 {
                return Err(Error::InvalidBlock("cannot certify positive tail widths".into()));
            }
            k += 1;
        }

        let mut block = Self { prefix, tail_delta, offset: Vec::new(), shift: SeqCombo::new() };
        let tail_shift = tail_shift.without_head(p);
        if tail_shift.is_finite_support() {
            block.offset = tail_shift.explicit_terms();
        } else {
            block.shift.add(1.0, &tail_shift);
        }
        Ok(block)
    }

    pub fn prefix_len(&self) -> usize {
        self.prefix.len()
    }

    pub fn tail_delta(&self) -> &ParamSeq {
        &self.tail_delta
    }

    /// Parametric part of the accumulated translation.
    pub fn shift_combo(&self) -> &SeqCombo {
        &self.shift
    }

    /// Explicit part of the accumulated translation.
    pub fn offsets(&self) -> &[f64] {
        &self.offset
    }

    /// Index past which every edge follows the closed-form tail.
    pub fn explicit_len(&self) -> usize {
        self.prefix
            .len()
            .max(self.offset.len())
            .max(self.shift.explicit_len())
            .max(self.tail_delta.explicit_len())
    }

    pub fn width(&self, k: usize) -> f64 {
        match self.prefix.get(k - 1) {
            Some(e) => e.len(),
            None => 1.0 + self.tail_delta.term(k),
        }
    }

    pub fn center(&self, k: usize) -> f64 {
        let base = self.prefix.get(k - 1).map_or(0.0, Interval1D::mid);
        let off = self.offset.get(k - 1).copied().unwrap_or(0.0);
        base + off + self.shift.term(k)
    }

    pub fn edge(&self, k: usize) -> Interval1D {
        match self.prefix.get(k - 1) {
            Some(e) => {
                let t = self.offset.get(k - 1).copied().unwrap_or(0.0) + self.shift.term(k);
                Interval1D { lo: e.lo + t, hi: e.hi + t }
            }
            None => {
                let c = self.center(k);
                let h = 0.5 * self.width(k);
                Interval1D { lo: c - h, hi: c + h }
            }
        }
    }

    /// `Q + t·h`.
    pub fn shift(&self, t: f64, h: &ParamSeq) -> Block {
        let mut out = self.clone();
        if t == 0.0 {
            return out;
        }
        if h.is_finite_support() {
            let terms = h.explicit_terms();
            if out.offset.len() < terms.len() {
                out.offset.resize(terms.len(), 0.0);
            }
            for (o, v) in out.offset.iter_mut().zip(&terms) {
                *o += t * v;
            }
        } else {
            out.shift.add(t, h);
        }
        out
    }

    /// `Q + Σ_k v_k e_k` for an explicit vector.
    pub fn shift_explicit(&self, v: &[f64]) -> Block {
        let mut out = self.clone();
        if out.offset.len() < v.len() {
            out.offset.resize(v.len(), 0.0);
        }
        for (o, x) in out.offset.iter_mut().zip(v) {
            *o += x;
        }
        out
    }

    /// `λ(Q) = ∏ width_k`.
    pub fn measure(&self, eps: f64) -> CertifiedValue {
        let delta = &self.tail_delta;
        // Widths ignore translations, so the truncation does too.
        certified_product(
            self.prefix.len().max(self.tail_delta.explicit_len()),
            eps,
            0.0,
            |k| Complex64::new(self.width(k), 0.0),
            |n| (delta.tail_abs_sum(n).hi, delta.sup_abs_from(n + 1)),
        )
    }
}

/// Bounds on `|δ^Q_k| + |δ^W_k| + |c^Q_k − c^W_k|` over `k > n`, which
/// dominate `|overlap_k − 1|`.
pub(crate) struct PlainTail {
    dq: ParamSeq,
    dw: ParamSeq,
    diff: SeqCombo,
}

impl PlainTail {
    pub(crate) fn new(q: &Block, w: &Block) -> Self {
        let mut diff = q.shift.clone();
        diff.add_combo(-1.0, &w.shift);
        Self { dq: q.tail_delta.clone(), dw: w.tail_delta.clone(), diff }
    }

    /// The overlaps tend to zero fast enough that their product vanishes.
    pub(crate) fn forces_zero(&self) -> bool {
        self.diff.divergence().is_some()
    }

    pub(crate) fn bound(&self, n: usize) -> (f64, f64) {
        let sum = self.dq.tail_abs_sum(n).hi + self.dw.tail_abs_sum(n).hi + self.diff.tail_abs_upper(n);
        let sup = self.dq.sup_abs_from(n + 1) + self.dw.sup_abs_from(n + 1) + self.diff.sup_abs_from(n + 1);
        (sum, sup)
    }
}

/// Certified `∏_k factor(k, Q_k, W_k)` where the factors approach the plain
/// overlap in the tail up to the extra deviation bound `extra(n)`.
pub(crate) fn pair_with<F, X>(
    q: &Block,
    w: &Block,
    min_n: usize,
    eps: f64,
    factor_err: f64,
    factor: F,
    extra: X,
) -> CertifiedValue
where
    F: Fn(usize, &Interval1D, &Interval1D) -> Complex64,
    X: Fn(usize) -> (f64, f64),
{
    let plain = PlainTail::new(q, w);
    if plain.forces_zero() {
        return CertifiedValue::zero();
    }
    let min_n = min_n.max(q.explicit_len()).max(w.explicit_len());
    certified_product(
        min_n,
        eps,
        factor_err,
        |k| factor(k, &q.edge(k), &w.edge(k)),
        |n| {
            let (s1, m1) = plain.bound(n);
            let (s2, m2) = extra(n);
            (s1 + s2, m1 + m2)
        },
    )
}

/// `⟨χ_Q, χ_W⟩ = λ(Q ∩ W)`.
pub fn pair_plain(q: &Block, w: &Block, eps: f64) -> CertifiedValue {
    pair_with(q, w, 0, eps, 0.0, |_, a, b| Complex64::new(overlap_kernel(a, b), 0.0), |_| (0.0, 0.0))
}

/// `amp · e^{i(θ,x)} · χ_Q(x)` with finitely many nonzero frequencies.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModulatedBlock {
    pub amp: Complex64,
    pub freq: Vec<f64>,
    pub block: Block,
}

impl ModulatedBlock {
    pub fn indicator(block: Block) -> Self {
        Self { amp: Complex64::new(1.0, 0.0), freq: Vec::new(), block }
    }

    pub fn freq_at(&self, k: usize) -> f64 {
        self.freq.get(k - 1).copied().unwrap_or(0.0)
    }
}

/// `⟨f, χ_W⟩ = amp · ∏_k ∫_{Q_k ∩ W_k} e^{iθ_k x} dx`.
pub fn pair_modulated(f: &ModulatedBlock, w: &Block, eps: f64) -> CertifiedValue {
    let nf = f.freq.len();
    pair_with(
        &f.block,
        w,
        nf,
        eps,
        ROUNDING,
        |k, a, b| {
            if k <= nf {
                osc_kernel(a, b, f.freq[k - 1])
            } else {
                Complex64::new(overlap_kernel(a, b), 0.0)
            }
        },
        |_| (0.0, 0.0),
    )
    .scale(f.amp)
}

/// A finite linear combination of modulated block indicators.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SimpleFn {
    pub terms: Vec<ModulatedBlock>,
}

impl SimpleFn {
    pub fn indicator(block: Block) -> Self {
        Self { terms: vec![ModulatedBlock::indicator(block)] }
    }

    pub fn from_terms(terms: Vec<ModulatedBlock>) -> Self {
        Self { terms }
    }

    pub fn scaled(mut self, c: Complex64) -> Self {
        for t in &mut self.terms {
            t.amp *= c;
        }
        self
    }

    pub fn plus(mut self, other: SimpleFn) -> Self {
        self.terms.extend(other.terms);
        self
    }

    pub fn minus(self, other: SimpleFn) -> Self {
        self.plus(other.scaled(Complex64::new(-1.0, 0.0)))
    }
}

fn freq_difference(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0))
        .collect()
}

/// `⟨f, g⟩ = ∫ f · conj(g)`, linear in `f`, conjugate-linear in `g`.
pub fn inner(f: &SimpleFn, g: &SimpleFn, eps: f64) -> CertifiedValue {
    let mut acc = CertifiedValue::zero();
    for a in &f.terms {
        for b in &g.terms {
            let m = ModulatedBlock {
                amp: a.amp * b.amp.conj(),
                freq: freq_difference(&a.freq, &b.freq),
                block: a.block.clone(),
            };
            acc = acc.add(&pair_modulated(&m, &b.block, eps));
        }
    }
    acc
}

/// `‖f‖²` as a real enclosure.
pub fn norm_sq(f: &SimpleFn, eps: f64) -> CertifiedValue {
    let mut v = inner(f, f, eps);
    if v.mid.im.abs() <= v.rad + 1e-12 * v.mid.re.abs() {
        v.rad += v.mid.im.abs();
        v.mid.im = 0.0;
    }
    v
}
