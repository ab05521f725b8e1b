//! Shifts, momentum shifts and Weyl operators acting exactly on simple
//! functions, and certified pairings of the averaged semigroups, partial
//! Fourier transforms and Taylor expansions.

use std::f64::consts::{E, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::blocks::{pair_with, Block, CertifiedValue, ModulatedBlock, SimpleFn};
use crate::error::{Error, Result};
use crate::kernels::{
    fourier_pair_kernel, fourier_pair_kernel_unnormalized, heat_deriv_kernel, heat_pair_kernel, integrate,
    multiplier_kernel, overlap_kernel, Interval1D, MAX_DERIV_ORDER,
};
use crate::seq::{pow_seq, ratio_seq, ParamSeq, SeqCombo, SeqKind, TailSum};

/// Which operator a diagonal eigenvalue sequence stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagLabel {
    D,
    Dx,
    Dp,
    B,
}

impl DiagLabel {
    pub fn symbol(&self) -> &'static str {
        match self {
            DiagLabel::D => "D",
            DiagLabel::Dx => "D_x",
            DiagLabel::Dp => "D_p",
            DiagLabel::B => "B",
        }
    }
}

/// A non-negative operator diagonal in the fixed basis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagOp {
    eigs: ParamSeq,
    label: DiagLabel,
    trace: TailSum,
}

impl DiagOp {
    pub fn new(eigs: ParamSeq, label: DiagLabel) -> Result<Self> {
        let negative = eigs.explicit_terms().iter().any(|v| *v < 0.0)
            || matches!(eigs.kind(), SeqKind::Geometric { c, .. } if *c < 0.0);
        if negative {
            return Err(Error::InvalidArgument(format!(
                "{} must have non-negative eigenvalues, got {}",
                label.symbol(),
                eigs.describe()
            )));
        }
        let trace = eigs.tail_abs_sum(0);
        Ok(Self { eigs, label, trace })
    }

    pub fn eigs(&self) -> &ParamSeq {
        &self.eigs
    }

    pub fn label(&self) -> DiagLabel {
        self.label
    }

    pub fn eig(&self, k: usize) -> f64 {
        self.eigs.term(k)
    }

    pub fn trace(&self) -> TailSum {
        self.trace
    }

    pub fn is_nuclear(&self) -> bool {
        self.trace.is_finite()
    }

    pub fn sqrt_eigs(&self) -> ParamSeq {
        pow_seq(&self.eigs, 0.5).expect("eigenvalues are non-negative")
    }

    pub fn sqrt_nuclear(&self) -> bool {
        self.sqrt_eigs().tail_abs_sum(0).is_finite()
    }

    /// The first `n` eigenvalues, zero afterwards.
    pub fn relabeled(&self, label: DiagLabel) -> DiagOp {
        DiagOp { label, ..self.clone() }
    }

    pub fn truncated(&self, n: usize) -> DiagOp {
        DiagOp::new(self.eigs.truncated(n), self.label).expect("truncation keeps signs")
    }

    pub fn scaled(&self, c: f64) -> Result<DiagOp> {
        let eigs = match self.eigs.kind() {
            SeqKind::Zero => ParamSeq::zero(),
            SeqKind::FiniteSupport { values } => ParamSeq::finite(values.iter().map(|v| c * v).collect())?,
            SeqKind::Geometric { c: g, q } => ParamSeq::geometric(c * g, *q)?,
            SeqKind::Power { c: g, p } => ParamSeq::power(c * g, *p)?,
        }
        .with_prefix(self.eigs.prefix().iter().map(|v| c * v).collect())?;
        DiagOp::new(eigs, self.label)
    }
}

/// One named hypothesis with the tail enclosure that decides it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisEntry {
    pub name: String,
    pub holds: bool,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub entries: Vec<HypothesisEntry>,
}

impl HypothesisReport {
    pub fn all_hold(&self) -> bool {
        self.entries.iter().all(|e| e.holds)
    }

    pub fn violations(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| !e.holds)
            .map(|e| e.name.replace("nuclear", "not nuclear").replace("finite", "not finite"))
            .collect()
    }

    fn push_sum(&mut self, name: String, sum: Result<TailSum>) {
        let (holds, lo, hi) = match sum {
            Ok(s) => (s.is_finite(), s.lo, s.hi),
            Err(_) => (false, f64::INFINITY, f64::INFINITY),
        };
        self.entries.push(HypothesisEntry { name, holds, lo, hi });
    }

    pub fn check_nuclear(&mut self, d: &DiagOp) {
        self.push_sum(format!("{} nuclear", d.label.symbol()), Ok(d.trace()));
    }

    pub fn check_sqrt_nuclear(&mut self, d: &DiagOp) {
        self.push_sum(format!("{}^{{1/2}} nuclear", d.label.symbol()), Ok(d.sqrt_eigs().tail_abs_sum(0)));
    }

    pub fn check_ratio_nuclear(&mut self, d: &DiagOp, b: &DiagOp) {
        let name = format!("{} {}^{{-1}} nuclear", d.label.symbol(), b.label.symbol());
        self.push_sum(name, ratio_seq(&d.eigs, &b.eigs).map(|r| r.tail_abs_sum(0)));
    }

    /// `E‖B^{-1/2}h‖³ ≤ (Σ_k √(d_k/b_k))³ · E|ξ|³` for increments
    /// `h_k = √d_k ξ_k` with i.i.d. standardized `ξ_k`.
    pub fn check_third_moment(&mut self, d: &DiagOp, b: &DiagOp, third_abs_moment: f64) {
        let sum = ratio_seq(&d.eigs, &b.eigs)
            .and_then(|r| pow_seq(&r, 0.5))
            .map(|r| r.tail_abs_sum(0))
            .map(|s| TailSum {
                lo: s.lo.powi(3) * third_abs_moment,
                hi: s.hi.powi(3) * third_abs_moment,
                start_index: 0,
            });
        let name = format!("E‖{}^{{-1/2}}h‖³ finite", b.label.symbol());
        self.push_sum(name, sum);
    }
}

/// Hypotheses of the oscillator walk theorem: `D_x^{1/2}`, `D_p`, `B^{1/2}`,
/// `D_x B^{-1}`, `D_p B^{-1}` nuclear and a finite third moment.
pub fn hypothesis_check(dx: &DiagOp, dp: &DiagOp, b: &DiagOp, third_abs_moment: f64) -> HypothesisReport {
    let mut r = HypothesisReport::default();
    r.check_sqrt_nuclear(dx);
    r.check_nuclear(dp);
    r.check_sqrt_nuclear(b);
    r.check_ratio_nuclear(dx, b);
    r.check_ratio_nuclear(dp, b);
    r.check_third_moment(dx, b, third_abs_moment);
    r
}

// ---------------------------------------------------------------------------
// Exact transformations of simple functions

fn dot_explicit(theta: &[f64], h: &ParamSeq) -> f64 {
    h.dot_finite(theta)
}

/// `S_{th} f(x) = f(x − th)`.
pub fn apply_shift(f: &SimpleFn, t: f64, h: &ParamSeq) -> SimpleFn {
    SimpleFn::from_terms(
        f.terms
            .iter()
            .map(|m| {
                let phase = -t * dot_explicit(&m.freq, h);
                ModulatedBlock {
                    amp: if phase == 0.0 { m.amp } else { m.amp * Complex64::from_polar(1.0, phase) },
                    freq: m.freq.clone(),
                    block: m.block.shift(t, h),
                }
            })
            .collect(),
    )
}

fn add_scaled(freq: &[f64], t: f64, a: &[f64]) -> Vec<f64> {
    let n = freq.len().max(a.len());
    let mut out: Vec<f64> = freq.to_vec();
    out.resize(n, 0.0);
    for (o, v) in out.iter_mut().zip(a) {
        *o += t * v;
    }
    out
}

/// `Ŝ_{ta} f(x) = e^{it(a,x)} f(x)`.
pub fn apply_mom_shift(f: &SimpleFn, t: f64, a: &[f64]) -> SimpleFn {
    if t == 0.0 {
        return f.clone();
    }
    SimpleFn::from_terms(
        f.terms
            .iter()
            .map(|m| ModulatedBlock { amp: m.amp, freq: add_scaled(&m.freq, t, a), block: m.block.clone() })
            .collect(),
    )
}

/// `W_{h,a} = e^{(i/2)(h,a)} S_h Ŝ_a`.
pub fn apply_weyl(f: &SimpleFn, h: &ParamSeq, a: &[f64]) -> SimpleFn {
    let phase = 0.5 * dot_explicit(a, h);
    let g = apply_shift(&apply_mom_shift(f, 1.0, a), 1.0, h);
    if phase == 0.0 {
        g
    } else {
        g.scaled(Complex64::from_polar(1.0, phase))
    }
}

/// The phase `ω` in `W_{z₁}W_{z₂} = e^{iω} W_{z₁+z₂}`.
pub fn weyl_cocycle(h1: &ParamSeq, a1: &[f64], h2: &ParamSeq, a2: &[f64]) -> f64 {
    -0.5 * (dot_explicit(a2, h1) - dot_explicit(a1, h2))
}

// ---------------------------------------------------------------------------
// Averaged semigroups

const HEAT_FACTOR_ERR: f64 = 1e-14;
const MULT_FACTOR_ERR: f64 = 1e-14;

fn heat_product(t: f64, d: &DiagOp, q: &Block, w: &Block, eps: f64, skip: &[usize]) -> CertifiedValue {
    let sqrt_d = d.sqrt_eigs();
    let extra = SeqCombo::single((2.0 * t / PI).sqrt(), sqrt_d.clone());
    // Σ √(t d_k) = ∞ makes every tail factor at most 1 + (δ^Q_k + δ^W_k)/2 − √(2t d_k/π).
    if t > 0.0 && !sqrt_d.tail_abs_sum(0).is_finite() {
        return CertifiedValue::zero();
    }
    let min_n = d.eigs.explicit_len().max(skip.iter().copied().max().unwrap_or(0));
    pair_with(
        q,
        w,
        min_n,
        eps,
        HEAT_FACTOR_ERR,
        |k, a, b| {
            if skip.contains(&k) {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(heat_pair_kernel(a, b, t * d.eig(k)), 0.0)
            }
        },
        |n| (extra.tail_abs_upper(n), extra.sup_abs_from(n + 1)),
    )
}

/// `⟨U_{tD} χ_Q, χ_W⟩ = ∏_k ⟨χ_{Q_k} ⋆ ρ_{t d_k}, χ_{W_k}⟩`.
///
/// Exactly zero when `D^{1/2}` is not nuclear.
pub fn pair_u(t: f64, d: &DiagOp, q: &Block, w: &Block, eps: f64) -> CertifiedValue {
    heat_product(t, d, q, w, eps, &[])
}

// Bound on |∫_{Q_k∩W_k} x^m e^{−u x²/2} − ∫_{Q_k∩W_k} x^m| beyond n, per unit u.
fn multiplier_tail_scale(q: &Block, w: &Block, n: usize) -> f64 {
    let reach = |b: &Block| 0.5 * (1.0 + b.tail_delta().sup_abs_from(n + 1)) + b.shift_combo().sup_abs_from(n + 1);
    let r = reach(q).max(reach(w));
    let width = 1.0 + q.tail_delta().sup_abs_from(n + 1);
    0.5 * width * r * r
}

fn multiplier_product<F>(t: f64, d: &DiagOp, q: &Block, w: &Block, eps: f64, min_n: usize, factor: F) -> Result<CertifiedValue>
where
    F: Fn(usize, &Interval1D, &Interval1D, f64) -> Result<f64>,
{
    if !d.is_nuclear() {
        return Err(Error::Hypothesis(format!("{} nuclear", d.label.symbol())));
    }
    let eigs = d.eigs.clone();
    let failure = std::cell::Cell::new(None);
    let v = pair_with(
        q,
        w,
        min_n.max(eigs.explicit_len()),
        eps,
        MULT_FACTOR_ERR,
        |k, a, b| match factor(k, a, b, t * d.eig(k)) {
            Ok(v) => Complex64::new(v, 0.0),
            Err(e) => {
                failure.set(Some(e.to_string()));
                Complex64::new(f64::NAN, 0.0)
            }
        },
        |n| {
            let s = multiplier_tail_scale(q, w, n) * t;
            (s * eigs.tail_abs_sum(n).hi, s * eigs.sup_abs_from(n + 1))
        },
    );
    match failure.into_inner() {
        Some(msg) => Err(Error::InvalidArgument(msg)),
        None => Ok(v),
    }
}

/// `⟨Û_{tD} χ_Q, χ_W⟩ = ∏_k ∫_{Q_k∩W_k} e^{−t d_k x²/2} dx`.
pub fn pair_uhat(t: f64, d: &DiagOp, q: &Block, w: &Block, eps: f64) -> Result<CertifiedValue> {
    multiplier_product(t, d, q, w, eps, 0, |_, a, b, u| multiplier_kernel(a, b, u, 0))
}

/// Normalization of the one-dimensional Fourier transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FourierNorm {
    /// `(2π)^{-1/2} ∫ g(x) e^{−iξx} dx`
    Unitary,
    /// `∫ g(x) e^{−iξx} dx`
    Unnormalized,
}

/// `⟨F_n χ_Q, χ_W⟩` for the transform over the first `n` coordinates.
pub fn pair_fn(n: usize, q: &Block, w: &Block, eps: f64, norm: FourierNorm) -> CertifiedValue {
    pair_with(
        q,
        w,
        n,
        eps,
        1e-14,
        |k, a, b| {
            if k <= n {
                match norm {
                    FourierNorm::Unitary => fourier_pair_kernel(a, b),
                    FourierNorm::Unnormalized => fourier_pair_kernel_unnormalized(a, b),
                }
            } else {
                Complex64::new(overlap_kernel(a, b), 0.0)
            }
        },
        |_| (0.0, 0.0),
    )
}

// ---------------------------------------------------------------------------
// Taylor expansions

/// Largest number of active coordinates in a Taylor expansion.
pub const MAX_TAYLOR_COORDS: usize = 4;

fn active_coords(h: &[f64]) -> Result<Vec<usize>> {
    let active: Vec<usize> = h.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i + 1).collect();
    if active.len() > MAX_TAYLOR_COORDS {
        return Err(Error::InvalidArgument(format!(
            "{} active coordinates, at most {MAX_TAYLOR_COORDS} supported",
            active.len()
        )));
    }
    Ok(active)
}

/// All multi-indices of length `dims` with total order at most `max_order`.
fn multi_indices(dims: usize, max_order: u32) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dims {
        let mut next = Vec::new();
        for alpha in &out {
            let used: u32 = alpha.iter().sum();
            for a in 0..=(max_order - used) {
                let mut v = alpha.clone();
                v.push(a);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn check_order(n: u32) -> Result<()> {
    if n > MAX_DERIV_ORDER {
        return Err(Error::InvalidArgument(format!("Taylor order {n} above {MAX_DERIV_ORDER}")));
    }
    Ok(())
}

/// `Σ_{|α|≤n} c_α ∏_j g_j(α_j)` scaled by the certified rest product.
fn combine(rest: CertifiedValue, terms: impl Iterator<Item = Result<Complex64>>) -> Result<CertifiedValue> {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut mag = 0.0;
    for z in terms {
        let z = z?;
        sum += z;
        mag += z.norm();
    }
    let mut v = rest.scale(sum);
    v.rad += rest.mid.norm() * mag * 1e-14;
    Ok(v)
}

/// Partial Taylor sum of `⟨S_{th} U_{sD} χ_Q, χ_W⟩` in `t` up to order `n`.
#[allow(clippy::too_many_arguments)]
pub fn taylor_sum(s: f64, d: &DiagOp, q: &Block, w: &Block, h: &[f64], t: f64, n: u32, eps: f64) -> Result<CertifiedValue> {
    check_order(n)?;
    let active = active_coords(h)?;
    if let Some(j) = active.iter().find(|j| d.eig(**j) <= 0.0) {
        return Err(Error::InvalidArgument(format!("d_{j} must be positive on the shift support")));
    }
    let rest = heat_product(s, d, q, w, eps, &active);
    let qe: Vec<Interval1D> = active.iter().map(|j| q.edge(*j)).collect();
    let we: Vec<Interval1D> = active.iter().map(|j| w.edge(*j)).collect();
    let terms = multi_indices(active.len(), n).into_iter().map(|alpha| -> Result<Complex64> {
        let mut c = 1.0;
        for (i, a) in alpha.iter().enumerate() {
            let j = active[i];
            c *= (-t * h[j - 1]).powi(*a as i32) / factorial(*a);
            c *= heat_deriv_kernel(&qe[i], &we[i], s * d.eig(j), *a)?;
        }
        Ok(Complex64::new(c, 0.0))
    });
    combine(rest, terms)
}

/// `t^{n+1} / (s^{(n+1)/2} (n+1)!) · ‖D^{-1/2}h‖₁^{n+1} · ‖u‖`.
pub fn taylor_remainder_bound(s: f64, d: &DiagOp, h: &[f64], t: f64, n: u32, u_norm: f64) -> Result<f64> {
    let mut l1 = 0.0;
    for (i, v) in h.iter().enumerate() {
        if *v != 0.0 {
            let dk = d.eig(i + 1);
            if dk <= 0.0 {
                return Err(Error::Hypothesis(format!("D^{{-1/2}}h not in ℓ¹: d_{} = 0", i + 1)));
            }
            l1 += v.abs() / dk.sqrt();
        }
    }
    let m = n + 1;
    Ok(t.abs().powi(m as i32) / (s.powf(0.5 * m as f64) * factorial(m)) * l1.powi(m as i32) * u_norm)
}

/// Partial Taylor sum of `⟨Ŝ_{ta} Û_{sD} χ_Q, χ_W⟩ = ⟨e^{it(a,x)} Û_{sD}χ_Q, χ_W⟩`
/// in `t` up to order `n`.
#[allow(clippy::too_many_arguments)]
pub fn mom_taylor_sum(s: f64, d: &DiagOp, q: &Block, w: &Block, a: &[f64], t: f64, n: u32, eps: f64) -> Result<CertifiedValue> {
    check_order(n)?;
    let active = active_coords(a)?;
    let skip = active.clone();
    let rest = multiplier_product(s, d, q, w, eps, active.iter().copied().max().unwrap_or(0), |k, e1, e2, u| {
        if skip.contains(&k) {
            Ok(1.0)
        } else {
            multiplier_kernel(e1, e2, u, 0)
        }
    })?;
    let i = Complex64::new(0.0, 1.0);
    let terms = multi_indices(active.len(), n).into_iter().map(|alpha| -> Result<Complex64> {
        let mut c = Complex64::new(1.0, 0.0);
        for (idx, m) in alpha.iter().enumerate() {
            let j = active[idx];
            c *= (i * t * a[j - 1]).powi(*m as i32) / factorial(*m);
            c *= multiplier_kernel(&q.edge(j), &w.edge(j), s * d.eig(j), *m)?;
        }
        Ok(c)
    });
    combine(rest, terms)
}

/// `⟨Ŝ_{ta} Û_{sD} χ_Q, χ_W⟩`, the active coordinates integrated by quadrature.
pub fn mom_shift_pairing(s: f64, d: &DiagOp, q: &Block, w: &Block, a: &[f64], t: f64, eps: f64) -> Result<CertifiedValue> {
    let active = active_coords(a)?;
    let skip = active.clone();
    let rest = multiplier_product(s, d, q, w, eps, active.iter().copied().max().unwrap_or(0), |k, e1, e2, u| {
        if skip.contains(&k) {
            Ok(1.0)
        } else {
            multiplier_kernel(e1, e2, u, 0)
        }
    })?;
    let mut z = Complex64::new(1.0, 0.0);
    let mut err = 0.0;
    for j in &active {
        let Some((lo, hi)) = q.edge(*j).intersect(&w.edge(*j)) else {
            return Ok(CertifiedValue::zero());
        };
        let (theta, u) = (t * a[j - 1], s * d.eig(*j));
        let re = integrate(|x| (theta * x).cos() * (-0.5 * u * x * x).exp(), lo, hi, 1e-15)?;
        let im = integrate(|x| (theta * x).sin() * (-0.5 * u * x * x).exp(), lo, hi, 1e-15)?;
        let f = Complex64::new(re.value, im.value);
        err = err * f.norm() + z.norm() * (re.error + im.error) + err * (re.error + im.error);
        z *= f;
    }
    let mut v = rest.scale(z);
    v.rad += rest.mid.norm() * err;
    Ok(v)
}

// ---------------------------------------------------------------------------
// Norm bounds

/// Outcome of a certified inequality `lhs ≤ rhs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    /// Certified upper bound of the left-hand side.
    pub lhs: f64,
    /// Certified lower bound of the right-hand side.
    pub rhs: f64,
}

impl BoundCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// `‖x_j Û_{tD} χ_Q‖ ≤ (e t d_j)^{-1/2} ‖χ_Q‖`.
pub fn bound_check_xexp(t: f64, d: &DiagOp, j: usize, q: &Block, eps: f64) -> Result<BoundCheck> {
    let dj = d.eig(j);
    if dj <= 0.0 {
        return Err(Error::InvalidArgument(format!("d_{j} must be positive")));
    }
    // ‖x_j Û χ_Q‖² = ∫_{Q_j} x² e^{−t d_j x²} · ∏_{k≠j} ∫_{Q_k} e^{−t d_k x²}
    let sq = multiplier_product(2.0 * t, d, q, q, eps, j, |k, a, b, u| {
        multiplier_kernel(a, b, u, if k == j { 2 } else { 0 })
    })?;
    let m = q.measure(eps);
    Ok(BoundCheck {
        lhs: (sq.mid.re + sq.rad).max(0.0).sqrt(),
        rhs: (m.mid.re - m.rad).max(0.0).sqrt() / (E * t * dj).sqrt(),
    })
}

/// `‖(Dx,x) e^{−t(Bx,x)} χ_Q‖ ≤ Tr(DB^{-1}) / (e t) · ‖χ_Q‖`.
pub fn bound_check_ldb(t: f64, d: &DiagOp, b: &DiagOp, q: &Block, eps: f64) -> Result<BoundCheck> {
    let ratio = ratio_seq(d.eigs(), b.eigs())?;
    let trace = ratio.tail_abs_sum(0);
    if !trace.is_finite() {
        return Err(Error::Hypothesis("D B^{-1} nuclear".into()));
    }
    if !d.is_nuclear() {
        return Err(Error::Hypothesis("D nuclear".into()));
    }
    // e^{−2t(Bx,x)} = ∏ e^{−u_k x_k²/2} with u_k = 4 t b_k.
    let base = multiplier_product(4.0 * t, b, q, q, eps, 0, |_, a, c, u| multiplier_kernel(a, c, u, 0))?;
    let n = base
        .trunc_index
        .max(q.explicit_len())
        .max(d.eigs().explicit_len())
        .max(64);
    let (mut s2, mut s4, mut s22) = (0.0, 0.0, 0.0);
    for k in 1..=n {
        let e = q.edge(k);
        let u = 4.0 * t * b.eig(k);
        let m0 = multiplier_kernel(&e, &e, u, 0)?;
        let r2 = multiplier_kernel(&e, &e, u, 2)? / m0;
        let r4 = multiplier_kernel(&e, &e, u, 4)? / m0;
        let dk = d.eig(k);
        s2 += dk * r2;
        s4 += dk * dk * r4;
        s22 += dk * dk * r2 * r2;
    }
    // Beyond n every edge lies within `reach` of the origin.
    let reach = 0.5 * (1.0 + q.tail_delta().sup_abs_from(n + 1)) + q.shift_combo().sup_abs_from(n + 1);
    let r2 = reach * reach;
    let tail_d = d.eigs().tail_abs_sum(n).hi;
    let s2_hi = s2 + r2 * tail_d;
    let s4_hi = s4 + r2 * r2 * d.eigs().sup_abs_from(n + 1) * tail_d;
    let norm_sq = (base.mid.re + base.rad) * (s4_hi + s2_hi * s2_hi - s22) * (1.0 + 1e-12);
    let m = q.measure(eps);
    Ok(BoundCheck {
        lhs: norm_sq.max(0.0).sqrt(),
        rhs: trace.lo / (E * t) * (m.mid.re - m.rad).max(0.0).sqrt(),
    })
}
