//! Special functions and the one-dimensional pairing kernels.
//!
//! Every infinite-dimensional pairing in the crate is a product over
//! coordinates of one of the kernels below, evaluated on a pair of edges.

use std::collections::BinaryHeap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_2_SQRT_PI, FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// A half-open interval `[lo, hi)` with `hi > lo`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval1D {
    pub lo: f64,
    pub hi: f64,
}

impl Interval1D {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidArgument(format!("interval [{lo}, {hi}) is empty or not finite")));
        }
        Ok(Self { lo, hi })
    }

    /// The unit edge `[-1/2, 1/2)`.
    pub const fn unit() -> Self {
        Self { lo: -0.5, hi: 0.5 }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn translated(&self, s: f64) -> Self {
        Self { lo: self.lo + s, hi: self.hi + s }
    }

    /// `e1 ∩ e2` as `(lo, hi)`, or `None` when empty.
    pub fn intersect(&self, other: &Self) -> Option<(f64, f64)> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (hi > lo).then_some((lo, hi))
    }
}

// ---------------------------------------------------------------------------
// Normal distribution and error function

/// `erf(x)` to about 1e-16 absolute.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    if ax < 3.0 {
        erf_series(x)
    } else {
        x.signum() * (1.0 - erfc_cf(ax))
    }
}

/// `erfc(x) = 1 − erf(x)`, relatively accurate in the right tail.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        2.0 - erfc(-x)
    } else if x < 2.0 {
        1.0 - erf_series(x)
    } else {
        erfc_cf(x)
    }
}

// erf(x) = 2/√π · e^{−x²} Σ 2ⁿ x^{2n+1} / (1·3·…·(2n+1)); all terms positive.
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

// Continued fraction erfc(x) = e^{−x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …)))).
fn erfc_cf(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for i in 1..5000 {
        let a = i as f64 * 0.5;
        d = x + a * d;
        d = if d.abs() < tiny { 1.0 / tiny } else { 1.0 / d };
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (f * PI.sqrt())
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 − Φ(x)`.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// `Φ(hi) − Φ(lo)` without cancellation in either tail.
pub fn norm_mass(lo: f64, hi: f64) -> f64 {
    if lo >= 0.0 {
        norm_sf(lo) - norm_sf(hi)
    } else if hi <= 0.0 {
        norm_cdf(hi) - norm_cdf(lo)
    } else {
        1.0 - norm_cdf(lo) - norm_sf(hi)
    }
}

/// Which normal quantity [`std_normal`] returns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormalFn {
    Pdf,
    Cdf,
    Erf,
}

pub fn std_normal(kind: NormalFn, x: f64) -> f64 {
    match kind {
        NormalFn::Pdf => norm_pdf(x),
        NormalFn::Cdf => norm_cdf(x),
        NormalFn::Erf => erf(x),
    }
}

// ---------------------------------------------------------------------------
// Sine and cosine integrals

/// `(Si(x), Cin(x))` with `Cin(x) = ∫₀ˣ (1 − cos u)/u du`.
pub fn sine_cosine_integrals(x: f64) -> (f64, f64) {
    let ax = x.abs();
    let (si, cin) = if ax <= 4.0 {
        si_cin_series(ax)
    } else {
        let (si, ci) = si_ci_cf(ax);
        (si, EULER_GAMMA + ax.ln() - ci)
    };
    (x.signum() * si, cin)
}

/// `Si(x) = ∫₀ˣ sin(u)/u du`.
pub fn sine_integral(x: f64) -> f64 {
    sine_cosine_integrals(x).0
}

/// `Cin(x) = ∫₀ˣ (1 − cos u)/u du`, an even entire function.
pub fn cin(x: f64) -> f64 {
    sine_cosine_integrals(x).1
}

fn si_cin_series(x: f64) -> (f64, f64) {
    if x == 0.0 {
        return (0.0, 0.0);
    }
    let x2 = x * x;
    // p holds ±x^k / k!
    let mut p = x;
    let mut si = x;
    let mut cin = 0.0;
    let mut k = 1.0;
    loop {
        p *= -x / (k + 1.0);
        let c = -p / (k + 1.0);
        cin += c;
        p *= x / (k + 2.0);
        let s = p / (k + 2.0);
        si += s;
        k += 2.0;
        if s.abs() < 1e-18 * si.abs() && c.abs() < 1e-18 * cin.abs().max(x2 * 1e-3) {
            break;
        }
    }
    (si, cin)
}

// Continued fraction for E₁(ix), valid for x ≳ 2.
fn si_ci_cf(x: f64) -> (f64, f64) {
    let tiny = 1e-300;
    let mut b = Complex64::new(1.0, x);
    let mut c = Complex64::new(1.0 / tiny, 0.0);
    let mut d = b.inv();
    let mut h = d;
    for i in 2..1000 {
        let a = -((i - 1) * (i - 1)) as f64;
        b += 2.0;
        d = (d * a + b).inv();
        c = b + c.inv() * a;
        let del = c * d;
        h *= del;
        if (del.re - 1.0).abs() + del.im.abs() < 1e-16 {
            break;
        }
    }
    let h = Complex64::new(x.cos(), -x.sin()) * h;
    (FRAC_PI_2 + h.im, -h.re)
}

// ---------------------------------------------------------------------------
// Quadrature

/// Result of an adaptive quadrature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

const GK_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_W: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const G_W: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = GK_W[7] * fc;
    let mut gauss = G_W[3] * fc;
    for i in 0..7 {
        let dx = h * GK_X[i];
        let pair = f(c - dx) + f(c + dx);
        kron += GK_W[i] * pair;
        if i % 2 == 1 {
            gauss += G_W[i / 2] * pair;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod (7/15) quadrature of `f` over `[a, b]`
/// to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<Quadrature> {
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0 });
    }
    let (value, error) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let (mut total, mut err) = (value, error);
    let mut evaluations = 1;
    while !(err <= tol) && evaluations < 4000 {
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2 });
        evaluations += 2;
    }
    if !(err <= tol) {
        return Err(Error::Quadrature { tol, estimate: total, error: err });
    }
    // Re-sum to shed drift from the running updates.
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    Ok(Quadrature { value, error })
}

// ---------------------------------------------------------------------------
// Pairing kernels

/// `|e1 ∩ e2|`.
pub fn overlap_kernel(e1: &Interval1D, e2: &Interval1D) -> f64 {
    e1.intersect(e2).map_or(0.0, |(lo, hi)| hi - lo)
}

fn sinc(y: f64) -> f64 {
    if y.abs() < 1e-4 {
        let y2 = y * y;
        1.0 - y2 / 6.0 * (1.0 - y2 / 20.0)
    } else {
        y.sin() / y
    }
}

/// `∫_{e1∩e2} e^{iθx} dx`.
pub fn osc_kernel(e1: &Interval1D, e2: &Interval1D, theta: f64) -> Complex64 {
    match e1.intersect(e2) {
        None => Complex64::new(0.0, 0.0),
        Some((lo, hi)) => {
            let len = hi - lo;
            let mid = 0.5 * (lo + hi);
            Complex64::from_polar(len * sinc(0.5 * theta * len), theta * mid)
        }
    }
}

// φ(w) − w·Q(w) for w ≥ 0: the smooth part of the second antiderivative of ρ.
fn gauss_ramp_excess(w: f64) -> f64 {
    norm_pdf(w) - w * norm_sf(w)
}

/// `⟨χ_{e1} ⋆ ρ_v, χ_{e2}⟩ = ∫_{e2} [Φ((x−a)/√v) − Φ((x−b)/√v)] dx`.
pub fn heat_pair_kernel(e1: &Interval1D, e2: &Interval1D, v: f64) -> f64 {
    let overlap = overlap_kernel(e1, e2);
    if v <= 0.0 {
        return overlap;
    }
    let s = v.sqrt();
    let g = |z: f64| s * gauss_ramp_excess(z.abs() / s);
    let (a, b, c, d) = (e1.lo, e1.hi, e2.lo, e2.hi);
    let value = overlap + g(d - a) - g(d - b) - g(c - a) + g(c - b);
    value.clamp(0.0, e1.len().min(e2.len()))
}

/// `(χ_e ⋆ ρ_v)(x)`.
pub fn heat_apply(e: &Interval1D, v: f64, x: f64) -> f64 {
    if v <= 0.0 {
        return if e.lo <= x && x < e.hi { 1.0 } else { 0.0 };
    }
    let s = v.sqrt();
    norm_mass((x - e.hi) / s, (x - e.lo) / s)
}

// Probabilists' Hermite polynomial Heₙ.
fn hermite_he(n: u32, y: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, y);
    if n == 0 {
        return h0;
    }
    for k in 1..n {
        let h2 = y * h1 - k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

// n-th derivative of the N(0, σ²) density.
fn gauss_density_deriv(n: u32, y: f64, sigma: f64) -> f64 {
    let w = y / sigma;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    sign * hermite_he(n, w) * norm_pdf(w) / sigma.powi(n as i32 + 1)
}

/// Largest derivative order accepted by [`heat_deriv_kernel`].
pub const MAX_DERIV_ORDER: u32 = 4;

/// `∫_{e2} ∂ₓʲ (χ_{e1} ⋆ ρ_v)(x) dx` for `1 ≤ j ≤ 4`.
pub fn heat_deriv_kernel(e1: &Interval1D, e2: &Interval1D, v: f64, order: u32) -> Result<f64> {
    if order == 0 {
        return Ok(heat_pair_kernel(e1, e2, v));
    }
    if order > MAX_DERIV_ORDER {
        return Err(Error::InvalidArgument(format!("derivative order {order} above {MAX_DERIV_ORDER}")));
    }
    if v <= 0.0 {
        return Err(Error::InvalidArgument("derivative kernels need v > 0".into()));
    }
    let s = v.sqrt();
    // ∂^{j-1}(χ⋆ρ)(x) evaluated at the endpoints of e2.
    let prim = |x: f64| -> f64 {
        if order == 1 {
            heat_apply(e1, v, x)
        } else {
            gauss_density_deriv(order - 2, x - e1.lo, s) - gauss_density_deriv(order - 2, x - e1.hi, s)
        }
    };
    Ok(prim(e2.hi) - prim(e2.lo))
}

/// Largest moment accepted by [`multiplier_kernel`].
pub const MAX_MOMENT: u32 = 4;

/// `∫_{e1∩e2} x^m e^{−u x²/2} dx` for `0 ≤ m ≤ 4`.
pub fn multiplier_kernel(e1: &Interval1D, e2: &Interval1D, u: f64, m: u32) -> Result<f64> {
    if m > MAX_MOMENT {
        return Err(Error::InvalidArgument(format!("moment {m} above {MAX_MOMENT}")));
    }
    if u < 0.0 {
        return Err(Error::InvalidArgument(format!("multiplier exponent must be >= 0, got {u}")));
    }
    Ok(match e1.intersect(e2) {
        None => 0.0,
        Some((lo, hi)) => gauss_moment(lo, hi, u, m),
    })
}

/// `∫_lo^hi x^m e^{−u x²/2} dx`.
pub fn gauss_moment(lo: f64, hi: f64, u: f64, m: u32) -> f64 {
    let reach = lo.abs().max(hi.abs());
    if u * reach * reach <= 2.0 {
        // Σₙ (−u/2)ⁿ/n! ∫ x^{2n+m}
        let mut coef = 1.0;
        let mut sum = 0.0;
        for n in 0..200 {
            let p = (2 * n + m + 1) as i32;
            let term = coef * (hi.powi(p) - lo.powi(p)) / p as f64;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() || (term == 0.0 && n > 0) {
                break;
            }
            coef *= -0.5 * u / (n + 1) as f64;
        }
        return sum;
    }
    let r = u.sqrt();
    let i0 = (2.0 * PI / u).sqrt() * norm_mass(lo * r, hi * r);
    let e = |x: f64| (-0.5 * u * x * x).exp();
    let i1 = (e(lo) - e(hi)) / u;
    let boundary = |k: i32| (lo.powi(k) * e(lo) - hi.powi(k) * e(hi)) / u;
    match m {
        0 => i0,
        1 => i1,
        2 => boundary(1) + i0 / u,
        3 => boundary(2) + 2.0 * i1 / u,
        _ => boundary(3) + 3.0 * (boundary(1) + i0 / u) / u,
    }
}

/// Unitary Fourier pairing `∫_{e2} (F₁χ_{e1})(ξ) dξ` with
/// `F₁g(ξ) = (2π)^{-1/2} ∫ g(x) e^{−iξx} dx`.
pub fn fourier_pair_kernel(e1: &Interval1D, e2: &Interval1D) -> Complex64 {
    fourier_pair_kernel_unnormalized(e1, e2) / (2.0 * PI).sqrt()
}

/// [`fourier_pair_kernel`] without the `(2π)^{-1/2}` normalizer.
pub fn fourier_pair_kernel_unnormalized(e1: &Interval1D, e2: &Interval1D) -> Complex64 {
    let (a, b, c, d) = (e1.lo, e1.hi, e2.lo, e2.hi);
    let si = sine_integral;
    let re = si(b * d) - si(b * c) - si(a * d) + si(a * c);
    let im = cin(a * d) - cin(a * c) - cin(b * d) + cin(b * c);
    Complex64::new(re, im)
}

// ---------------------------------------------------------------------------
// Gaussian integral kernels

/// One-dimensional kernel `K(x, x') = c·exp(−(αx² − 2βxx' + γx'²)/2)`,
/// acting as `(Kf)(x) = ∫ K(x, x') f(x') dx'`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussKernel {
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

fn sinhc(y: f64) -> f64 {
    if y.abs() < 1e-4 {
        1.0 + y * y / 6.0
    } else {
        y.sinh() / y
    }
}

fn tanhc(y: f64) -> f64 {
    if y.abs() < 1e-4 {
        1.0 - y * y / 3.0
    } else {
        y.tanh() / y
    }
}

impl GaussKernel {
    /// Kernel of `e^{tL}` for `L = (a/2)∂² − (b/2)x²` with `a > 0`, `b ≥ 0`.
    pub fn mehler(a: f64, b: f64, t: f64) -> Result<Self> {
        if !(a > 0.0 && b >= 0.0 && t > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Mehler kernel needs dx > 0, dp >= 0, t > 0; got {a}, {b}, {t}"
            )));
        }
        let w = (a * b).sqrt() * t;
        let big_a = a * t * sinhc(w);
        let big_b = 0.5 * b * t * tanhc(0.5 * w);
        Ok(Self {
            c: 1.0 / (2.0 * PI * big_a).sqrt(),
            alpha: 1.0 / big_a + big_b,
            beta: 1.0 / big_a,
            gamma: 1.0 / big_a + big_b,
        })
    }

    /// Kernel of `f ↦ ρ_v ⋆ (e^{−u x²/2} f)`: one averaged step of a walk
    /// that multiplies by a momentum phase and then shifts.
    pub fn shift_after_multiply(v: f64, u: f64) -> Result<Self> {
        if !(v > 0.0 && u >= 0.0) {
            return Err(Error::InvalidArgument(format!("need v > 0 and u >= 0, got {v}, {u}")));
        }
        Ok(Self {
            c: 1.0 / (2.0 * PI * v).sqrt(),
            alpha: 1.0 / v,
            beta: 1.0 / v,
            gamma: 1.0 / v + u,
        })
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &GaussKernel) -> Self {
        let p = self.gamma + first.alpha;
        Self {
            c: self.c * first.c * (2.0 * PI / p).sqrt(),
            alpha: self.alpha - self.beta * self.beta / p,
            beta: self.beta * first.beta / p,
            gamma: first.gamma - first.beta * first.beta / p,
        }
    }

    /// `self` composed with itself `m` times, by repeated squaring.
    pub fn power(&self, m: u32) -> Self {
        assert!(m >= 1, "kernel power needs m >= 1");
        let mut result: Option<GaussKernel> = None;
        let mut base = *self;
        let mut e = m;
        while e > 0 {
            if e & 1 == 1 {
                result = Some(match result {
                    None => base,
                    Some(r) => r.after(&base),
                });
            }
            e >>= 1;
            if e > 0 {
                base = base.after(&base);
            }
        }
        result.expect("m >= 1")
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.c * (-0.5 * (self.alpha * x * x - 2.0 * self.beta * x * y + self.gamma * y * y)).exp()
    }

    /// `(K χ_e)(x)` in closed form.
    pub fn apply_indicator(&self, e: &Interval1D, x: f64) -> f64 {
        let g = self.gamma;
        let mu = self.beta * x / g;
        let r = g.sqrt();
        let damp = (-0.5 * (self.alpha - self.beta * self.beta / g) * x * x).exp();
        self.c * (2.0 * PI / g).sqrt() * damp * norm_mass(r * (e.lo - mu), r * (e.hi - mu))
    }

    /// `⟨K χ_{e1}, χ_{e2}⟩`, inner integral closed form, outer adaptive.
    pub fn pair(&self, e1: &Interval1D, e2: &Interval1D, tol: f64) -> Result<f64> {
        let q = integrate(|x| self.apply_indicator(e1, x), e2.lo, e2.hi, tol)?;
        Ok(q.value)
    }
}

/// `⟨e^{tL}χ_{e1}, χ_{e2}⟩` for `L = (dx/2)∂² − (dp/2)x²`, to absolute
/// tolerance 1e-12.
pub fn mehler_pair_kernel(e1: &Interval1D, e2: &Interval1D, dx: f64, dp: f64, t: f64) -> Result<f64> {
    let k = GaussKernel::mehler(dx, dp, t)?;
    Ok(k.pair(e1, e2, 1e-12)?.clamp(0.0, e1.len().min(e2.len())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn iv(lo: f64, hi: f64) -> Interval1D {
        Interval1D::new(lo, hi).unwrap()
    }

    // Plain composite Simpson, independent of the adaptive integrator.
    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn normal_examples() {
        assert_eq!(norm_cdf(0.0), 0.5);
        assert_eq!(erf(0.0), 0.0);
        assert_abs_diff_eq!(norm_cdf(0.5), 0.691_462_461_274_013_1, epsilon = 1e-15);
    }

    #[test]
    fn erf_matches_libm() {
        let mut x = -8.0;
        while x <= 8.0 {
            assert_abs_diff_eq!(erf(x), libm::erf(x), epsilon = 1e-15);
            assert_abs_diff_eq!(erfc(x), libm::erfc(x), epsilon = 1e-15);
            if x >= 2.0 {
                let rel = (erfc(x) - libm::erfc(x)).abs() / libm::erfc(x);
                assert!(rel < 1e-13, "erfc({x}) rel err {rel}");
            }
            x += 0.01;
        }
    }

    #[test]
    fn cdf_is_monotone() {
        let mut prev = 0.0;
        for i in -8000..=8000 {
            let v = norm_cdf(i as f64 * 1e-3);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn sine_integral_values() {
        assert_eq!(sine_integral(0.0), 0.0);
        assert_abs_diff_eq!(sine_integral(1.0), 0.946_083_070_367_183, epsilon = 1e-15);
        assert_abs_diff_eq!(sine_integral(FRAC_PI_2 * 2.0), 1.851_937_051_982_466_2, epsilon = 1e-14);
        // Si(∞) = π/2
        assert_abs_diff_eq!(sine_integral(1e8), FRAC_PI_2, epsilon = 1e-8);
        for x in [0.3, 2.0, 3.99, 4.01, 7.5, 16.0, 40.0] {
            assert_abs_diff_eq!(sine_integral(-x), -sine_integral(x), epsilon = 0.0);
            let oracle = simpson(sinc, 0.0, x, 20_000);
            assert_abs_diff_eq!(sine_integral(x), oracle, epsilon = 1e-12);
            let oracle = simpson(|u| if u == 0.0 { 0.0 } else { (1.0 - u.cos()) / u }, 0.0, x, 20_000);
            assert_abs_diff_eq!(cin(x), oracle, epsilon = 1e-12);
        }
    }

    #[test]
    fn integrate_polynomial_and_failure() {
        let q = integrate(|x| x * x * x, 0.0, 2.0, 1e-14).unwrap();
        assert_abs_diff_eq!(q.value, 4.0, epsilon = 1e-13);
        let q = integrate(|x| (-x * x).exp(), -10.0, 10.0, 1e-13).unwrap();
        assert_abs_diff_eq!(q.value, PI.sqrt(), epsilon = 1e-12);
        let r = integrate(|x| 1.0 / x, 0.0, 1.0, 1e-10);
        assert!(r.is_err(), "{r:?}");
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(overlap_kernel(&Interval1D::unit(), &Interval1D::unit()), 1.0);
        assert_eq!(overlap_kernel(&Interval1D::unit(), &iv(-0.25, 0.75)), 0.75);
        assert_eq!(overlap_kernel(&iv(0.0, 1.0), &iv(2.0, 3.0)), 0.0);
    }

    #[test]
    fn osc_examples() {
        let u = Interval1D::unit();
        assert_eq!(osc_kernel(&u, &iv(-0.25, 0.75), 0.0).re, 0.75);
        let z = osc_kernel(&u, &u, PI);
        let re = simpson(|x| (PI * x).cos(), -0.5, 0.5, 2000);
        assert_abs_diff_eq!(z.re, re, epsilon = 1e-12);
        assert_abs_diff_eq!(z.re, 2.0 / PI, epsilon = 1e-15);
        assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn heat_examples() {
        let u = Interval1D::unit();
        assert_eq!(heat_pair_kernel(&u, &u, 0.0), 1.0);
        // 2-D oracle: inner integral by Simpson on the Gaussian, outer Simpson.
        let v = 0.1;
        let oracle = simpson(
            |x| simpson(|y| (-(x - y) * (x - y) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt(), -0.5, 0.5, 400),
            -0.5,
            0.5,
            400,
        );
        assert_abs_diff_eq!(heat_pair_kernel(&u, &u, v), oracle, epsilon = 1e-9);
        assert_abs_diff_eq!(heat_pair_kernel(&u, &u, v), 0.747_8, epsilon = 1e-4);
    }

    #[test]
    fn heat_deriv_examples() {
        let u = Interval1D::unit();
        assert_abs_diff_eq!(heat_deriv_kernel(&u, &u, 0.7, 1).unwrap(), 0.0, epsilon = 1e-16);
        let oracle = simpson(|x| norm_pdf(x + 0.5) - norm_pdf(x - 0.5), 0.0, 1.0, 2000);
        assert_abs_diff_eq!(heat_deriv_kernel(&u, &iv(0.0, 1.0), 1.0, 1).unwrap(), oracle, epsilon = 1e-13);
        assert!(heat_deriv_kernel(&u, &u, 1.0, 5).is_err());
    }

    #[test]
    fn multiplier_examples() {
        let u = Interval1D::unit();
        assert_eq!(multiplier_kernel(&u, &u, 0.0, 0).unwrap(), 1.0);
        let oracle = simpson(|x| (-x * x / 2.0).exp(), -0.5, 0.5, 2000);
        assert_abs_diff_eq!(multiplier_kernel(&u, &u, 1.0, 0).unwrap(), oracle, epsilon = 1e-13);
        assert_abs_diff_eq!(oracle, 0.959_85, epsilon = 1e-5);
    }

    #[test]
    fn fourier_examples() {
        let u = Interval1D::unit();
        let oracle = simpson(|x| (2.0 / PI).sqrt() * if x == 0.0 { 0.5 } else { (x / 2.0).sin() / x }, -0.5, 0.5, 2000);
        let z = fourier_pair_kernel(&u, &u);
        assert_abs_diff_eq!(z.re, oracle, epsilon = 1e-13);
        assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(z.re, 0.397_56, epsilon = 1e-5);
        assert_abs_diff_eq!(fourier_pair_kernel_unnormalized(&u, &u).re, 4.0 * sine_integral(0.25), epsilon = 1e-16);
    }

    #[test]
    fn fourier_wide_window_and_plancherel() {
        // Pairing against a wide window converges to (2π)^{-1/2}·2π·χ(0)·…,
        // not to the L² mass; the mass itself is ∫|F₁χ|² = |e1| = 1.
        let u = Interval1D::unit();
        let wide = iv(-50.0, 50.0);
        let oracle = simpson(|x| (2.0 / PI).sqrt() * if x == 0.0 { 0.5 } else { (x / 2.0).sin() / x }, -50.0, 50.0, 200_000);
        assert_abs_diff_eq!(fourier_pair_kernel(&u, &wide).re, oracle, epsilon = 1e-10);
        let mass = simpson(
            |x| {
                let f = if x == 0.0 { 1.0 } else { 2.0 * (x / 2.0).sin() / x };
                f * f / (2.0 * PI)
            },
            -4000.0,
            4000.0,
            2_000_000,
        );
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn gauss_kernel_composition_matches_quadrature() {
        let k1 = GaussKernel::shift_after_multiply(0.3, 0.7).unwrap();
        let k2 = GaussKernel::mehler(1.3, 0.4, 0.6).unwrap();
        let composed = k2.after(&k1);
        for (x, y) in [(0.0, 0.0), (0.3, -0.8), (-1.2, 0.4)] {
            let q = integrate(|z| k2.eval(x, z) * k1.eval(z, y), -15.0, 15.0, 1e-14).unwrap();
            assert_abs_diff_eq!(composed.eval(x, y), q.value, epsilon = 1e-12);
        }
        let p = k1.power(5);
        let manual = k1.after(&k1).after(&k1).after(&k1).after(&k1);
        assert_abs_diff_eq!(p.eval(0.2, -0.1), manual.eval(0.2, -0.1), epsilon = 1e-13);
    }

    #[test]
    fn mehler_semigroup_and_limits() {
        let u = Interval1D::unit();
        let near_heat = mehler_pair_kernel(&u, &u, 1.0, 1e-12, 0.1).unwrap();
        assert_abs_diff_eq!(near_heat, heat_pair_kernel(&u, &u, 0.1), epsilon = 1e-10);
        let a = GaussKernel::mehler(1.0, 1.0, 0.2).unwrap();
        let b = GaussKernel::mehler(1.0, 1.0, 0.3).unwrap();
        let ab = b.after(&a);
        let direct = GaussKernel::mehler(1.0, 1.0, 0.5).unwrap();
        for f in [ab.c / direct.c, ab.alpha / direct.alpha, ab.beta / direct.beta, ab.gamma / direct.gamma] {
            assert_abs_diff_eq!(f, 1.0, epsilon = 1e-12);
        }
    }

    fn arb_interval() -> impl Strategy<Value = Interval1D> {
        (-1.5..1.5f64, 0.05..2.0f64).prop_map(|(lo, w)| Interval1D { lo, hi: lo + w })
    }

    proptest! {
        #[test]
        fn heat_symmetric_and_bounded(e1 in arb_interval(), e2 in arb_interval(), v in 0.0..2.0f64) {
            let a = heat_pair_kernel(&e1, &e2, v);
            let b = heat_pair_kernel(&e2, &e1, v);
            prop_assert!((a - b).abs() < 1e-14);
            prop_assert!(a >= 0.0 && a <= e1.len().min(e2.len()));
        }

        #[test]
        fn heat_deriv_is_shift_derivative(e1 in arb_interval(), e2 in arb_interval(), v in 0.05..2.0f64) {
            let h = 1e-5;
            let fd = (heat_pair_kernel(&e1, &e2.translated(-h), v) - heat_pair_kernel(&e1, &e2.translated(h), v)) / (2.0 * h);
            // ∫_{e2} ∂ₓ(χ⋆ρ) equals −d/ds ∫_{e2+s} (χ⋆ρ) … with the sign flip folded in.
            let d1 = heat_deriv_kernel(&e1, &e2, v, 1).unwrap();
            prop_assert!((fd + d1).abs() < 1e-6, "fd {fd} d1 {d1}");
        }

        #[test]
        fn osc_modulus_bound(e1 in arb_interval(), e2 in arb_interval(), theta in -20.0..20.0f64) {
            prop_assert!(osc_kernel(&e1, &e2, theta).norm() <= overlap_kernel(&e1, &e2) * (1.0 + 1e-15));
        }

        #[test]
        fn multiplier_moments_match_quadrature(e1 in arb_interval(), e2 in arb_interval(), u in 0.0..30.0f64, m in 0u32..=4) {
            let k = multiplier_kernel(&e1, &e2, u, m).unwrap();
            let oracle = match e1.intersect(&e2) {
                None => 0.0,
                Some((lo, hi)) => simpson(|x| x.powi(m as i32) * (-u * x * x / 2.0).exp(), lo, hi, 4000),
            };
            prop_assert!((k - oracle).abs() < 1e-10, "k {k} oracle {oracle}");
        }

        #[test]
        fn fourier_cauchy_schwarz(e1 in arb_interval(), e2 in arb_interval()) {
            prop_assert!(fourier_pair_kernel(&e1, &e2).norm() <= (e1.len() * e2.len()).sqrt());
        }

        #[test]
        fn mehler_symmetric(e1 in arb_interval(), e2 in arb_interval(), dx in 0.2..2.0f64, dp in 0.0..2.0f64, t in 0.05..1.5f64) {
            let a = mehler_pair_kernel(&e1, &e2, dx, dp, t).unwrap();
            let b = mehler_pair_kernel(&e2, &e1, dx, dp, t).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
            prop_assert!(a <= heat_pair_kernel(&e1, &e2, t * dx) + 1e-12);
        }
    }
}
