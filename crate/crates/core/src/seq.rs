//! Closed-form infinite real sequences with certified tail sums.
//!
//! Every infinite product and every `ℓ¹` membership question in the crate is
//! reduced to a tail sum of one of these families, which is either exact or
//! bracketed by integral comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parametric tail of a [`ParamSeq`]. Terms are indexed `k = 1, 2, …`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeqKind {
    Zero,
    FiniteSupport { values: Vec<f64> },
    /// `c · q^k`
    Geometric { c: f64, q: f64 },
    /// `c · k^{-p}`
    Power { c: f64, p: f64 },
}

impl SeqKind {
    fn term(&self, k: usize) -> f64 {
        match self {
            SeqKind::Zero => 0.0,
            SeqKind::FiniteSupport { values } => values.get(k - 1).copied().unwrap_or(0.0),
            SeqKind::Geometric { c, q } => c * q.powi(k as i32),
            SeqKind::Power { c, p } => c * (k as f64).powf(-p),
        }
    }

    /// Enclosure of `Σ_{k>m} |term(k)|`.
    fn tail_abs(&self, m: usize) -> (f64, f64) {
        match *self {
            SeqKind::Zero => (0.0, 0.0),
            SeqKind::FiniteSupport { ref values } => {
                let s: f64 = values.iter().skip(m).map(|v| v.abs()).sum();
                (s, s)
            }
            SeqKind::Geometric { c, q } => {
                let s = c.abs() * q.powi(m as i32 + 1) / (1.0 - q);
                (s, s)
            }
            SeqKind::Power { c, p } => {
                if c == 0.0 {
                    (0.0, 0.0)
                } else if p <= 1.0 {
                    (f64::INFINITY, f64::INFINITY)
                } else {
                    let lo = c * ((m + 1) as f64).powf(1.0 - p) / (p - 1.0);
                    let hi = if m == 0 {
                        c + c / (p - 1.0)
                    } else {
                        c * (m as f64).powf(1.0 - p) / (p - 1.0)
                    };
                    (lo, hi)
                }
            }
        }
    }

    /// `sup_{j ≥ k} |term(j)|`.
    fn sup_abs_from(&self, k: usize) -> f64 {
        match self {
            SeqKind::Zero => 0.0,
            SeqKind::FiniteSupport { values } => values
                .iter()
                .skip(k - 1)
                .fold(0.0_f64, |acc, v| acc.max(v.abs())),
            SeqKind::Geometric { .. } | SeqKind::Power { .. } => self.term(k).abs(),
        }
    }

    fn explicit_len(&self) -> usize {
        match self {
            SeqKind::FiniteSupport { values } => values.len(),
            _ => 0,
        }
    }

    fn describe(&self) -> String {
        match self {
            SeqKind::Zero => "Zero".into(),
            SeqKind::FiniteSupport { values } => format!("FiniteSupport({values:?})"),
            SeqKind::Geometric { c, q } => format!("Geometric(c={c}, q={q})"),
            SeqKind::Power { c, p } => format!("Power(c={c}, p={p})"),
        }
    }
}

/// An infinite real sequence: an optional explicit prefix overriding the
/// first terms of a parametric family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParamSeq")]
pub struct ParamSeq {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    prefix: Vec<f64>,
    #[serde(flatten)]
    kind: SeqKind,
}

#[derive(Deserialize)]
struct RawParamSeq {
    #[serde(default)]
    prefix: Vec<f64>,
    #[serde(flatten)]
    kind: SeqKind,
}

impl TryFrom<RawParamSeq> for ParamSeq {
    type Error = Error;

    fn try_from(raw: RawParamSeq) -> Result<Self> {
        ParamSeq::from_kind(raw.kind)?.with_prefix(raw.prefix)
    }
}

/// Enclosure of an absolute tail sum `Σ_{k>start} |s_k|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailSum {
    pub lo: f64,
    pub hi: f64,
    pub start_index: usize,
}

impl TailSum {
    pub fn is_finite(&self) -> bool {
        self.hi.is_finite()
    }

    pub fn width(&self) -> f64 {
        if self.hi.is_infinite() {
            f64::INFINITY
        } else {
            self.hi - self.lo
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidSeq(format!("{what} contains non-finite value {v}")));
    }
    Ok(())
}

impl ParamSeq {
    pub fn zero() -> Self {
        Self { prefix: Vec::new(), kind: SeqKind::Zero }
    }

    pub fn finite(values: Vec<f64>) -> Result<Self> {
        check_finite(&values, "FiniteSupport")?;
        Ok(Self { prefix: Vec::new(), kind: SeqKind::FiniteSupport { values } })
    }

    /// Basis vector `e_k` scaled by `value`.
    pub fn unit(k: usize, value: f64) -> Self {
        assert!(k >= 1, "sequence indices start at 1");
        let mut values = vec![0.0; k];
        values[k - 1] = value;
        Self { prefix: Vec::new(), kind: SeqKind::FiniteSupport { values } }
    }

    pub fn geometric(c: f64, q: f64) -> Result<Self> {
        if !(c.is_finite() && q > 0.0 && q < 1.0) {
            return Err(Error::InvalidSeq(format!(
                "Geometric needs finite c and 0 < q < 1, got c={c}, q={q}"
            )));
        }
        Ok(Self { prefix: Vec::new(), kind: SeqKind::Geometric { c, q } })
    }

    pub fn power(c: f64, p: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0 && p.is_finite() && p > 0.0) {
            return Err(Error::InvalidSeq(format!(
                "Power needs c >= 0 and p > 0, got c={c}, p={p}"
            )));
        }
        Ok(Self { prefix: Vec::new(), kind: SeqKind::Power { c, p } })
    }

    /// Builds a sequence from a parsed kind, validating its invariants.
    pub fn from_kind(kind: SeqKind) -> Result<Self> {
        match kind {
            SeqKind::Zero => Ok(Self::zero()),
            SeqKind::FiniteSupport { values } => Self::finite(values),
            SeqKind::Geometric { c, q } => Self::geometric(c, q),
            SeqKind::Power { c, p } => Self::power(c, p),
        }
    }

    /// Replaces the first `prefix.len()` terms by explicit values.
    pub fn with_prefix(mut self, prefix: Vec<f64>) -> Result<Self> {
        check_finite(&prefix, "prefix")?;
        self.prefix = prefix;
        Ok(self)
    }

    pub fn kind(&self) -> &SeqKind {
        &self.kind
    }

    pub fn prefix(&self) -> &[f64] {
        &self.prefix
    }

    pub fn term(&self, k: usize) -> f64 {
        debug_assert!(k >= 1, "sequence indices start at 1");
        match self.prefix.get(k.wrapping_sub(1)) {
            Some(v) => *v,
            None => self.kind.term(k),
        }
    }

    /// Number of leading terms that are stored explicitly (prefix or finite
    /// support); beyond it the sequence follows its parametric formula.
    pub fn explicit_len(&self) -> usize {
        self.prefix.len().max(self.kind.explicit_len())
    }

    /// True if the sequence has only finitely many nonzero terms.
    pub fn is_finite_support(&self) -> bool {
        match self.kind {
            SeqKind::Zero | SeqKind::FiniteSupport { .. } => true,
            SeqKind::Geometric { c, .. } | SeqKind::Power { c, .. } => c == 0.0,
        }
    }

    /// The explicitly stored terms `1..=explicit_len()` as a vector.
    pub fn explicit_terms(&self) -> Vec<f64> {
        (1..=self.explicit_len()).map(|k| self.term(k)).collect()
    }

    pub fn tail_abs_sum(&self, n: usize) -> TailSum {
        let explicit: f64 = self.prefix.iter().skip(n).map(|v| v.abs()).sum();
        let m = n.max(self.prefix.len());
        let (lo, hi) = self.kind.tail_abs(m);
        // Widen by a few ulps so rounding in the closed forms cannot exclude the true value.
        let lo = (explicit + lo) * (1.0 - 4.0 * f64::EPSILON);
        let hi = (explicit + hi) * (1.0 + 4.0 * f64::EPSILON);
        TailSum { lo, hi, start_index: n }
    }

    /// `sup_{j ≥ k} |term(j)|`.
    pub fn sup_abs_from(&self, k: usize) -> f64 {
        let k = k.max(1);
        let explicit = self
            .prefix
            .iter()
            .skip(k - 1)
            .fold(0.0_f64, |acc, v| acc.max(v.abs()));
        explicit.max(self.kind.sup_abs_from(k.max(self.prefix.len() + 1)))
    }

    /// `P_m s`: the first `m` terms, zero afterwards.
    pub fn truncated(&self, m: usize) -> Self {
        let values: Vec<f64> = (1..=m).map(|k| self.term(k)).collect();
        Self { prefix: Vec::new(), kind: SeqKind::FiniteSupport { values } }
    }

    /// `s − P_m s`: zero for the first `m` terms, unchanged afterwards.
    pub fn without_head(&self, m: usize) -> Self {
        let len = m.max(self.prefix.len());
        let mut prefix: Vec<f64> = (1..=len).map(|k| self.term(k)).collect();
        prefix.iter_mut().take(m).for_each(|v| *v = 0.0);
        let kind = match &self.kind {
            SeqKind::FiniteSupport { values } if values.len() <= len => SeqKind::Zero,
            other => other.clone(),
        };
        Self { prefix, kind }
    }

    /// Sum of the explicit inner product `Σ_k self_k · other_k` when `other`
    /// has finite support.
    pub fn dot_finite(&self, other: &[f64]) -> f64 {
        other
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.term(i + 1))
            .sum()
    }

    pub fn describe(&self) -> String {
        if self.prefix.is_empty() {
            self.kind.describe()
        } else {
            format!("{} with prefix {:?}", self.kind.describe(), self.prefix)
        }
    }
}

fn pow_term(index: usize, value: f64, alpha: f64) -> Result<f64> {
    if value < 0.0 && alpha.fract() != 0.0 {
        return Err(Error::NegativeFractionalPower { index, value, alpha });
    }
    if value == 0.0 && alpha < 0.0 {
        return Err(Error::ZeroDenominator { index });
    }
    Ok(value.powf(alpha))
}

/// Elementwise power `s_k ↦ s_k^α`.
pub fn pow_seq(s: &ParamSeq, alpha: f64) -> Result<ParamSeq> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("pow_seq exponent must be finite and nonzero, got {alpha}")));
    }
    let prefix = s
        .prefix
        .iter()
        .enumerate()
        .map(|(i, v)| pow_term(i + 1, *v, alpha))
        .collect::<Result<Vec<_>>>()?;
    let kind = match s.kind {
        SeqKind::Zero if alpha > 0.0 => SeqKind::Zero,
        SeqKind::FiniteSupport { ref values } if alpha > 0.0 => SeqKind::FiniteSupport {
            values: values
                .iter()
                .enumerate()
                .map(|(i, v)| pow_term(i + 1, *v, alpha))
                .collect::<Result<Vec<_>>>()?,
        },
        SeqKind::Geometric { c, q } if alpha > 0.0 => {
            let c = pow_term(s.prefix.len() + 1, c, alpha)?;
            SeqKind::Geometric { c, q: q.powf(alpha) }
        }
        SeqKind::Power { c, p } if alpha > 0.0 => SeqKind::Power { c: c.powf(alpha), p: p * alpha },
        _ => return Err(Error::NotDecaying(format!("{}^{alpha}", s.kind.describe()))),
    };
    Ok(ParamSeq { prefix, kind })
}

/// Elementwise quotient `num_k / den_k`, kept inside the closed-form families.
pub fn ratio_seq(num: &ParamSeq, den: &ParamSeq) -> Result<ParamSeq> {
    let unsupported = || Error::UnsupportedPair {
        op: "ratio",
        num: num.describe(),
        den: den.describe(),
    };
    let explicit = num.prefix.len().max(den.prefix.len());
    let ratio_at = |k: usize| -> Result<f64> {
        let d = den.term(k);
        if d <= 0.0 {
            return Err(Error::ZeroDenominator { index: k });
        }
        Ok(num.term(k) / d)
    };

    match (&num.kind, &den.kind) {
        (SeqKind::Zero, _) | (SeqKind::FiniteSupport { .. }, _) => {
            let len = explicit.max(num.kind.explicit_len());
            let values = (1..=len).map(ratio_at).collect::<Result<Vec<_>>>()?;
            Ok(ParamSeq { prefix: Vec::new(), kind: SeqKind::FiniteSupport { values } })
        }
        (_, SeqKind::Zero) | (_, SeqKind::FiniteSupport { .. }) => {
            Err(Error::ZeroDenominator { index: explicit.max(den.kind.explicit_len()) + 1 })
        }
        (SeqKind::Geometric { c: c1, q: q1 }, SeqKind::Geometric { c: c2, q: q2 }) => {
            if *c2 <= 0.0 {
                return Err(Error::ZeroDenominator { index: explicit + 1 });
            }
            let prefix = (1..=explicit).map(ratio_at).collect::<Result<Vec<_>>>()?;
            let q = q1 / q2;
            if q >= 1.0 {
                return Err(Error::NotDecaying(format!("ratio with q = {q}")));
            }
            Ok(ParamSeq { prefix, kind: SeqKind::Geometric { c: c1 / c2, q } })
        }
        (SeqKind::Power { c: c1, p: p1 }, SeqKind::Power { c: c2, p: p2 }) => {
            if *c2 <= 0.0 {
                return Err(Error::ZeroDenominator { index: explicit + 1 });
            }
            let prefix = (1..=explicit).map(ratio_at).collect::<Result<Vec<_>>>()?;
            let p = p1 - p2;
            if p <= 0.0 {
                return Err(Error::NotDecaying(format!("ratio with p = {p}")));
            }
            Ok(ParamSeq { prefix, kind: SeqKind::Power { c: c1 / c2, p } })
        }
        _ => Err(unsupported()),
    }
}

/// Sign of a divergent tail of a [`SeqCombo`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Divergence {
    ToPlusInfinity,
    ToMinusInfinity,
}

/// Finite linear combination `Σ w_i s_i` of parametric sequences.
///
/// Blocks accumulate one term per parametric shift, so translation never
/// leaves the representable family.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SeqCombo {
    terms: Vec<(f64, ParamSeq)>,
}

impl SeqCombo {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(coef: f64, seq: ParamSeq) -> Self {
        let mut c = Self::new();
        c.add(coef, &seq);
        c
    }

    pub fn terms(&self) -> &[(f64, ParamSeq)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Adds `coef · seq`, merging with an identical sequence already present.
    pub fn add(&mut self, coef: f64, seq: &ParamSeq) {
        if coef == 0.0 || matches!(seq.kind, SeqKind::Zero) && seq.prefix.iter().all(|v| *v == 0.0) {
            return;
        }
        if let Some(pos) = self.terms.iter().position(|(_, s)| s == seq) {
            self.terms[pos].0 += coef;
            if self.terms[pos].0 == 0.0 {
                self.terms.remove(pos);
            }
        } else {
            self.terms.push((coef, seq.clone()));
        }
    }

    pub fn add_combo(&mut self, coef: f64, other: &SeqCombo) {
        for (w, s) in &other.terms {
            self.add(coef * w, s);
        }
    }

    pub fn term(&self, k: usize) -> f64 {
        self.terms.iter().map(|(w, s)| w * s.term(k)).sum()
    }

    pub fn explicit_len(&self) -> usize {
        self.terms.iter().map(|(_, s)| s.explicit_len()).max().unwrap_or(0)
    }

    /// Parametric tails with equal ratio or exponent merged into one net
    /// family, valid beyond [`Self::explicit_len`].
    fn merged_tails(&self) -> Vec<SeqKind> {
        let mut out: Vec<SeqKind> = Vec::new();
        for (w, s) in &self.terms {
            match s.kind {
                SeqKind::Geometric { c, q } => {
                    match out.iter_mut().find(|g| matches!(g, SeqKind::Geometric { q: gq, .. } if *gq == q)) {
                        Some(SeqKind::Geometric { c: gc, .. }) => *gc += w * c,
                        _ => out.push(SeqKind::Geometric { c: w * c, q }),
                    }
                }
                SeqKind::Power { c, p } => {
                    match out.iter_mut().find(|g| matches!(g, SeqKind::Power { p: gp, .. } if *gp == p)) {
                        Some(SeqKind::Power { c: gc, .. }) => *gc += w * c,
                        _ => out.push(SeqKind::Power { c: w * c, p }),
                    }
                }
                SeqKind::Zero | SeqKind::FiniteSupport { .. } => {}
            }
        }
        // Bounds below only need magnitudes.
        for g in &mut out {
            match g {
                SeqKind::Geometric { c, .. } | SeqKind::Power { c, .. } => *c = c.abs(),
                _ => {}
            }
        }
        out
    }

    /// Upper bound on `Σ_{k>n} |Σ w_i s_i(k)|`.
    pub fn tail_abs_upper(&self, n: usize) -> f64 {
        let len = self.explicit_len();
        let explicit: f64 = (n + 1..=len).map(|k| self.term(k).abs()).sum();
        let m = n.max(len);
        let parametric: f64 = self.merged_tails().iter().map(|g| g.tail_abs(m).1).sum();
        (explicit + parametric) * (1.0 + 4.0 * f64::EPSILON)
    }

    /// Upper bound on `sup_{j≥k} |Σ w_i s_i(j)|`.
    pub fn sup_abs_from(&self, k: usize) -> f64 {
        let k = k.max(1);
        let len = self.explicit_len();
        let explicit = (k..=len).fold(0.0_f64, |acc, j| acc.max(self.term(j).abs()));
        let from = k.max(len + 1);
        let parametric: f64 = self.merged_tails().iter().map(|g| g.sup_abs_from(from)).sum();
        explicit.max(parametric) * (1.0 + 4.0 * f64::EPSILON)
    }

    /// Decides whether `Σ_k (Σ w_i s_i(k))` diverges, and in which direction.
    ///
    /// Only `Power` terms with `p ≤ 1` can diverge; equal exponents are
    /// combined and the smallest exponent with a nonzero net coefficient
    /// dominates every other term.
    pub fn divergence(&self) -> Option<Divergence> {
        let mut groups: Vec<(f64, f64)> = Vec::new();
        for (w, s) in &self.terms {
            if let SeqKind::Power { c, p } = s.kind {
                if p <= 1.0 && c != 0.0 {
                    match groups.iter_mut().find(|(gp, _)| *gp == p) {
                        Some(g) => g.1 += w * c,
                        None => groups.push((p, w * c)),
                    }
                }
            }
        }
        groups.sort_by(|a, b| a.0.total_cmp(&b.0));
        groups.into_iter().find(|(_, net)| *net != 0.0).map(|(_, net)| {
            if net > 0.0 {
                Divergence::ToPlusInfinity
            } else {
                Divergence::ToMinusInfinity
            }
        })
    }
}
