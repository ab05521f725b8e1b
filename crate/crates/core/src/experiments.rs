//! Named end-to-end scenarios, their run records and persistence.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::blocks::{pair_plain, Block, BlockSpec, CertifiedValue};
use crate::error::{Error, Result};
use crate::kernels::{fourier_pair_kernel, integrate, Interval1D};
use crate::operators::{
    bound_check_ldb, bound_check_xexp, hypothesis_check, mom_shift_pairing, mom_taylor_sum, pair_fn, pair_u, pair_uhat,
    taylor_remainder_bound, taylor_sum, DiagLabel, DiagOp, FourierNorm, HypothesisReport,
};
use crate::seq::ParamSeq;
use crate::walks::{
    convergence_study, linear_fit, loglog_slope, mc_pairing_keyed, stream_key, target_pairing, walk_stream,
    IncrementDist, IncrementKind, StudyMethod, WalkMode, WalkSpec,
};

// ---------------------------------------------------------------------------
// Scenario parameters

fn geo(c: f64, q: f64) -> ParamSeq {
    ParamSeq::geometric(c, q).expect("valid default")
}

fn finite(v: &[f64]) -> ParamSeq {
    ParamSeq::finite(v.to_vec()).expect("valid default")
}

fn dyadic(k: u32) -> Vec<f64> {
    (0..=k).map(|i| 0.5f64.powi(i as i32)).collect()
}

fn doubling(max: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |m| Some(m * 2)).take_while(|m| *m <= max).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuityParams {
    pub h: ParamSeq,
    pub h_divergent: ParamSeq,
    pub t_list: Vec<f64>,
    pub divergent_t: Vec<f64>,
    pub q: BlockSpec,
    pub final_tol: f64,
    pub eps: f64,
}

impl Default for ContinuityParams {
    fn default() -> Self {
        Self {
            h: geo(1.0, 0.5),
            h_divergent: ParamSeq::power(1.0, 1.0).expect("valid default"),
            t_list: dyadic(6),
            divergent_t: vec![0.1, 1.0],
            q: BlockSpec::unit(),
            final_tol: 0.05,
            eps: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftTruncationParams {
    pub h: ParamSeq,
    pub n_list: Vec<usize>,
    pub q: BlockSpec,
    pub eps: f64,
}

impl Default for ShiftTruncationParams {
    fn default() -> Self {
        Self { h: geo(1.0, 0.5), n_list: vec![0, 1, 2, 4, 8, 16], q: BlockSpec::unit(), eps: 1e-12 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrivialityParams {
    pub d: ParamSeq,
    pub n_list: Vec<usize>,
    pub slope_target: f64,
    pub slope_tol: f64,
    pub t_hat: f64,
    pub hat_tol: f64,
    pub t_zero: Vec<f64>,
    pub q: BlockSpec,
    pub eps: f64,
}

impl Default for TrivialityParams {
    fn default() -> Self {
        Self {
            d: ParamSeq::power(0.1, 2.0).expect("valid default"),
            n_list: (0..=8).map(|i| (100.0 * 10f64.powf(i as f64 / 4.0)).round() as usize).collect(),
            slope_target: -(0.4 / std::f64::consts::PI).sqrt(),
            slope_tol: 0.03,
            t_hat: 1e-3,
            hat_tol: 0.05,
            t_zero: vec![1e-3, 0.1, 1.0],
            q: BlockSpec::unit(),
            eps: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FourierParams {
    pub n_max: usize,
    pub r2_min: f64,
    pub c_tol: f64,
    pub eps: f64,
}

impl Default for FourierParams {
    fn default() -> Self {
        Self { n_max: 12, r2_min: 0.999, c_tol: 1e-8, eps: 1e-12 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaylorParams {
    pub s: f64,
    pub t_list: Vec<f64>,
    pub orders: Vec<u32>,
    pub d: ParamSeq,
    /// Shift direction for `taylor_check`, momentum for `mom_taylor_check`.
    pub direction: Vec<f64>,
    pub q: BlockSpec,
    pub w: BlockSpec,
    pub eps: f64,
}

impl Default for TaylorParams {
    fn default() -> Self {
        Self {
            s: 1.0,
            t_list: vec![0.1, 0.5, 1.0],
            orders: vec![0, 1, 2, 3],
            d: finite(&[1.0, 0.5]),
            direction: vec![0.3, -0.2],
            q: BlockSpec::unit(),
            w: BlockSpec::from_edges(&[[0.0, 1.0]]),
            eps: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundParams {
    pub draws: usize,
    pub t_range: [f64; 2],
    pub eps: f64,
}

impl Default for BoundParams {
    fn default() -> Self {
        Self { draws: 200, t_range: [0.01, 10.0], eps: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionParams {
    pub d: ParamSeq,
    pub trunc_dim: usize,
    pub t: f64,
    pub m_list: Vec<usize>,
    pub samples: usize,
    pub sigmas: f64,
    pub enum_d: ParamSeq,
    pub enum_trunc_dim: usize,
    pub enum_m_list: Vec<usize>,
    pub gap_ratio: f64,
    pub gap_ratio_from: usize,
    pub slope_window: [f64; 2],
    pub q: BlockSpec,
    pub w: BlockSpec,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        Self {
            d: geo(0.5, 0.5),
            trunc_dim: 4,
            t: 1.0,
            m_list: doubling(16),
            samples: 100_000,
            sigmas: 3.0,
            enum_d: finite(&[1.0, 0.5]),
            enum_trunc_dim: 2,
            enum_m_list: doubling(64),
            gap_ratio: 0.25,
            gap_ratio_from: 4,
            slope_window: [-1.5, -0.5],
            q: BlockSpec::unit(),
            w: BlockSpec::unit(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OscillatorParams {
    pub dx: ParamSeq,
    pub dp: ParamSeq,
    pub b: ParamSeq,
    pub increments: IncrementKind,
    pub trunc_dim: usize,
    pub t: f64,
    pub m: usize,
    pub samples: usize,
    pub sigmas: f64,
    pub slack: f64,
    /// Mixing probabilities; only read by `pmix_chernoff`.
    pub p_list: Vec<f64>,
    /// Deterministic iterate study, only for alternating Gaussian walks.
    pub iterate_m_list: Vec<usize>,
    pub iterate_w: BlockSpec,
    pub slope_window: [f64; 2],
    pub q: BlockSpec,
    pub w: BlockSpec,
}

impl Default for OscillatorParams {
    fn default() -> Self {
        Self {
            dx: finite(&[1.0]),
            dp: finite(&[1.0]),
            b: geo(1.0, 0.5),
            increments: IncrementKind::Gaussian,
            trunc_dim: 1,
            t: 0.5,
            m: 32,
            samples: 1_000_000,
            sigmas: 3.0,
            slack: 0.01,
            p_list: vec![0.3, 0.7],
            iterate_m_list: doubling(64),
            iterate_w: BlockSpec::from_edges(&[[0.0, 1.0]]),
            slope_window: [-1.5, -0.5],
            q: BlockSpec::unit(),
            w: BlockSpec::unit(),
        }
    }
}

/// A named scenario with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case")]
pub enum Scenario {
    ContinuityCriterion(ContinuityParams),
    ShiftTruncation(ShiftTruncationParams),
    TrivialityContrast(TrivialityParams),
    FourierDecay(FourierParams),
    TaylorCheck(TaylorParams),
    MomTaylorCheck(TaylorParams),
    BoundChecks(BoundParams),
    DiffusionChernoff(DiffusionParams),
    OscillatorChernoff(OscillatorParams),
    PmixChernoff(OscillatorParams),
}

/// Every scenario name, in run order.
pub const SCENARIO_NAMES: [&str; 10] = [
    "continuity_criterion",
    "shift_truncation",
    "triviality_contrast",
    "fourier_decay",
    "taylor_check",
    "mom_taylor_check",
    "bound_checks",
    "diffusion_chernoff",
    "oscillator_chernoff",
    "pmix_chernoff",
];

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::ContinuityCriterion(_) => SCENARIO_NAMES[0],
            Scenario::ShiftTruncation(_) => SCENARIO_NAMES[1],
            Scenario::TrivialityContrast(_) => SCENARIO_NAMES[2],
            Scenario::FourierDecay(_) => SCENARIO_NAMES[3],
            Scenario::TaylorCheck(_) => SCENARIO_NAMES[4],
            Scenario::MomTaylorCheck(_) => SCENARIO_NAMES[5],
            Scenario::BoundChecks(_) => SCENARIO_NAMES[6],
            Scenario::DiffusionChernoff(_) => SCENARIO_NAMES[7],
            Scenario::OscillatorChernoff(_) => SCENARIO_NAMES[8],
            Scenario::PmixChernoff(_) => SCENARIO_NAMES[9],
        }
    }

    pub fn params_json(&self) -> serde_json::Value {
        let v = serde_json::to_value(self).expect("parameters serialize");
        v.get("params").cloned().unwrap_or(serde_json::Value::Null)
    }

    /// Hypotheses of the theorem the scenario exercises. Empty when the
    /// scenario contrasts a hypothesis with its failure.
    pub fn hypotheses(&self) -> Result<HypothesisReport> {
        let mut r = HypothesisReport::default();
        match self {
            Scenario::DiffusionChernoff(p) => {
                r.check_sqrt_nuclear(&DiagOp::new(p.d.clone(), DiagLabel::D)?);
            }
            Scenario::OscillatorChernoff(p) | Scenario::PmixChernoff(p) => {
                let dx = DiagOp::new(p.dx.clone(), DiagLabel::Dx)?;
                let dp = DiagOp::new(p.dp.clone(), DiagLabel::Dp)?;
                let b = DiagOp::new(p.b.clone(), DiagLabel::B)?;
                r = hypothesis_check(&dx, &dp, &b, p.increments.third_abs_moment());
            }
            Scenario::TaylorCheck(p) | Scenario::MomTaylorCheck(p) => {
                let d = DiagOp::new(p.d.clone(), DiagLabel::D)?;
                r.check_nuclear(&d);
            }
            _ => {}
        }
        Ok(r)
    }
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario::ContinuityCriterion(ContinuityParams::default())
    }
}

/// Unknown scenario name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownScenario(pub String);

impl fmt::Display for UnknownScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown scenario '{}'; valid names: {}", self.0, SCENARIO_NAMES.join(", "))
    }
}

impl std::error::Error for UnknownScenario {}

impl FromStr for Scenario {
    type Err = UnknownScenario;

    /// The named scenario with default parameters.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "continuity_criterion" => Scenario::ContinuityCriterion(Default::default()),
            "shift_truncation" => Scenario::ShiftTruncation(Default::default()),
            "triviality_contrast" => Scenario::TrivialityContrast(Default::default()),
            "fourier_decay" => Scenario::FourierDecay(Default::default()),
            "taylor_check" => Scenario::TaylorCheck(Default::default()),
            "mom_taylor_check" => Scenario::MomTaylorCheck(Default::default()),
            "bound_checks" => Scenario::BoundChecks(Default::default()),
            "diffusion_chernoff" => Scenario::DiffusionChernoff(Default::default()),
            "oscillator_chernoff" => Scenario::OscillatorChernoff(Default::default()),
            "pmix_chernoff" => Scenario::PmixChernoff(Default::default()),
            other => return Err(UnknownScenario(other.to_string())),
        })
    }
}

// ---------------------------------------------------------------------------
// Run records

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub label: String,
    pub value: f64,
    pub uncertainty: f64,
    pub verdict: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: String,
    pub params: serde_json::Value,
    pub seed: u64,
    pub rows: Vec<Row>,
    pub verdicts: Vec<Verdict>,
    /// Violated hypotheses when the scenario refused to run.
    pub refusal: Option<String>,
    pub key_metric: Option<(String, f64)>,
    pub wall_ms: u64,
}

impl RunRecord {
    pub fn new(scenario: &Scenario, seed: u64) -> Self {
        Self {
            scenario: scenario.name().to_string(),
            params: scenario.params_json(),
            seed,
            rows: Vec::new(),
            verdicts: Vec::new(),
            refusal: None,
            key_metric: None,
            wall_ms: 0,
        }
    }

    pub fn row(&mut self, label: impl Into<String>, value: f64, uncertainty: f64) {
        self.rows.push(Row { label: label.into(), value, uncertainty, verdict: None });
    }

    /// A measurement row that also carries a verdict.
    pub fn check(&mut self, label: impl Into<String>, value: f64, uncertainty: f64, pass: bool) {
        let label = label.into();
        self.verdicts.push(Verdict { name: label.clone(), pass });
        self.rows.push(Row { label, value, uncertainty, verdict: Some(pass) });
    }

    pub fn key(&mut self, label: &str, value: f64) {
        self.key_metric = Some((label.to_string(), value));
    }

    pub fn refused(&self) -> bool {
        self.refusal.is_some()
    }

    pub fn passed(&self) -> bool {
        !self.refused() && self.verdicts.iter().all(|v| v.pass)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.verdicts.iter().filter(|v| !v.pass).map(|v| v.name.as_str()).collect()
    }
}

/// JSON summary written next to the CSV rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub params: serde_json::Value,
    pub seed: u64,
    pub verdicts: Vec<Verdict>,
    pub refusal: Option<String>,
    pub key_metric: Option<(String, f64)>,
    pub passed: bool,
    pub wall_ms: u64,
}

impl From<&RunRecord> for Summary {
    fn from(r: &RunRecord) -> Self {
        Self {
            scenario: r.scenario.clone(),
            params: r.params.clone(),
            seed: r.seed,
            verdicts: r.verdicts.clone(),
            refusal: r.refusal.clone(),
            key_metric: r.key_metric.clone(),
            passed: r.passed(),
            wall_ms: r.wall_ms,
        }
    }
}

/// `<scenario>_<seed>` file stem.
pub fn file_stem(scenario: &str, seed: u64) -> String {
    format!("{scenario}_{seed}")
}

/// Write `<stem>.csv` (scenario,label,value,uncertainty,verdict) and
/// `<stem>.json`.
pub fn persist(r: &RunRecord, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(out_dir).map_err(|source| Error::Io { path: out_dir.to_path_buf(), source })?;
    let stem = file_stem(&r.scenario, r.seed);
    let csv_path = out_dir.join(format!("{stem}.csv"));
    let json_path = out_dir.join(format!("{stem}.json"));

    let csv_err = |source| Error::Csv { path: csv_path.clone(), source };
    let mut w = csv::Writer::from_path(&csv_path).map_err(csv_err)?;
    w.write_record(["scenario", "label", "value", "uncertainty", "verdict"]).map_err(csv_err)?;
    for row in &r.rows {
        let verdict = match row.verdict {
            Some(true) => "pass",
            Some(false) => "fail",
            None => "",
        };
        w.write_record([
            r.scenario.as_str(),
            row.label.as_str(),
            &format!("{:e}", row.value),
            &format!("{:e}", row.uncertainty),
            verdict,
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io { path: csv_path.clone(), source })?;

    let json = serde_json::to_string_pretty(&Summary::from(r))
        .map_err(|source| Error::Json { path: json_path.clone(), source })?;
    fs::write(&json_path, json + "\n").map_err(|source| Error::Io { path: json_path.clone(), source })?;
    Ok((csv_path, json_path))
}

/// Read back the rows of a persisted CSV.
pub fn read_rows(path: &Path) -> Result<Vec<(String, Row)>> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let num = |i: usize| rec[i].parse::<f64>().map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())));
        let verdict = match &rec[4] {
            "pass" => Some(true),
            "fail" => Some(false),
            _ => None,
        };
        out.push((rec[0].to_string(), Row { label: rec[1].to_string(), value: num(2)?, uncertainty: num(3)?, verdict }));
    }
    Ok(out)
}

/// Read every `*.json` summary in `dir`, sorted by file name.
pub fn read_summaries(dir: &Path) -> Result<Vec<Summary>> {
    let entries = fs::read_dir(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let text = fs::read_to_string(&p).map_err(|source| Error::Io { path: p.clone(), source })?;
            serde_json::from_str(&text).map_err(|source| Error::Json { path: p.clone(), source })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Running

/// Run a scenario. Failed hypotheses yield a refusal record rather than an
/// error.
pub fn run_scenario(s: &Scenario, seed: u64) -> Result<RunRecord> {
    let start = Instant::now();
    let mut rec = RunRecord::new(s, seed);
    let hyp = s.hypotheses()?;
    if !hyp.all_hold() {
        rec.refusal = Some(hyp.violations().join(", "));
        return Ok(rec);
    }
    let outcome = match s {
        Scenario::ContinuityCriterion(p) => continuity(p, &mut rec),
        Scenario::ShiftTruncation(p) => shift_truncation(p, &mut rec),
        Scenario::TrivialityContrast(p) => triviality(p, &mut rec),
        Scenario::FourierDecay(p) => fourier(p, &mut rec),
        Scenario::TaylorCheck(p) => taylor(p, false, &mut rec),
        Scenario::MomTaylorCheck(p) => taylor(p, true, &mut rec),
        Scenario::BoundChecks(p) => bounds(p, seed, &mut rec),
        Scenario::DiffusionChernoff(p) => diffusion(p, seed, &mut rec),
        Scenario::OscillatorChernoff(p) => oscillator(p, None, seed, &mut rec),
        Scenario::PmixChernoff(p) => p.p_list.iter().try_for_each(|&pm| oscillator(p, Some(pm), seed, &mut rec)),
    };
    match outcome {
        Err(Error::Hypothesis(msg)) => {
            rec.refusal = Some(msg);
            rec.rows.clear();
            rec.verdicts.clear();
        }
        other => other?,
    }
    rec.wall_ms = start.elapsed().as_millis() as u64;
    Ok(rec)
}

fn upper(v: &CertifiedValue) -> f64 {
    v.mid.re + v.rad
}

/// `Σ_k |h_k| / width_k`, bounded above.
fn weighted_l1(h: &ParamSeq, q: &Block) -> f64 {
    let n = h.explicit_len().max(q.explicit_len());
    let head: f64 = (1..=n).map(|k| h.term(k).abs() / q.width(k)).sum();
    let min_width = 1.0 - q.tail_delta().sup_abs_from(n + 1);
    head + h.tail_abs_sum(n).hi / min_width
}

/// `‖χ_{Q+a} − χ_{Q+b}‖² = 2λ(Q) − 2⟨χ_{Q+a}, χ_{Q+b}⟩`.
fn dist_sq(a: &Block, b: &Block, lam: &CertifiedValue, eps: f64) -> (f64, f64) {
    let p = pair_plain(a, b, eps);
    (2.0 * (lam.mid.re - p.mid.re), 2.0 * (lam.rad + p.rad))
}

fn continuity(p: &ContinuityParams, rec: &mut RunRecord) -> Result<()> {
    let q = p.q.build()?;
    let lam = q.measure(p.eps);
    let l1 = weighted_l1(&p.h, &q);
    rec.row("sum |h_k|/width_k", l1, 0.0);
    let mut prev = f64::INFINITY;
    let mut decreasing = true;
    let mut last = f64::NAN;
    for &t in &p.t_list {
        let (d, u) = dist_sq(&q.shift(t, &p.h), &q, &lam, p.eps);
        let bound = 2.0 * upper(&lam) * t.abs() * l1;
        rec.check(format!("dist_sq t={t} <= {bound:e}"), d, u, d + u <= bound);
        decreasing &= d < prev;
        prev = d;
        last = d;
    }
    rec.check("dist_sq decreasing in t", prev, 0.0, decreasing);
    rec.check(format!("dist_sq at smallest t < {}", p.final_tol), last, 0.0, last < p.final_tol);
    rec.key("dist_sq at smallest t", last);
    for &t in &p.divergent_t {
        let v = pair_plain(&q, &q.shift(t, &p.h_divergent), p.eps);
        rec.check(format!("divergent overlap t={t} exactly 0"), v.mid.re, v.rad, v.is_exact_zero());
    }
    Ok(())
}

fn shift_truncation(p: &ShiftTruncationParams, rec: &mut RunRecord) -> Result<()> {
    let q = p.q.build()?;
    let lam = q.measure(p.eps);
    let full = q.shift(1.0, &p.h);
    let mut prev = f64::INFINITY;
    let mut decreasing = true;
    for &n in &p.n_list {
        let (d, u) = dist_sq(&q.shift(1.0, &p.h.truncated(n)), &full, &lam, p.eps);
        let bound = 2.0 * upper(&lam) * weighted_l1(&p.h.without_head(n), &q);
        rec.check(format!("dist_sq n={n} <= {bound:e}"), d, u, d + u <= bound);
        decreasing &= d < prev;
        prev = d;
    }
    rec.check("dist_sq decreasing in n", prev, 0.0, decreasing);
    rec.key("dist_sq at largest n", prev);
    Ok(())
}

fn triviality(p: &TrivialityParams, rec: &mut RunRecord) -> Result<()> {
    let q = p.q.build()?;
    let d = DiagOp::new(p.d.clone(), DiagLabel::D)?;
    rec.row("D nuclear", d.is_nuclear() as u8 as f64, 0.0);
    rec.row("D^{1/2} nuclear", d.sqrt_nuclear() as u8 as f64, 0.0);

    // ‖U_{D_n} χ_Q‖² = ⟨U_{2D_n} χ_Q, χ_Q⟩
    let mut ns = Vec::new();
    let mut norms = Vec::new();
    for &n in &p.n_list {
        let v = pair_u(2.0, &d.truncated(n), &q, &q, p.eps);
        rec.row(format!("norm_sq U_(D_{n}) chi"), v.mid.re, v.rad);
        ns.push(n as f64);
        norms.push(v.mid.re);
    }
    let slope = loglog_slope(&ns, &norms);
    let slope_ok = (slope - p.slope_target).abs() <= p.slope_tol;
    rec.check(format!("log-log slope within {} of {:.4}", p.slope_tol, p.slope_target), slope, 0.0, slope_ok);
    rec.key("slope", slope);

    let mut zero_ok = true;
    for &t in &p.t_zero {
        let v = pair_u(t, &d, &q, &q, p.eps);
        zero_ok &= v.is_exact_zero();
        rec.check(format!("<U_(tD) chi, chi> t={t} exactly 0"), v.mid.re, v.rad, v.is_exact_zero());
    }

    let lam = q.measure(p.eps);
    let one = pair_uhat(p.t_hat, &d, &q, &q, p.eps)?;
    let two = pair_uhat(2.0 * p.t_hat, &d, &q, &q, p.eps)?;
    let dist_sq = lam.mid.re - 2.0 * one.mid.re + two.mid.re;
    let rad_sq = lam.rad + 2.0 * one.rad + two.rad;
    let dist_hi = (dist_sq + rad_sq).max(0.0).sqrt();
    let hat_ok = dist_hi <= p.hat_tol;
    rec.check(format!("|Uhat_(tD) chi - chi| t={} <= {}", p.t_hat, p.hat_tol), dist_sq.max(0.0).sqrt(), dist_hi - dist_sq.max(0.0).sqrt(), hat_ok);
    rec.check("contrast: U trivial while Uhat continuous", 0.0, 0.0, slope_ok && zero_ok && hat_ok);
    Ok(())
}

// `(2π)^{-1/2} ∫_{-1/2}^{1/2} (2/ξ) sin(ξ/2) dξ` by quadrature.
fn fourier_constant_quadrature() -> Result<f64> {
    let f = |x: f64| if x == 0.0 { 1.0 } else { 2.0 * (0.5 * x).sin() / x };
    let q = integrate(f, -0.5, 0.5, 1e-15)?;
    Ok(q.value / (2.0 * std::f64::consts::PI).sqrt())
}

fn fourier(p: &FourierParams, rec: &mut RunRecord) -> Result<()> {
    let q = Block::unit();
    let c_quad = fourier_constant_quadrature()?;
    rec.row("c quadrature (unitary)", c_quad, 0.0);
    rec.row("c kernel (unitary)", fourier_pair_kernel(&Interval1D::unit(), &Interval1D::unit()).norm(), 0.0);
    for (norm, tag) in [(FourierNorm::Unitary, "unitary"), (FourierNorm::Unnormalized, "unnormalized")] {
        let mut ns = Vec::new();
        let mut logs = Vec::new();
        for n in 1..=p.n_max {
            let v = pair_fn(n, &q, &q, p.eps, norm);
            rec.row(format!("|<F_{n} chi, chi>| {tag}"), v.mid.norm(), v.rad);
            ns.push(n as f64);
            logs.push(v.mid.norm().ln());
        }
        let (slope, _, r2) = linear_fit(&ns, &logs);
        let c = slope.exp();
        rec.row(format!("c fit {tag}"), c, 0.0);
        rec.check(format!("R^2 {tag} > {}", p.r2_min), r2, 0.0, r2 > p.r2_min);
        rec.check(format!("c {tag} < 1"), c, 0.0, c < 1.0);
        if norm == FourierNorm::Unitary {
            rec.check(format!("c fit matches quadrature within {}", p.c_tol), c - c_quad, 0.0, (c - c_quad).abs() <= p.c_tol);
            rec.key("c unitary", c);
        }
    }
    Ok(())
}

fn taylor(p: &TaylorParams, momentum: bool, rec: &mut RunRecord) -> Result<()> {
    let d = DiagOp::new(p.d.clone(), DiagLabel::D)?;
    let q = p.q.build()?;
    let w = p.w.build()?;
    let norms = (upper(&q.measure(p.eps)) * upper(&w.measure(p.eps))).sqrt();
    let dir = ParamSeq::finite(p.direction.clone())?;
    let mut worst: f64 = 0.0;
    for &t in &p.t_list {
        let exact = if momentum {
            mom_shift_pairing(p.s, &d, &q, &w, &p.direction, t, p.eps)?
        } else {
            pair_u(p.s, &d, &q.shift(t, &dir), &w, p.eps)
        };
        for &n in &p.orders {
            let approx = if momentum {
                mom_taylor_sum(p.s, &d, &q, &w, &p.direction, t, n, p.eps)?
            } else {
                taylor_sum(p.s, &d, &q, &w, &p.direction, t, n, p.eps)?
            };
            let rem = (exact.mid - approx.mid).norm() + exact.rad + approx.rad;
            let bound = taylor_remainder_bound(p.s, &d, &p.direction, t, n, 1.0)? * norms;
            let ratio = rem / bound;
            worst = worst.max(ratio);
            rec.row(format!("remainder t={t} n={n}"), rem, 0.0);
            rec.row(format!("bound t={t} n={n}"), bound, 0.0);
            rec.check(format!("remainder/bound t={t} n={n} <= 1"), ratio, 0.0, ratio <= 1.0);
        }
    }
    rec.key("max remainder/bound", worst);
    Ok(())
}

fn bounds(p: &BoundParams, seed: u64, rec: &mut RunRecord) -> Result<()> {
    let key = stream_key("bound_checks");
    let (lt0, lt1) = (p.t_range[0].ln(), p.t_range[1].ln());
    let mut all_x = true;
    let mut all_l = true;
    for i in 0..p.draws {
        let mut rng = walk_stream(seed, key, i as u64);
        let t = rng.random_range(lt0..lt1).exp();
        let qd = rng.random_range(0.1..0.8);
        let d = DiagOp::new(ParamSeq::geometric(rng.random_range(0.05..2.0), qd)?, DiagLabel::D)?;
        let b = DiagOp::new(ParamSeq::geometric(rng.random_range(0.2..3.0), rng.random_range(qd + 0.05..0.95))?, DiagLabel::B)?;
        let edges: Vec<[f64; 2]> = (0..rng.random_range(0..3))
            .map(|_| {
                let lo = rng.random_range(-1.0..1.0);
                [lo, lo + rng.random_range(0.2..2.0)]
            })
            .collect();
        let q = BlockSpec {
            edges,
            shift: ParamSeq::geometric(rng.random_range(-0.5..0.5), 0.5)?,
            delta: ParamSeq::geometric(rng.random_range(-0.3..0.3), 0.5)?,
        }
        .build()?;
        let j = rng.random_range(1..=3);
        let x = bound_check_xexp(t, &d, j, &q, p.eps)?;
        let l = bound_check_ldb(t, &d, &b, &q, p.eps)?;
        all_x &= x.holds();
        all_l &= l.holds();
        rec.check(format!("draw {i} x-exp j={j} t={t:.4}"), x.lhs, x.rhs, x.holds());
        rec.check(format!("draw {i} L_DB t={t:.4}"), l.lhs, l.rhs, l.holds());
    }
    rec.check("all x-exp draws hold", all_x as u8 as f64, 0.0, all_x);
    rec.check("all L_DB draws hold", all_l as u8 as f64, 0.0, all_l);
    rec.key("draws", p.draws as f64);
    Ok(())
}

fn in_window(x: f64, w: [f64; 2]) -> bool {
    w[0] <= x && x <= w[1]
}

fn diffusion(p: &DiffusionParams, seed: u64, rec: &mut RunRecord) -> Result<()> {
    let q = p.q.build()?;
    let w = p.w.build()?;
    let d = DiagOp::new(p.d.clone(), DiagLabel::D)?;
    let dist = IncrementDist::new(IncrementKind::Gaussian, d, p.trunc_dim)?;
    let trunc = dist.truncation_bound(p.t);
    let spec = WalkSpec { mode: WalkMode::Coordinate, t: p.t, m: 1, dist_x: Some(dist), dist_p: None, q: q.clone(), w: w.clone() };
    rec.row("truncation bound", trunc, 0.0);
    let rows = convergence_study(&spec, &p.m_list, StudyMethod::MonteCarlo, p.samples, seed)?;
    rec.row("target", rows[0].target.re, 0.0);
    let mut worst: f64 = 0.0;
    for r in &rows {
        rec.row(format!("gaussian mc m={}", r.m), r.estimate.re, r.uncertainty);
        rec.check(format!("gaussian |mc - target| m={} <= {} stderr", r.m, p.sigmas), r.gap, r.uncertainty, r.gap <= p.sigmas * r.uncertainty);
        worst = worst.max(r.gap / r.uncertainty);
    }
    rec.key("max gap/stderr", worst);

    let d = DiagOp::new(p.enum_d.clone(), DiagLabel::D)?;
    let dist = IncrementDist::new(IncrementKind::Rademacher, d, p.enum_trunc_dim)?;
    let spec = WalkSpec { dist_x: Some(dist), ..spec };
    let rows = convergence_study(&spec, &p.enum_m_list, StudyMethod::Enumeration, 0, seed)?;
    for r in &rows {
        rec.row(format!("rademacher enum gap m={}", r.m), r.gap, r.uncertainty);
    }
    let last = rows.last().expect("nonempty");
    let from = rows
        .iter()
        .find(|r| r.m == p.gap_ratio_from)
        .ok_or_else(|| Error::InvalidArgument(format!("enum_m_list must contain {}", p.gap_ratio_from)))?;
    let ratio = last.gap / from.gap;
    rec.check(format!("gap m={} / gap m={} <= {}", last.m, from.m, p.gap_ratio), ratio, 0.0, ratio <= p.gap_ratio);
    let ms: Vec<f64> = rows.iter().map(|r| r.m as f64).collect();
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    let slope = loglog_slope(&ms, &gaps);
    rec.check(format!("rademacher log-log slope in [{}, {}]", p.slope_window[0], p.slope_window[1]), slope, 0.0, in_window(slope, p.slope_window));
    Ok(())
}

fn oscillator(p: &OscillatorParams, pmix: Option<f64>, seed: u64, rec: &mut RunRecord) -> Result<()> {
    let q = p.q.build()?;
    let w = p.w.build()?;
    let dx = DiagOp::new(p.dx.clone(), DiagLabel::Dx)?;
    let dp = DiagOp::new(p.dp.clone(), DiagLabel::Dp)?;
    let mode = match pmix {
        Some(pm) => WalkMode::Pmix { p: pm },
        None => WalkMode::Alternating,
    };
    let spec = WalkSpec {
        mode,
        t: p.t,
        m: p.m,
        dist_x: Some(IncrementDist::new(p.increments, dx, p.trunc_dim)?),
        dist_p: Some(IncrementDist::new(p.increments, dp, p.trunc_dim)?),
        q,
        w,
    };
    let tag = pmix.map_or(String::new(), |pm| format!(" p={pm}"));
    let target = target_pairing(&spec, 1e-10)?;
    let key = stream_key(&format!("{}{tag}", rec.scenario));
    let e = mc_pairing_keyed(&spec, p.samples, seed, key)?;
    let gap = (e.mean - target.mid).norm();
    rec.row(format!("target{tag}"), target.mid.re, target.rad);
    rec.row(format!("mc m={}{tag}", p.m), e.mean.re, e.stderr);
    rec.row(format!("mc imag m={}{tag}", p.m), e.mean.im, e.stderr);
    let tol = p.sigmas * e.stderr + p.slack;
    rec.check(format!("|mc - target|{tag} <= {} stderr + {}", p.sigmas, p.slack), gap, e.stderr, gap <= tol);
    rec.key(&format!("gap{tag}"), gap);

    if pmix.is_none() && p.increments == IncrementKind::Gaussian && !p.iterate_m_list.is_empty() {
        let spec = WalkSpec { w: p.iterate_w.build()?, ..spec };
        let rows = convergence_study(&spec, &p.iterate_m_list, StudyMethod::Iterate, 0, seed)?;
        for r in &rows {
            rec.row(format!("iterate gap m={}", r.m), r.gap, r.uncertainty);
        }
        let ms: Vec<f64> = rows.iter().map(|r| r.m as f64).collect();
        let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
        let slope = loglog_slope(&ms, &gaps);
        rec.check(format!("iterate log-log slope in [{}, {}]", p.slope_window[0], p.slope_window[1]), slope, 0.0, in_window(slope, p.slope_window));
    }
    Ok(())
}

/// A complex value as `(re, im)` for compact reporting.
pub fn split(z: Complex64) -> (f64, f64) {
    (z.re, z.im)
}
