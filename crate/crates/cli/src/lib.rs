//! Command implementations behind the `weylwalk` binary.

pub mod config;

use std::io::Write;
use std::path::{Path, PathBuf};

use weylwalk_core::experiments::read_summaries;
use weylwalk_core::{persist, run_scenario, RunRecord, SCENARIO_NAMES};

use crate::config::{check_overrides, Config, ConfigError, Override};

pub const ENV_OUT: &str = "WEYLWALK_OUT";
pub const ENV_SEED: &str = "WEYLWALK_SEED";
pub const DEFAULT_SEED: u64 = 7;

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Pass = 0,
    /// Usage, configuration or hypothesis error.
    Config = 1,
    /// A scenario ran and failed one of its checks.
    Failed = 2,
}

/// Settings shared by the commands, already merged from flags,
/// environment and file.
#[derive(Clone, Debug)]
pub struct Context {
    pub config: Config,
    pub seed: u64,
    pub out: PathBuf,
}

impl Context {
    /// Flags win over the environment, which wins over the file.
    pub fn new(
        config: Option<&Path>,
        seed: Option<u64>,
        out: Option<PathBuf>,
        overrides: &[Override],
    ) -> Result<Self, ConfigError> {
        let config = match config {
            Some(p) => Config::load(p)?,
            None => Config::bundled(),
        };
        let env_seed = match std::env::var(ENV_SEED) {
            Ok(s) => Some(
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| ConfigError::Invalid(format!("{ENV_SEED}='{s}' is not an unsigned integer")))?,
            ),
            Err(_) => None,
        };
        let env_out = std::env::var_os(ENV_OUT).map(PathBuf::from);
        let mut seed = seed.or(env_seed).or(config.seed).unwrap_or(DEFAULT_SEED);
        let mut out = out.or(env_out).or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from("runs"));
        for o in overrides.iter().filter(|o| o.path.is_empty()) {
            match (o.target.as_str(), &o.value) {
                ("seed", serde_json::Value::Number(n)) if n.is_u64() => seed = n.as_u64().unwrap(),
                ("out", serde_json::Value::String(s)) => out = PathBuf::from(s),
                (t, v) => return Err(ConfigError::Invalid(format!("override {t}={v} has the wrong type"))),
            }
        }
        Ok(Self { config, seed, out })
    }

    fn names(&self, scenario: &str) -> Result<Vec<String>, ConfigError> {
        if scenario == "all" {
            Ok(self.config.selected())
        } else if SCENARIO_NAMES.contains(&scenario) {
            Ok(vec![scenario.to_string()])
        } else {
            Err(ConfigError::UnknownScenario(scenario.to_string()))
        }
    }
}

fn verdict_line(r: &RunRecord, csv: &Path) -> String {
    let metric = r.key_metric.as_ref().map(|(k, v)| format!(" {k}={v:.6}")).unwrap_or_default();
    if let Some(why) = &r.refusal {
        format!("REFUSED {}: {why}", r.scenario)
    } else if r.passed() {
        format!("PASS {}{metric} ({} ms) -> {}", r.scenario, r.wall_ms, csv.display())
    } else {
        format!("FAIL {}{metric} failed: {} -> {}", r.scenario, r.failures().join(", "), csv.display())
    }
}

/// Runs one scenario or `all`, persisting each record under `ctx.out`.
pub fn cmd_run(ctx: &Context, scenario: &str, overrides: &[Override], w: &mut impl Write) -> Result<Exit, ConfigError> {
    let names = ctx.names(scenario)?;
    check_overrides(&ctx.config, &names, overrides)?;
    let scenarios = names.iter().map(|n| ctx.config.scenario(n, overrides)).collect::<Result<Vec<_>, _>>()?;

    let (mut refused, mut failed) = (false, false);
    for s in &scenarios {
        let rec = run_scenario(s, ctx.seed).map_err(|e| ConfigError::Invalid(format!("{}: {e}", s.name())))?;
        let (csv, _) = persist(&rec, &ctx.out).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        refused |= rec.refusal.is_some();
        failed |= rec.refusal.is_none() && !rec.passed();
        writeln!(w, "{}", verdict_line(&rec, &csv)).ok();
    }
    Ok(if refused {
        Exit::Config
    } else if failed {
        Exit::Failed
    } else {
        Exit::Pass
    })
}

/// Prints the hypothesis report of every selected scenario.
pub fn cmd_validate(ctx: &Context, scenario: &str, w: &mut impl Write) -> Result<Exit, ConfigError> {
    let mut ok = true;
    for name in ctx.names(scenario)? {
        let s = ctx.config.scenario(&name, &[])?;
        let report = s.hypotheses().map_err(|e| ConfigError::Invalid(format!("{name}: {e}")))?;
        if report.entries.is_empty() {
            writeln!(w, "{name}: no hypotheses").ok();
            continue;
        }
        for e in &report.entries {
            writeln!(w, "{name}: {} [{:e}, {:e}] {}", e.name, e.lo, e.hi, if e.holds { "holds" } else { "FAILS" }).ok();
        }
        if !report.all_hold() {
            ok = false;
            writeln!(w, "{name}: {}", report.violations().join(", ")).ok();
        }
    }
    Ok(if ok { Exit::Pass } else { Exit::Config })
}

/// Markdown table of the JSON summaries in `dir`.
pub fn cmd_report(dir: &Path, w: &mut impl Write) -> Result<Exit, ConfigError> {
    if !dir.is_dir() {
        return Err(ConfigError::Invalid(format!("{}: no such directory", dir.display())));
    }
    let summaries = read_summaries(dir).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    if summaries.is_empty() {
        writeln!(w, "no runs found in {}", dir.display()).ok();
        return Ok(Exit::Config);
    }
    writeln!(w, "| scenario | seed | key metric | verdict |").ok();
    writeln!(w, "|---|---|---|---|").ok();
    let mut not_passed = 0;
    for s in &summaries {
        let metric = s.key_metric.as_ref().map(|(k, v)| format!("{k} = {v:.6}")).unwrap_or_else(|| "-".into());
        let verdict = match (&s.refusal, s.passed) {
            (Some(why), _) => format!("refused ({why})"),
            (None, true) => "pass".into(),
            (None, false) => {
                let failed: Vec<_> = s.verdicts.iter().filter(|v| !v.pass).map(|v| v.name.as_str()).collect();
                format!("fail ({})", failed.join(", "))
            }
        };
        not_passed += usize::from(s.refusal.is_some() || !s.passed);
        writeln!(w, "| {} | {} | {metric} | {verdict} |", s.scenario, s.seed).ok();
    }
    if not_passed > 0 {
        writeln!(w, "\n{not_passed} of {} runs did not pass", summaries.len()).ok();
    }
    Ok(Exit::Pass)
}

/// Scenario names, marking those the configuration lists.
pub fn cmd_list(ctx: &Context, w: &mut impl Write) -> Exit {
    let selected = ctx.config.selected();
    for name in SCENARIO_NAMES {
        let mark = if selected.iter().any(|s| s == name) { "*" } else { " " };
        writeln!(w, "{mark} {name}").ok();
    }
    Exit::Pass
}
