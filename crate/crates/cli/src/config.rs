//! Experiment configuration: one TOML file with named sequences, blocks and
//! operators that scenario parameters refer to by name.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::{Map, Value};

use weylwalk_core::operators::{DiagLabel, DiagOp};
use weylwalk_core::{BlockSpec, ParamSeq, Scenario, SCENARIO_NAMES};

/// The configuration bundled with the binary; runs every scenario.
pub const DEFAULT_CONFIG: &str = include_str!("../config/default.toml");

/// Scenario groups accepted as override targets besides scenario names.
const WALK_SCENARIOS: [&str; 3] = ["diffusion_chernoff", "oscillator_chernoff", "pmix_chernoff"];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("unknown scenario '{0}'; valid names: {names}", names = SCENARIO_NAMES.join(", "))]
    UnknownScenario(String),
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    out: Option<PathBuf>,
    #[serde(default)]
    sequences: BTreeMap<String, toml::Table>,
    #[serde(default)]
    blocks: BTreeMap<String, toml::Table>,
    #[serde(default)]
    operators: BTreeMap<String, RawOperator>,
    #[serde(default)]
    scenarios: Vec<RawScenario>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOperator {
    eigs: toml::Value,
    label: Option<DiagLabel>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(default)]
    params: toml::Table,
}

#[derive(Clone, Debug)]
enum Named {
    Seq(Value),
    Block(Value),
    Op { eigs: Value, label: Option<DiagLabel> },
}

/// A parsed configuration with every named object validated.
#[derive(Clone, Debug)]
pub struct Config {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    names: BTreeMap<String, Named>,
    /// Scenario entries as written, `(name, params)`.
    entries: Vec<(String, Map<String, Value>)>,
}

/// One `target.field[.sub]=value` override.
#[derive(Clone, Debug, PartialEq)]
pub struct Override {
    pub target: String,
    pub path: Vec<String>,
    pub value: Value,
}

impl std::str::FromStr for Override {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (key, raw) = s.split_once('=').ok_or_else(|| invalid(format!("override '{s}' is not key=value")))?;
        let mut parts = key.trim().split('.').map(str::to_string);
        let target = parts.next().filter(|t| !t.is_empty()).ok_or_else(|| invalid(format!("override '{s}' has no key")))?;
        let path: Vec<String> = parts.collect();
        if path.iter().any(String::is_empty) {
            return Err(invalid(format!("override key '{key}' has an empty segment")));
        }
        if path.is_empty() && target != "seed" && target != "out" {
            return Err(invalid(format!("override key '{key}' needs the form scenario.field")));
        }
        Ok(Self { target, path, value: parse_value(raw.trim()) })
    }
}

/// A TOML literal when the text parses as one, otherwise the bare string.
fn parse_value(raw: &str) -> Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .and_then(|v| serde_json::to_value(v).ok())
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn to_json(t: &toml::Table) -> Value {
    serde_json::to_value(t).expect("TOML values are JSON-representable")
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn bundled() -> Self {
        Self::parse(DEFAULT_CONFIG, "bundled config").expect("bundled config is valid")
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse { origin: origin.to_string(), message: e.to_string() })?;
        let mut names = BTreeMap::new();
        let claim = |names: &mut BTreeMap<String, Named>, name: &str, kind: &str, value: Named| {
            if names.insert(name.to_string(), value).is_some() {
                return Err(invalid(format!("{kind} '{name}' reuses a name already defined")));
            }
            Ok(())
        };

        for (name, table) in &raw.sequences {
            let v = to_json(table);
            parse_seq(&v).map_err(|e| invalid(format!("sequence '{name}': {e}")))?;
            claim(&mut names, name, "sequence", Named::Seq(v))?;
        }
        let seqs: BTreeMap<String, Named> = names.clone();

        for (name, table) in &raw.blocks {
            let mut v = to_json(table);
            for field in ["shift", "delta"] {
                if let Some(slot) = v.get_mut(field) {
                    substitute(slot, &seqs, field).map_err(|e| invalid(format!("block '{name}': {e}")))?;
                }
            }
            serde_json::from_value::<BlockSpec>(v.clone())
                .map_err(|e| invalid(format!("block '{name}': {e}")))?
                .build()
                .map_err(|e| invalid(format!("block '{name}': {e}")))?;
            claim(&mut names, name, "block", Named::Block(v))?;
        }

        for (name, op) in &raw.operators {
            let mut eigs = serde_json::to_value(&op.eigs).expect("TOML values are JSON-representable");
            substitute(&mut eigs, &seqs, "eigs").map_err(|e| invalid(format!("operator '{name}': {e}")))?;
            let seq = parse_seq(&eigs).map_err(|e| invalid(format!("operator '{name}': {e}")))?;
            DiagOp::new(seq, op.label.unwrap_or(DiagLabel::D)).map_err(|e| invalid(format!("operator '{name}': {e}")))?;
            claim(&mut names, name, "operator", Named::Op { eigs, label: op.label })?;
        }

        let mut entries = Vec::new();
        for s in raw.scenarios {
            if !SCENARIO_NAMES.contains(&s.name.as_str()) {
                return Err(ConfigError::UnknownScenario(s.name));
            }
            if entries.iter().any(|(n, _)| *n == s.name) {
                return Err(invalid(format!("scenario '{}' is listed twice", s.name)));
            }
            let Value::Object(params) = to_json(&s.params) else { unreachable!() };
            entries.push((s.name, params));
        }

        let cfg = Self { seed: raw.seed, out: raw.out, names, entries };
        // Resolve every listed scenario once so bad references fail early.
        for (name, _) in &cfg.entries {
            cfg.scenario(name, &[])?;
        }
        Ok(cfg)
    }

    /// Scenarios that `run all` executes: those listed, or every scenario
    /// with default parameters when the file lists none.
    pub fn selected(&self) -> Vec<String> {
        if self.entries.is_empty() {
            SCENARIO_NAMES.iter().map(|s| s.to_string()).collect()
        } else {
            self.entries.iter().map(|(n, _)| n.clone()).collect()
        }
    }

    /// The named scenario with file parameters, defaults and overrides applied.
    pub fn scenario(&self, name: &str, overrides: &[Override]) -> Result<Scenario, ConfigError> {
        let default: Scenario = name.parse().map_err(|_| ConfigError::UnknownScenario(name.to_string()))?;
        let Value::Object(mut params) = default.params_json() else { unreachable!("parameters are structs") };
        if let Some((_, given)) = self.entries.iter().find(|(n, _)| n == name) {
            for (k, v) in given {
                if !params.contains_key(k) {
                    return Err(invalid(format!("{name}: unknown parameter '{k}'")));
                }
                params.insert(k.clone(), v.clone());
            }
        }
        self.resolve(name, &mut params)?;
        for o in overrides.iter().filter(|o| applies_to(&o.target, name)) {
            let field = canonical_field(&o.path[0], &params);
            if !params.contains_key(&field) {
                if o.target == name {
                    return Err(invalid(format!("{name}: unknown parameter '{}'", o.path[0])));
                }
                continue;
            }
            let mut slot = params.get_mut(&field).expect("checked above");
            for seg in &o.path[1..] {
                slot = slot
                    .as_object_mut()
                    .and_then(|m| m.get_mut(seg))
                    .ok_or_else(|| invalid(format!("{name}: no parameter '{}'", o.path.join("."))))?;
            }
            *slot = o.value.clone();
        }
        self.resolve(name, &mut params)?;
        let tagged = serde_json::json!({ "name": name, "params": params });
        serde_json::from_value(tagged).map_err(|e| {
            let dangling = params.iter().find_map(|(k, v)| {
                let s = v.as_str()?;
                let default = default.params_json();
                default.get(k).is_some_and(|d| !d.is_string()).then(|| format!("{k} = '{s}'"))
            });
            match dangling {
                Some(d) => invalid(format!("{name}: {d} is not a defined sequence, block or operator")),
                None => invalid(format!("{name}: {e}")),
            }
        })
    }

    fn resolve(&self, scenario: &str, params: &mut Map<String, Value>) -> Result<(), ConfigError> {
        for (field, v) in params.iter_mut() {
            let Value::String(s) = v else { continue };
            let Some(named) = self.names.get(s.as_str()) else { continue };
            *v = match named {
                Named::Seq(x) | Named::Block(x) => x.clone(),
                Named::Op { eigs, label } => {
                    if let (Some(label), Some(slot)) = (label, slot_label(field)) {
                        if *label != slot {
                            return Err(invalid(format!(
                                "{scenario}.{field}: operator '{s}' is labelled {} but the slot expects {}",
                                label.symbol(),
                                slot.symbol()
                            )));
                        }
                    }
                    eigs.clone()
                }
            };
        }
        Ok(())
    }
}

fn parse_seq(v: &Value) -> Result<ParamSeq, serde_json::Error> {
    serde_json::from_value(v.clone())
}

fn substitute(slot: &mut Value, seqs: &BTreeMap<String, Named>, field: &str) -> Result<(), String> {
    if let Value::String(s) = slot {
        match seqs.get(s.as_str()) {
            Some(Named::Seq(v)) => *slot = v.clone(),
            _ => return Err(format!("{field} refers to unknown sequence '{s}'")),
        }
    }
    Ok(())
}

fn slot_label(field: &str) -> Option<DiagLabel> {
    match field {
        "d" | "enum_d" => Some(DiagLabel::D),
        "dx" => Some(DiagLabel::Dx),
        "dp" => Some(DiagLabel::Dp),
        "b" => Some(DiagLabel::B),
        _ => None,
    }
}

fn applies_to(target: &str, scenario: &str) -> bool {
    target == scenario || target == "all" || (target == "walks" && WALK_SCENARIOS.contains(&scenario))
}

/// `M` names the Monte-Carlo sample count.
fn canonical_field(field: &str, params: &Map<String, Value>) -> String {
    if field == "M" && params.contains_key("samples") {
        "samples".into()
    } else {
        field.into()
    }
}

/// Checks that every override names a known target and matches at least
/// one scenario field.
pub fn check_overrides(cfg: &Config, names: &[String], overrides: &[Override]) -> Result<(), ConfigError> {
    for o in overrides {
        if o.path.is_empty() {
            continue;
        }
        let known = o.target == "all" || o.target == "walks" || SCENARIO_NAMES.contains(&o.target.as_str());
        if !known {
            return Err(invalid(format!(
                "override target '{}' is not a scenario, 'walks' or 'all'; valid scenarios: {}",
                o.target,
                SCENARIO_NAMES.join(", ")
            )));
        }
        let hit = names.iter().any(|n| {
            applies_to(&o.target, n)
                && cfg
                    .scenario(n, &[])
                    .ok()
                    .and_then(|s| s.params_json().as_object().map(|p| p.contains_key(&canonical_field(&o.path[0], p))))
                    .unwrap_or(false)
        });
        if !hit {
            return Err(invalid(format!("override '{}.{}' matches no selected scenario", o.target, o.path.join("."))));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_lists_every_scenario() {
        let cfg = Config::bundled();
        assert_eq!(cfg.selected(), SCENARIO_NAMES.iter().map(|s| s.to_string()).collect::<Vec<_>>());
        for name in SCENARIO_NAMES {
            cfg.scenario(name, &[]).unwrap();
        }
    }

    #[test]
    fn bundled_config_matches_defaults() {
        let cfg = Config::bundled();
        for name in SCENARIO_NAMES {
            assert_eq!(cfg.scenario(name, &[]).unwrap(), name.parse::<Scenario>().unwrap(), "{name}");
        }
    }

    #[test]
    fn dangling_reference_is_named() {
        let text = "[[scenarios]]\nname = \"diffusion_chernoff\"\nparams = { d = \"nope\" }\n";
        let err = Config::parse(text, "t").unwrap_err().to_string();
        assert!(err.contains("d = 'nope' is not a defined"), "{err}");
    }

    #[test]
    fn references_are_substituted() {
        let text = r#"
            [sequences.slow]
            kind = "geometric"
            c = 0.25
            q = 0.5

            [operators.diff]
            eigs = "slow"
            label = "D"

            [[scenarios]]
            name = "diffusion_chernoff"
            params = { d = "diff", m_list = [1, 2] }
        "#;
        let cfg = Config::parse(text, "test").unwrap();
        let Scenario::DiffusionChernoff(p) = cfg.scenario("diffusion_chernoff", &[]).unwrap() else { panic!() };
        assert_eq!(p.d, ParamSeq::geometric(0.25, 0.5).unwrap());
        assert_eq!(p.m_list, vec![1, 2]);
        assert_eq!(p.samples, 100_000);
    }

    #[test]
    fn operator_label_must_match_slot() {
        let text = r#"
            [operators.bad]
            eigs = { kind = "finite_support", values = [1.0] }
            label = "B"

            [[scenarios]]
            name = "oscillator_chernoff"
            params = { dx = "bad" }
        "#;
        let err = Config::parse(text, "test").unwrap_err().to_string();
        assert!(err.contains("slot expects D_x"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::parse("sede = 3", "t").is_err());
        let text = "[[scenarios]]\nname = \"fourier_decay\"\nparams = { n_maxx = 3 }\n";
        assert!(Config::parse(text, "t").unwrap_err().to_string().contains("n_maxx"));
        let text = "[blocks.b]\nedges = [[0.0, 1.0]]\nwidth = 2\n";
        assert!(Config::parse(text, "t").is_err());
    }

    #[test]
    fn unknown_reference_in_block_fails() {
        let text = "[blocks.b]\nshift = \"nowhere\"\n";
        let err = Config::parse(text, "t").unwrap_err().to_string();
        assert!(err.contains("unknown sequence 'nowhere'"), "{err}");
    }

    #[test]
    fn overrides_parse_values_and_aliases() {
        let o: Override = "walks.M=1000".parse().unwrap();
        assert_eq!(o.target, "walks");
        assert_eq!(o.value, Value::from(1000));
        let o: Override = "diffusion_chernoff.m_list=[1, 2]".parse().unwrap();
        assert_eq!(o.value, serde_json::json!([1, 2]));
        let o: Override = "taylor_check.w=half".parse().unwrap();
        assert_eq!(o.value, Value::from("half"));
        assert!("walks".parse::<Override>().is_err());
        assert!("walks.=3".parse::<Override>().is_err());

        let cfg = Config::bundled();
        let ov = vec!["walks.M=1000".parse().unwrap()];
        let Scenario::DiffusionChernoff(p) = cfg.scenario("diffusion_chernoff", &ov).unwrap() else { panic!() };
        assert_eq!(p.samples, 1000);
        let Scenario::PmixChernoff(p) = cfg.scenario("pmix_chernoff", &ov).unwrap() else { panic!() };
        assert_eq!(p.samples, 1000);
    }

    #[test]
    fn nested_override_reaches_sequence_fields() {
        let cfg = Config::bundled();
        let ov = vec!["diffusion_chernoff.d.c=0.25".parse().unwrap()];
        let Scenario::DiffusionChernoff(p) = cfg.scenario("diffusion_chernoff", &ov).unwrap() else { panic!() };
        assert_eq!(p.d.term(1), 0.125);
    }

    #[test]
    fn overrides_must_hit_something() {
        let cfg = Config::bundled();
        let names = cfg.selected();
        let bad: Override = "walks.n_max=3".parse().unwrap();
        assert!(check_overrides(&cfg, &names, &[bad]).is_err());
        let bad: Override = "nowhere.x=3".parse().unwrap();
        assert!(check_overrides(&cfg, &names, &[bad]).is_err());
        let good: Override = "all.eps=1e-10".parse().unwrap();
        check_overrides(&cfg, &names, &[good]).unwrap();
    }
}
