//! TOML experiment descriptions.
//!
//! ```toml
//! id = "tank-outfill"
//! family = "tank"
//! regime = "outfill"
//! estimators = ["tank.mle", "tank.goodman"]
//! grid = [100, 200, 400, 800]
//! ratios = [0.5]
//! replications = 10000
//! eps = [0.5]
//! seed = 42
//!
//! [model]
//! population = 100
//! sample = 50
//! ```
//!
//! Parsing reports every problem it finds, not just the first.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::engine::{RunOptions, DEFAULT_ENUMERATION_THRESHOLD};
use crate::error::{ConfigIssue, Error, Result};
use crate::estimators::EstimatorId;
use crate::model::{Family, ModelConfig};
use crate::regime::{build_schedule, check_ratios, supports, RegimeKind, RegimeSchedule};

pub const DEFAULT_REPLICATIONS: u64 = 10_000;

const KEYS: &[&str] = &[
    "id",
    "family",
    "regime",
    "estimators",
    "grid",
    "ratios",
    "replications",
    "eps",
    "seed",
    "threads",
    "output",
    "enumeration_threshold",
    "model",
];
const REQUIRED: &[&str] = &["id", "family", "regime", "estimators", "grid", "seed", "model"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub id: String,
    pub family: Family,
    pub regime: RegimeKind,
    pub estimators: Vec<EstimatorId>,
    #[serde(with = "grid_serde")]
    pub grid: Vec<f64>,
    pub ratios: Vec<f64>,
    pub replications: u64,
    pub eps: Vec<f64>,
    pub seed: u64,
    /// 0 lets the runtime choose.
    pub threads: usize,
    pub output: Option<PathBuf>,
    pub enumeration_threshold: u64,
    pub model: ModelConfig,
}

mod grid_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        #[serde(untagged)]
        enum Out {
            Num(f64),
            Text(&'static str),
        }
        v.iter().map(|&x| if x.is_infinite() { Out::Text("inf") } else { Out::Num(x) }).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum In {
            Num(f64),
            Text(String),
        }
        Vec::<In>::deserialize(d)?
            .into_iter()
            .map(|v| match v {
                In::Num(x) => Ok(x),
                In::Text(s) if s == "inf" => Ok(f64::INFINITY),
                In::Text(s) => Err(serde::de::Error::custom(format!("bad grid value {s:?}"))),
            })
            .collect()
    }
}

struct Issues(Vec<ConfigIssue>);

impl Issues {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(ConfigIssue { path: path.into(), message: message.into() });
    }
}

fn type_name(v: &Value) -> &'static str {
    v.type_str()
}

fn get_str(t: &Table, key: &str, issues: &mut Issues) -> Option<String> {
    match t.get(key)? {
        Value::String(s) => Some(s.clone()),
        other => {
            issues.push(key, format!("expected a string, found {}", type_name(other)));
            None
        }
    }
}

fn get_uint(t: &Table, key: &str, issues: &mut Issues) -> Option<u64> {
    match t.get(key)? {
        Value::Integer(i) if *i >= 0 => Some(*i as u64),
        Value::String(s) => match s.parse::<u64>() {
            Ok(v) => Some(v),
            Err(_) => {
                issues.push(key, format!("expected a non-negative integer, found {s:?}"));
                None
            }
        },
        other => {
            issues.push(key, format!("expected a non-negative integer, found {other}"));
            None
        }
    }
}

fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        Value::String(s) if s == "inf" => Some(f64::INFINITY),
        _ => None,
    }
}

fn get_numbers(t: &Table, key: &str, issues: &mut Issues) -> Option<Vec<f64>> {
    match t.get(key)? {
        Value::Array(items) => {
            let mut out = Vec::with_capacity(items.len());
            let mut ok = true;
            for (i, v) in items.iter().enumerate() {
                match number(v) {
                    Some(x) => out.push(x),
                    None => {
                        issues.push(format!("{key}[{i}]"), format!("expected a number, found {v}"));
                        ok = false;
                    }
                }
            }
            ok.then_some(out)
        }
        other => {
            issues.push(key, format!("expected an array, found {}", type_name(other)));
            None
        }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<ExperimentConfig> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| {
            Error::Config(vec![ConfigIssue { path: "<document>".into(), message: e.message().to_string() }])
        })?;
        ExperimentConfig::from_table(&table)
    }

    pub fn from_table(t: &Table) -> Result<ExperimentConfig> {
        let mut issues = Issues(Vec::new());
        for key in t.keys() {
            if !KEYS.contains(&key.as_str()) {
                issues.push(key.as_str(), "unknown key");
            }
        }
        for &key in REQUIRED {
            if !t.contains_key(key) {
                issues.push(key, "missing required key");
            }
        }

        let id = get_str(t, "id", &mut issues);
        if id.as_deref() == Some("") {
            issues.push("id", "must not be empty");
        }
        let family = get_str(t, "family", &mut issues).and_then(|s| {
            let f = Family::parse(&s);
            if f.is_none() {
                issues.push("family", format!("unknown family {s:?}"));
            }
            f
        });
        let regime = get_str(t, "regime", &mut issues).and_then(|s| {
            let r = RegimeKind::parse(&s);
            if r.is_none() {
                issues.push("regime", format!("unknown regime {s:?}"));
            }
            r
        });
        if let (Some(f), Some(r)) = (family, regime) {
            if !supports(f, r) {
                issues.push("regime", format!("{f} does not support the {} regime", r.as_str()));
            }
        }

        let estimators = match t.get("estimators") {
            None => None,
            Some(Value::Array(items)) => {
                let mut out = Vec::new();
                for (i, v) in items.iter().enumerate() {
                    let path = format!("estimators[{i}]");
                    match v.as_str().map(|s| (s, EstimatorId::parse(s))) {
                        Some((_, Some(id))) => {
                            if let Some(f) = family {
                                if !id.compatible_with(f) {
                                    issues.push(path, format!("{id} does not apply to family {f}"));
                                    continue;
                                }
                            }
                            out.push(id);
                        }
                        Some((s, None)) => issues.push(path, format!("unknown estimator {s:?}")),
                        None => issues.push(path, format!("expected a string, found {v}")),
                    }
                }
                if items.is_empty() {
                    issues.push("estimators", "must list at least one estimator");
                }
                Some(out)
            }
            Some(other) => {
                issues.push("estimators", format!("expected an array, found {}", type_name(other)));
                None
            }
        };

        let grid = get_numbers(t, "grid", &mut issues);
        if let Some(g) = &grid {
            if g.is_empty() {
                issues.push("grid", "must not be empty");
            }
            if g.iter().any(|x| !(*x > 0.0)) {
                issues.push("grid", "values must be > 0");
            }
        }
        let ratios = if t.contains_key("ratios") { get_numbers(t, "ratios", &mut issues) } else { Some(Vec::new()) };
        let replications = if t.contains_key("replications") {
            get_uint(t, "replications", &mut issues)
        } else {
            Some(DEFAULT_REPLICATIONS)
        };
        if matches!(replications, Some(r) if r < 2) {
            issues.push("replications", "must be >= 2");
        }
        let eps = if t.contains_key("eps") { get_numbers(t, "eps", &mut issues) } else { Some(vec![0.5]) };
        if let Some(e) = &eps {
            if e.is_empty() || e.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
                issues.push("eps", "must be a non-empty list of finite values > 0");
            }
        }
        let seed = get_uint(t, "seed", &mut issues);
        let threads = if t.contains_key("threads") { get_uint(t, "threads", &mut issues) } else { Some(0) };
        let output = get_str(t, "output", &mut issues).map(PathBuf::from);
        let enumeration_threshold = if t.contains_key("enumeration_threshold") {
            get_uint(t, "enumeration_threshold", &mut issues)
        } else {
            Some(DEFAULT_ENUMERATION_THRESHOLD)
        };

        let model = match (t.get("model"), family) {
            (Some(Value::Table(m)), Some(f)) => {
                let mut m = m.clone();
                if m.contains_key("family") {
                    issues.push("model.family", "unknown key; the family is set at the top level");
                    m.remove("family");
                }
                m.insert("family".into(), Value::String(f.as_str().into()));
                match Value::Table(m).try_into::<ModelConfig>() {
                    Ok(cfg) => {
                        if let Err(e) = cfg.validate() {
                            issues.push("model", e.to_string());
                        }
                        Some(cfg)
                    }
                    Err(e) => {
                        issues.push("model", e.message().trim().to_string());
                        None
                    }
                }
            }
            (Some(Value::Table(_)), None) => None,
            (Some(other), _) => {
                issues.push("model", format!("expected a table, found {}", type_name(other)));
                None
            }
            (None, _) => None,
        };

        if let (Some(f), Some(r), Some(m), Some(rs)) = (family, regime, &model, &ratios) {
            if supports(f, r) {
                if let Err(e) = check_ratios(f, r, m, rs) {
                    issues.push("ratios", e.to_string());
                }
            }
        }

        if !issues.0.is_empty() {
            return Err(Error::Config(issues.0));
        }
        let cfg = ExperimentConfig {
            id: id.expect("checked"),
            family: family.expect("checked"),
            regime: regime.expect("checked"),
            estimators: estimators.expect("checked"),
            grid: grid.expect("checked"),
            ratios: ratios.expect("checked"),
            replications: replications.expect("checked"),
            eps: eps.expect("checked"),
            seed: seed.expect("checked"),
            threads: threads.expect("checked") as usize,
            output,
            enumeration_threshold: enumeration_threshold.expect("checked"),
            model: model.expect("checked"),
        };
        // Remaining problems only show up once the cells are built.
        if let Err(e) = cfg.schedule() {
            return Err(Error::Config(vec![ConfigIssue { path: "grid".into(), message: e.to_string() }]));
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        let mut t = Table::new();
        t.insert("id".into(), Value::String(self.id.clone()));
        t.insert("family".into(), Value::String(self.family.as_str().into()));
        t.insert("regime".into(), Value::String(self.regime.as_str().into()));
        t.insert(
            "estimators".into(),
            Value::Array(self.estimators.iter().map(|e| Value::String(e.as_str().into())).collect()),
        );
        let num = |x: f64| if x.is_infinite() { Value::String("inf".into()) } else { Value::Float(x) };
        t.insert("grid".into(), Value::Array(self.grid.iter().map(|&x| num(x)).collect()));
        t.insert("ratios".into(), Value::Array(self.ratios.iter().map(|&x| num(x)).collect()));
        t.insert("replications".into(), uint_value(self.replications));
        t.insert("eps".into(), Value::Array(self.eps.iter().map(|&x| num(x)).collect()));
        t.insert("seed".into(), uint_value(self.seed));
        t.insert("threads".into(), uint_value(self.threads as u64));
        if let Some(o) = &self.output {
            t.insert("output".into(), Value::String(o.to_string_lossy().into_owned()));
        }
        t.insert("enumeration_threshold".into(), uint_value(self.enumeration_threshold));
        let mut model = Value::try_from(&self.model).map_err(|e| Error::Serialization(e.to_string()))?;
        if let Value::Table(m) = &mut model {
            m.remove("family");
        }
        t.insert("model".into(), model);
        toml::to_string(&t).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn schedule(&self) -> Result<RegimeSchedule> {
        build_schedule(self.regime, &self.model, &self.grid, &self.ratios)
    }

    /// Engine options; `threads` overrides the configured thread count.
    pub fn run_options(&self, threads: Option<usize>) -> RunOptions {
        RunOptions::new(self.replications, self.seed)
            .eps(&self.eps)
            .threads(threads.unwrap_or(self.threads))
            .enumeration_threshold(self.enumeration_threshold)
    }
}

fn uint_value(v: u64) -> Value {
    match i64::try_from(v) {
        Ok(i) => Value::Integer(i),
        Err(_) => Value::String(v.to_string()),
    }
}
