//! Experiment configuration: one JSON document whose top level mirrors
//! `SimConfig`, plus sections for the optimizer and the multi-run commands.
//! Built-in defaults, the config file, convenience flags and `--set`
//! overrides are merged in that order.

use std::path::{Path, PathBuf};

use adele::engine::{SimConfig, TopologySpec};
use adele::optimizer::{AmosaConfig, PickStrategy};
use adele::selection::{ElevatorAssignment, Policy};
use adele::topology::TopologyDoc;
use adele::traffic::TrafficSource;
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

/// Sections that are not part of `SimConfig`.
const EXTRA_KEYS: [&str; 6] = ["amosa", "pick", "rates", "policies", "placement", "assignment_file"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementSpec {
    /// `[x, y, layers]`.
    pub dims: [usize; 3],
    pub count: usize,
}

/// Fully resolved experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub sim: SimConfig,
    pub amosa: AmosaConfig,
    pub pick: PickStrategy,
    pub rates: Vec<f64>,
    pub policies: Vec<Policy>,
    pub placement: PlacementSpec,
    /// Subsets for `rr`/`adele` when `assignment` is not given inline.
    pub assignment_file: Option<PathBuf>,
    /// The merged document everything above was read from.
    pub document: Value,
}

pub fn default_document() -> Value {
    let preset = adele::topology::Topology::preset("p_s1").expect("bundled preset");
    let mut sim = SimConfig::new(&preset, TrafficSource::default(), Policy::Nearest);
    sim.topology = TopologySpec::Preset("p_s1".into());
    let mut doc = serde_json::to_value(&sim).expect("config serializes");
    let obj = doc.as_object_mut().expect("object");
    obj.remove("assignment");
    obj.remove("drain_cycles");
    obj.insert("amosa".into(), serde_json::to_value(AmosaConfig::default()).expect("serializes"));
    obj.insert("pick".into(), json!("min_variance"));
    obj.insert("rates".into(), json!([0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.1, 0.11, 0.12]));
    obj.insert("policies".into(), json!(["nearest", "cda", "adele"]));
    obj.insert("placement".into(), json!({"dims": [4, 4, 4], "count": 3}));
    doc
}

/// Recursively merges `patch` into `base`; objects merge key by key, anything
/// else replaces.
pub fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

/// Parses the value of a `key=value` override: JSON if it parses, a bare
/// string otherwise.
fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Applies one dotted-path override such as `adele.xi=0.1`.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec.split_once('=').with_context(|| format!("override `{spec}` is not key=value"))?;
    if path.is_empty() {
        bail!("override `{spec}` has an empty key");
    }
    set_path(doc, path, parse_value(raw))
}

pub fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = match cur {
            Value::Object(m) => m,
            other => bail!("cannot set `{path}`: `{}` is {other}, not an object", parts[..i].join(".")),
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
        if cur.is_null() {
            *cur = Value::Object(Map::new());
        }
    }
    unreachable!("split yields at least one part")
}

/// A preset name, or a path to a topology JSON file.
pub fn topology_value(arg: &str) -> Result<Value> {
    if adele::topology::PRESET_NAMES.contains(&arg) {
        return Ok(Value::String(arg.to_string()));
    }
    let text = std::fs::read_to_string(arg).with_context(|| format!("`{arg}` is neither a preset nor a readable file"))?;
    let doc: TopologyDoc = serde_json::from_str(&text).with_context(|| format!("parsing topology file {arg}"))?;
    Ok(serde_json::to_value(doc)?)
}

pub fn load_file(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

impl Experiment {
    pub fn from_document(document: Value) -> Result<Self> {
        let mut sim_doc = document.clone();
        let obj = sim_doc.as_object_mut().context("config must be a JSON object")?;
        let mut extra = Map::new();
        for k in EXTRA_KEYS {
            if let Some(v) = obj.remove(k) {
                extra.insert(k.to_string(), v);
            }
        }
        let sim: SimConfig = serde_json::from_value(sim_doc).context("invalid simulation settings")?;
        let field = |k: &str| extra.get(k).cloned().unwrap_or(Value::Null);
        let amosa: AmosaConfig = serde_json::from_value(field("amosa")).context("invalid `amosa` section")?;
        let pick: PickStrategy = serde_json::from_value(field("pick")).context("invalid `pick`")?;
        let rates: Vec<f64> = serde_json::from_value(field("rates")).context("invalid `rates`")?;
        let policies: Vec<Policy> = serde_json::from_value(field("policies")).context("invalid `policies`")?;
        let placement: PlacementSpec = serde_json::from_value(field("placement")).context("invalid `placement`")?;
        let assignment_file: Option<PathBuf> =
            serde_json::from_value(field("assignment_file")).context("invalid `assignment_file`")?;
        if let Some(p) = &assignment_file {
            if !p.exists() {
                bail!("assignment file {} does not exist", p.display());
            }
        }
        Ok(Experiment { sim, amosa, pick, rates, policies, placement, assignment_file, document })
    }

    /// Seed used by both the simulator and the optimizer.
    pub fn seed(&self) -> u64 {
        self.sim.seed
    }

    pub fn read_assignment_file(&self) -> Result<Option<ElevatorAssignment>> {
        let Some(p) = &self.assignment_file else { return Ok(None) };
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        Ok(Some(serde_json::from_str(&text).with_context(|| format!("parsing assignment {}", p.display()))?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let e = Experiment::from_document(default_document()).unwrap();
        assert_eq!(e.sim.policy, Policy::Nearest);
        assert_eq!(e.policies.len(), 3);
        assert!(e.sim.validate().is_ok());
    }

    #[test]
    fn dotted_overrides() {
        let mut doc = default_document();
        apply_override(&mut doc, "adele.xi=0.1").unwrap();
        apply_override(&mut doc, "traffic.kind=shuffle").unwrap();
        apply_override(&mut doc, "policy=\"cda\"").unwrap();
        let e = Experiment::from_document(doc).unwrap();
        assert_eq!(e.sim.adele.xi, 0.1);
        assert_eq!(e.sim.traffic.kind.to_string(), "shuffle");
        assert_eq!(e.sim.policy, Policy::Cda);
    }

    #[test]
    fn deep_merge_keeps_siblings() {
        let mut doc = default_document();
        merge(&mut doc, json!({"traffic": {"injection_rate": 0.05}}));
        let e = Experiment::from_document(doc).unwrap();
        assert_eq!(e.sim.traffic.injection_rate, 0.05);
        assert_eq!(e.sim.traffic.packet_length, [10, 30]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut doc = default_document();
        apply_override(&mut doc, "adele.zeta=1").unwrap();
        assert!(Experiment::from_document(doc).is_err());
        let mut doc = default_document();
        apply_override(&mut doc, "warmup=5").unwrap();
        assert!(Experiment::from_document(doc).is_err());
    }

    #[test]
    fn malformed_override() {
        let mut doc = default_document();
        assert!(apply_override(&mut doc, "no_equals_sign").is_err());
        assert!(apply_override(&mut doc, "seed.x=1").is_err());
    }
}
