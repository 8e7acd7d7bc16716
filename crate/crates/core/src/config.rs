//! Experiment configuration: a flat JSON document plus `key=value` overrides.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::model::{FailureKind, FailureModel, ReturnMode, SetupError, StepLabel, System, Val};
use crate::objects::{ConsState, ObjectValue};
use crate::programs::{static_bound, ConsChoice, Fig1Choice, Program, ProgramId, ProgramParams, ScanOrder};

/// How the scheduler picks among enabled steps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryKind {
    /// Every enabled step, depth-first.
    #[default]
    Exhaustive,
    /// Uniformly among enabled steps, from a seeded generator.
    Random,
    /// Exactly the steps listed in `schedule`.
    Scripted,
    /// Crashes only where the restricted failure pattern forces them.
    #[serde(rename = "assumption1")]
    Assumption1,
}

/// Which pairs of returns must agree.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgreementScope {
    /// Every returned value, including repeated returns of one process.
    #[default]
    AllReturns,
    /// Only returns of distinct processes.
    CrossProcess,
}

fn default_true() -> bool {
    true
}

fn default_episodes() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub program: ProgramId,
    pub n: usize,
    pub proposals: Vec<Val>,
    #[serde(default)]
    pub failure_model: FailureKind,
    #[serde(default)]
    pub budget: u32,
    /// Failures tolerated by the construction; defaults to `budget`.
    #[serde(default)]
    pub f: Option<u32>,
    #[serde(default)]
    pub cons: ConsChoice,
    #[serde(default)]
    pub adversary: AdversaryKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_episodes")]
    pub episodes: u64,
    #[serde(default)]
    pub schedule: Vec<StepLabel>,
    #[serde(default)]
    pub return_mode: ReturnMode,
    #[serde(default)]
    pub scan_order: ScanOrder,
    #[serde(default)]
    pub fig1_choice: Fig1Choice,
    #[serde(default)]
    pub hash_ignores_attempt: bool,
    #[serde(default = "default_true")]
    pub monitor_armed: bool,
    #[serde(default)]
    pub agreement_scope: AgreementScope,
    #[serde(default)]
    pub depth_limit: Option<usize>,
    #[serde(default = "default_true")]
    pub memoize: bool,
    #[serde(default)]
    pub state_cap: Option<usize>,
    /// Initial object values by name, overriding the type defaults.
    #[serde(default)]
    pub initial: BTreeMap<String, Json>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config must be a JSON object")]
    NotObject,
    #[error("override `{0}` is not of the form key=value")]
    BadOverride(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Setup(#[from] SetupError),
}

/// Applies `key=value` overrides to a config document. Values are parsed as
/// JSON when possible and taken as strings otherwise.
pub fn merge_overrides(mut doc: Json, overrides: &[String]) -> Result<Json, ConfigError> {
    let map = doc.as_object_mut().ok_or(ConfigError::NotObject)?;
    for item in overrides {
        let (key, raw) = item.split_once('=').ok_or_else(|| ConfigError::BadOverride(item.clone()))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::BadOverride(item.clone()));
        }
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Json::String(raw.to_string()));
        map.insert(key.to_string(), value);
    }
    Ok(doc)
}

impl ExperimentConfig {
    /// A config with every knob at its default.
    pub fn new(program: ProgramId, proposals: Vec<Val>) -> ExperimentConfig {
        let doc = serde_json::json!({ "program": program, "n": proposals.len(), "proposals": proposals });
        serde_json::from_value(doc).expect("minimal config deserializes")
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
        let doc: Json = serde_json::from_str(text)?;
        ExperimentConfig::from_document(doc, overrides)
    }

    pub fn from_document(doc: Json, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
        let doc = merge_overrides(doc, overrides)?;
        let cfg: ExperimentConfig = serde_json::from_value(doc)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_document(&self) -> Json {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: String| Err(ConfigError::Invalid(msg));
        if self.proposals.len() != self.n {
            return invalid(format!("n = {} but {} proposals given", self.n, self.proposals.len()));
        }
        if self.proposals.iter().any(|v| v.is_bottom()) {
            return invalid("⊥ is not a legal proposal".into());
        }
        if self.adversary == AdversaryKind::Assumption1 && self.failure_model != FailureKind::Independent {
            return invalid("the assumption1 adversary needs failure-model = independent".into());
        }
        if self.episodes == 0 {
            return invalid("episodes must be at least 1".into());
        }
        if let Some(p) = self.schedule.iter().filter_map(|l| l.pid()).find(|p| p.get() > self.n) {
            return invalid(format!("schedule mentions {p} but n = {}", self.n));
        }
        let program = Program::build(&self.params()).map_err(SetupError::from)?;
        for name in self.initial.keys() {
            if program.1.index_of(name).is_none() {
                return invalid(format!("initial value for unknown object `{name}`"));
            }
        }
        Ok(())
    }

    pub fn f(&self) -> u32 {
        self.f.unwrap_or(self.budget)
    }

    pub fn params(&self) -> ProgramParams {
        ProgramParams {
            id: self.program,
            n: self.n,
            f: self.f(),
            cons: self.cons,
            scan_order: self.scan_order,
            fig1_choice: self.fig1_choice,
        }
    }

    pub fn failure(&self) -> FailureModel {
        FailureModel::new(self.failure_model, self.budget)
    }

    /// Total path length bound: `(budget + 1) * n * B + budget`.
    pub fn depth_limit(&self) -> usize {
        self.depth_limit.unwrap_or_else(|| {
            let b = static_bound(&self.params()).steps as usize;
            let budget = self.failure().budget as usize;
            (budget + 1) * self.n * b + budget
        })
    }

    pub fn system(&self) -> Result<System, ConfigError> {
        let (_, layout) = Program::build(&self.params()).map_err(SetupError::from)?;
        let mut initial = Vec::new();
        for (name, raw) in &self.initial {
            let idx = layout
                .index_of(name)
                .ok_or_else(|| ConfigError::Invalid(format!("initial value for unknown object `{name}`")))?;
            let value = object_value(&layout.slots()[idx.0 as usize].initial, raw)
                .ok_or_else(|| ConfigError::Invalid(format!("bad initial value {raw} for `{name}`")))?;
            initial.push((name.clone(), value));
        }
        Ok(System::new(self.params(), self.proposals.clone(), self.failure(), self.return_mode, &initial)?)
    }
}

/// Interprets a JSON initial value according to the type of the object it replaces.
fn object_value(like: &ObjectValue, raw: &Json) -> Option<ObjectValue> {
    let val = || raw.as_str().and_then(|s| s.parse::<Val>().ok());
    Some(match like {
        ObjectValue::Register(_) => ObjectValue::Register(val()?),
        ObjectValue::Cas(_) => ObjectValue::Cas(val()?),
        ObjectValue::IntRegister(_) => ObjectValue::IntRegister(u32::try_from(raw.as_u64()?).ok()?),
        ObjectValue::Tas(_) => ObjectValue::Tas(match raw.as_u64()? {
            0 => false,
            1 => true,
            _ => return None,
        }),
        ObjectValue::Cons(_) => ObjectValue::Cons(ConsState { decision: val()?, ..ConsState::default() }),
    })
}
