//! The execution model: processes, failure models, step labels, system
//! states and the transition function that drives them.

mod state;
mod system;
mod trace;
mod value;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::objects::ObjectError;
use crate::programs::MachineError;

pub use state::{History, KeyMode, ProcessFrame, ReturnEntry, StateHash, Status, SystemState};
pub use system::{Effect, SetupError, System};
pub use trace::{OpDetail, OpRecord, StepRecord, Trace, TraceError, TraceHeader};
pub use value::{Pid, Val};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("process id {id} out of range for n = {n}")]
    PidOutOfRange { id: usize, n: usize },
    #[error("bad value token `{0}` (expected a letter a-z)")]
    BadToken(String),
    #[error("bad step label `{0}` (expected `p<i>`, `crash:p<i>` or `crash-all`)")]
    BadLabel(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    #[default]
    None,
    Simultaneous,
    Independent,
}

/// Which crash steps exist and how many may occur in one execution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct FailureModel {
    pub kind: FailureKind,
    /// Total crash steps allowed; a simultaneous crash costs one unit.
    pub budget: u32,
}

impl FailureModel {
    pub fn new(kind: FailureKind, budget: u32) -> FailureModel {
        let budget = if kind == FailureKind::None { 0 } else { budget };
        FailureModel { kind, budget }
    }
}

/// What happens to a process once it has returned.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReturnMode {
    /// A returned process takes no more ordinary steps but can still crash and re-run.
    #[default]
    RerunAfterCrash,
    /// A returned process halts for good.
    HaltAfterReturn,
}

/// One scheduling choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StepLabel {
    Ordinary(Pid),
    Crash(Pid),
    CrashAll,
}

impl StepLabel {
    pub fn pid(self) -> Option<Pid> {
        match self {
            StepLabel::Ordinary(p) | StepLabel::Crash(p) => Some(p),
            StepLabel::CrashAll => None,
        }
    }

    pub fn is_crash(self) -> bool {
        !matches!(self, StepLabel::Ordinary(_))
    }

    /// The `label` field of a trace record.
    pub fn kind(self) -> &'static str {
        match self {
            StepLabel::Ordinary(_) => "ordinary",
            StepLabel::Crash(_) => "crash",
            StepLabel::CrashAll => "crash-all",
        }
    }
}

impl fmt::Display for StepLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepLabel::Ordinary(p) => write!(f, "{p}"),
            StepLabel::Crash(p) => write!(f, "crash:{p}"),
            StepLabel::CrashAll => f.write_str("crash-all"),
        }
    }
}

impl FromStr for StepLabel {
    type Err = ModelError;

    /// Parses `p2`, `crash:p1` or `crash-all`. Range checks against `n` happen when the label is applied.
    fn from_str(s: &str) -> Result<StepLabel, ModelError> {
        let bad = || ModelError::BadLabel(s.to_string());
        let pid = |t: &str| -> Result<Pid, ModelError> {
            let id: usize = t.strip_prefix('p').and_then(|d| d.parse().ok()).ok_or_else(bad)?;
            Pid::new(id, Pid::MAX_PROCESSES).map_err(|_| bad())
        };
        match s {
            "crash-all" => Ok(StepLabel::CrashAll),
            _ => match s.strip_prefix("crash:") {
                Some(rest) => pid(rest).map(StepLabel::Crash),
                None => pid(s).map(StepLabel::Ordinary),
            },
        }
    }
}

impl Serialize for StepLabel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StepLabel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<StepLabel, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StepError {
    #[error("step {label} is not enabled")]
    NotEnabled { label: StepLabel },
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error("object fault at {line}: {source}")]
    Object { line: &'static str, source: ObjectError },
}
