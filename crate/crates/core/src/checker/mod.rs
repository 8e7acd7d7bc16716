//! Exhaustive and randomized exploration with property checking.

mod explore;
mod fuzz;
mod props;

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

pub use crate::config::AgreementScope;
use crate::model::{StepError, StepLabel, Trace};
use crate::simulator::{SimError, Simulator};

pub use explore::{explore, explore_with, minimize, ExploreOptions};
pub use fuzz::fuzz;
pub use props::{check_agreement, check_rwf, check_validity, Checks, Property, Violation};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    /// Distinct states (memoized) or tree nodes (unmemoized) visited.
    pub states: u64,
    pub edges: u64,
    /// Visited states with no enabled step.
    pub terminals: u64,
    pub max_attempt_steps: u32,
    pub max_failures: u32,
    pub max_depth: usize,
    /// Static per-attempt bound the run was checked against.
    pub bound: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episodes: Option<u64>,
}

impl Stats {
    pub(crate) fn absorb(&mut self, other: &Stats) {
        self.states += other.states;
        self.edges += other.edges;
        self.terminals += other.terminals;
        self.max_attempt_steps = self.max_attempt_steps.max(other.max_attempt_steps);
        self.max_failures = self.max_failures.max(other.max_failures);
        self.max_depth = self.max_depth.max(other.max_depth);
    }
}

/// A property violation with a replayable witness.
#[derive(Clone, Debug)]
pub struct Failure {
    pub violation: Violation,
    /// Steps from the initial state. For [`Property::ReadBeforeWrite`] the
    /// offending step is `failing_step`, which cannot be applied.
    pub labels: Vec<StepLabel>,
    pub failing_step: Option<StepLabel>,
    pub trace: Trace,
}

#[derive(Clone, Debug)]
pub enum Verdict {
    Pass(Stats),
    Fail(Box<Failure>, Stats),
    /// Some execution grew past the depth limit.
    DepthLimit { limit: usize, stats: Stats },
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass(_))
    }

    pub fn property(&self) -> Option<Property> {
        match self {
            Verdict::Fail(f, _) => Some(f.violation.property),
            _ => None,
        }
    }

    pub fn stats(&self) -> &Stats {
        match self {
            Verdict::Pass(s) | Verdict::Fail(_, s) | Verdict::DepthLimit { stats: s, .. } => s,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::Pass(_) => 0,
            Verdict::Fail(..) => 2,
            Verdict::DepthLimit { .. } => 3,
        }
    }

    /// `{result, property?, trace_file?, stats}`.
    pub fn to_json(&self, trace_file: Option<&str>) -> serde_json::Value {
        let mut out = json!({ "result": self.result_name(), "stats": self.stats() });
        match self {
            Verdict::Fail(f, _) => {
                out["property"] = json!(f.violation.property);
                out["detail"] = json!(f.violation.detail);
                if let Some(path) = trace_file {
                    out["trace_file"] = json!(path);
                }
            }
            Verdict::DepthLimit { limit, .. } => out["depth_limit"] = json!(limit),
            Verdict::Pass(_) => {}
        }
        out
    }

    pub fn result_name(&self) -> &'static str {
        match self {
            Verdict::Pass(_) => "pass",
            Verdict::Fail(..) => "fail",
            Verdict::DepthLimit { .. } => "depth-limit",
        }
    }
}

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Sim(#[from] SimError),
    /// A machine or object fault other than a read-before-write: a bug in a built-in program.
    #[error("harness fault after {depth} steps at {label}: {source}")]
    Harness { depth: usize, label: StepLabel, source: StepError },
    #[error("state cap of {0} states exceeded")]
    StateCap(usize),
}

/// Replays `labels` and reports the first violation, for independently
/// confirming a counterexample.
pub fn check_labels(sim: &Simulator, labels: &[StepLabel], failing: Option<StepLabel>) -> Result<Option<Violation>, CheckError> {
    let sys = sim.system();
    let checks = Checks::from_config(sim.config(), sys);
    let mut exec = sim.start();
    for &label in labels {
        sim.push(&mut exec, label)?;
        let n = exec.states.len();
        if let Some(v) = checks.edge(sys, &exec.states[n - 2], exec.effects.last().unwrap(), &exec.states[n - 1]) {
            return Ok(Some(v));
        }
    }
    if let Some(label) = failing {
        return match sys.apply_step(exec.last(), label) {
            Err(StepError::Machine(e @ crate::programs::MachineError::ReadBeforeWrite { .. })) => {
                Ok(Some(Violation { property: Property::ReadBeforeWrite, detail: e.to_string() }))
            }
            _ => Ok(None),
        };
    }
    if sim.choices(exec.last()).is_empty() {
        return Ok(checks.terminal(sys, exec.last()));
    }
    Ok(None)
}
