//! Executions: adversaries, scripted runs, random runs, traces and replay.

use std::collections::BTreeSet;

use rand::Rng;
use thiserror::Error;

pub use crate::config::{AdversaryKind, AgreementScope, ConfigError, ExperimentConfig};
use crate::model::{Effect, FailureKind, Pid, StepError, StepLabel, SystemState, System, Trace, TraceHeader};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("schedule position {index}: {source}")]
    Step { index: usize, source: StepError },
    #[error("step {label} at position {index} is not allowed by the {adversary:?} adversary")]
    Disallowed { index: usize, label: StepLabel, adversary: AdversaryKind },
    #[error("the assumption1 filter needs independent failures, got {0:?}")]
    WrongFailureModel(FailureKind),
    #[error("replay diverges from the trace at line {line}:\n  file:   {expected}\n  replay: {actual}")]
    Diverged { line: usize, expected: String, actual: String },
    #[error("replayed final hash {actual} does not match header {expected}")]
    HashMismatch { expected: String, actual: String },
}

/// Processes that have taken at least one ordinary step.
pub fn participation(s: &SystemState) -> BTreeSet<Pid> {
    s.history.participants().collect()
}

/// Restricts `pending` to the restricted failure pattern: the lowest-numbered
/// participant crashes right after its first access to a TAS object, and no
/// other crash happens.
///
/// Every process participates in every complete execution, so the
/// lowest-numbered participant of the execution is `p1` even in prefixes
/// where `p1` has not stepped yet. Choosing the lowest participant so far
/// instead would let `p2` crash on a TAS object before `p1` arrives and
/// then `p1` crash on the same object, exceeding one failure per object.
///
/// The crash is forced: while it is pending it is the only step that process
/// may take. Once the budget is spent, no crash is offered and the process
/// simply continues.
pub fn assumption1_filter(sys: &System, s: &SystemState, pending: &[StepLabel]) -> Result<Vec<StepLabel>, SimError> {
    if sys.failure().kind != FailureKind::Independent {
        return Err(SimError::WrongFailureModel(sys.failure().kind));
    }
    let forced = sys
        .pids()
        .next()
        .filter(|p| s.history.first_tas_last & (1 << p.index()) != 0)
        .filter(|p| pending.contains(&StepLabel::Crash(*p)));
    Ok(pending
        .iter()
        .copied()
        .filter(|label| match (label, forced) {
            (StepLabel::Ordinary(p), Some(f)) => *p != f,
            (StepLabel::Ordinary(_), None) => true,
            (StepLabel::Crash(p), Some(f)) => *p == f,
            _ => false,
        })
        .collect())
}

/// A finished or partial execution: `states[i + 1]` follows `effects[i]`.
#[derive(Clone, Debug)]
pub struct Execution {
    pub states: Vec<SystemState>,
    pub effects: Vec<Effect>,
}

impl Execution {
    pub fn last(&self) -> &SystemState {
        self.states.last().expect("execution has an initial state")
    }

    pub fn labels(&self) -> Vec<StepLabel> {
        self.effects.iter().map(|e| e.record.label).collect()
    }
}

/// A configured system plus the adversary that schedules it.
#[derive(Clone, Debug)]
pub struct Simulator {
    cfg: ExperimentConfig,
    sys: System,
}

impl Simulator {
    pub fn new(cfg: ExperimentConfig) -> Result<Simulator, SimError> {
        cfg.validate()?;
        let sys = cfg.system()?;
        Ok(Simulator { cfg, sys })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn system(&self) -> &System {
        &self.sys
    }

    /// Steps the adversary may choose from in `s`, in deterministic order.
    pub fn choices(&self, s: &SystemState) -> Vec<StepLabel> {
        let pending = self.sys.enabled_steps(s);
        match self.cfg.adversary {
            AdversaryKind::Assumption1 => {
                assumption1_filter(&self.sys, s, &pending).expect("config validation pins the failure model")
            }
            _ => pending,
        }
    }

    pub fn start(&self) -> Execution {
        Execution { states: vec![self.sys.initial_state()], effects: Vec::new() }
    }

    /// Extends `exec` by one step chosen from [`Simulator::choices`].
    pub fn push(&self, exec: &mut Execution, label: StepLabel) -> Result<(), SimError> {
        let index = exec.effects.len();
        let s = exec.last();
        if !self.choices(s).contains(&label) {
            if let Err(source) = self.sys.apply_step(s, label) {
                return Err(SimError::Step { index, source });
            }
            return Err(SimError::Disallowed { index, label, adversary: self.cfg.adversary });
        }
        let (next, mut effect) = self.sys.apply_step(s, label).map_err(|source| SimError::Step { index, source })?;
        effect.record.step = index;
        exec.states.push(next);
        exec.effects.push(effect);
        Ok(())
    }

    /// Runs a schedule step by step; every label must be enabled when reached.
    pub fn run(&self, schedule: &[StepLabel]) -> Result<Execution, SimError> {
        let mut exec = self.start();
        for &label in schedule {
            self.push(&mut exec, label)?;
        }
        Ok(exec)
    }

    /// Runs the configured `schedule`.
    pub fn run_scripted(&self) -> Result<Execution, SimError> {
        self.run(&self.cfg.schedule)
    }

    /// Picks uniformly among the choices until none remain or `max_steps` is reached.
    pub fn run_random<R: Rng>(&self, rng: &mut R, max_steps: usize) -> Result<Execution, SimError> {
        let mut exec = self.start();
        while exec.effects.len() < max_steps {
            let choices = self.choices(exec.last());
            if choices.is_empty() {
                break;
            }
            let label = choices[rng.random_range(0..choices.len())];
            self.push(&mut exec, label)?;
        }
        Ok(exec)
    }

    pub fn trace(&self, exec: &Execution, seed: Option<u64>) -> Trace {
        Trace {
            header: TraceHeader {
                config: self.cfg.to_document(),
                initial_hash: exec.states[0].hash().to_string(),
                final_hash: exec.last().hash().to_string(),
                steps: exec.effects.len(),
                seed,
            },
            records: exec.effects.iter().map(|e| e.record.clone()).collect(),
        }
    }
}

/// Result of a successful bit-exact replay.
#[derive(Clone, Debug)]
pub struct Replayed {
    pub simulator: Simulator,
    pub execution: Execution,
    pub final_hash: String,
}

/// Re-executes a trace from its header config and demands that the
/// regenerated file is identical line by line.
pub fn replay(trace: &Trace) -> Result<Replayed, SimError> {
    let cfg = ExperimentConfig::from_document(trace.header.config.clone(), &[])?;
    let sim = Simulator::new(cfg)?;
    let exec = sim.run(&trace.labels())?;
    let again = sim.trace(&exec, trace.header.seed);
    for (i, (expected, actual)) in trace.lines().into_iter().zip(again.lines()).enumerate().skip(1) {
        if expected != actual {
            return Err(SimError::Diverged { line: i + 1, expected, actual });
        }
    }
    if again.header.final_hash != trace.header.final_hash || again.header.initial_hash != trace.header.initial_hash {
        return Err(SimError::HashMismatch {
            expected: trace.header.final_hash.clone(),
            actual: again.header.final_hash.clone(),
        });
    }
    let final_hash = again.header.final_hash;
    Ok(Replayed { simulator: sim, execution: exec, final_hash })
}

/// Replays the raw text of a trace file, comparing every line byte for byte.
pub fn replay_text(text: &str) -> Result<Replayed, Box<dyn std::error::Error + Send + Sync>> {
    let trace = Trace::parse(text)?;
    let replayed = replay(&trace)?;
    let regenerated = replayed.simulator.trace(&replayed.execution, trace.header.seed).lines();
    for (i, (file, ours)) in text.lines().filter(|l| !l.trim().is_empty()).zip(&regenerated).enumerate() {
        if file != ours {
            return Err(Box::new(SimError::Diverged { line: i + 1, expected: file.to_string(), actual: ours.clone() }));
        }
    }
    Ok(replayed)
}
