//! The correctness properties as predicates over return logs, single
//! transitions and whole executions.

use serde::{Deserialize, Serialize};

use super::AgreementScope;
use crate::model::{Effect, ReturnEntry, StepLabel, Status, System, SystemState, Val};
use crate::objects::Genericity;
use crate::programs::{AlgoBound, ProgramId};
use crate::simulator::{ExperimentConfig, Execution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    Agreement,
    Validity,
    RecoverableWaitFreedom,
    GenericityViolation,
    ReadBeforeWrite,
    /// A per-state invariant of the algorithm's own correctness argument.
    ProgramInvariant,
}

impl Property {
    pub fn is_liveness(self) -> bool {
        self == Property::RecoverableWaitFreedom
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub property: Property,
    pub detail: String,
}

impl Violation {
    fn new(property: Property, detail: impl Into<String>) -> Violation {
        Violation { property, detail: detail.into() }
    }
}

/// All returned values must be equal (under the given scope).
pub fn check_agreement(log: &[ReturnEntry], scope: AgreementScope) -> Result<(), Violation> {
    for (i, a) in log.iter().enumerate() {
        if let Some(b) = log[..i].iter().find(|b| disagree(b, a, scope)) {
            return Err(Violation::new(
                Property::Agreement,
                format!("{} returned {} but {} returned {}", b.pid, b.value, a.pid, a.value),
            ));
        }
    }
    Ok(())
}

fn disagree(a: &ReturnEntry, b: &ReturnEntry, scope: AgreementScope) -> bool {
    a.value != b.value && (scope == AgreementScope::AllReturns || a.pid != b.pid)
}

/// Every returned value must be some process's proposal.
pub fn check_validity(log: &[ReturnEntry], proposals: &[Val]) -> Result<(), Violation> {
    match log.iter().find(|r| !proposals.contains(&r.value)) {
        Some(r) => Err(Violation::new(Property::Validity, format!("{} returned {}, not a proposal", r.pid, r.value))),
        None => Ok(()),
    }
}

/// No attempt may exceed `bound` own steps, and no attempt may end without returning.
pub fn check_rwf(exec: &Execution, bound: AlgoBound) -> Result<(), Violation> {
    for (effect, next) in exec.effects.iter().zip(&exec.states[1..]) {
        rwf_edge(effect, next, bound.steps)?;
    }
    Ok(())
}

fn rwf_edge(effect: &Effect, next: &SystemState, bound: u32) -> Result<(), Violation> {
    let StepLabel::Ordinary(pid) = effect.record.label else {
        return Ok(());
    };
    let frame = next.frame(pid);
    if effect.fell_off {
        return Err(Violation::new(
            Property::RecoverableWaitFreedom,
            format!("{pid} reached the end of the program without returning (attempt {})", frame.attempt),
        ));
    }
    if frame.steps > bound {
        return Err(Violation::new(
            Property::RecoverableWaitFreedom,
            format!("{pid} took {} steps in attempt {} without returning (bound {bound})", frame.steps, frame.attempt),
        ));
    }
    Ok(())
}

/// Which checks run on each transition.
#[derive(Clone, Copy, Debug)]
pub struct Checks {
    pub safety: bool,
    pub liveness: bool,
    pub scope: AgreementScope,
    pub monitor: bool,
    pub bound: u32,
}

impl Checks {
    pub fn from_config(cfg: &ExperimentConfig, sys: &System) -> Checks {
        Checks {
            safety: true,
            liveness: true,
            scope: cfg.agreement_scope,
            monitor: cfg.monitor_armed,
            bound: sys.bound().steps,
        }
    }

    /// Checks one transition `prev --effect--> next`.
    pub fn edge(&self, sys: &System, prev: &SystemState, effect: &Effect, next: &SystemState) -> Option<Violation> {
        if self.liveness {
            if let Err(v) = rwf_edge(effect, next, self.bound) {
                return Some(v);
            }
        }
        if !self.safety {
            return None;
        }
        if let Some(value) = effect.returned {
            let pid = effect.record.label.pid().expect("returns are ordinary steps");
            let entry = *next.returns_log.last().expect("return was logged");
            if let Err(v) = check_validity(&[entry], sys.proposals()) {
                return Some(v);
            }
            if let Some(b) = prev.returns_log.iter().find(|b| disagree(b, &entry, self.scope)) {
                return Some(Violation::new(
                    Property::Agreement,
                    format!("{} returned {} but {pid} returned {value}", b.pid, b.value),
                ));
            }
        }
        if self.monitor {
            if let Some((index, verdict)) = effect.genericity.filter(|(_, g)| *g != Genericity::Ok) {
                let pid = effect.record.label.pid().expect("accesses are ordinary steps");
                let name = match sys.program().id() {
                    ProgramId::Fig2 => format!("C[{index}]"),
                    _ => "C".to_string(),
                };
                return Some(Violation::new(
                    Property::GenericityViolation,
                    format!("{pid} accessed {name} again ({verdict:?}) in attempt {}", next.frame(pid).attempt),
                ));
            }
        }
        if effect.int_regression {
            return Some(Violation::new(Property::ProgramInvariant, "an R register decreased"));
        }
        if sys.program().id() == ProgramId::Fig2 {
            for (i, frame) in next.frames.iter().enumerate() {
                if frame.status != Status::Running {
                    continue;
                }
                let k = sys.program().iteration(&frame.local).unwrap_or(0);
                if next.failures < k {
                    return Some(Violation::new(
                        Property::ProgramInvariant,
                        format!("p{} is in iteration {k} after only {} failures", i + 1, next.failures),
                    ));
                }
            }
        }
        None
    }

    /// Checks a state with no enabled steps.
    pub fn terminal(&self, sys: &System, s: &SystemState) -> Option<Violation> {
        if self.safety {
            if let Err(v) = check_validity(&s.returns_log, sys.proposals()) {
                return Some(v);
            }
            if let Err(v) = check_agreement(&s.returns_log, self.scope) {
                return Some(v);
            }
        }
        if self.liveness {
            if let Some((i, _)) = s.frames.iter().enumerate().find(|(_, f)| f.status == Status::FellOff) {
                return Some(Violation::new(
                    Property::RecoverableWaitFreedom,
                    format!("p{} ended without returning", i + 1),
                ));
            }
        }
        None
    }
}
