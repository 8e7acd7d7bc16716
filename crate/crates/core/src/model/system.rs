//! The transition system: initial state, enabled steps, and the pure step function.

use thiserror::Error;

use super::trace::{OpDetail, OpRecord, StepRecord};
use super::{
    FailureKind, FailureModel, History, ProcessFrame, ReturnEntry, ReturnMode, StepError, StepLabel, Status,
    SystemState,
};
use super::{Pid, Val};
use crate::objects::{genericity_check, Caller, Genericity, Layout, ObjectError, ObjectValue, Op, Word};
use crate::programs::{static_bound, Action, AlgoBound, Ctx, Program, ProgramError, ProgramParams, Resume};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SetupError {
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error("expected {expected} proposals, got {got}")]
    ProposalCount { expected: usize, got: usize },
    #[error("⊥ is not a legal proposal (process {pid})")]
    BottomProposal { pid: usize },
    #[error("initial value for `{name}`: {source}")]
    Initial { name: String, source: ObjectError },
}

/// Side facts of one step that the checker inspects.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Effect {
    pub record: StepRecord,
    /// Value returned by the stepping process, if the step was a return.
    pub returned: Option<Val>,
    /// Outcome of the genericity check when the step opened a consensus invocation.
    pub genericity: Option<(u16, Genericity)>,
    pub fell_off: bool,
    /// An integer register was overwritten with a smaller value.
    pub int_regression: bool,
}

/// A fully configured program instance: machine, objects, proposals and failure model.
#[derive(Clone, Debug)]
pub struct System {
    program: Program,
    params: ProgramParams,
    layout: Layout,
    proposals: Vec<Val>,
    failure: FailureModel,
    return_mode: ReturnMode,
    bound: AlgoBound,
}

impl System {
    pub fn new(
        params: ProgramParams,
        proposals: Vec<Val>,
        failure: FailureModel,
        return_mode: ReturnMode,
        initial: &[(String, ObjectValue)],
    ) -> Result<System, SetupError> {
        let (program, mut layout) = Program::build(&params)?;
        if proposals.len() != params.n {
            return Err(SetupError::ProposalCount { expected: params.n, got: proposals.len() });
        }
        if let Some(i) = proposals.iter().position(|v| v.is_bottom()) {
            return Err(SetupError::BottomProposal { pid: i + 1 });
        }
        for (name, value) in initial {
            layout
                .set_initial(name, value.clone())
                .map_err(|source| SetupError::Initial { name: name.clone(), source })?;
        }
        let bound = static_bound(&params);
        Ok(System { program, params, layout, proposals, failure, return_mode, bound })
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn params(&self) -> &ProgramParams {
        &self.params
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn proposals(&self) -> &[Val] {
        &self.proposals
    }

    pub fn failure(&self) -> FailureModel {
        self.failure
    }

    pub fn return_mode(&self) -> ReturnMode {
        self.return_mode
    }

    pub fn bound(&self) -> AlgoBound {
        self.bound
    }

    pub fn pids(&self) -> impl Iterator<Item = Pid> {
        (0..self.params.n).map(Pid::from_index)
    }

    fn ctx(&self, pid: Pid) -> Ctx {
        Ctx { pid, proposal: self.proposals[pid.index()] }
    }

    fn fresh_frame(&self, pid: Pid, attempt: u32) -> ProcessFrame {
        ProcessFrame {
            proposal: self.proposals[pid.index()],
            attempt,
            steps: 0,
            status: Status::Running,
            local: self.program.entry(self.ctx(pid)),
        }
    }

    pub fn initial_state(&self) -> SystemState {
        SystemState {
            frames: self.pids().map(|p| self.fresh_frame(p, 1)).collect(),
            objects: self.layout.initial_values(),
            failures: 0,
            returns_log: Vec::new(),
            history: History::new(self.params.n, self.program.instance_count()),
        }
    }

    /// Enabled steps in a fixed order: ordinary steps by ascending pid, then crash steps.
    pub fn enabled_steps(&self, s: &SystemState) -> Vec<StepLabel> {
        let mut out: Vec<StepLabel> = self
            .pids()
            .filter(|p| s.frame(*p).status == Status::Running)
            .map(StepLabel::Ordinary)
            .collect();
        if s.failures < self.failure.budget {
            let crashable = || self.pids().filter(|p| s.frame(*p).crashable());
            match self.failure.kind {
                FailureKind::None => {}
                FailureKind::Independent => out.extend(crashable().map(StepLabel::Crash)),
                FailureKind::Simultaneous => {
                    if crashable().next().is_some() {
                        out.push(StepLabel::CrashAll);
                    }
                }
            }
        }
        out
    }

    pub fn is_enabled(&self, s: &SystemState, label: StepLabel) -> bool {
        let in_range = label.pid().is_none_or(|p| p.get() <= self.params.n);
        in_range && self.enabled_steps(s).contains(&label)
    }

    /// Applies one enabled step, producing a fresh state. The input is not modified.
    pub fn apply_step(&self, s: &SystemState, label: StepLabel) -> Result<(SystemState, Effect), StepError> {
        if !self.is_enabled(s, label) {
            return Err(StepError::NotEnabled { label });
        }
        let mut next = s.clone();
        let effect = match label {
            StepLabel::Ordinary(pid) => self.ordinary(&mut next, pid)?,
            StepLabel::Crash(pid) => {
                self.crash(&mut next, pid);
                next.failures += 1;
                crash_effect(label)
            }
            StepLabel::CrashAll => {
                for pid in self.pids() {
                    if next.frame(pid).crashable() {
                        self.crash(&mut next, pid);
                    }
                }
                next.failures += 1;
                crash_effect(label)
            }
        };
        Ok((next, effect))
    }

    fn crash(&self, s: &mut SystemState, pid: Pid) {
        let attempt = s.frame(pid).attempt + 1;
        s.frames[pid.index()] = self.fresh_frame(pid, attempt);
        s.history.first_tas_last &= !(1 << pid.index());
    }

    fn ordinary(&self, s: &mut SystemState, pid: Pid) -> Result<Effect, StepError> {
        let ctx = self.ctx(pid);
        let i = pid.index();
        let frame = s.frames[i].clone();
        let mut effect = Effect {
            record: StepRecord { step: 0, label: StepLabel::Ordinary(pid), op: OpRecord::Crash, resp: None },
            returned: None,
            genericity: None,
            fell_off: false,
            int_regression: false,
        };
        s.history.participated |= 1 << i;
        s.history.first_tas_last &= !(1 << i);

        let outcome = match self.program.action(ctx, &frame.local)? {
            Action::Return { line, value } => {
                effect.record.op = OpRecord::Op(OpDetail::returning(line, value));
                Resume::Return(value)
            }
            Action::Access(access) => {
                let idx = access.object.0 as usize;
                let before = &s.objects[idx];
                let caller = Caller { pid, attempt: frame.attempt };
                let (after, resp) = before
                    .apply(access.op, caller)
                    .map_err(|source| StepError::Object { line: access.line, source })?;
                if let (ObjectValue::IntRegister(old), Op::WriteInt(new)) = (before, access.op) {
                    effect.int_regression = new < *old;
                }
                if before.is_tas() {
                    let first = s.history.tas_touched[i].insert(access.object);
                    if first {
                        s.history.first_tas_last |= 1 << i;
                    }
                }
                s.objects[idx] = after;
                if let Some(inst) = access.instance.filter(|inst| inst.opens) {
                    let log = &mut s.history.instances[inst.index as usize];
                    effect.genericity = Some((inst.index, genericity_check(log, pid, frame.attempt)));
                    log.insert((pid, frame.attempt));
                }
                let object = self.layout.id(access.object).0.clone();
                effect.record.op = OpRecord::Op(OpDetail {
                    line: access.line.to_string(),
                    kind: access.op.name().to_string(),
                    object: Some(object),
                    args: access.op.args(),
                    returns: None,
                    fell_off: false,
                });
                effect.record.resp = resp.word();
                self.program.resume(ctx, &frame.local, resp)?
            }
        };

        let f = &mut s.frames[i];
        f.steps += 1;
        match outcome {
            Resume::Continue(local) => f.local = local,
            Resume::Return(value) => {
                f.status = match self.return_mode {
                    ReturnMode::RerunAfterCrash => Status::Returned(value),
                    ReturnMode::HaltAfterReturn => Status::Halted,
                };
                s.returns_log.push(ReturnEntry { pid, attempt: frame.attempt, value });
                effect.returned = Some(value);
                if let OpRecord::Op(detail) = &mut effect.record.op {
                    detail.returns = Some(value);
                }
            }
            Resume::End => {
                f.status = Status::FellOff;
                effect.fell_off = true;
                if let OpRecord::Op(detail) = &mut effect.record.op {
                    detail.fell_off = true;
                }
            }
        }
        Ok(effect)
    }

    /// Runs a schedule from the initial state, returning every intermediate state.
    pub fn run_labels(&self, labels: &[StepLabel]) -> Result<Vec<(SystemState, Effect)>, (usize, StepError)> {
        let mut s = self.initial_state();
        let mut out = Vec::with_capacity(labels.len());
        for (i, &label) in labels.iter().enumerate() {
            let (next, mut effect) = self.apply_step(&s, label).map_err(|e| (i, e))?;
            effect.record.step = i;
            s = next.clone();
            out.push((next, effect));
        }
        Ok(out)
    }
}

fn crash_effect(label: StepLabel) -> Effect {
    Effect {
        record: StepRecord { step: 0, label, op: OpRecord::Crash, resp: None },
        returned: None,
        genericity: None,
        fell_off: false,
        int_regression: false,
    }
}

impl OpDetail {
    fn returning(line: &str, value: Val) -> OpDetail {
        OpDetail {
            line: line.to_string(),
            kind: "return".to_string(),
            object: None,
            args: Vec::<Word>::new(),
            returns: Some(value),
            fell_off: false,
        }
    }
}
