//! Built-in algorithms as deterministic step machines.
//!
//! Each machine emits at most one shared-object access per step. Every
//! access carries the source line label of the pseudo-code it implements
//! (`x:wP`, `xn:inc`, `ex:CAS`, ...) so traces can be audited against it.
//! Returning a shared value (`return D`, `return C`) is a single step that
//! reads the object and returns what it read; returning a private value is
//! a step without any object access.

mod bound;
pub mod cas_rc;
pub mod cons_base;
pub mod fig1;
pub mod fig2;
pub mod fig3;
pub mod tas_cons2;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Pid, Val};
use crate::objects::{ConsState, Layout, ObjIdx, ObjectValue, Op, Response};

pub use bound::{static_bound, AlgoBound};
pub use tas_cons2::TasInstance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProgramId {
    #[serde(rename = "fig1")]
    Fig1,
    #[serde(rename = "fig2")]
    Fig2,
    #[serde(rename = "fig3")]
    Fig3,
    #[serde(rename = "cas-rc")]
    CasRc,
    #[serde(rename = "tas-cons2")]
    TasCons2,
    #[serde(rename = "cons-base")]
    ConsBase,
}

impl ProgramId {
    pub const ALL: [ProgramId; 6] = [
        ProgramId::Fig1,
        ProgramId::Fig2,
        ProgramId::Fig3,
        ProgramId::CasRc,
        ProgramId::TasCons2,
        ProgramId::ConsBase,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProgramId::Fig1 => "fig1",
            ProgramId::Fig2 => "fig2",
            ProgramId::Fig3 => "fig3",
            ProgramId::CasRc => "cas-rc",
            ProgramId::TasCons2 => "tas-cons2",
            ProgramId::ConsBase => "cons-base",
        }
    }
}

impl fmt::Display for ProgramId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProgramId {
    type Err = ProgramError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProgramId::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| ProgramError::UnknownProgram(s.to_string()))
    }
}

/// How the inner conventional consensus `C` of a transformation is realized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConsChoice {
    /// One atomic consensus base object, decided in a single step.
    #[default]
    Atomic,
    /// The two-process TAS construction, inlined step by step.
    Tas,
}

/// Visiting order of the collision scan over `z ≠ i`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanOrder {
    #[default]
    Asc,
    Desc,
}

/// Deterministic choice when both announced proposals are visible.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fig1Choice {
    #[default]
    P1,
    P2,
    Min,
    Max,
}

/// Construction parameters for a program.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProgramParams {
    pub id: ProgramId,
    pub n: usize,
    /// Number of tolerated failures; fig2 allocates `f + 1` consensus instances.
    pub f: u32,
    pub cons: ConsChoice,
    pub scan_order: ScanOrder,
    pub fig1_choice: Fig1Choice,
}

impl ProgramParams {
    pub fn new(id: ProgramId, n: usize) -> ProgramParams {
        ProgramParams {
            id,
            n,
            f: 0,
            cons: ConsChoice::Atomic,
            scan_order: ScanOrder::Asc,
            fig1_choice: Fig1Choice::P1,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProgramError {
    #[error("unknown program id `{0}`")]
    UnknownProgram(String),
    #[error("{program} is a {expected}-process algorithm, got n = {n}")]
    ProcessCount { program: ProgramId, expected: &'static str, n: usize },
    #[error("{0}")]
    Unsupported(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MachineError {
    #[error("private variable `{var}` read before written at {line}")]
    ReadBeforeWrite { line: &'static str, var: &'static str },
    #[error("unexpected response {resp:?} at {line}")]
    BadResponse { line: &'static str, resp: Response },
}

/// A consensus instance touched by an access, for the genericity monitor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InstanceAccess {
    pub index: u16,
    /// True for the first access of an invocation.
    pub opens: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Access {
    pub line: &'static str,
    pub object: ObjIdx,
    pub op: Op,
    pub instance: Option<InstanceAccess>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    Access(Access),
    /// Return a privately held value; the step touches no object.
    Return { line: &'static str, value: Val },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Resume {
    Continue(Local),
    Return(Val),
    /// Control fell off the end of the procedure without returning.
    End,
}

/// The private state of one process: program counter plus locals.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Local {
    Fig1(fig1::Local),
    Fig2(fig2::Local),
    Fig3(fig3::Local),
    CasRc(cas_rc::Local),
    TasCons2(tas_cons2::Local),
    ConsBase(cons_base::Local),
}

impl Local {
    pub(crate) fn encode(&self, out: &mut Vec<u8>) {
        match self {
            Local::Fig1(l) => l.encode(out),
            Local::Fig2(l) => l.encode(out),
            Local::Fig3(l) => l.encode(out),
            Local::CasRc(l) => l.encode(out),
            Local::TasCons2(l) => l.encode(out),
            Local::ConsBase(l) => l.encode(out),
        }
    }

    /// Human-readable program location, used in graph dumps.
    pub fn describe(&self) -> String {
        match self {
            Local::Fig1(l) => format!("{:?}", l.pc),
            Local::Fig2(l) => format!("k={} {:?}", l.k, l.pc),
            Local::Fig3(l) => format!("{:?}", l.pc),
            Local::CasRc(l) => format!("{:?}", l.pc),
            Local::TasCons2(l) => format!("{:?}", l.pc),
            Local::ConsBase(l) => format!("{:?}", l.pc),
        }
    }
}

/// Per-step view of the process being stepped.
#[derive(Clone, Copy, Debug)]
pub struct Ctx {
    pub pid: Pid,
    pub proposal: Val,
}

/// A program counter inside an inner consensus invocation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InnerPc {
    Decide,
    Announce,
    Tas,
    ReadOther,
}

impl InnerPc {
    fn code(self) -> u8 {
        match self {
            InnerPc::Decide => 0,
            InnerPc::Announce => 1,
            InnerPc::Tas => 2,
            InnerPc::ReadOther => 3,
        }
    }
}

pub(crate) enum InnerStep {
    Next(InnerPc),
    Decided(Val),
}

/// The conventional consensus used inside a transformation.
#[derive(Clone, Copy, Debug)]
pub enum ConsImpl {
    Atomic { object: ObjIdx, instance: u16 },
    Tas(TasInstance),
}

impl ConsImpl {
    pub(crate) fn install(layout: &mut Layout, name: &str, instance: u16, choice: ConsChoice) -> ConsImpl {
        match choice {
            ConsChoice::Atomic => ConsImpl::Atomic {
                object: layout.add(name, ObjectValue::Cons(ConsState::default())),
                instance,
            },
            ConsChoice::Tas => ConsImpl::Tas(TasInstance::install(layout, name, Some(instance))),
        }
    }

    pub(crate) fn entry(&self) -> InnerPc {
        match self {
            ConsImpl::Atomic { .. } => InnerPc::Decide,
            ConsImpl::Tas(_) => InnerPc::Announce,
        }
    }

    pub(crate) fn access(&self, line: &'static str, pc: InnerPc, me: Pid, v: Val) -> Access {
        match self {
            ConsImpl::Atomic { object, instance } => {
                debug_assert_eq!(pc, InnerPc::Decide);
                Access {
                    line,
                    object: *object,
                    op: Op::Decide(v),
                    instance: Some(InstanceAccess { index: *instance, opens: true }),
                }
            }
            ConsImpl::Tas(t) => t.access(pc, me, v),
        }
    }

    pub(crate) fn resume(&self, line: &'static str, pc: InnerPc, v: Val, resp: Response) -> Result<InnerStep, MachineError> {
        match self {
            ConsImpl::Atomic { .. } => match resp {
                Response::Val(d) => Ok(InnerStep::Decided(d)),
                resp => Err(MachineError::BadResponse { line, resp }),
            },
            ConsImpl::Tas(t) => t.resume(pc, v, resp),
        }
    }
}

/// A built program: one of the machines plus its object layout.
#[derive(Clone, Debug)]
pub enum Program {
    Fig1(fig1::Fig1),
    Fig2(fig2::Fig2),
    Fig3(fig3::Fig3),
    CasRc(cas_rc::CasRc),
    TasCons2(tas_cons2::TasCons2),
    ConsBase(cons_base::ConsBase),
}

impl Program {
    /// Builds the machine and its shared-object layout.
    pub fn build(params: &ProgramParams) -> Result<(Program, Layout), ProgramError> {
        let mut layout = Layout::new();
        let need_two = |program| {
            if params.n != 2 {
                Err(ProgramError::ProcessCount { program, expected: "2", n: params.n })
            } else {
                Ok(())
            }
        };
        if params.n == 0 || params.n > Pid::MAX_PROCESSES {
            return Err(ProgramError::ProcessCount { program: params.id, expected: "1..=16", n: params.n });
        }
        let program = match params.id {
            ProgramId::Fig1 => {
                need_two(ProgramId::Fig1)?;
                Program::Fig1(fig1::Fig1::new(&mut layout, params.cons, params.fig1_choice))
            }
            ProgramId::Fig2 => {
                if params.n < 2 {
                    return Err(ProgramError::ProcessCount { program: ProgramId::Fig2, expected: "n >= 2", n: params.n });
                }
                if params.cons == ConsChoice::Tas && params.n != 2 {
                    return Err(ProgramError::Unsupported(format!(
                        "the TAS-based inner consensus is a 2-process construction; fig2 with n = {} needs cons = atomic",
                        params.n
                    )));
                }
                Program::Fig2(fig2::Fig2::new(&mut layout, params.n, params.f, params.cons, params.scan_order))
            }
            ProgramId::Fig3 => {
                need_two(ProgramId::Fig3)?;
                Program::Fig3(fig3::Fig3::new(&mut layout))
            }
            ProgramId::CasRc => Program::CasRc(cas_rc::CasRc::new(&mut layout)),
            ProgramId::TasCons2 => {
                need_two(ProgramId::TasCons2)?;
                Program::TasCons2(tas_cons2::TasCons2::new(&mut layout))
            }
            ProgramId::ConsBase => Program::ConsBase(cons_base::ConsBase::new(&mut layout)),
        };
        Ok((program, layout))
    }

    pub fn id(&self) -> ProgramId {
        match self {
            Program::Fig1(_) => ProgramId::Fig1,
            Program::Fig2(_) => ProgramId::Fig2,
            Program::Fig3(_) => ProgramId::Fig3,
            Program::CasRc(_) => ProgramId::CasRc,
            Program::TasCons2(_) => ProgramId::TasCons2,
            Program::ConsBase(_) => ProgramId::ConsBase,
        }
    }

    /// Number of consensus instances tracked by the genericity monitor.
    pub fn instance_count(&self) -> usize {
        match self {
            Program::Fig1(_) | Program::ConsBase(_) => 1,
            Program::Fig2(m) => m.instances(),
            Program::Fig3(_) | Program::CasRc(_) | Program::TasCons2(_) => 0,
        }
    }

    pub fn entry(&self, ctx: Ctx) -> Local {
        match self {
            Program::Fig1(m) => Local::Fig1(m.entry(ctx)),
            Program::Fig2(m) => Local::Fig2(m.entry(ctx)),
            Program::Fig3(m) => Local::Fig3(m.entry(ctx)),
            Program::CasRc(m) => Local::CasRc(m.entry(ctx)),
            Program::TasCons2(m) => Local::TasCons2(m.entry(ctx)),
            Program::ConsBase(m) => Local::ConsBase(m.entry(ctx)),
        }
    }

    pub fn action(&self, ctx: Ctx, local: &Local) -> Result<Action, MachineError> {
        match (self, local) {
            (Program::Fig1(m), Local::Fig1(l)) => Ok(m.action(ctx, l)),
            (Program::Fig2(m), Local::Fig2(l)) => m.action(ctx, l),
            (Program::Fig3(m), Local::Fig3(l)) => Ok(m.action(ctx, l)),
            (Program::CasRc(m), Local::CasRc(l)) => Ok(m.action(ctx, l)),
            (Program::TasCons2(m), Local::TasCons2(l)) => Ok(m.action(ctx, l)),
            (Program::ConsBase(m), Local::ConsBase(l)) => Ok(m.action(ctx, l)),
            _ => unreachable!("local state does not belong to {}", self.id()),
        }
    }

    pub fn resume(&self, ctx: Ctx, local: &Local, resp: Response) -> Result<Resume, MachineError> {
        match (self, local) {
            (Program::Fig1(m), Local::Fig1(l)) => m.resume(ctx, l, resp),
            (Program::Fig2(m), Local::Fig2(l)) => m.resume(ctx, l, resp),
            (Program::Fig3(m), Local::Fig3(l)) => m.resume(ctx, l, resp),
            (Program::CasRc(m), Local::CasRc(l)) => m.resume(ctx, l, resp),
            (Program::TasCons2(m), Local::TasCons2(l)) => m.resume(ctx, l, resp),
            (Program::ConsBase(m), Local::ConsBase(l)) => m.resume(ctx, l, resp),
            _ => unreachable!("local state does not belong to {}", self.id()),
        }
    }

    /// The outer-loop iteration a fig2 process is in, if any.
    pub fn iteration(&self, local: &Local) -> Option<u32> {
        match local {
            Local::Fig2(l) => Some(l.k as u32),
            _ => None,
        }
    }
}

pub(crate) fn expect_val(line: &'static str, resp: Response) -> Result<Val, MachineError> {
    match resp {
        Response::Val(v) => Ok(v),
        resp => Err(MachineError::BadResponse { line, resp }),
    }
}

pub(crate) fn expect_int(line: &'static str, resp: Response) -> Result<u32, MachineError> {
    match resp {
        Response::Int(x) => Ok(x),
        resp => Err(MachineError::BadResponse { line, resp }),
    }
}

pub(crate) fn expect_ack(line: &'static str, resp: Response) -> Result<(), MachineError> {
    match resp {
        Response::Ack => Ok(()),
        resp => Err(MachineError::BadResponse { line, resp }),
    }
}

pub(crate) fn access(line: &'static str, object: ObjIdx, op: Op) -> Action {
    Action::Access(Access { line, object, op, instance: None })
}
