//! Two-process consensus from one TAS bit and two announce registers.
//!
//! Announce in `A[i]`, apply TAS; the winner decides its own value and the
//! loser decides `A[other]`. It is correct only in crash-free executions,
//! which is why the transformations wrap it.

use super::{expect_ack, expect_val, Access, Action, Ctx, InnerPc, InnerStep, InstanceAccess, MachineError, Resume};
use crate::model::{Pid, Val};
use crate::objects::{Layout, ObjIdx, ObjectValue, Op, Response};

pub const LINE_ANNOUNCE: &str = "tc:wA";
pub const LINE_TAS: &str = "tc:tas";
pub const LINE_READ_OTHER: &str = "tc:rA";
pub const LINE_RET: &str = "tc:ret";

/// Objects of one TAS-based consensus instance.
#[derive(Clone, Copy, Debug)]
pub struct TasInstance {
    pub announce: [ObjIdx; 2],
    pub tas: ObjIdx,
    /// Set when the instance is the inner `C` of a transformation.
    pub instance: Option<u16>,
}

impl TasInstance {
    /// Adds `<prefix>.A[1]`, `<prefix>.A[2]` and `<prefix>.T` (or bare names for an empty prefix).
    pub fn install(layout: &mut Layout, prefix: &str, instance: Option<u16>) -> TasInstance {
        let name = |s: &str| if prefix.is_empty() { s.to_string() } else { format!("{prefix}.{s}") };
        let a1 = layout.add(name("A[1]"), ObjectValue::Register(Val::Bottom));
        let a2 = layout.add(name("A[2]"), ObjectValue::Register(Val::Bottom));
        let tas = layout.add(name("T"), ObjectValue::Tas(false));
        TasInstance { announce: [a1, a2], tas, instance }
    }

    pub(crate) fn access(&self, pc: InnerPc, me: Pid, v: Val) -> Access {
        let (line, object, op) = match pc {
            InnerPc::Announce => (LINE_ANNOUNCE, self.announce[me.index()], Op::Write(v)),
            InnerPc::Tas => (LINE_TAS, self.tas, Op::TestAndSet),
            InnerPc::ReadOther => (LINE_READ_OTHER, self.announce[me.other().index()], Op::Read),
            InnerPc::Decide => unreachable!("atomic decide inside a TAS instance"),
        };
        let instance = self.instance.map(|index| InstanceAccess { index, opens: pc == InnerPc::Announce });
        Access { line, object, op, instance }
    }

    pub(crate) fn resume(&self, pc: InnerPc, v: Val, resp: Response) -> Result<InnerStep, MachineError> {
        match pc {
            InnerPc::Announce => expect_ack(LINE_ANNOUNCE, resp).map(|_| InnerStep::Next(InnerPc::Tas)),
            InnerPc::Tas => match resp {
                Response::Bit(false) => Ok(InnerStep::Decided(v)),
                Response::Bit(true) => Ok(InnerStep::Next(InnerPc::ReadOther)),
                resp => Err(MachineError::BadResponse { line: LINE_TAS, resp }),
            },
            InnerPc::ReadOther => expect_val(LINE_READ_OTHER, resp).map(InnerStep::Decided),
            InnerPc::Decide => unreachable!("atomic decide inside a TAS instance"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pc {
    Work(InnerPc),
    /// Won the TAS: return the own proposal.
    Ret,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Local {
    pub pc: Pc,
}

impl Local {
    pub(crate) fn encode(&self, out: &mut Vec<u8>) {
        out.push(match self.pc {
            Pc::Work(p) => p.code(),
            Pc::Ret => 0x10,
        });
    }
}

/// The bare construction run as the top-level algorithm, with no crash protection.
#[derive(Clone, Debug)]
pub struct TasCons2 {
    objects: TasInstance,
}

impl TasCons2 {
    pub fn new(layout: &mut Layout) -> TasCons2 {
        TasCons2 { objects: TasInstance::install(layout, "", None) }
    }

    pub fn entry(&self, _ctx: Ctx) -> Local {
        Local { pc: Pc::Work(InnerPc::Announce) }
    }

    pub fn action(&self, ctx: Ctx, l: &Local) -> Action {
        match l.pc {
            Pc::Work(pc) => Action::Access(self.objects.access(pc, ctx.pid, ctx.proposal)),
            Pc::Ret => Action::Return { line: LINE_RET, value: ctx.proposal },
        }
    }

    pub fn resume(&self, ctx: Ctx, l: &Local, resp: Response) -> Result<Resume, MachineError> {
        let Pc::Work(pc) = l.pc else {
            unreachable!("return step has no response")
        };
        Ok(match self.objects.resume(pc, ctx.proposal, resp)? {
            InnerStep::Next(next) => Resume::Continue(super::Local::TasCons2(Local { pc: Pc::Work(next) })),
            // The loser's read of A[other] is its return step.
            InnerStep::Decided(d) if pc == InnerPc::ReadOther => Resume::Return(d),
            InnerStep::Decided(_) => Resume::Continue(super::Local::TasCons2(Local { pc: Pc::Ret })),
        })
    }
}
