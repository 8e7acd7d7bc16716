//! Two-process recoverable consensus from one CAS object and two
//! announcement registers, tolerating any number of failures.

use super::{access, expect_ack, expect_val, Action, Ctx, MachineError, Resume};
use crate::model::Val;
use crate::objects::{Layout, ObjIdx, ObjectValue, Op, Response};

pub const EX_IF: &str = "ex:if";
pub const EX_RETPO: &str = "ex:retpo";
pub const EX_WP: &str = "ex:wP";
pub const EX_CAS: &str = "ex:CAS";
pub const EX_RETC: &str = "ex:retC";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pc {
    /// `ex:if`, first read: `P[i]`.
    IfSelf,
    /// `ex:if`, second read: `P[Other]`.
    IfOther,
    RetOther,
    WriteP,
    Cas,
    RetC,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Local {
    pub pc: Pc,
    pub p_self: Val,
}

impl Local {
    pub(crate) fn encode(&self, out: &mut Vec<u8>) {
        out.extend([self.pc as u8, self.p_self.code()]);
    }
}

#[derive(Clone, Debug)]
pub struct Fig3 {
    p: [ObjIdx; 2],
    c: ObjIdx,
}

impl Fig3 {
    pub fn new(layout: &mut Layout) -> Fig3 {
        let p1 = layout.add("P[1]", ObjectValue::Register(Val::Bottom));
        let p2 = layout.add("P[2]", ObjectValue::Register(Val::Bottom));
        let c = layout.add("C", ObjectValue::Cas(Val::Bottom));
        Fig3 { p: [p1, p2], c }
    }

    pub fn entry(&self, _ctx: Ctx) -> Local {
        Local { pc: Pc::IfSelf, p_self: Val::Bottom }
    }

    pub fn action(&self, ctx: Ctx, l: &Local) -> Action {
        let me = self.p[ctx.pid.index()];
        let other = self.p[ctx.pid.other().index()];
        match l.pc {
            Pc::IfSelf => access(EX_IF, me, Op::Read),
            Pc::IfOther => access(EX_IF, other, Op::Read),
            Pc::RetOther => access(EX_RETPO, other, Op::Read),
            Pc::WriteP => access(EX_WP, me, Op::Write(ctx.proposal)),
            Pc::Cas => access(EX_CAS, self.c, Op::CompareAndSwap { expected: Val::Bottom, new: ctx.proposal }),
            Pc::RetC => access(EX_RETC, self.c, Op::Read),
        }
    }

    pub fn resume(&self, _ctx: Ctx, l: &Local, resp: Response) -> Result<Resume, MachineError> {
        let next = match l.pc {
            Pc::IfSelf => Local { pc: Pc::IfOther, p_self: expect_val(EX_IF, resp)? },
            Pc::IfOther => {
                let p_other = expect_val(EX_IF, resp)?;
                let pc = if l.p_self.is_bottom() && !p_other.is_bottom() { Pc::RetOther } else { Pc::WriteP };
                Local { pc, p_self: Val::Bottom }
            }
            Pc::RetOther => return expect_val(EX_RETPO, resp).map(Resume::Return),
            Pc::WriteP => {
                expect_ack(EX_WP, resp)?;
                Local { pc: Pc::Cas, ..l.clone() }
            }
            // The CAS response is not used; the decision is re-read from C.
            Pc::Cas => {
                expect_val(EX_CAS, resp)?;
                Local { pc: Pc::RetC, ..l.clone() }
            }
            Pc::RetC => return expect_val(EX_RETC, resp).map(Resume::Return),
        };
        Ok(Resume::Continue(super::Local::Fig3(next)))
    }
}
