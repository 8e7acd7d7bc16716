//! Two-process recoverable consensus from one conventional consensus `C`,
//! tolerating any number of simultaneous failures.
//!
//! Guards that mention two registers are evaluated by reading each register
//! in its own step and combining the reads privately.

use super::{
    access, expect_ack, expect_val, Action, ConsChoice, ConsImpl, Ctx, Fig1Choice, InnerPc, InnerStep, MachineError,
    Resume,
};
use crate::model::Val;
use crate::objects::{Layout, ObjIdx, ObjectValue, Op, Response};

pub const X_IF: &str = "x:if";
pub const X_WP: &str = "x:wP";
pub const X_C: &str = "x:C";
pub const X_WD: &str = "x:wD";
pub const X_RETD: &str = "x:retd";
pub const X_RECD: &str = "x:recD";
pub const X_RECDRET: &str = "x:recDret";
pub const X_INBOTOBOT: &str = "x:inbotObot";
pub const X_INBOTOBOTRET: &str = "x:inbotObotret";
pub const X_IBOTONBOT: &str = "x:ibotOnbot";
pub const X_IBOTONBOTRET: &str = "x:ibotOnbotret";
pub const X_INBOTONBOTRET: &str = "x:inbotOnbotret";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pc {
    /// `x:if`, first read: `P[i]`.
    IfSelf,
    /// `x:if`, second read: `P[Other]`.
    IfOther,
    WriteP,
    C(InnerPc),
    WriteD,
    RetD,
    RecD,
    RecDRet,
    NbSelf,
    NbOther,
    RetSelf,
    BnSelf,
    BnOther,
    RetOther,
    RetChoice,
}

impl Pc {
    fn code(self) -> u8 {
        match self {
            Pc::IfSelf => 0,
            Pc::IfOther => 1,
            Pc::WriteP => 2,
            Pc::C(inner) => 0x10 | inner.code(),
            Pc::WriteD => 3,
            Pc::RetD => 4,
            Pc::RecD => 5,
            Pc::RecDRet => 6,
            Pc::NbSelf => 7,
            Pc::NbOther => 8,
            Pc::RetSelf => 9,
            Pc::BnSelf => 10,
            Pc::BnOther => 11,
            Pc::RetOther => 12,
            Pc::RetChoice => 13,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Local {
    pub pc: Pc,
    /// Scratch read of `P[i]` for the guard being evaluated.
    pub p_self: Val,
    /// Scratch read of `P[Other]` for the guard being evaluated.
    pub p_other: Val,
    pub d: Val,
}

impl Local {
    pub(crate) fn encode(&self, out: &mut Vec<u8>) {
        out.extend([self.pc.code(), self.p_self.code(), self.p_other.code(), self.d.code()]);
    }
}

#[derive(Clone, Debug)]
pub struct Fig1 {
    p: [ObjIdx; 2],
    d: ObjIdx,
    c: ConsImpl,
    choice: Fig1Choice,
}

impl Fig1 {
    pub fn new(layout: &mut Layout, cons: ConsChoice, choice: Fig1Choice) -> Fig1 {
        let p1 = layout.add("P[1]", ObjectValue::Register(Val::Bottom));
        let p2 = layout.add("P[2]", ObjectValue::Register(Val::Bottom));
        let c = ConsImpl::install(layout, "C", 0, cons);
        let d = layout.add("D", ObjectValue::Register(Val::Bottom));
        Fig1 { p: [p1, p2], d, c, choice }
    }

    pub fn cons(&self) -> &ConsImpl {
        &self.c
    }

    pub fn entry(&self, _ctx: Ctx) -> Local {
        Local { pc: Pc::IfSelf, p_self: Val::Bottom, p_other: Val::Bottom, d: Val::Bottom }
    }

    pub fn action(&self, ctx: Ctx, l: &Local) -> Action {
        let me = self.p[ctx.pid.index()];
        let other = self.p[ctx.pid.other().index()];
        match l.pc {
            Pc::IfSelf => access(X_IF, me, Op::Read),
            Pc::IfOther => access(X_IF, other, Op::Read),
            Pc::WriteP => access(X_WP, me, Op::Write(ctx.proposal)),
            Pc::C(pc) => Action::Access(self.c.access(X_C, pc, ctx.pid, ctx.proposal)),
            Pc::WriteD => access(X_WD, self.d, Op::Write(l.d)),
            Pc::RetD => Action::Return { line: X_RETD, value: l.d },
            Pc::RecD => access(X_RECD, self.d, Op::Read),
            Pc::RecDRet => access(X_RECDRET, self.d, Op::Read),
            Pc::NbSelf => access(X_INBOTOBOT, me, Op::Read),
            Pc::NbOther => access(X_INBOTOBOT, other, Op::Read),
            Pc::RetSelf => access(X_INBOTOBOTRET, me, Op::Read),
            Pc::BnSelf => access(X_IBOTONBOT, me, Op::Read),
            Pc::BnOther => access(X_IBOTONBOT, other, Op::Read),
            Pc::RetOther => access(X_IBOTONBOTRET, other, Op::Read),
            Pc::RetChoice => match self.choice {
                Fig1Choice::P1 => access(X_INBOTONBOTRET, self.p[0], Op::Read),
                Fig1Choice::P2 => access(X_INBOTONBOTRET, self.p[1], Op::Read),
                Fig1Choice::Min => Action::Return { line: X_INBOTONBOTRET, value: l.p_self.min(l.p_other) },
                Fig1Choice::Max => Action::Return { line: X_INBOTONBOTRET, value: l.p_self.max(l.p_other) },
            },
        }
    }

    pub fn resume(&self, ctx: Ctx, l: &Local, resp: Response) -> Result<Resume, MachineError> {
        let next = match l.pc {
            Pc::IfSelf => Local { pc: Pc::IfOther, p_self: expect_val(X_IF, resp)?, ..l.clone() },
            Pc::IfOther => {
                let p_other = expect_val(X_IF, resp)?;
                if l.p_self.is_bottom() && p_other.is_bottom() {
                    Local { pc: Pc::WriteP, p_self: Val::Bottom, p_other: Val::Bottom, ..l.clone() }
                } else {
                    Local { pc: Pc::RecD, p_self: Val::Bottom, p_other: Val::Bottom, ..l.clone() }
                }
            }
            Pc::WriteP => {
                expect_ack(X_WP, resp)?;
                Local { pc: Pc::C(self.c.entry()), ..l.clone() }
            }
            Pc::C(pc) => match self.c.resume(X_C, pc, ctx.proposal, resp)? {
                InnerStep::Next(pc) => Local { pc: Pc::C(pc), ..l.clone() },
                InnerStep::Decided(d) => Local { pc: Pc::WriteD, d, ..l.clone() },
            },
            Pc::WriteD => {
                expect_ack(X_WD, resp)?;
                Local { pc: Pc::RetD, ..l.clone() }
            }
            Pc::RecD => {
                if expect_val(X_RECD, resp)?.is_bottom() {
                    Local { pc: Pc::NbSelf, ..l.clone() }
                } else {
                    Local { pc: Pc::RecDRet, ..l.clone() }
                }
            }
            Pc::NbSelf => Local { pc: Pc::NbOther, p_self: expect_val(X_INBOTOBOT, resp)?, ..l.clone() },
            Pc::NbOther => {
                let p_other = expect_val(X_INBOTOBOT, resp)?;
                if !l.p_self.is_bottom() && p_other.is_bottom() {
                    Local { pc: Pc::RetSelf, p_other, ..l.clone() }
                } else {
                    Local { pc: Pc::BnSelf, p_self: Val::Bottom, p_other: Val::Bottom, ..l.clone() }
                }
            }
            Pc::BnSelf => Local { pc: Pc::BnOther, p_self: expect_val(X_IBOTONBOT, resp)?, ..l.clone() },
            Pc::BnOther => {
                let p_other = expect_val(X_IBOTONBOT, resp)?;
                if l.p_self.is_bottom() && !p_other.is_bottom() {
                    Local { pc: Pc::RetOther, p_other, ..l.clone() }
                } else {
                    Local { pc: Pc::RetChoice, p_other, ..l.clone() }
                }
            }
            Pc::RecDRet | Pc::RetSelf | Pc::RetOther | Pc::RetChoice => {
                return expect_val(Self::line(l.pc), resp).map(Resume::Return);
            }
            Pc::RetD => unreachable!("private return has no response"),
        };
        Ok(Resume::Continue(super::Local::Fig1(next)))
    }

    fn line(pc: Pc) -> &'static str {
        match pc {
            Pc::RecDRet => X_RECDRET,
            Pc::RetSelf => X_INBOTOBOTRET,
            Pc::RetOther => X_IBOTONBOTRET,
            _ => X_INBOTONBOTRET,
        }
    }
}
