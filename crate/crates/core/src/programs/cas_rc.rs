//! `n`-process recoverable consensus from a single CAS object: install the
//! own proposal if `C` is still empty, and return whatever `C` held.

use super::{access, expect_val, Action, Ctx, MachineError, Resume};
use crate::model::Val;
use crate::objects::{Layout, ObjIdx, ObjectValue, Op, Response};

pub const CAS_CAS: &str = "cas:CAS";
pub const CAS_RET: &str = "cas:ret";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pc {
    Cas,
    Ret,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Local {
    pub pc: Pc,
    pub decided: Val,
}

impl Local {
    pub(crate) fn encode(&self, out: &mut Vec<u8>) {
        out.extend([self.pc as u8, self.decided.code()]);
    }
}

#[derive(Clone, Debug)]
pub struct CasRc {
    c: ObjIdx,
}

impl CasRc {
    pub fn new(layout: &mut Layout) -> CasRc {
        CasRc { c: layout.add("C", ObjectValue::Cas(Val::Bottom)) }
    }

    pub fn entry(&self, _ctx: Ctx) -> Local {
        Local { pc: Pc::Cas, decided: Val::Bottom }
    }

    pub fn action(&self, ctx: Ctx, l: &Local) -> Action {
        match l.pc {
            Pc::Cas => access(CAS_CAS, self.c, Op::CompareAndSwap { expected: Val::Bottom, new: ctx.proposal }),
            Pc::Ret => Action::Return { line: CAS_RET, value: l.decided },
        }
    }

    pub fn resume(&self, ctx: Ctx, l: &Local, resp: Response) -> Result<Resume, MachineError> {
        debug_assert_eq!(l.pc, Pc::Cas);
        let prior = expect_val(CAS_CAS, resp)?;
        let decided = if prior.is_bottom() { ctx.proposal } else { prior };
        Ok(Resume::Continue(super::Local::CasRc(Local { pc: Pc::Ret, decided })))
    }
}
