//! Direct use of one atomic consensus object as the algorithm. Not
//! recoverable: a process that crashes after deciding and reruns accesses
//! the object a second time, which the genericity monitor flags.

use super::{expect_val, Access, Action, Ctx, InstanceAccess, MachineError, Resume};
use crate::model::Val;
use crate::objects::{ConsState, Layout, ObjIdx, ObjectValue, Op, Response};

pub const CB_DECIDE: &str = "cb:decide";
pub const CB_RET: &str = "cb:ret";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pc {
    Decide,
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
pub struct ConsBase {
    c: ObjIdx,
}

impl ConsBase {
    pub fn new(layout: &mut Layout) -> ConsBase {
        ConsBase { c: layout.add("C", ObjectValue::Cons(ConsState::default())) }
    }

    pub fn entry(&self, _ctx: Ctx) -> Local {
        Local { pc: Pc::Decide, decided: Val::Bottom }
    }

    pub fn action(&self, ctx: Ctx, l: &Local) -> Action {
        match l.pc {
            Pc::Decide => Action::Access(Access {
                line: CB_DECIDE,
                object: self.c,
                op: Op::Decide(ctx.proposal),
                instance: Some(InstanceAccess { index: 0, opens: true }),
            }),
            Pc::Ret => Action::Return { line: CB_RET, value: l.decided },
        }
    }

    pub fn resume(&self, _ctx: Ctx, l: &Local, resp: Response) -> Result<Resume, MachineError> {
        debug_assert_eq!(l.pc, Pc::Decide);
        let decided = expect_val(CB_DECIDE, resp)?;
        Ok(Resume::Continue(super::Local::ConsBase(Local { pc: Pc::Ret, decided })))
    }
}
