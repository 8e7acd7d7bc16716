//! `n`-process recoverable consensus from `f + 1` conventional consensus
//! instances `C[0..f]`, tolerating up to `f` independent failures.
//!
//! `R[i]` claims iterations so that no process re-enters a `C[k]` after a
//! crash, `D[k]` records each instance's decision for later iterations to
//! adopt, and the collision scan over `R[z]` makes a process forget a
//! decision when someone else has already moved past its iteration.

use super::{
    access, expect_ack, expect_int, expect_val, Action, ConsChoice, ConsImpl, Ctx, InnerPc, InnerStep, MachineError,
    Resume, ScanOrder,
};
use crate::model::{Pid, Val};
use crate::objects::{Layout, ObjIdx, ObjectValue, Op, Response};

pub const XN_IF: &str = "xn:if";
pub const XN_INC: &str = "xn:inc";
pub const XN_CIF: &str = "xn:cif";
pub const XN_C: &str = "xn:C";
pub const XN_WD: &str = "xn:wD";
pub const XN_IFPIN: &str = "xn:ifpin";
pub const XN_RETD: &str = "xn:retd";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pc {
    /// Read `R[i]` and compare with `k`.
    If,
    Inc,
    /// Read `D[k']` during the adoption scan.
    Cif,
    C(InnerPc),
    WriteD,
    /// Collision scan: read `R[z]`.
    ScanOther,
    /// Collision scan: read `R[i]` and compare.
    ScanSelf,
    Ret,
}

impl Pc {
    fn code(self) -> u8 {
        match self {
            Pc::If => 0,
            Pc::Inc => 1,
            Pc::Cif => 2,
            Pc::C(inner) => 0x10 | inner.code(),
            Pc::WriteD => 3,
            Pc::ScanOther => 4,
            Pc::ScanSelf => 5,
            Pc::Ret => 6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Local {
    pub pc: Pc,
    /// Outer loop index.
    pub k: u8,
    /// Adoption scan index `k'` (0 outside the scan).
    pub kp: u8,
    /// Collision scan target (0 outside the scan), 1-based pid.
    pub z: u8,
    pub v: Val,
    /// `None` while uninitialized.
    pub d: Option<Val>,
    /// Scratch read of `R[z]` (0 outside the scan).
    pub rz: u32,
}

impl Local {
    pub(crate) fn encode(&self, out: &mut Vec<u8>) {
        out.extend([self.pc.code(), self.k, self.kp, self.z, self.v.code()]);
        out.push(match self.d {
            None => 0xFE,
            Some(v) => v.code(),
        });
        out.extend(self.rz.to_le_bytes());
    }

    fn d(&self, line: &'static str) -> Result<Val, MachineError> {
        self.d.ok_or(MachineError::ReadBeforeWrite { line, var: "d" })
    }
}

#[derive(Clone, Debug)]
pub struct Fig2 {
    n: usize,
    f: u32,
    r: Vec<ObjIdx>,
    c: Vec<ConsImpl>,
    d: Vec<ObjIdx>,
    order: ScanOrder,
}

impl Fig2 {
    pub fn new(layout: &mut Layout, n: usize, f: u32, cons: ConsChoice, order: ScanOrder) -> Fig2 {
        let r = (1..=n).map(|i| layout.add(format!("R[{i}]"), ObjectValue::IntRegister(0))).collect();
        let c = (0..=f).map(|k| ConsImpl::install(layout, &format!("C[{k}]"), k as u16, cons)).collect();
        let d = (0..=f).map(|k| layout.add(format!("D[{k}]"), ObjectValue::Register(Val::Bottom))).collect();
        Fig2 { n, f, r, c, d, order }
    }

    pub fn instances(&self) -> usize {
        self.c.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn f(&self) -> u32 {
        self.f
    }

    pub fn cons(&self, k: usize) -> &ConsImpl {
        &self.c[k]
    }

    pub fn entry(&self, ctx: Ctx) -> Local {
        Local { pc: Pc::If, k: 0, kp: 0, z: 0, v: ctx.proposal, d: None, rz: 0 }
    }

    pub fn action(&self, ctx: Ctx, l: &Local) -> Result<Action, MachineError> {
        let me = self.r[ctx.pid.index()];
        let k = l.k as usize;
        Ok(match l.pc {
            Pc::If => access(XN_IF, me, Op::Read),
            Pc::Inc => access(XN_INC, me, Op::WriteInt(l.k as u32 + 1)),
            Pc::Cif => access(XN_CIF, self.d[l.kp as usize], Op::Read),
            Pc::C(pc) => Action::Access(self.c[k].access(XN_C, pc, ctx.pid, l.v)),
            Pc::WriteD => access(XN_WD, self.d[k], Op::Write(l.d(XN_WD)?)),
            Pc::ScanOther => access(XN_IFPIN, self.r[l.z as usize - 1], Op::Read),
            Pc::ScanSelf => access(XN_IFPIN, me, Op::Read),
            Pc::Ret => Action::Return { line: XN_RETD, value: l.d(XN_RETD)? },
        })
    }

    pub fn resume(&self, ctx: Ctx, l: &Local, resp: Response) -> Result<Resume, MachineError> {
        let k = l.k as u32;
        let next = match l.pc {
            Pc::If => {
                if expect_int(XN_IF, resp)? == k {
                    Local { pc: Pc::Inc, ..l.clone() }
                } else {
                    return Ok(self.next_iteration(l));
                }
            }
            Pc::Inc => {
                expect_ack(XN_INC, resp)?;
                if k > 0 {
                    Local { pc: Pc::Cif, kp: 0, ..l.clone() }
                } else {
                    Local { pc: Pc::C(self.c[0].entry()), ..l.clone() }
                }
            }
            Pc::Cif => {
                let seen = expect_val(XN_CIF, resp)?;
                let v = if seen.is_bottom() { l.v } else { seen };
                if (l.kp as u32) + 1 < k {
                    Local { pc: Pc::Cif, kp: l.kp + 1, v, ..l.clone() }
                } else {
                    Local { pc: Pc::C(self.c[k as usize].entry()), kp: 0, v, ..l.clone() }
                }
            }
            Pc::C(pc) => match self.c[k as usize].resume(XN_C, pc, l.v, resp)? {
                InnerStep::Next(pc) => Local { pc: Pc::C(pc), ..l.clone() },
                InnerStep::Decided(d) => Local { pc: Pc::WriteD, d: Some(d), ..l.clone() },
            },
            Pc::WriteD => {
                expect_ack(XN_WD, resp)?;
                match (k < self.f).then(|| self.scan_targets(ctx.pid).next()).flatten() {
                    Some(z) => Local { pc: Pc::ScanOther, z: z.get() as u8, ..l.clone() },
                    None => return self.finish_iteration(l.clone()),
                }
            }
            Pc::ScanOther => Local { pc: Pc::ScanSelf, rz: expect_int(XN_IFPIN, resp)?, ..l.clone() },
            Pc::ScanSelf => {
                let mine = expect_int(XN_IFPIN, resp)?;
                let d = if l.rz > mine { Some(Val::Bottom) } else { l.d };
                let after = self.scan_targets(ctx.pid).skip_while(|z| z.get() != l.z as usize).nth(1);
                let cleared = Local { d, rz: 0, z: 0, ..l.clone() };
                match after {
                    Some(z) => Local { pc: Pc::ScanOther, z: z.get() as u8, ..cleared },
                    None => return self.finish_iteration(cleared),
                }
            }
            Pc::Ret => unreachable!("private return has no response"),
        };
        Ok(Resume::Continue(super::Local::Fig2(next)))
    }

    /// `xn:iffin`: return if a decision is held, otherwise move on.
    fn finish_iteration(&self, l: Local) -> Result<Resume, MachineError> {
        if l.d(XN_RETD)?.is_bottom() {
            Ok(self.next_iteration(&l))
        } else {
            Ok(Resume::Continue(super::Local::Fig2(Local { pc: Pc::Ret, ..l })))
        }
    }

    fn next_iteration(&self, l: &Local) -> Resume {
        if l.k as u32 >= self.f {
            Resume::End
        } else {
            Resume::Continue(super::Local::Fig2(Local { pc: Pc::If, k: l.k + 1, kp: 0, z: 0, rz: 0, ..l.clone() }))
        }
    }

    fn scan_targets(&self, me: Pid) -> impl Iterator<Item = Pid> + '_ {
        let ids: Box<dyn Iterator<Item = usize>> = match self.order {
            ScanOrder::Asc => Box::new(1..=self.n),
            ScanOrder::Desc => Box::new((1..=self.n).rev()),
        };
        ids.filter(move |&z| z != me.get()).map(|z| Pid::from_index(z - 1))
    }
}
