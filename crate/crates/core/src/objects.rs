//! Shared base objects with single-step atomic semantics.
//!
//! Every operation here is one atomic step of the simulated system. Objects
//! live inside [`SystemState`](crate::model::SystemState) and are only ever
//! changed through [`ObjectValue::apply`].

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Pid, Val};

/// Name of a shared object, e.g. `P[1]`, `C[0]`, `D`, `R[2]`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub String);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Position of an object in a [`Layout`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjIdx(pub u16);

/// Settled state of an atomic consensus base object.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct ConsState {
    pub decision: Val,
    /// Every `(pid, attempt)` that has invoked `decide`.
    pub accessors: BTreeSet<(Pid, u32)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ObjectValue {
    Register(Val),
    /// Read/write register holding an integer (the `R[i]` counters).
    IntRegister(u32),
    Tas(bool),
    Cas(Val),
    Cons(ConsState),
}

impl ObjectValue {
    pub fn kind(&self) -> &'static str {
        match self {
            ObjectValue::Register(_) => "register",
            ObjectValue::IntRegister(_) => "int-register",
            ObjectValue::Tas(_) => "tas",
            ObjectValue::Cas(_) => "cas",
            ObjectValue::Cons(_) => "cons",
        }
    }

    pub fn is_tas(&self) -> bool {
        matches!(self, ObjectValue::Tas(_))
    }

    /// Applies one operation atomically, returning the new value and the response.
    pub fn apply(&self, op: Op, caller: Caller) -> Result<(ObjectValue, Response), ObjectError> {
        let mismatch = || ObjectError::TypeMismatch { op: op.name(), kind: self.kind() };
        let out = match (self, op) {
            (ObjectValue::Register(v), Op::Read) => (self.clone(), Response::Val(*v)),
            (ObjectValue::Register(_), Op::Write(v)) => (ObjectValue::Register(v), Response::Ack),
            (ObjectValue::IntRegister(x), Op::Read) => (self.clone(), Response::Int(*x)),
            (ObjectValue::IntRegister(_), Op::WriteInt(x)) => (ObjectValue::IntRegister(x), Response::Ack),
            (ObjectValue::Tas(bit), Op::TestAndSet) => {
                let (next, prior) = tas_apply(*bit);
                (ObjectValue::Tas(next), Response::Bit(prior))
            }
            (ObjectValue::Tas(bit), Op::ReadBit) => (self.clone(), Response::Bit(rtas_read(*bit))),
            (ObjectValue::Cas(cur), Op::Read) => (self.clone(), Response::Val(*cur)),
            (ObjectValue::Cas(cur), Op::CompareAndSwap { expected, new }) => {
                let (next, prior) = cas_apply(*cur, expected, new);
                (ObjectValue::Cas(next), Response::Val(prior))
            }
            (ObjectValue::Cons(state), Op::Decide(v)) => {
                let (next, decision) = cons_decide(state, caller.pid, caller.attempt, v)?;
                (ObjectValue::Cons(next), Response::Val(decision))
            }
            _ => return Err(mismatch()),
        };
        debug_assert!(monotone(self, &out.0), "object invariant broken by {op:?}");
        Ok(out)
    }
}

/// TAS bits never fall back to 0 and a consensus decision never changes once set.
fn monotone(before: &ObjectValue, after: &ObjectValue) -> bool {
    match (before, after) {
        (ObjectValue::Tas(true), ObjectValue::Tas(b)) => *b,
        (ObjectValue::Cons(a), ObjectValue::Cons(b)) => a.decision.is_bottom() || a.decision == b.decision,
        _ => true,
    }
}

/// Returns `(new bit, prior bit)`.
pub fn tas_apply(bit: bool) -> (bool, bool) {
    (true, bit)
}

pub fn rtas_read(bit: bool) -> bool {
    bit
}

/// Returns `(new value, prior value)`; the swap happened iff `prior == expected`.
pub fn cas_apply(current: Val, expected: Val, new: Val) -> (Val, Val) {
    if current == expected {
        (new, current)
    } else {
        (current, current)
    }
}

/// First proposal delivered wins; every caller learns the settled decision.
pub fn cons_decide(state: &ConsState, pid: Pid, attempt: u32, v: Val) -> Result<(ConsState, Val), ObjectError> {
    if v.is_bottom() {
        return Err(ObjectError::BottomProposal);
    }
    let mut next = state.clone();
    if next.decision.is_bottom() {
        next.decision = v;
    }
    next.accessors.insert((pid, attempt));
    let decision = next.decision;
    Ok((next, decision))
}

/// Outcome of the genericity monitor for one consensus invocation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Genericity {
    Ok,
    /// The caller accessed this object in an earlier attempt and has since crashed.
    AccessAfterCrash,
    /// The caller already accessed this object in the current attempt.
    DuplicateAccess,
}

/// Checks a consensus invocation by `(pid, attempt)` against the prior accessors.
pub fn genericity_check(accessors: &BTreeSet<(Pid, u32)>, pid: Pid, attempt: u32) -> Genericity {
    let mut verdict = Genericity::Ok;
    for &(p, a) in accessors.iter().filter(|(p, _)| *p == pid) {
        debug_assert_eq!(p, pid);
        if a < attempt {
            return Genericity::AccessAfterCrash;
        }
        verdict = Genericity::DuplicateAccess;
    }
    verdict
}

/// The invoking process, needed by `decide` to record accessors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Caller {
    pub pid: Pid,
    pub attempt: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Read,
    Write(Val),
    WriteInt(u32),
    TestAndSet,
    /// The pure read of a readable TAS.
    ReadBit,
    CompareAndSwap { expected: Val, new: Val },
    Decide(Val),
}

impl Op {
    pub fn name(self) -> &'static str {
        match self {
            Op::Read => "read",
            Op::Write(_) | Op::WriteInt(_) => "write",
            Op::TestAndSet => "tas",
            Op::ReadBit => "rtas-read",
            Op::CompareAndSwap { .. } => "cas",
            Op::Decide(_) => "decide",
        }
    }

    pub fn args(self) -> Vec<Word> {
        match self {
            Op::Read | Op::TestAndSet | Op::ReadBit => vec![],
            Op::Write(v) | Op::Decide(v) => vec![Word::Val(v)],
            Op::WriteInt(x) => vec![Word::Int(x)],
            Op::CompareAndSwap { expected, new } => vec![Word::Val(expected), Word::Val(new)],
        }
    }

    /// Whether the operation can change object state.
    pub fn is_pure_read(self) -> bool {
        matches!(self, Op::Read | Op::ReadBit)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Response {
    Val(Val),
    Int(u32),
    Bit(bool),
    Ack,
}

impl Response {
    pub fn word(self) -> Option<Word> {
        match self {
            Response::Val(v) => Some(Word::Val(v)),
            Response::Int(x) => Some(Word::Int(x)),
            Response::Bit(b) => Some(Word::Int(b as u32)),
            Response::Ack => None,
        }
    }
}

/// JSON form of operation arguments and responses: tokens as strings, integers as numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Word {
    Val(Val),
    Int(u32),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ObjectError {
    #[error("operation {op} is not defined on a {kind} object")]
    TypeMismatch { op: &'static str, kind: &'static str },
    #[error("⊥ cannot be proposed to a consensus object")]
    BottomProposal,
}

/// One named object slot and its initial value.
#[derive(Clone, Debug)]
pub struct ObjectSlot {
    pub id: ObjectId,
    pub initial: ObjectValue,
}

/// The object table of one program instance.
#[derive(Clone, Debug, Default)]
pub struct Layout {
    slots: Vec<ObjectSlot>,
}

impl Layout {
    pub fn new() -> Layout {
        Layout::default()
    }

    pub fn add(&mut self, name: impl Into<String>, initial: ObjectValue) -> ObjIdx {
        let id = ObjectId(name.into());
        debug_assert!(self.index_of(&id.0).is_none(), "duplicate object {id}");
        self.slots.push(ObjectSlot { id, initial });
        ObjIdx(self.slots.len() as u16 - 1)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn id(&self, idx: ObjIdx) -> &ObjectId {
        &self.slots[idx.0 as usize].id
    }

    pub fn index_of(&self, name: &str) -> Option<ObjIdx> {
        self.slots.iter().position(|s| s.id.0 == name).map(|i| ObjIdx(i as u16))
    }

    pub fn initial_values(&self) -> Vec<ObjectValue> {
        self.slots.iter().map(|s| s.initial.clone()).collect()
    }

    pub fn slots(&self) -> &[ObjectSlot] {
        &self.slots
    }

    pub fn tas_count(&self) -> usize {
        self.slots.iter().filter(|s| s.initial.is_tas()).count()
    }

    /// Replaces the initial value of a named object, keeping its type.
    pub fn set_initial(&mut self, name: &str, value: ObjectValue) -> Result<(), ObjectError> {
        let slot = self
            .slots
            .iter_mut()
            .find(|s| s.id.0 == name)
            .ok_or(ObjectError::TypeMismatch { op: "init", kind: "missing" })?;
        if std::mem::discriminant(&slot.initial) != std::mem::discriminant(&value) {
            return Err(ObjectError::TypeMismatch { op: "init", kind: slot.initial.kind() });
        }
        slot.initial = value;
        Ok(())
    }
}
