//! System state snapshots and their canonical byte encodings.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Pid, Val};
use crate::objects::{ObjIdx, ObjectValue};
use crate::programs::Local;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Running,
    Returned(Val),
    /// Returned under `halt-after-return`; takes no further steps of any kind.
    Halted,
    /// Control reached the end of the program without returning.
    FellOff,
}

impl Status {
    fn code(self) -> [u8; 2] {
        match self {
            Status::Running => [0, 0],
            Status::Returned(v) => [1, v.code()],
            Status::Halted => [2, 0],
            Status::FellOff => [3, 0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProcessFrame {
    pub proposal: Val,
    /// 1 for the first run, incremented by every crash of this process.
    pub attempt: u32,
    /// Ordinary steps taken in the current attempt.
    pub steps: u32,
    pub status: Status,
    pub local: Local,
}

impl ProcessFrame {
    /// Whether a crash step can hit this process.
    pub fn crashable(&self) -> bool {
        matches!(self.status, Status::Running | Status::Returned(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReturnEntry {
    pub pid: Pid,
    pub attempt: u32,
    pub value: Val,
}

/// Execution-history facts that later steps depend on.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct History {
    /// Bit `i` set iff process `i + 1` has taken an ordinary step.
    pub participated: u32,
    /// TAS objects each process has accessed so far.
    pub tas_touched: Vec<BTreeSet<ObjIdx>>,
    /// Bit `i` set iff the previous step of process `i + 1` was its first access to some TAS object.
    pub first_tas_last: u32,
    /// `(pid, attempt)` pairs that opened an invocation of each consensus instance.
    pub instances: Vec<BTreeSet<(Pid, u32)>>,
}

impl History {
    pub fn new(n: usize, instances: usize) -> History {
        History {
            participated: 0,
            tas_touched: vec![BTreeSet::new(); n],
            first_tas_last: 0,
            instances: vec![BTreeSet::new(); instances],
        }
    }

    pub fn participants(&self) -> impl Iterator<Item = Pid> + '_ {
        (0..self.tas_touched.len()).filter(|i| self.participated & (1 << i) != 0).map(Pid::from_index)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SystemState {
    pub frames: Vec<ProcessFrame>,
    pub objects: Vec<ObjectValue>,
    pub failures: u32,
    pub returns_log: Vec<ReturnEntry>,
    pub history: History,
}

/// What a canonical encoding must distinguish.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KeyMode {
    /// Everything, including the full return log and attempt counters.
    Full,
    /// Enough to determine all future behaviour and verdicts.
    Memo {
        /// Replace attempt counters by their relation to the current attempt.
        ignore_attempt: bool,
        /// Keep decided values per process instead of one union set.
        per_process: bool,
    },
}

/// Truncated SHA-256 of the full canonical encoding.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateHash(pub [u8; 16]);

impl fmt::Display for StateHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for StateHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StateHash({self})")
    }
}

impl SystemState {
    pub fn frame(&self, pid: Pid) -> &ProcessFrame {
        &self.frames[pid.index()]
    }

    /// Values returned so far, as a set.
    pub fn decided(&self) -> BTreeSet<Val> {
        self.returns_log.iter().map(|r| r.value).collect()
    }

    pub fn decided_mask(&self) -> u32 {
        self.returns_log.iter().fold(0, |m, r| m | r.value.mask_bit())
    }

    pub fn encode(&self, mode: KeyMode, out: &mut Vec<u8>) {
        let ignore_attempt = matches!(mode, KeyMode::Memo { ignore_attempt: true, .. });
        // Attempt numbers are only compared with the owner's current attempt,
        // so under `ignore_attempt` that comparison is all that is kept.
        let attempt = |pid: Pid, a: u32, out: &mut Vec<u8>| {
            if ignore_attempt {
                out.push((a == self.frame(pid).attempt) as u8);
            } else {
                out.extend(a.to_le_bytes());
            }
        };

        out.push(self.frames.len() as u8);
        for frame in &self.frames {
            out.push(frame.proposal.code());
            if !ignore_attempt {
                out.extend(frame.attempt.to_le_bytes());
            }
            out.extend(frame.steps.to_le_bytes());
            out.extend(frame.status.code());
            frame.local.encode(out);
        }

        for object in &self.objects {
            match object {
                ObjectValue::Register(v) => out.extend([0, v.code()]),
                ObjectValue::IntRegister(x) => {
                    out.push(1);
                    out.extend(x.to_le_bytes());
                }
                ObjectValue::Tas(bit) => out.extend([2, *bit as u8]),
                ObjectValue::Cas(v) => out.extend([3, v.code()]),
                ObjectValue::Cons(state) => {
                    out.extend([4, state.decision.code(), state.accessors.len() as u8]);
                    for &(pid, a) in &state.accessors {
                        out.push(pid.get() as u8);
                        attempt(pid, a, out);
                    }
                }
            }
        }

        out.extend(self.failures.to_le_bytes());

        let h = &self.history;
        out.extend(h.participated.to_le_bytes());
        out.extend(h.first_tas_last.to_le_bytes());
        for touched in &h.tas_touched {
            out.push(touched.len() as u8);
            for idx in touched {
                out.extend(idx.0.to_le_bytes());
            }
        }
        for accessors in &h.instances {
            out.push(accessors.len() as u8);
            for &(pid, a) in accessors {
                out.push(pid.get() as u8);
                attempt(pid, a, out);
            }
        }

        match mode {
            KeyMode::Full => {
                out.extend((self.returns_log.len() as u32).to_le_bytes());
                for r in &self.returns_log {
                    out.push(r.pid.get() as u8);
                    out.extend(r.attempt.to_le_bytes());
                    out.push(r.value.code());
                }
            }
            KeyMode::Memo { per_process: false, .. } => {
                out.extend(self.decided_mask().to_le_bytes());
                out.push(self.returns_log.iter().any(|r| r.value.is_bottom()) as u8);
            }
            KeyMode::Memo { per_process: true, .. } => {
                for i in 0..self.frames.len() {
                    let pid = Pid::from_index(i);
                    let mask = self.returns_log.iter().filter(|r| r.pid == pid).fold(0, |m, r| m | r.value.mask_bit());
                    out.extend(mask.to_le_bytes());
                }
                out.push(self.returns_log.iter().any(|r| r.value.is_bottom()) as u8);
            }
        }
    }

    pub fn key(&self, mode: KeyMode) -> Vec<u8> {
        let mut out = Vec::with_capacity(96);
        self.encode(mode, &mut out);
        out
    }

    pub fn hash(&self) -> StateHash {
        let digest = Sha256::digest(self.key(KeyMode::Full));
        let mut h = [0; 16];
        h.copy_from_slice(&digest[..16]);
        StateHash(h)
    }
}
