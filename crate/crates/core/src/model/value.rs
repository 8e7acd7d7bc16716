use std::fmt;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

use super::ModelError;

/// Process identifier, 1-based as in `p1 .. pn`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pid(u8);

impl Pid {
    pub const MAX_PROCESSES: usize = 16;

    pub fn new(id: usize, n: usize) -> Result<Pid, ModelError> {
        if id == 0 || id > n || n > Self::MAX_PROCESSES {
            return Err(ModelError::PidOutOfRange { id, n });
        }
        Ok(Pid(id as u8))
    }

    /// Builds the pid for a 0-based frame index without range checks against `n`.
    pub(crate) fn from_index(index: usize) -> Pid {
        debug_assert!(index < Self::MAX_PROCESSES);
        Pid(index as u8 + 1)
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }

    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    /// The partner of a two-process algorithm (`Other := 3 - i`).
    pub fn other(self) -> Pid {
        debug_assert!(self.0 == 1 || self.0 == 2);
        Pid(3 - self.0)
    }
}

impl fmt::Display for Pid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// A proposal token or the distinguished `⊥`.
///
/// Tokens are the lowercase letters `a..z`; `Bottom` sorts before every token.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Val {
    #[default]
    Bottom,
    Sym(u8),
}

impl Val {
    pub const ALPHABET: usize = 26;
    pub const BOTTOM_TEXT: &'static str = "⊥";

    pub fn sym(c: char) -> Result<Val, ModelError> {
        if c.is_ascii_lowercase() {
            Ok(Val::Sym(c as u8 - b'a'))
        } else {
            Err(ModelError::BadToken(c.to_string()))
        }
    }

    pub fn is_bottom(self) -> bool {
        matches!(self, Val::Bottom)
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Val::Bottom => 0xFF,
            Val::Sym(i) => i,
        }
    }

    /// Bit for this token in a value-set mask; `⊥` has no bit.
    pub(crate) fn mask_bit(self) -> u32 {
        match self {
            Val::Bottom => 0,
            Val::Sym(i) => 1 << i,
        }
    }

    pub(crate) fn from_mask(mask: u32) -> impl Iterator<Item = Val> {
        (0..Self::ALPHABET as u8).filter(move |i| mask & (1 << i) != 0).map(Val::Sym)
    }
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Val::Bottom => f.write_str(Self::BOTTOM_TEXT),
            Val::Sym(i) => write!(f, "{}", (b'a' + i) as char),
        }
    }
}

impl std::str::FromStr for Val {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Val, ModelError> {
        if s == Self::BOTTOM_TEXT {
            return Ok(Val::Bottom);
        }
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Val::sym(c),
            _ => Err(ModelError::BadToken(s.to_string())),
        }
    }
}

impl Serialize for Val {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Val {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Val, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}
