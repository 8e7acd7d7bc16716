//! Step records and the JSON-lines trace format.
//!
//! A trace file is one header line followed by one line per step:
//!
//! ```text
//! {"config":{...},"initial_hash":"..","final_hash":"..","steps":7,"seed":null}
//! {"step":0,"label":"ordinary","pid":1,"op":{"line":"x:if","kind":"read","object":"P[1]"},"resp":"⊥"}
//! {"step":3,"label":"crash-all","pid":null,"op":"crash","resp":null}
//! ```

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::{Pid, StepLabel, Val};
use crate::objects::Word;

/// What an ordinary step did.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpDetail {
    pub line: String,
    /// Operation name, or `return` for a step that touches no object.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<Word>,
    /// Set when the step returned a decision.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub returns: Option<Val>,
    #[serde(default, rename = "fell-off", skip_serializing_if = "std::ops::Not::not")]
    pub fell_off: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OpRecord {
    Crash,
    Op(OpDetail),
}

impl Serialize for OpRecord {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            OpRecord::Crash => serializer.serialize_str("crash"),
            OpRecord::Op(detail) => detail.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for OpRecord {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<OpRecord, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Tag(String),
            Detail(OpDetail),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Tag(t) if t == "crash" => Ok(OpRecord::Crash),
            Raw::Tag(t) => Err(serde::de::Error::custom(format!("unknown op tag `{t}`"))),
            Raw::Detail(d) => Ok(OpRecord::Op(d)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepRecord {
    /// Position in the trace, dense from 0.
    pub step: usize,
    pub label: StepLabel,
    pub op: OpRecord,
    pub resp: Option<Word>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    step: usize,
    label: String,
    pid: Option<Pid>,
    op: OpRecord,
    resp: Option<Word>,
}

impl Serialize for StepRecord {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        RawRecord {
            step: self.step,
            label: self.label.kind().to_string(),
            pid: self.label.pid(),
            op: self.op.clone(),
            resp: self.resp,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StepRecord {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<StepRecord, D::Error> {
        use serde::de::Error;
        let raw = RawRecord::deserialize(deserializer)?;
        let label = match (raw.label.as_str(), raw.pid) {
            ("ordinary", Some(p)) => StepLabel::Ordinary(p),
            ("crash", Some(p)) => StepLabel::Crash(p),
            ("crash-all", None) => StepLabel::CrashAll,
            (kind, pid) => return Err(D::Error::custom(format!("inconsistent label `{kind}` with pid {pid:?}"))),
        };
        Ok(StepRecord { step: raw.step, label, op: raw.op, resp: raw.resp })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    /// The full experiment configuration document.
    pub config: serde_json::Value,
    pub initial_hash: String,
    pub final_hash: String,
    pub steps: usize,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<StepRecord>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace is empty")]
    Empty,
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("record on line {line} has step {found}, expected {expected}")]
    StepIndex { line: usize, found: usize, expected: usize },
    #[error("header announces {announced} steps, file has {found}")]
    StepCount { announced: usize, found: usize },
}

impl Trace {
    pub fn labels(&self) -> Vec<StepLabel> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// Serialized lines, header first.
    pub fn lines(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.records.len() + 1);
        out.push(serde_json::to_string(&self.header).expect("header serializes"));
        out.extend(self.records.iter().map(|r| serde_json::to_string(r).expect("record serializes")));
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut text = self.lines().join("\n");
        text.push('\n');
        text
    }

    pub fn parse(text: &str) -> Result<Trace, TraceError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(TraceError::Empty)?;
        let header: TraceHeader = serde_json::from_str(first).map_err(|source| TraceError::Json { line: 1, source })?;
        let mut records = Vec::new();
        for (i, line) in lines {
            let record: StepRecord =
                serde_json::from_str(line).map_err(|source| TraceError::Json { line: i + 1, source })?;
            if record.step != records.len() {
                return Err(TraceError::StepIndex { line: i + 1, found: record.step, expected: records.len() });
            }
            records.push(record);
        }
        if header.steps != records.len() {
            return Err(TraceError::StepCount { announced: header.steps, found: records.len() });
        }
        Ok(Trace { header, records })
    }
}
