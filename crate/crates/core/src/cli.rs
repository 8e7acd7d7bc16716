//! Command-line front end.
//!
//! Every verb prints one JSON document on stdout. Exit codes: 0 pass,
//! 2 property violation (or replay divergence), 3 depth or state limit,
//! 64 usage error, 65 malformed config or trace.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde_json::json;

use crate::checker::{self, CheckError, Verdict};
use crate::config::{AdversaryKind, ExperimentConfig};
use crate::model::Trace;
use crate::programs::static_bound;
use crate::simulator::{self, SimError, Simulator};
use crate::valency::{self, ValencyError};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_LIMIT: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;

const DEFAULT_COUNTEREXAMPLE: &str = "counterexample.jsonl";
const DEFAULT_DOT: &str = "valency.dot";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Verb {
    /// Explore every execution (or run the configured adversary) and check all properties.
    Check,
    /// Check seeded random executions.
    Fuzz,
    /// Build the execution graph and classify valency.
    Valency,
    /// Re-execute a trace file and compare it line by line.
    Replay,
    /// Print the static per-attempt step bound, certified by exhaustive search.
    Bound,
}

#[derive(Debug, Parser)]
#[command(name = "rc-lab", version, about = "Simulator and model checker for recoverable consensus")]
pub struct Args {
    #[arg(value_enum)]
    pub verb: Verb,
    /// Experiment configuration (JSON object).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Replace one config key; the value is parsed as JSON, else taken as a string.
    #[arg(long = "override", value_name = "K=V")]
    pub overrides: Vec<String>,
    /// Trace file to replay.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
    /// Where to write a counterexample trace or DOT graph.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Worker threads. Exploration currently runs on one thread regardless.
    #[arg(long, env = "RC_LAB_JOBS", value_name = "N")]
    pub jobs: Option<usize>,
    /// Override the depth limit.
    #[arg(long, value_name = "N")]
    pub depth: Option<usize>,
    /// Override the seed for random adversaries.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
}

struct Failed(i32, String);

impl From<SimError> for Failed {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => Failed(EXIT_DATA, c.to_string()),
            other => Failed(EXIT_FAIL, other.to_string()),
        }
    }
}

impl From<CheckError> for Failed {
    fn from(e: CheckError) -> Self {
        match e {
            CheckError::Sim(s) => s.into(),
            CheckError::StateCap(_) => Failed(EXIT_LIMIT, e.to_string()),
            CheckError::Harness { .. } => Failed(1, e.to_string()),
        }
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(args) => args,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = if e.use_stderr() { write!(stderr, "{e}") } else { write!(stdout, "{e}") };
            return code;
        }
    };
    match dispatch(&args, stdout) {
        Ok(code) => code,
        Err(Failed(code, msg)) => {
            let _ = writeln!(stderr, "rc-lab: {msg}");
            code
        }
    }
}

fn dispatch(args: &Args, out: &mut dyn Write) -> Result<i32, Failed> {
    match args.verb {
        Verb::Check => check(args, out),
        Verb::Fuzz => fuzz(args, out),
        Verb::Valency => valency(args, out),
        Verb::Replay => replay(args, out),
        Verb::Bound => bound(args, out),
    }
}

fn load_config(args: &Args) -> Result<ExperimentConfig, Failed> {
    let path = args.config.as_ref().ok_or_else(|| Failed(EXIT_USAGE, format!("{:?} needs --config PATH", args.verb)))?;
    let text = std::fs::read_to_string(path).map_err(|e| Failed(EXIT_DATA, format!("{}: {e}", path.display())))?;
    let mut overrides = args.overrides.clone();
    if let Some(d) = args.depth {
        overrides.push(format!("depth-limit={d}"));
    }
    if let Some(s) = args.seed {
        overrides.push(format!("seed={s}"));
    }
    ExperimentConfig::parse(&text, &overrides).map_err(|e| Failed(EXIT_DATA, format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, value: &serde_json::Value) -> Result<(), Failed> {
    let text = serde_json::to_string_pretty(value).expect("json serializes");
    writeln!(out, "{text}").map_err(|e| Failed(1, e.to_string()))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failed> {
    std::fs::write(path, text).map_err(|e| Failed(1, format!("{}: {e}", path.display())))
}

fn report(args: &Args, verdict: &Verdict, out: &mut dyn Write) -> Result<i32, Failed> {
    let mut trace_file = None;
    if let Verdict::Fail(failure, _) = verdict {
        let path = args.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_COUNTEREXAMPLE));
        write_file(&path, &failure.trace.to_jsonl())?;
        trace_file = Some(path.display().to_string());
    }
    let mut doc = verdict.to_json(trace_file.as_deref());
    if let Some(jobs) = args.jobs {
        doc["jobs"] = json!(jobs);
    }
    emit(out, &doc)?;
    Ok(verdict.exit_code())
}

fn check(args: &Args, out: &mut dyn Write) -> Result<i32, Failed> {
    let sim = Simulator::new(load_config(args)?)?;
    let verdict = match sim.config().adversary {
        AdversaryKind::Exhaustive | AdversaryKind::Assumption1 => checker::explore(&sim)?,
        AdversaryKind::Random => checker::fuzz(&sim, sim.config().seed, sim.config().episodes)?,
        AdversaryKind::Scripted => scripted(&sim)?,
    };
    report(args, &verdict, out)
}

fn scripted(sim: &Simulator) -> Result<Verdict, Failed> {
    let labels = &sim.config().schedule;
    let exec = sim.run(labels)?;
    let stats = checker::Stats {
        states: exec.states.len() as u64,
        edges: exec.effects.len() as u64,
        terminals: sim.choices(exec.last()).is_empty() as u64,
        max_attempt_steps: exec.states.iter().flat_map(|s| s.frames.iter().map(|f| f.steps)).max().unwrap_or(0),
        max_failures: exec.last().failures,
        max_depth: exec.effects.len(),
        bound: sim.system().bound().steps,
        episodes: None,
    };
    Ok(match checker::check_labels(sim, labels, None)? {
        Some(violation) => {
            let trace = sim.trace(&exec, None);
            let failure = checker::Failure { violation, labels: labels.clone(), failing_step: None, trace };
            Verdict::Fail(Box::new(failure), stats)
        }
        None => Verdict::Pass(stats),
    })
}

fn fuzz(args: &Args, out: &mut dyn Write) -> Result<i32, Failed> {
    let sim = Simulator::new(load_config(args)?)?;
    let verdict = checker::fuzz(&sim, sim.config().seed, sim.config().episodes)?;
    let code = report(args, &verdict, out)?;
    Ok(code)
}

fn valency(args: &Args, out: &mut dyn Write) -> Result<i32, Failed> {
    let sim = Simulator::new(load_config(args)?)?;
    let graph = match valency::build_graph(&sim, None) {
        Ok(g) => g,
        Err(e @ (ValencyError::DepthCapped(_) | ValencyError::StateCap(_))) => return Err(Failed(EXIT_LIMIT, e.to_string())),
        Err(e) => return Err(Failed(1, e.to_string())),
    };
    let labels = valency::classify(&graph);
    let path = args.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_DOT));
    write_file(&path, &valency::to_dot(&graph, &labels))?;
    let mut doc = valency::summary(&graph, &labels);
    doc["dot_file"] = json!(path.display().to_string());
    emit(out, &doc)?;
    Ok(EXIT_PASS)
}

fn replay(args: &Args, out: &mut dyn Write) -> Result<i32, Failed> {
    let path = args.trace.as_ref().ok_or_else(|| Failed(EXIT_USAGE, "replay needs --trace PATH".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| Failed(EXIT_DATA, format!("{}: {e}", path.display())))?;
    let trace = Trace::parse(&text).map_err(|e| Failed(EXIT_DATA, format!("{}: {e}", path.display())))?;
    let replayed = match simulator::replay_text(&text) {
        Ok(r) => r,
        Err(e) => {
            emit(out, &json!({"result": "diverged", "error": e.to_string()}))?;
            return Ok(EXIT_FAIL);
        }
    };
    let violation = checker::check_labels(&replayed.simulator, &trace.labels(), None)?;
    let mut doc = json!({
        "result": if violation.is_some() { "fail" } else { "pass" },
        "final_hash": replayed.final_hash,
        "header_final_hash": trace.header.final_hash,
        "steps": trace.records.len(),
        "returns": replayed.execution.last().returns_log,
    });
    if let Some(v) = violation {
        doc["property"] = json!(v.property);
        doc["detail"] = json!(v.detail);
    }
    emit(out, &doc)?;
    Ok(EXIT_PASS)
}

fn bound(args: &Args, out: &mut dyn Write) -> Result<i32, Failed> {
    let sim = Simulator::new(load_config(args)?)?;
    let b = static_bound(sim.system().params());
    let verdict = checker::explore(&sim)?;
    let observed = verdict.stats().max_attempt_steps;
    emit(
        out,
        &json!({
            "bound": b,
            "observed_max": observed,
            "certified": verdict.is_pass() && observed <= b.steps,
            "result": verdict.result_name(),
        }),
    )?;
    Ok(verdict.exit_code())
}
