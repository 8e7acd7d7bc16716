//! Depth-first exhaustive search with optional memoization, plus breadth-first
//! counterexample minimization.
//!
//! Every step either consumes failure budget or advances the stepping
//! process's attempt-local step count, so the state graph is acyclic and a
//! state can be marked visited when it is first discovered.

use std::collections::{HashSet, VecDeque};

use super::{CheckError, Checks, Failure, Property, Stats, Verdict, Violation};
use crate::model::{Effect, KeyMode, StepError, StepLabel, SystemState};
use crate::programs::MachineError;
use crate::simulator::Simulator;

#[derive(Clone, Copy, Debug)]
pub struct ExploreOptions {
    pub memoize: bool,
    pub key: KeyMode,
    pub checks: Checks,
    pub depth_limit: usize,
    pub state_cap: Option<usize>,
}

impl ExploreOptions {
    pub fn from_config(sim: &Simulator) -> ExploreOptions {
        let cfg = sim.config();
        ExploreOptions {
            memoize: cfg.memoize,
            key: memo_key(sim, false),
            checks: Checks::from_config(cfg, sim.system()),
            depth_limit: cfg.depth_limit(),
            state_cap: cfg.state_cap,
        }
    }
}

fn memo_key(sim: &Simulator, ignore_attempt: bool) -> KeyMode {
    KeyMode::Memo { ignore_attempt, per_process: sim.config().agreement_scope == super::AgreementScope::CrossProcess }
}

/// Explores every execution allowed by the configuration.
///
/// With `hash-ignores-attempt`, safety is checked on the merged state space
/// and recoverable wait-freedom in a second pass with full hashing.
pub fn explore(sim: &Simulator) -> Result<Verdict, CheckError> {
    let opts = ExploreOptions::from_config(sim);
    if !sim.config().hash_ignores_attempt {
        return explore_with(sim, &opts);
    }
    let safety = ExploreOptions {
        key: memo_key(sim, true),
        checks: Checks { liveness: false, ..opts.checks },
        ..opts
    };
    let first = explore_with(sim, &safety)?;
    let Verdict::Pass(mut stats) = first else {
        return Ok(first);
    };
    let liveness = ExploreOptions { checks: Checks { safety: false, ..opts.checks }, ..opts };
    Ok(match explore_with(sim, &liveness)? {
        Verdict::Pass(second) => {
            stats.absorb(&second);
            Verdict::Pass(stats)
        }
        other => other,
    })
}

enum Step {
    Next(SystemState, Effect),
    Bad(Violation, Option<StepLabel>),
}

fn step(sim: &Simulator, checks: &Checks, s: &SystemState, label: StepLabel, depth: usize) -> Result<Step, CheckError> {
    let sys = sim.system();
    match sys.apply_step(s, label) {
        Ok((next, effect)) => Ok(match checks.edge(sys, s, &effect, &next) {
            Some(v) => Step::Bad(v, None),
            None => Step::Next(next, effect),
        }),
        Err(StepError::Machine(e @ MachineError::ReadBeforeWrite { .. })) => {
            Ok(Step::Bad(Violation { property: Property::ReadBeforeWrite, detail: e.to_string() }, Some(label)))
        }
        Err(source) => Err(CheckError::Harness { depth, label, source }),
    }
}

struct Node {
    state: SystemState,
    via: Option<StepLabel>,
    choices: Vec<StepLabel>,
    next: usize,
}

fn note(stats: &mut Stats, s: &SystemState, depth: usize) {
    stats.states += 1;
    stats.max_failures = stats.max_failures.max(s.failures);
    stats.max_depth = stats.max_depth.max(depth);
    if let Some(m) = s.frames.iter().map(|f| f.steps).max() {
        stats.max_attempt_steps = stats.max_attempt_steps.max(m);
    }
}

pub fn explore_with(sim: &Simulator, opts: &ExploreOptions) -> Result<Verdict, CheckError> {
    let sys = sim.system();
    let mut stats = Stats { bound: sys.bound().steps, ..Stats::default() };
    let mut visited: HashSet<Box<[u8]>> = HashSet::new();
    let root = sys.initial_state();
    if opts.memoize {
        visited.insert(root.key(opts.key).into_boxed_slice());
    }
    note(&mut stats, &root, 0);
    let choices = sim.choices(&root);
    if choices.is_empty() {
        stats.terminals += 1;
    }
    let mut stack = vec![Node { state: root, via: None, choices, next: 0 }];

    while let Some(top) = stack.last_mut() {
        let Some(&label) = top.choices.get(top.next) else {
            stack.pop();
            continue;
        };
        top.next += 1;
        let depth = stack.len();
        stats.edges += 1;
        let (child, _) = match step(sim, &opts.checks, &stack[depth - 1].state, label, depth)? {
            Step::Next(child, effect) => (child, effect),
            Step::Bad(violation, failing) => {
                let mut labels: Vec<StepLabel> = stack.iter().filter_map(|n| n.via).collect();
                if failing.is_none() {
                    labels.push(label);
                }
                let failure = minimize(sim, opts, violation.property)?
                    .unwrap_or_else(|| counterexample(sim, violation, labels, failing));
                return Ok(Verdict::Fail(Box::new(failure), stats));
            }
        };
        if opts.memoize && !visited.insert(child.key(opts.key).into_boxed_slice()) {
            continue;
        }
        note(&mut stats, &child, depth);
        if let Some(cap) = opts.state_cap {
            if stats.states > cap as u64 {
                return Err(CheckError::StateCap(cap));
            }
        }
        if depth > opts.depth_limit {
            return Ok(Verdict::DepthLimit { limit: opts.depth_limit, stats });
        }
        let choices = sim.choices(&child);
        if choices.is_empty() {
            stats.terminals += 1;
            if let Some(violation) = opts.checks.terminal(sys, &child) {
                let mut labels: Vec<StepLabel> = stack.iter().filter_map(|n| n.via).collect();
                labels.push(label);
                return Ok(Verdict::Fail(Box::new(counterexample(sim, violation, labels, None)), stats));
            }
            continue;
        }
        stack.push(Node { state: child, via: Some(label), choices, next: 0 });
    }
    Ok(Verdict::Pass(stats))
}

fn counterexample(sim: &Simulator, violation: Violation, labels: Vec<StepLabel>, failing: Option<StepLabel>) -> Failure {
    let exec = sim.run(&labels).expect("counterexample path was explored");
    let trace = sim.trace(&exec, None);
    Failure { violation, labels, failing_step: failing, trace }
}

/// Breadth-first search for a shortest execution violating `property`.
pub fn minimize(sim: &Simulator, opts: &ExploreOptions, property: Property) -> Result<Option<Failure>, CheckError> {
    let key = match opts.key {
        KeyMode::Full => KeyMode::Memo { ignore_attempt: false, per_process: false },
        k => k,
    };
    let mut parents: Vec<(u32, Option<StepLabel>)> = vec![(0, None)];
    let root = sim.system().initial_state();
    let mut seen: HashSet<Box<[u8]>> = HashSet::from([root.key(key).into_boxed_slice()]);
    let mut frontier = VecDeque::from([(root, 0u32, 0usize)]);
    let path = |parents: &Vec<(u32, Option<StepLabel>)>, mut at: u32| {
        let mut labels = Vec::new();
        while let (p, Some(l)) = parents[at as usize] {
            labels.push(l);
            at = p;
        }
        labels.reverse();
        labels
    };
    while let Some((state, id, depth)) = frontier.pop_front() {
        if depth > opts.depth_limit {
            continue;
        }
        for label in sim.choices(&state) {
            match step(sim, &opts.checks, &state, label, depth)? {
                Step::Bad(violation, failing) if violation.property == property => {
                    let mut labels = path(&parents, id);
                    if failing.is_none() {
                        labels.push(label);
                    }
                    return Ok(Some(counterexample(sim, violation, labels, failing)));
                }
                Step::Bad(..) => {}
                Step::Next(child, _) => {
                    if seen.insert(child.key(key).into_boxed_slice()) {
                        parents.push((id, Some(label)));
                        frontier.push_back((child, parents.len() as u32 - 1, depth + 1));
                    }
                }
            }
        }
    }
    Ok(None)
}
