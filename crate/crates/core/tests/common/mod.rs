//! Shared helpers for the integration suites: config construction, a
//! directed-schedule builder and the corpus of appendix case witnesses.

#![allow(dead_code)]

use std::path::PathBuf;

use rc_lab::config::ExperimentConfig;
use rc_lab::model::{OpRecord, Pid, StepLabel, Val};
use rc_lab::simulator::{Execution, Simulator};

pub fn cfg(json: serde_json::Value) -> ExperimentConfig {
    ExperimentConfig::from_document(json, &[]).expect("test config is valid")
}

pub fn sim(json: serde_json::Value) -> Simulator {
    Simulator::new(cfg(json)).expect("test config builds")
}

pub fn pid(i: usize) -> Pid {
    Pid::new(i, Pid::MAX_PROCESSES).unwrap()
}

pub fn val(s: &str) -> Val {
    s.parse().unwrap()
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

/// Set to regenerate golden files instead of comparing against them.
pub fn blessing() -> bool {
    std::env::var_os("RC_LAB_BLESS").is_some()
}

/// Builds a schedule by driving one process at a time.
pub struct Sched<'a> {
    sim: &'a Simulator,
    exec: Execution,
}

impl<'a> Sched<'a> {
    pub fn new(sim: &'a Simulator) -> Sched<'a> {
        Sched { sim, exec: sim.start() }
    }

    fn push(&mut self, label: StepLabel) {
        self.sim
            .push(&mut self.exec, label)
            .unwrap_or_else(|e| panic!("step {label} after {:?}: {e}", self.exec.labels()));
    }

    pub fn step(mut self, p: usize, times: usize) -> Self {
        for _ in 0..times {
            self.push(StepLabel::Ordinary(pid(p)));
        }
        self
    }

    /// Steps `p` until it has executed a step at `line`.
    pub fn through(mut self, p: usize, line: &str) -> Self {
        for _ in 0..200 {
            self.push(StepLabel::Ordinary(pid(p)));
            if let OpRecord::Op(op) = &self.exec.effects.last().unwrap().record.op {
                if op.line == line {
                    return self;
                }
            }
        }
        panic!("p{p} never reached {line}");
    }

    /// Steps `p` until it stops running.
    pub fn finish(mut self, p: usize) -> Self {
        while self.exec.last().frame(pid(p)).status == rc_lab::model::Status::Running {
            self.push(StepLabel::Ordinary(pid(p)));
        }
        self
    }

    pub fn crash(mut self, p: usize) -> Self {
        self.push(StepLabel::Crash(pid(p)));
        self
    }

    pub fn crash_all(mut self) -> Self {
        self.push(StepLabel::CrashAll);
        self
    }

    pub fn labels(&self) -> Vec<StepLabel> {
        self.exec.labels()
    }
}

/// A returned decision with the line that produced it and, for iterated
/// programs, the iteration the process was in.
#[derive(Clone, Debug)]
pub struct Ret {
    pub pid: Pid,
    pub line: String,
    pub value: Val,
    pub iteration: Option<u32>,
}

pub fn returns(sim: &Simulator, exec: &Execution) -> Vec<Ret> {
    let mut out = Vec::new();
    for (i, effect) in exec.effects.iter().enumerate() {
        let (Some(value), OpRecord::Op(op)) = (effect.returned, &effect.record.op) else { continue };
        let pid = effect.record.label.pid().unwrap();
        let iteration = sim.system().program().iteration(&exec.states[i].frame(pid).local);
        out.push(Ret { pid, line: op.line.clone(), value, iteration });
    }
    out
}

/// `(pid, line)` for every ordinary step.
pub fn lines(exec: &Execution) -> Vec<(Pid, String)> {
    exec.effects
        .iter()
        .filter_map(|e| match &e.record.op {
            OpRecord::Op(op) => Some((e.record.label.pid().unwrap(), op.line.clone())),
            OpRecord::Crash => None,
        })
        .collect()
}

fn executed(exec: &Execution, line: &str) -> Vec<Pid> {
    lines(exec).into_iter().filter(|(_, l)| l == line).map(|(p, _)| p).collect()
}

fn all_equal(rets: &[Ret], expected: Val) -> Result<(), String> {
    match rets.iter().find(|r| r.value != expected) {
        Some(r) => Err(format!("{} returned {} at {}, expected {expected}", r.pid, r.value, r.line)),
        None => Ok(()),
    }
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn complete(exec: &Execution) -> bool {
    exec.last().frames.iter().all(|f| f.status != rc_lab::model::Status::Running)
}

pub type Conclusion = fn(&Simulator, &Execution) -> Result<(), String>;

/// A directed schedule witnessing one case of a correctness argument.
pub struct Case {
    pub name: &'static str,
    pub sim: Simulator,
    pub labels: Vec<StepLabel>,
    pub conclusion: Conclusion,
}

impl Case {
    pub fn golden_path(&self) -> PathBuf {
        golden_dir().join("cases").join(format!("{}.jsonl", self.name))
    }

    pub fn trace_text(&self) -> String {
        let exec = self.sim.run(&self.labels).expect("case schedule runs");
        self.sim.trace(&exec, None).to_jsonl()
    }
}

fn fig1() -> Simulator {
    sim(serde_json::json!({
        "program": "fig1", "n": 2, "proposals": ["a", "b"],
        "failure-model": "simultaneous", "budget": 1
    }))
}

fn fig2() -> Simulator {
    sim(serde_json::json!({
        "program": "fig2", "n": 2, "proposals": ["a", "b"],
        "failure-model": "independent", "budget": 1
    }))
}

/// fig1 with `x:wD` completed: every return equals the proposal of the
/// first process to complete `x:C`, and another process returned at `line`.
fn agr1(sim: &Simulator, exec: &Execution, line: &str) -> Result<(), String> {
    let winner = *executed(exec, "x:C").first().ok_or("nobody completed x:C")?;
    ensure(!executed(exec, "x:wD").is_empty(), "x:wD never completed")?;
    let rets = returns(sim, exec);
    ensure(rets.iter().any(|r| r.pid != winner && r.line == line), format!("the loser never returned at {line}"))?;
    all_equal(&rets, sim.system().proposals()[winner.index()])
}

/// fig1 where some process returns at `line` after a simultaneous crash:
/// the execution runs to completion without anyone completing `x:wD`.
fn agr1_excluded(sim: &Simulator, exec: &Execution, line: &str) -> Result<(), String> {
    let rets = returns(sim, exec);
    let r = rets.iter().find(|r| r.line == line).ok_or(format!("nobody returned at {line}"))?;
    ensure(complete(exec), "execution is not complete")?;
    ensure(executed(exec, "x:wD").is_empty(), "x:wD completed after all")?;
    ensure(exec.last().failures > 0, "no failure occurred")?;
    all_equal(&rets, r.value)
}

fn agr2_common(exec: &Execution) -> Result<(), String> {
    ensure(executed(exec, "x:wD").is_empty(), "x:wD completed")
}

pub fn cases() -> Vec<Case> {
    let f1 = fig1;
    let f2 = fig2;
    let mut out = Vec::new();
    let mut add = |name, sim: Simulator, build: &dyn Fn(Sched) -> Sched, conclusion: Conclusion| {
        let labels = build(Sched::new(&sim)).labels();
        out.push(Case { name, sim, labels, conclusion });
    };

    add("agr1-case1", f1(), &|s| s.step(1, 2).step(2, 2).step(1, 2).finish(2).finish(1), |sim, exec| {
        agr1(sim, exec, "x:retd")
    });
    add("agr1-case2", f1(), &|s| s.finish(1).finish(2), |sim, exec| agr1(sim, exec, "x:recDret"));
    add("agr1-case3", f1(), &|s| s.step(1, 3).crash_all().finish(1).finish(2), |sim, exec| {
        agr1_excluded(sim, exec, "x:inbotObotret")
    });
    add("agr1-case4", f1(), &|s| s.step(1, 4).finish(2).finish(1), |sim, exec| agr1(sim, exec, "x:ibotOnbotret"));
    add(
        "agr1-case5",
        f1(),
        &|s| s.step(1, 2).step(2, 2).step(1, 1).step(2, 1).step(1, 1).crash_all().finish(1).finish(2),
        |sim, exec| {
            ensure(!executed(exec, "x:C").is_empty(), "nobody reached x:C")?;
            agr1_excluded(sim, exec, "x:inbotOnbotret")
        },
    );

    add("agr2-case1", f1(), &|s| s.step(1, 2).step(2, 2).crash_all().step(1, 2).step(2, 2), |sim, exec| {
        agr2_common(exec)?;
        ensure(executed(exec, "x:wP").is_empty(), "someone completed x:wP")?;
        ensure(exec.last().objects[..2] == sim.system().initial_state().objects[..2], "P changed")?;
        ensure(returns(sim, exec).is_empty(), "a process returned")
    });
    add("agr2-case2", f1(), &|s| s.step(1, 3).finish(2).crash_all().finish(1).finish(2), |sim, exec| {
        agr2_common(exec)?;
        let writers = executed(exec, "x:wP");
        ensure(writers.len() == 1, "expected exactly one x:wP")?;
        let rets = returns(sim, exec);
        ensure(rets.len() >= 2, "expected several returns")?;
        ensure(
            rets.iter().all(|r| r.line == "x:inbotObotret" || r.line == "x:ibotOnbotret"),
            "return at an unexpected line",
        )?;
        all_equal(&rets, sim.system().proposals()[writers[0].index()])
    });
    add(
        "agr2-case3",
        f1(),
        &|s| s.step(1, 2).step(2, 2).step(1, 1).step(2, 1).crash_all().finish(1).finish(2),
        |sim, exec| {
            agr2_common(exec)?;
            ensure(executed(exec, "x:wP").len() == 2, "expected both x:wP")?;
            let rets = returns(sim, exec);
            ensure(rets.len() == 2 && rets.iter().all(|r| r.line == "x:inbotOnbotret"), "expected two x:inbotOnbotret")?;
            all_equal(&rets, rets[0].value)
        },
    );

    add("fig2-agreement-caseA", f2(), &|s| s.finish(1).finish(2), |sim, exec| {
        let rets = returns(sim, exec);
        ensure(rets.len() == 2 && rets[0].pid != rets[1].pid, "expected one return per process")?;
        ensure(rets[0].iteration == rets[1].iteration, "returns in different iterations")?;
        all_equal(&rets, rets[0].value)
    });
    add("fig2-agreement-caseB", f2(), &|s| s.finish(1).through(2, "xn:inc").crash(2).finish(2), |sim, exec| {
        let rets = returns(sim, exec);
        ensure(rets.len() == 2 && rets[0].pid != rets[1].pid, "expected one return per process")?;
        ensure(rets[0].iteration != rets[1].iteration, "returns in the same iteration")?;
        all_equal(&rets, rets[0].value)
    });
    add("fig2-waitfree-case1", f2(), &|s| s.through(2, "xn:inc").crash(2).finish(2).finish(1), |sim, exec| {
        first_entry_into_iteration_one(sim, exec, pid(2))?;
        ensure(returns(sim, exec).len() == 2, "someone did not return")
    });
    add(
        "fig2-waitfree-case2",
        f2(),
        &|s| s.through(1, "xn:wD").through(2, "xn:inc").crash(2).through(2, "xn:inc").finish(1).finish(2),
        |sim, exec| {
            first_entry_into_iteration_one(sim, exec, pid(2))?;
            let rets = returns(sim, exec);
            let p1 = rets.iter().find(|r| r.pid == pid(1)).ok_or("p1 never returned")?;
            ensure(p1.iteration == Some(1), "p1 did not bypass its return in iteration 0")?;
            all_equal(&rets, p1.value)
        },
    );
    out
}

/// Finds the first process to start iteration 1 at `xn:if` and checks that
/// it is `expected`, that it crashed after `xn:inc` in iteration 0, and
/// that a failure had occurred by then.
fn first_entry_into_iteration_one(sim: &Simulator, exec: &Execution, expected: Pid) -> Result<Pid, String> {
    let program = sim.system().program();
    for (i, effect) in exec.effects.iter().enumerate() {
        let OpRecord::Op(op) = &effect.record.op else { continue };
        let p = effect.record.label.pid().unwrap();
        if op.line == "xn:if" && program.iteration(&exec.states[i].frame(p).local) == Some(1) {
            ensure(p == expected, format!("{p} entered iteration 1 first"))?;
            ensure(exec.states[i].failures >= 1, "iteration 1 reached without a failure")?;
            let own = exec.effects[..i].iter().rev().filter(|e| e.record.label.pid() == Some(p));
            let crashed_after_inc = own.skip_while(|e| e.record.label != StepLabel::Crash(p)).nth(1);
            let inc = matches!(crashed_after_inc.map(|e| &e.record.op), Some(OpRecord::Op(o)) if o.line == "xn:inc");
            ensure(inc, format!("{p} did not crash right after xn:inc"))?;
            return Ok(p);
        }
    }
    Err("nobody reached iteration 1".into())
}

pub fn ordinary(p: usize) -> StepLabel {
    StepLabel::Ordinary(pid(p))
}

pub fn crash(p: usize) -> StepLabel {
    StepLabel::Crash(pid(p))
}

/// Machine check of the CAS example's valency narrative in a graph with
/// `budget` independent crashes: each claim is checked as an exact class.
pub fn fig3_claims(budget: u32) -> Result<(), String> {
    use rc_lab::valency::{self, ValencyClass::*};
    let sim = sim(serde_json::json!({
        "program": "fig3", "n": 2, "proposals": ["a", "b"],
        "failure-model": "independent", "budget": budget
    }));
    let g = valency::build_graph(&sim, None).map_err(|e| e.to_string())?;
    let labels = valency::classify(&g);
    let a = val("a");
    // s: each process is about to write its announcement register.
    let s_path = [ordinary(1), ordinary(1), ordinary(2), ordinary(2)];
    let s = g.follow(&s_path).ok_or("s is not in the graph")?;
    for p in 1..=2 {
        ensure(
            valency::next_object(&sim, &g.nodes[s].state, ordinary(p)).as_deref() == Some(&format!("P[{p}]")),
            format!("p{p} is not poised to write P[{p}] in s"),
        )?;
    }
    let class = |node: usize| labels[node].class;
    let after = |node: usize, label: StepLabel| g.successor(node, label).ok_or(format!("no {label} edge"));
    ensure(class(s) == Bivalent, format!("s is {:?}", class(s)))?;
    let s1 = after(s, ordinary(1))?;
    ensure(class(s1) == Bivalent, format!("s' is {:?}", class(s1)))?;
    let cas = after(s1, ordinary(1))?;
    ensure(
        valency::next_object(&sim, &g.nodes[s1].state, ordinary(1)).as_deref() == Some("C"),
        "p1 is not poised to CAS in s'",
    )?;
    ensure(class(cas) == Univalent(a), format!("CAS successor of s' is {:?}", class(cas)))?;
    let c2 = after(s1, crash(2))?;
    ensure(class(c2) == Univalent(a), format!("Crash(p2) successor of s' is {:?}", class(c2)))?;
    let c1 = after(s1, crash(1))?;
    ensure(class(c1) == Bivalent, format!("Crash(p1) successor of s' is {:?}", class(c1)))?;
    let w2 = after(s1, ordinary(2))?;
    ensure(class(w2) == Bivalent, format!("p2-write successor of s' is {:?}", class(w2)))?;
    let bivalent_out = g.nodes[s1].edges.iter().filter(|&&(_, c)| class(c) == Bivalent).count();
    ensure(bivalent_out == 2, format!("s' has {bivalent_out} bivalent successors"))?;
    ensure(!valency::find_critical(&g, &labels).iter().any(|c| c.node == s1), "s' is critical")?;
    ensure(
        valency::crash_decision_edges(&g, &labels).iter().any(|&(from, l, to)| from == s1 && l == crash(2) && to == c2),
        "Crash(p2) out of s' is not reported as a decision step",
    )
}

/// In the crash-free TAS construction some critical state has both
/// decision steps poised on the same TAS object.
pub fn tas_critical_on_shared_object() -> Result<(), String> {
    use rc_lab::valency;
    let sim = sim(serde_json::json!({"program": "tas-cons2", "n": 2, "proposals": ["a", "b"]}));
    let g = valency::build_graph(&sim, None).map_err(|e| e.to_string())?;
    let labels = valency::classify(&g);
    let critical = valency::find_critical(&g, &labels);
    ensure(!critical.is_empty(), "no critical state")?;
    let on_t = critical.iter().any(|c| {
        let state = &g.nodes[c.node].state;
        g.nodes[c.node].edges.len() == 2
            && g.nodes[c.node]
                .edges
                .iter()
                .all(|&(l, _)| !l.is_crash() && valency::next_object(&sim, state, l).as_deref() == Some("T"))
    });
    ensure(on_t, "no critical state has both processes poised on T")?;
    let decided: std::collections::BTreeSet<_> =
        critical.iter().flat_map(|c| c.successors.iter().map(|(_, cl)| *cl)).collect();
    ensure(decided.len() == 2, format!("critical successors decide {decided:?}"))
}
