//! Property-based invariants of the simulator, traces and valency graphs.

mod common;

use proptest::prelude::*;
use rc_lab::model::{Status, StepLabel};
use rc_lab::simulator::{self, Execution, Simulator};
use rc_lab::valency;
use serde_json::json;

fn pool() -> Vec<serde_json::Value> {
    vec![
        json!({"program": "fig1", "n": 2, "proposals": ["a", "b"], "failure-model": "simultaneous", "budget": 2}),
        json!({"program": "fig1", "n": 2, "proposals": ["b", "a"], "failure-model": "simultaneous", "budget": 2,
               "cons": "tas", "return-mode": "halt-after-return"}),
        json!({"program": "fig1", "n": 2, "proposals": ["a", "b"], "failure-model": "independent", "budget": 2}),
        json!({"program": "fig2", "n": 2, "proposals": ["a", "b"], "failure-model": "independent", "budget": 1, "cons": "tas"}),
        json!({"program": "fig2", "n": 3, "proposals": ["a", "b", "c"], "failure-model": "independent", "budget": 1,
               "scan-order": "desc"}),
        json!({"program": "fig2", "n": 2, "proposals": ["a", "b"], "failure-model": "independent", "f": 1, "budget": 3}),
        json!({"program": "fig3", "n": 2, "proposals": ["a", "b"], "failure-model": "independent", "budget": 3}),
        json!({"program": "cas-rc", "n": 3, "proposals": ["a", "b", "c"], "failure-model": "simultaneous", "budget": 2}),
        json!({"program": "tas-cons2", "n": 2, "proposals": ["a", "b"], "failure-model": "independent", "budget": 2}),
        json!({"program": "tas-cons2", "n": 2, "proposals": ["a", "b"], "failure-model": "independent", "budget": 3,
               "adversary": "assumption1"}),
    ]
}

fn simulator(i: usize) -> Simulator {
    let pool = pool();
    common::sim(pool[i % pool.len()].clone())
}

/// Drives the simulator with `picks`, each taken modulo the number of choices.
fn drive(sim: &Simulator, picks: &[usize]) -> Execution {
    let mut exec = sim.start();
    for &p in picks {
        let choices = sim.choices(exec.last());
        if choices.is_empty() {
            break;
        }
        sim.push(&mut exec, choices[p % choices.len()]).unwrap();
    }
    exec
}

fn hashes(exec: &Execution) -> Vec<String> {
    exec.states.iter().map(|s| s.hash().to_string()).collect()
}

fn run() -> impl Strategy<Value = (usize, Vec<usize>)> {
    (0..pool().len(), prop::collection::vec(0usize..64, 0..120))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn execution_is_a_function_of_config_and_schedule((i, picks) in run()) {
        let (a, b) = (simulator(i), simulator(i));
        let ea = drive(&a, &picks);
        let eb = b.run(&ea.labels()).unwrap();
        prop_assert_eq!(hashes(&ea), hashes(&eb));
        prop_assert_eq!(a.trace(&ea, None).to_jsonl(), b.trace(&eb, None).to_jsonl());
    }

    #[test]
    fn trace_round_trip_reproduces_every_hash((i, picks) in run()) {
        let sim = simulator(i);
        let exec = drive(&sim, &picks);
        let text = sim.trace(&exec, None).to_jsonl();
        let replayed = simulator::replay_text(&text).unwrap();
        prop_assert_eq!(hashes(&exec), hashes(&replayed.execution));
        prop_assert_eq!(replayed.simulator.trace(&replayed.execution, None).to_jsonl(), text);
    }

    #[test]
    fn crashes_only_touch_the_crashed_frames((i, picks) in run()) {
        let sim = simulator(i);
        let exec = drive(&sim, &picks);
        for (k, effect) in exec.effects.iter().enumerate() {
            let (before, after) = (&exec.states[k], &exec.states[k + 1]);
            let hit = |p: usize| match effect.record.label {
                StepLabel::Crash(q) => q.index() == p,
                StepLabel::CrashAll => before.frames[p].crashable(),
                StepLabel::Ordinary(_) => false,
            };
            if effect.record.label.is_crash() {
                prop_assert_eq!(&before.objects, &after.objects);
                prop_assert_eq!(&before.returns_log, &after.returns_log);
                prop_assert_eq!(after.failures, before.failures + 1);
                for p in 0..before.frames.len() {
                    if hit(p) {
                        prop_assert_eq!(after.frames[p].attempt, before.frames[p].attempt + 1);
                        prop_assert_eq!(after.frames[p].steps, 0);
                        prop_assert_eq!(after.frames[p].status, Status::Running);
                    } else {
                        prop_assert_eq!(&after.frames[p], &before.frames[p]);
                    }
                }
            } else {
                let stepper = effect.record.label.pid().unwrap().index();
                for p in (0..before.frames.len()).filter(|&p| p != stepper) {
                    prop_assert_eq!(&after.frames[p], &before.frames[p]);
                }
                prop_assert_eq!(after.failures, before.failures);
            }
        }
    }

    #[test]
    fn proposals_never_change((i, picks) in run()) {
        let sim = simulator(i);
        let exec = drive(&sim, &picks);
        for s in &exec.states {
            let now: Vec<_> = s.frames.iter().map(|f| f.proposal).collect();
            prop_assert_eq!(now.as_slice(), sim.system().proposals());
        }
    }

    #[test]
    fn failures_stay_within_budget((i, picks) in run()) {
        let sim = simulator(i);
        let exec = drive(&sim, &picks);
        let budget = sim.system().failure().budget;
        prop_assert!(exec.states.iter().all(|s| s.failures <= budget));
        prop_assert!(exec.states.iter().all(|s| s.frames.iter().all(|f| f.steps <= sim.system().bound().steps)));
    }

    #[test]
    fn prefixes_of_executions_are_executions((i, picks) in run(), cut in 0usize..200) {
        let sim = simulator(i);
        let exec = drive(&sim, &picks);
        let labels = exec.labels();
        let cut = cut % (labels.len() + 1);
        let prefix = sim.run(&labels[..cut]).unwrap();
        prop_assert_eq!(hashes(&prefix), hashes(&exec)[..=cut].to_vec());
    }

    #[test]
    fn assumption1_allows_at_most_one_step_per_process(picks in prop::collection::vec(0usize..64, 0..60)) {
        let sim = simulator(9);
        let mut exec = sim.start();
        for p in picks {
            let choices = sim.choices(exec.last());
            for pid in 1..=2 {
                prop_assert!(choices.iter().filter(|l| l.pid().map(|q| q.get()) == Some(pid)).count() <= 1);
            }
            if choices.is_empty() {
                break;
            }
            sim.push(&mut exec, choices[p % choices.len()]).unwrap();
        }
    }
}

fn small_graph(i: usize) -> (Simulator, valency::ExecGraph) {
    let docs = [
        json!({"program": "fig3", "n": 2, "proposals": ["a", "b"], "failure-model": "independent", "budget": 2}),
        json!({"program": "tas-cons2", "n": 2, "proposals": ["a", "b"]}),
        json!({"program": "fig1", "n": 2, "proposals": ["a", "b"], "failure-model": "simultaneous", "budget": 1}),
        json!({"program": "cas-rc", "n": 3, "proposals": ["a", "b", "a"], "failure-model": "independent", "budget": 1}),
        json!({"program": "fig1", "n": 2, "proposals": ["a", "b"], "failure-model": "independent", "budget": 1}),
    ];
    let sim = common::sim(docs[i % docs.len()].clone());
    let g = valency::build_graph(&sim, None).unwrap();
    (sim, g)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn potency_only_narrows_along_edges(i in 0usize..5) {
        let (_, g) = small_graph(i);
        let labels = valency::classify(&g);
        for (s, node) in g.nodes.iter().enumerate() {
            for &(_, t) in &node.edges {
                prop_assert!(labels[t].potent.is_subset(&labels[s].potent));
            }
            if node.edges.is_empty() {
                prop_assert_eq!(&labels[s].potent, &node.state.decided());
            }
        }
    }

    #[test]
    fn classification_ignores_edge_order(i in 0usize..5, seed in any::<u64>()) {
        let (_, g) = small_graph(i);
        let before = valency::classify(&g);
        let mut shuffled = g.clone();
        let mut x = seed | 1;
        for node in &mut shuffled.nodes {
            // xorshift permutation of each adjacency list
            for k in (1..node.edges.len()).rev() {
                x ^= x << 13;
                x ^= x >> 7;
                x ^= x << 17;
                node.edges.swap(k, (x % (k as u64 + 1)) as usize);
            }
        }
        prop_assert_eq!(valency::classify(&shuffled), before);
    }
}

#[test]
fn graph_nodes_are_distinct_states() {
    let (_, g) = small_graph(2);
    let keys: std::collections::HashSet<Vec<u8>> = g
        .nodes
        .iter()
        .map(|n| n.state.key(rc_lab::model::KeyMode::Memo { ignore_attempt: false, per_process: false }))
        .collect();
    assert_eq!(keys.len(), g.nodes.len());
}
