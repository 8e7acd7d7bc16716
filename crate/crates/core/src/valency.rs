//! Execution graphs and valency classification.
//!
//! A state is `v`-potent if some extension decides `v`, univalent if it is
//! potent for exactly one value, and bivalent if it is potent for two. A
//! bivalent state whose successors are all univalent is critical.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::model::{KeyMode, StepError, StepLabel, SystemState, Val};
use crate::programs::Action;
use crate::simulator::{AdversaryKind, Simulator};

#[derive(Debug, Error)]
pub enum ValencyError {
    #[error("graph exceeds the state cap of {0}")]
    StateCap(usize),
    #[error("an execution exceeds the depth limit {0}; refusing to classify an incomplete graph")]
    DepthCapped(usize),
    #[error("step {label} failed: {source}")]
    Step { label: StepLabel, source: StepError },
}

#[derive(Clone, Debug)]
pub struct GraphNode {
    pub state: SystemState,
    pub edges: Vec<(StepLabel, usize)>,
}

/// The reachable state graph of one configuration.
#[derive(Clone, Debug)]
pub struct ExecGraph {
    pub nodes: Vec<GraphNode>,
    /// Classified outside the restricted failure pattern the definitions assume.
    pub extended_model: bool,
    /// Whether the run has exactly two distinct proposals, the setting of "bivalent".
    two_valued: bool,
}

impl ExecGraph {
    pub const ROOT: usize = 0;

    pub fn edge_count(&self) -> usize {
        self.nodes.iter().map(|n| n.edges.len()).sum()
    }

    /// The node reached from the root by following `labels`.
    pub fn follow(&self, labels: &[StepLabel]) -> Option<usize> {
        let mut at = Self::ROOT;
        for label in labels {
            at = self.nodes[at].edges.iter().find(|(l, _)| l == label)?.1;
        }
        Some(at)
    }

    pub fn successor(&self, node: usize, label: StepLabel) -> Option<usize> {
        self.nodes[node].edges.iter().find(|(l, _)| *l == label).map(|e| e.1)
    }

    pub fn terminals(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].edges.is_empty())
    }
}

/// Enumerates every state reachable under the configured adversary.
pub fn build_graph(sim: &Simulator, cap: Option<usize>) -> Result<ExecGraph, ValencyError> {
    let cfg = sim.config();
    let key = KeyMode::Memo { ignore_attempt: cfg.hash_ignores_attempt, per_process: false };
    let limit = cfg.depth_limit();
    let root = sim.system().initial_state();
    let mut index: HashMap<Box<[u8]>, usize> = HashMap::from([(root.key(key).into_boxed_slice(), 0)]);
    let mut nodes = vec![GraphNode { state: root, edges: Vec::new() }];
    let mut depth = vec![0usize];
    let mut next = 0;
    while next < nodes.len() {
        if depth[next] > limit {
            return Err(ValencyError::DepthCapped(limit));
        }
        let state = nodes[next].state.clone();
        let mut edges = Vec::new();
        for label in sim.choices(&state) {
            let (child, _) = sim.system().apply_step(&state, label).map_err(|source| ValencyError::Step { label, source })?;
            let id = *index.entry(child.key(key).into_boxed_slice()).or_insert_with(|| {
                nodes.push(GraphNode { state: child, edges: Vec::new() });
                depth.push(depth[next] + 1);
                nodes.len() - 1
            });
            edges.push((label, id));
            if let Some(cap) = cap.or(cfg.state_cap) {
                if nodes.len() > cap {
                    return Err(ValencyError::StateCap(cap));
                }
            }
        }
        nodes[next].edges = edges;
        next += 1;
    }
    let distinct: BTreeSet<Val> = sim.system().proposals().iter().copied().collect();
    Ok(ExecGraph {
        nodes,
        extended_model: cfg.adversary != AdversaryKind::Assumption1,
        two_valued: sim.system().n() == 2 && distinct.len() == 2,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValencyClass {
    Univalent(Val),
    Bivalent,
    /// Two or more potent values outside the two-process, two-proposal setting.
    Multivalent,
    /// No extension decides anything.
    Undecided,
}

impl ValencyClass {
    pub fn is_univalent(self) -> bool {
        matches!(self, ValencyClass::Univalent(_))
    }

    pub fn is_multi(self) -> bool {
        matches!(self, ValencyClass::Bivalent | ValencyClass::Multivalent)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValencyLabel {
    pub potent: BTreeSet<Val>,
    pub class: ValencyClass,
    pub terminal: bool,
}

/// Potent sets by backward propagation from the terminals.
pub fn classify(g: &ExecGraph) -> Vec<ValencyLabel> {
    let mut mask: Vec<Option<u32>> = vec![None; g.nodes.len()];
    // Iterative post-order; the graph is acyclic.
    let mut stack = vec![(ExecGraph::ROOT, 0usize)];
    while let Some(&mut (node, ref mut i)) = stack.last_mut() {
        let edges = &g.nodes[node].edges;
        if let Some(&(_, child)) = edges.get(*i) {
            *i += 1;
            if mask[child].is_none() {
                stack.push((child, 0));
            }
            continue;
        }
        let own = if edges.is_empty() { g.nodes[node].state.decided_mask() } else { 0 };
        mask[node] = Some(edges.iter().fold(own, |m, &(_, c)| m | mask[c].expect("child finished first")));
        stack.pop();
    }
    mask.into_iter()
        .enumerate()
        .map(|(i, m)| {
            let potent: BTreeSet<Val> = Val::from_mask(m.unwrap_or(0)).collect();
            let class = match potent.len() {
                0 => ValencyClass::Undecided,
                1 => ValencyClass::Univalent(*potent.first().unwrap()),
                _ if g.two_valued => ValencyClass::Bivalent,
                _ => ValencyClass::Multivalent,
            };
            ValencyLabel { potent, class, terminal: g.nodes[i].edges.is_empty() }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Critical {
    pub node: usize,
    pub successors: Vec<(String, ValencyClass)>,
}

/// Multivalent states all of whose successors are univalent.
pub fn find_critical(g: &ExecGraph, labels: &[ValencyLabel]) -> Vec<Critical> {
    (0..g.nodes.len())
        .filter(|&i| labels[i].class.is_multi() && !g.nodes[i].edges.is_empty())
        .filter(|&i| g.nodes[i].edges.iter().all(|&(_, c)| labels[c].class.is_univalent()))
        .map(|i| Critical {
            node: i,
            successors: g.nodes[i].edges.iter().map(|&(l, c)| (l.to_string(), labels[c].class)).collect(),
        })
        .collect()
}

/// Crash steps that move a multivalent state to a univalent one.
pub fn crash_decision_edges(g: &ExecGraph, labels: &[ValencyLabel]) -> Vec<(usize, StepLabel, usize)> {
    let mut out = Vec::new();
    for (i, node) in g.nodes.iter().enumerate() {
        if !labels[i].class.is_multi() {
            continue;
        }
        for &(label, c) in &node.edges {
            if label.is_crash() && labels[c].class.is_univalent() {
                out.push((i, label, c));
            }
        }
    }
    out
}

/// Object name of the access the process would perform next, if any.
pub fn next_object(sim: &Simulator, s: &SystemState, label: StepLabel) -> Option<String> {
    let StepLabel::Ordinary(pid) = label else { return None };
    let frame = s.frame(pid);
    let ctx = crate::programs::Ctx { pid, proposal: frame.proposal };
    match sim.system().program().action(ctx, &frame.local).ok()? {
        Action::Access(a) => Some(sim.system().layout().id(a.object).0.clone()),
        Action::Return { .. } => None,
    }
}

pub fn summary(g: &ExecGraph, labels: &[ValencyLabel]) -> serde_json::Value {
    let count = |c: fn(&ValencyClass) -> bool| labels.iter().filter(|l| c(&l.class)).count();
    let critical: Vec<_> = find_critical(g, labels)
        .into_iter()
        .map(|c| {
            json!({
                "node": c.node,
                "state_hash": g.nodes[c.node].state.hash().to_string(),
                "successors": c.successors.iter().map(|(l, cl)| json!({"label": l, "class": cl})).collect::<Vec<_>>(),
            })
        })
        .collect();
    let crashes: Vec<_> = crash_decision_edges(g, labels)
        .into_iter()
        .map(|(from, label, to)| json!({"from": from, "label": label.to_string(), "to": to, "class": labels[to].class}))
        .collect();
    json!({
        "nodes": g.nodes.len(),
        "edges": g.edge_count(),
        "bivalent_count": count(|c| *c == ValencyClass::Bivalent),
        "multivalent_count": count(|c| *c == ValencyClass::Multivalent),
        "critical_states": critical,
        "crash_decision_edges": crashes,
        "extended_model": g.extended_model,
        "root": labels[ExecGraph::ROOT].class,
    })
}

fn color(class: ValencyClass) -> String {
    const PALETTE: [&str; 6] = ["lightblue", "palegreen", "khaki", "plum", "lightsalmon", "lightcyan"];
    match class {
        ValencyClass::Univalent(Val::Sym(i)) => PALETTE[i as usize % PALETTE.len()].to_string(),
        ValencyClass::Univalent(Val::Bottom) | ValencyClass::Undecided => "white".to_string(),
        ValencyClass::Bivalent => "tomato".to_string(),
        ValencyClass::Multivalent => "orange".to_string(),
    }
}

/// DOT rendering with nodes filled by class.
pub fn to_dot(g: &ExecGraph, labels: &[ValencyLabel]) -> String {
    let mut out = String::from("digraph valency {\n  node [shape=box, style=filled, fontname=monospace];\n");
    for (i, node) in g.nodes.iter().enumerate() {
        let class = match labels[i].class {
            ValencyClass::Univalent(v) => format!("{v}-valent"),
            ValencyClass::Bivalent => "bivalent".into(),
            ValencyClass::Multivalent => "multivalent".into(),
            ValencyClass::Undecided => "undecided".into(),
        };
        let procs: Vec<String> = node
            .state
            .frames
            .iter()
            .enumerate()
            .map(|(p, f)| format!("p{}:{}", p + 1, f.local.describe()))
            .collect();
        let _ = writeln!(
            out,
            "  n{i} [label=\"#{i} {class}\\n{}\\nfailures={}\", fillcolor={}];",
            procs.join("\\n"),
            node.state.failures,
            color(labels[i].class)
        );
    }
    for (i, node) in g.nodes.iter().enumerate() {
        for (label, c) in &node.edges {
            let style = if label.is_crash() { ", style=dashed" } else { "" };
            let _ = writeln!(out, "  n{i} -> n{c} [label=\"{label}\"{style}];");
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FailureKind, Pid};
    use crate::programs::ProgramId;
    use crate::simulator::ExperimentConfig;

    fn val(c: char) -> Val {
        Val::sym(c).unwrap()
    }

    fn graph(program: ProgramId, proposals: &[char], edit: impl FnOnce(&mut ExperimentConfig)) -> (Simulator, ExecGraph) {
        let mut cfg = ExperimentConfig::new(program, proposals.iter().map(|&c| val(c)).collect());
        edit(&mut cfg);
        let sim = Simulator::new(cfg).unwrap();
        let g = build_graph(&sim, None).unwrap();
        (sim, g)
    }

    #[test]
    fn cas_rc_single_process_is_a_line() {
        let (_, g) = graph(ProgramId::CasRc, &['a'], |_| {});
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(g.terminals().count(), 1);
        let labels = classify(&g);
        assert!(labels.iter().all(|l| l.class == ValencyClass::Univalent(val('a'))));
    }

    #[test]
    fn single_proposal_has_no_bivalent_states() {
        let (_, g) = graph(ProgramId::Fig3, &['a', 'a'], |_| {});
        let labels = classify(&g);
        assert!(labels.iter().all(|l| !l.class.is_multi()));
        assert!(find_critical(&g, &labels).is_empty());
    }

    #[test]
    fn fig3_crash_free_terminals_decide_a_or_b() {
        let (_, g) = graph(ProgramId::Fig3, &['a', 'b'], |_| {});
        let labels = classify(&g);
        assert_eq!(labels[ExecGraph::ROOT].class, ValencyClass::Bivalent);
        let decided: BTreeSet<Val> = g.terminals().flat_map(|t| g.nodes[t].state.decided()).collect();
        assert_eq!(decided, BTreeSet::from([val('a'), val('b')]));
    }

    #[test]
    fn potency_shrinks_along_edges() {
        let (_, g) = graph(ProgramId::Fig1, &['a', 'b'], |c| {
            c.failure_model = FailureKind::Simultaneous;
            c.budget = 1;
        });
        let labels = classify(&g);
        for (i, node) in g.nodes.iter().enumerate() {
            for &(_, c) in &node.edges {
                assert!(labels[i].potent.is_superset(&labels[c].potent));
            }
        }
    }

    #[test]
    fn depth_capped_graphs_are_refused() {
        let mut cfg = ExperimentConfig::new(ProgramId::Fig3, vec![val('a'), val('b')]);
        cfg.depth_limit = Some(3);
        let sim = Simulator::new(cfg).unwrap();
        assert!(matches!(build_graph(&sim, None), Err(ValencyError::DepthCapped(3))));
        let cfg = ExperimentConfig::new(ProgramId::Fig3, vec![val('a'), val('b')]);
        let sim = Simulator::new(cfg).unwrap();
        assert!(matches!(build_graph(&sim, Some(5)), Err(ValencyError::StateCap(5))));
    }

    #[test]
    fn dot_mentions_every_node() {
        let (_, g) = graph(ProgramId::CasRc, &['a', 'b'], |_| {});
        let labels = classify(&g);
        let dot = to_dot(&g, &labels);
        assert!(dot.starts_with("digraph"));
        assert_eq!(dot.matches(" [label=\"#").count(), g.nodes.len());
        let p1 = StepLabel::Ordinary(Pid::new(1, 2).unwrap());
        assert!(g.successor(ExecGraph::ROOT, p1).is_some());
    }
}
