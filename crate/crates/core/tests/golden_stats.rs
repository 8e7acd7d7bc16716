//! Exploration statistics and merged config documents pinned as golden
//! files. Set `RC_LAB_BLESS=1` to regenerate.

mod common;

use std::collections::BTreeMap;

use rc_lab::checker;
use rc_lab::config::ExperimentConfig;
use rc_lab::valency;
use serde_json::{json, Value};

fn compare(name: &str, actual: &Value) {
    let path = common::golden_dir().join(name);
    let text = serde_json::to_string_pretty(actual).unwrap() + "\n";
    if common::blessing() {
        std::fs::write(&path, &text).unwrap();
    }
    let golden = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(text, golden, "{name} drifted; rerun with RC_LAB_BLESS=1 if intended");
}

/// The fig2 matrix: every (n, f) with both inner consensus choices where
/// they apply, and both scan orders.
pub fn fig2_matrix() -> Vec<(String, Value)> {
    let mut out = Vec::new();
    for (n, f) in [(2usize, 0u32), (2, 1), (2, 2), (3, 1)] {
        for cons in ["atomic", "tas"] {
            if n > 2 && cons == "tas" {
                continue;
            }
            for scan in ["asc", "desc"] {
                let proposals: Vec<String> = (0..n).map(|i| ((b'a' + i as u8) as char).to_string()).collect();
                let doc = json!({"program": "fig2", "n": n, "proposals": proposals, "failure-model": "independent",
                                 "budget": f, "cons": cons, "scan-order": scan});
                out.push((format!("fig2 n={n} f={f} cons={cons} scan={scan}"), doc));
            }
        }
    }
    out
}

#[test]
fn fig2_exploration_stats() {
    let mut table = BTreeMap::new();
    for (name, doc) in fig2_matrix() {
        let v = checker::explore(&common::sim(doc)).unwrap();
        assert!(v.is_pass(), "{name}: {}", v.to_json(None));
        let s = v.stats();
        assert_eq!(s.max_attempt_steps, s.bound, "{name}: the static bound is attained");
        table.insert(name, json!({"states": s.states, "edges": s.edges, "terminals": s.terminals,
                                  "max_attempt_steps": s.max_attempt_steps, "bound": s.bound}));
    }
    compare("fig2-stats.json", &json!(table));
}

#[test]
fn fig1_graph_size() {
    let mut table = BTreeMap::new();
    for cons in ["atomic", "tas"] {
        let sim = common::sim(json!({"program": "fig1", "n": 2, "proposals": ["a", "b"],
                                      "failure-model": "simultaneous", "budget": 1, "cons": cons}));
        let g = valency::build_graph(&sim, None).unwrap();
        let labels = valency::classify(&g);
        let summary = valency::summary(&g, &labels);
        table.insert(cons, json!({"nodes": summary["nodes"], "edges": summary["edges"],
                                  "bivalent_count": summary["bivalent_count"],
                                  "critical_states": summary["critical_states"].as_array().unwrap().len()}));
    }
    compare("fig1-graph.json", &json!(table));
}

#[test]
fn merged_config_document() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/fig2.json")).unwrap();
    let overrides: Vec<String> =
        ["budget=2", "cons=tas", "scan-order=desc", "initial={\"R[2]\": 1}", "seed=11"].map(String::from).to_vec();
    let merged = ExperimentConfig::parse(&text, &overrides).unwrap().to_document();
    // Overrides are pure: the same inputs always give the same document,
    // and re-parsing the document is a fixed point.
    assert_eq!(ExperimentConfig::parse(&text, &overrides).unwrap().to_document(), merged);
    assert_eq!(ExperimentConfig::from_document(merged.clone(), &[]).unwrap().to_document(), merged);
    compare("merged-config.json", &merged);
}
