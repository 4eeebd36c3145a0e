//! DOT and JSON renderings of a transition system.

use std::fmt::{self, Write};

use serde::Serialize;

use crate::model::EquivConfig;
use crate::semantics::{filter_label, LabelEntry, Lts};

#[derive(Serialize)]
struct JsonTransition<'a> {
    src: usize,
    action: &'a str,
    entries: &'a [LabelEntry],
    dst: usize,
}

#[derive(Serialize)]
struct JsonLts<'a, V> {
    species: &'a [String],
    states: Vec<&'a [V]>,
    initial: usize,
    transitions: Vec<JsonTransition<'a>>,
}

pub fn to_json<V: Serialize + Clone + Ord>(lts: &Lts<V>) -> String {
    let doc = JsonLts {
        species: &lts.species,
        states: lts.states.iter().map(|s| s.0.as_slice()).collect(),
        initial: lts.initial,
        transitions: lts
            .transitions()
            .iter()
            .map(|t| JsonTransition {
                src: t.src,
                action: &t.label.action,
                entries: t.label.entries(),
                dst: t.dst,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("transition system serialises")
}

/// Nodes are labelled with level vectors. With a configuration, edges also
/// show the entries kept by label filtering.
pub fn to_dot<V: fmt::Display + Clone + Ord>(lts: &Lts<V>, cfg: Option<&EquivConfig>) -> String {
    let mut out = String::from("digraph lts {\n  rankdir=LR;\n");
    let _ = writeln!(out, "  // coordinates: {}", lts.species.join(", "));
    for (i, s) in lts.states.iter().enumerate() {
        let shape = if i == lts.initial {
            ", shape=doublecircle"
        } else {
            ""
        };
        let _ = writeln!(out, "  s{i} [label=\"{s}\"{shape}];");
    }
    for t in lts.transitions() {
        let label = match cfg {
            Some(cfg) => {
                let kept = filter_label(&t.label, cfg);
                if kept.entries().is_empty() {
                    kept.action.clone()
                } else {
                    let entries: Vec<String> =
                        kept.entries().iter().map(ToString::to_string).collect();
                    format!("{}; {}", kept.action, entries.join(", "))
                }
            }
            None => t.label.action.clone(),
        };
        let _ = writeln!(
            out,
            "  s{} -> s{} [label=\"{}\"];",
            t.src,
            t.dst,
            label.replace('"', "\\\"")
        );
    }
    out.push_str("}\n");
    out
}
