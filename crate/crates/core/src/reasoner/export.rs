use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::graph::{EdgeKind, Node, ReasoningGraph};
use super::vote::AnswerTally;
use super::Strength;

/// JSON form of a reasoning graph together with the vote tally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub nodes: Vec<Node>,
    pub edges: Vec<super::Edge>,
    pub tally: BTreeMap<String, AnswerTally>,
}

pub fn to_json(graph: &ReasoningGraph, tally: &BTreeMap<String, AnswerTally>) -> serde_json::Value {
    let doc = GraphDocument { nodes: graph.nodes.clone(), edges: graph.edges.clone(), tally: tally.clone() };
    serde_json::to_value(doc).expect("graph document serializes")
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => {}
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Graphviz rendering. Weak edges are dashed; support hyperedges from more
/// than one clue go through a small junction point.
pub fn to_dot(graph: &ReasoningGraph) -> String {
    let mut out = String::from("digraph reasoning {\n  rankdir=LR;\n");
    for node in &graph.nodes {
        let (shape, extra) = match node {
            Node::Clue { .. } => ("note", String::new()),
            Node::Condition { fulfilled, .. } => {
                let style = match fulfilled {
                    Some(Strength::Strong) => "",
                    Some(Strength::Weak) => ", style=dashed",
                    None => ", style=dotted, fontcolor=gray",
                };
                ("box", style.to_owned())
            }
            Node::Answer { .. } => ("doubleoctagon", String::new()),
        };
        let _ = writeln!(out, "  {} [shape={shape}, label={}{extra}];", quote(node.id()), quote(node.label()));
    }
    for (i, e) in graph.edges.iter().enumerate() {
        let style = match e.strength {
            Strength::Strong => "solid",
            Strength::Weak => "dashed",
        };
        let label = quote(&format!("{:.3}", e.score));
        if e.kind == EdgeKind::Support && e.sources.len() > 1 {
            let junction = quote(&format!("support{i}"));
            let _ = writeln!(out, "  {junction} [shape=point];");
            for s in &e.sources {
                let _ = writeln!(out, "  {} -> {junction} [style={style}, arrowhead=none];", quote(s));
            }
            let _ = writeln!(out, "  {junction} -> {} [style={style}, label={label}];", quote(&e.target));
        } else {
            for s in &e.sources {
                let _ = writeln!(out, "  {} -> {} [style={style}, label={label}];", quote(s), quote(&e.target));
            }
        }
    }
    out.push_str("}\n");
    out
}
