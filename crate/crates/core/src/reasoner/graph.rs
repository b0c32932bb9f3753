use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{Fulfillment, ReasonerError, Strength, Support};
use crate::domain::{canon, find_cycle, natural_cmp, AbductionProposal, AnswerCandidate, VisualClue};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Clue {
        id: String,
        statement: String,
    },
    Condition {
        id: String,
        proposal_id: String,
        condition_id: String,
        statement: String,
        /// `None` when the condition was not fulfilled.
        fulfilled: Option<Strength>,
    },
    Answer {
        id: String,
        answer: AnswerCandidate,
    },
}

impl Node {
    pub fn id(&self) -> &str {
        match self {
            Node::Clue { id, .. } | Node::Condition { id, .. } | Node::Answer { id, .. } => id,
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Node::Clue { statement, .. } | Node::Condition { statement, .. } => statement,
            Node::Answer { answer, .. } => answer.text(),
        }
    }
}

pub fn condition_node_id(proposal_id: &str, condition_id: &str) -> String {
    format!("{proposal_id}.{condition_id}")
}

pub fn answer_node_id(answer: &str) -> String {
    format!("answer:{}", canon(answer))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// Clue set to condition.
    Support,
    /// Condition to condition.
    Deduction,
    /// Condition to answer.
    Conclusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub kind: EdgeKind,
    /// One node for deduction and conclusion edges, the clue set for support.
    pub sources: Vec<String>,
    pub target: String,
    pub score: f64,
    pub strength: Strength,
}

/// Typed DAG of clue, condition and answer nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl ReasoningGraph {
    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id() == id)
    }

    pub fn answers(&self) -> impl Iterator<Item = &AnswerCandidate> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Answer { answer, .. } => Some(answer),
            _ => None,
        })
    }

    fn outgoing<'a>(&'a self, node: &'a str) -> impl Iterator<Item = (usize, &'a Edge)> + 'a {
        self.edges.iter().enumerate().filter(move |(_, e)| e.kind != EdgeKind::Support && e.sources[0] == node)
    }
}

/// Assembles the reasoning graph. Every clue, condition and distinct answer
/// becomes a node; edges are added for fulfilled conditions only.
pub fn build_graph(
    clues: &[VisualClue],
    proposals: &[AbductionProposal],
    fulfillments: &[Fulfillment],
) -> Result<ReasoningGraph, ReasonerError> {
    let inconsistent = |msg: String| ReasonerError::InconsistentInput(msg);

    let mut fulfilled: HashMap<(&str, &str), &Fulfillment> = HashMap::new();
    for f in fulfillments {
        let proposal = proposals
            .iter()
            .find(|p| p.id() == f.proposal_id)
            .ok_or_else(|| inconsistent(format!("fulfillment references unknown proposal `{}`", f.proposal_id)))?;
        if proposal.condition(&f.condition_id).is_none() {
            return Err(inconsistent(format!(
                "fulfillment references unknown condition `{}` in `{}`",
                f.condition_id, f.proposal_id
            )));
        }
        if f.support.ids().is_empty() {
            return Err(inconsistent(format!("fulfillment of `{}` has empty support", f.condition_id)));
        }
        if fulfilled.insert((f.proposal_id.as_str(), f.condition_id.as_str()), f).is_some() {
            return Err(inconsistent(format!("condition `{}` fulfilled twice", f.condition_id)));
        }
    }

    let mut nodes = Vec::new();
    let mut sorted_clues: Vec<&VisualClue> = clues.iter().collect();
    sorted_clues.sort_by(|a, b| natural_cmp(&a.id, &b.id));
    for c in &sorted_clues {
        nodes.push(Node::Clue { id: c.id.clone(), statement: c.statement.clone() });
    }
    let clue_ids: BTreeSet<&str> = clues.iter().map(|c| c.id.as_str()).collect();

    let mut ordered: Vec<&AbductionProposal> = proposals.iter().collect();
    ordered.sort_by(|a, b| natural_cmp(a.id(), b.id()));
    for p in &ordered {
        let mut conds: Vec<_> = p.conditions().iter().collect();
        conds.sort_by(|a, b| natural_cmp(&a.id, &b.id));
        for c in conds {
            nodes.push(Node::Condition {
                id: condition_node_id(p.id(), &c.id),
                proposal_id: p.id().to_owned(),
                condition_id: c.id.clone(),
                statement: c.statement.clone(),
                fulfilled: fulfilled.get(&(p.id(), c.id.as_str())).map(|f| f.strength),
            });
        }
    }
    let mut answers: BTreeMap<String, AnswerCandidate> = BTreeMap::new();
    for p in proposals {
        answers.entry(p.answer().text().to_owned()).or_insert_with(|| p.answer().clone());
    }
    for (text, answer) in answers {
        nodes.push(Node::Answer { id: answer_node_id(&text), answer });
    }

    let mut edges = Vec::new();
    for p in &ordered {
        let mut conds: Vec<_> = p.conditions().iter().collect();
        conds.sort_by(|a, b| natural_cmp(&a.id, &b.id));
        for c in conds {
            let Some(f) = fulfilled.get(&(p.id(), c.id.as_str())) else { continue };
            let target = condition_node_id(p.id(), &c.id);
            match &f.support {
                Support::Clues(ids) => {
                    if let Some(missing) = ids.iter().find(|i| !clue_ids.contains(i.as_str())) {
                        return Err(inconsistent(format!("support references unknown clue `{missing}`")));
                    }
                    edges.push(Edge {
                        kind: EdgeKind::Support,
                        sources: ids.clone(),
                        target: target.clone(),
                        score: f.score,
                        strength: f.strength,
                    });
                }
                Support::Conditions(ids) => {
                    let preds = p.predecessors(&c.id);
                    for pred in ids {
                        if !preds.contains(&pred.as_str()) {
                            return Err(inconsistent(format!("`{pred}` is not a predecessor of `{}`", c.id)));
                        }
                        if !fulfilled.contains_key(&(p.id(), pred.as_str())) {
                            return Err(inconsistent(format!(
                                "`{}` deduced from unfulfilled condition `{pred}`",
                                c.id
                            )));
                        }
                        edges.push(Edge {
                            kind: EdgeKind::Deduction,
                            sources: vec![condition_node_id(p.id(), pred)],
                            target: target.clone(),
                            score: f.score,
                            strength: f.strength,
                        });
                    }
                }
            }
            if p.concludes_answer(&c.id) {
                edges.push(Edge {
                    kind: EdgeKind::Conclusion,
                    sources: vec![target],
                    target: answer_node_id(p.answer().text()),
                    score: f.score,
                    strength: f.strength,
                });
            }
        }
    }

    let pairs: Vec<(&str, &str)> =
        edges.iter().flat_map(|e| e.sources.iter().map(move |s| (s.as_str(), e.target.as_str()))).collect();
    if let Some(node) = find_cycle(&pairs) {
        return Err(ReasonerError::Cycle(node.to_owned()));
    }
    Ok(ReasoningGraph { nodes, edges })
}

/// One edge of a reasoning path with the statements it connects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub kind: EdgeKind,
    pub premises: Vec<String>,
    pub conclusion: String,
    pub score: f64,
    pub strength: Strength,
}

/// A chain from a clue-supported condition to an answer node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningPath {
    pub answer: String,
    /// Condition node ids along the path followed by the answer node id.
    pub node_ids: Vec<String>,
    /// Indices into [`ReasoningGraph::edges`].
    pub edges: Vec<usize>,
    pub steps: Vec<PathStep>,
    pub min_score: f64,
    pub weak: bool,
}

/// Every path that enters a condition through its support edge, follows
/// deduction edges and ends in a conclusion edge into `answer`. Ordered by
/// node-id sequence.
pub fn enumerate_paths(graph: &ReasoningGraph, answer: &str) -> Result<Vec<ReasoningPath>, ReasonerError> {
    let answer_id = answer_node_id(answer);
    if graph.node(&answer_id).is_none() {
        return Err(ReasonerError::UnknownAnswer(canon(answer)));
    }
    let mut paths = Vec::new();
    for (i, support) in graph.edges.iter().enumerate().filter(|(_, e)| e.kind == EdgeKind::Support) {
        let mut edge_stack = vec![i];
        let mut node_stack = vec![support.target.clone()];
        walk(graph, &answer_id, &mut edge_stack, &mut node_stack, &mut paths);
    }
    paths.sort_by(|a, b| a.node_ids.cmp(&b.node_ids));
    Ok(paths)
}

fn walk(
    graph: &ReasoningGraph,
    answer_id: &str,
    edge_stack: &mut Vec<usize>,
    node_stack: &mut Vec<String>,
    out: &mut Vec<ReasoningPath>,
) {
    let here = node_stack.last().expect("nonempty").clone();
    for (i, e) in graph.outgoing(&here) {
        match e.kind {
            EdgeKind::Conclusion if e.target == answer_id => {
                edge_stack.push(i);
                node_stack.push(e.target.clone());
                out.push(make_path(graph, edge_stack, node_stack));
                node_stack.pop();
                edge_stack.pop();
            }
            EdgeKind::Deduction if !node_stack.contains(&e.target) => {
                edge_stack.push(i);
                node_stack.push(e.target.clone());
                walk(graph, answer_id, edge_stack, node_stack, out);
                node_stack.pop();
                edge_stack.pop();
            }
            _ => {}
        }
    }
}

fn make_path(graph: &ReasoningGraph, edges: &[usize], node_ids: &[String]) -> ReasoningPath {
    let label = |id: &str| graph.node(id).map(|n| n.label().to_owned()).unwrap_or_default();
    let steps: Vec<PathStep> = edges
        .iter()
        .map(|&i| {
            let e = &graph.edges[i];
            PathStep {
                kind: e.kind,
                premises: e.sources.iter().map(|s| label(s)).collect(),
                conclusion: label(&e.target),
                score: e.score,
                strength: e.strength,
            }
        })
        .collect();
    let min_score = steps.iter().map(|s| s.score).fold(f64::INFINITY, f64::min);
    let weak = steps.iter().any(|s| s.strength == Strength::Weak);
    ReasoningPath {
        answer: label(node_ids.last().expect("path ends at the answer")),
        node_ids: node_ids.to_vec(),
        edges: edges.to_vec(),
        steps,
        min_score,
        weak,
    }
}
