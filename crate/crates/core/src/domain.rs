//! Core vocabulary shared by every stage of the pipeline.
//!
//! Everything here is an immutable value once constructed. Text matching
//! throughout the crate goes through [`canonicalize`], and every cache key is
//! produced by [`fingerprint`] over a [`canonical_json`] serialization.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Reserved sink id used in dependency edges. Never valid as a condition id.
pub const ANSWER_SENTINEL: &str = "__ANSWER__";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("`{ANSWER_SENTINEL}` is reserved and cannot be used as a condition id")]
    ReservedId,
    #[error("dependency edge references unknown condition `{0}`")]
    DanglingEdge(String),
    #[error("dependency edges contain a cycle through `{0}`")]
    Cycle(String),
    #[error("condition `{0}` does not reach the answer")]
    Unreachable(String),
}

/// A string together with its canonical matching form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CanonicalText {
    pub raw: String,
    pub canonical: String,
}

fn is_terminal_punct(c: char) -> bool {
    matches!(c, '.' | ',' | ';' | ':' | '!' | '?' | '…' | '。' | '！' | '？')
}

/// Case-fold, trim, collapse internal whitespace and strip terminal
/// punctuation. Internal punctuation is preserved.
pub fn canonicalize(raw: &str) -> CanonicalText {
    let folded = raw.to_lowercase();
    let mut canonical = folded.split_whitespace().collect::<Vec<_>>().join(" ");
    loop {
        let trimmed = canonical.trim_end_matches(|c: char| is_terminal_punct(c) || c.is_whitespace());
        if trimmed.len() == canonical.len() {
            break;
        }
        canonical.truncate(trimmed.len());
    }
    CanonicalText { raw: raw.to_owned(), canonical }
}

/// Shorthand for `canonicalize(raw).canonical`.
pub fn canon(raw: &str) -> String {
    canonicalize(raw).canonical
}

/// Lowercase hex SHA-256 of `payload`.
pub fn fingerprint(payload: &[u8]) -> String {
    hex::encode(Sha256::digest(payload))
}

/// Serializes `value` as JSON with object keys sorted and no insignificant
/// whitespace, so that equal values always produce equal bytes.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<Vec<u8>> {
    let value = serde_json::to_value(value)?;
    let mut out = Vec::new();
    write_canonical(&value, &mut out)?;
    Ok(out)
}

fn write_canonical(value: &serde_json::Value, out: &mut Vec<u8>) -> serde_json::Result<()> {
    use serde_json::Value;
    match value {
        Value::Object(map) => {
            let sorted: BTreeMap<&String, &Value> = map.iter().collect();
            out.push(b'{');
            for (i, (k, v)) in sorted.into_iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                serde_json::to_writer(&mut *out, k)?;
                out.push(b':');
                write_canonical(v, out)?;
            }
            out.push(b'}');
        }
        Value::Array(items) => {
            out.push(b'[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_canonical(v, out)?;
            }
            out.push(b']');
        }
        scalar => serde_json::to_writer(&mut *out, scalar)?,
    }
    Ok(())
}

/// Where a clue list attached to a [`QaInstance`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClueOrigin {
    #[default]
    Gold,
    BackendGenerated,
}

/// One image/question/answer record of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaInstance {
    pub id: String,
    pub image_ref: String,
    pub question: String,
    #[serde(rename = "answer", default, skip_serializing_if = "Option::is_none")]
    pub gold_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_choices: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_clues: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_inferences: Option<Vec<String>>,
    /// Absent means the clues are human annotations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clue_origin: Option<ClueOrigin>,
}

impl QaInstance {
    pub fn new(id: impl Into<String>, image_ref: impl Into<String>, question: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            image_ref: image_ref.into(),
            question: question.into(),
            gold_answer: None,
            answer_choices: None,
            gold_clues: None,
            gold_inferences: None,
            clue_origin: None,
        }
    }

    pub fn with_answer(mut self, answer: impl Into<String>) -> Self {
        self.gold_answer = Some(answer.into());
        self
    }

    pub fn with_clues<S: Into<String>>(mut self, clues: impl IntoIterator<Item = S>) -> Self {
        self.gold_clues = Some(clues.into_iter().map(Into::into).collect());
        self
    }

    pub fn with_inferences<S: Into<String>>(mut self, inferences: impl IntoIterator<Item = S>) -> Self {
        self.gold_inferences = Some(inferences.into_iter().map(Into::into).collect());
        self
    }

    pub fn with_choices<S: Into<String>>(mut self, choices: impl IntoIterator<Item = S>) -> Self {
        self.answer_choices = Some(choices.into_iter().map(Into::into).collect());
        self
    }

    /// Checks the per-record invariants. Id uniqueness is a dataset-level
    /// property and is checked by the loader.
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.id.trim().is_empty() {
            return Err(DomainError::Empty("id"));
        }
        if self.question.trim().is_empty() {
            return Err(DomainError::Empty("question"));
        }
        if let Some(answer) = &self.gold_answer {
            if canon(answer).is_empty() {
                return Err(DomainError::Empty("answer"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerSource {
    Generated,
    DatasetChoice,
}

/// A candidate answer in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnswerCandidate {
    text: String,
    pub source: AnswerSource,
}

impl AnswerCandidate {
    pub fn new(raw: &str, source: AnswerSource) -> Result<Self, DomainError> {
        let text = canon(raw);
        if text.is_empty() {
            return Err(DomainError::Empty("answer"));
        }
        Ok(Self { text, source })
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

impl fmt::Display for AnswerCandidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DynamicCondition {
    pub id: String,
    pub statement: String,
    pub proposal_id: String,
}

/// Target of a dependency edge: another condition, or the answer itself.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeTarget {
    Condition(String),
    Answer,
}

impl EdgeTarget {
    pub fn as_str(&self) -> &str {
        match self {
            EdgeTarget::Condition(id) => id,
            EdgeTarget::Answer => ANSWER_SENTINEL,
        }
    }
}

impl From<&str> for EdgeTarget {
    fn from(s: &str) -> Self {
        if s == ANSWER_SENTINEL {
            EdgeTarget::Answer
        } else {
            EdgeTarget::Condition(s.to_owned())
        }
    }
}

impl Serialize for EdgeTarget {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EdgeTarget {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(EdgeTarget::from(s.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DependencyEdge {
    pub from: String,
    pub to: EdgeTarget,
}

impl DependencyEdge {
    pub fn new(from: impl Into<String>, to: EdgeTarget) -> Self {
        Self { from: from.into(), to }
    }
}

/// A DAG of dynamic conditions whose joint truth would make `answer` true.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProposal")]
pub struct AbductionProposal {
    id: String,
    answer: AnswerCandidate,
    conditions: Vec<DynamicCondition>,
    dependency_edges: Vec<DependencyEdge>,
}

#[derive(Deserialize)]
struct RawProposal {
    id: String,
    answer: AnswerCandidate,
    conditions: Vec<DynamicCondition>,
    dependency_edges: Vec<DependencyEdge>,
}

impl TryFrom<RawProposal> for AbductionProposal {
    type Error = DomainError;

    fn try_from(raw: RawProposal) -> Result<Self, Self::Error> {
        let conditions = raw.conditions.into_iter().map(|c| (c.id, c.statement)).collect();
        AbductionProposal::new(raw.id, raw.answer, conditions, raw.dependency_edges)
    }
}

impl AbductionProposal {
    /// Builds a proposal, stamping every condition with `id` as its
    /// proposal id. Edges are stored sorted and deduplicated.
    pub fn new(
        id: impl Into<String>,
        answer: AnswerCandidate,
        conditions: Vec<(String, String)>,
        mut dependency_edges: Vec<DependencyEdge>,
    ) -> Result<Self, DomainError> {
        let id = id.into();
        let conditions: Vec<DynamicCondition> = conditions
            .into_iter()
            .map(|(cid, statement)| DynamicCondition { id: cid, statement, proposal_id: id.clone() })
            .collect();
        dependency_edges.sort();
        dependency_edges.dedup();
        validate_condition_dag(&conditions, &dependency_edges)?;
        Ok(Self { id, answer, conditions, dependency_edges })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn answer(&self) -> &AnswerCandidate {
        &self.answer
    }

    pub fn conditions(&self) -> &[DynamicCondition] {
        &self.conditions
    }

    pub fn dependency_edges(&self) -> &[DependencyEdge] {
        &self.dependency_edges
    }

    pub fn condition(&self, id: &str) -> Option<&DynamicCondition> {
        self.conditions.iter().find(|c| c.id == id)
    }

    /// Conditions with a dependency edge into `id`, in id order.
    pub fn predecessors(&self, id: &str) -> Vec<&str> {
        let mut preds: Vec<&str> = self
            .dependency_edges
            .iter()
            .filter(|e| matches!(&e.to, EdgeTarget::Condition(t) if t == id))
            .map(|e| e.from.as_str())
            .collect();
        preds.sort_by(|a, b| natural_cmp(a, b));
        preds
    }

    pub fn concludes_answer(&self, id: &str) -> bool {
        self.dependency_edges.iter().any(|e| e.from == id && e.to == EdgeTarget::Answer)
    }
}

/// Validates condition ids and dependency edges: ids are nonempty and
/// unique, none is the sentinel, no edge dangles, the edges are acyclic and
/// every condition reaches the sentinel.
pub fn validate_condition_dag(conditions: &[DynamicCondition], edges: &[DependencyEdge]) -> Result<(), DomainError> {
    let mut ids = HashSet::new();
    for c in conditions {
        if c.id.is_empty() {
            return Err(DomainError::Empty("condition id"));
        }
        if c.statement.trim().is_empty() {
            return Err(DomainError::Empty("condition statement"));
        }
        if c.id == ANSWER_SENTINEL {
            return Err(DomainError::ReservedId);
        }
        if !ids.insert(c.id.as_str()) {
            return Err(DomainError::DuplicateId(c.id.clone()));
        }
    }
    for e in edges {
        if e.from == ANSWER_SENTINEL {
            return Err(DomainError::ReservedId);
        }
        if !ids.contains(e.from.as_str()) {
            return Err(DomainError::DanglingEdge(e.from.clone()));
        }
        if let EdgeTarget::Condition(t) = &e.to {
            if !ids.contains(t.as_str()) {
                return Err(DomainError::DanglingEdge(t.clone()));
            }
        }
    }
    let pairs: Vec<(&str, &str)> = edges.iter().map(|e| (e.from.as_str(), e.to.as_str())).collect();
    if let Some(node) = find_cycle(&pairs) {
        return Err(DomainError::Cycle(node.to_owned()));
    }
    // Every condition must reach the sentinel; walk backwards from it.
    let mut reached: BTreeSet<&str> = BTreeSet::new();
    let mut frontier = vec![ANSWER_SENTINEL];
    while let Some(node) = frontier.pop() {
        for (from, to) in &pairs {
            if *to == node && reached.insert(from) {
                frontier.push(from);
            }
        }
    }
    if let Some(c) = conditions.iter().find(|c| !reached.contains(c.id.as_str())) {
        return Err(DomainError::Unreachable(c.id.clone()));
    }
    Ok(())
}

/// Kahn's algorithm over an arbitrary edge list. Returns a node that sits on
/// a cycle when one exists.
pub fn find_cycle<'a>(edges: &[(&'a str, &'a str)]) -> Option<&'a str> {
    let mut indegree: BTreeMap<&str, usize> = BTreeMap::new();
    for (from, to) in edges {
        indegree.entry(from).or_insert(0);
        *indegree.entry(to).or_insert(0) += 1;
    }
    let mut ready: Vec<&str> = indegree.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
    while let Some(node) = ready.pop() {
        for (from, to) in edges {
            if *from == node {
                let d = indegree.get_mut(to).expect("endpoint registered");
                *d -= 1;
                if *d == 0 {
                    ready.push(to);
                }
            }
        }
        indegree.remove(node);
    }
    indegree.into_iter().find(|(_, d)| *d > 0).map(|(n, _)| n)
}

/// Orders ids like `vc2` before `vc10` by comparing embedded digit runs
/// numerically.
pub fn natural_cmp(a: &str, b: &str) -> std::cmp::Ordering {
    fn chunks(s: &str) -> Vec<(bool, &str)> {
        let mut out = Vec::new();
        let mut start = 0;
        let bytes = s.as_bytes();
        for i in 1..=bytes.len() {
            if i == bytes.len() || bytes[i].is_ascii_digit() != bytes[start].is_ascii_digit() {
                out.push((bytes[start].is_ascii_digit(), &s[start..i]));
                start = i;
            }
        }
        out
    }
    let (ca, cb) = (chunks(a), chunks(b));
    for ((da, sa), (db, sb)) in ca.iter().zip(cb.iter()) {
        let ord = if *da && *db {
            let (ta, tb) = (sa.trim_start_matches('0'), sb.trim_start_matches('0'));
            ta.len().cmp(&tb.len()).then_with(|| ta.cmp(tb)).then_with(|| sa.len().cmp(&sb.len()))
        } else {
            sa.cmp(sb)
        };
        if ord != std::cmp::Ordering::Equal {
            return ord;
        }
    }
    ca.len().cmp(&cb.len())
}

/// A question-relevant statement about the image.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VisualClue {
    pub id: String,
    pub statement: String,
    pub origin: ClueOrigin,
}

impl VisualClue {
    pub fn new(index: usize, statement: impl Into<String>, origin: ClueOrigin) -> Self {
        Self { id: format!("vc{index}"), statement: statement.into(), origin }
    }
}
