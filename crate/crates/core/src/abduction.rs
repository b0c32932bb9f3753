//! Abduction proposals: candidate answers and, for each answer, the dynamic
//! conditions that would make it true.
//!
//! The text backend is prompted with few-shot exemplars and must answer in a
//! line grammar:
//!
//! ```text
//! C1: people are using umbrellas
//! C2: the ground is wet
//! C2 -> C1
//! DONE
//! ```
//!
//! `Ci -> Cj` records that `Ci` helps establish `Cj`; `Ci -> ANSWER` may be
//! written explicitly. Conditions without an outgoing edge support the answer
//! directly. Condition retrieval is iterative: each round re-prompts with the
//! conditions gathered so far until the backend writes `DONE` or the round
//! budget runs out.

use std::collections::{BTreeSet, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendError, TextGenRequest, TextGenerator};
use crate::domain::{
    canon, natural_cmp, AbductionProposal, AnswerCandidate, AnswerSource, DependencyEdge, DomainError, EdgeTarget,
    QaInstance,
};
use crate::templates;

#[derive(Debug, Error)]
pub enum AbductionError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("no conditions retrieved for answer `{0}`")]
    EmptyProposal(String),
    #[error("{needed} exemplars requested but only {available} available")]
    NotEnoughExemplars { needed: usize, available: usize },
    #[error("question is empty")]
    EmptyQuestion,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("invalid proposal: {0}")]
    Invalid(#[from] DomainError),
}

/// One worked example shown in the few-shot prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExemplar {
    pub question: String,
    pub answers: Vec<String>,
    /// The conditions for `answers[0]`, already written in the line grammar.
    pub proposals_text: String,
}

impl FewShotExemplar {
    /// Builds an exemplar from an annotated dataset record: answers come from
    /// the answer choices (or the gold answer) and the gold inferences become
    /// the worked conditions.
    pub fn from_instance(inst: &QaInstance) -> Option<Self> {
        let answers = match (&inst.answer_choices, &inst.gold_answer) {
            (Some(choices), Some(gold)) => {
                let mut a = vec![gold.clone()];
                a.extend(choices.iter().filter(|c| canon(c) != canon(gold)).cloned());
                a
            }
            (Some(choices), None) if !choices.is_empty() => choices.clone(),
            (None, Some(gold)) => vec![gold.clone()],
            _ => return None,
        };
        let inferences = inst.gold_inferences.as_ref().filter(|i| !i.is_empty())?;
        let mut proposals_text: String =
            inferences.iter().enumerate().map(|(i, s)| format!("C{}: {}\n", i + 1, s.trim())).collect();
        proposals_text.push_str("DONE");
        Some(Self { question: inst.question.clone(), answers, proposals_text })
    }
}

/// Exemplars bundled with the crate, in the dataset JSONL schema.
pub const BUNDLED_EXEMPLARS: &str = include_str!("../templates/exemplars.jsonl");

pub fn bundled_exemplars() -> Vec<FewShotExemplar> {
    BUNDLED_EXEMPLARS
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str::<QaInstance>(l).expect("bundled exemplar is valid"))
        .map(|inst| FewShotExemplar::from_instance(&inst).expect("bundled exemplar is annotated"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbductionConfig {
    /// Exemplars per prompt.
    pub shots: usize,
    pub max_rounds: usize,
    pub max_answers: usize,
    pub max_conditions_per_proposal: usize,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for AbductionConfig {
    fn default() -> Self {
        Self {
            shots: 4,
            max_rounds: 3,
            max_answers: 5,
            max_conditions_per_proposal: 8,
            temperature: 0.0,
            max_tokens: 256,
        }
    }
}

impl AbductionConfig {
    pub fn validate(&self) -> Result<(), AbductionError> {
        let positive = [
            ("max_rounds", self.max_rounds),
            ("max_answers", self.max_answers),
            ("max_conditions_per_proposal", self.max_conditions_per_proposal),
            ("max_tokens", self.max_tokens as usize),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(AbductionError::Config(format!("{name} must be positive")));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(AbductionError::Config(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        Ok(())
    }

    fn request(&self, prompt: String) -> TextGenRequest {
        TextGenRequest::new(prompt).with_temperature(self.temperature).with_max_tokens(self.max_tokens)
    }

    /// The first `shots` exemplars of `pool`.
    pub fn select_exemplars<'a>(&self, pool: &'a [FewShotExemplar]) -> Result<&'a [FewShotExemplar], AbductionError> {
        pool.get(..self.shots).ok_or(AbductionError::NotEnoughExemplars { needed: self.shots, available: pool.len() })
    }
}

pub fn build_answer_prompt(question: &str, exemplars: &[FewShotExemplar]) -> String {
    let mut examples = String::new();
    for ex in exemplars {
        examples.push_str(&format!("Question: {}\nAnswers:\n", ex.question.trim()));
        for a in &ex.answers {
            examples.push_str(&format!("- {}\n", a.trim()));
        }
        examples.push('\n');
    }
    templates::ANSWERS.render(&[("examples", &examples), ("question", question.trim())])
}

/// Condition prompt for `answer`. `known` is the proposal retrieved in
/// earlier rounds, rendered in the line grammar.
pub fn build_condition_prompt(question: &str, answer: &str, exemplars: &[FewShotExemplar], known: &str) -> String {
    let mut examples = String::new();
    for ex in exemplars {
        let first = ex.answers.first().map(String::as_str).unwrap_or_default();
        examples.push_str(&format!(
            "Question: {}\nAnswer: {}\nConditions:\n{}\n\n",
            ex.question.trim(),
            first.trim(),
            ex.proposals_text.trim()
        ));
    }
    let known = if known.is_empty() {
        String::new()
    } else {
        format!("Conditions found so far:\n{known}\nContinue the numbering and list only new conditions.\n")
    };
    templates::CONDITIONS.render(&[
        ("examples", &examples),
        ("question", question.trim()),
        ("answer", answer),
        ("known", &known),
    ])
}

/// Reads `- answer` lines; other lines are ignored.
pub fn parse_answers(text: &str) -> Result<Vec<String>, AbductionError> {
    let answers: Vec<String> = text
        .lines()
        .filter_map(|l| l.trim().strip_prefix("- "))
        .map(|a| a.trim().to_owned())
        .filter(|a| !canon(a).is_empty())
        .collect();
    if answers.is_empty() {
        return Err(AbductionError::Parse(format!("no answer lines in {text:?}")));
    }
    Ok(answers)
}

/// Asks the backend for candidate answers. The result is deduplicated by
/// canonical text, keeps first-appearance order and holds at most
/// `cfg.max_answers` entries.
pub fn propose_answers(
    gen: &dyn TextGenerator,
    question: &str,
    exemplars: &[FewShotExemplar],
    cfg: &AbductionConfig,
) -> Result<Vec<AnswerCandidate>, AbductionError> {
    if question.trim().is_empty() {
        return Err(AbductionError::EmptyQuestion);
    }
    let exemplars = cfg.select_exemplars(exemplars)?;
    let response = gen.generate_text(&cfg.request(build_answer_prompt(question, exemplars)))?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for raw in parse_answers(&response.text)? {
        let candidate = AnswerCandidate::new(&raw, AnswerSource::Generated)?;
        if seen.insert(candidate.text().to_owned()) {
            out.push(candidate);
            if out.len() == cfg.max_answers {
                break;
            }
        }
    }
    Ok(out)
}

/// Parsed output of one backend reply. Ids are those written by the
/// backend; ANSWER edges are only the explicit ones.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ProposalFragment {
    pub conditions: Vec<(String, String)>,
    pub edges: Vec<(String, EdgeTarget)>,
    pub done: bool,
    /// Lines matching no rule of the grammar.
    pub skipped_lines: usize,
}

impl ProposalFragment {
    /// Turns the fragment into a proposal, edging every condition without an
    /// outgoing dependency to the answer.
    pub fn into_proposal(self, id: &str, answer: AnswerCandidate) -> Result<AbductionProposal, AbductionError> {
        let edges = with_implicit_answer_edges(&self.conditions, self.edges);
        Ok(AbductionProposal::new(id, answer, self.conditions, edges)?)
    }
}

fn with_implicit_answer_edges(
    conditions: &[(String, String)],
    edges: Vec<(String, EdgeTarget)>,
) -> Vec<DependencyEdge> {
    let has_out: HashSet<&str> = edges.iter().map(|(f, _)| f.as_str()).collect();
    let implicit: Vec<DependencyEdge> = conditions
        .iter()
        .filter(|(id, _)| !has_out.contains(id.as_str()))
        .map(|(id, _)| DependencyEdge::new(id.clone(), EdgeTarget::Answer))
        .collect();
    edges.into_iter().map(|(f, t)| DependencyEdge::new(f, t)).chain(implicit).collect()
}

fn is_condition_id(s: &str) -> bool {
    s.len() > 1 && s.starts_with('C') && s[1..].bytes().all(|b| b.is_ascii_digit())
}

enum Line<'a> {
    Condition(&'a str, &'a str),
    Edge(&'a str, &'a str),
    Done,
    Other,
}

fn classify(line: &str) -> Line<'_> {
    let line = line.trim();
    if line.eq_ignore_ascii_case("done") {
        return Line::Done;
    }
    if let Some((from, to)) = line.split_once("->") {
        let (from, to) = (from.trim(), to.trim());
        if is_condition_id(from) && (is_condition_id(to) || to == "ANSWER") {
            return Line::Edge(from, to);
        }
    }
    if let Some((id, statement)) = line.split_once(':') {
        let (id, statement) = (id.trim(), statement.trim());
        if is_condition_id(id) && !statement.is_empty() {
            return Line::Condition(id, statement);
        }
    }
    Line::Other
}

/// Parses one reply without requiring any condition. Edge endpoints must be
/// defined in the reply or listed in `known`.
fn parse_lines(text: &str, known: &HashSet<String>) -> Result<ProposalFragment, AbductionError> {
    let mut frag = ProposalFragment::default();
    let mut defined: HashMap<&str, &str> = HashMap::new();
    let mut raw_edges = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if frag.done {
            if !line.trim().is_empty() {
                frag.skipped_lines += 1;
            }
            continue;
        }
        match classify(line) {
            Line::Condition(id, statement) => match defined.get(id) {
                Some(prev) if canon(prev) == canon(statement) => {}
                Some(_) => {
                    return Err(AbductionError::Parse(format!("line {}: {id} defined twice", n + 1)));
                }
                None => {
                    defined.insert(id, statement);
                    frag.conditions.push((id.to_owned(), statement.to_owned()));
                }
            },
            Line::Edge(from, to) => raw_edges.push((n + 1, from, to)),
            Line::Done => frag.done = true,
            Line::Other if line.trim().is_empty() => {}
            Line::Other => frag.skipped_lines += 1,
        }
    }
    for (n, from, to) in raw_edges {
        for end in [from, to] {
            if end != "ANSWER" && !defined.contains_key(end) && !known.contains(end) {
                return Err(AbductionError::Parse(format!("line {n}: edge references undefined condition {end}")));
            }
        }
        let target = if to == "ANSWER" { EdgeTarget::Answer } else { EdgeTarget::Condition(to.to_owned()) };
        let edge = (from.to_owned(), target);
        if !frag.edges.contains(&edge) {
            frag.edges.push(edge);
        }
    }
    if frag.skipped_lines > 0 {
        log::warn!("skipped {} line(s) outside the condition grammar", frag.skipped_lines);
    }
    Ok(frag)
}

/// Parses a complete proposal reply. Fails when no condition line exists or
/// an edge points at an undefined condition.
pub fn parse_proposal(text: &str) -> Result<ProposalFragment, AbductionError> {
    let frag = parse_lines(text, &HashSet::new())?;
    if frag.conditions.is_empty() {
        return Err(AbductionError::Parse(format!("no condition lines in {text:?}")));
    }
    Ok(frag)
}

/// Renders a proposal in the line grammar, every edge explicit.
pub fn serialize_proposal(proposal: &AbductionProposal) -> String {
    let mut out = render_known(
        proposal.conditions().iter().map(|c| (c.id.as_str(), c.statement.as_str())),
        proposal.dependency_edges().iter().map(|e| (e.from.as_str(), &e.to)),
        true,
    );
    out.push_str("\nDONE");
    out
}

fn render_known<'a>(
    conditions: impl Iterator<Item = (&'a str, &'a str)>,
    edges: impl Iterator<Item = (&'a str, &'a EdgeTarget)>,
    answer_edges: bool,
) -> String {
    let mut lines: Vec<String> = conditions.map(|(id, s)| format!("{id}: {s}")).collect();
    for (from, to) in edges {
        match to {
            EdgeTarget::Condition(t) => lines.push(format!("{from} -> {t}")),
            EdgeTarget::Answer if answer_edges => lines.push(format!("{from} -> ANSWER")),
            EdgeTarget::Answer => {}
        }
    }
    lines.join("\n")
}

/// Retrieves the abduction proposal for `answer` through up to
/// `cfg.max_rounds` prompting rounds.
pub fn propose_conditions(
    gen: &dyn TextGenerator,
    question: &str,
    answer: &AnswerCandidate,
    proposal_id: &str,
    exemplars: &[FewShotExemplar],
    cfg: &AbductionConfig,
) -> Result<AbductionProposal, AbductionError> {
    if question.trim().is_empty() {
        return Err(AbductionError::EmptyQuestion);
    }
    let exemplars = cfg.select_exemplars(exemplars)?;
    let mut conditions: Vec<(String, String)> = Vec::new();
    let mut edges: BTreeSet<(String, EdgeTarget)> = BTreeSet::new();

    for round in 0..cfg.max_rounds {
        let known_text = render_known(
            conditions.iter().map(|(i, s)| (i.as_str(), s.as_str())),
            edges.iter().map(|(f, t)| (f.as_str(), t)),
            true,
        );
        let prompt = build_condition_prompt(question, answer.text(), exemplars, &known_text);
        let reply = gen.generate_text(&cfg.request(prompt))?;
        let known_ids: HashSet<String> = conditions.iter().map(|(i, _)| i.clone()).collect();
        let frag = parse_lines(&reply.text, &known_ids)?;
        if frag.conditions.is_empty() && frag.edges.is_empty() && !frag.done {
            return Err(AbductionError::Parse(format!("round {}: no condition lines in {:?}", round + 1, reply.text)));
        }

        // Local ids of this reply mapped onto the accumulated id space; None
        // marks conditions dropped by the size cap.
        let mut used: HashSet<String> = known_ids.clone();
        used.extend(frag.conditions.iter().map(|(i, _)| i.clone()));
        let mut mapping: HashMap<String, Option<String>> = HashMap::new();
        for (local, statement) in &frag.conditions {
            let key = canon(statement);
            if let Some((existing, _)) = conditions.iter().find(|(_, s)| canon(s) == key) {
                mapping.insert(local.clone(), Some(existing.clone()));
                continue;
            }
            if conditions.len() >= cfg.max_conditions_per_proposal {
                mapping.insert(local.clone(), None);
                continue;
            }
            let global = if known_ids.contains(local) { fresh_id(&used) } else { local.clone() };
            used.insert(global.clone());
            conditions.push((global.clone(), statement.clone()));
            mapping.insert(local.clone(), Some(global));
        }
        for (from, to) in frag.edges {
            let resolve = |id: &str| mapping.get(id).cloned().unwrap_or_else(|| Some(id.to_owned()));
            let from = match resolve(&from) {
                Some(f) => f,
                None => continue,
            };
            let to = match to {
                EdgeTarget::Answer => EdgeTarget::Answer,
                EdgeTarget::Condition(t) => match resolve(&t) {
                    Some(t) => EdgeTarget::Condition(t),
                    None => continue,
                },
            };
            edges.insert((from, to));
        }
        if frag.done {
            break;
        }
    }

    if conditions.is_empty() {
        return Err(AbductionError::EmptyProposal(answer.text().to_owned()));
    }
    let edges = with_implicit_answer_edges(&conditions, edges.into_iter().collect());
    Ok(AbductionProposal::new(proposal_id, answer.clone(), conditions, edges)?)
}

fn fresh_id(used: &HashSet<String>) -> String {
    let max = used.iter().filter_map(|i| i.strip_prefix('C')?.parse::<u64>().ok()).max().unwrap_or(0);
    format!("C{}", max + 1)
}

/// Proposals for every answer, fetched concurrently. Proposal ids are
/// `p0, p1, ...` in answer order.
pub fn propose_all(
    gen: &dyn TextGenerator,
    question: &str,
    answers: &[AnswerCandidate],
    exemplars: &[FewShotExemplar],
    cfg: &AbductionConfig,
) -> Result<Vec<AbductionProposal>, AbductionError> {
    answers
        .par_iter()
        .enumerate()
        .map(|(i, a)| propose_conditions(gen, question, a, &format!("p{i}"), exemplars, cfg))
        .collect()
}

/// Sorted condition ids of a proposal, for display.
pub fn condition_ids(proposal: &AbductionProposal) -> Vec<&str> {
    let mut ids: Vec<&str> = proposal.conditions().iter().map(|c| c.id.as_str()).collect();
    ids.sort_by(|a, b| natural_cmp(a, b));
    ids
}
