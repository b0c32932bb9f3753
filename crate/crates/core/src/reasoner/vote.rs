use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::graph::{enumerate_paths, EdgeKind, ReasoningGraph, ReasoningPath};
use super::{ReasonerError, Strength};
use crate::domain::AnswerCandidate;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AnswerTally {
    pub strong: usize,
    pub weak: usize,
    /// Sum of `min_score` over the strong paths.
    pub strong_score: f64,
}

/// The chosen answer and the paths that justify it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub answer: AnswerCandidate,
    pub tally: BTreeMap<String, AnswerTally>,
    pub paths: Vec<ReasoningPath>,
    /// True when the strong path count alone did not decide.
    pub tie_broken: bool,
}

fn rank(a: (&String, &AnswerTally), b: (&String, &AnswerTally)) -> Ordering {
    b.1.strong
        .cmp(&a.1.strong)
        .then(b.1.weak.cmp(&a.1.weak))
        .then(b.1.strong_score.total_cmp(&a.1.strong_score))
        .then(a.0.cmp(b.0))
}

/// Majority vote over reasoning paths. Answers are ranked by strong path
/// count, then weak path count, then the summed `min_score` of strong paths,
/// then canonical text ascending.
pub fn vote(graph: &ReasoningGraph) -> Result<Prediction, ReasonerError> {
    let answers: Vec<&AnswerCandidate> = graph.answers().collect();
    if answers.is_empty() {
        return Err(ReasonerError::NoAnswer);
    }
    let mut tally = BTreeMap::new();
    let mut all_paths = BTreeMap::new();
    for a in &answers {
        let paths = enumerate_paths(graph, a.text())?;
        let mut t = AnswerTally::default();
        for p in &paths {
            if p.weak {
                t.weak += 1;
            } else {
                t.strong += 1;
                t.strong_score += p.min_score;
            }
        }
        tally.insert(a.text().to_owned(), t);
        all_paths.insert(a.text().to_owned(), paths);
    }
    let mut ranked: Vec<(&String, &AnswerTally)> = tally.iter().collect();
    ranked.sort_by(|a, b| rank(*a, *b));
    let winner = ranked[0].0.clone();
    let tie_broken = ranked.get(1).is_some_and(|second| second.1.strong == ranked[0].1.strong);
    let answer = answers.iter().find(|a| a.text() == winner).map(|a| (*a).clone()).expect("winner is an answer");
    let paths = all_paths.remove(&winner).unwrap_or_default();
    Ok(Prediction { answer, tally, paths, tie_broken })
}

fn strength_word(weak: bool) -> &'static str {
    if weak {
        "weak"
    } else {
        "strong"
    }
}

/// `clues => condition [strength score] => ... => answer (kind path, min score)`
pub fn format_path(path: &ReasoningPath) -> String {
    let mut line = String::new();
    for step in &path.steps {
        let strength = strength_word(step.strength == Strength::Weak);
        match step.kind {
            EdgeKind::Support => {
                let _ =
                    write!(line, "{} => {} [{strength} {:.3}]", step.premises.join(" + "), step.conclusion, step.score);
            }
            EdgeKind::Deduction => {
                let _ = write!(line, " => {} [{strength} {:.3}]", step.conclusion, step.score);
            }
            EdgeKind::Conclusion => {
                let _ = write!(line, " => {}", step.conclusion);
            }
        }
    }
    let _ = write!(line, " ({} path, min {:.3})", strength_word(path.weak), path.min_score);
    line
}

/// Human-readable trace: one line per winning path, then a tally footer.
pub fn explain(prediction: &Prediction) -> String {
    let mut out = String::new();
    let t = prediction.tally.get(prediction.answer.text()).copied().unwrap_or_default();
    let _ = writeln!(
        out,
        "answer: {} ({} strong, {} weak path{}{})",
        prediction.answer,
        t.strong,
        t.weak,
        if t.strong + t.weak == 1 { "" } else { "s" },
        if prediction.tie_broken { ", tie broken" } else { "" }
    );
    for (i, path) in prediction.paths.iter().enumerate() {
        let _ = writeln!(out, "  {}. {}", i + 1, format_path(path));
    }
    let mut ranked: Vec<(&String, &AnswerTally)> = prediction.tally.iter().collect();
    ranked.sort_by(|a, b| rank(*a, *b));
    let footer: Vec<String> = ranked
        .iter()
        .map(|(a, t)| {
            let none = if t.strong + t.weak == 0 { " (no valid path)" } else { "" };
            format!("{a}: strong {} weak {}{none}", t.strong, t.weak)
        })
        .collect();
    let _ = write!(out, "tally: {}", footer.join(" | "));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AbductionProposal, AnswerSource, ClueOrigin, DependencyEdge, EdgeTarget, VisualClue};
    use crate::reasoner::{build_graph, Fulfillment, Support};

    /// Graph where answer `a` has one direct condition per entry of `scores`.
    fn graph(spec: &[(&str, &[f64])]) -> ReasoningGraph {
        let clues = vec![VisualClue::new(0, "c", ClueOrigin::Gold)];
        let mut proposals = Vec::new();
        let mut fulfillments = Vec::new();
        for (i, (ans, scores)) in spec.iter().enumerate() {
            let pid = format!("p{i}");
            let conds: Vec<(String, String)> =
                (0..scores.len().max(1)).map(|j| (format!("C{}", j + 1), format!("{ans} {j}"))).collect();
            let edges = conds.iter().map(|(c, _)| DependencyEdge::new(c.clone(), EdgeTarget::Answer)).collect();
            proposals.push(
                AbductionProposal::new(&pid, AnswerCandidate::new(ans, AnswerSource::Generated).unwrap(), conds, edges)
                    .unwrap(),
            );
            for (j, s) in scores.iter().enumerate() {
                fulfillments.push(Fulfillment {
                    proposal_id: pid.clone(),
                    condition_id: format!("C{}", j + 1),
                    support: Support::Clues(vec!["vc0".into()]),
                    score: *s,
                    strength: if *s >= 0.8 { Strength::Strong } else { Strength::Weak },
                });
            }
        }
        build_graph(&clues, &proposals, &fulfillments).unwrap()
    }

    #[test]
    fn strong_majority_wins() {
        let p = vote(&graph(&[("yes", &[0.9, 0.9]), ("no", &[0.9])])).unwrap();
        assert_eq!(p.answer.text(), "yes");
        assert!(!p.tie_broken);
        assert_eq!(p.tally["yes"].strong, 2);
        assert_eq!(p.paths.len(), 2);
    }

    #[test]
    fn weak_counts_break_a_zero_strong_tie() {
        let p = vote(&graph(&[("yes", &[0.6, 0.6]), ("no", &[0.6])])).unwrap();
        assert_eq!(p.answer.text(), "yes");
        assert!(p.tie_broken);
        assert_eq!(p.tally["yes"].weak, 2);
    }

    #[test]
    fn score_sum_breaks_equal_counts() {
        // hand-applied ordering: (1, 0, 0.9) beats (1, 0, 0.7)
        let p = vote(&graph(&[("no", &[0.8]), ("yes", &[0.9])])).unwrap();
        assert_eq!(p.answer.text(), "yes");
        assert!(p.tie_broken);
        let p = vote(&graph(&[("yes", &[0.9]), ("no", &[0.7, 0.75])])).unwrap();
        // no has zero strong paths here: strong count decides
        assert_eq!(p.answer.text(), "yes");
        assert!(!p.tie_broken);
    }

    #[test]
    fn text_order_is_the_last_resort() {
        let p = vote(&graph(&[("yes", &[]), ("no", &[])])).unwrap();
        assert_eq!(p.answer.text(), "no");
        assert!(p.tie_broken);
        assert!(p.paths.is_empty());
    }

    #[test]
    fn empty_graph_has_no_answer() {
        let g = ReasoningGraph { nodes: vec![], edges: vec![] };
        assert!(matches!(vote(&g), Err(ReasonerError::NoAnswer)));
    }

    #[test]
    fn explain_lists_paths_and_tally() {
        let p = vote(&graph(&[("yes", &[0.9]), ("no", &[])])).unwrap();
        let text = explain(&p);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "answer: yes (1 strong, 0 weak path)");
        assert_eq!(lines[1], "  1. c => yes 0 [strong 0.900] => yes (strong path, min 0.900)");
        assert_eq!(lines[2], "tally: yes: strong 1 weak 0 | no: strong 0 weak 0 (no valid path)");
        assert_eq!(text, explain(&p));
    }
}
