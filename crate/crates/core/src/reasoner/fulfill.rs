use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use super::{Fulfillment, FulfillmentConfig, ReasonerError, Support};
use crate::backends::EntailmentScorer;
use crate::domain::{natural_cmp, AbductionProposal, DynamicCondition, VisualClue};

/// Index subsets of `0..n` with sizes `1..=k`, by size and then
/// lexicographically.
pub fn clue_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn extend(start: usize, n: usize, size: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == size {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            current.push(i);
            extend(i + 1, n, size, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    for size in 1..=k.min(n) {
        extend(0, n, size, &mut Vec::with_capacity(size), &mut out);
    }
    out
}

/// Scores each condition against every clue combination of up to
/// `max_subset_size` clues. The premise of a combination is its clue
/// statements joined by `"; "` in ascending clue-id order. A condition is
/// fulfilled by its best-scoring combination (the smallest, then
/// lexicographically first, on ties) when that score reaches `tau_weak`.
pub fn fulfill_conditions(
    clues: &[VisualClue],
    conditions: &[DynamicCondition],
    cfg: &FulfillmentConfig,
    nli: &dyn EntailmentScorer,
) -> Result<Vec<Fulfillment>, ReasonerError> {
    if clues.is_empty() {
        return Err(ReasonerError::NoClues);
    }
    let mut ordered: Vec<&VisualClue> = clues.iter().collect();
    ordered.sort_by(|a, b| natural_cmp(&a.id, &b.id));
    let subsets = clue_subsets(ordered.len(), cfg.max_subset_size);
    let premises: Vec<String> = subsets
        .iter()
        .map(|s| s.iter().map(|&i| ordered[i].statement.as_str()).collect::<Vec<_>>().join("; "))
        .collect();

    let best: Vec<Option<Fulfillment>> = conditions
        .par_iter()
        .map(|cond| -> Result<Option<Fulfillment>, ReasonerError> {
            let mut best: Option<(usize, f64)> = None;
            for (i, premise) in premises.iter().enumerate() {
                let score = nli.nli_score(premise, &cond.statement)?.entail;
                if best.is_none_or(|(_, b)| score > b) {
                    best = Some((i, score));
                }
            }
            Ok(best.and_then(|(i, score)| {
                cfg.classify(score).map(|strength| Fulfillment {
                    proposal_id: cond.proposal_id.clone(),
                    condition_id: cond.id.clone(),
                    support: Support::Clues(subsets[i].iter().map(|&j| ordered[j].id.clone()).collect()),
                    score,
                    strength,
                })
            }))
        })
        .collect::<Result<_, _>>()?;
    Ok(best.into_iter().flatten().collect())
}

/// Extends `fulfillments` with conditions of `proposal` deducible from their
/// dependency predecessors. Each round scores every unfulfilled condition
/// whose predecessors were all fulfilled before the round began, using the
/// predecessor statements (ascending id, joined by `"; "`) as premise. Stops
/// at a fixpoint or after `max_chain_depth` rounds. Never removes entries.
pub fn chain_deduce(
    proposal: &AbductionProposal,
    mut fulfillments: Vec<Fulfillment>,
    cfg: &FulfillmentConfig,
    nli: &dyn EntailmentScorer,
) -> Result<Vec<Fulfillment>, ReasonerError> {
    let mut ids: Vec<&str> = proposal.conditions().iter().map(|c| c.id.as_str()).collect();
    ids.sort_by(|a, b| natural_cmp(a, b));
    for _ in 0..cfg.max_chain_depth {
        let fulfilled: HashSet<String> =
            fulfillments.iter().filter(|f| f.proposal_id == proposal.id()).map(|f| f.condition_id.clone()).collect();
        let mut added = Vec::new();
        for id in &ids {
            if fulfilled.contains(*id) {
                continue;
            }
            let preds = proposal.predecessors(id);
            if preds.is_empty() || !preds.iter().all(|p| fulfilled.contains(*p)) {
                continue;
            }
            let premise = preds
                .iter()
                .map(|p| proposal.condition(p).expect("validated edge").statement.as_str())
                .collect::<Vec<_>>()
                .join("; ");
            let hypothesis = &proposal.condition(id).expect("listed id").statement;
            let score = nli.nli_score(&premise, hypothesis)?.entail;
            if let Some(strength) = cfg.classify(score) {
                added.push(Fulfillment {
                    proposal_id: proposal.id().to_owned(),
                    condition_id: (*id).to_owned(),
                    support: Support::Conditions(preds.iter().map(|p| (*p).to_owned()).collect()),
                    score,
                    strength,
                });
            }
        }
        if added.is_empty() {
            break;
        }
        fulfillments.extend(added);
    }
    Ok(fulfillments)
}

/// Clue fulfillment for every condition of every proposal followed by chain
/// deduction inside each proposal.
pub fn fulfill_proposals(
    clues: &[VisualClue],
    proposals: &[AbductionProposal],
    cfg: &FulfillmentConfig,
    nli: &dyn EntailmentScorer,
) -> Result<Vec<Fulfillment>, ReasonerError> {
    let conditions: Vec<DynamicCondition> = proposals.iter().flat_map(|p| p.conditions().iter().cloned()).collect();
    let direct = fulfill_conditions(clues, &conditions, cfg, nli)?;
    let mut by_proposal: HashMap<&str, Vec<Fulfillment>> = HashMap::new();
    for f in direct {
        let pid = proposals.iter().find(|p| p.id() == f.proposal_id).map(|p| p.id()).expect("condition from proposal");
        by_proposal.entry(pid).or_default().push(f);
    }
    let mut out = Vec::new();
    for p in proposals {
        let own = by_proposal.remove(p.id()).unwrap_or_default();
        out.extend(chain_deduce(p, own, cfg, nli)?);
    }
    Ok(out)
}
