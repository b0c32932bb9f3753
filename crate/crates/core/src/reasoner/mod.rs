//! Symbolic reasoning over abduction proposals and visual clues.
//!
//! 1. [`fulfill_conditions`] scores every condition against clue
//!    combinations with the entailment backend.
//! 2. [`chain_deduce`] fulfills conditions from already fulfilled
//!    predecessors inside a proposal.
//! 3. [`build_graph`] assembles clue, condition and answer nodes with
//!    support, deduction and conclusion edges.
//! 4. [`enumerate_paths`] lists every clue-to-answer path and [`vote`] picks
//!    the answer with the most of them.
//!
//! Edges at or above `tau_strong` are strong; those in `[tau_weak,
//! tau_strong)` are weak and only break ties among strong counts.

mod export;
mod fulfill;
mod graph;
mod vote;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::BackendError;

pub use export::{to_dot, to_json, GraphDocument};
pub use fulfill::{chain_deduce, clue_subsets, fulfill_conditions, fulfill_proposals};
pub use graph::{
    answer_node_id, build_graph, condition_node_id, enumerate_paths, Edge, EdgeKind, Node, PathStep, ReasoningGraph,
    ReasoningPath,
};
pub use vote::{explain, format_path, vote, AnswerTally, Prediction};

#[derive(Debug, Error)]
pub enum ReasonerError {
    #[error("no visual clues to reason from")]
    NoClues,
    #[error("inconsistent input: {0}")]
    InconsistentInput(String),
    #[error("graph has no answer nodes")]
    NoAnswer,
    #[error("no answer node `{0}`")]
    UnknownAnswer(String),
    #[error("reasoning graph has a cycle through `{0}`")]
    Cycle(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FulfillmentConfig {
    pub tau_strong: f64,
    pub tau_weak: f64,
    /// Largest clue combination scored as one premise.
    pub max_subset_size: usize,
    pub max_chain_depth: usize,
}

impl Default for FulfillmentConfig {
    fn default() -> Self {
        Self { tau_strong: 0.8, tau_weak: 0.5, max_subset_size: 3, max_chain_depth: 4 }
    }
}

impl FulfillmentConfig {
    pub fn validate(&self) -> Result<(), ReasonerError> {
        if !(self.tau_strong > 0.0 && self.tau_strong <= 1.0) {
            return Err(ReasonerError::Config(format!("tau_strong {} outside (0, 1]", self.tau_strong)));
        }
        if !(self.tau_weak > 0.0 && self.tau_weak < self.tau_strong) {
            return Err(ReasonerError::Config(format!(
                "tau_weak {} outside (0, tau_strong = {})",
                self.tau_weak, self.tau_strong
            )));
        }
        if self.max_subset_size == 0 || self.max_chain_depth == 0 {
            return Err(ReasonerError::Config("max_subset_size and max_chain_depth must be positive".into()));
        }
        Ok(())
    }

    /// `None` below `tau_weak`.
    pub fn classify(&self, score: f64) -> Option<Strength> {
        if score >= self.tau_strong {
            Some(Strength::Strong)
        } else if score >= self.tau_weak {
            Some(Strength::Weak)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strength {
    Strong,
    Weak,
}

/// What a condition was deduced from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    /// Clue ids, ascending.
    Clues(Vec<String>),
    /// Predecessor condition ids within the same proposal, ascending.
    Conditions(Vec<String>),
}

impl Support {
    pub fn ids(&self) -> &[String] {
        match self {
            Support::Clues(ids) | Support::Conditions(ids) => ids,
        }
    }
}

/// An entailment judgment that makes a condition true.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fulfillment {
    pub proposal_id: String,
    pub condition_id: String,
    pub support: Support,
    pub score: f64,
    pub strength: Strength,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_bounds() {
        assert!(FulfillmentConfig::default().validate().is_ok());
        let bad = FulfillmentConfig { tau_weak: 0.9, ..FulfillmentConfig::default() };
        assert!(bad.validate().is_err());
        let bad = FulfillmentConfig { tau_strong: 1.5, ..FulfillmentConfig::default() };
        assert!(bad.validate().is_err());
        let bad = FulfillmentConfig { max_subset_size: 0, ..FulfillmentConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn classification_tiers() {
        let cfg = FulfillmentConfig::default();
        assert_eq!(cfg.classify(0.8), Some(Strength::Strong));
        assert_eq!(cfg.classify(0.79), Some(Strength::Weak));
        assert_eq!(cfg.classify(0.5), Some(Strength::Weak));
        assert_eq!(cfg.classify(0.49), None);
    }
}
