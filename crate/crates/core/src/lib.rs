//! Answer visual questions by proposing what would have to be true for each
//! candidate answer, checking those conditions against visual clues with an
//! entailment model, and voting over the resulting reasoning paths.

pub mod abduction;
pub mod backends;
pub mod cli;
pub mod clues;
pub mod domain;
pub mod evalkit;
pub mod reasoner;
pub mod templates;
