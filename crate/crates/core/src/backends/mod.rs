//! Clients for the three model roles of the pipeline: a frozen text
//! generator, a multimodal clue generator and an entailment scorer.
//!
//! Every role is a small object-safe trait. Concrete implementations are
//! remote HTTP clients ([`http`]), deterministic mocks ([`mock`]) and the
//! gold-annotation clue source. [`cached`] wraps any of them with the
//! persistent [`cache::FileCache`], which is also what makes replay-only runs
//! possible.

pub mod cache;
pub mod cached;
pub mod http;
pub mod mock;
pub mod retry;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{CacheEntry, CacheStats, FileCache};
pub use cached::{CachePolicy, Cached};
pub use http::{HttpClueGen, HttpNli, HttpTextGen};
pub use mock::{FnTextGen, GoldClueBackend, MockScript, RuleNli, ScriptedClueGen, ScriptedNli, ScriptedTextGen};
pub use retry::RetryPolicy;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("replay-only cache has no entry for key {0}")]
    CacheMiss(String),
    #[error("no gold annotation for instance `{0}`")]
    UnknownInstance(String),
    #[error("storage error: {0}")]
    Storage(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextGenRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(rename = "stop")]
    pub stop_sequences: Vec<String>,
}

impl TextGenRequest {
    /// Greedy decoding with a 256 token budget.
    pub fn new(prompt: impl Into<String>) -> Self {
        Self { prompt: prompt.into(), temperature: 0.0, max_tokens: 256, stop_sequences: Vec::new() }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn with_stop(mut self, stop: impl Into<String>) -> Self {
        self.stop_sequences.push(stop.into());
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.prompt.is_empty() {
            return Err(BackendError::InvalidRequest("prompt is empty".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(BackendError::InvalidRequest(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextGenResponse {
    pub text: String,
    pub finish_reason: FinishReason,
}

impl TextGenResponse {
    /// A finished completion. An empty completion is reported as `length`
    /// since `stop` requires text.
    pub fn completed(text: impl Into<String>) -> Self {
        Self::new(text, FinishReason::Stop)
    }

    pub fn new(text: impl Into<String>, finish_reason: FinishReason) -> Self {
        let text = text.into();
        let finish_reason = match finish_reason {
            FinishReason::Stop if text.is_empty() => FinishReason::Length,
            other => other,
        };
        Self { text, finish_reason }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClueGenRequest {
    pub image_ref: String,
    pub prompt: String,
}

impl ClueGenRequest {
    pub fn new(image_ref: impl Into<String>, prompt: impl Into<String>) -> Self {
        Self { image_ref: image_ref.into(), prompt: prompt.into() }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.image_ref.is_empty() || self.prompt.is_empty() {
            return Err(BackendError::InvalidRequest("image_ref and prompt must be nonempty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NliRequest {
    pub premise: String,
    pub hypothesis: String,
}

/// Entailment probabilities over the three NLI labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliScores {
    pub entail: f64,
    pub neutral: f64,
    pub contradict: f64,
}

pub const NLI_SUM_TOLERANCE: f64 = 1e-6;

impl NliScores {
    pub fn new(entail: f64, neutral: f64, contradict: f64) -> Result<Self, BackendError> {
        let s = Self { entail, neutral, contradict };
        for v in [entail, neutral, contradict] {
            if !(0.0..=1.0).contains(&v) {
                return Err(BackendError::Protocol(format!("NLI score {v} outside [0, 1]")));
            }
        }
        if (s.sum() - 1.0).abs() > NLI_SUM_TOLERANCE {
            return Err(BackendError::Protocol(format!("NLI scores sum to {}", s.sum())));
        }
        Ok(s)
    }

    /// Rescales nonnegative scores to sum to one.
    pub fn normalized(entail: f64, neutral: f64, contradict: f64) -> Result<Self, BackendError> {
        let total = entail + neutral + contradict;
        let finite = [entail, neutral, contradict].iter().all(|v| v.is_finite() && *v >= 0.0);
        if !finite || total <= 0.0 {
            return Err(BackendError::Protocol(format!(
                "cannot normalize NLI scores ({entail}, {neutral}, {contradict})"
            )));
        }
        Self::new(entail / total, neutral / total, contradict / total)
    }

    pub fn entailed() -> Self {
        Self { entail: 1.0, neutral: 0.0, contradict: 0.0 }
    }

    pub fn neutral() -> Self {
        Self { entail: 0.0, neutral: 1.0, contradict: 0.0 }
    }

    pub fn sum(&self) -> f64 {
        self.entail + self.neutral + self.contradict
    }
}

/// The frozen text-generation model.
pub trait TextGenerator: Send + Sync {
    /// Stable identifier, part of every cache key.
    fn backend_id(&self) -> &str;
    fn generate_text(&self, req: &TextGenRequest) -> Result<TextGenResponse, BackendError>;
}

/// The multimodal visual clue generator. The engine never opens
/// `image_ref`; it is forwarded untouched.
pub trait ClueGenerator: Send + Sync {
    fn backend_id(&self) -> &str;
    fn generate_clues_raw(&self, req: &ClueGenRequest) -> Result<TextGenResponse, BackendError>;
}

pub trait EntailmentScorer: Send + Sync {
    fn backend_id(&self) -> &str;
    fn nli_score(&self, premise: &str, hypothesis: &str) -> Result<NliScores, BackendError>;
}

impl<T: TextGenerator + ?Sized> TextGenerator for &T {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }
    fn generate_text(&self, req: &TextGenRequest) -> Result<TextGenResponse, BackendError> {
        (**self).generate_text(req)
    }
}

impl<T: TextGenerator + ?Sized> TextGenerator for std::sync::Arc<T> {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }
    fn generate_text(&self, req: &TextGenRequest) -> Result<TextGenResponse, BackendError> {
        (**self).generate_text(req)
    }
}

impl<T: ClueGenerator + ?Sized> ClueGenerator for &T {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }
    fn generate_clues_raw(&self, req: &ClueGenRequest) -> Result<TextGenResponse, BackendError> {
        (**self).generate_clues_raw(req)
    }
}

impl<T: ClueGenerator + ?Sized> ClueGenerator for std::sync::Arc<T> {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }
    fn generate_clues_raw(&self, req: &ClueGenRequest) -> Result<TextGenResponse, BackendError> {
        (**self).generate_clues_raw(req)
    }
}

impl<T: EntailmentScorer + ?Sized> EntailmentScorer for &T {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }
    fn nli_score(&self, premise: &str, hypothesis: &str) -> Result<NliScores, BackendError> {
        (**self).nli_score(premise, hypothesis)
    }
}

impl<T: EntailmentScorer + ?Sized> EntailmentScorer for std::sync::Arc<T> {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }
    fn nli_score(&self, premise: &str, hypothesis: &str) -> Result<NliScores, BackendError> {
        (**self).nli_score(premise, hypothesis)
    }
}

pub(crate) fn check_nli_inputs(premise: &str, hypothesis: &str) -> Result<(), BackendError> {
    if premise.is_empty() || hypothesis.is_empty() {
        return Err(BackendError::InvalidRequest("premise and hypothesis must be nonempty".into()));
    }
    Ok(())
}
