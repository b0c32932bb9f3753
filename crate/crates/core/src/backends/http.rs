//! Blocking JSON-over-HTTP clients for remote model endpoints.
//!
//! Wire formats:
//!
//! | role | request body | response body |
//! |------|--------------|---------------|
//! | text | `{"prompt","temperature","max_tokens","stop"}` | `{"text","finish_reason"}` |
//! | multimodal | `{"image_ref","prompt"}` | `{"text","finish_reason"}` |
//! | entailment | `{"premise","hypothesis"}` | `{"entail","neutral","contradict"}` |
//!
//! Connection failures, 429 and 5xx replies are retried per [`RetryPolicy`];
//! other statuses and undecodable bodies are protocol errors.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    check_nli_inputs, BackendError, ClueGenRequest, ClueGenerator, EntailmentScorer, FinishReason, NliRequest,
    NliScores, RetryPolicy, TextGenRequest, TextGenResponse, TextGenerator,
};

#[derive(Debug, Clone)]
struct Endpoint {
    id: String,
    url: String,
    token: Option<String>,
    retry: RetryPolicy,
    agent: ureq::Agent,
}

impl Endpoint {
    fn new(url: &str) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(Duration::from_secs(10))
            .timeout(Duration::from_secs(120))
            .build();
        Self { id: format!("http:{url}"), url: url.to_owned(), token: None, retry: RetryPolicy::default(), agent }
    }

    fn post<Q: Serialize, R: DeserializeOwned>(&self, body: &Q) -> Result<R, BackendError> {
        self.retry.run(|_| {
            let mut req = self.agent.post(&self.url).set("Content-Type", "application/json");
            if let Some(token) = &self.token {
                req = req.set("Authorization", &format!("Bearer {token}"));
            }
            let body = serde_json::to_string(body).map_err(|e| BackendError::Protocol(e.to_string()))?;
            match req.send_string(&body) {
                Ok(resp) => {
                    let text = resp.into_string().map_err(|e| BackendError::Transport(e.to_string()))?;
                    serde_json::from_str(&text)
                        .map_err(|e| BackendError::Protocol(format!("malformed reply from {}: {e}", self.url)))
                }
                Err(ureq::Error::Status(code, _)) if code == 429 || code >= 500 => {
                    Err(BackendError::Transport(format!("{} answered {code}", self.url)))
                }
                Err(ureq::Error::Status(code, _)) => {
                    Err(BackendError::Protocol(format!("{} answered {code}", self.url)))
                }
                Err(ureq::Error::Transport(t)) => Err(BackendError::Transport(format!("{}: {t}", self.url))),
            }
        })
    }
}

macro_rules! endpoint_builders {
    ($ty:ident) => {
        impl $ty {
            pub fn new(url: &str) -> Self {
                Self { endpoint: Endpoint::new(url) }
            }

            /// Sends `Authorization: Bearer <token>` with every request.
            pub fn with_token(mut self, token: Option<String>) -> Self {
                self.endpoint.token = token;
                self
            }

            pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
                self.endpoint.retry = retry;
                self
            }

            /// Overrides the id used in cache keys (defaults to `http:<url>`).
            pub fn with_id(mut self, id: impl Into<String>) -> Self {
                self.endpoint.id = id.into();
                self
            }
        }
    };
}

#[derive(Debug, Clone)]
pub struct HttpTextGen {
    endpoint: Endpoint,
}

#[derive(Debug, Clone)]
pub struct HttpClueGen {
    endpoint: Endpoint,
}

#[derive(Debug, Clone)]
pub struct HttpNli {
    endpoint: Endpoint,
}

endpoint_builders!(HttpTextGen);
endpoint_builders!(HttpClueGen);
endpoint_builders!(HttpNli);

#[derive(Deserialize)]
struct WireText {
    text: String,
    finish_reason: String,
}

impl WireText {
    fn into_response(self) -> Result<TextGenResponse, BackendError> {
        let reason = match self.finish_reason.as_str() {
            "stop" => FinishReason::Stop,
            "length" => FinishReason::Length,
            "error" => FinishReason::Error,
            other => return Err(BackendError::Protocol(format!("unknown finish_reason `{other}`"))),
        };
        Ok(TextGenResponse::new(self.text, reason))
    }
}

#[derive(Deserialize)]
struct WireNli {
    entail: f64,
    neutral: f64,
    contradict: f64,
}

impl TextGenerator for HttpTextGen {
    fn backend_id(&self) -> &str {
        &self.endpoint.id
    }

    fn generate_text(&self, req: &TextGenRequest) -> Result<TextGenResponse, BackendError> {
        req.validate()?;
        self.endpoint.post::<_, WireText>(req)?.into_response()
    }
}

impl ClueGenerator for HttpClueGen {
    fn backend_id(&self) -> &str {
        &self.endpoint.id
    }

    fn generate_clues_raw(&self, req: &ClueGenRequest) -> Result<TextGenResponse, BackendError> {
        req.validate()?;
        self.endpoint.post::<_, WireText>(req)?.into_response()
    }
}

impl EntailmentScorer for HttpNli {
    fn backend_id(&self) -> &str {
        &self.endpoint.id
    }

    fn nli_score(&self, premise: &str, hypothesis: &str) -> Result<NliScores, BackendError> {
        check_nli_inputs(premise, hypothesis)?;
        let req = NliRequest { premise: premise.to_owned(), hypothesis: hypothesis.to_owned() };
        let w: WireNli = self.endpoint.post(&req)?;
        NliScores::normalized(w.entail, w.neutral, w.contradict)
    }
}
