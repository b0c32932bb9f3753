//! Deterministic stand-ins for the model backends.
//!
//! These are pure functions of their inputs and are meant for tests, the
//! bundled fixtures and offline demos. [`RuleNli`]'s containment rule is a
//! test device and says nothing about real entailment quality.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    check_nli_inputs, BackendError, ClueGenRequest, ClueGenerator, EntailmentScorer, NliScores, TextGenRequest,
    TextGenResponse, TextGenerator,
};
use crate::clues::build_clue_prompt;
use crate::domain::{canon, QaInstance};

/// A scripted reply: text, or a simulated transport failure.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Reply {
    Text(String),
    Fail(String),
}

impl Reply {
    fn into_response(self) -> Result<TextGenResponse, BackendError> {
        match self {
            Reply::Text(t) => Ok(TextGenResponse::completed(t)),
            Reply::Fail(msg) => Err(BackendError::Transport(msg)),
        }
    }
}

/// Text backend answering from a lookup table. Exact prompt matches win;
/// otherwise the first rule whose fragments all occur in the prompt is used.
#[derive(Debug, Clone, Default)]
pub struct ScriptedTextGen {
    id: String,
    exact: HashMap<String, Reply>,
    rules: Vec<(Vec<String>, Reply)>,
    fallback: Option<String>,
}

impl ScriptedTextGen {
    pub fn new(id: impl Into<String>) -> Self {
        Self { id: format!("scripted:{}", id.into()), ..Self::default() }
    }

    pub fn with(mut self, prompt: impl Into<String>, text: impl Into<String>) -> Self {
        self.exact.insert(prompt.into(), Reply::Text(text.into()));
        self
    }

    pub fn failing_on(mut self, prompt: impl Into<String>) -> Self {
        self.exact.insert(prompt.into(), Reply::Fail("scripted failure".into()));
        self
    }

    pub fn with_rule<S: Into<String>>(
        mut self,
        fragments: impl IntoIterator<Item = S>,
        text: impl Into<String>,
    ) -> Self {
        self.rules.push((fragments.into_iter().map(Into::into).collect(), Reply::Text(text.into())));
        self
    }

    pub fn failing_on_rule<S: Into<String>>(mut self, fragments: impl IntoIterator<Item = S>) -> Self {
        self.rules.push((fragments.into_iter().map(Into::into).collect(), Reply::Fail("scripted failure".into())));
        self
    }

    pub fn with_fallback(mut self, text: impl Into<String>) -> Self {
        self.fallback = Some(text.into());
        self
    }

    fn lookup(&self, prompt: &str) -> Option<Reply> {
        if let Some(r) = self.exact.get(prompt) {
            return Some(r.clone());
        }
        self.rules
            .iter()
            .find(|(frags, _)| frags.iter().all(|f| prompt.contains(f.as_str())))
            .map(|(_, r)| r.clone())
            .or_else(|| self.fallback.clone().map(Reply::Text))
    }
}

impl TextGenerator for ScriptedTextGen {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn generate_text(&self, req: &TextGenRequest) -> Result<TextGenResponse, BackendError> {
        req.validate()?;
        self.lookup(&req.prompt)
            .ok_or_else(|| BackendError::Protocol(format!("no scripted reply for prompt {:?}", req.prompt)))?
            .into_response()
    }
}

/// Text backend computed by a closure.
pub struct FnTextGen<F> {
    id: String,
    f: F,
}

impl<F> FnTextGen<F>
where
    F: Fn(&str) -> Result<String, BackendError> + Send + Sync,
{
    pub fn new(id: impl Into<String>, f: F) -> Self {
        Self { id: format!("fn:{}", id.into()), f }
    }
}

impl<F> TextGenerator for FnTextGen<F>
where
    F: Fn(&str) -> Result<String, BackendError> + Send + Sync,
{
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn generate_text(&self, req: &TextGenRequest) -> Result<TextGenResponse, BackendError> {
        req.validate()?;
        (self.f)(&req.prompt).map(TextGenResponse::completed)
    }
}

/// Clue backend keyed on `(image_ref, prompt)`, with a per-image fallback.
#[derive(Debug, Clone, Default)]
pub struct ScriptedClueGen {
    id: String,
    exact: HashMap<(String, String), Reply>,
    by_image: HashMap<String, Reply>,
}

impl ScriptedClueGen {
    pub fn new(id: impl Into<String>) -> Self {
        Self { id: format!("scripted:{}", id.into()), ..Self::default() }
    }

    pub fn with(mut self, image_ref: impl Into<String>, prompt: impl Into<String>, text: impl Into<String>) -> Self {
        self.exact.insert((image_ref.into(), prompt.into()), Reply::Text(text.into()));
        self
    }

    pub fn with_image(mut self, image_ref: impl Into<String>, text: impl Into<String>) -> Self {
        self.by_image.insert(image_ref.into(), Reply::Text(text.into()));
        self
    }

    pub fn failing_on_image(mut self, image_ref: impl Into<String>) -> Self {
        self.by_image.insert(image_ref.into(), Reply::Fail("scripted failure".into()));
        self
    }
}

impl ClueGenerator for ScriptedClueGen {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn generate_clues_raw(&self, req: &ClueGenRequest) -> Result<TextGenResponse, BackendError> {
        req.validate()?;
        self.exact
            .get(&(req.image_ref.clone(), req.prompt.clone()))
            .or_else(|| self.by_image.get(&req.image_ref))
            .cloned()
            .ok_or_else(|| BackendError::Protocol(format!("no scripted clues for {}", req.image_ref)))?
            .into_response()
    }
}

/// Serves a dataset's gold clue annotations through the clue-generator
/// interface. Image content is ignored.
#[derive(Debug, Clone, Default)]
pub struct GoldClueBackend {
    clues: HashMap<(String, String), Vec<String>>,
}

impl GoldClueBackend {
    pub fn from_instances<'a>(instances: impl IntoIterator<Item = &'a QaInstance>) -> Self {
        let clues = instances
            .into_iter()
            .filter_map(|inst| {
                let clues = inst.gold_clues.clone()?;
                let prompt = build_clue_prompt(&inst.question).ok()?;
                Some(((inst.image_ref.clone(), prompt), clues))
            })
            .collect();
        Self { clues }
    }
}

impl ClueGenerator for GoldClueBackend {
    fn backend_id(&self) -> &str {
        "gold"
    }

    fn generate_clues_raw(&self, req: &ClueGenRequest) -> Result<TextGenResponse, BackendError> {
        req.validate()?;
        let clues = self
            .clues
            .get(&(req.image_ref.clone(), req.prompt.clone()))
            .ok_or_else(|| BackendError::UnknownInstance(format!("{} / {}", req.image_ref, req.prompt)))?;
        Ok(TextGenResponse::completed(clues.join("\n")))
    }
}

fn tokens(text: &str) -> BTreeSet<String> {
    canon(text).split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_owned).collect()
}

/// Rule-based entailment for tests and demos.
///
/// * canonical premise contains canonical hypothesis: entail 1.0
/// * no shared tokens: neutral 1.0
/// * otherwise entail = 0.6 × the fraction of hypothesis tokens found in the
///   premise, remainder neutral
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleNli;

impl RuleNli {
    pub fn new() -> Self {
        RuleNli
    }

    pub fn score(premise: &str, hypothesis: &str) -> NliScores {
        let (p, h) = (canon(premise), canon(hypothesis));
        if !h.is_empty() && p.contains(&h) {
            return NliScores::entailed();
        }
        let (pt, ht) = (tokens(&p), tokens(&h));
        if ht.is_empty() {
            return NliScores::neutral();
        }
        let shared = ht.intersection(&pt).count();
        if shared == 0 {
            return NliScores::neutral();
        }
        let entail = 0.6 * shared as f64 / ht.len() as f64;
        NliScores { entail, neutral: 1.0 - entail, contradict: 0.0 }
    }
}

impl EntailmentScorer for RuleNli {
    fn backend_id(&self) -> &str {
        "rule-nli"
    }

    fn nli_score(&self, premise: &str, hypothesis: &str) -> Result<NliScores, BackendError> {
        check_nli_inputs(premise, hypothesis)?;
        Ok(Self::score(premise, hypothesis))
    }
}

/// Entailment table keyed on canonical `(premise, hypothesis)`. Unlisted
/// pairs fall back to [`RuleNli`], or score neutral 1.0 when strict.
#[derive(Debug, Clone, Default)]
pub struct ScriptedNli {
    id: String,
    table: HashMap<(String, String), NliScores>,
    strict: bool,
}

impl ScriptedNli {
    pub fn new(id: impl Into<String>) -> Self {
        Self { id: format!("scripted:{}", id.into()), ..Self::default() }
    }

    pub fn strict(id: impl Into<String>) -> Self {
        Self { strict: true, ..Self::new(id) }
    }

    pub fn with(mut self, premise: &str, hypothesis: &str, scores: NliScores) -> Self {
        self.insert(premise, hypothesis, scores);
        self
    }

    pub fn insert(&mut self, premise: &str, hypothesis: &str, scores: NliScores) {
        self.table.insert((canon(premise), canon(hypothesis)), scores);
    }

    /// Shorthand for an entailment probability with the remainder neutral.
    pub fn with_entail(self, premise: &str, hypothesis: &str, entail: f64) -> Self {
        self.with(premise, hypothesis, NliScores { entail, neutral: 1.0 - entail, contradict: 0.0 })
    }
}

impl EntailmentScorer for ScriptedNli {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn nli_score(&self, premise: &str, hypothesis: &str) -> Result<NliScores, BackendError> {
        check_nli_inputs(premise, hypothesis)?;
        match self.table.get(&(canon(premise), canon(hypothesis))) {
            Some(s) => Ok(*s),
            None if self.strict => Ok(NliScores::neutral()),
            None => Ok(RuleNli::score(premise, hypothesis)),
        }
    }
}

/// On-disk description of a full set of mock backends, used by the bundled
/// fixtures and the `scripted` backend kind of the run configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    #[serde(default)]
    pub text: Vec<TextRule>,
    #[serde(default)]
    pub clues: Vec<ClueRule>,
    #[serde(default)]
    pub nli: Vec<NliRule>,
    /// When true, unlisted NLI pairs score neutral instead of using the rule.
    #[serde(default)]
    pub strict_nli: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextRule {
    /// Every fragment must occur in the prompt.
    pub contains: Vec<String>,
    #[serde(default)]
    pub text: Option<String>,
    /// Simulated transport failure instead of a reply.
    #[serde(default)]
    pub fail: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClueRule {
    pub image_ref: String,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub fail: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NliRule {
    pub premise: String,
    pub hypothesis: String,
    pub entail: f64,
    #[serde(default)]
    pub neutral: Option<f64>,
    #[serde(default)]
    pub contradict: f64,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Storage(format!("cannot read mock script {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| BackendError::Protocol(format!("invalid mock script {}: {e}", path.display())))
    }

    pub fn text_backend(&self, id: &str) -> ScriptedTextGen {
        self.text.iter().fold(ScriptedTextGen::new(id), |g, r| match (&r.text, r.fail) {
            (_, true) => g.failing_on_rule(r.contains.clone()),
            (Some(t), false) => g.with_rule(r.contains.clone(), t.clone()),
            (None, false) => g.with_rule(r.contains.clone(), ""),
        })
    }

    pub fn clue_backend(&self, id: &str) -> ScriptedClueGen {
        self.clues.iter().fold(ScriptedClueGen::new(id), |g, r| match (&r.text, r.fail) {
            (_, true) => g.failing_on_image(r.image_ref.clone()),
            (t, false) => g.with_image(r.image_ref.clone(), t.clone().unwrap_or_default()),
        })
    }

    pub fn nli_backend(&self, id: &str) -> Result<ScriptedNli, BackendError> {
        let mut nli = if self.strict_nli { ScriptedNli::strict(id) } else { ScriptedNli::new(id) };
        for r in &self.nli {
            let neutral = r.neutral.unwrap_or(1.0 - r.entail - r.contradict);
            nli.insert(&r.premise, &r.hypothesis, NliScores::new(r.entail, neutral, r.contradict)?);
        }
        Ok(nli)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_text_echoes_table() {
        let g = ScriptedTextGen::new("t").with("P", "yes\nno");
        let r = g.generate_text(&TextGenRequest::new("P")).unwrap();
        assert_eq!(r.text, "yes\nno");
        assert_eq!(r.finish_reason, super::super::FinishReason::Stop);
        assert!(matches!(g.generate_text(&TextGenRequest::new("Q")), Err(BackendError::Protocol(_))));
    }

    #[test]
    fn scripted_rules_and_failures() {
        let g = ScriptedTextGen::new("t")
            .with_rule(["Question: A", "Answer: yes"], "C1: x\nDONE")
            .failing_on_rule(["Question: B"])
            .with_fallback("- yes");
        assert_eq!(g.generate_text(&TextGenRequest::new("..Question: A\nAnswer: yes")).unwrap().text, "C1: x\nDONE");
        assert!(matches!(g.generate_text(&TextGenRequest::new("Question: B")), Err(BackendError::Transport(_))));
        assert_eq!(g.generate_text(&TextGenRequest::new("other")).unwrap().text, "- yes");
    }

    #[test]
    fn gold_backend_passthrough() {
        let inst = QaInstance::new("q1", "img/1.jpg", "Is it raining?")
            .with_clues(["a man holds an umbrella", "the ground is wet"]);
        let gold = GoldClueBackend::from_instances([&inst]);
        let req = ClueGenRequest::new("img/1.jpg", build_clue_prompt("Is it raining?").unwrap());
        assert_eq!(gold.generate_clues_raw(&req).unwrap().text, "a man holds an umbrella\nthe ground is wet");
        let other = ClueGenRequest::new("img/2.jpg", "Question: x Clues:");
        assert!(matches!(gold.generate_clues_raw(&other), Err(BackendError::UnknownInstance(_))));
    }

    #[test]
    fn scripted_clues_keyed_on_image_and_prompt() {
        let g = ScriptedClueGen::new("c").with("i1", "p1", "a\nb").with_image("i2", "c");
        assert_eq!(g.generate_clues_raw(&ClueGenRequest::new("i1", "p1")).unwrap().text, "a\nb");
        assert_eq!(g.generate_clues_raw(&ClueGenRequest::new("i2", "anything")).unwrap().text, "c");
        assert!(g.generate_clues_raw(&ClueGenRequest::new("i1", "p2")).is_err());
    }

    #[test]
    fn rule_nli() {
        let s = RuleNli.nli_score("A man holds an umbrella; the ground is wet.", "the ground is wet").unwrap();
        assert_eq!(s, NliScores::entailed());
        let s = RuleNli.nli_score("a dog", "cats sleep").unwrap();
        assert_eq!(s, NliScores::neutral());
        let s = RuleNli.nli_score("wet ground", "the ground is wet").unwrap();
        assert!((s.entail - 0.6 * 2.0 / 4.0).abs() < 1e-12);
        assert!((s.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scripted_nli_table() {
        let scores = NliScores::new(0.92, 0.05, 0.03).unwrap();
        let nli = ScriptedNli::new("n").with("P.", "H", scores);
        assert_eq!(nli.nli_score("p", "h").unwrap(), scores);
        assert_eq!(nli.nli_score("x y", "x y").unwrap(), NliScores::entailed());
        let strict = ScriptedNli::strict("n");
        assert_eq!(strict.nli_score("x y", "x y").unwrap(), NliScores::neutral());
    }

    #[test]
    fn mock_script_builds_backends() {
        let script: MockScript = serde_json::from_str(
            r#"{
                "text": [{"contains": ["Q1"], "text": "- yes"}, {"contains": ["Q2"], "fail": true}],
                "clues": [{"image_ref": "i1", "text": "a\nb"}],
                "nli": [{"premise": "a", "hypothesis": "b", "entail": 0.7}]
            }"#,
        )
        .unwrap();
        let t = script.text_backend("m");
        assert_eq!(t.generate_text(&TextGenRequest::new("Q1")).unwrap().text, "- yes");
        assert!(t.generate_text(&TextGenRequest::new("Q2")).is_err());
        let c = script.clue_backend("m");
        assert_eq!(c.generate_clues_raw(&ClueGenRequest::new("i1", "p")).unwrap().text, "a\nb");
        let n = script.nli_backend("m").unwrap();
        assert!((n.nli_score("a", "b").unwrap().entail - 0.7).abs() < 1e-12);
    }
}
