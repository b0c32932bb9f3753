//! Dataset loading, answer matching, the full-pipeline evaluation and the
//! single-call ablation baselines.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abduction::{self, AbductionConfig, AbductionError, FewShotExemplar};
use crate::backends::{BackendError, ClueGenerator, EntailmentScorer, TextGenRequest, TextGenerator};
use crate::clues::{self, ClueError, ClueSource, CLUE_SEPARATOR};
use crate::domain::{canon, AbductionProposal, AnswerCandidate, AnswerSource, QaInstance, VisualClue};
use crate::reasoner::{
    self, build_graph, enumerate_paths, format_path, Fulfillment, FulfillmentConfig, Prediction, ReasonerError,
    ReasoningGraph,
};
use crate::templates;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Schema { line: usize, msg: String },
    #[error("instance `{id}` has no {field}")]
    MissingGold { id: String, field: &'static str },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Abduction(#[from] AbductionError),
    #[error(transparent)]
    Clues(#[from] ClueError),
    #[error(transparent)]
    Reasoner(#[from] ReasonerError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Parses dataset JSONL. Blank lines are skipped but still counted for line
/// numbers.
pub fn parse_dataset(text: &str) -> Result<Vec<QaInstance>, EvalError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let inst: QaInstance =
            serde_json::from_str(line).map_err(|e| EvalError::Schema { line: line_no, msg: e.to_string() })?;
        inst.validate().map_err(|e| EvalError::Schema { line: line_no, msg: e.to_string() })?;
        if !seen.insert(inst.id.clone()) {
            return Err(EvalError::Schema { line: line_no, msg: format!("duplicate id `{}`", inst.id) });
        }
        out.push(inst);
    }
    Ok(out)
}

pub fn load_dataset(path: &Path) -> Result<Vec<QaInstance>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io { path: path.to_owned(), source })?;
    parse_dataset(&text)
}

fn strip_article(s: &str) -> &str {
    for article in ["a ", "an ", "the "] {
        if let Some(rest) = s.strip_prefix(article) {
            return rest;
        }
    }
    s
}

/// Canonical equality after dropping one leading article. Numerals are not
/// normalized: `two` does not match `2`.
pub fn match_answer(predicted: &str, gold: &str) -> bool {
    let (p, g) = (canon(predicted), canon(gold));
    strip_article(&p) == strip_article(&g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    QuestionOnly,
    Clues,
    CluesPlusInferences,
    FullPipeline,
}

impl AblationMode {
    pub const ALL: [AblationMode; 4] = [
        AblationMode::QuestionOnly,
        AblationMode::Clues,
        AblationMode::CluesPlusInferences,
        AblationMode::FullPipeline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AblationMode::QuestionOnly => "question_only",
            AblationMode::Clues => "clues",
            AblationMode::CluesPlusInferences => "clues_plus_inferences",
            AblationMode::FullPipeline => "full_pipeline",
        }
    }
}

impl std::str::FromStr for AblationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|m| m.as_str()).collect();
            format!("unknown mode `{s}` (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemResult {
    pub id: String,
    pub predicted: Option<String>,
    pub gold: String,
    #[serde(rename = "match")]
    pub matched: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Excluded {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub per_item: Vec<ItemResult>,
    /// Instances left out of `total`, such as those missing gold fields.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excluded: Vec<Excluded>,
}

impl Metrics {
    pub fn from_items(per_item: Vec<ItemResult>, excluded: Vec<Excluded>) -> Self {
        let total = per_item.len();
        let correct = per_item.iter().filter(|r| r.matched).count();
        let accuracy = if total == 0 { 0.0 } else { correct as f64 / total as f64 };
        Self { total, correct, accuracy, per_item, excluded }
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        serde_json::from_str(text).map_err(|e| EvalError::Schema { line: e.line(), msg: e.to_string() })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metrics serialize");
        s.push('\n');
        s
    }
}

fn ablation_exemplar_pool() -> Vec<QaInstance> {
    abduction::BUNDLED_EXEMPLARS
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("bundled exemplar is valid"))
        .collect()
}

fn ablation_block(inst: &QaInstance, mode: AblationMode) -> Result<String, EvalError> {
    let missing = |field| EvalError::MissingGold { id: inst.id.clone(), field };
    let mut block = format!("Question: {}\n", inst.question.trim());
    if matches!(mode, AblationMode::Clues | AblationMode::CluesPlusInferences) {
        let clues = inst.gold_clues.as_ref().filter(|c| !c.is_empty()).ok_or_else(|| missing("gold_clues"))?;
        let _ = writeln!(block, "Clues: {}", clues.iter().map(|c| c.trim()).collect::<Vec<_>>().join(CLUE_SEPARATOR));
    }
    if mode == AblationMode::CluesPlusInferences {
        let inf = inst.gold_inferences.as_ref().filter(|c| !c.is_empty()).ok_or_else(|| missing("gold_inferences"))?;
        let _ =
            writeln!(block, "Inferences: {}", inf.iter().map(|c| c.trim()).collect::<Vec<_>>().join(CLUE_SEPARATOR));
    }
    Ok(block)
}

/// Prompt for one ablation call: `shots` worked exemplars followed by the
/// instance, each showing exactly the fields of `mode`.
pub fn build_ablation_prompt(
    instance: &QaInstance,
    mode: AblationMode,
    exemplars: &[QaInstance],
) -> Result<String, EvalError> {
    if mode == AblationMode::FullPipeline {
        return Err(EvalError::Config("full_pipeline is not a single-call ablation mode".into()));
    }
    let mut examples = String::new();
    for ex in exemplars {
        let gold =
            ex.gold_answer.as_deref().ok_or_else(|| EvalError::MissingGold { id: ex.id.clone(), field: "answer" })?;
        let _ = write!(examples, "{}Answer: {}\n\n", ablation_block(ex, mode)?, gold.trim());
    }
    let block = ablation_block(instance, mode)?;
    Ok(templates::ABLATION.render(&[("examples", &examples), ("instance", &block)]))
}

/// First line of a reply, without a leading `Answer:` label.
fn first_answer_line(text: &str) -> String {
    let line = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    let line = line.strip_prefix("Answer:").unwrap_or(line);
    line.trim().trim_start_matches("- ").trim().to_owned()
}

/// Single-call baseline. Instances lacking the gold fields the mode needs
/// are excluded from the total; backend failures count as incorrect.
pub fn run_ablation(
    dataset: &[QaInstance],
    mode: AblationMode,
    shots: usize,
    gen: &dyn TextGenerator,
) -> Result<Metrics, EvalError> {
    let pool = ablation_exemplar_pool();
    let exemplars = pool
        .get(..shots)
        .ok_or_else(|| EvalError::Config(format!("{shots} exemplars requested but only {} available", pool.len())))?;
    if mode == AblationMode::FullPipeline {
        return Err(EvalError::Config("full_pipeline is evaluated with run_pipeline".into()));
    }
    let outcomes: Vec<Result<ItemResult, Excluded>> = dataset
        .par_iter()
        .map(|inst| {
            let excluded = |e: EvalError| Excluded { id: inst.id.clone(), reason: e.to_string() };
            let gold = inst
                .gold_answer
                .clone()
                .ok_or_else(|| excluded(EvalError::MissingGold { id: inst.id.clone(), field: "answer" }))?;
            let prompt = build_ablation_prompt(inst, mode, exemplars).map_err(excluded)?;
            Ok(match gen.generate_text(&TextGenRequest::new(prompt).with_max_tokens(16)) {
                Ok(reply) => {
                    let predicted = first_answer_line(&reply.text);
                    let matched = match_answer(&predicted, &gold);
                    ItemResult { id: inst.id.clone(), predicted: Some(predicted), gold, matched, note: None }
                }
                Err(e) => {
                    ItemResult { id: inst.id.clone(), predicted: None, gold, matched: false, note: Some(e.to_string()) }
                }
            })
        })
        .collect();
    let mut items = Vec::new();
    let mut excluded = Vec::new();
    for o in outcomes {
        match o {
            Ok(item) => items.push(item),
            Err(x) => {
                log::warn!("excluded {}: {}", x.id, x.reason);
                excluded.push(x);
            }
        }
    }
    Ok(Metrics::from_items(items, excluded))
}

/// How the final answer is chosen from the reasoning graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Path-count majority vote.
    #[default]
    Vote,
    /// The text backend picks an answer after reading every reasoning path.
    Text,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub abduction: AbductionConfig,
    pub fulfillment: FulfillmentConfig,
    pub clue_source: ClueSource,
    pub selection: Selection,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        self.abduction.validate()?;
        self.fulfillment.validate()?;
        Ok(())
    }
}

#[derive(Clone, Copy)]
pub struct Backends<'a> {
    pub text: &'a dyn TextGenerator,
    pub clues: Option<&'a dyn ClueGenerator>,
    pub nli: &'a dyn EntailmentScorer,
}

/// Answer candidates for an instance: its answer choices when present,
/// otherwise generated by the text backend.
pub fn candidate_answers(
    inst: &QaInstance,
    cfg: &PipelineConfig,
    exemplars: &[FewShotExemplar],
    text: &dyn TextGenerator,
) -> Result<Vec<AnswerCandidate>, EvalError> {
    match inst.answer_choices.as_ref().filter(|c| !c.is_empty()) {
        Some(choices) => {
            let mut seen = HashSet::new();
            let mut out = Vec::new();
            for c in choices {
                let cand = AnswerCandidate::new(c, AnswerSource::DatasetChoice)
                    .map_err(|e| EvalError::Config(format!("instance `{}`: {e}", inst.id)))?;
                if seen.insert(cand.text().to_owned()) {
                    out.push(cand);
                }
            }
            Ok(out)
        }
        None => Ok(abduction::propose_answers(text, &inst.question, exemplars, &cfg.abduction)?),
    }
}

/// Every intermediate product of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub answers: Vec<AnswerCandidate>,
    pub proposals: Vec<AbductionProposal>,
    pub clues: Vec<VisualClue>,
    pub fulfillments: Vec<Fulfillment>,
    pub graph: ReasoningGraph,
    pub prediction: Prediction,
    /// The final answer; differs from `prediction.answer` only under text
    /// selection.
    pub selected: String,
}

/// Runs the whole pipeline for one instance.
pub fn answer_instance(inst: &QaInstance, cfg: &PipelineConfig, backends: Backends<'_>) -> Result<Trace, EvalError> {
    let exemplars = abduction::bundled_exemplars();
    let answers = candidate_answers(inst, cfg, &exemplars, backends.text)?;
    let proposals = abduction::propose_all(backends.text, &inst.question, &answers, &exemplars, &cfg.abduction)?;
    let clues = clues::get_clues(inst, cfg.clue_source, backends.clues)?;
    let fulfillments = reasoner::fulfill_proposals(&clues, &proposals, &cfg.fulfillment, backends.nli)?;
    let graph = build_graph(&clues, &proposals, &fulfillments)?;
    let prediction = reasoner::vote(&graph)?;
    let selected = match cfg.selection {
        Selection::Vote => prediction.answer.text().to_owned(),
        Selection::Text => select_with_text(inst, &graph, backends.text)?,
    };
    Ok(Trace { answers, proposals, clues, fulfillments, graph, prediction, selected })
}

/// Every path of every answer, one per line, grouped by answer.
pub fn describe_paths(graph: &ReasoningGraph) -> Result<String, EvalError> {
    let mut out = String::new();
    for answer in graph.answers() {
        let paths = enumerate_paths(graph, answer.text())?;
        if paths.is_empty() {
            let _ = writeln!(out, "{answer}: no valid path");
        }
        for p in paths {
            let _ = writeln!(out, "{answer}: {}", format_path(&p));
        }
    }
    Ok(out)
}

fn select_with_text(inst: &QaInstance, graph: &ReasoningGraph, text: &dyn TextGenerator) -> Result<String, EvalError> {
    let candidates: Vec<&str> = graph.answers().map(|a| a.text()).collect();
    let prompt = templates::SELECT_ANSWER.render(&[
        ("question", inst.question.trim()),
        ("candidates", &candidates.join(", ")),
        ("reasoning", describe_paths(graph)?.trim_end()),
    ]);
    let reply = text.generate_text(&TextGenRequest::new(prompt).with_max_tokens(16))?;
    let raw = first_answer_line(&reply.text);
    Ok(candidates.iter().find(|c| match_answer(&raw, c)).map(|c| (*c).to_owned()).unwrap_or_else(|| canon(&raw)))
}

/// One line of `results.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub id: String,
    pub question: String,
    pub gold: Option<String>,
    pub predicted: Option<String>,
    pub correct: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<Prediction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct PipelineItem {
    pub record: ResultRecord,
    pub trace: Option<Trace>,
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub metrics: Metrics,
    pub items: Vec<PipelineItem>,
}

impl PipelineRun {
    pub fn failures(&self) -> impl Iterator<Item = &ResultRecord> {
        self.items.iter().map(|i| &i.record).filter(|r| r.error.is_some())
    }

    pub fn results_jsonl(&self) -> String {
        self.items.iter().map(|i| serde_json::to_string(&i.record).expect("record serializes") + "\n").collect()
    }
}

/// Full pipeline over a dataset. Per-instance failures are scored as
/// incorrect and reported in the record's `error`; instances without a gold
/// answer are predicted but excluded from the metrics.
pub fn run_pipeline(
    dataset: &[QaInstance],
    cfg: &PipelineConfig,
    backends: Backends<'_>,
) -> Result<PipelineRun, EvalError> {
    cfg.validate()?;
    let items: Vec<PipelineItem> = dataset
        .par_iter()
        .map(|inst| {
            let outcome = answer_instance(inst, cfg, backends);
            let gold = inst.gold_answer.clone();
            let (predicted, error, trace) = match outcome {
                Ok(t) => (Some(t.selected.clone()), None, Some(t)),
                Err(e) => {
                    log::warn!("{}: {e}", inst.id);
                    (None, Some(e.to_string()), None)
                }
            };
            let correct = gold.as_ref().map(|g| predicted.as_ref().is_some_and(|p| match_answer(p, g)));
            let record = ResultRecord {
                id: inst.id.clone(),
                question: inst.question.clone(),
                gold,
                predicted,
                correct,
                prediction: trace.as_ref().map(|t| t.prediction.clone()),
                error,
            };
            PipelineItem { record, trace }
        })
        .collect();
    let mut per_item = Vec::new();
    let mut excluded = Vec::new();
    for item in &items {
        let r = &item.record;
        match &r.gold {
            Some(gold) => per_item.push(ItemResult {
                id: r.id.clone(),
                predicted: r.predicted.clone(),
                gold: gold.clone(),
                matched: r.correct == Some(true),
                note: r.error.clone(),
            }),
            None => excluded.push(Excluded { id: r.id.clone(), reason: "no gold answer".into() }),
        }
    }
    Ok(PipelineRun { metrics: Metrics::from_items(per_item, excluded), items })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

/// Metrics as an aligned plain-text table (columns id, predicted, gold,
/// match) followed by an accuracy line, or as JSON.
pub fn report(metrics: &Metrics, format: ReportFormat) -> String {
    if format == ReportFormat::Json {
        return metrics.to_json();
    }
    let header = ["id", "predicted", "gold", "match"];
    let rows: Vec<[String; 4]> = metrics
        .per_item
        .iter()
        .map(|r| {
            [
                r.id.clone(),
                r.predicted.clone().unwrap_or_else(|| "-".into()),
                r.gold.clone(),
                if r.matched { "yes".into() } else { "no".into() },
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let fmt_row = |cells: [&str; 4]| {
        let mut line = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i + 1 == cells.len() {
                line.push_str(cell);
            } else {
                let _ = write!(line, "{cell:<w$}  ", w = widths[i]);
            }
        }
        line
    };
    let mut out = fmt_row(header) + "\n";
    if rows.is_empty() {
        return out;
    }
    for row in &rows {
        out.push_str(&fmt_row([&row[0], &row[1], &row[2], &row[3]]));
        out.push('\n');
    }
    let _ = writeln!(out, "accuracy: {}/{} = {:.4}", metrics.correct, metrics.total, metrics.accuracy);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::FnTextGen;

    #[test]
    fn dataset_loading() {
        let text = r#"{"id":"a","image_ref":"i","question":"q?","answer":"yes"}

{"id":"b","image_ref":"i","question":"q?"}
{"id":"c","image_ref":"i","question":"q?","answer_choices":["x","y"]}"#;
        assert_eq!(parse_dataset(text).unwrap().len(), 3);

        let dup = "{\"id\":\"a\",\"image_ref\":\"i\",\"question\":\"q\"}\n{\"id\":\"a\",\"image_ref\":\"i\",\"question\":\"q\"}";
        assert!(matches!(parse_dataset(dup), Err(EvalError::Schema { line: 2, .. })));

        let missing = r#"{"id":"a","image_ref":"i"}"#;
        match parse_dataset(missing) {
            Err(EvalError::Schema { line: 1, msg }) => assert!(msg.contains("question"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(load_dataset(Path::new("/nonexistent/x.jsonl")), Err(EvalError::Io { .. })));
    }

    #[test]
    fn answer_matching() {
        assert!(match_answer("Yes.", "yes"));
        assert!(match_answer("the dog", "dog"));
        assert!(match_answer("An apple", "apple!"));
        assert!(!match_answer("two", "2"));
        assert!(!match_answer("theater", "ater"));
    }

    #[test]
    fn mode_names_round_trip() {
        for m in AblationMode::ALL {
            assert_eq!(m.as_str().parse::<AblationMode>().unwrap(), m);
            assert_eq!(serde_json::to_value(m).unwrap(), m.as_str());
        }
        assert!("vote".parse::<AblationMode>().is_err());
    }

    fn inst(i: usize) -> QaInstance {
        QaInstance::new(format!("q{i}"), format!("img{i}"), format!("Question number {i}?"))
            .with_answer(format!("gold{i}"))
            .with_clues([format!("clue {i}")])
            .with_inferences([format!("inference {i}")])
    }

    #[test]
    fn ablation_prompt_shows_only_mode_fields() {
        let q = inst(1);
        let p = build_ablation_prompt(&q, AblationMode::QuestionOnly, &[]).unwrap();
        assert!(p.contains("Question: Question number 1?\nAnswer:"));
        assert!(!p.contains("Clues:"));
        let p = build_ablation_prompt(&q, AblationMode::Clues, &[]).unwrap();
        assert!(p.contains("Clues: clue 1\nAnswer:") && !p.contains("Inferences:"));
        let p = build_ablation_prompt(&q, AblationMode::CluesPlusInferences, &[inst(2)]).unwrap();
        assert!(p.contains("Inferences: inference 2\nAnswer: gold2\n\nQuestion: Question number 1?"));
        assert!(p.ends_with("Inferences: inference 1\nAnswer:"));
    }

    #[test]
    fn ablation_counts_scripted_answers() {
        let data: Vec<QaInstance> = (0..10).map(inst).collect();
        // right on the first seven items, wrong on the remaining three
        let gen = FnTextGen::new("fn", |prompt: &str| {
            let n: usize = prompt.rsplit("Question number ").next().unwrap()[..1].parse().unwrap();
            Ok(if n < 7 { format!("gold{n}") } else { "nope".into() })
        });
        let m = run_ablation(&data, AblationMode::QuestionOnly, 0, &gen).unwrap();
        assert_eq!((m.total, m.correct), (10, 7));
        assert_eq!(m.accuracy, 0.7);
        assert_eq!(m.per_item.iter().filter(|r| r.matched).count() as f64 / m.total as f64, m.accuracy);
    }

    #[test]
    fn ablation_excludes_missing_gold() {
        let mut data: Vec<QaInstance> = (0..3).map(inst).collect();
        data[1].gold_clues = None;
        data[2].gold_answer = None;
        let gen = FnTextGen::new("fn", |_: &str| Ok("gold0".to_owned()));
        let m = run_ablation(&data, AblationMode::Clues, 2, &gen).unwrap();
        assert_eq!(m.total, 1);
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.excluded.len(), 2);
        assert!(run_ablation(&data, AblationMode::Clues, 99, &gen).is_err());
        assert!(run_ablation(&data, AblationMode::FullPipeline, 0, &gen).is_err());
    }

    #[test]
    fn backend_failures_are_incorrect() {
        let data = vec![inst(0)];
        let gen = FnTextGen::new("fn", |_: &str| Err(BackendError::Transport("down".into())));
        let m = run_ablation(&data, AblationMode::QuestionOnly, 0, &gen).unwrap();
        assert_eq!((m.total, m.correct), (1, 0));
        assert!(m.per_item[0].note.as_deref().unwrap().contains("down"));
    }

    #[test]
    fn empty_metrics_report() {
        let m = Metrics::from_items(vec![], vec![]);
        assert_eq!(m.accuracy, 0.0);
        assert_eq!(report(&m, ReportFormat::Text), "id  predicted  gold  match\n");
        assert_eq!(Metrics::from_json(&report(&m, ReportFormat::Json)).unwrap(), m);
    }

    #[test]
    fn text_report_aligns_columns() {
        let items = vec![
            ItemResult {
                id: "q1".into(),
                predicted: Some("yes".into()),
                gold: "yes".into(),
                matched: true,
                note: None,
            },
            ItemResult { id: "q10".into(), predicted: None, gold: "umbrella".into(), matched: false, note: None },
        ];
        let m = Metrics::from_items(items, vec![]);
        let expected = "id   predicted  gold      match\n\
                        q1   yes        yes       yes\n\
                        q10  -          umbrella  no\n\
                        accuracy: 1/2 = 0.5000\n";
        assert_eq!(report(&m, ReportFormat::Text), expected);
        assert_eq!(Metrics::from_json(&report(&m, ReportFormat::Json)).unwrap(), m);
    }
}
