//! The `avqa` command line: run configuration, backend wiring and the
//! subcommands. Exit status is 0 on success, 1 when any item failed and 2 on
//! configuration or input errors.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abduction::{self, AbductionConfig};
use crate::backends::{
    CachePolicy, Cached, ClueGenerator, EntailmentScorer, FileCache, GoldClueBackend, HttpClueGen, HttpNli,
    HttpTextGen, MockScript, RuleNli, TextGenerator,
};
use crate::clues::{self, ClueSource, TrainingStage, WeakSupervisionConfig};
use crate::domain::{fingerprint, AbductionProposal, AnswerCandidate, QaInstance, VisualClue};
use crate::evalkit::{self, AblationMode, Backends, EvalError, PipelineConfig, ReportFormat, Selection};
use crate::reasoner::{explain, to_dot, to_json, FulfillmentConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Io { .. } | EvalError::Schema { .. } => CliError::Input(e.to_string()),
            EvalError::Config(_) => CliError::Config(e.to_string()),
            other => CliError::Run(other.to_string()),
        }
    }
}

/// Where a backend role is served from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    /// A mock script file (JSON).
    Scripted { script: PathBuf },
    /// Clues copied from the dataset's `gold_clues`.
    Gold,
    /// The lexical-overlap entailment heuristic.
    Rule,
    Http {
        url: String,
        #[serde(default)]
        token: Option<String>,
        /// Cache identity; defaults to `http:<url>`.
        #[serde(default)]
        id: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendsConfig {
    pub text: BackendSpec,
    #[serde(default)]
    pub clues: Option<BackendSpec>,
    pub nli: BackendSpec,
}

fn default_cache_dir() -> PathBuf {
    PathBuf::from("cache")
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Flat TOML run configuration. String values may reference environment
/// variables as `${NAME}`; relative paths are resolved against the config
/// file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_cache_dir")]
    pub cache_dir: PathBuf,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub replay_only: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub clue_source: ClueSource,
    #[serde(default)]
    pub selection: Selection,
    pub backends: BackendsConfig,
    #[serde(default)]
    pub abduction: AbductionConfig,
    #[serde(default)]
    pub fulfillment: FulfillmentConfig,
    #[serde(default)]
    pub weak_supervision: WeakSupervisionConfig,
}

/// Replaces every `${NAME}` with the value of the environment variable.
pub fn interpolate_env(s: &str, lookup: impl Fn(&str) -> Option<String>) -> Result<String, CliError> {
    let mut out = String::new();
    let mut rest = s;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find('}').ok_or_else(|| CliError::Config(format!("unterminated `${{` in {s:?}")))?;
        let name = &after[..end];
        let value =
            lookup(name).ok_or_else(|| CliError::Config(format!("environment variable `{name}` is not set")))?;
        out.push_str(&value);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

fn interpolate_value(v: &mut toml::Value, lookup: &dyn Fn(&str) -> Option<String>) -> Result<(), CliError> {
    match v {
        toml::Value::String(s) => *s = interpolate_env(s, lookup)?,
        toml::Value::Array(items) => {
            for item in items {
                interpolate_value(item, lookup)?;
            }
        }
        toml::Value::Table(t) => {
            for (_, item) in t.iter_mut() {
                interpolate_value(item, lookup)?;
            }
        }
        _ => {}
    }
    Ok(())
}

impl RunConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        Self::parse_with_env(text, base, |name| std::env::var(name).ok())
    }

    pub fn parse_with_env(text: &str, base: &Path, lookup: impl Fn(&str) -> Option<String>) -> Result<Self, CliError> {
        let mut value: toml::Value = toml::from_str(text).map_err(|e| CliError::Config(one_line(&e.to_string())))?;
        interpolate_value(&mut value, &lookup)?;
        let mut cfg = RunConfig::deserialize(value).map_err(|e| CliError::Config(one_line(&e.to_string())))?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut self.cache_dir);
        resolve(&mut self.out_dir);
        for spec in [Some(&mut self.backends.text), self.backends.clues.as_mut(), Some(&mut self.backends.nli)]
            .into_iter()
            .flatten()
        {
            if let BackendSpec::Scripted { script } = spec {
                resolve(script);
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.pipeline().validate().map_err(|e| CliError::Config(e.to_string()))?;
        if matches!(self.backends.text, BackendSpec::Gold | BackendSpec::Rule) {
            return Err(CliError::Config("text backend must be `scripted` or `http`".into()));
        }
        if matches!(self.backends.nli, BackendSpec::Gold) {
            return Err(CliError::Config("nli backend cannot be `gold`".into()));
        }
        if matches!(self.backends.clues, Some(BackendSpec::Rule)) {
            return Err(CliError::Config("clue backend cannot be `rule`".into()));
        }
        if self.clue_source == ClueSource::Backend && self.backends.clues.is_none() {
            return Err(CliError::Config("clue_source = \"backend\" needs [backends.clues]".into()));
        }
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            abduction: self.abduction.clone(),
            fulfillment: self.fulfillment.clone(),
            clue_source: self.clue_source,
            selection: self.selection,
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Backends built from a [`RunConfig`], each wrapped in the response cache.
pub struct Runtime {
    pub cache: Arc<FileCache>,
    pub text: Arc<dyn TextGenerator>,
    pub clues: Option<Arc<dyn ClueGenerator>>,
    pub nli: Arc<dyn EntailmentScorer>,
}

impl Runtime {
    pub fn build(cfg: &RunConfig, dataset: &[QaInstance], policy: CachePolicy) -> Result<Self, CliError> {
        let cache = Arc::new(FileCache::open(&cfg.cache_dir).map_err(|e| CliError::Config(e.to_string()))?);
        let mut scripts: BTreeMap<PathBuf, (String, Arc<MockScript>)> = BTreeMap::new();
        let mut script = |path: &Path| -> Result<(String, Arc<MockScript>), CliError> {
            if let Some(s) = scripts.get(path) {
                return Ok(s.clone());
            }
            let bytes =
                fs::read(path).map_err(|e| CliError::Config(format!("cannot read script {}: {e}", path.display())))?;
            let parsed: MockScript = serde_json::from_slice(&bytes)
                .map_err(|e| CliError::Config(format!("invalid script {}: {e}", path.display())))?;
            let id = format!("scripted:{}", &fingerprint(&bytes)[..16]);
            let entry = (id, Arc::new(parsed));
            scripts.insert(path.to_owned(), entry.clone());
            Ok(entry)
        };

        let text: Arc<dyn TextGenerator> = match &cfg.backends.text {
            BackendSpec::Scripted { script: p } => {
                let (id, s) = script(p)?;
                Arc::new(s.text_backend(&id))
            }
            BackendSpec::Http { url, token, id } => {
                let b = HttpTextGen::new(url).with_token(token.clone());
                Arc::new(match id {
                    Some(id) => b.with_id(id),
                    None => b,
                })
            }
            BackendSpec::Gold | BackendSpec::Rule => unreachable!("rejected by validate"),
        };
        let clues: Option<Arc<dyn ClueGenerator>> = match &cfg.backends.clues {
            None => None,
            Some(BackendSpec::Scripted { script: p }) => {
                let (id, s) = script(p)?;
                Some(Arc::new(s.clue_backend(&id)))
            }
            Some(BackendSpec::Gold) => Some(Arc::new(GoldClueBackend::from_instances(dataset))),
            Some(BackendSpec::Http { url, token, id }) => {
                let b = HttpClueGen::new(url).with_token(token.clone());
                Some(Arc::new(match id {
                    Some(id) => b.with_id(id),
                    None => b,
                }))
            }
            Some(BackendSpec::Rule) => unreachable!("rejected by validate"),
        };
        let nli: Arc<dyn EntailmentScorer> = match &cfg.backends.nli {
            BackendSpec::Scripted { script: p } => {
                let (id, s) = script(p)?;
                Arc::new(s.nli_backend(&id).map_err(|e| CliError::Config(e.to_string()))?)
            }
            BackendSpec::Rule => Arc::new(RuleNli::new()),
            BackendSpec::Http { url, token, id } => {
                let b = HttpNli::new(url).with_token(token.clone());
                Arc::new(match id {
                    Some(id) => b.with_id(id),
                    None => b,
                })
            }
            BackendSpec::Gold => unreachable!("rejected by validate"),
        };

        Ok(Self {
            text: Arc::new(Cached::new(text, cache.clone(), policy)),
            clues: clues.map(|c| Arc::new(Cached::new(c, cache.clone(), policy)) as Arc<dyn ClueGenerator>),
            nli: Arc::new(Cached::new(nli, cache.clone(), policy)),
            cache,
        })
    }

    pub fn backends(&self) -> Backends<'_> {
        Backends {
            text: self.text.as_ref(),
            clues: self.clues.as_ref().map(|c| c.as_ref() as &dyn ClueGenerator),
            nli: self.nli.as_ref(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "avqa", version, about = "Visual question answering with explicit reasoning graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Dataset (JSONL).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output directory; defaults to the config's `out_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Few-shot exemplars per prompt.
    #[arg(long)]
    pub shots: Option<usize>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Serve every backend call from the cache and fail on a miss.
    #[arg(long)]
    pub replay_only: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StageArg {
    Direct,
    TwoStage,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Candidate answers and abduction proposals -> proposals.jsonl
    Propose(RunArgs),
    /// Visual clues -> clues.jsonl
    Clues(RunArgs),
    /// Full pipeline -> results.jsonl and graphs/<id>.{dot,json}
    Reason(RunArgs),
    /// Accuracy of the pipeline or an ablation baseline -> metrics.json
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "full_pipeline")]
        mode: AblationMode,
        /// Print the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Reasoning graph of one instance -> <id>.dot and <id>.json
    ExportGraph {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        id: String,
    },
    /// Clue-permutation training records and the trainer manifest
    PrepTrain {
        /// Needed only to weakly annotate instances without gold clues.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "direct")]
        stage: StageArg,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        replay_only: bool,
    },
    /// Inspect or empty the response cache
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum CacheAction {
    Stats {
        #[arg(long)]
        config: PathBuf,
    },
    Clear {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Outcome of a subcommand that ran to completion.
#[derive(Debug, Default)]
pub struct Summary {
    /// Files written, in order.
    pub written: Vec<PathBuf>,
    /// `(instance id, error)` for every failed item.
    pub failures: Vec<(String, String)>,
}

impl Summary {
    pub fn exit_code(&self) -> u8 {
        u8::from(!self.failures.is_empty())
    }
}

fn write(summary: &mut Summary, path: PathBuf, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::Run(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(&path, contents).map_err(|e| CliError::Run(format!("cannot write {}: {e}", path.display())))?;
    summary.written.push(path);
    Ok(())
}

fn jsonl<T: Serialize>(rows: &[T]) -> String {
    rows.iter().map(|r| serde_json::to_string(r).expect("row serializes") + "\n").collect()
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Config("--jobs must be positive".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| CliError::Run(e.to_string()))?;
    Ok(pool.install(f))
}

struct Prepared {
    cfg: RunConfig,
    out: PathBuf,
    dataset: Vec<QaInstance>,
    runtime: Runtime,
}

fn prepare(args: &RunArgs) -> Result<Prepared, CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(shots) = args.shots {
        cfg.abduction.shots = shots;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.replay_only |= args.replay_only;
    cfg.validate()?;
    let dataset = evalkit::load_dataset(&args.dataset)?;
    let policy = if cfg.replay_only { CachePolicy::ReplayOnly } else { CachePolicy::ReadWrite };
    let runtime = Runtime::build(&cfg, &dataset, policy)?;
    let out = args.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    Ok(Prepared { cfg, out, dataset, runtime })
}

#[derive(Debug, Serialize)]
struct ProposalRecord {
    id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    answers: Option<Vec<AnswerCandidate>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    proposals: Option<Vec<AbductionProposal>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct ClueRecord {
    id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    clues: Option<Vec<VisualClue>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn cmd_propose(args: &RunArgs) -> Result<Summary, CliError> {
    let p = prepare(args)?;
    let pipeline = p.cfg.pipeline();
    let exemplars = abduction::bundled_exemplars();
    let text = p.runtime.text.as_ref();
    let rows: Vec<ProposalRecord> = with_pool(args.jobs, || {
        p.dataset
            .par_iter()
            .map(|inst| {
                let result = evalkit::candidate_answers(inst, &pipeline, &exemplars, text).and_then(|answers| {
                    let proposals =
                        abduction::propose_all(text, &inst.question, &answers, &exemplars, &pipeline.abduction)?;
                    Ok((answers, proposals))
                });
                match result {
                    Ok((a, ps)) => {
                        ProposalRecord { id: inst.id.clone(), answers: Some(a), proposals: Some(ps), error: None }
                    }
                    Err(e) => ProposalRecord {
                        id: inst.id.clone(),
                        answers: None,
                        proposals: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    })?;
    let mut summary = Summary {
        failures: rows.iter().filter_map(|r| Some((r.id.clone(), r.error.clone()?))).collect(),
        ..Summary::default()
    };
    write(&mut summary, p.out.join("proposals.jsonl"), &jsonl(&rows))?;
    Ok(summary)
}

fn cmd_clues(args: &RunArgs) -> Result<Summary, CliError> {
    let p = prepare(args)?;
    let backend = p.runtime.clues.as_deref();
    let source = p.cfg.clue_source;
    let rows: Vec<ClueRecord> = with_pool(args.jobs, || {
        p.dataset
            .par_iter()
            .map(|inst| match clues::get_clues(inst, source, backend) {
                Ok(c) => ClueRecord { id: inst.id.clone(), clues: Some(c), error: None },
                Err(e) => ClueRecord { id: inst.id.clone(), clues: None, error: Some(e.to_string()) },
            })
            .collect()
    })?;
    let mut summary = Summary {
        failures: rows.iter().filter_map(|r| Some((r.id.clone(), r.error.clone()?))).collect(),
        ..Summary::default()
    };
    write(&mut summary, p.out.join("clues.jsonl"), &jsonl(&rows))?;
    Ok(summary)
}

fn graph_files(summary: &mut Summary, dir: &Path, id: &str, trace: &evalkit::Trace) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(&to_json(&trace.graph, &trace.prediction.tally)).expect("json") + "\n";
    write(summary, dir.join(format!("{id}.dot")), &to_dot(&trace.graph))?;
    write(summary, dir.join(format!("{id}.json")), &json)
}

fn cmd_reason(args: &RunArgs) -> Result<Summary, CliError> {
    let p = prepare(args)?;
    let pipeline = p.cfg.pipeline();
    let run = with_pool(args.jobs, || evalkit::run_pipeline(&p.dataset, &pipeline, p.runtime.backends()))??;
    let mut summary = Summary {
        failures: run.failures().map(|r| (r.id.clone(), r.error.clone().unwrap_or_default())).collect(),
        ..Summary::default()
    };
    write(&mut summary, p.out.join("results.jsonl"), &run.results_jsonl())?;
    for item in &run.items {
        if let Some(trace) = &item.trace {
            graph_files(&mut summary, &p.out.join("graphs"), &item.record.id, trace)?;
        }
    }
    Ok(summary)
}

fn cmd_eval(args: &RunArgs, mode: AblationMode, json: bool) -> Result<Summary, CliError> {
    let p = prepare(args)?;
    let mut summary = Summary::default();
    let metrics = if mode == AblationMode::FullPipeline {
        let pipeline = p.cfg.pipeline();
        let run = with_pool(args.jobs, || evalkit::run_pipeline(&p.dataset, &pipeline, p.runtime.backends()))??;
        write(&mut summary, p.out.join("results.jsonl"), &run.results_jsonl())?;
        run.metrics
    } else {
        let shots = p.cfg.abduction.shots;
        with_pool(args.jobs, || evalkit::run_ablation(&p.dataset, mode, shots, p.runtime.text.as_ref()))??
    };
    summary.failures = metrics.per_item.iter().filter_map(|r| Some((r.id.clone(), r.note.clone()?))).collect();
    write(&mut summary, p.out.join("metrics.json"), &metrics.to_json())?;
    let format = if json { ReportFormat::Json } else { ReportFormat::Text };
    print!("{}", evalkit::report(&metrics, format));
    Ok(summary)
}

fn cmd_export_graph(args: &RunArgs, id: &str) -> Result<Summary, CliError> {
    let p = prepare(args)?;
    let inst = p
        .dataset
        .iter()
        .find(|i| i.id == id)
        .ok_or_else(|| CliError::Input(format!("no instance `{id}` in {}", args.dataset.display())))?;
    let pipeline = p.cfg.pipeline();
    let trace = with_pool(args.jobs, || evalkit::answer_instance(inst, &pipeline, p.runtime.backends()))?
        .map_err(|e| CliError::Run(format!("{id}: {e}")))?;
    let mut summary = Summary::default();
    graph_files(&mut summary, &p.out, id, &trace)?;
    println!("{}", explain(&trace.prediction));
    Ok(summary)
}

#[allow(clippy::too_many_arguments)]
fn cmd_prep_train(
    config: Option<&Path>,
    dataset: &Path,
    out: &Path,
    seed: Option<u64>,
    stage: StageArg,
    jobs: Option<usize>,
    replay_only: bool,
) -> Result<Summary, CliError> {
    let cfg = config.map(RunConfig::load).transpose()?;
    let mut instances = evalkit::load_dataset(dataset)?;
    let seed = seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0);
    let mut summary = Summary::default();
    let needs_weak = instances.iter().any(|i| i.gold_clues.as_ref().is_none_or(|c| c.is_empty()));
    if let (true, Some(cfg)) = (needs_weak, &cfg) {
        let policy = if cfg.replay_only || replay_only { CachePolicy::ReplayOnly } else { CachePolicy::ReadWrite };
        let runtime = Runtime::build(cfg, &instances, policy)?;
        let report =
            with_pool(jobs, || clues::weak_supervise(&instances, runtime.text.as_ref(), &cfg.weak_supervision))?;
        summary.failures.extend(report.failures.iter().map(|f| (f.id.clone(), f.error.clone())));
        instances = report.instances;
        if report.augmented > 0 {
            write(&mut summary, out.join("augmented.jsonl"), &jsonl(&instances))?;
        }
    }
    let mut records = Vec::new();
    for inst in &instances {
        match clues::permute_clue_records(inst, seed) {
            Ok(r) => records.extend(r),
            Err(e) if !summary.failures.iter().any(|(id, _)| *id == inst.id) => {
                summary.failures.push((inst.id.clone(), e.to_string()))
            }
            Err(_) => {}
        }
    }
    let stage = match stage {
        StageArg::Direct => TrainingStage::Direct,
        StageArg::TwoStage => TrainingStage::TwoStage,
    };
    write(&mut summary, out.join("train.jsonl"), &jsonl(&records))?;
    write(&mut summary, out.join("manifest.json"), &(clues::training_manifest(stage).to_json() + "\n"))?;
    Ok(summary)
}

fn cmd_cache(action: &CacheAction) -> Result<Summary, CliError> {
    let config = match action {
        CacheAction::Stats { config } | CacheAction::Clear { config } => config,
    };
    let cfg = RunConfig::load(config)?;
    let cache = FileCache::open(&cfg.cache_dir).map_err(|e| CliError::Config(e.to_string()))?;
    match action {
        CacheAction::Stats { .. } => {
            let s = cache.stats().map_err(|e| CliError::Run(e.to_string()))?;
            println!("{}: {} entries, {} bytes", cfg.cache_dir.display(), s.entries, s.bytes);
        }
        CacheAction::Clear { .. } => {
            let n = cache.clear().map_err(|e| CliError::Run(e.to_string()))?;
            println!("{}: removed {n} entries", cfg.cache_dir.display());
        }
    }
    Ok(Summary::default())
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> Result<Summary, CliError> {
    match &cli.command {
        Command::Propose(a) => cmd_propose(a),
        Command::Clues(a) => cmd_clues(a),
        Command::Reason(a) => cmd_reason(a),
        Command::Eval { run, mode, json } => cmd_eval(run, *mode, *json),
        Command::ExportGraph { run, id } => cmd_export_graph(run, id),
        Command::PrepTrain { config, dataset, out, seed, stage, jobs, replay_only } => {
            cmd_prep_train(config.as_deref(), dataset, out, *seed, *stage, *jobs, *replay_only)
        }
        Command::Cache { action } => cmd_cache(action),
    }
}

/// Runs the command line and reports on standard error. Returns the exit
/// status.
pub fn main_with(cli: &Cli) -> u8 {
    match execute(cli) {
        Ok(summary) => {
            for path in &summary.written {
                log::info!("wrote {}", path.display());
            }
            if !summary.failures.is_empty() {
                eprintln!("{} item(s) failed:", summary.failures.len());
                for (id, err) in &summary.failures {
                    eprintln!("  {id}: {err}");
                }
            }
            summary.exit_code()
        }
        Err(e) => {
            eprintln!("avqa: {e}");
            e.exit_code()
        }
    }
}
