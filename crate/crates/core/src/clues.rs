//! Visual clues: retrieval per instance plus the data preparation used to
//! fine-tune an external clue generator (prompt format, permutation records,
//! weak supervision and the training manifest).

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendError, ClueGenRequest, ClueGenerator, TextGenRequest, TextGenerator};
use crate::domain::{canon, ClueOrigin, QaInstance, VisualClue};
use crate::templates;

/// Joins the clues of one training target.
pub const CLUE_SEPARATOR: &str = "; ";

#[derive(Debug, Error)]
pub enum ClueError {
    #[error("question is empty")]
    EmptyQuestion,
    #[error("instance `{0}` has no clues")]
    NoClues(String),
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error(transparent)]
    Backend(BackendError),
    #[error("cannot read training manifest: {0}")]
    Manifest(String),
}

impl From<BackendError> for ClueError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::UnknownInstance(id) => ClueError::UnknownInstance(id),
            other => ClueError::Backend(other),
        }
    }
}

/// `Question: {question} Clues:`
pub fn build_clue_prompt(question: &str) -> Result<String, ClueError> {
    let q = question.split_whitespace().collect::<Vec<_>>().join(" ");
    if q.is_empty() {
        return Err(ClueError::EmptyQuestion);
    }
    Ok(format!("Question: {q} Clues:"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClueSource {
    /// The instance's own `gold_clues`.
    #[default]
    Gold,
    /// The configured clue generator.
    Backend,
}

/// Splits generator output into clues: one per line, canonicalized, empties
/// dropped, duplicates removed keeping the first.
pub fn split_clues(text: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    text.lines()
        .map(|l| canon(l.trim_start_matches(['-', '*', '•']).trim()))
        .filter(|c| !c.is_empty() && seen.insert(c.clone()))
        .collect()
}

/// Visual clues for `instance`, with ids `vc0..vc(n-1)`.
pub fn get_clues(
    instance: &QaInstance,
    source: ClueSource,
    backend: Option<&dyn ClueGenerator>,
) -> Result<Vec<VisualClue>, ClueError> {
    let (statements, origin) = match source {
        ClueSource::Gold => {
            let gold = instance.gold_clues.as_ref().ok_or_else(|| ClueError::NoClues(instance.id.clone()))?;
            let mut seen = HashSet::new();
            let statements: Vec<String> = gold
                .iter()
                .map(|c| c.trim().to_owned())
                .filter(|c| !canon(c).is_empty() && seen.insert(canon(c)))
                .collect();
            (statements, instance.clue_origin.unwrap_or_default())
        }
        ClueSource::Backend => {
            let backend = backend
                .ok_or_else(|| ClueError::Backend(BackendError::InvalidRequest("no clue backend configured".into())))?;
            let req = ClueGenRequest::new(instance.image_ref.clone(), build_clue_prompt(&instance.question)?);
            let reply = backend.generate_clues_raw(&req)?;
            (split_clues(&reply.text), ClueOrigin::BackendGenerated)
        }
    };
    if statements.is_empty() {
        return Err(ClueError::NoClues(instance.id.clone()));
    }
    Ok(statements.into_iter().enumerate().map(|(i, s)| VisualClue::new(i, s, origin)).collect())
}

/// One fine-tuning example for the clue generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClueTrainingRecord {
    #[serde(rename = "id")]
    pub instance_id: String,
    pub image_ref: String,
    pub prompt: String,
    pub target: String,
}

fn factorial(n: usize) -> Option<u128> {
    (1..=n as u128).try_fold(1u128, |acc, k| acc.checked_mul(k))
}

/// The `rank`-th permutation of `0..n` in lexicographic order, decoded from
/// the factorial number system.
pub fn nth_permutation(n: usize, mut rank: u128) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(n);
    for remaining in (1..=n).rev() {
        let block = factorial(remaining - 1).expect("n is small enough to rank");
        let pick = (rank / block) as usize;
        rank %= block;
        out.push(pool.remove(pick));
    }
    out
}

/// `n` distinct orderings of `0..n` drawn without replacement from the
/// lexicographic permutation index space, returned in lexicographic order.
fn sample_orderings(n: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match factorial(n) {
        Some(total) if total <= usize::MAX as u128 => {
            let mut ranks = index::sample(&mut rng, total as usize, n).into_vec();
            ranks.sort_unstable();
            ranks.into_iter().map(|r| nth_permutation(n, r as u128)).collect()
        }
        _ => {
            // index space too large to address; draw shuffles and reject repeats
            let mut seen = BTreeSet::new();
            while seen.len() < n {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut rng);
                seen.insert(order);
            }
            seen.into_iter().collect()
        }
    }
}

/// `n` training records for an instance with `n` gold clues, each target a
/// distinct ordering of the clues joined by [`CLUE_SEPARATOR`]. Which
/// orderings are used depends only on `seed`.
pub fn permute_clue_records(instance: &QaInstance, seed: u64) -> Result<Vec<ClueTrainingRecord>, ClueError> {
    let clues: Vec<&str> = instance.gold_clues.iter().flatten().map(|c| c.trim()).filter(|c| !c.is_empty()).collect();
    if clues.is_empty() {
        return Err(ClueError::NoClues(instance.id.clone()));
    }
    let prompt = build_clue_prompt(&instance.question)?;
    Ok(sample_orderings(clues.len(), seed)
        .into_iter()
        .map(|order| ClueTrainingRecord {
            instance_id: instance.id.clone(),
            image_ref: instance.image_ref.clone(),
            prompt: prompt.clone(),
            target: order.iter().map(|&i| clues[i]).collect::<Vec<_>>().join(CLUE_SEPARATOR),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeakSupervisionConfig {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for WeakSupervisionConfig {
    fn default() -> Self {
        Self { temperature: 0.0, max_tokens: 128 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakSupervisionFailure {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakSupervisionReport {
    /// Every input instance, in input order.
    pub instances: Vec<QaInstance>,
    pub augmented: usize,
    pub failures: Vec<WeakSupervisionFailure>,
}

pub fn build_weak_clue_prompt(instance: &QaInstance) -> String {
    templates::WEAK_CLUES.render(&[
        ("question", instance.question.trim()),
        ("answer", instance.gold_answer.as_deref().unwrap_or("unknown").trim()),
    ])
}

/// Annotates instances lacking gold clues with clues written by the text
/// backend. Failures are collected per instance; the failed instance is
/// passed through unchanged.
pub fn weak_supervise(
    instances: &[QaInstance],
    gen: &dyn TextGenerator,
    cfg: &WeakSupervisionConfig,
) -> WeakSupervisionReport {
    let results: Vec<(QaInstance, Option<Result<(), String>>)> = instances
        .par_iter()
        .map(|inst| {
            if inst.gold_clues.as_ref().is_some_and(|c| !c.is_empty()) {
                return (inst.clone(), None);
            }
            let req = TextGenRequest::new(build_weak_clue_prompt(inst))
                .with_temperature(cfg.temperature)
                .with_max_tokens(cfg.max_tokens);
            let outcome = gen.generate_text(&req).map_err(|e| e.to_string()).and_then(|reply| {
                let clues = split_clues(&reply.text);
                if clues.is_empty() {
                    Err("backend returned no clues".to_owned())
                } else {
                    Ok(clues)
                }
            });
            match outcome {
                Ok(clues) => {
                    let mut aug = inst.clone();
                    aug.gold_clues = Some(clues);
                    aug.clue_origin = Some(ClueOrigin::BackendGenerated);
                    (aug, Some(Ok(())))
                }
                Err(e) => (inst.clone(), Some(Err(e))),
            }
        })
        .collect();
    let mut report = WeakSupervisionReport { instances: Vec::new(), augmented: 0, failures: Vec::new() };
    for (inst, outcome) in results {
        match outcome {
            Some(Ok(())) => report.augmented += 1,
            Some(Err(error)) => report.failures.push(WeakSupervisionFailure { id: inst.id.clone(), error }),
            None => {}
        }
        report.instances.push(inst);
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingStage {
    Direct,
    TwoStage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    Constant { value: f64 },
    WarmupCosine { warmup_steps: u64, start: f64, peak: f64, min: f64 },
}

/// Hyperparameters for fine-tuning the clue generator with an external
/// trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub stage: TrainingStage,
    pub epochs: u32,
    pub batch_size: u32,
    pub optimizer_name: String,
    pub weight_decay: f64,
    pub lr_schedule: LrSchedule,
}

pub fn training_manifest(stage: TrainingStage) -> TrainingManifest {
    let lr_schedule = match stage {
        TrainingStage::Direct => LrSchedule::Constant { value: 1e-7 },
        TrainingStage::TwoStage => LrSchedule::WarmupCosine { warmup_steps: 3000, start: 1e-8, peak: 1e-6, min: 1e-8 },
    };
    TrainingManifest {
        stage,
        epochs: 15,
        batch_size: 12,
        optimizer_name: "AdamW".to_owned(),
        weight_decay: 0.01,
        lr_schedule,
    }
}

impl TrainingManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ClueError> {
        serde_json::from_str(text).map_err(|e| ClueError::Manifest(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ClueError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ClueError::Manifest(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{ScriptedClueGen, ScriptedTextGen};
    use proptest::prelude::*;

    fn inst(clues: &[&str]) -> QaInstance {
        QaInstance::new("q1", "img/1.jpg", "Is it raining?").with_answer("yes").with_clues(clues.iter().copied())
    }

    #[test]
    fn clue_prompt_format() {
        assert_eq!(build_clue_prompt("Is it raining?").unwrap(), "Question: Is it raining? Clues:");
        assert_eq!(build_clue_prompt("  Is it\nraining?  ").unwrap(), "Question: Is it raining? Clues:");
        assert!(matches!(build_clue_prompt(""), Err(ClueError::EmptyQuestion)));
    }

    #[test]
    fn gold_clues() {
        let clues =
            get_clues(&inst(&["a man holds an umbrella", "the ground is wet"]), ClueSource::Gold, None).unwrap();
        assert_eq!(clues.len(), 2);
        assert_eq!(clues[1].id, "vc1");
        assert!(clues.iter().all(|c| c.origin == ClueOrigin::Gold));
        let bare = QaInstance::new("q2", "i", "q?");
        assert!(matches!(get_clues(&bare, ClueSource::Gold, None), Err(ClueError::NoClues(_))));
    }

    #[test]
    fn backend_clues_are_split_and_deduplicated() {
        let backend = ScriptedClueGen::new("c").with_image("img/1.jpg", "a man\n\na man\nwet ground");
        let clues = get_clues(&inst(&[]), ClueSource::Backend, Some(&backend)).unwrap();
        assert_eq!(clues.iter().map(|c| c.statement.as_str()).collect::<Vec<_>>(), vec!["a man", "wet ground"]);
        assert!(clues.iter().all(|c| c.origin == ClueOrigin::BackendGenerated));

        let empty = ScriptedClueGen::new("c").with_image("img/1.jpg", "");
        assert!(matches!(get_clues(&inst(&[]), ClueSource::Backend, Some(&empty)), Err(ClueError::NoClues(_))));
    }

    #[test]
    fn gold_backend_unknown_instance() {
        let gold = crate::backends::GoldClueBackend::from_instances([]);
        let err = get_clues(&inst(&[]), ClueSource::Backend, Some(&gold)).unwrap_err();
        assert!(matches!(err, ClueError::UnknownInstance(_)));
    }

    #[test]
    fn permutation_decoding_enumerates_in_lexicographic_order() {
        let all: Vec<Vec<usize>> = (0..6).map(|r| nth_permutation(3, r)).collect();
        assert_eq!(all, vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 0, 2], vec![1, 2, 0], vec![2, 0, 1], vec![2, 1, 0]]);
    }

    #[test]
    fn single_clue_has_one_record() {
        let r = permute_clue_records(&inst(&["the ground is wet"]), 7).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].target, "the ground is wet");
        assert_eq!(r[0].prompt, "Question: Is it raining? Clues:");
    }

    #[test]
    fn two_clues_give_both_orderings() {
        for seed in 0..20 {
            let r = permute_clue_records(&inst(&["a", "b"]), seed).unwrap();
            let targets: Vec<&str> = r.iter().map(|r| r.target.as_str()).collect();
            assert_eq!(targets, vec!["a; b", "b; a"]);
        }
    }

    #[test]
    fn three_clues_give_three_distinct_orderings() {
        let r = permute_clue_records(&inst(&["a", "b", "c"]), 3).unwrap();
        assert_eq!(r.len(), 3);
        let distinct: HashSet<&str> = r.iter().map(|r| r.target.as_str()).collect();
        assert_eq!(distinct.len(), 3);
        assert_eq!(r, permute_clue_records(&inst(&["a", "b", "c"]), 3).unwrap());
        assert!(matches!(permute_clue_records(&inst(&[]), 0), Err(ClueError::NoClues(_))));
    }

    #[test]
    fn many_clues_still_distinct() {
        let clues: Vec<String> = (0..40).map(|i| format!("clue {i}")).collect();
        let refs: Vec<&str> = clues.iter().map(String::as_str).collect();
        let r = permute_clue_records(&inst(&refs), 1).unwrap();
        assert_eq!(r.len(), 40);
        assert_eq!(r.iter().map(|r| r.target.as_str()).collect::<HashSet<_>>().len(), 40);
    }

    #[test]
    fn weak_supervision_isolates_failures() {
        let gold = inst(&["x"]);
        let a = QaInstance::new("a", "i/a", "Is the dog wet?").with_answer("yes");
        let b = QaInstance::new("b", "i/b", "Is the cat asleep?").with_answer("no");
        let gen = ScriptedTextGen::new("w")
            .with_rule(["Is the dog wet?"], "the dog is dripping\nthere is a pool")
            .failing_on_rule(["Is the cat asleep?"]);
        let report = weak_supervise(&[a.clone(), gold.clone(), b.clone()], &gen, &WeakSupervisionConfig::default());
        assert_eq!(report.augmented, 1);
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.failures[0].id, "b");
        assert_eq!(report.instances[1], gold);
        assert_eq!(report.instances[2], b);
        let aug = &report.instances[0];
        assert_eq!(aug.gold_clues.as_deref().unwrap(), ["the dog is dripping", "there is a pool"]);
        assert_eq!(aug.clue_origin, Some(ClueOrigin::BackendGenerated));
        let clues = get_clues(aug, ClueSource::Gold, None).unwrap();
        assert!(clues.iter().all(|c| c.origin == ClueOrigin::BackendGenerated));

        let two = weak_supervise(
            &[a.clone(), QaInstance::new("c", "i/c", "Is the dog wet?")],
            &gen,
            &WeakSupervisionConfig::default(),
        );
        assert_eq!(two.augmented, 2);

        let empty = weak_supervise(&[], &gen, &WeakSupervisionConfig::default());
        assert!(empty.instances.is_empty() && empty.failures.is_empty());
    }

    #[test]
    fn manifest_values() {
        let direct = training_manifest(TrainingStage::Direct);
        assert_eq!(direct.epochs, 15);
        assert_eq!(direct.batch_size, 12);
        assert_eq!(direct.weight_decay, 0.01);
        assert_eq!(direct.optimizer_name, "AdamW");
        assert_eq!(direct.lr_schedule, LrSchedule::Constant { value: 1e-7 });
        let two = training_manifest(TrainingStage::TwoStage);
        assert_eq!(
            two.lr_schedule,
            LrSchedule::WarmupCosine { warmup_steps: 3000, start: 1e-8, peak: 1e-6, min: 1e-8 }
        );
        for m in [direct, two] {
            assert_eq!(TrainingManifest::from_json(&m.to_json()).unwrap(), m);
        }
    }

    proptest! {
        #[test]
        fn permutations_cover_the_multiset(
            clues in proptest::collection::vec("[a-z]{1,3}", 1..=7),
            seed in any::<u64>(),
        ) {
            let instance = QaInstance::new("q", "i", "q?").with_clues(clues.iter().cloned());
            let records = permute_clue_records(&instance, seed).unwrap();
            prop_assert_eq!(records.len(), clues.len());
            let mut expected = clues.clone();
            expected.sort();
            for r in &records {
                let mut parts: Vec<String> = r.target.split(CLUE_SEPARATOR).map(str::to_owned).collect();
                parts.sort();
                prop_assert_eq!(&parts, &expected);
            }
            // distinct as index orderings, hence distinct whenever clues are distinct
            let uniq: HashSet<&String> = clues.iter().collect();
            if uniq.len() == clues.len() {
                let targets: HashSet<&str> = records.iter().map(|r| r.target.as_str()).collect();
                prop_assert_eq!(targets.len(), clues.len());
            }
        }
    }
}
