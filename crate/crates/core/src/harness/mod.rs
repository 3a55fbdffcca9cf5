//! Experiment orchestration: cross-validation, end-to-end runs and the
//! strategy comparison table.

mod cv;
mod folds;

use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cv::{
    cross_validate, split_fold, CvItem, FoldContext, HeadLearner, Learner, MajorityLearner, OracleLearner, Predictor,
    SvmLearner,
};
pub use folds::{make_folds, verify_partition, CvPlan, Grouping};

use crate::baseline::{wavelet_descriptor, SvmConfig};
use crate::data::StepSequence;
use crate::embed::{embed_step, load_embedder, EmbeddedStep, EmbedderSpec, ImageEmbedder};
use crate::error::{Error, Result};
use crate::heads::{write_checkpoint, Arch, Checkpoint, TrainConfig};
use crate::report::EvalReport;
use crate::transform::{transform_step, RenderConfig, Strategy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("class {class} has {count} members, fewer than {folds} folds")]
    ClassTooSmall { class: usize, count: usize, folds: usize },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("repeat {repeat} fold {fold}: {id} appears in both training and evaluation")]
    Leakage { repeat: usize, fold: usize, id: String },
    #[error("repeat {repeat} fold {fold}: class {class} missing from the training split")]
    MissingClass { repeat: usize, fold: usize, class: usize },
    #[error("recording {0} holds steps of more than one subject")]
    MixedGroup(String),
    #[error("no steps to evaluate")]
    Empty,
}

/// Subject id to class index, in ascending id order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassIndex {
    labels: Vec<String>,
}

impl ClassIndex {
    pub fn from_ids<'a>(ids: impl IntoIterator<Item = &'a str>) -> Self {
        let set: BTreeSet<&str> = ids.into_iter().collect();
        Self {
            labels: set.into_iter().map(str::to_string).collect(),
        }
    }

    pub fn of(&self, id: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(id)).ok()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// The conventional head for a strategy.
pub fn paired_arch(strategy: Strategy, gru_hidden: usize) -> Arch {
    if strategy.is_sequential() {
        Arch::Gru { hidden: gru_hidden }
    } else {
        Arch::Softmax
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputPaths {
    pub report: Option<PathBuf>,
    /// Directory for per-fold `HED1` checkpoints.
    pub models: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub strategies: Vec<Strategy>,
    pub embedder: EmbedderSpec,
    /// Head for every strategy; `None` picks softmax for single images and
    /// GRU for frame sequences.
    pub head: Option<Arch>,
    pub gru_hidden: usize,
    pub train: TrainConfig,
    pub cv: CvPlan,
    /// Allow a head that does not match its strategy.
    pub force: bool,
    pub output: OutputPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            strategies: Strategy::ALL.to_vec(),
            embedder: EmbedderSpec::default(),
            head: None,
            gru_hidden: 128,
            train: TrainConfig::default(),
            cv: CvPlan::default(),
            force: false,
            output: OutputPaths::default(),
        }
    }
}

impl RunConfig {
    pub fn arch_for(&self, strategy: Strategy) -> Arch {
        self.head.unwrap_or_else(|| paired_arch(strategy, self.gru_hidden))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.cv.validate()?;
        if self.strategies.is_empty() {
            return Err(HarnessError::Config("no strategies selected".into()));
        }
        if self.gru_hidden == 0 {
            return Err(HarnessError::Config("gru_hidden must be positive".into()));
        }
        self.train.validate().map_err(HarnessError::Config)?;
        for &s in &self.strategies {
            let arch = self.arch_for(s);
            if let Arch::Gru { hidden: 0 } = arch {
                return Err(HarnessError::Config("GRU hidden size must be positive".into()));
            }
            let paired = std::mem::discriminant(&arch) == std::mem::discriminant(&paired_arch(s, 1));
            if !paired && !self.force {
                return Err(HarnessError::Config(format!(
                    "strategy {s} is not normally paired with a {} head (pass force to override)",
                    arch.name()
                )));
            }
        }
        Ok(())
    }
}

pub fn checkpoint_file_name(strategy: &str, repeat: usize, fold: usize) -> String {
    format!("{strategy}_r{repeat:02}_f{fold:02}.hed1")
}

fn class_index_of_steps<'a>(ids: impl IntoIterator<Item = &'a str>) -> Result<ClassIndex> {
    let index = ClassIndex::from_ids(ids);
    if index.is_empty() {
        return Err(HarnessError::Empty.into());
    }
    Ok(index)
}

/// Cross-validates a head over already embedded steps of one strategy.
pub fn evaluate_embedded(
    steps: &[EmbeddedStep],
    arch: Arch,
    train: &TrainConfig,
    plan: &CvPlan,
    models_dir: Option<&Path>,
) -> Result<EvalReport> {
    let index = class_index_of_steps(steps.iter().map(|s| s.subject_id.as_str()))?;
    let strategy = steps[0].strategy;
    if let Some(s) = steps.iter().find(|s| s.strategy != strategy) {
        return Err(HarnessError::Config(format!("mixed strategies: {} and {}", strategy, s.strategy)).into());
    }
    let items: Vec<CvItem<Vec<Vec<f64>>>> = steps
        .iter()
        .map(|s| CvItem {
            id: s.step_id.clone(),
            group: s.sequence_id.clone(),
            class: index.of(&s.subject_id).expect("indexed"),
            payload: s.descriptors.iter().map(|d| d.to_f64()).collect(),
        })
        .collect();
    let learner = HeadLearner {
        arch,
        cfg: train.clone(),
    };
    if let Some(dir) = models_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    }
    cross_validate(&items, index.len(), &learner, plan, strategy.as_str(), |ctx, p| {
        let (Some(dir), Some(model)) = (models_dir, p.head_model()) else {
            return Ok(());
        };
        let path = dir.join(checkpoint_file_name(strategy.as_str(), ctx.repeat, ctx.fold));
        let file = File::create(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let ck = Checkpoint::new(model.clone(), train.clone(), index.labels().to_vec());
        write_checkpoint(BufWriter::new(file), &ck)?;
        Ok(())
    })
}

/// Transforms and embeds every step for one strategy, one step at a time.
pub fn embed_steps(steps: &[StepSequence], strategy: Strategy, embedder: &dyn ImageEmbedder) -> Result<Vec<EmbeddedStep>> {
    let render = RenderConfig {
        size: embedder.input_size(),
    };
    steps
        .iter()
        .map(|s| Ok(embed_step(embedder, &transform_step(s, strategy, &render)?)?))
        .collect()
}

/// The full pipeline over preprocessed steps: for every configured
/// strategy, transform, embed and cross-validate.
pub fn run_experiment(cfg: &RunConfig, steps: &[StepSequence]) -> Result<EvalReport> {
    cfg.validate()?;
    if steps.is_empty() {
        return Err(HarnessError::Empty.into());
    }
    let embedder = load_embedder(&cfg.embedder)?;
    let mut report = EvalReport::default();
    for &strategy in &cfg.strategies {
        let embedded = embed_steps(steps, strategy, embedder.as_ref())?;
        let r = evaluate_embedded(
            &embedded,
            cfg.arch_for(strategy),
            &cfg.train,
            &cfg.cv,
            cfg.output.models.as_deref(),
        )?;
        report = report.merge(r)?;
    }
    Ok(report)
}

pub const BASELINE_NAME: &str = "wavelet";

/// Wavelet descriptor + quadratic SVM under the same CV protocol.
pub fn run_baseline(steps: &[StepSequence], plan: &CvPlan, svm: &SvmConfig) -> Result<EvalReport> {
    let index = class_index_of_steps(steps.iter().map(|s| s.subject_id.as_str()))?;
    let items = steps
        .iter()
        .map(|s| {
            Ok(CvItem {
                id: s.step_id.clone(),
                group: s.sequence_id.clone(),
                class: index.of(&s.subject_id).expect("indexed"),
                payload: wavelet_descriptor(s)?.values,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let learner = SvmLearner { cfg: *svm };
    cross_validate(&items, index.len(), &learner, plan, BASELINE_NAME, |_, _| Ok(()))
}

/// Published accuracy for a strategy name, for context only.
pub fn reference_accuracy(strategy: &str) -> Option<f64> {
    match strategy {
        BASELINE_NAME => Some(0.769),
        "max" => Some(0.7199),
        "avg" => Some(0.7841),
        "seq" => Some(0.8766),
        _ => None,
    }
}

pub const REFERENCE_NOTE: &str = "reference (not reproducible without original dataset)";

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub strategy: String,
    pub mean: f64,
    pub runs: usize,
    pub reference: Option<f64>,
}

/// Strategies by mean accuracy, best first; equal means sort by name.
pub fn compare_strategies(report: &EvalReport) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = report
        .aggregates()
        .into_iter()
        .map(|(strategy, mean)| SummaryRow {
            runs: report.rows().iter().filter(|r| r.strategy == strategy).count(),
            reference: reference_accuracy(&strategy),
            strategy,
            mean,
        })
        .collect();
    rows.sort_by(|a, b| b.mean.total_cmp(&a.mean).then_with(|| a.strategy.cmp(&b.strategy)));
    rows
}

pub fn format_comparison(rows: &[SummaryRow]) -> String {
    let mut out = format!("{:<10} {:>6} {:>10} {:>10}\n", "strategy", "runs", "accuracy", "reference");
    for r in rows {
        let reference = r.reference.map_or("-".to_string(), |v| format!("{:.2}%", v * 100.0));
        out.push_str(&format!(
            "{:<10} {:>6} {:>9.2}% {:>10}\n",
            r.strategy,
            r.runs,
            r.mean * 100.0,
            reference
        ));
    }
    out.push_str(&format!("reference column: {REFERENCE_NOTE}\n"));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::EvalRow;

    fn row(fold: usize, strategy: &str, accuracy: f64) -> EvalRow {
        EvalRow {
            repeat: 0,
            fold,
            strategy: strategy.into(),
            accuracy,
        }
    }

    #[test]
    fn comparison_order_and_ties() {
        let r = EvalReport::new(vec![
            row(0, "seq", 0.9),
            row(0, "max", 0.5),
            row(0, "avg", 0.5),
            row(1, "max", 0.5),
        ])
        .unwrap();
        let t = compare_strategies(&r);
        let names: Vec<_> = t.iter().map(|r| r.strategy.as_str()).collect();
        assert_eq!(names, ["seq", "avg", "max"]);
        assert_eq!(t[2].runs, 2);
        assert_eq!(t[0].reference, Some(0.8766));
        let single = compare_strategies(&EvalReport::new(vec![row(0, "x", 1.0)]).unwrap());
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].reference, None);
        assert!(format_comparison(&t).contains(REFERENCE_NOTE));
    }

    #[test]
    fn pairing_rules() {
        let mut cfg = RunConfig::default();
        cfg.validate().unwrap();
        cfg.head = Some(Arch::Softmax);
        assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))));
        cfg.force = true;
        cfg.validate().unwrap();
        cfg.strategies = vec![Strategy::MaxFrame];
        cfg.force = false;
        cfg.validate().unwrap();
    }

    #[test]
    fn run_config_json_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"strategies": ["avg"], "cv": {"folds": 5}}"#).unwrap();
        assert_eq!(cfg.strategies, vec![Strategy::AverageFrame]);
        assert_eq!(cfg.cv.folds, 5);
        assert_eq!(cfg.cv.repeats, 10);
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn class_index_sorted() {
        let idx = ClassIndex::from_ids(["s02", "s00", "s02", "s01"]);
        assert_eq!(idx.labels(), ["s00", "s01", "s02"]);
        assert_eq!(idx.of("s02"), Some(2));
        assert_eq!(idx.of("zz"), None);
    }
}
