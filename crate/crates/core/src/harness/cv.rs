//! Repeated stratified cross-validation over arbitrary learners.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::folds::{make_folds, CvPlan, Grouping};
use super::HarnessError;
use crate::baseline::{svm_predict, svm_train, SvmConfig, SvmModel};
use crate::error::Result;
use crate::heads::{train_head, Arch, HeadModel, Sample, TrainConfig};
use crate::report::{EvalReport, EvalRow};
use crate::synth::mix_seed;

/// One evaluation unit: a step with its recording, class and payload.
#[derive(Debug, Clone, PartialEq)]
pub struct CvItem<T> {
    pub id: String,
    /// Recording the step came from.
    pub group: String,
    pub class: usize,
    pub payload: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FoldContext {
    pub repeat: usize,
    pub fold: usize,
    /// Seed derived from the learner seed and `(repeat, fold)`.
    pub seed: u64,
}

impl FoldContext {
    pub fn new(base_seed: u64, repeat: usize, fold: usize) -> Self {
        Self {
            repeat,
            fold,
            seed: mix_seed(mix_seed(base_seed, repeat as u64), fold as u64),
        }
    }
}

pub trait Predictor<T> {
    fn predict(&self, x: &T) -> Result<usize>;

    /// The trained head, for predictors that are backed by one.
    fn head_model(&self) -> Option<&HeadModel> {
        None
    }
}

pub trait Learner<T> {
    fn fit(&self, train: &[(&T, usize)], classes: usize, ctx: &FoldContext) -> Result<Box<dyn Predictor<T>>>;
}

/// Fold assignment of every item, as a fold index per item.
fn assign_folds<T>(items: &[CvItem<T>], plan: &CvPlan, repeat: usize) -> Result<Vec<usize>> {
    let (units, unit_of): (Vec<(String, usize)>, Vec<&str>) = match plan.grouping {
        Grouping::ByStep => (
            items.iter().map(|it| (it.id.clone(), it.class)).collect(),
            items.iter().map(|it| it.id.as_str()).collect(),
        ),
        Grouping::BySequence => {
            let mut groups: BTreeMap<&str, usize> = BTreeMap::new();
            for it in items {
                if let Some(&c) = groups.get(it.group.as_str()) {
                    if c != it.class {
                        return Err(HarnessError::MixedGroup(it.group.clone()).into());
                    }
                }
                groups.insert(&it.group, it.class);
            }
            (
                groups.into_iter().map(|(g, c)| (g.to_string(), c)).collect(),
                items.iter().map(|it| it.group.as_str()).collect(),
            )
        }
    };
    let folds = make_folds(&units, plan, repeat)?;
    let mut fold_of: HashMap<&str, usize> = HashMap::new();
    for (k, fold) in folds.iter().enumerate() {
        for id in fold {
            fold_of.insert(id.as_str(), k);
        }
    }
    Ok(unit_of.iter().map(|u| fold_of[u]).collect())
}

/// Train/test index split for one fold, with the no-leakage checks.
pub fn split_fold<T>(
    items: &[CvItem<T>],
    fold_of: &[usize],
    fold: usize,
    repeat: usize,
    grouping: Grouping,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let (test, train): (Vec<usize>, Vec<usize>) = (0..items.len()).partition(|&i| fold_of[i] == fold);
    let test_ids: HashSet<&str> = test.iter().map(|&i| items[i].id.as_str()).collect();
    let test_groups: HashSet<&str> = test.iter().map(|&i| items[i].group.as_str()).collect();
    for &i in &train {
        let leaked = test_ids.contains(items[i].id.as_str())
            || (grouping == Grouping::BySequence && test_groups.contains(items[i].group.as_str()));
        if leaked {
            return Err(HarnessError::Leakage {
                repeat,
                fold,
                id: items[i].id.clone(),
            }
            .into());
        }
    }
    Ok((train, test))
}

/// Runs every `(repeat, fold)` of `plan`, recording accuracy under the name
/// `strategy`. `on_fold` sees each trained predictor before it is dropped.
pub fn cross_validate<T, F>(
    items: &[CvItem<T>],
    classes: usize,
    learner: &dyn Learner<T>,
    plan: &CvPlan,
    strategy: &str,
    mut on_fold: F,
) -> Result<EvalReport>
where
    F: FnMut(&FoldContext, &dyn Predictor<T>) -> Result<()>,
{
    plan.validate()?;
    let mut rows = Vec::with_capacity(plan.repeats * plan.folds);
    for repeat in 0..plan.repeats {
        let fold_of = assign_folds(items, plan, repeat)?;
        for fold in 0..plan.folds {
            let (train, test) = split_fold(items, &fold_of, fold, repeat, plan.grouping)?;
            let present: HashSet<usize> = train.iter().map(|&i| items[i].class).collect();
            let all: HashSet<usize> = items.iter().map(|it| it.class).collect();
            if let Some(&class) = all.difference(&present).min() {
                return Err(HarnessError::MissingClass { repeat, fold, class }.into());
            }
            let ctx = FoldContext::new(plan.seed, repeat, fold);
            let train_set: Vec<(&T, usize)> = train.iter().map(|&i| (&items[i].payload, items[i].class)).collect();
            let model = learner.fit(&train_set, classes, &ctx)?;
            let mut correct = 0usize;
            for &i in &test {
                correct += usize::from(model.predict(&items[i].payload)? == items[i].class);
            }
            on_fold(&ctx, model.as_ref())?;
            rows.push(EvalRow {
                repeat,
                fold,
                strategy: strategy.to_string(),
                accuracy: correct as f64 / test.len() as f64,
            });
        }
    }
    EvalReport::new(rows)
}

/// Trains a fresh head on every fold.
#[derive(Debug, Clone)]
pub struct HeadLearner {
    pub arch: Arch,
    pub cfg: TrainConfig,
}

struct HeadPredictor(HeadModel);

impl Predictor<Vec<Vec<f64>>> for HeadPredictor {
    fn predict(&self, x: &Vec<Vec<f64>>) -> Result<usize> {
        Ok(self.0.predict(x)?)
    }

    fn head_model(&self) -> Option<&HeadModel> {
        Some(&self.0)
    }
}

impl Learner<Vec<Vec<f64>>> for HeadLearner {
    fn fit(
        &self,
        train: &[(&Vec<Vec<f64>>, usize)],
        classes: usize,
        ctx: &FoldContext,
    ) -> Result<Box<dyn Predictor<Vec<Vec<f64>>>>> {
        let data: Vec<Sample> = train
            .iter()
            .map(|(x, label)| Sample {
                inputs: (*x).clone(),
                label: *label,
            })
            .collect();
        let cfg = TrainConfig {
            seed: mix_seed(self.cfg.seed, ctx.seed),
            ..self.cfg.clone()
        };
        let out = train_head(&data, classes, self.arch, &cfg)?;
        Ok(Box::new(HeadPredictor(out.model)))
    }
}

#[derive(Debug, Clone, Default)]
pub struct SvmLearner {
    pub cfg: SvmConfig,
}

struct SvmPredictor(SvmModel);

impl Predictor<Vec<f64>> for SvmPredictor {
    fn predict(&self, x: &Vec<f64>) -> Result<usize> {
        Ok(svm_predict(&self.0, x)?)
    }
}

impl Learner<Vec<f64>> for SvmLearner {
    fn fit(&self, train: &[(&Vec<f64>, usize)], _classes: usize, _ctx: &FoldContext) -> Result<Box<dyn Predictor<Vec<f64>>>> {
        let data: Vec<(Vec<f64>, usize)> = train.iter().map(|(x, c)| ((*x).clone(), *c)).collect();
        Ok(Box::new(SvmPredictor(svm_train(&data, &self.cfg)?)))
    }
}

/// Test seam: payloads are the true labels and are echoed back.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleLearner;

struct Echo;

impl Predictor<usize> for Echo {
    fn predict(&self, x: &usize) -> Result<usize> {
        Ok(*x)
    }
}

impl Learner<usize> for OracleLearner {
    fn fit(&self, _: &[(&usize, usize)], _: usize, _: &FoldContext) -> Result<Box<dyn Predictor<usize>>> {
        Ok(Box::new(Echo))
    }
}

/// Always predicts the most frequent training class (lowest on ties).
#[derive(Debug, Clone, Copy, Default)]
pub struct MajorityLearner;

struct Constant(usize);

impl<T> Predictor<T> for Constant {
    fn predict(&self, _: &T) -> Result<usize> {
        Ok(self.0)
    }
}

impl<T> Learner<T> for MajorityLearner {
    fn fit(&self, train: &[(&T, usize)], classes: usize, _: &FoldContext) -> Result<Box<dyn Predictor<T>>> {
        let mut counts = vec![0usize; classes];
        for (_, c) in train {
            counts[*c] += 1;
        }
        let best = (0..classes).fold(0, |b, c| if counts[c] > counts[b] { c } else { b });
        Ok(Box::new(Constant(best)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn items(classes: usize, per: usize) -> Vec<CvItem<usize>> {
        (0..classes)
            .flat_map(|c| {
                (0..per).map(move |i| CvItem {
                    id: format!("s{c}_q{}_step{i}", i / 3),
                    group: format!("s{c}_q{}", i / 3),
                    class: c,
                    payload: c,
                })
            })
            .collect()
    }

    #[test]
    fn oracle_scores_one() {
        let data = items(4, 30);
        let plan = CvPlan {
            repeats: 2,
            ..CvPlan::default()
        };
        let r = cross_validate(&data, 4, &OracleLearner, &plan, "oracle", |_, _| Ok(())).unwrap();
        assert_eq!(r.rows().len(), 20);
        assert_eq!(r.mean("oracle"), Some(1.0));
    }

    #[test]
    fn majority_is_chance_on_balanced_data() {
        let data = items(13, 40);
        let plan = CvPlan {
            repeats: 1,
            ..CvPlan::default()
        };
        let r = cross_validate(&data, 13, &MajorityLearner, &plan, "maj", |_, _| Ok(())).unwrap();
        let mean = r.mean("maj").unwrap();
        assert!((mean - 1.0 / 13.0).abs() < 0.05, "{mean}");
    }

    #[test]
    fn by_sequence_keeps_recordings_together() {
        let data = items(3, 30);
        let plan = CvPlan {
            repeats: 1,
            grouping: Grouping::BySequence,
            ..CvPlan::default()
        };
        let fold_of = assign_folds(&data, &plan, 0).unwrap();
        for (a, x) in data.iter().enumerate() {
            for (b, y) in data.iter().enumerate() {
                if x.group == y.group {
                    assert_eq!(fold_of[a], fold_of[b]);
                }
            }
        }
        for fold in 0..plan.folds {
            split_fold(&data, &fold_of, fold, 0, plan.grouping).unwrap();
        }
    }

    #[test]
    fn failed_fold_aborts() {
        struct Fails;
        impl Learner<usize> for Fails {
            fn fit(&self, _: &[(&usize, usize)], _: usize, ctx: &FoldContext) -> Result<Box<dyn Predictor<usize>>> {
                if ctx.fold == 3 {
                    return Err(HarnessError::Config("boom".into()).into());
                }
                Ok(Box::new(Echo))
            }
        }
        let data = items(2, 20);
        assert!(cross_validate(&data, 2, &Fails, &CvPlan::default(), "x", |_, _| Ok(())).is_err());
    }
}
