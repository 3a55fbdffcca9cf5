mod common;

use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;
use stepgrid::harness::{
    cross_validate, make_folds, run_baseline, run_experiment, split_fold, verify_partition, CvItem, CvPlan, Grouping,
    MajorityLearner, OracleLearner, RunConfig,
};
use stepgrid::baseline::SvmConfig;
use stepgrid::embed::EmbedderSpec;
use stepgrid::heads::TrainConfig;
use stepgrid::preproc::{preprocess_sequence, PreprocConfig};
use stepgrid::synth::{generate_dataset, generate_temporal_twin_dataset, GenConfig};
use stepgrid::transform::{transform_step, RenderConfig};
use stepgrid::{Strategy, StepSequence};

fn labelled(counts: &[usize]) -> Vec<(String, usize)> {
    counts
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| (0..n).map(move |i| (format!("c{c}_{i:03}"), c)))
        .collect()
}

proptest! {
    #[test]
    fn folds_partition_and_stratify(
        counts in prop::collection::vec(5usize..40, 2..8),
        folds in 2usize..6,
        seed in any::<u64>(),
        repeat in 0usize..4,
    ) {
        let labels = labelled(&counts);
        let plan = CvPlan { folds, repeats: repeat + 1, seed, grouping: Grouping::ByStep };
        let split = make_folds(&labels, &plan, repeat).unwrap();
        prop_assert_eq!(split.len(), folds);
        verify_partition(&labels, &split).unwrap();
        let class_of: BTreeMap<&str, usize> = labels.iter().map(|(id, c)| (id.as_str(), *c)).collect();
        for (c, &n) in counts.iter().enumerate() {
            let per: Vec<usize> = split.iter().map(|f| f.iter().filter(|id| class_of[id.as_str()] == c).count()).collect();
            prop_assert!(per.iter().all(|&k| k == n / folds || k == n / folds + 1), "{:?}", per);
        }
        let sizes: Vec<usize> = split.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1, "{:?}", sizes);
        prop_assert_eq!(make_folds(&labels, &plan, repeat).unwrap(), split);
    }
}

fn toy_items(classes: usize, per: usize, steps_per_group: usize) -> Vec<CvItem<usize>> {
    (0..classes * per)
        .map(|i| {
            let class = i % classes;
            let k = i / classes;
            CvItem {
                id: format!("x{i:04}"),
                group: format!("g{class}_{}", k / steps_per_group),
                class,
                payload: class,
            }
        })
        .collect()
}

#[test]
fn oracle_and_majority_learners_bracket_accuracy() {
    let items = toy_items(13, 40, 1);
    let plan = CvPlan {
        repeats: 2,
        ..CvPlan::default()
    };
    let oracle = cross_validate(&items, 13, &OracleLearner, &plan, "oracle", |_, _| Ok(())).unwrap();
    assert_eq!(oracle.rows().len(), 20);
    assert!(oracle.rows().iter().all(|r| r.accuracy == 1.0));
    let majority = cross_validate(&items, 13, &MajorityLearner, &plan, "majority", |_, _| Ok(())).unwrap();
    let m = majority.mean("majority").unwrap();
    assert!((m - 1.0 / 13.0).abs() < 0.01, "{m}");
}

#[test]
fn sequence_grouping_never_splits_a_recording() {
    let items = toy_items(4, 36, 3);
    let plan = CvPlan {
        folds: 4,
        repeats: 3,
        seed: 9,
        grouping: Grouping::BySequence,
    };
    let mut seen = 0;
    cross_validate(&items, 4, &OracleLearner, &plan, "o", |ctx, _| {
        seen += 1;
        assert!(ctx.fold < 4 && ctx.repeat < 3);
        Ok(())
    })
    .unwrap();
    assert_eq!(seen, 12);
    // a hand-made assignment that splits one recording is refused
    let mut fold_of = vec![0; items.len()];
    fold_of[0] = 1;
    assert!(split_fold(&items, &fold_of, 1, 0, Grouping::BySequence).is_err());
    assert!(split_fold(&items, &fold_of, 1, 0, Grouping::ByStep).is_ok());
}

fn steps_of(seqs: &[stepgrid::PressureSequence]) -> Vec<StepSequence> {
    seqs.iter()
        .flat_map(|s| preprocess_sequence(s, &PreprocConfig::default()).unwrap())
        .map(|(s, _)| s)
        .collect()
}

#[test]
fn twins_share_their_still_images() {
    let cfg = GenConfig {
        num_subjects: 4,
        sequences_per_subject: 2,
        noise_sigma: 0.0,
        ..GenConfig::default()
    };
    let steps = steps_of(&generate_temporal_twin_dataset(&cfg).unwrap());
    let render = RenderConfig { size: 32 };
    let by_id: BTreeMap<(String, String), &StepSequence> = steps
        .iter()
        .map(|s| ((s.subject_id.clone(), s.step_id.clone()), s))
        .collect();
    let mut pairs = 0;
    for ((subject, step_id), s) in &by_id {
        let k: usize = subject[1..].parse().unwrap();
        if k % 2 == 1 {
            continue;
        }
        let twin_subject = stepgrid::synth::subject_id(k + 1);
        let twin_step = step_id.replacen(&subject[..], &twin_subject, 1);
        let t = by_id[&(twin_subject.clone(), twin_step)];
        assert_eq!(s.len(), t.len());
        for strategy in [Strategy::MaxFrame, Strategy::AverageFrame] {
            let a = transform_step(s, strategy, &render).unwrap();
            let b = transform_step(t, strategy, &render).unwrap();
            assert_eq!(a.images, b.images, "{step_id} {strategy}");
        }
        let a = transform_step(s, Strategy::FullSequence, &render).unwrap();
        let b = transform_step(t, Strategy::FullSequence, &render).unwrap();
        let mut reversed = b.images.clone();
        reversed.reverse();
        assert_ne!(a.images, b.images);
        assert_eq!(a.images, reversed);
        pairs += 1;
    }
    assert_eq!(pairs, 2 * 2 * cfg.steps_per_sequence);
}

#[test]
fn mock_pipeline_reports_every_strategy_and_fold() {
    let gen = GenConfig {
        num_subjects: 6,
        sequences_per_subject: 4,
        ..GenConfig::default()
    };
    let steps = steps_of(&generate_dataset(&gen).unwrap());
    let subjects: HashSet<&str> = steps.iter().map(|s| s.subject_id.as_str()).collect();
    assert_eq!(subjects.len(), 6);
    let cfg = RunConfig {
        embedder: EmbedderSpec::mock(3, 32, 48),
        gru_hidden: 8,
        train: TrainConfig {
            epochs: 15,
            learning_rate: 0.01,
            ..TrainConfig::default()
        },
        cv: CvPlan {
            folds: 4,
            repeats: 2,
            ..CvPlan::default()
        },
        ..RunConfig::default()
    };
    let report = run_experiment(&cfg, &steps).unwrap();
    assert_eq!(report.rows().len(), 3 * 4 * 2);
    assert_eq!(report.strategies(), vec!["avg", "max", "seq"]);
    for r in report.rows() {
        assert!((0.0..=1.0).contains(&r.accuracy));
    }
    for s in ["avg", "max", "seq"] {
        assert!(report.mean(s).unwrap() > 1.0 / 6.0, "{s}: {:?}", report.mean(s));
    }
    assert_eq!(run_experiment(&cfg, &steps).unwrap(), report);

    let baseline = run_baseline(&steps, &cfg.cv, &SvmConfig::default()).unwrap();
    assert_eq!(baseline.rows().len(), 8);
    assert!(baseline.mean("wavelet").unwrap() > 0.9);
}
