mod common;

use common::rng;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use stepgrid::baseline::{
    descriptor_checksum, haar_fwt_1d, haar_fwt_2d, haar_ifwt_1d, kkt_violation, quadratic_kernel, solve_binary,
    svm_predict, svm_train, wavelet_coefficients, wavelet_descriptor, SvmConfig, SvmModel, WAVELET_DIM,
};
use stepgrid::preproc::{preprocess_sequence, PreprocConfig};
use stepgrid::synth::{generate_dataset, GenConfig};
use stepgrid::StepSequence;

fn pow2_vec() -> impl Strategy<Value = Vec<f64>> {
    (0u32..8).prop_flat_map(|k| prop::collection::vec(-100.0f64..100.0, 1usize << k))
}

proptest! {
    #[test]
    fn haar_preserves_energy_and_inverts(x in pow2_vec()) {
        let c = haar_fwt_1d(&x).unwrap();
        let (ex, ec): (f64, f64) = (x.iter().map(|v| v * v).sum(), c.iter().map(|v| v * v).sum());
        prop_assert!((ex - ec).abs() <= 1e-9 * ex.max(1.0));
        let back = haar_ifwt_1d(&c).unwrap();
        for (a, b) in x.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn haar_doubling_is_exact(x in pow2_vec()) {
        let c = haar_fwt_1d(&x).unwrap();
        let doubled: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let d = haar_fwt_1d(&doubled).unwrap();
        for (a, b) in c.iter().zip(&d) {
            prop_assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn haar_2d_preserves_energy(k in 0u32..5, seed in any::<u64>()) {
        let n = 1usize << k;
        let mut r = rng(seed);
        let x: Vec<f64> = (0..n * n).map(|_| r.random_range(-5.0..5.0)).collect();
        let mut c = x.clone();
        haar_fwt_2d(&mut c, n).unwrap();
        let (ex, ec): (f64, f64) = (x.iter().map(|v| v * v).sum(), c.iter().map(|v| v * v).sum());
        prop_assert!((ex - ec).abs() <= 1e-9 * ex.max(1.0));
    }
}

fn synthetic_steps(subjects: usize, seqs: usize) -> Vec<StepSequence> {
    let cfg = GenConfig {
        num_subjects: subjects,
        sequences_per_subject: seqs,
        seed: 42,
        ..GenConfig::default()
    };
    generate_dataset(&cfg)
        .unwrap()
        .iter()
        .flat_map(|s| preprocess_sequence(s, &PreprocConfig::default()).unwrap())
        .map(|(step, _)| step)
        .collect()
}

#[test]
fn descriptor_shape_and_golden_checksum() {
    let steps = synthetic_steps(2, 1);
    let d = wavelet_descriptor(&steps[0]).unwrap();
    assert_eq!(d.values.len(), WAVELET_DIM);
    assert_eq!(d.step_id, steps[0].step_id);
    let vol = wavelet_coefficients(&steps[0]).unwrap();
    assert_eq!(vol.len(), 16 * 16 * 16);
    assert_eq!(descriptor_checksum(&d.values), GOLDEN);
}

/// Recorded from seed 42; any change to synthesis, preprocessing or the
/// descriptor moves it.
const GOLDEN: u64 = 2680514929363795423;

/// Tallies pairwise votes straight from the machines' support vectors.
fn oracle_predict(model: &SvmModel, x: &[f64]) -> usize {
    let k = model.classes.len();
    let mut votes = vec![0usize; k];
    let mut score = vec![0.0f64; k];
    for m in &model.machines {
        let mut f = m.b;
        for (s, c) in m.support.iter().zip(&m.coef) {
            let dot: f64 = s.iter().zip(x).map(|(a, b)| a * b).sum();
            f += c * (dot + 1.0) * (dot + 1.0);
        }
        let p = model.classes.iter().position(|&c| c == m.pos).unwrap();
        let q = model.classes.iter().position(|&c| c == m.neg).unwrap();
        votes[if f > 0.0 { p } else { q }] += 1;
        score[p] += f;
        score[q] -= f;
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| votes[b].cmp(&votes[a]).then(score[b].total_cmp(&score[a])).then(a.cmp(&b)));
    model.classes[order[0]]
}

fn blobs(r: &mut impl Rng, classes: usize, per: usize, dim: usize, spread: f64) -> Vec<(Vec<f64>, usize)> {
    let centers: Vec<Vec<f64>> = (0..classes).map(|_| (0..dim).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
    let mut out = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per {
            out.push((center.iter().map(|v| v + r.random_range(-spread..spread)).collect(), c * 3 + 1));
        }
    }
    out
}

#[test]
fn votes_match_brute_force_tally() {
    let mut r = rng(31);
    for _ in 0..10 {
        let data = blobs(&mut r, 4, 8, 3, 1.5);
        let model = svm_train(&data, &SvmConfig::default()).unwrap();
        assert_eq!(model.machines.len(), 6);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| r.random_range(-4.0..4.0)).collect();
            assert_eq!(svm_predict(&model, &x).unwrap(), oracle_predict(&model, &x));
        }
    }
}

#[test]
fn binary_solutions_satisfy_kkt() {
    let mut r = rng(32);
    for c in [0.1, 1.0, 10.0] {
        let data = blobs(&mut r, 2, 20, 4, 2.5);
        let n = data.len();
        let y: Vec<f64> = data.iter().map(|d| if d.1 == 1 { 1.0 } else { -1.0 }).collect();
        let kernel: Vec<f64> = (0..n * n).map(|k| quadratic_kernel(&data[k / n].0, &data[k % n].0)).collect();
        let cfg = SvmConfig {
            c_reg: c,
            ..SvmConfig::default()
        };
        let sol = solve_binary(&kernel, &y, &cfg).unwrap();
        let eq: f64 = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(eq.abs() < 1e-6);
        assert!(sol.alpha.iter().all(|&a| (0.0..=c).contains(&a)));
        assert!(kkt_violation(&kernel, &y, &sol.alpha, c) <= 1e-3);
    }
}

#[test]
fn training_order_does_not_change_predictions() {
    let mut r = rng(33);
    let data = blobs(&mut r, 3, 15, 2, 0.4);
    let model = svm_train(&data, &SvmConfig::default()).unwrap();
    for _ in 0..5 {
        let mut shuffled = data.clone();
        shuffled.shuffle(&mut r);
        let other = svm_train(&shuffled, &SvmConfig::default()).unwrap();
        for (x, label) in &data {
            assert_eq!(svm_predict(&other, x).unwrap(), *label);
            assert_eq!(svm_predict(&model, x).unwrap(), *label);
        }
    }
}

#[test]
fn wavelet_svm_separates_synthetic_subjects() {
    let steps = synthetic_steps(3, 4);
    let data: Vec<(Vec<f64>, usize)> = steps
        .iter()
        .map(|s| (wavelet_descriptor(s).unwrap().values, s.subject_id[1..].parse().unwrap()))
        .collect();
    let model = svm_train(&data, &SvmConfig::default()).unwrap();
    let hits = data.iter().filter(|(x, y)| svm_predict(&model, x).unwrap() == *y).count();
    assert_eq!(hits, data.len());
}
