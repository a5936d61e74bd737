//! Ranking metrics against pairwise and per-positive definitions.

mod common;

use common::rng;
use odernn::metrics::{aupr, f1_score, mean_std, roc_auc, roc_auc_trapezoid};
use proptest::prelude::*;
use rand::Rng;

/// Fraction of (positive, negative) pairs ordered correctly, ties counting half.
fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1.0;
                num += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / pairs
}

/// Mean over positives of the precision among everything scored at least as high.
fn average_precision(scores: &[f64], labels: &[bool]) -> f64 {
    let pos: Vec<usize> = (0..scores.len()).filter(|&i| labels[i]).collect();
    pos.iter()
        .map(|&i| {
            let above: Vec<usize> = (0..scores.len())
                .filter(|&j| scores[j] >= scores[i])
                .collect();
            above.iter().filter(|&&j| labels[j]).count() as f64 / above.len() as f64
        })
        .sum::<f64>()
        / pos.len() as f64
}

fn random_set(seed: u64) -> (Vec<f64>, Vec<bool>) {
    let mut r = rng(seed);
    let n = r.random_range(2..=200);
    let coarse = r.random_bool(0.5);
    loop {
        let labels: Vec<bool> = (0..n).map(|_| r.random_bool(0.5)).collect();
        if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
            let scores = (0..n)
                .map(|i| {
                    let s: f64 = r.random_range(0.0..1.0) + if labels[i] { 0.2 } else { 0.0 };
                    // coarse scores create many ties
                    if coarse {
                        (s * 8.0).round() / 8.0
                    } else {
                        s
                    }
                })
                .collect();
            return (scores, labels);
        }
    }
}

#[test]
fn worked_example() {
    let scores = [0.8, 0.6, 0.4, 0.2];
    let labels = [true, false, true, false];
    assert_eq!(roc_auc(&scores, &labels).unwrap(), 0.75);
    assert_eq!(roc_auc_trapezoid(&scores, &labels).unwrap(), 0.75);
    assert_eq!(pairwise_auc(&scores, &labels), 0.75);
}

#[test]
fn three_auc_implementations_agree() {
    for seed in 0..50 {
        let (s, l) = random_set(seed);
        let pairwise = pairwise_auc(&s, &l);
        assert!(
            (roc_auc(&s, &l).unwrap() - pairwise).abs() < 1e-10,
            "seed {seed}"
        );
        assert!(
            (roc_auc_trapezoid(&s, &l).unwrap() - pairwise).abs() < 1e-10,
            "seed {seed}"
        );
    }
}

#[test]
fn aupr_matches_per_positive_precision() {
    for seed in 0..50 {
        let (s, l) = random_set(seed);
        assert!((aupr(&s, &l).unwrap() - average_precision(&s, &l)).abs() < 1e-10);
    }
}

#[test]
fn f1_counts() {
    // tp 2 (0.9, 0.5), fp 1 (0.7), fn 1 (0.2)
    let s = [0.9, 0.7, 0.5, 0.2, 0.1];
    let l = [true, false, true, true, false];
    assert!((f1_score(&s, &l, 0.5).unwrap() - 4.0 / 6.0).abs() < 1e-15);
    assert_eq!(f1_score(&s, &l, 0.95).unwrap(), 0.0);
}

#[test]
fn fold_std_is_population() {
    let m = mean_std(&[0.7, 0.8, 0.9, 0.8, 0.8]).unwrap();
    assert!((m.mean - 0.8).abs() < 1e-12);
    assert!((m.std - 0.004f64.sqrt()).abs() < 1e-12);
}

proptest! {
    #[test]
    fn auc_is_invariant_to_monotone_transforms(seed in 0u64..100_000, k in 0.1f64..5.0) {
        let (s, l) = random_set(seed);
        let t: Vec<f64> = s.iter().map(|x| (k * x).exp() * 3.0 - 1.0).collect();
        prop_assert!((roc_auc(&s, &l).unwrap() - roc_auc(&t, &l).unwrap()).abs() < 1e-12);
        prop_assert!((aupr(&s, &l).unwrap() - aupr(&t, &l).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn flipping_scores_mirrors_auc(seed in 0u64..100_000) {
        let (s, l) = random_set(seed);
        let neg: Vec<f64> = s.iter().map(|x| -x).collect();
        prop_assert!((roc_auc(&s, &l).unwrap() + roc_auc(&neg, &l).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_stay_in_unit_interval(seed in 0u64..100_000) {
        let (s, l) = random_set(seed);
        for v in [roc_auc(&s, &l).unwrap(), aupr(&s, &l).unwrap(), f1_score(&s, &l, 0.5).unwrap()] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
