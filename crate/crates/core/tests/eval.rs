use graphseg_core::data::{synthetic_piecewise, Generator, SegmentSpec};
use graphseg_core::eval::{boxplot_stats, prf1, quantile_sorted, spearman};
use graphseg_core::nas::{pareto_front, TrialConfig, TrialResult};
use graphseg_core::unsupervised::{hungarian, kmeans_cluster, match_labels, unsupervised_segment, UnsupervisedOptions};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Per-class counts straight from the definition, no confusion matrix.
fn oracle_f1(pred: &[usize], truth: &[usize], c: usize) -> (f64, f64, f64) {
    let n = truth.len() as f64;
    let (mut weighted, mut macro_sum, mut present) = (0.0, 0.0, 0);
    for k in 0..c {
        let tp = pred.iter().zip(truth).filter(|&(&p, &t)| p == k && t == k).count() as f64;
        let fp = pred.iter().zip(truth).filter(|&(&p, &t)| p == k && t != k).count() as f64;
        let fn_ = pred.iter().zip(truth).filter(|&(&p, &t)| p != k && t == k).count() as f64;
        let f1 = if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fn_) };
        weighted += (tp + fn_) / n * f1;
        if tp + fp + fn_ > 0.0 {
            present += 1;
            macro_sum += f1;
        }
    }
    let acc = pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / n;
    (weighted, macro_sum / present as f64, acc)
}

#[test]
fn prf1_matches_count_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let c = rng.random_range(1..6);
        let n = rng.random_range(1..60);
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let m = prf1(&pred, &truth, None, c).unwrap();
        let (w, mac, acc) = oracle_f1(&pred, &truth, c);
        assert!((m.weighted.f1 - w).abs() < 1e-12);
        assert!((m.macro_avg.f1 - mac).abs() < 1e-12);
        assert!((m.accuracy - acc).abs() < 1e-12);
        assert_eq!(m.total, n);
    }
}

#[test]
fn prf1_mask_equals_subset() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let n = rng.random_range(2..50);
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let mut mask: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        mask[0] = true;
        let keep = |v: &[usize]| v.iter().zip(&mask).filter(|p| *p.1).map(|p| *p.0).collect::<Vec<_>>();
        let a = prf1(&pred, &truth, Some(&mask), 3).unwrap();
        let b = prf1(&keep(&pred), &keep(&truth), None, 3).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn perfect_and_all_wrong() {
    let t = [0, 1, 2, 1, 0];
    assert_eq!(prf1(&t, &t, None, 3).unwrap().weighted.f1, 1.0);
    assert_eq!(prf1(&[1, 2, 0, 0, 1], &t, None, 3).unwrap().weighted.f1, 0.0);
    assert!(prf1(&t, &t, Some(&[false; 5]), 3).is_err());
}

#[test]
fn boxplot_hand_cases() {
    let b = boxplot_stats(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
    assert_eq!((b.q1, b.median, b.q3, b.whisker_low, b.whisker_high), (2.0, 3.0, 4.0, 1.0, 5.0));
    assert!(b.outliers.is_empty());
    let b = boxplot_stats(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
    assert_eq!(b.outliers, vec![100.0]);
    assert_eq!(b.whisker_high, 4.0);
    assert_eq!(b.mean, 22.0);
    let b = boxplot_stats(&[7.0]).unwrap();
    assert_eq!((b.q1, b.median, b.q3), (7.0, 7.0, 7.0));
    assert!(boxplot_stats(&[]).is_err());
    assert_eq!(quantile_sorted(&[0.0, 10.0], 0.25), 2.5);
}

#[test]
fn spearman_cases() {
    assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
    assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).is_nan());
}

fn dominated(a: &TrialResult, by: &TrialResult) -> bool {
    by.params <= a.params && by.mean_f1 >= a.mean_f1 && (by.params < a.params || by.mean_f1 > a.mean_f1)
}

#[test]
fn pareto_matches_exhaustive_dominance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let config = TrialConfig { layers: 2, hidden: 8, heads: Some(1), lr: 1e-3, weight_decay: 0.0 };
    for _ in 0..1000 {
        let n = rng.random_range(1..25);
        let results: Vec<TrialResult> = (0..n)
            .map(|trial| TrialResult {
                trial,
                config,
                params: rng.random_range(1..10),
                mean_f1: f64::from(rng.random_range(0..8u8)) / 8.0,
            })
            .collect();
        let front = pareto_front(&results);
        // oracle: non-dominated, first of each (params, f1) duplicate group
        let want: Vec<usize> = results
            .iter()
            .filter(|a| !results.iter().any(|b| dominated(a, b)))
            .filter(|a| !results.iter().any(|b| b.trial < a.trial && b.params == a.params && b.mean_f1 == a.mean_f1))
            .map(|a| a.trial)
            .collect();
        let mut got: Vec<usize> = front.iter().map(|r| r.trial).collect();
        got.sort_unstable();
        assert_eq!(got, want);
        assert!(front.windows(2).all(|w| w[0].params < w[1].params && w[0].mean_f1 < w[1].mean_f1));
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn hungarian_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..300 {
        let rows = rng.random_range(1..5);
        let cols = rng.random_range(rows..6);
        let cost: Vec<Vec<f64>> =
            (0..rows).map(|_| (0..cols).map(|_| f64::from(rng.random_range(-9..10i8))).collect()).collect();
        let got = hungarian(&cost);
        let mut seen = got.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), rows);
        let total = |a: &[usize]| (0..rows).map(|r| cost[r][a[r]]).sum::<f64>();
        let best = permutations(cols).iter().map(|p| total(&p[..rows])).fold(f64::INFINITY, f64::min);
        assert_eq!(total(&got), best);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn kmeans_inertia_never_increases(
        pts in prop::collection::vec(prop::collection::vec(-10.0..10.0f64, 3), 4..40),
        k in 1usize..4,
        seed in 0u64..100,
    ) {
        let r = kmeans_cluster(&pts, k, seed).unwrap();
        prop_assert_eq!(r.labels.len(), pts.len());
        prop_assert!(r.labels.iter().all(|&l| l < k));
        for w in r.inertia.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9);
        }
        prop_assert_eq!(kmeans_cluster(&pts, k, seed).unwrap(), r);
    }

    #[test]
    fn matching_is_invariant_to_cluster_renaming(truth in prop::collection::vec(0usize..3, 1..40)) {
        let mut perm = [0, 1, 2];
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(truth.len() as u64));
        let renamed: Vec<usize> = truth.iter().map(|&t| perm[t]).collect();
        prop_assert_eq!(match_labels(&renamed, &truth).unwrap().0, truth);
    }
}

#[test]
fn unsupervised_recovers_clean_steps() {
    let g = |level| Generator::ConstantNoise { level, sigma: 0.1 };
    let specs = [SegmentSpec::new(200, g(0.0)), SegmentSpec::new(200, g(5.0)), SegmentSpec::new(200, g(-5.0))];
    let series = synthetic_piecewise("steps", &specs, 9).unwrap();
    let r = unsupervised_segment(&series, &UnsupervisedOptions::default()).unwrap();
    assert_eq!(r.change_points.len(), 2);
    for (cp, want) in r.change_points.iter().zip([200, 400]) {
        assert!(cp.abs_diff(want) <= 10, "{:?}", r.change_points);
    }
    assert!(r.metrics.weighted.f1 > 0.95);
}

#[test]
fn unsupervised_on_shuffled_series_is_near_chance() {
    let g = |level| Generator::ConstantNoise { level, sigma: 0.1 };
    let mut series = synthetic_piecewise("steps", &[SegmentSpec::new(300, g(0.0)), SegmentSpec::new(300, g(5.0))], 9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    series.values.shuffle(&mut rng);
    let r = unsupervised_segment(&series, &UnsupervisedOptions::default()).unwrap();
    assert!(r.metrics.weighted.f1 < 0.75, "{}", r.metrics.weighted.f1);
}
