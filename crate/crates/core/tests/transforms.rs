use std::collections::{BTreeMap, BTreeSet};

use graphseg_core::graph::{merge_max, TsGraph, Weighting};
use graphseg_core::transforms::{
    brute_force_visibility, hvg, knn_graph, mtf_graph, nvg, wdpvg, ProximityOptions, Sparsify, VisibilityKind,
    VisibilityOptions,
};
use proptest::prelude::*;

fn pairs(g: &TsGraph) -> BTreeSet<(usize, usize)> {
    g.edge_pairs().into_iter().collect()
}

fn series(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1000.0..1000.0f64, 2..max_len)
}

// Small integers make ties and collinear triples common.
fn integer_series(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-6i32..6).prop_map(f64::from), 2..max_len)
}

fn plain() -> VisibilityOptions {
    VisibilityOptions::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn nvg_and_hvg_match_oracle(s in prop_oneof![series(200), integer_series(200)]) {
        let oracle_n = brute_force_visibility(&s, VisibilityKind::Natural).unwrap();
        let oracle_h = brute_force_visibility(&s, VisibilityKind::Horizontal).unwrap();
        prop_assert_eq!(pairs(&nvg(&s, &plain()).unwrap()), pairs(&oracle_n));
        prop_assert_eq!(pairs(&hvg(&s, &plain()).unwrap()), pairs(&oracle_h));
    }

    #[test]
    fn wdpvg_is_union_of_both_perspectives(s in prop_oneof![series(120), integer_series(120)]) {
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let mut union = pairs(&brute_force_visibility(&s, VisibilityKind::Natural).unwrap());
        union.extend(pairs(&brute_force_visibility(&neg, VisibilityKind::Natural).unwrap()));
        prop_assert_eq!(pairs(&wdpvg(&s, &plain()).unwrap()), union);
        prop_assert_eq!(pairs(&wdpvg(&neg, &plain()).unwrap()), pairs(&wdpvg(&s, &plain()).unwrap()));
    }

    #[test]
    fn hvg_subset_of_nvg_and_adjacent_edges(s in integer_series(150)) {
        let (n, h) = (pairs(&nvg(&s, &plain()).unwrap()), pairs(&hvg(&s, &plain()).unwrap()));
        prop_assert!(h.is_subset(&n));
        for i in 0..s.len() - 1 {
            prop_assert!(h.contains(&(i, i + 1)));
        }
    }

    // Powers of two keep the affine map exact.
    #[test]
    fn affine_invariance(s in integer_series(100), exp in -3i32..4, b in -50i32..50) {
        let a = 2f64.powi(exp);
        let t: Vec<f64> = s.iter().map(|v| a * v + f64::from(b)).collect();
        prop_assert_eq!(pairs(&nvg(&s, &plain()).unwrap()), pairs(&nvg(&t, &plain()).unwrap()));
        prop_assert_eq!(pairs(&hvg(&s, &plain()).unwrap()), pairs(&hvg(&t, &plain()).unwrap()));
    }

    #[test]
    fn mtf_matches_dense_oracle(s in prop_oneof![series(300), integer_series(300)], q in 2usize..8) {
        prop_assume!(q <= s.len());
        let g = mtf_graph(&s, q, Sparsify::None).unwrap();
        let want = dense_mtf(&s, q);
        let got = g.edge_map();
        prop_assert_eq!(got.len(), want.len());
        for (k, w) in &want {
            prop_assert!((got[k] - w).abs() < 1e-12, "edge {:?}", k);
        }
    }

    #[test]
    fn knn_matches_exhaustive(s in series(200), dim in 1usize..4, delay in 1usize..3, k in 1usize..6) {
        let valid = s.len().saturating_sub((dim - 1) * delay);
        prop_assume!(k < valid);
        let g = knn_graph(&s, &ProximityOptions { embed_dim: dim, delay, k }).unwrap();
        prop_assert_eq!(g.num_edges(), s.len() * k);
        let want = knn_oracle(&s, dim, delay, k);
        let got: BTreeMap<(usize, usize), f64> = g.edge_map();
        prop_assert_eq!(got.keys().collect::<Vec<_>>(), want.keys().collect::<Vec<_>>());
        for (key, d) in &want {
            prop_assert!((got[key] - d).abs() < 1e-9);
        }
    }

    #[test]
    fn merge_max_is_commutative_and_idempotent(a in integer_series(60), b in integer_series(60)) {
        let n = a.len().min(b.len());
        let opts = VisibilityOptions { weighting: Weighting::AbsV, ..plain() };
        let ga = nvg(&a[..n], &opts).unwrap();
        let gb = hvg(&b[..n], &opts).unwrap();
        let ab = merge_max(&ga, &gb).unwrap();
        prop_assert_eq!(ab.edge_map(), merge_max(&gb, &ga).unwrap().edge_map());
        prop_assert_eq!(merge_max(&ga, &ga).unwrap().edge_map(), ga.edge_map());
        for (k, w) in ab.edge_map() {
            let expect = ga.edge_map().get(&k).copied().unwrap_or(f64::NEG_INFINITY)
                .max(gb.edge_map().get(&k).copied().unwrap_or(f64::NEG_INFINITY));
            prop_assert_eq!(w, expect);
        }
    }
}

/// Type-7 quantile boundaries, right-closed bins, then a dense field.
fn dense_mtf(s: &[f64], q: usize) -> BTreeMap<(usize, usize), f64> {
    let mut sorted = s.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quantile = |p: f64| {
        let h = (sorted.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(sorted.len() - 1);
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    let bounds: Vec<f64> = (1..q).map(|k| quantile(k as f64 / q as f64)).collect();
    let states: Vec<usize> = s.iter().map(|&v| bounds.iter().filter(|&&b| v > b).count()).collect();
    let mut counts = vec![vec![0.0; q]; q];
    for w in states.windows(2) {
        counts[w[0]][w[1]] += 1.0;
    }
    let mut out = BTreeMap::new();
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            let row: f64 = counts[states[i]].iter().sum();
            if row > 0.0 && counts[states[i]][states[j]] > 0.0 {
                out.insert((i, j), counts[states[i]][states[j]] / row);
            }
        }
    }
    out
}

fn knn_oracle(s: &[f64], dim: usize, delay: usize, k: usize) -> BTreeMap<(usize, usize), f64> {
    let valid = s.len() - (dim - 1) * delay;
    let emb = |i: usize| -> Vec<f64> { (0..dim).map(|d| s[i.min(valid - 1) + d * delay]).collect() };
    let mut out = BTreeMap::new();
    for i in 0..s.len() {
        let zi = emb(i);
        let mut all: Vec<(f64, usize)> = (0..s.len())
            .filter(|&j| j != i)
            .map(|j| (zi.iter().zip(emb(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), j))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(d2, j) in &all[..k] {
            out.insert((i, j), d2.sqrt());
        }
    }
    out
}

#[test]
fn transition_rows_are_stochastic() {
    use graphseg_core::transforms::TransitionMatrix;
    let states = [0, 1, 1, 2, 0, 1, 0, 0];
    let m = TransitionMatrix::from_states(&states, 4);
    for a in 0..4 {
        let row: f64 = (0..4).map(|b| m.get(a, b)).sum();
        assert!(row == 0.0 || (row - 1.0).abs() < 1e-12);
    }
}

#[test]
fn nvg_of_long_series_is_fast() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let s: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
    let t0 = std::time::Instant::now();
    let g = nvg(&s, &plain()).unwrap();
    assert!(g.num_edges() >= 4999);
    assert!(t0.elapsed().as_secs_f64() < 1.0);
}
