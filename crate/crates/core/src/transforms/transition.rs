//! Transition networks: symbolize the series into states, estimate the
//! first-order transition matrix, and weight node pairs `(i, j)`, `i < j`,
//! by the transition probability between their states (a Markov transition
//! field over the time points).

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::{Sparsify, StateRule, TransitionOptions};
use crate::error::{Error, Result};
use crate::graph::{Edge, TsGraph, Weighting};

/// Series length above which [`Sparsify::Auto`] keeps only the strongest
/// outgoing edges.
pub const AUTO_SPARSIFY_ABOVE: usize = 1000;
pub const AUTO_TOP_K: usize = 16;

/// Row-stochastic transition matrix over `num_states` states.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub num_states: usize,
    /// Row-major; rows without outgoing transitions are all zero.
    pub probs: Vec<f64>,
}

impl TransitionMatrix {
    pub fn from_states(states: &[usize], num_states: usize) -> Self {
        let mut counts = alloc::vec![0usize; num_states * num_states];
        for w in states.windows(2) {
            counts[w[0] * num_states + w[1]] += 1;
        }
        let mut probs = alloc::vec![0.0; num_states * num_states];
        for a in 0..num_states {
            let row = &counts[a * num_states..(a + 1) * num_states];
            let total: usize = row.iter().sum();
            if total > 0 {
                for b in 0..num_states {
                    probs[a * num_states + b] = row[b] as f64 / total as f64;
                }
            }
        }
        TransitionMatrix { num_states, probs }
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.probs[from * self.num_states + to]
    }
}

/// Quantile boundaries at `q/Q`, `q = 1..Q-1`, with linear interpolation.
pub fn quantile_boundaries(series: &[f64], num_states: usize) -> Vec<f64> {
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    (1..num_states)
        .map(|q| crate::eval::quantile_sorted(&sorted, q as f64 / num_states as f64))
        .collect()
}

/// Quantile state of every point. Bins are right-closed, so a value equal
/// to a boundary falls in the lower bin.
pub fn quantile_states(series: &[f64], num_states: usize) -> Result<Vec<usize>> {
    if num_states < 2 {
        return Err(Error::InvalidConfig("quantile rule needs at least 2 states".into()));
    }
    if num_states > series.len() {
        return Err(Error::InvalidConfig(alloc::format!(
            "{num_states} states for a series of length {}",
            series.len()
        )));
    }
    let bounds = quantile_boundaries(series, num_states);
    Ok(series.iter().map(|&v| bounds.partition_point(|&b| v > b)).collect())
}

/// Ordinal-pattern state of every point: the rank permutation of
/// `(s_i, s_{i+delay}, ..)`, ties ranked by index. Points too close to the
/// end to form a pattern reuse the last complete one. States are numbered by
/// first appearance.
pub fn ordinal_states(series: &[f64], order: usize, delay: usize) -> Result<(Vec<usize>, usize)> {
    if order < 2 || delay < 1 {
        return Err(Error::InvalidConfig("ordinal rule needs order >= 2 and delay >= 1".into()));
    }
    let span = (order - 1) * delay;
    let needed = span + 2;
    if series.len() < needed {
        return Err(Error::TooShort { what: "ordinal transition graph", needed, got: series.len() });
    }
    let valid = series.len() - span;
    let mut ids: BTreeMap<Vec<u8>, usize> = BTreeMap::new();
    let mut states = Vec::with_capacity(series.len());
    let mut idx: Vec<usize> = Vec::with_capacity(order);
    for i in 0..valid {
        idx.clear();
        idx.extend(0..order);
        // Stable sort keeps the earlier index lower on ties.
        idx.sort_by(|&a, &b| series[i + a * delay].total_cmp(&series[i + b * delay]));
        let mut ranks = alloc::vec![0u8; order];
        for (rank, &pos) in idx.iter().enumerate() {
            ranks[pos] = rank as u8;
        }
        let next = ids.len();
        states.push(*ids.entry(ranks).or_insert(next));
    }
    let last = *states.last().expect("valid >= 2");
    states.resize(series.len(), last);
    Ok((states, ids.len()))
}

pub fn transition_graph(series: &[f64], opts: &TransitionOptions) -> Result<TsGraph> {
    let (states, num_states) = match opts.rule {
        StateRule::Quantile { num_states } => (quantile_states(series, num_states)?, num_states),
        StateRule::Ordinal { order, delay } => ordinal_states(series, order, delay)?,
    };
    let matrix = TransitionMatrix::from_states(&states, num_states);
    Ok(field_graph(&states, &matrix, opts.sparsify))
}

pub fn mtf_graph(series: &[f64], num_states: usize, sparsify: Sparsify) -> Result<TsGraph> {
    transition_graph(series, &TransitionOptions { rule: StateRule::Quantile { num_states }, sparsify })
}

pub fn ordinal_transition_graph(series: &[f64], order: usize, delay: usize, sparsify: Sparsify) -> Result<TsGraph> {
    transition_graph(series, &TransitionOptions { rule: StateRule::Ordinal { order, delay }, sparsify })
}

fn field_graph(states: &[usize], matrix: &TransitionMatrix, sparsify: Sparsify) -> TsGraph {
    let n = states.len();
    let mut g = TsGraph::new(n, true, Weighting::Transition);
    let sparsify = match sparsify {
        Sparsify::Auto if n > AUTO_SPARSIFY_ABOVE => Sparsify::TopK(AUTO_TOP_K),
        Sparsify::Auto => Sparsify::None,
        other => other,
    };
    let mut edges = Vec::new();
    match sparsify {
        Sparsify::TopK(k) => {
            // Positions of each state, ascending.
            let mut positions: Vec<Vec<usize>> = alloc::vec![Vec::new(); matrix.num_states];
            for (i, &s) in states.iter().enumerate() {
                positions[s].push(i);
            }
            let mut order: Vec<usize> = Vec::with_capacity(matrix.num_states);
            let mut chosen: Vec<usize> = Vec::with_capacity(k);
            for i in 0..n {
                let from = states[i];
                order.clear();
                order.extend((0..matrix.num_states).filter(|&b| matrix.get(from, b) > 0.0));
                order.sort_by(|&a, &b| matrix.get(from, b).total_cmp(&matrix.get(from, a)));
                chosen.clear();
                let mut g_start = 0;
                while g_start < order.len() && chosen.len() < k {
                    let w = matrix.get(from, order[g_start]);
                    let mut g_end = g_start;
                    while g_end < order.len() && matrix.get(from, order[g_end]) == w {
                        g_end += 1;
                    }
                    // Equal weights: smallest later indices first.
                    let mut cands: Vec<usize> = order[g_start..g_end]
                        .iter()
                        .flat_map(|&b| {
                            let p = &positions[b];
                            let first = p.partition_point(|&j| j <= i);
                            p[first..].iter().copied().take(k)
                        })
                        .collect();
                    cands.sort_unstable();
                    let room = k - chosen.len();
                    chosen.extend(cands.into_iter().take(room));
                    g_start = g_end;
                }
                chosen.sort_unstable();
                edges.extend(chosen.iter().map(|&j| Edge::new(i, j, matrix.get(from, states[j]))));
            }
        }
        Sparsify::None | Sparsify::Threshold(_) | Sparsify::Auto => {
            let eps = match sparsify {
                Sparsify::Threshold(e) => e,
                _ => 0.0,
            };
            for i in 0..n {
                for j in i + 1..n {
                    let w = matrix.get(states[i], states[j]);
                    if w > 0.0 && w >= eps {
                        edges.push(Edge::new(i, j, w));
                    }
                }
            }
        }
    }
    g.edges = edges;
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn quantile_example() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_states(&s, 2).unwrap(), vec![0, 0, 1, 1]);
        let m = TransitionMatrix::from_states(&[0, 0, 1, 1], 2);
        assert_eq!(m.probs, vec![0.5, 0.5, 0.0, 1.0]);
        let g = mtf_graph(&s, 2, Sparsify::None).unwrap();
        assert_eq!(g.edge_map()[&(0, 3)], 0.5);
        assert!(g.directed);
    }

    #[test]
    fn constant_series_is_complete() {
        let g = mtf_graph(&[2.0; 6], 2, Sparsify::None).unwrap();
        assert_eq!(g.num_edges(), 15);
        assert!(g.edges.iter().all(|e| e.weight == 1.0 && e.src < e.dst));
    }

    #[test]
    fn too_many_states() {
        assert!(mtf_graph(&[1.0, 2.0], 3, Sparsify::None).is_err());
    }

    #[test]
    fn ordinal_examples() {
        let (st, q) = ordinal_states(&[1.0, 2.0, 3.0, 4.0], 2, 1).unwrap();
        assert_eq!((st, q), (vec![0, 0, 0, 0], 1));

        let (st, q) = ordinal_states(&[1.0, 3.0, 2.0, 4.0], 2, 1).unwrap();
        assert_eq!((st.clone(), q), (vec![0, 1, 0, 0], 2));
        let m = TransitionMatrix::from_states(&st, q);
        // 0 = up, 1 = down
        assert_eq!(m.get(0, 1), 0.5);
        assert_eq!(m.get(0, 0), 0.5);
        assert_eq!(m.get(1, 0), 1.0);

        let (st, _) = ordinal_states(&[2.0, 2.0, 1.0], 2, 1).unwrap();
        let (up, _) = ordinal_states(&[1.0, 2.0, 1.0], 2, 1).unwrap();
        assert_eq!(st[0], up[0]);
        assert!(ordinal_states(&[1.0, 2.0, 3.0], 3, 1).is_err());
    }

    #[test]
    fn ordinal_graph_of_monotone_matches_constant_mtf() {
        let a = ordinal_transition_graph(&[1.0, 2.0, 3.0, 4.0], 2, 1, Sparsify::None).unwrap();
        let b = mtf_graph(&[5.0; 4], 2, Sparsify::None).unwrap();
        assert_eq!(a.edges, b.edges);
    }

    #[test]
    fn top_k_keeps_k_strongest() {
        let s: Vec<f64> = (0..40).map(|i| libm::sin(i as f64 * 0.7)).collect();
        let full = mtf_graph(&s, 4, Sparsify::None).unwrap();
        let sparse = mtf_graph(&s, 4, Sparsify::TopK(3)).unwrap();
        for i in 0..s.len() {
            let mut all: Vec<(f64, usize)> = full
                .edges
                .iter()
                .filter(|e| e.src == i)
                .map(|e| (-e.weight, e.dst))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut expect: Vec<usize> = all.iter().take(3).map(|x| x.1).collect();
            expect.sort_unstable();
            let got: Vec<usize> = sparse.edges.iter().filter(|e| e.src == i).map(|e| e.dst).collect();
            assert_eq!(got, expect, "node {i}");
        }
    }

    #[test]
    fn threshold_drops_weak_edges() {
        let s: Vec<f64> = (0..30).map(|i| libm::cos(i as f64 * 1.3)).collect();
        let g = mtf_graph(&s, 3, Sparsify::Threshold(0.4)).unwrap();
        assert!(g.edges.iter().all(|e| e.weight >= 0.4));
    }
}
