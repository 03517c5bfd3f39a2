//! Natural and horizontal visibility graphs.

use alloc::vec::Vec;

use super::{Direction, VisibilityKind, VisibilityOptions};
use crate::error::{Error, Result};
use crate::graph::{merge_max, Edge, TsGraph};

/// Largest input accepted by [`brute_force_visibility`].
pub const BRUTE_FORCE_LIMIT: usize = 500;

fn check_len(series: &[f64]) -> Result<()> {
    if series.len() < 2 {
        return Err(Error::TooShort { what: "visibility graph", needed: 2, got: series.len() });
    }
    Ok(())
}

/// Natural visibility graph.
///
/// Divide and conquer on the maximum: nothing on one side of the range
/// maximum can see past it, so the maximum's edges are found by a slope scan
/// in each direction and the two sides are solved independently.
pub fn nvg(series: &[f64], opts: &VisibilityOptions) -> Result<TsGraph> {
    check_len(series)?;
    let pairs = nvg_pairs(series);
    Ok(finish(series, pairs, opts))
}

fn nvg_pairs(s: &[f64]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(s.len() * 4);
    let mut stack = alloc::vec![(0usize, s.len() - 1)];
    while let Some((lo, hi)) = stack.pop() {
        if lo >= hi {
            continue;
        }
        let mut m = lo;
        for k in lo + 1..=hi {
            if s[k] > s[m] {
                m = k;
            }
        }
        let mut best = f64::NEG_INFINITY;
        for j in m + 1..=hi {
            let slope = (s[j] - s[m]) / (j - m) as f64;
            if slope > best {
                pairs.push((m, j));
                best = slope;
            }
        }
        best = f64::NEG_INFINITY;
        for i in (lo..m).rev() {
            let slope = (s[i] - s[m]) / (m - i) as f64;
            if slope > best {
                pairs.push((i, m));
                best = slope;
            }
        }
        if m > lo {
            stack.push((lo, m - 1));
        }
        if m < hi {
            stack.push((m + 1, hi));
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Horizontal visibility graph via a monotone stack, O(N).
pub fn hvg(series: &[f64], opts: &VisibilityOptions) -> Result<TsGraph> {
    check_len(series)?;
    let mut pairs = Vec::with_capacity(series.len() * 2);
    // Indices with strictly decreasing values.
    let mut stack: Vec<usize> = Vec::new();
    for (j, &sj) in series.iter().enumerate() {
        while let Some(&i) = stack.last() {
            pairs.push((i, j));
            if series[i] < sj {
                stack.pop();
            } else {
                if series[i] == sj {
                    stack.pop();
                }
                break;
            }
        }
        stack.push(j);
    }
    pairs.sort_unstable();
    Ok(finish(series, pairs, opts))
}

pub fn visibility(series: &[f64], kind: VisibilityKind, opts: &VisibilityOptions) -> Result<TsGraph> {
    match kind {
        VisibilityKind::Natural => nvg(series, opts),
        VisibilityKind::Horizontal => hvg(series, opts),
    }
}

/// Weighted dual-perspective visibility graph: the max-merge of the NVG of
/// the series and the NVG of its sign reflection, each weighted on its own
/// values.
pub fn wdpvg(series: &[f64], opts: &VisibilityOptions) -> Result<TsGraph> {
    let upper = nvg(series, opts)?;
    let reflected: Vec<f64> = series.iter().map(|v| -v).collect();
    let lower = nvg(&reflected, opts)?;
    merge_max(&upper, &lower)
}

/// Applies direction and weighting to time-ordered pairs `(i, j)`, `i < j`.
/// Weights are always evaluated in temporal order, whatever the direction.
fn finish(series: &[f64], pairs: Vec<(usize, usize)>, opts: &VisibilityOptions) -> TsGraph {
    let directed = opts.direction != Direction::Undirected;
    let edges = pairs
        .into_iter()
        .map(|(i, j)| {
            let w = opts.weighting.weight(i, series[i], j, series[j]);
            let (src, dst) = match opts.direction {
                Direction::Undirected | Direction::LeftToRight => (i, j),
                Direction::TopToBottom => {
                    if series[j] > series[i] {
                        (j, i)
                    } else {
                        (i, j)
                    }
                }
            };
            Edge::new(src, dst, w)
        })
        .collect();
    TsGraph { num_nodes: series.len(), edges, directed, weighting: opts.weighting }
}

/// Literal O(N³) evaluation of the visibility criteria; undirected and
/// unweighted. Used as a reference for the fast constructions.
pub fn brute_force_visibility(series: &[f64], kind: VisibilityKind) -> Result<TsGraph> {
    let n = series.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::InvalidConfig(alloc::format!(
            "brute-force visibility limited to {BRUTE_FORCE_LIMIT} points, got {n}"
        )));
    }
    let mut g = TsGraph::new(n, false, crate::graph::Weighting::None);
    for i in 0..n {
        for j in i + 1..n {
            let visible = (i + 1..j).all(|k| match kind {
                VisibilityKind::Natural => {
                    let (ti, tj, tk) = (i as f64, j as f64, k as f64);
                    series[k] < series[i] + (series[j] - series[i]) * (tk - ti) / (tj - ti)
                }
                VisibilityKind::Horizontal => series[i] > series[k] && series[j] > series[k],
            });
            if visible {
                g.edges.push(Edge::new(i, j, 1.0));
            }
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Weighting;
    use alloc::vec;

    fn plain() -> VisibilityOptions {
        VisibilityOptions::default()
    }

    #[test]
    fn collinear_series_only_adjacent() {
        let g = nvg(&[1.0, 2.0, 3.0, 4.0], &plain()).unwrap();
        assert_eq!(g.edge_pairs(), vec![(0, 1), (1, 2), (2, 3)]);
    }

    #[test]
    fn nvg_hand_example() {
        let g = nvg(&[1.0, 0.5, 2.0], &plain()).unwrap();
        assert_eq!(g.edge_pairs(), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn hvg_hand_examples() {
        let g = hvg(&[1.0, 2.0, 3.0, 4.0], &plain()).unwrap();
        assert_eq!(g.edge_pairs(), vec![(0, 1), (1, 2), (2, 3)]);
        let g = hvg(&[2.0, 3.0, 1.0], &plain()).unwrap();
        assert_eq!(g.edge_pairs(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn hvg_equal_values_block() {
        // 3 and 3 see each other; the middle 3 blocks the outer pair.
        let g = hvg(&[3.0, 1.0, 3.0, 1.0, 3.0], &plain()).unwrap();
        assert_eq!(g.edge_pairs(), vec![(0, 1), (0, 2), (1, 2), (2, 3), (2, 4), (3, 4)]);
        let oracle = brute_force_visibility(&[3.0, 1.0, 3.0, 1.0, 3.0], VisibilityKind::Horizontal).unwrap();
        assert_eq!(g.edge_pairs(), oracle.edge_pairs());
    }

    #[test]
    fn wdpvg_hand_example() {
        let g = wdpvg(&[1.0, 3.0, 1.0, 3.0, 1.0], &plain()).unwrap();
        assert_eq!(
            g.edge_pairs(),
            vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (2, 4), (3, 4)]
        );
    }

    #[test]
    fn brute_force_reproduces_examples() {
        let g = brute_force_visibility(&[1.0, 0.5, 2.0], VisibilityKind::Natural).unwrap();
        assert_eq!(g.edge_pairs(), vec![(0, 1), (0, 2), (1, 2)]);
        let g = brute_force_visibility(&[1.0, 2.0, 3.0, 4.0], VisibilityKind::Natural).unwrap();
        assert_eq!(g.edge_pairs(), vec![(0, 1), (1, 2), (2, 3)]);
        let g = brute_force_visibility(&[2.0, 3.0, 1.0], VisibilityKind::Horizontal).unwrap();
        assert_eq!(g.edge_pairs(), vec![(0, 1), (1, 2)]);
        assert!(brute_force_visibility(&[0.0; 501], VisibilityKind::Natural).is_err());
    }

    #[test]
    fn too_short() {
        assert!(nvg(&[1.0], &plain()).is_err());
        assert!(hvg(&[], &plain()).is_err());
    }

    #[test]
    fn directions() {
        let s = [1.0, 0.5, 2.0];
        let ltr = VisibilityOptions { direction: Direction::LeftToRight, weighting: Weighting::None };
        let g = nvg(&s, &ltr).unwrap();
        assert!(g.directed);
        assert!(g.edges.iter().all(|e| e.src < e.dst));

        let ttb = VisibilityOptions { direction: Direction::TopToBottom, weighting: Weighting::None };
        let mut g = nvg(&s, &ttb).unwrap();
        g.canonicalize();
        let pairs: Vec<_> = g.edges.iter().map(|e| (e.src, e.dst)).collect();
        assert_eq!(pairs, vec![(0, 1), (2, 0), (2, 1)]);

        let g = nvg(&[2.0, 2.0], &ttb).unwrap();
        assert_eq!((g.edges[0].src, g.edges[0].dst), (0, 1));
    }

    #[test]
    fn weighted_edges_use_temporal_order() {
        let opts = VisibilityOptions { direction: Direction::Undirected, weighting: Weighting::Euclidean };
        let g = nvg(&[0.0, -1.0, 3.0], &opts).unwrap();
        let w = g.edge_map();
        assert_eq!(w[&(0, 1)], libm::sqrt(2.0));
        assert_eq!(w[&(0, 2)], libm::sqrt(13.0));
    }
}
