//! k-nearest-neighbour proximity network over delay embeddings.

use alloc::vec::Vec;

use super::ProximityOptions;
use crate::error::{Error, Result};
use crate::graph::{Edge, TsGraph, Weighting};

/// Delay embedding `(s_i, s_{i+delay}, ..)` for every point. The last
/// `(dim-1)*delay` points cannot form a full vector and reuse the last
/// complete embedding. Returned row-major `[n, dim]`.
pub fn delay_embedding(series: &[f64], dim: usize, delay: usize) -> Result<Vec<f64>> {
    if dim == 0 || delay == 0 {
        return Err(Error::InvalidConfig("embedding dimension and delay must be >= 1".into()));
    }
    let span = (dim - 1) * delay;
    if series.len() <= span {
        return Err(Error::TooShort { what: "delay embedding", needed: span + 1, got: series.len() });
    }
    let valid = series.len() - span;
    let mut out = Vec::with_capacity(series.len() * dim);
    for i in 0..series.len() {
        let base = i.min(valid - 1);
        out.extend((0..dim).map(|d| series[base + d * delay]));
    }
    Ok(out)
}

/// Directed graph linking every point to its `k` nearest embedded
/// neighbours (itself excluded), weighted by Euclidean distance. Equal
/// distances prefer the smaller index.
pub fn knn_graph(series: &[f64], opts: &ProximityOptions) -> Result<TsGraph> {
    let span = opts.embed_dim.saturating_sub(1) * opts.delay;
    let valid = series.len().saturating_sub(span);
    if opts.k == 0 || opts.k >= valid {
        return Err(Error::InvalidConfig(alloc::format!(
            "k = {} must be in [1, {valid}) for this series",
            opts.k
        )));
    }
    let dim = opts.embed_dim;
    let emb = delay_embedding(series, dim, opts.delay)?;
    let n = series.len();
    let mut edges = Vec::with_capacity(n * opts.k);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        let zi = &emb[i * dim..(i + 1) * dim];
        cand.clear();
        cand.extend((0..n).filter(|&j| j != i).map(|j| {
            let zj = &emb[j * dim..(j + 1) * dim];
            let d2: f64 = zi.iter().zip(zj).map(|(a, b)| (a - b) * (a - b)).sum();
            (d2, j)
        }));
        let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        cand.select_nth_unstable_by(opts.k - 1, by_dist);
        let nearest = &mut cand[..opts.k];
        nearest.sort_by(by_dist);
        edges.extend(nearest.iter().map(|&(d2, j)| Edge::new(i, j, libm::sqrt(d2))));
    }
    Ok(TsGraph { num_nodes: n, edges, directed: true, weighting: Weighting::Euclidean })
}
