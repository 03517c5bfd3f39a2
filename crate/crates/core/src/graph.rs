//! Edge-list graph over time-point nodes.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// How an edge between time points `i < j` is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Weighting {
    #[default]
    None,
    Euclidean,
    SqEuclidean,
    HDistance,
    VDistance,
    AbsH,
    AbsV,
    Slope,
    AbsSlope,
    /// Transition probability between symbol states; set by the transition
    /// networks rather than computed from the two points.
    Transition,
}

impl Weighting {
    pub const ALL: [Weighting; 10] = [
        Weighting::None,
        Weighting::Euclidean,
        Weighting::SqEuclidean,
        Weighting::HDistance,
        Weighting::VDistance,
        Weighting::AbsH,
        Weighting::AbsV,
        Weighting::Slope,
        Weighting::AbsSlope,
        Weighting::Transition,
    ];

    /// Weight of the edge between `(i, si)` and `(j, sj)`; callers pass the
    /// earlier time point first.
    pub fn weight(self, i: usize, si: f64, j: usize, sj: f64) -> f64 {
        let dt = j as f64 - i as f64;
        let dv = sj - si;
        match self {
            Weighting::None | Weighting::Transition => 1.0,
            Weighting::Euclidean => libm::sqrt(dt * dt + dv * dv),
            Weighting::SqEuclidean => dt * dt + dv * dv,
            Weighting::HDistance => dt,
            Weighting::VDistance => dv,
            Weighting::AbsH => libm::fabs(dt),
            Weighting::AbsV => libm::fabs(dv),
            Weighting::Slope => dv / dt,
            Weighting::AbsSlope => libm::fabs(dv / dt),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Weighting::None => "none",
            Weighting::Euclidean => "euclidean",
            Weighting::SqEuclidean => "sq_euclidean",
            Weighting::HDistance => "h_distance",
            Weighting::VDistance => "v_distance",
            Weighting::AbsH => "abs_h",
            Weighting::AbsV => "abs_v",
            Weighting::Slope => "slope",
            Weighting::AbsSlope => "abs_slope",
            Weighting::Transition => "transition",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|w| w.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(src: usize, dst: usize, weight: f64) -> Self {
        Edge { src, dst, weight }
    }
}

/// Graph with one node per time point.
///
/// Undirected edges are stored once with `src < dst`. Self-loops are never
/// stored; the model layer adds them.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TsGraph {
    pub num_nodes: usize,
    pub edges: Vec<Edge>,
    pub directed: bool,
    pub weighting: Weighting,
}

impl TsGraph {
    pub fn new(num_nodes: usize, directed: bool, weighting: Weighting) -> Self {
        TsGraph { num_nodes, edges: Vec::new(), directed, weighting }
    }

    /// Builds a graph and checks every invariant.
    pub fn from_edges(
        num_nodes: usize,
        edges: Vec<Edge>,
        directed: bool,
        weighting: Weighting,
    ) -> core::result::Result<Self, Vec<Violation>> {
        let g = TsGraph { num_nodes, edges, directed, weighting };
        validate(&g).map(|()| g)
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    fn key(&self, src: usize, dst: usize) -> (usize, usize) {
        if self.directed || src < dst {
            (src, dst)
        } else {
            (dst, src)
        }
    }

    /// Edge weights keyed by `(src, dst)` in storage orientation.
    pub fn edge_map(&self) -> BTreeMap<(usize, usize), f64> {
        self.edges.iter().map(|e| (self.key(e.src, e.dst), e.weight)).collect()
    }

    /// Sorted storage-orientation pairs, ignoring weights.
    pub fn edge_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<_> = self.edges.iter().map(|e| self.key(e.src, e.dst)).collect();
        pairs.sort_unstable();
        pairs
    }

    /// Sorted unordered pairs, regardless of directedness.
    pub fn undirected_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<_> = self
            .edges
            .iter()
            .map(|e| (e.src.min(e.dst), e.src.max(e.dst)))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        let key = self.key(src, dst);
        self.edges.iter().any(|e| (e.src, e.dst) == key)
    }

    /// Sorts edges by `(src, dst)` so equal graphs compare equal.
    pub fn canonicalize(&mut self) {
        self.edges.sort_by_key(|e| (e.src, e.dst));
    }
}

/// Element-wise max of two graphs: an edge exists if it exists in either
/// input and keeps the larger of the weights present.
pub fn merge_max(a: &TsGraph, b: &TsGraph) -> Result<TsGraph> {
    if a.num_nodes != b.num_nodes {
        return Err(Error::NodeCountMismatch { left: a.num_nodes, right: b.num_nodes });
    }
    if a.directed != b.directed || a.weighting != b.weighting {
        return Err(Error::InvalidConfig(format!(
            "cannot merge graphs with different modes ({}/{} vs {}/{})",
            a.directed,
            a.weighting.name(),
            b.directed,
            b.weighting.name()
        )));
    }
    let mut merged = a.edge_map();
    for (key, w) in b.edge_map() {
        merged
            .entry(key)
            .and_modify(|cur| {
                if w > *cur {
                    *cur = w
                }
            })
            .or_insert(w);
    }
    Ok(TsGraph {
        num_nodes: a.num_nodes,
        edges: merged.into_iter().map(|((s, d), w)| Edge::new(s, d, w)).collect(),
        directed: a.directed,
        weighting: a.weighting,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeStats {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

/// Degree statistics of the undirected view (distinct neighbours per node).
pub fn degree_stats(g: &TsGraph) -> DegreeStats {
    let pairs = g.undirected_pairs();
    if pairs.is_empty() || g.num_nodes == 0 {
        return DegreeStats { min: 0, max: 0, mean: 0.0 };
    }
    let mut deg = alloc::vec![0usize; g.num_nodes];
    for (i, j) in &pairs {
        if i != j {
            deg[*i] += 1;
            deg[*j] += 1;
        }
    }
    DegreeStats {
        min: deg.iter().copied().min().unwrap_or(0),
        max: deg.iter().copied().max().unwrap_or(0),
        mean: deg.iter().sum::<usize>() as f64 / g.num_nodes as f64,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NodeOutOfRange { edge: usize, node: usize },
    SelfLoop { edge: usize, node: usize },
    Duplicate { edge: usize, src: usize, dst: usize },
    /// Undirected edge stored with `src > dst`.
    Orientation { edge: usize },
    NonUnitWeight { edge: usize, weight: f64 },
    NonFiniteWeight { edge: usize },
}

/// Reports every invariant violation in `g`.
pub fn validate(g: &TsGraph) -> core::result::Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let mut seen = BTreeMap::new();
    for (idx, e) in g.edges.iter().enumerate() {
        for node in [e.src, e.dst] {
            if node >= g.num_nodes {
                out.push(Violation::NodeOutOfRange { edge: idx, node });
            }
        }
        if e.src == e.dst {
            out.push(Violation::SelfLoop { edge: idx, node: e.src });
        }
        if !g.directed && e.src > e.dst {
            out.push(Violation::Orientation { edge: idx });
        }
        if !e.weight.is_finite() {
            out.push(Violation::NonFiniteWeight { edge: idx });
        } else if g.weighting == Weighting::None && e.weight != 1.0 {
            out.push(Violation::NonUnitWeight { edge: idx, weight: e.weight });
        }
        let key = g.key(e.src, e.dst);
        if seen.insert(key, idx).is_some() {
            out.push(Violation::Duplicate { edge: idx, src: e.src, dst: e.dst });
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}
