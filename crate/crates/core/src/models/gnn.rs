use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{glorot, ParamStore};
use crate::autodiff::{EdgeIndex, Matrix, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::TsGraph;

/// Smallest edge weight magnitude that still enters the attention logits.
pub const WEIGHT_FLOOR: f64 = 1e-12;

const ATTENTION_SLOPE: f64 = 0.2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum LayerKind {
    #[default]
    Gat,
    Gcn,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct GatModelConfig {
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub heads: usize,
    pub layer_kind: LayerKind,
    pub in_dim: usize,
    pub num_classes: usize,
    pub use_edge_weights: bool,
}

impl Default for GatModelConfig {
    fn default() -> Self {
        GatModelConfig {
            num_layers: 5,
            hidden_dim: 32,
            heads: 4,
            layer_kind: LayerKind::Gat,
            in_dim: 1,
            num_classes: 2,
            use_edge_weights: false,
        }
    }
}

impl GatModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.num_layers < 2 {
            return bad("a segmenter needs at least 2 layers");
        }
        if self.hidden_dim == 0 || self.in_dim == 0 {
            return bad("layer widths must be positive");
        }
        if self.layer_kind == LayerKind::Gat && self.heads == 0 {
            return bad("a GAT layer needs at least one head");
        }
        if self.num_classes < 2 {
            return bad("at least two classes are required");
        }
        Ok(())
    }

    /// Heads of hidden layer `l` (GCN layers count as one).
    fn hidden_heads(&self) -> usize {
        match self.layer_kind {
            LayerKind::Gat => self.heads,
            LayerKind::Gcn => 1,
        }
    }

    /// `(input width, per-head output width, heads)` of every layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize, usize)> {
        let h = self.hidden_heads();
        (0..self.num_layers)
            .map(|l| {
                let input = if l == 0 { self.in_dim } else { self.hidden_dim * h };
                if l + 1 == self.num_layers {
                    (input, self.num_classes, 1)
                } else {
                    (input, self.hidden_dim, h)
                }
            })
            .collect()
    }

    /// Closed-form count of trainable scalars.
    pub fn parameter_count(&self) -> usize {
        self.layer_dims()
            .iter()
            .map(|&(fin, f, h)| match self.layer_kind {
                LayerKind::Gat => fin * f * h + 2 * f * h + f * h,
                LayerKind::Gcn => fin * f + f,
            })
            .sum()
    }
}

/// Message-passing structure derived from a [`TsGraph`]: self-loops added,
/// undirected edges expanded to both directions, directed edges followed
/// from source to destination.
#[derive(Clone, Debug)]
pub struct MessageGraph {
    pub num_nodes: usize,
    /// Attention messages (graph edges plus one self-loop per node).
    pub edges: EdgeIndex,
    /// Edge weight magnitude of every message. Self-loops take the mean of
    /// the node's incoming weights, or 1 without any.
    pub weights: Vec<f64>,
    log_weights: Vec<f64>,
    /// Messages of the symmetric-normalized convolution on the undirected
    /// view with `A + I`.
    pub gcn_edges: EdgeIndex,
    pub gcn_coef: Matrix,
}

impl MessageGraph {
    pub fn new(g: &TsGraph) -> Result<Self> {
        let n = g.num_nodes;
        if n == 0 {
            return Err(Error::Empty("graph"));
        }
        let mut src = Vec::with_capacity(2 * g.edges.len() + n);
        let mut dst = Vec::with_capacity(src.capacity());
        let mut weights = Vec::with_capacity(src.capacity());
        let mut in_sum = vec![0.0; n];
        let mut in_count = vec![0usize; n];
        let mut push = |s: usize, d: usize, w: f64| {
            src.push(s);
            dst.push(d);
            weights.push(w);
            in_sum[d] += w;
            in_count[d] += 1;
        };
        for e in &g.edges {
            if e.src >= n || e.dst >= n {
                return Err(Error::Validation(format!("edge ({}, {}) out of range", e.src, e.dst)));
            }
            if e.src == e.dst {
                continue;
            }
            let w = libm::fabs(e.weight);
            push(e.src, e.dst, w);
            if !g.directed {
                push(e.dst, e.src, w);
            }
        }
        for i in 0..n {
            let w = if in_count[i] == 0 { 1.0 } else { in_sum[i] / in_count[i] as f64 };
            src.push(i);
            dst.push(i);
            weights.push(w);
        }

        let pairs = g.undirected_pairs();
        let mut deg = vec![1.0f64; n];
        for &(a, b) in &pairs {
            deg[a] += 1.0;
            deg[b] += 1.0;
        }
        let mut gs = Vec::with_capacity(2 * pairs.len() + n);
        let mut gd = Vec::with_capacity(gs.capacity());
        for &(a, b) in &pairs {
            gs.extend([a, b]);
            gd.extend([b, a]);
        }
        gs.extend(0..n);
        gd.extend(0..n);
        let coef: Vec<f64> = gs.iter().zip(&gd).map(|(&s, &d)| 1.0 / libm::sqrt(deg[s] * deg[d])).collect();
        let log_weights = weights.iter().map(|&w| crate::math::ln(w.max(WEIGHT_FLOOR))).collect();
        Ok(MessageGraph {
            num_nodes: n,
            edges: EdgeIndex::new(src, dst, n)?,
            weights,
            log_weights,
            gcn_coef: Matrix { rows: coef.len(), cols: 1, data: coef },
            gcn_edges: EdgeIndex::new(gs, gd, n)?,
        })
    }

    /// `ln(max(w, floor))` per message, repeated for every head.
    fn log_weights(&self, heads: usize) -> Matrix {
        let mut data = Vec::with_capacity(self.weights.len() * heads);
        for &lw in &self.log_weights {
            data.extend(core::iter::repeat_n(lw, heads));
        }
        Matrix { rows: self.weights.len(), cols: heads, data }
    }
}

pub struct GatLayerOutput {
    pub out: Var,
    /// Attention coefficients `[messages, heads]`.
    pub alpha: Var,
}

/// One attention layer. `w` is `[F_in, heads*F]`, `att_src`/`att_dst` are
/// `[1, heads*F]` and `bias` is `[1, heads*F]` when heads are concatenated,
/// `[1, F]` when they are averaged. With `weighted`, edge weights multiply
/// the normalized coefficients, which are then renormalized.
pub fn gat_layer(
    tape: &mut Tape,
    x: Var,
    w: Var,
    att_src: Var,
    att_dst: Var,
    bias: Var,
    graph: &MessageGraph,
    heads: usize,
    concat: bool,
    weighted: bool,
) -> Result<GatLayerOutput> {
    let h = tape.matmul(x, w)?;
    let s = tape.head_dot(h, att_src, heads)?;
    let d = tape.head_dot(h, att_dst, heads)?;
    let s_e = tape.gather_rows(s, graph.edges.src.clone())?;
    let d_e = tape.gather_rows(d, graph.edges.dst.clone())?;
    let sum = tape.add(s_e, d_e)?;
    let mut logits = tape.leaky_relu(sum, ATTENTION_SLOPE);
    if weighted {
        let lw = tape.constant(graph.log_weights(heads));
        logits = tape.add(logits, lw)?;
    }
    let alpha = tape.segment_softmax(logits, graph.edges.dst.clone(), graph.num_nodes)?;
    let mut out = tape.edge_aggregate(alpha, h, &graph.edges)?;
    if !concat {
        out = tape.head_mean(out, heads)?;
    }
    let out = tape.add_row(out, bias)?;
    Ok(GatLayerOutput { out, alpha })
}

/// Symmetric-normalized graph convolution `D^-1/2 (A+I) D^-1/2 X W + b`.
pub fn gcn_layer(tape: &mut Tape, x: Var, w: Var, bias: Var, graph: &MessageGraph) -> Result<Var> {
    let h = tape.matmul(x, w)?;
    let coef = tape.constant(graph.gcn_coef.clone());
    let agg = tape.edge_aggregate(coef, h, &graph.gcn_edges)?;
    tape.add_row(agg, bias)
}

/// Stack of GAT (or GCN) layers with ELU between them; the last layer
/// emits one logit per class.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphSegmenter {
    pub config: GatModelConfig,
    pub params: ParamStore,
}

impl GraphSegmenter {
    pub fn new(config: GatModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::default();
        for (l, (fin, f, h)) in config.layer_dims().into_iter().enumerate() {
            match config.layer_kind {
                LayerKind::Gat => {
                    params.push(format!("layer{l}.weight"), glorot(&mut rng, fin, h * f, fin, h * f));
                    params.push(format!("layer{l}.att_src"), glorot(&mut rng, 1, h * f, f, 1));
                    params.push(format!("layer{l}.att_dst"), glorot(&mut rng, 1, h * f, f, 1));
                    params.push(format!("layer{l}.bias"), Matrix::zeros(1, h * f));
                }
                LayerKind::Gcn => {
                    params.push(format!("layer{l}.weight"), glorot(&mut rng, fin, f, fin, f));
                    params.push(format!("layer{l}.bias"), Matrix::zeros(1, f));
                }
            }
        }
        Ok(GraphSegmenter { config, params })
    }

    /// Rebuilds a model from stored parameters, checking their layout.
    pub fn from_params(config: GatModelConfig, params: ParamStore) -> Result<Self> {
        let fresh = GraphSegmenter::new(config, 0)?;
        fresh.params.check_layout(&params)?;
        Ok(GraphSegmenter { config, params })
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_scalars()
    }

    /// Records the forward pass and returns `(logits, parameter vars)`.
    pub fn forward(&self, tape: &mut Tape, graph: &MessageGraph, features: &Matrix) -> Result<(Var, Vec<Var>)> {
        if features.rows != graph.num_nodes || features.cols != self.config.in_dim {
            return Err(Error::ShapeMismatch {
                op: "segmenter input",
                left: features.shape(),
                right: (graph.num_nodes, self.config.in_dim),
            });
        }
        let p = self.params.bind(tape);
        let mut x = tape.constant(features.clone());
        let dims = self.config.layer_dims();
        let last = dims.len() - 1;
        let mut k = 0;
        for (l, &(_, _, heads)) in dims.iter().enumerate() {
            x = match self.config.layer_kind {
                LayerKind::Gat => {
                    let (w, a_s, a_d, b) = (p[k], p[k + 1], p[k + 2], p[k + 3]);
                    k += 4;
                    gat_layer(tape, x, w, a_s, a_d, b, graph, heads, true, self.config.use_edge_weights)?.out
                }
                LayerKind::Gcn => {
                    let (w, b) = (p[k], p[k + 1]);
                    k += 2;
                    gcn_layer(tape, x, w, b, graph)?
                }
            };
            if l < last {
                x = tape.elu(x);
            }
        }
        Ok((x, p))
    }

    /// Class probabilities `[N, C]`.
    pub fn predict_proba(&self, graph: &MessageGraph, features: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let (logits, _) = self.forward(&mut tape, graph, features)?;
        Ok(tape.to_matrix(logits).softmax_rows())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Weighting};

    #[test]
    fn default_parameter_count() {
        let cfg = GatModelConfig { num_classes: 7, ..Default::default() };
        assert_eq!(cfg.parameter_count(), 51_733);
        assert_eq!(GraphSegmenter::new(cfg, 1).unwrap().num_parameters(), 51_733);
        let gcn = GatModelConfig { layer_kind: LayerKind::Gcn, ..cfg };
        assert_eq!(GraphSegmenter::new(gcn, 1).unwrap().num_parameters(), gcn.parameter_count());
    }

    #[test]
    fn invalid_configs() {
        assert!(GraphSegmenter::new(GatModelConfig { num_layers: 1, ..Default::default() }, 0).is_err());
        assert!(GraphSegmenter::new(GatModelConfig { heads: 0, ..Default::default() }, 0).is_err());
        assert!(GraphSegmenter::new(GatModelConfig { num_classes: 1, ..Default::default() }, 0).is_err());
    }

    #[test]
    fn self_loop_only_is_linear_map() {
        let g = TsGraph::new(1, false, Weighting::None);
        let mg = MessageGraph::new(&g).unwrap();
        let mut t = Tape::new();
        let x = t.constant(Matrix::from_vec(1, 2, vec![1.0, 2.0]).unwrap());
        let w = t.constant(Matrix::from_vec(2, 2, vec![1.0, 0.5, -1.0, 3.0]).unwrap());
        let a = t.constant(Matrix::from_vec(1, 2, vec![0.3, -0.7]).unwrap());
        let b = t.constant(Matrix::zeros(1, 2));
        let o = gat_layer(&mut t, x, w, a, a, b, &mg, 1, true, false).unwrap();
        assert_eq!(t.value(o.alpha), &[1.0]);
        assert_eq!(t.value(o.out), &[-1.0, 6.5]);
    }

    #[test]
    fn symmetric_pair_has_equal_attention() {
        let g = TsGraph::from_edges(2, vec![Edge::new(0, 1, 1.0)], false, Weighting::None).unwrap();
        let mg = MessageGraph::new(&g).unwrap();
        let mut t = Tape::new();
        let x = t.constant(Matrix::from_vec(2, 1, vec![0.4, 0.4]).unwrap());
        let w = t.constant(Matrix::from_vec(1, 4, vec![1.0, -2.0, 0.5, 0.1]).unwrap());
        let a = t.constant(Matrix::from_vec(1, 4, vec![0.2, 0.9, -0.4, 1.0]).unwrap());
        let b = t.constant(Matrix::zeros(1, 4));
        let o = gat_layer(&mut t, x, w, a, a, b, &mg, 2, true, false).unwrap();
        assert!(t.value(o.alpha).iter().all(|&v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn gcn_two_node_coefficients() {
        let g = TsGraph::from_edges(2, vec![Edge::new(0, 1, 1.0)], false, Weighting::None).unwrap();
        let mg = MessageGraph::new(&g).unwrap();
        assert!(mg.gcn_coef.data.iter().all(|&c| (c - 0.5).abs() < 1e-15));
        assert_eq!(mg.gcn_coef.len(), 4);
    }

    #[test]
    fn directed_graph_uses_in_edges() {
        let g = TsGraph::from_edges(2, vec![Edge::new(0, 1, 4.0)], true, Weighting::Euclidean).unwrap();
        let mg = MessageGraph::new(&g).unwrap();
        assert_eq!(&*mg.edges.src, &[0, 0, 1]);
        assert_eq!(&*mg.edges.dst, &[1, 0, 1]);
        assert_eq!(mg.weights, vec![4.0, 1.0, 4.0]);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let edges = (0..9).map(|i| Edge::new(i, i + 1, 1.0)).collect();
        let g = TsGraph::from_edges(10, edges, false, Weighting::None).unwrap();
        let mg = MessageGraph::new(&g).unwrap();
        let model = GraphSegmenter::new(GatModelConfig { num_classes: 3, ..Default::default() }, 3).unwrap();
        let feats = Matrix::from_vec(10, 1, (0..10).map(|i| i as f64 * 0.1).collect()).unwrap();
        let p = model.predict_proba(&mg, &feats).unwrap();
        assert_eq!(p.shape(), (10, 3));
        for r in 0..10 {
            assert!((p.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
