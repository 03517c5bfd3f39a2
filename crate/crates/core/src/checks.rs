//! Finite-difference gradient checks over every differentiable tape op and
//! both segmentation models, on seeded random instances.

use alloc::format;
use alloc::rc::Rc;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{compare_gradients_at, gradcheck, GradcheckReport, EdgeIndex, LossTargets, Matrix, Tape, Var};
use crate::error::Result;
use crate::models::{node_features, GatModelConfig, GraphSegmenter, LayerKind, MessageGraph, Seq2Point, Seq2PointConfig};
use crate::transforms::Transform;

pub const CHECK_TOL: f64 = 1e-4;
pub const CHECK_STEP: f64 = 1e-6;
/// Step for the window classifier. Its ~14k ReLU pre-activations per batch
/// make a kink crossing within `1e-6` likely on some probe, which shows up
/// as a spurious mismatch; the smaller step keeps the central difference on
/// one linear piece.
pub const RELU_MODEL_STEP: f64 = 1e-7;
pub const CHECK_INSTANCES: usize = 20;
/// Elements probed per parameter tensor of the full-size models.
pub const MODEL_PROBES: usize = 6;

pub const OP_NAMES: [&str; 16] = [
    "matmul",
    "add",
    "mul",
    "scale",
    "add_row",
    "elu",
    "relu",
    "leaky_relu",
    "sum",
    "head_dot",
    "gather_rows",
    "segment_softmax",
    "edge_aggregate",
    "head_mean",
    "conv1d",
    "weighted_cross_entropy",
];

pub const MODEL_NAMES: [&str; 4] = ["gat", "gat_weighted", "gcn", "seq2point"];

/// Worst result of one check over all instances.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub instances: usize,
    pub checked: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

fn fold(name: &str, tol: f64, reports: impl IntoIterator<Item = Result<GradcheckReport>>) -> Result<CheckOutcome> {
    let mut out = CheckOutcome { name: name.into(), instances: 0, checked: 0, max_rel_error: 0.0, passed: true };
    for r in reports {
        let r = r?;
        out.instances += 1;
        out.checked += r.checked;
        out.max_rel_error = out.max_rel_error.max(r.max_rel_error);
    }
    out.passed = out.max_rel_error <= tol;
    Ok(out)
}

/// Entries in `[-1, 1]` at least 0.05 away from zero, so piecewise ops are
/// never probed at their kink.
fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| {
            let v: f64 = rng.random_range(0.05..1.0);
            if rng.random_bool(0.5) { v } else { -v }
        })
        .collect();
    Matrix { rows, cols, data }
}

/// Reduces `v` to a scalar through a fixed, non-uniform weighting so every
/// output element reaches the gradient with a different coefficient.
fn project(t: &mut Tape, v: Var) -> Result<Var> {
    let (r, c) = t.shape(v);
    let w = (0..r * c).map(|k| libm::cos(0.7 * k as f64 + 0.3) + 0.5).collect();
    let w = t.constant(Matrix { rows: r, cols: c, data: w });
    let y = t.mul(v, w)?;
    Ok(t.sum(y))
}

fn random_edges(rng: &mut ChaCha8Rng, nodes: usize, count: usize) -> EdgeIndex {
    let src: Vec<usize> = (0..count).map(|_| rng.random_range(0..nodes)).collect();
    let dst: Vec<usize> = (0..count).map(|_| rng.random_range(0..nodes)).collect();
    EdgeIndex::new(src, dst, nodes).expect("indices in range")
}

/// One random instance of the named op.
pub fn check_op(name: &str, seed: u64, tol: f64) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (r, c) = (rng.random_range(2..6), rng.random_range(2..6));
    let h = CHECK_STEP;
    match name {
        "matmul" => {
            let k = rng.random_range(1..6);
            let ins = [rand_matrix(&mut rng, r, k), rand_matrix(&mut rng, k, c)];
            gradcheck(|t, v| { let y = t.matmul(v[0], v[1])?; project(t, y) }, &ins, h, tol)
        }
        "add" | "mul" => {
            let ins = [rand_matrix(&mut rng, r, c), rand_matrix(&mut rng, r, c)];
            let mul = name == "mul";
            gradcheck(|t, v| { let y = if mul { t.mul(v[0], v[1])? } else { t.add(v[0], v[1])? }; project(t, y) }, &ins, h, tol)
        }
        "scale" => {
            let s = rng.random_range(-2.0..2.0);
            gradcheck(|t, v| { let y = t.scale(v[0], s); project(t, y) }, &[rand_matrix(&mut rng, r, c)], h, tol)
        }
        "add_row" => {
            let ins = [rand_matrix(&mut rng, r, c), rand_matrix(&mut rng, 1, c)];
            gradcheck(|t, v| { let y = t.add_row(v[0], v[1])?; project(t, y) }, &ins, h, tol)
        }
        "elu" | "relu" | "leaky_relu" => {
            let ins = [rand_matrix(&mut rng, r, c)];
            gradcheck(
                |t, v| {
                    let y = match name {
                        "elu" => t.elu(v[0]),
                        "relu" => t.relu(v[0]),
                        _ => t.leaky_relu(v[0], 0.2),
                    };
                    project(t, y)
                },
                &ins,
                h,
                tol,
            )
        }
        "sum" => gradcheck(|t, v| Ok(t.sum(v[0])), &[rand_matrix(&mut rng, r, c)], h, tol),
        "head_dot" | "head_mean" => {
            let (heads, f) = (rng.random_range(1..4), rng.random_range(1..4));
            if name == "head_dot" {
                let ins = [rand_matrix(&mut rng, r, heads * f), rand_matrix(&mut rng, 1, heads * f)];
                gradcheck(|t, v| { let y = t.head_dot(v[0], v[1], heads)?; project(t, y) }, &ins, h, tol)
            } else {
                let ins = [rand_matrix(&mut rng, r, heads * f)];
                gradcheck(|t, v| { let y = t.head_mean(v[0], heads)?; project(t, y) }, &ins, h, tol)
            }
        }
        "gather_rows" => {
            let e = rng.random_range(1..10);
            let index: Rc<[usize]> = (0..e).map(|_| rng.random_range(0..r)).collect();
            let ins = [rand_matrix(&mut rng, r, c)];
            gradcheck(|t, v| { let y = t.gather_rows(v[0], index.clone())?; project(t, y) }, &ins, h, tol)
        }
        "segment_softmax" => {
            let (e, segs) = (rng.random_range(2..12), rng.random_range(1..4));
            let segments: Rc<[usize]> = (0..e).map(|_| rng.random_range(0..segs)).collect();
            let ins = [rand_matrix(&mut rng, e, c)];
            gradcheck(|t, v| { let y = t.segment_softmax(v[0], segments.clone(), segs)?; project(t, y) }, &ins, h, tol)
        }
        "edge_aggregate" => {
            let (heads, f, e) = (rng.random_range(1..4), rng.random_range(1..4), rng.random_range(1..12));
            let edges = random_edges(&mut rng, r, e);
            let ins = [rand_matrix(&mut rng, e, heads), rand_matrix(&mut rng, r, heads * f)];
            gradcheck(|t, v| { let y = t.edge_aggregate(v[0], v[1], &edges)?; project(t, y) }, &ins, h, tol)
        }
        "conv1d" => {
            let (cin, k, cout) = (rng.random_range(1..3), rng.random_range(1..4), rng.random_range(1..4));
            let len = rng.random_range(k..k + 5);
            let ins = [rand_matrix(&mut rng, r, len * cin), rand_matrix(&mut rng, k * cin, cout), rand_matrix(&mut rng, 1, cout)];
            gradcheck(|t, v| { let y = t.conv1d(v[0], v[1], v[2], cin)?; project(t, y) }, &ins, h, tol)
        }
        "weighted_cross_entropy" => {
            let targets = LossTargets {
                targets: (0..r).map(|_| rng.random_range(0..c)).collect(),
                class_weights: (0..c).map(|_| rng.random_range(0.2..3.0)).collect(),
                mask: (0..r).map(|i| i == 0 || rng.random_bool(0.7)).collect(),
            };
            let ins = [rand_matrix(&mut rng, r, c)];
            gradcheck(|t, v| t.weighted_cross_entropy(v[0], &targets), &ins, h, tol)
        }
        other => Err(crate::error::Error::InvalidConfig(format!("unknown op {other}"))),
    }
}

/// Every op over `instances` seeds starting at `seed`.
pub fn check_all_ops(instances: usize, seed: u64, tol: f64) -> Result<Vec<CheckOutcome>> {
    OP_NAMES
        .iter()
        .map(|name| fold(name, tol, (0..instances as u64).map(|i| check_op(name, seed.wrapping_add(i), tol))))
        .collect()
}

/// Loss gradient of a model over its parameter tensors, probed at
/// [`MODEL_PROBES`] random elements per tensor.
fn check_params<F>(params: &[Matrix], rng: &mut ChaCha8Rng, h: f64, tol: f64, loss: F) -> Result<GradcheckReport>
where
    F: FnMut(&mut Tape, &[Matrix]) -> Result<(Var, Vec<Var>)>,
{
    let mut loss = loss;
    let mut tape = Tape::new();
    let (out, vars) = loss(&mut tape, params)?;
    tape.backward(out)?;
    let analytic: Vec<Vec<f64>> = vars.iter().map(|&v| tape.grad(v)).collect();
    let mut coords = Vec::new();
    for (i, m) in params.iter().enumerate() {
        let take = MODEL_PROBES.min(m.data.len());
        coords.extend(sample(rng, m.data.len(), take).into_iter().map(|k| (i, k)));
    }
    compare_gradients_at(
        |ms| {
            tape.reset();
            let (o, _) = loss(&mut tape, ms)?;
            Ok(tape.scalar(o))
        },
        &analytic,
        params,
        &coords,
        h,
        tol,
    )
}

/// Default-size graph model on the visibility graph of a short random
/// series, loss over all nodes.
pub fn check_graph_model(kind: LayerKind, weighted: bool, seed: u64, tol: f64) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(12..30);
    let values: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let graph = MessageGraph::new(&Transform::default().apply(&values)?)?;
    let config = GatModelConfig { layer_kind: kind, num_classes: 7, use_edge_weights: weighted, ..Default::default() };
    let model = GraphSegmenter::new(config, rng.random())?;
    let features = node_features(&values, true);
    let targets = LossTargets {
        targets: (0..n).map(|_| rng.random_range(0..7)).collect(),
        class_weights: (0..7).map(|_| rng.random_range(0.5..2.0)).collect(),
        mask: (0..n).map(|_| true).collect(),
    };
    let mut trial = model.clone();
    let params = model.params.mats.clone();
    check_params(&params, &mut rng, CHECK_STEP, tol, move |t, ms| {
        trial.params.mats.clone_from_slice(ms);
        let (logits, vars) = trial.forward(t, &graph, &features)?;
        Ok((t.weighted_cross_entropy(logits, &targets)?, vars))
    })
}

/// Default-size window classifier on a batch of two random windows.
pub fn check_seq2point_model(seed: u64, tol: f64) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = Seq2PointConfig::default();
    let model = Seq2Point::new(config.clone(), rng.random())?;
    let x = rand_matrix(&mut rng, 2, config.window);
    let targets = LossTargets {
        targets: (0..2).map(|_| rng.random_range(0..config.num_classes)).collect(),
        class_weights: (0..config.num_classes).map(|_| rng.random_range(0.5..2.0)).collect(),
        mask: [true, true].into(),
    };
    let mut trial = model.clone();
    let params = model.params.mats.clone();
    check_params(&params, &mut rng, RELU_MODEL_STEP, tol, move |t, ms| {
        trial.params.mats.clone_from_slice(ms);
        let (logits, vars) = trial.forward(t, &x)?;
        Ok((t.weighted_cross_entropy(logits, &targets)?, vars))
    })
}

pub fn check_model(name: &str, seed: u64, tol: f64) -> Result<GradcheckReport> {
    match name {
        "gat" => check_graph_model(LayerKind::Gat, false, seed, tol),
        "gat_weighted" => check_graph_model(LayerKind::Gat, true, seed, tol),
        "gcn" => check_graph_model(LayerKind::Gcn, false, seed, tol),
        "seq2point" => check_seq2point_model(seed, tol),
        other => Err(crate::error::Error::InvalidConfig(format!("unknown model {other}"))),
    }
}

pub fn check_all_models(instances: usize, seed: u64, tol: f64) -> Result<Vec<CheckOutcome>> {
    MODEL_NAMES
        .iter()
        .map(|name| fold(name, tol, (0..instances as u64).map(|i| check_model(name, seed.wrapping_add(i), tol))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_op_passes_a_few_instances() {
        for o in check_all_ops(3, 11, CHECK_TOL).unwrap() {
            assert!(o.passed, "{o:?}");
        }
    }

    #[test]
    fn detects_a_wrong_gradient() {
        // compare against an analytic gradient that is off by 1%
        let m = Matrix { rows: 1, cols: 2, data: alloc::vec![0.5, -0.7] };
        let f = |ms: &[Matrix]| -> Result<f64> { Ok(ms[0].data.iter().map(|v| v * v).sum()) };
        let wrong = [alloc::vec![1.01, -1.4]];
        let r = compare_gradients_at(f, &wrong, &[m], &[(0, 0), (0, 1)], CHECK_STEP, CHECK_TOL).unwrap();
        assert!(!r.passed && r.worst == Some((0, 0)));
    }
}
