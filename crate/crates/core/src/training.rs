//! Node masks, class weights and the training loops of both model families.

use alloc::format;
use alloc::rc::Rc;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Adam, AdamConfig, LossTargets, Matrix, Tape};
use crate::data::{make_windows_from, znormalize, LabeledSeries, WindowedDataset, CENTER_OFFSET, WINDOW};
use crate::error::{Error, Result};
use crate::eval::{prf1, Prf1};
use crate::graph::TsGraph;
use crate::models::{node_features, GatModelConfig, GraphSegmenter, MessageGraph, Seq2Point, Seq2PointConfig};
use crate::transforms::Transform;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub mask_seed: u64,
    pub model_seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_fraction: 0.8, mask_seed: 0, model_seed: 0 }
    }
}

/// Random `(train, test)` partition of `n` items with
/// `round(n * train_fraction)` training items.
pub fn make_masks(n: usize, spec: &SplitSpec) -> Result<(Vec<bool>, Vec<bool>)> {
    if n < 2 {
        return Err(Error::TooShort { what: "node mask", needed: 2, got: n });
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("train fraction {} not in (0, 1)", spec.train_fraction)));
    }
    let n_train = libm::round(n as f64 * spec.train_fraction) as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::DegenerateSplit(format!("{n_train} of {n} items in the training mask")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.mask_seed));
    let mut train = vec![false; n];
    for &i in &idx[..n_train] {
        train[i] = true;
    }
    let test = train.iter().map(|t| !t).collect();
    Ok((train, test))
}

/// `w[c] = N_train / (C * count_c)` over the training mask.
pub fn compute_class_weights(labels: &[usize], train_mask: &[bool], num_classes: usize) -> Result<Vec<f64>> {
    if labels.len() != train_mask.len() {
        return Err(Error::ShapeMismatch {
            op: "class weights",
            left: (labels.len(), 1),
            right: (train_mask.len(), 1),
        });
    }
    let mut counts = vec![0usize; num_classes];
    for (&y, _) in labels.iter().zip(train_mask).filter(|(_, &m)| m) {
        if y >= num_classes {
            return Err(Error::Validation(format!("label {y} out of range for {num_classes} classes")));
        }
        counts[y] += 1;
    }
    let n_train: usize = counts.iter().sum();
    if let Some(c) = counts.iter().position(|&c| c == 0) {
        return Err(Error::DegenerateSplit(format!("class {c} has no training points")));
    }
    Ok(counts.iter().map(|&c| n_train as f64 / (num_classes * c) as f64).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainConfig {
    pub epochs: usize,
    pub optimizer: AdamConfig,
    /// Mini-batch size of the window classifier (the graph model always
    /// trains on the whole graph).
    pub batch_size: usize,
    /// Z-normalize the series before it becomes model input.
    pub normalize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 1500, optimizer: AdamConfig::new(5.1e-4, 0.0), batch_size: 32, normalize: true }
    }
}

impl TrainConfig {
    /// Defaults for the window classifier.
    pub fn seq2point() -> Self {
        TrainConfig { epochs: 100, optimizer: AdamConfig::new(1e-3, 0.0), ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainReport {
    pub epochs_run: usize,
    /// Training loss after every epoch.
    pub loss_history: Vec<f64>,
    pub final_train_loss: f64,
    /// Loss on the test items; NaN when the test split lacks a loss weight.
    pub final_test_loss: f64,
    pub test_metrics: Prf1,
    pub num_parameters: usize,
}

/// Highest-probability class per row; ties go to the lowest class.
pub fn argmax_labels(proba: &Matrix) -> Vec<usize> {
    proba.argmax_rows()
}

fn loss_value(tape: &mut Tape, logits: crate::autodiff::Var, targets: &LossTargets) -> f64 {
    tape.weighted_cross_entropy(logits, targets).map_or(f64::NAN, |l| tape.scalar(l))
}

/// Full-graph training of a [`GraphSegmenter`] on the train mask. Test
/// metrics cover the complementary mask only.
pub fn train_node_classifier(
    graph: &TsGraph,
    features: &Matrix,
    labels: &[usize],
    model: GatModelConfig,
    train: &TrainConfig,
    spec: &SplitSpec,
) -> Result<(GraphSegmenter, TrainReport)> {
    let n = graph.num_nodes;
    if labels.len() != n || features.rows != n {
        return Err(Error::NodeCountMismatch { left: n, right: labels.len().min(features.rows) });
    }
    let mg = MessageGraph::new(graph)?;
    let (train_mask, test_mask) = make_masks(n, spec)?;
    let weights: Rc<[f64]> = compute_class_weights(labels, &train_mask, model.num_classes)?.into();
    let targets: Rc<[usize]> = labels.into();
    let train_t = LossTargets { targets: targets.clone(), class_weights: weights.clone(), mask: train_mask.into() };
    let test_t = LossTargets { targets, class_weights: weights, mask: test_mask.clone().into() };

    let mut net = GraphSegmenter::new(model, spec.model_seed)?;
    let mut opt = Adam::new(train.optimizer, &net.params.mats);
    let mut history = Vec::with_capacity(train.epochs);
    let mut tape = Tape::new();
    for _ in 0..train.epochs {
        tape.reset();
        let (logits, vars) = net.forward(&mut tape, &mg, features)?;
        let loss = tape.weighted_cross_entropy(logits, &train_t)?;
        history.push(tape.scalar(loss));
        tape.backward(loss)?;
        let grads: Vec<Vec<f64>> = vars.iter().map(|&v| tape.grad(v)).collect();
        opt.step(&mut net.params.mats, &grads)?;
    }

    tape.reset();
    let (logits, _) = net.forward(&mut tape, &mg, features)?;
    let final_train_loss = loss_value(&mut tape, logits, &train_t);
    let final_test_loss = loss_value(&mut tape, logits, &test_t);
    let pred = argmax_labels(&tape.to_matrix(logits));
    let test_metrics = prf1(&pred, labels, Some(&test_mask), model.num_classes)?;
    let report = TrainReport {
        epochs_run: train.epochs,
        loss_history: history,
        final_train_loss,
        final_test_loss,
        test_metrics,
        num_parameters: net.num_parameters(),
    };
    Ok((net, report))
}

fn gather_windows(data: &WindowedDataset, idx: &[usize]) -> Matrix {
    let mut m = Matrix::zeros(idx.len(), WINDOW);
    for (r, &i) in idx.iter().enumerate() {
        m.data[r * WINDOW..(r + 1) * WINDOW].copy_from_slice(data.window(i));
    }
    m
}

/// Mini-batch training of the window classifier on a random window split.
pub fn train_seq2point(
    data: &WindowedDataset,
    model: Seq2PointConfig,
    train: &TrainConfig,
    spec: &SplitSpec,
) -> Result<(Seq2Point, TrainReport)> {
    if train.batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be positive".into()));
    }
    let c = model.num_classes;
    let (train_mask, test_mask) = make_masks(data.len(), spec)?;
    let weights: Rc<[f64]> = compute_class_weights(&data.targets, &train_mask, c)?.into();
    let mut train_idx: Vec<usize> = (0..data.len()).filter(|&i| train_mask[i]).collect();

    let mut net = Seq2Point::new(model, spec.model_seed)?;
    let mut opt = Adam::new(train.optimizer, &net.params.mats);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.model_seed ^ 0x5eed_ba7c);
    let mut history = Vec::with_capacity(train.epochs);
    let mut tape = Tape::new();
    for _ in 0..train.epochs {
        train_idx.shuffle(&mut rng);
        let (mut total, mut seen) = (0.0, 0usize);
        for batch in train_idx.chunks(train.batch_size) {
            let x = gather_windows(data, batch);
            let targets = LossTargets {
                targets: batch.iter().map(|&i| data.targets[i]).collect(),
                class_weights: weights.clone(),
                mask: vec![true; batch.len()].into(),
            };
            tape.reset();
            let (logits, vars) = net.forward(&mut tape, &x)?;
            let loss = tape.weighted_cross_entropy(logits, &targets)?;
            total += tape.scalar(loss) * batch.len() as f64;
            seen += batch.len();
            tape.backward(loss)?;
            let grads: Vec<Vec<f64>> = vars.iter().map(|&v| tape.grad(v)).collect();
            opt.step(&mut net.params.mats, &grads)?;
        }
        history.push(total / seen as f64);
    }

    let all: Vec<usize> = (0..data.len()).collect();
    let mut logits = Matrix::zeros(0, c);
    for chunk in all.chunks(256) {
        tape.reset();
        let (z, _) = net.forward(&mut tape, &gather_windows(data, chunk))?;
        logits.data.extend_from_slice(tape.value(z));
        logits.rows += chunk.len();
    }
    tape.reset();
    let z = tape.constant(logits.clone());
    let loss_for = |tape: &mut Tape, mask: &[bool]| {
        let t = LossTargets { targets: data.targets.clone().into(), class_weights: weights.clone(), mask: mask.into() };
        loss_value(tape, z, &t)
    };
    let final_train_loss = loss_for(&mut tape, &train_mask);
    let final_test_loss = loss_for(&mut tape, &test_mask);
    let pred = argmax_labels(&logits);
    let test_metrics = prf1(&pred, &data.targets, Some(&test_mask), c)?;
    let report = TrainReport {
        epochs_run: train.epochs,
        loss_history: history,
        final_train_loss,
        final_test_loss,
        test_metrics,
        num_parameters: net.num_parameters(),
    };
    Ok((net, report))
}

/// Node labels of a trained segmenter.
pub fn predict_nodes(model: &GraphSegmenter, graph: &TsGraph, features: &Matrix) -> Result<Vec<usize>> {
    let mg = MessageGraph::new(graph)?;
    Ok(argmax_labels(&model.predict_proba(&mg, features)?))
}

/// Per-point labels of a trained window classifier; the first and last
/// `CENTER_OFFSET` points have no full window and stay `None`.
pub fn predict_series(model: &Seq2Point, values: &[f64], normalize: bool) -> Result<Vec<Option<usize>>> {
    let v = if normalize { znormalize(values) } else { values.to_vec() };
    let data = make_windows_from(&v, &vec![0; v.len()], model.config.num_classes)?;
    let mut out = vec![None; values.len()];
    let all: Vec<usize> = (0..data.len()).collect();
    for chunk in all.chunks(256) {
        let labels = model.predict_proba(&gather_windows(&data, chunk))?.argmax_rows();
        for (&m, y) in chunk.iter().zip(labels) {
            out[WindowedDataset::center(m)] = Some(y);
        }
    }
    debug_assert!(out[..CENTER_OFFSET].iter().all(Option::is_none));
    Ok(out)
}

/// Transforms `series` into a graph and trains the segmenter on it.
/// Edge weights enter attention exactly when the transform is weighted.
pub fn train_graph_on_series(
    series: &LabeledSeries,
    transform: &Transform,
    model: GatModelConfig,
    train: &TrainConfig,
    spec: &SplitSpec,
) -> Result<(GraphSegmenter, TrainReport)> {
    let graph = transform.apply(&series.values)?;
    let features = node_features(&series.values, train.normalize);
    let model = GatModelConfig {
        num_classes: series.num_classes,
        use_edge_weights: model.use_edge_weights || transform.is_weighted(),
        ..model
    };
    train_node_classifier(&graph, &features, &series.labels, model, train, spec)
}

/// Windows `series` and trains the window classifier on it.
pub fn train_seq2point_on_series(
    series: &LabeledSeries,
    model: Seq2PointConfig,
    train: &TrainConfig,
    spec: &SplitSpec,
) -> Result<(Seq2Point, TrainReport)> {
    let v = if train.normalize { znormalize(&series.values) } else { series.values.clone() };
    let data = make_windows_from(&v, &series.labels, series.num_classes)?;
    let model = Seq2PointConfig { num_classes: series.num_classes, ..model };
    train_seq2point(&data, model, train, spec)
}
