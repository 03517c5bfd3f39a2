//! Trained models as JSON: configuration, learned weights and the settings
//! needed to rebuild the model input.

use std::fs;
use std::path::Path;

use graphseg_core::data::{LabeledSeries, CENTER_OFFSET};
use graphseg_core::eval::{prf1, Prf1};
use graphseg_core::models::{node_features, GatModelConfig, GraphSegmenter, ParamStore, Seq2Point, Seq2PointConfig};
use graphseg_core::training::{make_masks, predict_nodes, predict_series, SplitSpec};
use graphseg_core::transforms::Transform;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Checkpoint {
    Graph {
        config: GatModelConfig,
        /// Canonical transform name, parseable by `Transform::parse`.
        transform: String,
        normalize: bool,
        split: SplitSpec,
        params: ParamStore,
    },
    Seq2point {
        config: Seq2PointConfig,
        normalize: bool,
        split: SplitSpec,
        params: ParamStore,
    },
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    version: String,
    dataset: String,
    model: Checkpoint,
}

impl Checkpoint {
    pub fn graph(model: &GraphSegmenter, transform: String, normalize: bool, split: SplitSpec) -> Self {
        Checkpoint::Graph { config: model.config, transform, normalize, split, params: model.params.clone() }
    }

    pub fn seq2point(model: &Seq2Point, normalize: bool, split: SplitSpec) -> Self {
        Checkpoint::Seq2point { config: model.config.clone(), normalize, split, params: model.params.clone() }
    }

    pub fn split(&self) -> SplitSpec {
        match self {
            Checkpoint::Graph { split, .. } | Checkpoint::Seq2point { split, .. } => *split,
        }
    }

    pub fn save(&self, path: &Path, dataset: &str) -> Result<()> {
        let env = Envelope { version: crate::VERSION.into(), dataset: dataset.into(), model: self.clone() };
        fs::write(path, serde_json::to_vec(&env)?).map_err(Error::io(path))
    }

    /// Loads a checkpoint and the name of the dataset it was trained on.
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let bytes = fs::read(path).map_err(Error::io(path))?;
        let env: Envelope = serde_json::from_slice(&bytes)?;
        if env.version != crate::VERSION {
            log::warn!("{}: written by version {}, running {}", path.display(), env.version, crate::VERSION);
        }
        Ok((env.model, env.dataset))
    }
}

/// Metrics of a stored model on a series.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    /// Every scored point (the window classifier skips both ends).
    pub all: Prf1,
    /// The held-out points of the training split, reported when the series
    /// has the training length.
    pub test: Option<Prf1>,
    /// Per-point predictions; `None` where the model gives no label.
    pub predictions: Vec<Option<usize>>,
}

impl Checkpoint {
    /// Rebuilds the model and labels `series`.
    pub fn evaluate(&self, series: &LabeledSeries) -> Result<Evaluation> {
        let n = series.len();
        let (predictions, classes, test_mask) = match self {
            Checkpoint::Graph { config, transform, normalize, split, params } => {
                let model = GraphSegmenter::from_params(*config, params.clone())?;
                let graph = Transform::parse(transform)?.apply(&series.values)?;
                let pred = predict_nodes(&model, &graph, &node_features(&series.values, *normalize))?;
                let test = make_masks(n, split).ok().map(|m| m.1);
                (pred.into_iter().map(Some).collect::<Vec<_>>(), config.num_classes, test)
            }
            Checkpoint::Seq2point { config, normalize, split, params } => {
                let model = Seq2Point::from_params(config.clone(), params.clone())?;
                let pred = predict_series(&model, &series.values, *normalize)?;
                // window m is centred on point m + CENTER_OFFSET
                let test = make_masks(n + 1 - config.window, split).ok().map(|(_, t)| {
                    let mut mask = vec![false; n];
                    mask[CENTER_OFFSET..CENTER_OFFSET + t.len()].copy_from_slice(&t);
                    mask
                });
                (pred, config.num_classes, test)
            }
        };
        if series.num_classes > classes {
            return Err(Error::Model(graphseg_core::Error::Validation(format!(
                "series has {} classes, model {classes}",
                series.num_classes
            ))));
        }
        let scored: Vec<bool> = predictions.iter().map(Option::is_some).collect();
        let pred: Vec<usize> = predictions.iter().map(|p| p.unwrap_or(0)).collect();
        let all = prf1(&pred, &series.labels, Some(&scored), classes)?;
        let test = match test_mask {
            Some(mask) => Some(prf1(&pred, &series.labels, Some(&mask), classes)?),
            None => None,
        };
        Ok(Evaluation { all, test, predictions })
    }
}
