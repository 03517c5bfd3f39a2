//! Graph segmenter (stacked GAT or GCN layers) and the seq2point window CNN.

mod gnn;
mod seq2point;

pub use gnn::{
    gat_layer, gcn_layer, GatLayerOutput, GatModelConfig, GraphSegmenter, LayerKind, MessageGraph,
    WEIGHT_FLOOR,
};
pub use seq2point::{Seq2Point, Seq2PointConfig};

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Matrix, Tape, Var};
use crate::error::{Error, Result};

/// Named trainable matrices in a fixed order.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamStore {
    pub names: Vec<String>,
    pub mats: Vec<Matrix>,
}

impl ParamStore {
    pub fn push(&mut self, name: impl Into<String>, m: Matrix) {
        self.names.push(name.into());
        self.mats.push(m);
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.names.iter().position(|n| n == name).map(|i| &self.mats[i])
    }

    /// Total number of trainable scalars.
    pub fn num_scalars(&self) -> usize {
        self.mats.iter().map(Matrix::len).sum()
    }

    /// Registers every matrix as a parameter on `tape`, in order.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.mats.iter().map(|m| tape.param(m)).collect()
    }

    /// Checks that `other` has the same names and shapes.
    pub fn check_layout(&self, other: &ParamStore) -> Result<()> {
        if self.names != other.names {
            return Err(Error::Validation("parameter names do not match the model layout".into()));
        }
        for (a, b) in self.mats.iter().zip(&other.mats) {
            if a.shape() != b.shape() {
                return Err(Error::ShapeMismatch { op: "parameter layout", left: a.shape(), right: b.shape() });
            }
        }
        Ok(())
    }
}

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Matrix {
    let a = libm::sqrt(6.0 / (fan_in + fan_out).max(1) as f64);
    let data = (0..rows * cols).map(|_| rng.random_range(-a..a)).collect();
    Matrix { rows, cols, data }
}

/// Node feature matrix `[N, 1]` from the series values, optionally
/// z-normalized.
pub fn node_features(values: &[f64], normalize: bool) -> Matrix {
    let data = if normalize { crate::data::znormalize(values) } else { values.to_vec() };
    Matrix { rows: values.len(), cols: 1, data }
}
