use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{glorot, ParamStore};
use crate::autodiff::{Matrix, Tape, Var};
use crate::data::WINDOW;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct Seq2PointConfig {
    pub window: usize,
    /// `(kernels, kernel size)` of each convolution.
    pub conv_specs: Vec<(usize, usize)>,
    pub dense: usize,
    pub num_classes: usize,
}

impl Default for Seq2PointConfig {
    fn default() -> Self {
        Seq2PointConfig {
            window: WINDOW,
            conv_specs: vec![(30, 10), (30, 8), (40, 6), (50, 5), (50, 5)],
            dense: 1024,
            num_classes: 2,
        }
    }
}

impl Seq2PointConfig {
    /// Output length after every convolution.
    pub fn conv_lengths(&self) -> Result<Vec<usize>> {
        let mut len = self.window;
        let mut out = Vec::with_capacity(self.conv_specs.len());
        for &(_, k) in &self.conv_specs {
            if k == 0 || k > len {
                return Err(Error::InvalidConfig(format!("kernel size {k} does not fit length {len}")));
            }
            len = len - k + 1;
            out.push(len);
        }
        Ok(out)
    }

    fn flat_width(&self) -> Result<usize> {
        let last = self.conv_lengths()?.last().copied().unwrap_or(self.window);
        let channels = self.conv_specs.last().map_or(1, |c| c.0);
        Ok(last * channels)
    }

    pub fn parameter_count(&self) -> Result<usize> {
        let mut c_in = 1;
        let mut total = 0;
        for &(c_out, k) in &self.conv_specs {
            total += k * c_in * c_out + c_out;
            c_in = c_out;
        }
        let flat = self.flat_width()?;
        Ok(total + flat * self.dense + self.dense + self.dense * self.num_classes + self.num_classes)
    }
}

/// Sliding-window CNN predicting the class of the window's centre point:
/// valid convolutions and one dense layer, ReLU after each.
#[derive(Clone, Debug, PartialEq)]
pub struct Seq2Point {
    pub config: Seq2PointConfig,
    pub params: ParamStore,
}

impl Seq2Point {
    pub fn new(config: Seq2PointConfig, seed: u64) -> Result<Self> {
        if config.num_classes < 2 || config.dense == 0 || config.conv_specs.iter().any(|c| c.0 == 0) {
            return Err(Error::InvalidConfig("seq2point widths and classes must be positive".into()));
        }
        config.conv_lengths()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::default();
        let mut c_in = 1;
        for (i, &(c_out, k)) in config.conv_specs.iter().enumerate() {
            params.push(format!("conv{i}.weight"), glorot(&mut rng, k * c_in, c_out, k * c_in, k * c_out));
            params.push(format!("conv{i}.bias"), Matrix::zeros(1, c_out));
            c_in = c_out;
        }
        let flat = config.flat_width()?;
        params.push("dense.weight", glorot(&mut rng, flat, config.dense, flat, config.dense));
        params.push("dense.bias", Matrix::zeros(1, config.dense));
        params.push("head.weight", glorot(&mut rng, config.dense, config.num_classes, config.dense, config.num_classes));
        params.push("head.bias", Matrix::zeros(1, config.num_classes));
        Ok(Seq2Point { config, params })
    }

    pub fn from_params(config: Seq2PointConfig, params: ParamStore) -> Result<Self> {
        let fresh = Seq2Point::new(config.clone(), 0)?;
        fresh.params.check_layout(&params)?;
        Ok(Seq2Point { config, params })
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_scalars()
    }

    /// `windows` is `[B, window]`; returns `([B, C] logits, parameter vars)`.
    pub fn forward(&self, tape: &mut Tape, windows: &Matrix) -> Result<(Var, Vec<Var>)> {
        if windows.cols != self.config.window {
            return Err(Error::ShapeMismatch {
                op: "seq2point input",
                left: windows.shape(),
                right: (windows.rows, self.config.window),
            });
        }
        let p = self.params.bind(tape);
        let mut x = tape.constant(windows.clone());
        let mut c_in = 1;
        let mut k = 0;
        for &(c_out, _) in &self.config.conv_specs {
            let y = tape.conv1d(x, p[k], p[k + 1], c_in)?;
            x = tape.relu(y);
            c_in = c_out;
            k += 2;
        }
        let h = tape.matmul(x, p[k])?;
        let h = tape.add_row(h, p[k + 1])?;
        let h = tape.relu(h);
        let z = tape.matmul(h, p[k + 2])?;
        let z = tape.add_row(z, p[k + 3])?;
        Ok((z, p))
    }

    pub fn predict_proba(&self, windows: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let (z, _) = self.forward(&mut tape, windows)?;
        Ok(tape.to_matrix(z).softmax_rows())
    }
}
