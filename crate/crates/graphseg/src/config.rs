//! Run configuration.
//!
//! Values come from three layers, later ones winning: built-in defaults,
//! a TOML file, then command-line flags. The defaults are the headline
//! setup: a weighted dual-perspective visibility graph, a 5-layer GAT with
//! 32 units and 4 heads, an 80:20 node split and 1500 epochs.
//!
//! ```toml
//! input = "data/tssb"     # record file or directory; omit for the synthetic suite
//! output = "results"
//! workers = 1
//! transform = "wdpvg"
//!
//! [model]
//! family = "gat"          # gat | gcn | seq2point
//! layers = 5
//! hidden = 32
//! heads = 4
//!
//! [train]
//! epochs = 1500           # omit for the family default
//! train_fraction = 0.8
//!
//! [seeds]
//! mask = [0, 1, 2]
//! model = [0, 1, 2, 3, 4]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use graphseg_core::autodiff::AdamConfig;
use graphseg_core::models::{GatModelConfig, LayerKind, Seq2PointConfig};
use graphseg_core::training::{SplitSpec, TrainConfig};
use graphseg_core::transforms::Transform;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    #[default]
    Gat,
    Gcn,
    Seq2point,
}

impl ModelFamily {
    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::Gat => "gat",
            ModelFamily::Gcn => "gcn",
            ModelFamily::Seq2point => "seq2point",
        }
    }

    pub fn is_graph(self) -> bool {
        self != ModelFamily::Seq2point
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gat" => Ok(ModelFamily::Gat),
            "gcn" => Ok(ModelFamily::Gcn),
            "seq2point" | "s2p" => Ok(ModelFamily::Seq2point),
            other => Err(format!("unknown model family {other:?} (gat, gcn, seq2point)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub family: ModelFamily,
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { family: ModelFamily::Gat, layers: 5, hidden: 32, heads: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// `None` takes the family default (1500 graph, 100 window epochs).
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub weight_decay: f64,
    pub train_fraction: f64,
    pub batch_size: usize,
    /// Z-normalize the series before it becomes model input.
    pub normalize: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection { epochs: None, lr: None, weight_decay: 0.0, train_fraction: 0.8, batch_size: 32, normalize: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedSection {
    pub mask: Vec<u64>,
    pub model: Vec<u64>,
    /// Seed of the built-in synthetic suite.
    pub synthetic: u64,
}

impl Default for SeedSection {
    fn default() -> Self {
        SeedSection { mask: vec![0, 1, 2], model: vec![0, 1, 2, 3, 4], synthetic: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: PathBuf,
    pub workers: usize,
    pub transform: String,
    pub model: ModelSection,
    pub train: TrainSection,
    pub seeds: SeedSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            output: PathBuf::from("results"),
            workers: 1,
            transform: "wdpvg".into(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            seeds: SeedSection::default(),
        }
    }
}

/// Command-line values that replace config-file values when present.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub workers: Option<usize>,
    pub transform: Option<String>,
    pub family: Option<ModelFamily>,
    pub layers: Option<usize>,
    pub hidden: Option<usize>,
    pub heads: Option<usize>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub weight_decay: Option<f64>,
    pub train_fraction: Option<f64>,
    pub mask_seeds: Option<Vec<u64>>,
    pub model_seeds: Option<Vec<u64>>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Defaults, then the optional file, then `overrides`.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut c = match file {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        c.apply(overrides);
        c.validate()?;
        Ok(c)
    }

    pub fn apply(&mut self, o: &Overrides) {
        fn set<T: Clone>(dst: &mut T, src: &Option<T>) {
            if let Some(v) = src {
                *dst = v.clone();
            }
        }
        if o.input.is_some() {
            self.input.clone_from(&o.input);
        }
        set(&mut self.output, &o.output);
        set(&mut self.workers, &o.workers);
        set(&mut self.transform, &o.transform);
        set(&mut self.model.family, &o.family);
        set(&mut self.model.layers, &o.layers);
        set(&mut self.model.hidden, &o.hidden);
        set(&mut self.model.heads, &o.heads);
        if o.epochs.is_some() {
            self.train.epochs = o.epochs;
        }
        if o.lr.is_some() {
            self.train.lr = o.lr;
        }
        set(&mut self.train.weight_decay, &o.weight_decay);
        set(&mut self.train.train_fraction, &o.train_fraction);
        set(&mut self.seeds.mask, &o.mask_seeds);
        set(&mut self.seeds.model, &o.model_seeds);
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.seeds.mask.is_empty() || self.seeds.model.is_empty() {
            return Err(Error::Config("need at least one mask seed and one model seed".into()));
        }
        if !(self.train.train_fraction > 0.0 && self.train.train_fraction < 1.0) {
            return Err(Error::Config(format!("train_fraction {} not in (0, 1)", self.train.train_fraction)));
        }
        if self.train.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        self.transform_spec()?;
        self.gat_config(2).validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn transform_spec(&self) -> Result<Transform> {
        Transform::parse(&self.transform).map_err(|e| Error::Config(format!("transform {:?}: {e}", self.transform)))
    }

    pub fn gat_config(&self, num_classes: usize) -> GatModelConfig {
        GatModelConfig {
            num_layers: self.model.layers,
            hidden_dim: self.model.hidden,
            heads: self.model.heads,
            layer_kind: if self.model.family == ModelFamily::Gcn { LayerKind::Gcn } else { LayerKind::Gat },
            num_classes,
            ..Default::default()
        }
    }

    pub fn seq2point_config(&self, num_classes: usize) -> Seq2PointConfig {
        Seq2PointConfig { num_classes, ..Default::default() }
    }

    pub fn train_config(&self) -> TrainConfig {
        let base = if self.model.family.is_graph() { TrainConfig::default() } else { TrainConfig::seq2point() };
        TrainConfig {
            epochs: self.train.epochs.unwrap_or(base.epochs),
            optimizer: AdamConfig::new(self.train.lr.unwrap_or(base.optimizer.lr), self.train.weight_decay),
            batch_size: self.train.batch_size,
            normalize: self.train.normalize,
        }
    }

    pub fn split(&self, mask_seed: u64, model_seed: u64) -> SplitSpec {
        SplitSpec { train_fraction: self.train.train_fraction, mask_seed, model_seed }
    }

    /// Short SHA-256 of every setting that can change a result. Output
    /// location and worker count are left out.
    pub fn hash(&self) -> String {
        let view = RunConfig { output: PathBuf::new(), workers: 1, ..self.clone() };
        let digest = Sha256::digest(serde_json::to_vec(&view).expect("config serializes"));
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
