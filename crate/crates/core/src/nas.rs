//! Random architecture search with Pareto-front extraction over
//! (parameter count, mean F1).

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::AdamConfig;
use crate::data::LabeledSeries;
use crate::error::{Error, Result};
use crate::models::{GatModelConfig, LayerKind};
use crate::training::{train_graph_on_series, SplitSpec, TrainConfig};
use crate::transforms::Transform;

pub const LAYER_CHOICES: [usize; 5] = [2, 3, 4, 5, 6];
pub const HIDDEN_CHOICES: [usize; 6] = [32, 64, 96, 128, 160, 192];
pub const HEAD_CHOICES: [usize; 4] = [2, 4, 6, 8];
pub const WEIGHT_DECAY_CHOICES: [f64; 3] = [0.0, 1e-4, 1e-3];
pub const LR_RANGE: (f64, f64) = (5e-4, 3e-3);
pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_TRIAL_EPOCHS: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrialConfig {
    pub layers: usize,
    pub hidden: usize,
    /// `None` selects GCN layers.
    pub heads: Option<usize>,
    pub lr: f64,
    pub weight_decay: f64,
}

impl TrialConfig {
    pub fn model_config(&self, num_classes: usize) -> GatModelConfig {
        GatModelConfig {
            num_layers: self.layers,
            hidden_dim: self.hidden,
            heads: self.heads.unwrap_or(1),
            layer_kind: if self.heads.is_some() { LayerKind::Gat } else { LayerKind::Gcn },
            in_dim: 1,
            num_classes,
            use_edge_weights: false,
        }
    }

    /// Whether every field lies in the search space.
    pub fn is_legal(&self) -> bool {
        LAYER_CHOICES.contains(&self.layers)
            && HIDDEN_CHOICES.contains(&self.hidden)
            && self.heads.is_none_or(|h| HEAD_CHOICES.contains(&h))
            && (LR_RANGE.0..=LR_RANGE.1).contains(&self.lr)
            && WEIGHT_DECAY_CHOICES.contains(&self.weight_decay)
    }
}

/// `n` configurations drawn uniformly from the search space (learning rate
/// log-uniform). Head count and the GCN option are equally likely.
pub fn sample_trials(n: usize, seed: u64) -> Vec<TrialConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (libm::log(LR_RANGE.0), libm::log(LR_RANGE.1));
    (0..n)
        .map(|_| {
            let layers = LAYER_CHOICES[rng.random_range(0..LAYER_CHOICES.len())];
            let hidden = HIDDEN_CHOICES[rng.random_range(0..HIDDEN_CHOICES.len())];
            let h = rng.random_range(0..=HEAD_CHOICES.len());
            let heads = HEAD_CHOICES.get(h).copied();
            let lr = libm::exp(rng.random_range(lo..=hi)).clamp(LR_RANGE.0, LR_RANGE.1);
            let weight_decay = WEIGHT_DECAY_CHOICES[rng.random_range(0..WEIGHT_DECAY_CHOICES.len())];
            TrialConfig { layers, hidden, heads, lr, weight_decay }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrialResult {
    pub trial: usize,
    pub config: TrialConfig,
    pub params: usize,
    pub mean_f1: f64,
}

/// Non-dominated results under (fewer parameters, higher F1), sorted by
/// parameter count. Of results equal in both objectives only the earliest
/// trial is kept.
pub fn pareto_front(results: &[TrialResult]) -> Vec<TrialResult> {
    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&results[a], &results[b]);
        ra.params.cmp(&rb.params).then(rb.mean_f1.total_cmp(&ra.mean_f1)).then(ra.trial.cmp(&rb.trial)).then(a.cmp(&b))
    });
    let mut front = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for i in order {
        if results[i].mean_f1 > best {
            best = results[i].mean_f1;
            front.push(results[i]);
        }
    }
    front
}

/// Mean F1 and trial count per value of one architectural choice.
pub type Marginal = BTreeMap<usize, (f64, usize)>;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Marginals {
    pub by_depth: Marginal,
    /// Key 0 stands for GCN layers.
    pub by_heads: Marginal,
    pub by_width: Marginal,
}

pub fn marginal_analysis(results: &[TrialResult]) -> Marginals {
    let group = |key: &dyn Fn(&TrialConfig) -> usize| -> Marginal {
        let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for r in results {
            let e = acc.entry(key(&r.config)).or_insert((0.0, 0));
            e.0 += r.mean_f1;
            e.1 += 1;
        }
        acc.into_iter().map(|(k, (s, n))| (k, (s / n as f64, n))).collect()
    };
    Marginals {
        by_depth: group(&|c| c.layers),
        by_heads: group(&|c| c.heads.unwrap_or(0)),
        by_width: group(&|c| c.hidden),
    }
}

/// Trains `config` on every panel series and averages the weighted test F1.
/// The parameter count uses the largest class count of the panel.
pub fn evaluate_trial(
    trial: usize,
    config: &TrialConfig,
    panel: &[LabeledSeries],
    transform: &Transform,
    epochs: usize,
    spec: &SplitSpec,
) -> Result<TrialResult> {
    if panel.is_empty() {
        return Err(Error::Empty("evaluation panel"));
    }
    let max_classes = panel.iter().map(|s| s.num_classes).max().unwrap_or(2);
    let train = TrainConfig { epochs, optimizer: AdamConfig::new(config.lr, config.weight_decay), ..Default::default() };
    let mut total = 0.0;
    for series in panel {
        let (_, report) = train_graph_on_series(series, transform, config.model_config(series.num_classes), &train, spec)?;
        total += report.test_metrics.weighted.f1;
    }
    Ok(TrialResult {
        trial,
        config: *config,
        params: config.model_config(max_classes).parameter_count(),
        mean_f1: total / panel.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(trial: usize, params: usize, f1: f64) -> TrialResult {
        let config = TrialConfig { layers: 2, hidden: 32, heads: Some(2), lr: 1e-3, weight_decay: 0.0 };
        TrialResult { trial, config, params, mean_f1: f1 }
    }

    #[test]
    fn front_example() {
        let f = pareto_front(&[r(0, 1, 0.9), r(1, 2, 0.95), r(2, 3, 0.94)]);
        let got: Vec<_> = f.iter().map(|t| (t.params, t.mean_f1)).collect();
        assert_eq!(got, [(1, 0.9), (2, 0.95)]);
        assert_eq!(pareto_front(&[r(0, 5, 0.5)]).len(), 1);
        assert_eq!(pareto_front(&[r(0, 1, 0.5), r(1, 2, 0.6), r(2, 3, 0.7)]).len(), 3);
        let tie = pareto_front(&[r(4, 2, 0.5), r(3, 2, 0.5)]);
        assert_eq!(tie.len(), 1);
        assert_eq!(tie[0].trial, 3);
    }

    #[test]
    fn sampling() {
        assert!(sample_trials(0, 1).is_empty());
        let a = sample_trials(200, 9);
        assert!(a.iter().all(TrialConfig::is_legal));
        assert_eq!(a, sample_trials(200, 9));
        assert!(a.iter().any(|t| t.heads.is_none()));
    }

    #[test]
    fn marginals_partition() {
        let mut a = r(0, 1, 0.4);
        a.config.layers = 5;
        let m = marginal_analysis(&[a, r(1, 1, 0.8), r(2, 1, 0.6)]);
        let (mean, n) = m.by_depth[&2];
        assert!((mean - 0.7).abs() < 1e-12 && n == 2);
        assert_eq!(m.by_depth.values().map(|v| v.1).sum::<usize>(), 3);
    }
}
