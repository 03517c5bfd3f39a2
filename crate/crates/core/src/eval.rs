//! Classification metrics, boxplot summaries, grouping and split sweeps.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Precision, recall and F1 for one class, with its true support.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Prf1 {
    pub per_class: Vec<ClassMetrics>,
    /// Averaged with true-class support as weights.
    pub weighted: Averages,
    /// Unweighted mean over classes with any true or predicted points.
    pub macro_avg: Averages,
    pub accuracy: f64,
    pub total: usize,
}

/// Square confusion matrix, `counts[truth][pred]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Confusion {
    pub num_classes: usize,
    pub counts: Vec<Vec<usize>>,
}

impl Confusion {
    pub fn new(pred: &[usize], truth: &[usize], mask: Option<&[bool]>, num_classes: usize) -> Result<Self> {
        if pred.len() != truth.len() || mask.is_some_and(|m| m.len() != pred.len()) {
            return Err(Error::ShapeMismatch {
                op: "confusion",
                left: (pred.len(), 1),
                right: (truth.len(), mask.map_or(truth.len(), |m| m.len())),
            });
        }
        let mut counts = vec![vec![0; num_classes]; num_classes];
        for i in 0..pred.len() {
            if mask.is_some_and(|m| !m[i]) {
                continue;
            }
            if pred[i] >= num_classes || truth[i] >= num_classes {
                return Err(Error::Validation(alloc::format!("label out of range at index {i}")));
            }
            counts[truth[i]][pred[i]] += 1;
        }
        Ok(Confusion { num_classes, counts })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }
}

/// Per-class and averaged precision/recall/F1 over the masked points.
/// Undefined ratios (no predicted or no true positives) count as 0.
pub fn prf1(pred: &[usize], truth: &[usize], mask: Option<&[bool]>, num_classes: usize) -> Result<Prf1> {
    let cm = Confusion::new(pred, truth, mask, num_classes)?;
    let total = cm.total();
    if total == 0 {
        return Err(Error::Empty("evaluation mask"));
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let mut per_class = Vec::with_capacity(num_classes);
    let mut correct = 0;
    for c in 0..num_classes {
        let tp = cm.counts[c][c];
        let support: usize = cm.counts[c].iter().sum();
        let predicted: usize = (0..num_classes).map(|t| cm.counts[t][c]).sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        correct += tp;
        per_class.push((ClassMetrics { precision, recall, f1, support }, predicted));
    }
    let mut weighted = Averages::default();
    let mut macro_avg = Averages::default();
    let mut present = 0;
    for (m, predicted) in &per_class {
        let w = m.support as f64 / total as f64;
        weighted.precision += w * m.precision;
        weighted.recall += w * m.recall;
        weighted.f1 += w * m.f1;
        if m.support > 0 || *predicted > 0 {
            present += 1;
            macro_avg.precision += m.precision;
            macro_avg.recall += m.recall;
            macro_avg.f1 += m.f1;
        }
    }
    if present > 0 {
        let p = present as f64;
        macro_avg = Averages { precision: macro_avg.precision / p, recall: macro_avg.recall / p, f1: macro_avg.f1 / p };
    }
    Ok(Prf1 {
        per_class: per_class.into_iter().map(|(m, _)| m).collect(),
        weighted,
        macro_avg,
        accuracy: correct as f64 / total as f64,
        total,
    })
}

/// Linear-interpolation quantile of sorted data (`p` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
            let lo = libm::floor(h) as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (`n - 1` denominator); 0 for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    libm::sqrt(ss / (values.len() - 1) as f64)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoxplotStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
    pub mean: f64,
}

/// Tukey boxplot: whiskers reach the most extreme points within 1.5 IQR of
/// the quartiles, everything beyond is an outlier.
pub fn boxplot_stats(values: &[f64]) -> Result<BoxplotStats> {
    if values.is_empty() {
        return Err(Error::Empty("boxplot input"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = sorted.iter().copied().filter(|v| (lo..=hi).contains(v)).collect();
    Ok(BoxplotStats {
        median: quantile_sorted(&sorted, 0.5),
        q1,
        q3,
        whisker_low: inside.first().copied().unwrap_or(q1),
        whisker_high: inside.last().copied().unwrap_or(q3),
        outliers: sorted.iter().copied().filter(|v| !(lo..=hi).contains(v)).collect(),
        mean: mean(&sorted),
    })
}

/// One evaluated (dataset, method, seeds) run.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalRecord {
    pub dataset: String,
    pub method: String,
    pub transform: String,
    pub mask_seed: u64,
    pub model_seed: u64,
    pub num_segments: usize,
    pub metrics: Prf1,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroupSummary {
    pub num_segments: usize,
    pub count: usize,
    pub mean_f1: f64,
    pub std_f1: f64,
    pub boxplot: BoxplotStats,
}

/// Weighted F1 of the records grouped by segment count, ascending. Empty
/// groups do not appear.
pub fn group_by_segments(records: &[EvalRecord]) -> Vec<GroupSummary> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records {
        groups.entry(r.num_segments).or_default().push(r.metrics.weighted.f1);
    }
    groups
        .into_iter()
        .map(|(num_segments, f1)| GroupSummary {
            num_segments,
            count: f1.len(),
            mean_f1: mean(&f1),
            std_f1: std_dev(&f1),
            boxplot: boxplot_stats(&f1).expect("groups are non-empty"),
        })
        .collect()
}

/// Train fractions 0.1, 0.2, .., 0.9.
pub fn default_ratios() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepPoint {
    pub ratio: f64,
    pub mean_f1: f64,
    pub std_f1: f64,
    pub values: Vec<f64>,
}

/// Runs `run(ratio, repeat)` for every ratio and repeat and summarizes the
/// returned F1 scores per ratio.
pub fn split_ratio_sweep<F>(ratios: &[f64], repeats: usize, mut run: F) -> Result<Vec<SweepPoint>>
where
    F: FnMut(f64, usize) -> Result<f64>,
{
    if repeats == 0 {
        return Err(Error::InvalidConfig("sweep needs at least one repeat".into()));
    }
    ratios
        .iter()
        .map(|&ratio| {
            if !(ratio > 0.0 && ratio < 1.0) {
                return Err(Error::InvalidConfig(alloc::format!("train ratio {ratio} not in (0, 1)")));
            }
            let values = (0..repeats).map(|r| run(ratio, r)).collect::<Result<Vec<_>>>()?;
            Ok(SweepPoint { ratio, mean_f1: mean(&values), std_f1: std_dev(&values), values })
        })
        .collect()
}

/// Average ranks (1-based), ties sharing their mean rank.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; NaN when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, my) = (mean(&rx), mean(&ry));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..rx.len() {
        let (a, b) = (rx[i] - mx, ry[i] - my);
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    sxy / libm::sqrt(sxx * syy)
}
