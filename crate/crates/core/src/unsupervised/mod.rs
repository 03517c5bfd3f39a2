//! Change-point detection by classification score profiles, followed by
//! K-Means over segment statistics.
//!
//! The profile scores every candidate split `t` by how well a k-NN
//! classifier separates subsequences left of `t` from those right of it.
//! The series is z-normalized as a whole and subsequences are compared with
//! plain Euclidean distance, so level shifts remain visible while the
//! result is still invariant under positive affine transforms.

mod hungarian;

pub use hungarian::hungarian;

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{segment_bounds, znormalize, LabeledSeries};
use crate::error::{Error, Result};
use crate::eval::{prf1, Prf1};

/// Neighbours in the profile classifier.
pub const DEFAULT_K: usize = 3;
pub const KMEANS_MAX_ITER: usize = 300;

/// `max(10, n / 100)`.
pub fn default_width(n: usize) -> usize {
    (n / 100).max(10)
}

/// Indices of the `k` nearest subsequences of every subsequence, excluding
/// trivial matches closer than `w` in time. Ties prefer the smaller index.
fn subsequence_neighbours(z: &[f64], w: usize, k: usize) -> Vec<Vec<usize>> {
    let m = z.len() - w + 1;
    let mut dist = vec![0.0; m * m];
    for i in 0..m {
        for j in i + w..m {
            let d: f64 = z[i..i + w].iter().zip(&z[j..j + w]).map(|(a, b)| (a - b) * (a - b)).sum();
            dist[i * m + j] = d;
            dist[j * m + i] = d;
        }
    }
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(m);
    (0..m)
        .map(|i| {
            cand.clear();
            cand.extend((0..m).filter(|&j| i.abs_diff(j) >= w).map(|j| (dist[i * m + j], j)));
            let kk = k.min(cand.len());
            let by = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if kk > 0 && kk < cand.len() {
                cand.select_nth_unstable_by(kk - 1, by);
            }
            cand[..kk].sort_by(by);
            cand[..kk].iter().map(|c| c.1).collect()
        })
        .collect()
}

/// Classification score profile over split positions. Entry `t` (for `t`
/// in `[2w, n-2w]`) is the balanced leave-one-out accuracy of a k-NN
/// classifier labelling each width-`w` subsequence by which side of `t`
/// its centre lies on; all other entries are 0.
pub fn clasp_profile(series: &[f64], w: usize, k: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if w < 2 {
        return Err(Error::InvalidConfig("subsequence width must be at least 2".into()));
    }
    if k == 0 {
        return Err(Error::InvalidConfig("k must be positive".into()));
    }
    if n < 4 * w {
        return Err(Error::TooShort { what: "score profile", needed: 4 * w, got: n });
    }
    let z = znormalize(series);
    let nn = subsequence_neighbours(&z, w, k);
    let m = nn.len();
    let half = w / 2;
    let mut profile = vec![0.0; n];
    for t in 2 * w..=n - 2 * w {
        let left = |j: usize| j + half < t;
        let (mut hit, mut total) = ([0usize; 2], [0usize; 2]);
        for i in 0..m {
            let truth = left(i) as usize;
            let votes = nn[i].iter().filter(|&&j| left(j)).count();
            let pred = (2 * votes > nn[i].len()) as usize;
            total[truth] += 1;
            hit[truth] += (pred == truth) as usize;
        }
        let recall = |c: usize| if total[c] == 0 { 0.0 } else { hit[c] as f64 / total[c] as f64 };
        profile[t] = (recall(0) + recall(1)) / 2.0;
    }
    Ok(profile)
}

fn best_split(series: &[f64], w: usize, k: usize) -> Result<Option<(f64, usize)>> {
    if series.len() < 4 * w {
        return Ok(None);
    }
    let profile = clasp_profile(series, w, k)?;
    let mut best: Option<(f64, usize)> = None;
    for (t, &s) in profile.iter().enumerate().skip(2 * w) {
        if best.is_none_or(|(b, _)| s > b) {
            best = Some((s, t));
        }
    }
    Ok(best.filter(|&(_, t)| t <= series.len() - 2 * w))
}

/// Greedy binary segmentation: split at the global profile maximum, then
/// keep splitting whichever segment offers the highest local maximum.
/// Returned sorted.
pub fn detect_change_points(series: &[f64], num_cps: usize, w: usize) -> Result<Vec<usize>> {
    detect_change_points_k(series, num_cps, w, DEFAULT_K)
}

/// `(start, end, best (score, split) relative to start)`.
type OpenSegment = (usize, usize, Option<(f64, usize)>);

pub fn detect_change_points_k(series: &[f64], num_cps: usize, w: usize, k: usize) -> Result<Vec<usize>> {
    if num_cps == 0 {
        return Err(Error::InvalidConfig("at least one change point must be requested".into()));
    }
    let mut open: Vec<OpenSegment> = vec![(0, series.len(), best_split(series, w, k)?)];
    let mut cps = Vec::with_capacity(num_cps);
    while cps.len() < num_cps {
        let pick = open
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.2.map(|(score, _)| (i, score)))
            .fold(None, |acc: Option<(usize, f64)>, (i, s)| match acc {
                Some((_, b)) if b >= s => acc,
                _ => Some((i, s)),
            });
        let Some((i, _)) = pick else {
            return Err(Error::TooShort { what: "segment to split further", needed: 4 * w, got: series.len() });
        };
        let (start, end, best) = open.swap_remove(i);
        let cp = start + best.expect("picked segments have a split").1;
        cps.push(cp);
        open.push((start, cp, best_split(&series[start..cp], w, k)?));
        open.push((cp, end, best_split(&series[cp..end], w, k)?));
    }
    cps.sort_unstable();
    Ok(cps)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SegmentFeatures {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Least-squares slope against the sample index.
    pub slope: f64,
}

impl SegmentFeatures {
    pub fn to_array(self) -> [f64; 5] {
        [self.mean, self.std, self.min, self.max, self.slope]
    }
}

/// Statistics of `series[start..end]`.
pub fn segment_feature_vector(series: &[f64], bounds: (usize, usize)) -> Result<SegmentFeatures> {
    let (start, end) = bounds;
    if start >= end || end > series.len() {
        return Err(Error::Validation(alloc::format!("segment bounds {start}..{end} invalid for length {}", series.len())));
    }
    let s = &series[start..end];
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    let var = s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let t_mean = (n - 1.0) / 2.0;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in s.iter().enumerate() {
        let dt = i as f64 - t_mean;
        sxy += dt * (v - mean);
        sxx += dt * dt;
    }
    Ok(SegmentFeatures {
        mean,
        std: libm::sqrt(var),
        min: s.iter().cloned().fold(f64::INFINITY, f64::min),
        max: s.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        slope: if sxx > 0.0 { sxy / sxx } else { 0.0 },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// Centroids in standardized feature space.
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after every iteration.
    pub inertia: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm from k-means++ seeding on per-dimension standardized
/// features.
pub fn kmeans_cluster(features: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansResult> {
    let s = features.len();
    if k == 0 || k > s {
        return Err(Error::InvalidConfig(alloc::format!("k = {k} must be in [1, {s}]")));
    }
    let d = features[0].len();
    if features.iter().any(|f| f.len() != d) {
        return Err(Error::Validation("feature vectors differ in length".into()));
    }
    let mut x: Vec<Vec<f64>> = features.to_vec();
    for j in 0..d {
        let mean = x.iter().map(|r| r[j]).sum::<f64>() / s as f64;
        let sd = libm::sqrt(x.iter().map(|r| (r[j] - mean) * (r[j] - mean)).sum::<f64>() / s as f64);
        for r in &mut x {
            r[j] = if sd > 0.0 { (r[j] - mean) / sd } else { 0.0 };
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = vec![x[rng.random_range(0..s)].clone()];
    while centroids.len() < k {
        let d2: Vec<f64> = x
            .iter()
            .map(|p| centroids.iter().map(|c| sq_dist(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = s - 1;
            for (i, &v) in d2.iter().enumerate() {
                if r < v {
                    pick = i;
                    break;
                }
                r -= v;
            }
            pick
        } else {
            // all points coincide with a centroid: take the first unused one
            (0..s).find(|&i| !centroids.contains(&x[i])).unwrap_or(0)
        };
        centroids.push(x[next].clone());
    }

    let assign = |centroids: &[Vec<f64>]| -> Vec<usize> {
        x.iter()
            .map(|p| {
                let mut best = 0;
                for c in 1..centroids.len() {
                    if sq_dist(p, &centroids[c]) < sq_dist(p, &centroids[best]) {
                        best = c;
                    }
                }
                best
            })
            .collect()
    };
    let inertia_of = |labels: &[usize], centroids: &[Vec<f64>]| -> f64 {
        x.iter().zip(labels).map(|(p, &l)| sq_dist(p, &centroids[l])).sum()
    };
    let mut labels = assign(&centroids);
    let mut inertia = vec![inertia_of(&labels, &centroids)];
    for _ in 0..KMEANS_MAX_ITER {
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = x.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            for j in 0..d {
                centroid[j] = members.iter().map(|p| p[j]).sum::<f64>() / members.len() as f64;
            }
        }
        let next = assign(&centroids);
        inertia.push(inertia_of(&next, &centroids));
        if next == labels {
            break;
        }
        labels = next;
    }
    Ok(KMeansResult { labels, centroids, inertia })
}

/// Relabels `pred` with the one-to-one cluster-to-class mapping that
/// maximizes agreement with `truth`; clusters left over once every class is
/// taken map to their most frequent class. Returns the relabeled vector and
/// the mapping indexed by cluster id.
pub fn match_labels(pred: &[usize], truth: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch { op: "match_labels", left: (pred.len(), 1), right: (truth.len(), 1) });
    }
    if pred.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let kp = pred.iter().max().unwrap() + 1;
    let kt = truth.iter().max().unwrap() + 1;
    let mut counts = vec![vec![0usize; kt]; kp];
    for (&p, &t) in pred.iter().zip(truth) {
        counts[p][t] += 1;
    }
    let mut mapping = vec![usize::MAX; kp];
    if kp <= kt {
        let cost: Vec<Vec<f64>> = counts.iter().map(|r| r.iter().map(|&c| -(c as f64)).collect()).collect();
        for (p, t) in hungarian(&cost).into_iter().enumerate() {
            mapping[p] = t;
        }
    } else {
        let cost: Vec<Vec<f64>> = (0..kt).map(|t| (0..kp).map(|p| -(counts[p][t] as f64)).collect()).collect();
        for (t, p) in hungarian(&cost).into_iter().enumerate() {
            mapping[p] = t;
        }
        for p in 0..kp {
            if mapping[p] == usize::MAX {
                let row = &counts[p];
                mapping[p] = (0..kt).fold(0, |b, t| if row[t] > row[b] { t } else { b });
            }
        }
    }
    Ok((pred.iter().map(|&p| mapping[p]).collect(), mapping))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UnsupervisedOptions {
    /// Subsequence width; `None` uses [`default_width`].
    pub width: Option<usize>,
    pub k: usize,
    pub seed: u64,
}

impl Default for UnsupervisedOptions {
    fn default() -> Self {
        UnsupervisedOptions { width: None, k: DEFAULT_K, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnsupervisedResult {
    pub change_points: Vec<usize>,
    /// Matched per-point labels.
    pub labels: Vec<usize>,
    pub metrics: Prf1,
}

/// Detects `C-1` change points, clusters the segments into `C` states and
/// scores the matched labels against the ground truth.
pub fn unsupervised_segment(series: &LabeledSeries, opts: &UnsupervisedOptions) -> Result<UnsupervisedResult> {
    let n = series.len();
    let c = series.num_classes;
    let labels = if c <= 1 {
        vec![0; n]
    } else {
        let w = opts.width.unwrap_or_else(|| default_width(n));
        let cps = detect_change_points_k(&series.values, c - 1, w, opts.k)?;
        let bounds = segment_bounds(n, &cps);
        let feats = bounds
            .iter()
            .map(|&b| segment_feature_vector(&series.values, b).map(|f| f.to_array().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let clusters = kmeans_cluster(&feats, c, opts.seed)?.labels;
        let mut point = vec![0; n];
        for (&(s, e), &l) in bounds.iter().zip(&clusters) {
            point[s..e].iter_mut().for_each(|p| *p = l);
        }
        let (matched, _) = match_labels(&point, &series.labels)?;
        return Ok(UnsupervisedResult {
            metrics: prf1(&matched, &series.labels, None, c)?,
            labels: matched,
            change_points: cps,
        });
    };
    Ok(UnsupervisedResult { metrics: prf1(&labels, &series.labels, None, c.max(1))?, labels, change_points: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthetic_piecewise, Generator, SegmentSpec};

    fn step(seed: u64) -> Vec<f64> {
        let g = |level| Generator::ConstantNoise { level, sigma: 0.05 };
        synthetic_piecewise("step", &[SegmentSpec::new(100, g(0.0)), SegmentSpec::new(100, g(10.0))], seed)
            .unwrap()
            .values
    }

    #[test]
    fn step_profile_peaks_at_change() {
        let p = clasp_profile(&step(1), 10, 3).unwrap();
        let arg = (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b });
        assert!(arg.abs_diff(100) <= 3, "argmax {arg}");
        assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(p[19], 0.0);
        assert!(clasp_profile(&step(1)[..39], 10, 3).is_err());
    }

    #[test]
    fn feature_cases() {
        let f = segment_feature_vector(&[2.0; 5], (0, 5)).unwrap();
        assert_eq!((f.std, f.slope, f.min, f.max, f.mean), (0.0, 0.0, 2.0, 2.0, 2.0));
        let ramp: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let r = segment_feature_vector(&ramp, (0, 10)).unwrap();
        assert!((r.slope - 1.0).abs() < 1e-12 && (r.mean - 4.5).abs() < 1e-12);
        assert_eq!(segment_feature_vector(&ramp, (3, 4)).unwrap().slope, 0.0);
    }

    #[test]
    fn matching() {
        let truth = [0, 0, 1, 1, 2];
        assert_eq!(match_labels(&truth, &truth).unwrap().0, truth.to_vec());
        assert_eq!(match_labels(&[2, 2, 0, 0, 1], &truth).unwrap().0, truth.to_vec());
        // surplus cluster 2 maps to its majority class
        let (m, _) = match_labels(&[0, 0, 1, 2, 2], &[0, 0, 1, 1, 1]).unwrap();
        assert_eq!(m, vec![0, 0, 1, 1, 1]);
    }

    #[test]
    fn kmeans_separates_points() {
        let f = vec![vec![0.0, 0.0], vec![10.0, 10.0]];
        let r = kmeans_cluster(&f, 2, 0).unwrap();
        assert_ne!(r.labels[0], r.labels[1]);
        assert!(kmeans_cluster(&f, 3, 0).is_err());
    }
}
