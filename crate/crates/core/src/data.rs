//! Labeled series, the three-line record format, synthetic generators and
//! sliding windows for the window-classifier baseline.
//!
//! A record is three lines: the dataset name, the comma-separated change
//! point indices (possibly empty) and the comma-separated values. Segments
//! are numbered by order of appearance, so segment `k` carries label `k`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Window length of the seq2point baseline.
pub const WINDOW: usize = 51;
/// Offset of the labelled point inside a window.
pub const CENTER_OFFSET: usize = WINDOW / 2;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabeledSeries {
    pub name: String,
    pub values: Vec<f64>,
    pub labels: Vec<usize>,
    pub change_points: Vec<usize>,
    pub num_classes: usize,
}

impl LabeledSeries {
    /// Builds a series whose labels are derived from `change_points`.
    pub fn from_change_points(
        name: impl Into<String>,
        values: Vec<f64>,
        change_points: Vec<usize>,
    ) -> Result<Self> {
        check_change_points(values.len(), &change_points)?;
        let labels = labels_from_change_points(values.len(), &change_points);
        let series = LabeledSeries {
            name: name.into(),
            num_classes: change_points.len() + 1,
            values,
            labels,
            change_points,
        };
        series.validate()?;
        Ok(series)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Half-open `[start, end)` bounds of every segment in temporal order.
    pub fn segments(&self) -> Vec<(usize, usize)> {
        segment_bounds(self.len(), &self.change_points)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.values.len();
        if n < 2 {
            return Err(Error::TooShort { what: "labeled series", needed: 2, got: n });
        }
        if self.labels.len() != n {
            return Err(Error::Validation(format!(
                "{} values but {} labels",
                n,
                self.labels.len()
            )));
        }
        check_change_points(n, &self.change_points)?;
        if self.num_classes != self.change_points.len() + 1 {
            return Err(Error::Validation(format!(
                "num_classes {} does not match {} change points",
                self.num_classes,
                self.change_points.len()
            )));
        }
        let expected = labels_from_change_points(n, &self.change_points);
        if let Some(i) = (0..n).find(|&i| expected[i] != self.labels[i]) {
            return Err(Error::Validation(format!(
                "label at index {i} is {}, expected {}",
                self.labels[i], expected[i]
            )));
        }
        Ok(())
    }
}

fn check_change_points(n: usize, change_points: &[usize]) -> Result<()> {
    let mut prev = 0;
    for &cp in change_points {
        if cp == 0 || cp >= n {
            return Err(Error::Validation(format!(
                "change point {cp} outside (0, {n})"
            )));
        }
        if cp <= prev {
            return Err(Error::Validation(format!(
                "change points not strictly increasing at {cp}"
            )));
        }
        prev = cp;
    }
    Ok(())
}

/// Piecewise-constant labels: index `i` gets the number of change points `<= i`.
pub fn labels_from_change_points(n: usize, change_points: &[usize]) -> Vec<usize> {
    let mut labels = Vec::with_capacity(n);
    let mut seg = 0;
    for i in 0..n {
        while seg < change_points.len() && change_points[seg] <= i {
            seg += 1;
        }
        labels.push(seg);
    }
    labels
}

pub fn segment_bounds(n: usize, change_points: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(change_points.len() + 1);
    let mut start = 0;
    for &cp in change_points {
        out.push((start, cp));
        start = cp;
    }
    out.push((start, n));
    out
}

/// Parses one three-line record.
pub fn parse_record(text: &str) -> Result<LabeledSeries> {
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));
    let name = lines
        .next()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .ok_or_else(|| Error::Parse { line: 1, message: "missing dataset name".into() })?;
    let cp_line = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 2, message: "missing change-point line".into() })?;
    let value_line = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 3, message: "missing value line".into() })?;
    if let Some((extra, _)) = lines.enumerate().find(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::Parse {
            line: 4 + extra,
            message: "unexpected content after value line".into(),
        });
    }

    let change_points = parse_list::<usize>(cp_line, 2)?;
    let values = parse_list::<f64>(value_line, 3)?;
    if values.is_empty() {
        return Err(Error::Parse { line: 3, message: "no values".into() });
    }
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Parse { line: 3, message: format!("value #{pos} is not finite") });
    }
    LabeledSeries::from_change_points(name, values, change_points)
}

fn parse_list<T: core::str::FromStr>(line: &str, line_no: usize) -> Result<Vec<T>> {
    let line = line.trim();
    if line.is_empty() {
        return Ok(Vec::new());
    }
    line.split(',')
        .enumerate()
        .map(|(i, tok)| {
            let tok = tok.trim();
            tok.parse::<T>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("field #{i} ({tok:?}) is not a valid number"),
            })
        })
        .collect()
}

/// Renders a series in the three-line record format. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn format_record(series: &LabeledSeries) -> String {
    let mut out = String::with_capacity(series.len() * 20 + 64);
    out.push_str(&series.name);
    out.push('\n');
    join_into(&mut out, series.change_points.iter());
    out.push('\n');
    join_into(&mut out, series.values.iter());
    out.push('\n');
    out
}

fn join_into<T: core::fmt::Display>(out: &mut String, items: impl Iterator<Item = T>) {
    for (i, item) in items.enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{item}");
    }
}

/// Value generator for one synthetic segment. Every kind adds i.i.d. Gaussian
/// noise with standard deviation `sigma` (zero disables it).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Generator {
    ConstantNoise { level: f64, sigma: f64 },
    /// `offset + amplitude * sin(2π·freq·t)`, `t` counted from segment start.
    Sine { freq: f64, amplitude: f64, offset: f64, sigma: f64 },
    GaussianNoise { mean: f64, sigma: f64 },
    LinearTrend { start: f64, slope: f64, sigma: f64 },
    /// Back-to-back instances of one shape. Each instance draws its length
    /// uniformly within 10% of `period` and its amplitude within 10% of
    /// `amplitude`, the way benchmark segments concatenate recordings of a
    /// single class.
    Template { shape: Shape, period: usize, amplitude: f64, sigma: f64 },
}

/// Instance shape over the phase `u` in `[0, 1)`. Every shape is an event
/// confined to the middle 30% of the instance on a flat zero baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Shape {
    Bump,
    DoubleBump,
    Square,
    Sawtooth,
    /// Negative bump followed by a positive one.
    Wave,
}

impl Shape {
    pub fn eval(self, u: f64) -> f64 {
        if !(0.35..0.65).contains(&u) {
            return 0.0;
        }
        let bump = |c: f64, w: f64| libm::exp(-(u - c) * (u - c) / (2.0 * w * w));
        match self {
            Shape::Bump => bump(0.5, 0.04),
            Shape::DoubleBump => bump(0.43, 0.025) + bump(0.57, 0.025),
            Shape::Square => f64::from(u8::from((0.4..0.6).contains(&u))),
            Shape::Sawtooth => (u - 0.35) / 0.3,
            Shape::Wave => bump(0.56, 0.03) - bump(0.44, 0.03),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SegmentSpec {
    pub length: usize,
    pub generator: Generator,
}

impl SegmentSpec {
    pub fn new(length: usize, generator: Generator) -> Self {
        SegmentSpec { length, generator }
    }
}

/// Concatenates the generated segments; each spec entry becomes one class.
pub fn synthetic_piecewise(
    name: impl Into<String>,
    spec: &[SegmentSpec],
    seed: u64,
) -> Result<LabeledSeries> {
    if spec.is_empty() {
        return Err(Error::Empty("segment spec"));
    }
    if let Some(i) = spec.iter().position(|s| s.length == 0) {
        return Err(Error::InvalidConfig(format!("segment {i} has zero length")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: usize = spec.iter().map(|s| s.length).sum();
    let mut values = Vec::with_capacity(total);
    let mut change_points = Vec::with_capacity(spec.len() - 1);
    for (k, seg) in spec.iter().enumerate() {
        if k > 0 {
            change_points.push(values.len());
        }
        let sigma = match seg.generator {
            Generator::ConstantNoise { sigma, .. }
            | Generator::Sine { sigma, .. }
            | Generator::GaussianNoise { sigma, .. }
            | Generator::LinearTrend { sigma, .. }
            | Generator::Template { sigma, .. } => sigma,
        };
        let noise = if sigma > 0.0 {
            Some(Normal::new(0.0, sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?)
        } else if sigma < 0.0 || sigma.is_nan() {
            return Err(Error::InvalidConfig(format!("segment {k} has negative sigma")));
        } else {
            None
        };
        let start = values.len();
        match seg.generator {
            Generator::ConstantNoise { level, .. } => values.resize(start + seg.length, level),
            Generator::Sine { freq, amplitude, offset, .. } => values.extend((0..seg.length).map(|t| {
                offset + amplitude * libm::sin(2.0 * core::f64::consts::PI * freq * t as f64)
            })),
            Generator::GaussianNoise { mean, .. } => values.resize(start + seg.length, mean),
            Generator::LinearTrend { start: s0, slope, .. } => {
                values.extend((0..seg.length).map(|t| s0 + slope * t as f64))
            }
            Generator::Template { shape, period, amplitude, .. } => {
                if period < 2 {
                    return Err(Error::InvalidConfig(format!("segment {k} has template period {period}")));
                }
                let spread = period / 10;
                while values.len() < start + seg.length {
                    let len = rng.random_range(period - spread..=period + spread);
                    let amp = amplitude * rng.random_range(0.9..=1.1);
                    let room = start + seg.length - values.len();
                    values.extend((0..len.min(room)).map(|t| amp * shape.eval(t as f64 / len as f64)));
                }
            }
        }
        if let Some(n) = noise {
            for v in &mut values[start..] {
                *v += n.sample(&mut rng);
            }
        }
    }
    LabeledSeries::from_change_points(name, values, change_points)
}

/// The desk-scale benchmark: five series with 2 to 4 classes and lengths
/// between 600 and 1440. Series `k` is generated with seed `seed + k`.
///
/// `levels` and `sines` separate by local amplitude and frequency. The other
/// three concatenate noise-free event shapes on a flat baseline, where a
/// window between two events carries no class information and only longer
/// range structure tells the segments apart.
pub fn synthetic_suite(seed: u64) -> Result<Vec<LabeledSeries>> {
    use Generator::*;
    use Shape::*;
    let s = SegmentSpec::new;
    let sine = |freq, amplitude| Sine { freq, amplitude, offset: 0.0, sigma: 0.05 };
    let t = |shape, period| Template { shape, period, amplitude: 1.0, sigma: 0.0 };
    let specs: [(&str, Vec<SegmentSpec>); 5] = [
        ("levels", alloc::vec![
            s(300, ConstantNoise { level: 0.0, sigma: 0.3 }),
            s(300, ConstantNoise { level: 2.0, sigma: 0.3 }),
        ]),
        ("sines", alloc::vec![s(300, sine(0.02, 1.0)), s(300, sine(0.08, 1.0)), s(300, sine(0.02, 2.0))]),
        ("pulses", alloc::vec![s(500, t(Bump, 160)), s(500, t(Square, 160))]),
        ("shapes3", alloc::vec![s(400, t(Bump, 130)), s(400, t(DoubleBump, 130)), s(400, t(Wave, 130))]),
        ("shapes4", alloc::vec![s(360, t(Bump, 120)), s(360, t(Square, 120)), s(360, t(Sawtooth, 120)), s(360, t(Wave, 120))]),
    ];
    specs
        .iter()
        .enumerate()
        .map(|(k, (name, spec))| synthetic_piecewise(*name, spec, seed.wrapping_add(k as u64)))
        .collect()
}

/// Sliding windows of length [`WINDOW`], stride 1, labelled by their center.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    /// Row-major `[num_windows, WINDOW]`.
    pub windows: Vec<f64>,
    pub targets: Vec<usize>,
    pub num_classes: usize,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn window(&self, m: usize) -> &[f64] {
        &self.windows[m * WINDOW..(m + 1) * WINDOW]
    }

    /// Series index labelled by window `m`.
    pub fn center(m: usize) -> usize {
        m + CENTER_OFFSET
    }
}

/// Windows over `values` with targets taken from `labels`.
pub fn make_windows_from(values: &[f64], labels: &[usize], num_classes: usize) -> Result<WindowedDataset> {
    let n = values.len();
    if n < WINDOW {
        return Err(Error::TooShort { what: "series too short for seq2point", needed: WINDOW, got: n });
    }
    let m = n - WINDOW + 1;
    let mut windows = Vec::with_capacity(m * WINDOW);
    for start in 0..m {
        windows.extend_from_slice(&values[start..start + WINDOW]);
    }
    let targets = labels[CENTER_OFFSET..CENTER_OFFSET + m].to_vec();
    Ok(WindowedDataset { windows, targets, num_classes })
}

pub fn make_windows(series: &LabeledSeries) -> Result<WindowedDataset> {
    make_windows_from(&series.values, &series.labels, series.num_classes)
}

/// Z-normalization with the sample (n-1) standard deviation. Constant input
/// maps to zeros.
pub fn znormalize(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return alloc::vec![0.0];
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let std = libm::sqrt(var);
    if std <= f64::EPSILON * libm::fabs(mean).max(1.0) {
        return alloc::vec![0.0; n];
    }
    values.iter().map(|v| (v - mean) / std).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn labels_follow_change_points() {
        let s = LabeledSeries::from_change_points("t", (0..10).map(f64::from).collect(), vec![4]).unwrap();
        assert_eq!(s.labels, vec![0, 0, 0, 0, 1, 1, 1, 1, 1, 1]);
        assert_eq!(s.num_classes, 2);
    }

    #[test]
    fn parse_without_change_points() {
        let s = parse_record("flat\n\n1,2,3\n").unwrap();
        assert_eq!(s.num_classes, 1);
        assert_eq!(s.labels, vec![0, 0, 0]);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = parse_record("x\n1\n1,2,abc\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = parse_record("x\n1,q\n1,2,3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_record("x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn rejects_bad_change_points() {
        assert!(matches!(parse_record("x\n3,2\n1,2,3,4\n"), Err(Error::Validation(_))));
        assert!(matches!(parse_record("x\n4\n1,2,3,4\n"), Err(Error::Validation(_))));
        assert!(matches!(parse_record("x\n0\n1,2,3,4\n"), Err(Error::Validation(_))));
    }

    #[test]
    fn record_round_trip() {
        let spec = [
            SegmentSpec::new(30, Generator::Sine { freq: 0.07, amplitude: 1.3, offset: 0.1, sigma: 0.2 }),
            SegmentSpec::new(20, Generator::GaussianNoise { mean: -2.0, sigma: 1.0 }),
        ];
        let s = synthetic_piecewise("rt", &spec, 3).unwrap();
        let back = parse_record(&format_record(&s)).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = [
            SegmentSpec::new(50, Generator::ConstantNoise { level: 0.0, sigma: 0.01 }),
            SegmentSpec::new(50, Generator::ConstantNoise { level: 10.0, sigma: 0.01 }),
        ];
        let a = synthetic_piecewise("a", &spec, 7).unwrap();
        let b = synthetic_piecewise("a", &spec, 7).unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(a.change_points, vec![50]);
        assert_eq!(a.num_classes, 2);
        assert_eq!(a.values, b.values);
        let c = synthetic_piecewise("a", &spec, 8).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn synthetic_class_means_differ() {
        let spec = [
            SegmentSpec::new(100, Generator::Sine { freq: 0.05, amplitude: 1.0, offset: 3.0, sigma: 0.0 }),
            SegmentSpec::new(100, Generator::GaussianNoise { mean: 0.0, sigma: 1.0 }),
        ];
        let s = synthetic_piecewise("m", &spec, 1).unwrap();
        let mean = |r: core::ops::Range<usize>| s.values[r.clone()].iter().sum::<f64>() / r.len() as f64;
        // 100 samples = 5 full periods, so the sine segment averages to its offset.
        assert!((mean(0..100) - 3.0).abs() < 1e-9);
        assert!(mean(100..200).abs() < 0.5);
    }

    #[test]
    fn synthetic_rejects_empty_and_zero_length() {
        assert!(synthetic_piecewise("e", &[], 0).is_err());
        let spec = [SegmentSpec::new(0, Generator::ConstantNoise { level: 0.0, sigma: 0.0 })];
        assert!(synthetic_piecewise("e", &spec, 0).is_err());
    }

    #[test]
    fn windows_shape_and_targets() {
        let s = LabeledSeries::from_change_points("w", (0..51).map(f64::from).collect(), vec![30]).unwrap();
        let w = make_windows(&s).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w.targets, vec![s.labels[25]]);

        let s = LabeledSeries::from_change_points("w", (0..100).map(f64::from).collect(), vec![]).unwrap();
        let w = make_windows(&s).unwrap();
        assert_eq!(w.len(), 50);
        assert!(w.targets.iter().all(|&t| t == 0));
        assert_eq!(w.window(7)[0], 7.0);
        assert_eq!(w.window(7)[50], 57.0);
    }

    #[test]
    fn windows_scatter_back_to_labels() {
        let s = LabeledSeries::from_change_points("w", (0..120).map(f64::from).collect(), vec![40, 77]).unwrap();
        let w = make_windows(&s).unwrap();
        let scattered: Vec<usize> = (0..w.len()).map(|m| w.targets[m]).collect();
        assert_eq!(&scattered[..], &s.labels[25..s.len() - 25]);
    }

    #[test]
    fn windows_too_short() {
        let s = LabeledSeries::from_change_points("w", vec![0.0; 50], vec![]).unwrap();
        assert!(matches!(make_windows(&s), Err(Error::TooShort { .. })));
    }

    #[test]
    fn znormalize_cases() {
        let z = znormalize(&[1.0, 2.0, 3.0]);
        assert_eq!(z, vec![-1.0, 0.0, 1.0]);
        assert_eq!(znormalize(&[5.0, 5.0, 5.0]), vec![0.0; 3]);
        assert_eq!(znormalize(&[4.0]), vec![0.0]);
    }
}
