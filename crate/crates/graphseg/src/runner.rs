//! Batch experiments: every dataset under every (mask seed, model seed)
//! pair, with results written as CSV and JSON.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use graphseg_core::data::{synthetic_suite, LabeledSeries};
use graphseg_core::eval::{group_by_segments, split_ratio_sweep, EvalRecord, GroupSummary, SweepPoint};
use graphseg_core::nas::{evaluate_trial, marginal_analysis, pareto_front, sample_trials, TrialResult};
use graphseg_core::training::{train_graph_on_series, train_seq2point_on_series, SplitSpec, TrainReport};
use graphseg_core::unsupervised::{unsupervised_segment, UnsupervisedOptions, UnsupervisedResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{Error, Result};

/// One CSV row per (dataset, mask seed, model seed).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub method: String,
    pub transform: String,
    pub num_segments: usize,
    pub num_points: usize,
    pub mask_seed: u64,
    pub model_seed: u64,
    pub train_fraction: f64,
    pub epochs: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub test_points: usize,
    pub num_parameters: usize,
    pub final_train_loss: f64,
    pub config_hash: String,
    pub version: String,
}

pub struct Trained {
    pub record: EvalRecord,
    pub report: TrainReport,
    pub checkpoint: Checkpoint,
}

#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub records: Vec<EvalRecord>,
}

impl RunOutput {
    pub fn groups(&self) -> Vec<GroupSummary> {
        group_by_segments(&self.records)
    }

    pub fn mean_f1(&self) -> f64 {
        graphseg_core::eval::mean(&self.rows.iter().map(|r| r.f1).collect::<Vec<_>>())
    }
}

/// The configured input, or the synthetic suite when none is set.
pub fn load_datasets(config: &RunConfig) -> Result<Vec<LabeledSeries>> {
    match &config.input {
        Some(path) => crate::io::load_input(path),
        None => Ok(synthetic_suite(config.seeds.synthetic)?),
    }
}

fn method_names(config: &RunConfig) -> (String, String) {
    let family = config.model.family;
    let transform = if family.is_graph() { config.transform.clone() } else { "window".into() };
    (family.name().into(), transform)
}

/// Trains and scores the configured model on one series.
pub fn train_one(series: &LabeledSeries, config: &RunConfig, split: SplitSpec) -> Result<Trained> {
    let stage = |stage| move |source| Error::Stage { dataset: series.name.clone(), stage, source };
    let train = config.train_config();
    let checkpoint;
    let report = if config.model.family.is_graph() {
        let transform = config.transform_spec()?;
        let (model, report) =
            train_graph_on_series(series, &transform, config.gat_config(series.num_classes), &train, &split)
                .map_err(stage("train"))?;
        checkpoint = Checkpoint::graph(&model, transform.name(), train.normalize, split);
        report
    } else {
        let (model, report) =
            train_seq2point_on_series(series, config.seq2point_config(series.num_classes), &train, &split)
                .map_err(stage("train"))?;
        checkpoint = Checkpoint::seq2point(&model, train.normalize, split);
        report
    };
    let (method, transform) = method_names(config);
    let record = EvalRecord {
        dataset: series.name.clone(),
        method,
        transform,
        mask_seed: split.mask_seed,
        model_seed: split.model_seed,
        num_segments: series.change_points.len() + 1,
        metrics: report.test_metrics.clone(),
    };
    Ok(Trained { record, report, checkpoint })
}

fn row(series: &LabeledSeries, t: &Trained, config: &RunConfig, hash: &str) -> ResultRow {
    let m = &t.record.metrics;
    ResultRow {
        dataset: series.name.clone(),
        method: t.record.method.clone(),
        transform: t.record.transform.clone(),
        num_segments: t.record.num_segments,
        num_points: series.len(),
        mask_seed: t.record.mask_seed,
        model_seed: t.record.model_seed,
        train_fraction: config.train.train_fraction,
        epochs: t.report.epochs_run,
        precision: m.weighted.precision,
        recall: m.weighted.recall,
        f1: m.weighted.f1,
        macro_precision: m.macro_avg.precision,
        macro_recall: m.macro_avg.recall,
        macro_f1: m.macro_avg.f1,
        accuracy: m.accuracy,
        test_points: m.total,
        num_parameters: t.report.num_parameters,
        final_train_loss: t.report.final_train_loss,
        config_hash: hash.into(),
        version: crate::VERSION.into(),
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| Error::Config(e.to_string()))
}

/// Every dataset under every seed pair. Jobs run on `config.workers`
/// threads; results come back in (dataset, mask seed, model seed) order.
pub fn run(config: &RunConfig, datasets: &[LabeledSeries]) -> Result<RunOutput> {
    let hash = config.hash();
    let jobs: Vec<(usize, u64, u64)> = (0..datasets.len())
        .flat_map(|d| config.seeds.mask.iter().flat_map(move |&m| config.seeds.model.iter().map(move |&s| (d, m, s))))
        .collect();
    let results: Vec<Result<(ResultRow, EvalRecord)>> = pool(config.workers)?.install(|| {
        jobs.par_iter()
            .map(|&(d, mask, model)| {
                let t0 = Instant::now();
                let series = &datasets[d];
                let t = train_one(series, config, config.split(mask, model))?;
                log::info!(
                    "{} mask={mask} model={model} f1={:.4} ({:.1}s)",
                    series.name,
                    t.record.metrics.weighted.f1,
                    t0.elapsed().as_secs_f64()
                );
                Ok((row(series, &t, config, &hash), t.record))
            })
            .collect()
    });
    let mut out = RunOutput::default();
    for r in results {
        let (row, record) = r?;
        out.rows.push(row);
        out.records.push(record);
    }
    Ok(out)
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_hash: String,
    version: &'a str,
    config: &'a RunConfig,
}

/// `manifest.json` naming the command, config hash, seeds and version.
pub fn write_manifest(dir: &Path, command: &str, config: &RunConfig) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let m = Manifest { command, config_hash: config.hash(), version: crate::VERSION, config };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_vec_pretty(&m)?).map_err(Error::io(path))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().collect::<std::result::Result<Vec<T>, _>>().map_err(Error::from)
}

/// `results.csv`, `records.json` (per-class metrics), `summary.json`
/// (segment-count groups) and `run.log`.
pub fn write_run(dir: &Path, config: &RunConfig, out: &RunOutput) -> Result<()> {
    write_manifest(dir, "evaluate", config)?;
    write_csv(&dir.join("results.csv"), &out.rows)?;
    let records = dir.join("records.json");
    fs::write(&records, serde_json::to_vec_pretty(&out.records)?).map_err(Error::io(records))?;
    let summary = dir.join("summary.json");
    fs::write(&summary, serde_json::to_vec_pretty(&out.groups())?).map_err(Error::io(summary))?;
    let log_path = dir.join("run.log");
    let mut log = fs::File::create(&log_path).map_err(Error::io(&log_path))?;
    for r in &out.rows {
        writeln!(log, "{} {} mask={} model={} f1={}", r.dataset, r.method, r.mask_seed, r.model_seed, r.f1)
            .map_err(Error::io(&log_path))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: String,
    pub transform: String,
    pub ratio: f64,
    pub mean_f1: f64,
    pub std_f1: f64,
    pub repeats: usize,
    pub config_hash: String,
    pub version: String,
}

/// Mean weighted F1 over all datasets per (ratio, repeat). Repeat `r` uses
/// mask and model seed `r`.
pub fn sweep_split(config: &RunConfig, datasets: &[LabeledSeries], ratios: &[f64], repeats: usize) -> Result<Vec<SweepRow>> {
    let pool = pool(config.workers)?;
    let points: Vec<SweepPoint> = split_ratio_sweep(ratios, repeats, |ratio, r| {
        let c = RunConfig { train: crate::config::TrainSection { train_fraction: ratio, ..config.train.clone() }, ..config.clone() };
        let f1: Vec<Result<f64>> = pool.install(|| {
            datasets
                .par_iter()
                .map(|s| Ok(train_one(s, &c, c.split(r as u64, r as u64))?.record.metrics.weighted.f1))
                .collect()
        });
        let f1 = f1.into_iter().collect::<Result<Vec<_>>>().map_err(|e| graphseg_core::Error::Validation(e.to_string()))?;
        log::info!("ratio {ratio} repeat {r}: mean f1 {:.4}", graphseg_core::eval::mean(&f1));
        Ok(graphseg_core::eval::mean(&f1))
    })?;
    let (method, transform) = method_names(config);
    let hash = config.hash();
    Ok(points
        .into_iter()
        .map(|p| SweepRow {
            method: method.clone(),
            transform: transform.clone(),
            ratio: p.ratio,
            mean_f1: p.mean_f1,
            std_f1: p.std_f1,
            repeats,
            config_hash: hash.clone(),
            version: crate::VERSION.into(),
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnsupervisedRow {
    pub dataset: String,
    pub num_segments: usize,
    pub true_change_points: String,
    pub found_change_points: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub seed: u64,
    pub version: String,
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

pub fn unsupervised(datasets: &[LabeledSeries], opts: &UnsupervisedOptions, workers: usize) -> Result<Vec<UnsupervisedRow>> {
    let results: Vec<Result<(usize, UnsupervisedResult)>> = pool(workers)?.install(|| {
        datasets
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                unsupervised_segment(s, opts)
                    .map(|r| (i, r))
                    .map_err(|source| Error::Stage { dataset: s.name.clone(), stage: "unsupervised", source })
            })
            .collect()
    });
    results
        .into_iter()
        .map(|r| {
            let (i, r) = r?;
            let s = &datasets[i];
            Ok(UnsupervisedRow {
                dataset: s.name.clone(),
                num_segments: s.change_points.len() + 1,
                true_change_points: join(&s.change_points),
                found_change_points: join(&r.change_points),
                precision: r.metrics.weighted.precision,
                recall: r.metrics.weighted.recall,
                f1: r.metrics.weighted.f1,
                seed: opts.seed,
                version: crate::VERSION.into(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub layers: usize,
    pub hidden: usize,
    /// 0 marks GCN layers.
    pub heads: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub params: usize,
    pub mean_f1: f64,
}

impl From<&TrialResult> for TrialRow {
    fn from(t: &TrialResult) -> Self {
        TrialRow {
            trial: t.trial,
            layers: t.config.layers,
            hidden: t.config.hidden,
            heads: t.config.heads.unwrap_or(0),
            lr: t.config.lr,
            weight_decay: t.config.weight_decay,
            params: t.params,
            mean_f1: t.mean_f1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalRow {
    pub factor: String,
    pub value: usize,
    pub mean_f1: f64,
    pub trials: usize,
}

pub struct NasOutput {
    pub trials: Vec<TrialResult>,
    pub front: Vec<TrialResult>,
    pub marginals: Vec<MarginalRow>,
}

/// Random search over the architecture space, evaluated on `panel` with the
/// first mask and model seed of `config`.
pub fn nas(config: &RunConfig, panel: &[LabeledSeries], trials: usize, seed: u64, epochs: usize) -> Result<NasOutput> {
    let transform = config.transform_spec()?;
    let spec = config.split(config.seeds.mask[0], config.seeds.model[0]);
    let configs = sample_trials(trials, seed);
    let results: Vec<Result<TrialResult>> = pool(config.workers)?.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let r = evaluate_trial(i, c, panel, &transform, epochs, &spec)
                    .map_err(|source| Error::Stage { dataset: format!("trial {i}"), stage: "nas", source })?;
                log::info!("trial {i}: {} params, mean f1 {:.4}", r.params, r.mean_f1);
                Ok(r)
            })
            .collect()
    });
    let trials = results.into_iter().collect::<Result<Vec<_>>>()?;
    let m = marginal_analysis(&trials);
    let mut marginals = Vec::new();
    for (factor, map) in [("layers", &m.by_depth), ("heads", &m.by_heads), ("hidden", &m.by_width)] {
        for (&value, &(mean_f1, n)) in map {
            marginals.push(MarginalRow { factor: factor.into(), value, mean_f1, trials: n });
        }
    }
    Ok(NasOutput { front: pareto_front(&trials), trials, marginals })
}
