use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use graphseg::checkpoint::Checkpoint;
use graphseg::config::{ModelFamily, Overrides, RunConfig};
use graphseg::{io, report, runner};
use graphseg_core::eval::default_ratios;
use graphseg_core::graph::degree_stats;
use graphseg_core::transforms::Transform;
use graphseg_core::unsupervised::UnsupervisedOptions;

/// Time-series segmentation by graph transformation and node classification.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Turn one series into a graph and write its edge list.
    Transform {
        /// Series record file.
        #[arg(long)]
        input: PathBuf,
        /// Transform name, e.g. `wdpvg`, `nvg:weighting=abs_v`, `mtf:q=10`.
        #[arg(long, default_value = "wdpvg")]
        method: String,
        /// Edge-list output; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train one model on one series and save a checkpoint.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Checkpoint path.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset to train on when the input holds several (default: the first).
        #[arg(long)]
        dataset: Option<String>,
    },
    /// Train and score every dataset under every seed pair.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// Score a saved checkpoint on the input instead of training.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Mean F1 over the datasets for train fractions 0.1 to 0.9.
    SweepSplit {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
    /// Change-point detection plus K-Means clustering, no labels used.
    Unsupervised {
        #[command(flatten)]
        run: RunArgs,
        /// Subsequence width (default: derived from the series length).
        #[arg(long)]
        width: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Random architecture search with Pareto-front extraction.
    Nas {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = graphseg_core::nas::DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Evaluation panel (record file or directory); the synthetic suite when absent.
        #[arg(long)]
        panel: Option<PathBuf>,
        /// Epochs per trial.
        #[arg(long, default_value_t = graphseg_core::nas::DEFAULT_TRIAL_EPOCHS)]
        trial_epochs: usize,
    },
    /// Summarize a results directory written by `evaluate`.
    Report {
        #[arg(long)]
        results: PathBuf,
    },
}

/// Settings shared by the experiment commands. Flags override the config
/// file, which overrides the built-in defaults.
#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Record file or directory (default: the synthetic suite).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    transform: Option<String>,
    /// gat, gcn or seq2point.
    #[arg(long)]
    model: Option<ModelFamily>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    mask_seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    model_seeds: Option<Vec<u64>>,
}

impl RunArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let o = Overrides {
            input: self.input.clone(),
            output: self.output.clone(),
            workers: self.workers,
            transform: self.transform.clone(),
            family: self.model,
            layers: self.layers,
            hidden: self.hidden,
            heads: self.heads,
            epochs: self.epochs,
            lr: self.lr,
            weight_decay: self.weight_decay,
            train_fraction: self.train_fraction,
            mask_seeds: self.mask_seeds.clone(),
            model_seeds: self.model_seeds.clone(),
        };
        Ok(RunConfig::resolve(self.config.as_deref(), &o)?)
    }
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Transform { input, method, output } => {
            let series = io::load_tssb(&input)?;
            let g = Transform::parse(&method)?.apply(&series.values)?;
            let d = degree_stats(&g);
            log::info!("{}: {} nodes, {} edges, mean degree {:.2}", series.name, g.num_nodes, g.num_edges(), d.mean);
            match output {
                Some(path) => io::save_edgelist(&path, &g)?,
                None => io::write_edgelist(std::io::stdout().lock(), &g)?,
            }
        }
        Command::Train { run, checkpoint, dataset } => {
            let config = run.resolve()?;
            let datasets = runner::load_datasets(&config)?;
            let series = match &dataset {
                Some(name) => datasets.iter().find(|s| &s.name == name).with_context(|| format!("no dataset {name:?}"))?,
                None => &datasets[0],
            };
            let split = config.split(config.seeds.mask[0], config.seeds.model[0]);
            let t = runner::train_one(series, &config, split)?;
            t.checkpoint.save(&checkpoint, &series.name)?;
            let m = &t.report.test_metrics;
            println!(
                "{}: {} parameters, {} epochs, train loss {:.4}, test F1 {:.4} (precision {:.4}, recall {:.4})",
                series.name, t.report.num_parameters, t.report.epochs_run, t.report.final_train_loss, m.weighted.f1,
                m.weighted.precision, m.weighted.recall
            );
        }
        Command::Evaluate { run, checkpoint: Some(path) } => {
            let config = run.resolve()?;
            let (ck, trained_on) = Checkpoint::load(&path)?;
            for series in runner::load_datasets(&config)? {
                let e = ck.evaluate(&series).with_context(|| format!("evaluating {}", series.name))?;
                let test = match (&e.test, series.name == trained_on) {
                    (Some(t), true) => format!(", held-out F1 {:.4}", t.weighted.f1),
                    _ => String::new(),
                };
                println!("{}: F1 {:.4} over {} points{test}", series.name, e.all.weighted.f1, e.all.total);
            }
        }
        Command::Evaluate { run, checkpoint: None } => {
            let config = run.resolve()?;
            let datasets = runner::load_datasets(&config)?;
            let out = runner::run(&config, &datasets)?;
            runner::write_run(&config.output, &config, &out)?;
            for g in out.groups() {
                println!("{} segments: {} runs, mean F1 {:.4} +- {:.4}", g.num_segments, g.count, g.mean_f1, g.std_f1);
            }
            println!("mean F1 {:.4}; results in {}", out.mean_f1(), config.output.display());
        }
        Command::SweepSplit { run, ratios, repeats } => {
            let config = run.resolve()?;
            let datasets = runner::load_datasets(&config)?;
            let rows = runner::sweep_split(&config, &datasets, &ratios.unwrap_or_else(default_ratios), repeats)?;
            runner::write_manifest(&config.output, "sweep-split", &config)?;
            runner::write_csv(&config.output.join("sweep.csv"), &rows)?;
            for r in &rows {
                println!("{:.1}: {:.4} +- {:.4}", r.ratio, r.mean_f1, r.std_f1);
            }
        }
        Command::Unsupervised { run, width, seed } => {
            let config = run.resolve()?;
            let datasets = runner::load_datasets(&config)?;
            let opts = UnsupervisedOptions { width, seed, ..Default::default() };
            let rows = runner::unsupervised(&datasets, &opts, config.workers)?;
            runner::write_manifest(&config.output, "unsupervised", &config)?;
            runner::write_csv(&config.output.join("unsupervised.csv"), &rows)?;
            for r in &rows {
                println!("{}: change points [{}] (true [{}]), F1 {:.4}", r.dataset, r.found_change_points, r.true_change_points, r.f1);
            }
        }
        Command::Nas { run, trials, seed, panel, trial_epochs } => {
            let mut config = run.resolve()?;
            if panel.is_some() {
                config.input = panel;
            }
            let datasets = runner::load_datasets(&config)?;
            let out = runner::nas(&config, &datasets, trials, seed, trial_epochs)?;
            create_dir(&config.output)?;
            runner::write_manifest(&config.output, "nas", &config)?;
            let rows = |v: &[graphseg_core::nas::TrialResult]| v.iter().map(runner::TrialRow::from).collect::<Vec<_>>();
            runner::write_csv(&config.output.join("trials.csv"), &rows(&out.trials))?;
            runner::write_csv(&config.output.join("front.csv"), &rows(&out.front))?;
            runner::write_csv(&config.output.join("marginals.csv"), &out.marginals)?;
            println!("{trials} trials ({trial_epochs} epochs each, seed {seed}); Pareto front:");
            for t in &out.front {
                println!("  trial {}: {} params, mean F1 {:.4}", t.trial, t.params, t.mean_f1);
            }
        }
        Command::Report { results } => {
            if !results.is_dir() {
                bail!("{} is not a directory", results.display());
            }
            let r = report::report_dir(&results)?;
            for g in &r.groups {
                println!(
                    "{} / {} segments: {} runs, mean F1 {:.4} +- {:.4}, median {:.4}",
                    g.method, g.num_segments, g.runs, g.mean_f1, g.std_f1, g.median
                );
            }
            print!("{}", r.render());
        }
    }
    Ok(())
}
