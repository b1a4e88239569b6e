//! Command-line front end for the benchmark toolkit.
//!
//! Exit codes: 0 success, 2 config error, 3 training diverged, 4 evaluation
//! or I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use genbench::error::Error;
use genbench::gan;
use genbench::harness::{
    export_report, export_stability_csv, export_trend_csv, load_artifact, run_experiment,
    sweep_datasets, sweep_q, ExperimentConfig, LossHistory, ModelSpec, TrainedModel,
};
use genbench::tasks::{
    build_space, draw_training_set, reweight, save_dataset, synth_universe, EqualWeightRisk,
};
use genbench::tnbm::{init_mps_from_histogram, train_dmrg, MpsModel, TnbmTrainConfig};

#[derive(Parser)]
#[command(name = "genbench", version, about = "Constrained generative-model benchmark toolkit")]
struct Cli {
    /// Experiment config file (JSON); defaults to the desk-scale instance.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the dataset seed.
    #[arg(long, global = true)]
    seed_dataset: Option<u64>,
    /// Override the training seed.
    #[arg(long, global = true)]
    seed_train: Option<u64>,
    /// Override the sampling seed.
    #[arg(long, global = true)]
    seed_sample: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic asset universe (mean returns + covariance CSVs).
    GenUniverse {
        #[arg(long, default_value_t = 12)]
        n_assets: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Draw the training dataset and write it with costs (and weights).
    MakeDataset,
    /// Train the configured model and write a checkpoint plus loss history.
    Train,
    /// Sample queries from a trained checkpoint.
    Sample {
        /// Number of queries; defaults to the config's Q.
        #[arg(long)]
        q: Option<u64>,
    },
    /// Run the full pipeline and export the metrics report.
    Eval,
    /// Metric trends over cumulative query budgets.
    SweepQ {
        /// Comma-separated ascending Q values.
        #[arg(long, value_delimiter = ',', default_values_t = [1_000u64, 10_000, 100_000])]
        q_values: Vec<u64>,
    },
    /// Stability of the metrics across fresh training datasets.
    SweepDatasets {
        #[arg(long, default_value_t = 5)]
        n_datasets: usize,
    },
    /// Re-export report files from a persisted run artifact.
    Report,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_EVAL: u8 = 4;

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse(_) | Error::InvalidParam(_) => EXIT_CONFIG,
        Error::TrainingDiverged(_) => EXIT_DIVERGED,
        _ => EXIT_EVAL,
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::desk_default(),
    };
    if let Some(s) = cli.seed_dataset {
        cfg.seeds.dataset = s;
    }
    if let Some(s) = cli.seed_train {
        cfg.seeds.training = s;
    }
    if let Some(s) = cli.seed_sample {
        cfg.seeds.sampling = s;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn training_set(
    cfg: &ExperimentConfig,
) -> Result<(genbench::tasks::TrainingSet, EqualWeightRisk), Error> {
    let space = build_space(cfg.task.width, cfg.task.space)?;
    let oracle = EqualWeightRisk::new(cfg.universe()?);
    let mut train = draw_training_set(&space, cfg.eps, cfg.seeds.dataset)?;
    if cfg.reweight {
        train = reweight(&train, &oracle)?;
    }
    Ok((train, oracle))
}

fn run_dir(cfg: &ExperimentConfig) -> Result<PathBuf, Error> {
    let dir = cfg.output_dir.join(cfg.run_id());
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn train_to_checkpoint(cfg: &ExperimentConfig) -> Result<(TrainedModel, PathBuf), Error> {
    let (train, _) = training_set(cfg)?;
    let dir = run_dir(cfg)?;
    match &cfg.model {
        ModelSpec::Tnbm {
            max_bond,
            learning_rate,
            svd_cutoff,
        } => {
            let tcfg = TnbmTrainConfig {
                max_bond: *max_bond,
                learning_rate: *learning_rate,
                n_epochs: cfg.n_epochs,
                svd_cutoff: *svd_cutoff,
                seed: cfg.seeds.training,
            };
            let m0 = init_mps_from_histogram(&train, tcfg.max_bond)?;
            let (m, nll) = train_dmrg(m0, &train, &tcfg)?;
            let path = dir.join("mps.json");
            m.save_checkpoint(&path)?;
            write_loss_csv(&dir, &LossHistory::Tnbm { nll })?;
            Ok((TrainedModel::Tnbm(m), path))
        }
        ModelSpec::Gan {
            preset,
            saturating_gen_loss,
        } => {
            let gcfg = gan::GanConfig {
                saturating_gen_loss: *saturating_gen_loss,
                ..gan::GanConfig::preset(*preset, cfg.n_epochs, cfg.seeds.training)
            };
            let (g0, d0) = gan::init_gan(&gcfg, cfg.task.width, cfg.seeds.training)?;
            let (g, d, epochs) = gan::gan_train(g0, d0, &train, &gcfg)?;
            let path = dir.join("gan.json");
            gan::save_gan_checkpoint(&path, &gcfg, &g, &d)?;
            write_loss_csv(&dir, &LossHistory::Gan { epochs })?;
            Ok((TrainedModel::Gan(g), path))
        }
        ModelSpec::Random => Ok((
            TrainedModel::Random {
                width: cfg.task.width,
            },
            dir,
        )),
    }
}

fn write_loss_csv(dir: &PathBuf, history: &LossHistory) -> Result<(), Error> {
    let mut csv = String::new();
    match history {
        LossHistory::Tnbm { nll } => {
            csv.push_str("epoch,nll\n");
            for (i, v) in nll.iter().enumerate() {
                csv.push_str(&format!("{i},{v}\n"));
            }
        }
        LossHistory::Gan { epochs } => {
            csv.push_str("epoch,disc_loss,gen_loss\n");
            for (i, e) in epochs.iter().enumerate() {
                csv.push_str(&format!("{i},{},{}\n", e.disc, e.gen));
            }
        }
        LossHistory::None => csv.push_str("epoch,loss\n"),
    }
    std::fs::write(dir.join("loss_history.csv"), csv)?;
    Ok(())
}

fn load_trained(cfg: &ExperimentConfig) -> Result<TrainedModel, Error> {
    let dir = cfg.output_dir.join(cfg.run_id());
    match &cfg.model {
        ModelSpec::Tnbm { .. } => {
            let path = dir.join("mps.json");
            if path.exists() {
                Ok(TrainedModel::Tnbm(MpsModel::load_checkpoint(&path)?))
            } else {
                Ok(train_to_checkpoint(cfg)?.0)
            }
        }
        ModelSpec::Gan { .. } => {
            let path = dir.join("gan.json");
            if path.exists() {
                let ckpt = gan::load_gan_checkpoint(&path)?;
                Ok(TrainedModel::Gan(ckpt.generator))
            } else {
                Ok(train_to_checkpoint(cfg)?.0)
            }
        }
        ModelSpec::Random => Ok(TrainedModel::Random {
            width: cfg.task.width,
        }),
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.cmd {
        Cmd::GenUniverse { n_assets, seed } => {
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            std::fs::create_dir_all(&out)?;
            let u = synth_universe(*n_assets, *seed)?;
            let mu = out.join("universe.csv");
            let cov = out.join("covariance.csv");
            u.save_csv(&mu, &cov)?;
            println!("wrote {} and {}", mu.display(), cov.display());
        }
        Cmd::MakeDataset => {
            let cfg = load_config(cli)?;
            let (train, oracle) = training_set(&cfg)?;
            let dir = run_dir(&cfg)?;
            let path = dir.join("dataset.csv");
            save_dataset(&path, &train, Some(&oracle))?;
            println!("wrote {} ({} samples)", path.display(), train.len());
        }
        Cmd::Train => {
            let cfg = load_config(cli)?;
            let (_, path) = train_to_checkpoint(&cfg)?;
            println!("wrote {}", path.display());
        }
        Cmd::Sample { q } => {
            let cfg = load_config(cli)?;
            let model = load_trained(&cfg)?;
            let q = q.unwrap_or(cfg.q);
            let samples = model.sample(q, cfg.seeds.sampling)?;
            let dir = run_dir(&cfg)?;
            let path = dir.join("samples.csv");
            let mut out = String::from("bitstring,count\n");
            for (x, n) in samples.iter() {
                out.push_str(&format!("{x},{n}\n"));
            }
            std::fs::write(&path, out)?;
            println!("wrote {} ({} queries, {} unique)", path.display(), q, samples.unique_len());
        }
        Cmd::Eval => {
            let cfg = load_config(cli)?;
            let artifact = run_experiment(&cfg)?;
            let files = export_report(&artifact)?;
            for f in &files {
                println!("wrote {}", f.display());
            }
            if let Some(label) = artifact.behaviour {
                println!("behaviour: {label}");
            }
        }
        Cmd::SweepQ { q_values } => {
            let cfg = load_config(cli)?;
            let rows = sweep_q(&cfg, q_values)?;
            let dir = run_dir(&cfg)?;
            let path = dir.join("trend_q.csv");
            export_trend_csv(&rows, &path)?;
            println!("wrote {}", path.display());
        }
        Cmd::SweepDatasets { n_datasets } => {
            let cfg = load_config(cli)?;
            let table = sweep_datasets(&cfg, *n_datasets)?;
            let dir = run_dir(&cfg)?;
            let path = dir.join("stability.csv");
            export_stability_csv(&table, &path)?;
            println!("wrote {}", path.display());
        }
        Cmd::Report => {
            let cfg = load_config(cli)?;
            let path = cfg.output_dir.join(cfg.run_id()).join("artifact.json");
            let artifact = load_artifact(&path)?;
            let files = export_report(&artifact)?;
            for f in &files {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
