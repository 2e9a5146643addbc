use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spark_core::augment::{AugMode, CurriculumConfig};
use spark_core::checkpoint::Checkpoint;
use spark_core::config::{config_reference, ExperimentConfig};
use spark_core::datagen::Split;
use spark_core::pipeline::{self, DATASET_FILE, DYNAMICS_FILE, PRETRAIN_FILE, SWEEP_KS};
use spark_core::{Result, SparkError};

#[derive(Parser, Debug)]
#[command(
    name = "spark",
    version,
    about = "Parameter-conditioned VQ pretraining, latent augmentation and graph-ODE forecasting for 2D PDE data",
    after_long_help = long_help()
)]
struct Cli {
    /// TOML experiment configuration (defaults for every missing key).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; overrides `threads`.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate the dataset and write it with a manifest.
    GenData,
    /// Pretrain the encoder, decoder and codebook.
    Pretrain {
        /// Dataset file; defaults to dataset.sparkds in the output directory.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Re-seed unused codes from encoder outputs after each epoch.
        #[arg(long)]
        reseed_dead_codes: bool,
    },
    /// Train the forecaster on top of a frozen pretrained checkpoint.
    Train {
        /// Dataset file; defaults to dataset.sparkds in the output directory.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Pretraining checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Train without latent augmentation.
        #[arg(long)]
        no_augment: bool,
        #[command(flatten)]
        aug: AugFlags,
    },
    /// Evaluate a trained checkpoint on one split.
    Eval {
        /// Dataset file; defaults to dataset.sparkds in the output directory.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Trained dynamics checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SplitArg::Out)]
        split: SplitArg,
        /// Also write every predicted and true value.
        #[arg(long)]
        dump_predictions: bool,
    },
    /// Print codebook size, perplexity and the usage histogram.
    InspectCodebook {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Write per-code usage to this CSV file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Retrain with k = 1, 3, 5, 7, 9, 11 and write a comparison CSV.
    KSweep {
        /// Dataset file; defaults to dataset.sparkds in the output directory.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        aug: AugFlags,
    },
    /// Print the configuration reference.
    Config,
}

#[derive(Args, Debug, Default)]
struct AugFlags {
    /// snap or interpolate.
    #[arg(long)]
    aug_mode: Option<String>,
    /// Number of nearest codes blended per latent.
    #[arg(long)]
    aug_k: Option<usize>,
    /// Softmax temperature; calibrated from the data when unset.
    #[arg(long)]
    aug_tau: Option<f64>,
    /// Curriculum as E0,R,pmax.
    #[arg(long)]
    curriculum: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitArg {
    In,
    Out,
}

fn long_help() -> String {
    format!(
        "Exit codes: 0 success, 2 config error, 3 numeric failure, 4 incompatible artifacts.\n\
         Logging: SPARK_LOG=error|warn|info|debug (default info).\n\n\
         Configuration reference:\n\n{}",
        config_reference()
    )
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    Ok(cfg)
}

fn apply_aug(cfg: &mut ExperimentConfig, flags: &AugFlags) -> Result<()> {
    if let Some(m) = &flags.aug_mode {
        cfg.augment.mode = m.parse::<AugMode>()?;
    }
    if let Some(k) = flags.aug_k {
        cfg.augment.k = k;
    }
    if let Some(t) = flags.aug_tau {
        cfg.augment.tau = Some(t);
    }
    if let Some(c) = &flags.curriculum {
        cfg.augment.curriculum = c.parse::<CurriculumConfig>()?;
    }
    cfg.validate()
}

fn or_default(p: &Option<PathBuf>, dir: &Path, file: &str) -> PathBuf {
    p.clone().unwrap_or_else(|| dir.join(file))
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    if !path.exists() {
        return Err(SparkError::Config(format!(
            "checkpoint {} does not exist",
            path.display()
        )));
    }
    Checkpoint::load(path)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    let out = cfg.output_dir.clone();
    match &cli.command {
        Command::Config => print!("{}", config_reference()),
        Command::GenData => {
            cfg.validate()?;
            let ds = pipeline::gen_data(&cfg, &out)?;
            print!("{}", pipeline::manifest(&ds, &cfg));
        }
        Command::Pretrain {
            dataset,
            reseed_dead_codes,
        } => {
            cfg.pretrain.reseed_dead_codes |= reseed_dead_codes;
            cfg.validate()?;
            let ds = pipeline::open_dataset(&or_default(dataset, &out, DATASET_FILE))?;
            let o = pipeline::pretrain_cmd(&cfg, &ds, &out)?;
            println!(
                "pretraining loss {:.6} -> {:.6}, perplexity {:.3} of {} codes",
                o.initial_loss,
                o.final_loss(),
                o.codebook.perplexity()?,
                o.codebook.size()
            );
        }
        Command::Train {
            dataset,
            checkpoint,
            no_augment,
            aug,
        } => {
            apply_aug(&mut cfg, aug)?;
            let ds = pipeline::open_dataset(&or_default(dataset, &out, DATASET_FILE))?;
            let ck = load_checkpoint(&or_default(checkpoint, &out, PRETRAIN_FILE))?;
            let o = pipeline::train_cmd(&cfg, &ds, &ck, !no_augment, &out)?;
            let last = o.history.last().expect("at least one epoch");
            println!(
                "trained {} epochs: train mse {:.6e}, val mse {:.6e}, augmentation calls {}",
                o.history.len(),
                last.train_mse,
                last.val_mse,
                o.aug_calls
            );
        }
        Command::Eval {
            dataset,
            checkpoint,
            split,
            dump_predictions,
        } => {
            let ds = pipeline::open_dataset(&or_default(dataset, &out, DATASET_FILE))?;
            let ck = load_checkpoint(&or_default(checkpoint, &out, DYNAMICS_FILE))?;
            if cli.config.is_some() {
                pipeline::check_compatible(&ck, &cfg, &ds)?;
            }
            let split = match split {
                SplitArg::In => Split::InDomain,
                SplitArg::Out => Split::OutDomain,
            };
            let r = pipeline::eval_cmd(&ck, &ds, split, cfg.threads, *dump_predictions, &out)?;
            print!("{}", pipeline::report_text(&r, split));
        }
        Command::InspectCodebook { checkpoint, csv } => {
            let path = checkpoint.clone().unwrap_or_else(|| {
                let trained = out.join(DYNAMICS_FILE);
                if trained.exists() {
                    trained
                } else {
                    out.join(PRETRAIN_FILE)
                }
            });
            let s = pipeline::inspect_codebook(&load_checkpoint(&path)?.codebook()?)?;
            print!("{}", pipeline::codebook_text(&s));
            if let Some(p) = csv {
                std::fs::write(p, pipeline::codebook_csv(&s))?;
            }
        }
        Command::KSweep {
            dataset,
            checkpoint,
            aug,
        } => {
            apply_aug(&mut cfg, aug)?;
            let ds = pipeline::open_dataset(&or_default(dataset, &out, DATASET_FILE))?;
            let ck = load_checkpoint(&or_default(checkpoint, &out, PRETRAIN_FILE))?;
            let rows = pipeline::k_sweep(&cfg, &ds, &ck, &SWEEP_KS, &out)?;
            print!("{}", pipeline::sweep_csv(&rows));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPARK_LOG", "info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
