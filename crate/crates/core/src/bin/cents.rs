use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cents_core::cli::{self, ContextSource, DatasetPaths};
use cents_core::config::{load_config, reference_config, ExperimentConfig, RawConfig};
use cents_core::error::Result;
use cents_core::trainer::{ModelKind, Preset, TrainConfig};

/// Context-conditioned generative models for household electricity time
/// series: dataset preparation, training, generation, evaluation, and the
/// ablation/extrapolation experiment protocols.
#[derive(Parser)]
#[command(name = "cents", version, about, after_long_help = CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

const CONFIG_HELP: &str = "\
CONFIG FILE:
  A flat key = value file with [section] headers; unknown keys are rejected.
  Sections and keys (defaults in reference.conf, or `cents config-reference`):
    [data]        profiles, metadata, context_columns
    [faux]        n_households, days_per_household, t, d, location_cardinality,
                  building_cardinality, with_pv, pv_fraction, base_level,
                  base_amplitude, amplitude_effect, phase_effect, trend_effect,
                  pv_dip_depth, noise_level, sparsity_injection_rate, start_date
    [train]       model, preset, lambda_aux, gamma, lambda_gen, epochs,
                  batch_size, gen_lr, disc_lr, diffusion_lr, t_steps,
                  lambda_time, lambda_freq, use_l1, ema_decay, noise_dim,
                  embed_dim, h_dim, encoder_hidden, head_hidden, gen_widths,
                  disc_widths, trunk_hidden, t_emb_dim, poly_degree, top_k,
                  normalizer_steps, normalizer_lr, seed
    [sparsity]    freq_percentile, cluster_fraction, k, seed
    [ablation]    lambdas, seeds
    [extrapolate] target_variable, match_variables, samples_per_state,
                  max_combinations
  Command-line flags override config keys.";

#[derive(Args, Clone)]
struct Common {
    /// Experiment config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed override for the command's randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (or report file for evaluate).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Hyperparameter preset override.
    #[arg(long, global = true, value_parser = ["desk", "paper"])]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a faux dataset with known ground-truth context effects.
    SynthData {
        #[command(flatten)]
        common: Common,
    },
    /// Train the normalizer, context encoder, and generator.
    Train {
        #[command(flatten)]
        common: Common,
        /// Profiles CSV (overrides [data] profiles).
        #[arg(long)]
        profiles: Option<PathBuf>,
        /// Metadata CSV (overrides [data] metadata).
        #[arg(long)]
        metadata: Option<PathBuf>,
        /// Model kind (overrides [train] model).
        #[arg(long, value_parser = ["baseline", "acgan", "diffusion"])]
        model: Option<String>,
        /// Aux reconstruction loss weight (overrides [train] lambda_aux).
        #[arg(long)]
        lambda_aux: Option<f64>,
        /// Epoch count override.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Sample a synthetic dataset from a checkpoint.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Contexts CSV (header = variable names, one context per row).
        #[arg(long, conflicts_with = "all_train_contexts")]
        contexts: Option<PathBuf>,
        /// Use every training profile's context once.
        #[arg(long, requires = "profiles")]
        all_train_contexts: bool,
        /// Profiles CSV for --all-train-contexts.
        #[arg(long)]
        profiles: Option<PathBuf>,
        /// Metadata CSV for --all-train-contexts.
        #[arg(long)]
        metadata: Option<PathBuf>,
        /// Samples per requested context.
        #[arg(short = 'n', long, default_value_t = 1)]
        samples: usize,
    },
    /// Run the metric suite on a (real, synthetic) dataset pair.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        real_profiles: PathBuf,
        #[arg(long)]
        real_metadata: PathBuf,
        #[arg(long)]
        syn_profiles: PathBuf,
        #[arg(long)]
        syn_metadata: PathBuf,
        /// Also compute sparsity proxy labels and the sparse-only block.
        #[arg(long)]
        sparsity: bool,
    },
    /// Train per (lambda, seed) and tabulate overall / sparse-only Context-FID.
    AblateLambda {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long)]
        metadata: Option<PathBuf>,
    },
    /// Generate both states of a binary context variable for combinations
    /// missing one, and compare against real consumption shifts.
    Extrapolate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long)]
        metadata: Option<PathBuf>,
        /// Target context variable (overrides [extrapolate] target_variable).
        #[arg(long)]
        target: Option<String>,
    },
    /// Print a checkpoint summary.
    InspectCheckpoint {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Print the reference config file with every key and default.
    ConfigReference,
}

fn experiment_config(common: &Common) -> Result<ExperimentConfig> {
    let raw = match &common.config {
        Some(path) => load_config(path)?,
        None => RawConfig::default(),
    };
    let mut cfg = ExperimentConfig::from_raw(&raw)?;
    if let Some(preset) = &common.preset {
        let preset = Preset::parse(preset)?;
        let model = cfg.train.model;
        let seed = cfg.train.seed;
        let lambda = cfg.train.lambda_aux;
        cfg.train = match preset {
            Preset::Desk => TrainConfig::desk(model),
            Preset::Paper => TrainConfig::paper(model),
        };
        cfg.train.seed = seed;
        cfg.train.lambda_aux = lambda;
    }
    if let Some(seed) = common.seed {
        cfg.train.seed = seed;
    }
    Ok(cfg)
}

fn seed_of(common: &Common, cfg: &ExperimentConfig) -> u64 {
    common.seed.unwrap_or(cfg.train.seed)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SynthData { common } => {
            let cfg = experiment_config(&common)?;
            cli::cmd_synth_data(&cfg, seed_of(&common, &cfg), &common.out)
        }
        Command::Train {
            common,
            profiles,
            metadata,
            model,
            lambda_aux,
            epochs,
        } => {
            let mut cfg = experiment_config(&common)?;
            if let Some(m) = model {
                cfg.train.model = ModelKind::parse(&m)?;
            }
            if let Some(l) = lambda_aux {
                cfg.train.lambda_aux = l;
            }
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            let paths = DatasetPaths::resolve(profiles, metadata, &cfg)?;
            cli::cmd_train(&cfg, &paths, &common.out).map(|_| ())
        }
        Command::Generate {
            common,
            checkpoint,
            contexts,
            all_train_contexts,
            profiles,
            metadata,
            samples,
        } => {
            let cfg = experiment_config(&common)?;
            let source = if all_train_contexts {
                ContextSource::AllTrainContexts(DatasetPaths::resolve(profiles, metadata, &cfg)?)
            } else {
                let path = contexts.ok_or_else(|| {
                    cents_core::Error::Usage(
                        "generate needs --contexts <file> or --all-train-contexts".into(),
                    )
                })?;
                ContextSource::File(path)
            };
            let seed = seed_of(&common, &cfg);
            cli::cmd_generate(&checkpoint, &source, &cfg, samples, seed, &common.out).map(|_| ())
        }
        Command::Evaluate {
            common,
            real_profiles,
            real_metadata,
            syn_profiles,
            syn_metadata,
            sparsity,
        } => {
            let cfg = experiment_config(&common)?;
            let real = DatasetPaths {
                profiles: real_profiles,
                metadata: real_metadata,
            };
            let syn = DatasetPaths {
                profiles: syn_profiles,
                metadata: syn_metadata,
            };
            let out = if common.out.extension().is_some() {
                common.out.clone()
            } else {
                std::fs::create_dir_all(&common.out)
                    .map_err(|e| cents_core::Error::io(common.out.display().to_string(), e))?;
                common.out.join("report.json")
            };
            let seed = seed_of(&common, &cfg);
            cli::cmd_evaluate(&real, &syn, &cfg, sparsity, seed, &out).map(|_| ())
        }
        Command::AblateLambda {
            common,
            profiles,
            metadata,
        } => {
            let cfg = experiment_config(&common)?;
            let paths = DatasetPaths::resolve(profiles, metadata, &cfg)?;
            cli::cmd_ablate_lambda(&cfg, &paths, &common.out).map(|_| ())
        }
        Command::Extrapolate {
            common,
            checkpoint,
            profiles,
            metadata,
            target,
        } => {
            let mut cfg = experiment_config(&common)?;
            if let Some(t) = target {
                cfg.extrapolate.target_variable = t;
            }
            let paths = DatasetPaths::resolve(profiles, metadata, &cfg)?;
            let seed = seed_of(&common, &cfg);
            cli::cmd_extrapolate(&checkpoint, &paths, &cfg, seed, &common.out).map(|_| ())
        }
        Command::InspectCheckpoint { common: _, checkpoint } => {
            print!("{}", cli::cmd_inspect(&checkpoint)?);
            Ok(())
        }
        Command::ConfigReference => {
            print!("{}", reference_config());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
