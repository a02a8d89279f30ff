use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use diva_core::io::config::PipelineConfig;
use diva_core::io::csv::save_csv;
use diva_core::io::pipeline::{self as pl, Prepared};
use diva_core::synth::{self, SynthConfig};
use diva_core::vae::checkpoint;
use diva_core::{DivaError, Result};

/// Derivative Raman spectra analysis with a variational autoencoder.
#[derive(Debug, Parser)]
#[command(name = "diva", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus (corpus.csv and manifest.json).
    Synth(SynthArgs),
    /// Preprocess and differentiate the input spectra.
    Preprocess(Common),
    /// Train the model and write its checkpoint.
    Train(Common),
    /// Embed spectra, decode cluster medians and plot them.
    Analyze(Common),
    /// Detect and rank peaks and write the report.
    Report(Common),
    /// Run every stage.
    Pipeline(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Pipeline configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Raw spectra CSV; overrides the config's input path.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Seed for the split, training and noise-floor simulation.
    #[arg(long)]
    seed: Option<u64>,
    /// Peaks reported per condition.
    #[arg(long = "top-k")]
    top_k: Option<usize>,
    /// Training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    LightStress,
    BaselineOnly,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Synthetic corpus configuration (JSON); overrides --preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "light-stress")]
    preset: Preset,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn pipeline_config(args: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(k) = args.top_k {
        cfg.top_k = k;
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    if let Some(input) = &args.input {
        cfg.paths.input = Some(input.clone());
    }
    if let Some(out) = &args.out {
        cfg.paths.out_dir = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepared(cfg: &PipelineConfig) -> Result<Prepared> {
    let raw = pl::load_input(cfg)?;
    pl::prepare(cfg, &raw)
}

fn load_model(cfg: &PipelineConfig) -> Result<diva_core::vae::VaeModel> {
    checkpoint::load(&cfg.model_path()).map_err(|e| e.in_stage("load_model"))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| DivaError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn synth_cmd(args: &SynthArgs) -> Result<()> {
    let mut cfg: SynthConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| DivaError::Io {
                path: path.clone(),
                source: e,
            })?;
            serde_json::from_str(&text).map_err(|e| DivaError::InvalidConfig(e.to_string()))?
        }
        None => match args.preset {
            Preset::LightStress => synth::light_stress_config(0),
            Preset::BaselineOnly => synth::baseline_only_config(0),
        },
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let (spectra, manifest) = synth::gen_dataset_with_manifest(&cfg)?;
    let dir = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
    pl::ensure_dir(&dir)?;
    save_csv(&dir.join("corpus.csv"), &spectra)?;
    write_json(&dir.join("manifest.json"), &manifest)?;
    eprintln!("wrote {} spectra to {}", spectra.len(), dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let common = match &cli.command {
        Command::Synth(args) => return synth_cmd(args),
        Command::Preprocess(c)
        | Command::Train(c)
        | Command::Analyze(c)
        | Command::Report(c)
        | Command::Pipeline(c) => c,
    };
    let cfg = pipeline_config(common)?;
    let dir = cfg.out_dir().to_path_buf();
    match cli.command {
        Command::Synth(_) => unreachable!(),
        Command::Pipeline(_) => {
            let report = pl::run_pipeline(&cfg)?;
            eprintln!(
                "{} conditions, model {}, report in {}",
                report.conditions.len(),
                &report.model_checksum[..12],
                dir.display()
            );
        }
        Command::Preprocess(_) => {
            let p = prepared(&cfg)?;
            pl::ensure_dir(&dir)?;
            pl::write_preprocessed(&dir, &p)?;
        }
        Command::Train(_) => {
            let p = prepared(&cfg)?;
            let (model, training) = pl::fit(&cfg, &p)?;
            pl::ensure_dir(&dir)?;
            pl::write_model(&dir, &cfg.model_path(), &model, &training)?;
            if let Some(last) = training.epochs.last() {
                eprintln!(
                    "final ELBO {:.6e} (recon {:.6e}, KL {:.6e})",
                    last.elbo, last.recon, last.kl
                );
            }
        }
        Command::Analyze(_) => {
            let p = prepared(&cfg)?;
            let model = load_model(&cfg)?;
            let a = pl::analyze(&cfg, &p, &model)?;
            pl::ensure_dir(&dir)?;
            pl::write_analysis(&dir, &a)?;
        }
        Command::Report(_) => {
            let p = prepared(&cfg)?;
            let model = load_model(&cfg)?;
            let a = pl::analyze(&cfg, &p, &model)?;
            let training = pl::read_training(&dir, &model);
            let report = pl::build_report(&cfg, &p, &model, &a, training.as_ref())?;
            pl::ensure_dir(&dir)?;
            pl::write_analysis(&dir, &a)?;
            pl::write_report(&dir, &report, &p)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
