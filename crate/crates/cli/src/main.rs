mod ablate;
mod evaluate;
mod gen_toy;
mod manifest;
mod separate;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vocalsep::data::DataError;
use vocalsep::dsp::DspError;
use vocalsep::objective::LossTerm;
use vocalsep::train::{TrainError, TrainingConfig};

/// Semi-supervised singing-voice separation.
#[derive(Parser, Debug)]
#[command(name = "vocalsep", version)]
struct Cli {
    /// Seed for data generation and training (overrides the config's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Training configuration file (key = value pairs; `preset = "toy"` starts from the toy settings).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic toy dataset (mixtures/, instrumentals/, references/).
    GenToy {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 16)]
        mixtures: usize,
        #[arg(long, default_value_t = 16)]
        sources: usize,
        /// Clips per generated recording.
        #[arg(long, default_value_t = 8)]
        clips: usize,
    },
    /// Train on `<data>/mixtures` and `<data>/instrumentals`.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Run directory for checkpoints, loss logs and the manifest.
        #[arg(long)]
        run: PathBuf,
        /// Continue an interrupted run from its latest checkpoint.
        #[arg(long)]
        resume: bool,
        #[command(flatten)]
        opts: TrainOpts,
    },
    /// Split a WAV file into vocal and instrumental estimates.
    Separate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        vocals: PathBuf,
        #[arg(long)]
        instrumental: PathBuf,
    },
    /// Median SDR/SIR of estimates against references with the same file names.
    Evaluate {
        #[arg(long)]
        estimates: PathBuf,
        #[arg(long)]
        references: PathBuf,
        /// Mixtures with the same file names; `mixture − reference` then serves as the interfering source.
        #[arg(long)]
        mixtures: Option<PathBuf>,
        /// Distortion filter length in taps (defaults to the config's).
        #[arg(long)]
        filter_len: Option<usize>,
        /// Also write the table here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train once with all losses and once per ablation, then compare.
    Ablate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Terms to ablate, one run each: r1, r2, r3, r4, gan_c, gan_a or gan_both.
        #[arg(long, value_delimiter = ',')]
        losses: Vec<String>,
        #[command(flatten)]
        opts: TrainOpts,
    },
}

#[derive(Args, Debug, Clone, Default)]
struct TrainOpts {
    /// Starting settings when no config file is given.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Total steps; the learning rate halves at half of them.
    #[arg(long)]
    steps: Option<u64>,
    /// Switch a loss term off (repeatable): r1, r2, r3, r4, gan_c, gan_a.
    #[arg(long = "disable-loss", value_name = "TERM")]
    disable_loss: Vec<String>,
    /// Override a config key, e.g. `--set lr_initial=2e-4` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    precision: Precision,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Preset {
    Toy,
    Full,
}

#[derive(ValueEnum, Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
enum Precision {
    #[default]
    F32,
    F64,
}

/// A mistake in the invocation or its inputs (exit code 1).
#[derive(Debug)]
struct UserError(String);

impl std::fmt::Display for UserError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UserError {}

fn user_error(msg: impl Into<String>) -> anyhow::Error {
    UserError(msg.into()).into()
}

fn is_user_error(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        e.is::<UserError>()
            || e.is::<DataError>()
            || e.is::<DspError>()
            || e.downcast_ref::<TrainError>().is_some_and(|t| !matches!(t, TrainError::NonFinite { .. }))
    })
}

/// Config from `--config` (or the preset), then flag overrides, validated.
fn resolve_config(global: &Cli, opts: &TrainOpts) -> anyhow::Result<TrainingConfig> {
    let mut table = match &global.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| user_error(format!("cannot read config {}: {e}", path.display())))?;
            text.parse::<toml::Table>().map_err(|e| user_error(format!("{}: {e}", path.display())))?
        }
        None => toml::Table::new(),
    };
    if let Some(preset) = opts.preset {
        let name = if preset == Preset::Toy { "toy" } else { "full" };
        table.insert("preset".into(), toml::Value::String(name.into()));
    }
    for kv in &opts.set {
        let (key, value) =
            kv.split_once('=').ok_or_else(|| user_error(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        let value = format!("v = {value}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        table.insert(key.trim().to_string(), value);
    }
    if let Some(steps) = opts.steps {
        table.insert("total_steps".into(), toml::Value::Integer(steps as i64));
        table.insert("lr_halving_step".into(), toml::Value::Integer((steps / 2) as i64));
    }
    if let Some(seed) = global.seed {
        table.insert("seed".into(), toml::Value::Integer(seed as i64));
    }
    let mut cfg = TrainingConfig::from_table(table)?;
    for name in &opts.disable_loss {
        let term: LossTerm = name.parse().map_err(|e: vocalsep::objective::UnknownLossTerm| user_error(e.to_string()))?;
        cfg.disabled_losses.insert(term);
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::GenToy { out, mixtures, sources, clips } => {
            gen_toy::run(cli, out, *mixtures, *sources, *clips)
        }
        Command::Train { data, run, resume, opts } => {
            if *resume {
                train::resume(data, run)?.finalize(None)
            } else {
                let cfg = resolve_config(cli, opts)?;
                train::start(&cfg, opts.precision, data, run, cli.force)?.finalize(None)
            }
        }
        Command::Separate { checkpoint, input, vocals, instrumental } => {
            separate::run(cli, checkpoint, input, vocals, instrumental)
        }
        Command::Evaluate { estimates, references, mixtures, filter_len, out } => {
            let filter_len = match filter_len {
                Some(l) => *l,
                None => resolve_config(cli, &TrainOpts::default())?.eval_filter_len,
            };
            let report = evaluate::run(estimates, references, mixtures.as_deref(), filter_len)?;
            let csv = report.to_csv();
            print!("{csv}");
            if let Some(path) = out {
                std::fs::write(path, csv).map_err(|e| user_error(format!("cannot write {}: {e}", path.display())))?;
            }
            Ok(())
        }
        Command::Ablate { data, out, losses, opts } => {
            let cfg = resolve_config(cli, opts)?;
            ablate::run(cli, &cfg, opts.precision, data, out, losses)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(if is_user_error(&err) { 1 } else { 2 })
        }
    }
}
