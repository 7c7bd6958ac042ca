use std::path::{Path, PathBuf};

use anyhow::Context;
use vocalsep::data::{load_dataset, Dataset, Role};
use vocalsep::dsp::StftEngine;
use vocalsep::real::Real;
use vocalsep::train::{load_checkpoint, save_checkpoint, DiscriminatorLog, LossLog, TrainState, TrainingConfig};

use crate::manifest::{Manifest, Metrics, Record};
use crate::{user_error, Precision};

pub const LOSS_LOG: &str = "loss.csv";
pub const DISC_LOG: &str = "disc_loss.csv";
pub const CONFIG_SNAPSHOT: &str = "config.toml";

/// A run whose training loop has completed but whose manifest is still open.
pub struct Trained {
    pub manifest: Manifest,
    pub end_step: u64,
    pub final_checkpoint: PathBuf,
}

impl Trained {
    pub fn finalize(mut self, metrics: Option<Metrics>) -> anyhow::Result<()> {
        self.manifest.append(Record::End { end_step: self.end_step, final_checkpoint: self.final_checkpoint, metrics })
    }
}

/// Prepares `dir` for new output: it must be absent or empty unless `force`.
pub fn fresh_dir(dir: &Path, force: bool) -> anyhow::Result<()> {
    let occupied = dir.exists() && std::fs::read_dir(dir).map(|mut d| d.next().is_some()).unwrap_or(true);
    if occupied {
        if !force {
            return Err(user_error(format!(
                "{} already exists and is not empty; pass --force to overwrite or choose a new directory",
                dir.display()
            )));
        }
        if let Some(run) = finished_run_in(dir) {
            return Err(user_error(format!(
                "{} holds the finished run {}; finished runs are kept, choose a new directory",
                dir.display(),
                run.display()
            )));
        }
        std::fs::remove_dir_all(dir).with_context(|| format!("cannot clear {}", dir.display()))?;
    }
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

/// A finalized run at `dir` or directly below it.
fn finished_run_in(dir: &Path) -> Option<PathBuf> {
    let children = std::fs::read_dir(dir).ok()?.filter_map(|e| e.ok()).map(|e| e.path());
    std::iter::once(dir.to_path_buf())
        .chain(children)
        .filter(|d| d.join(crate::manifest::MANIFEST_FILE).is_file())
        .find(|d| Manifest::open(d).is_ok_and(|m| m.is_finalized()))
}

fn load_sets(cfg: &TrainingConfig, data: &Path) -> anyhow::Result<(Dataset, Dataset)> {
    let engine = StftEngine::new(cfg.stft_config())?;
    let mixtures = load_dataset(&data.join("mixtures"), Role::Mixtures, &engine)?;
    let sources = load_dataset(&data.join("instrumentals"), Role::Sources, &engine)?;
    log::info!("{} mixture clips, {} instrumental clips", mixtures.len(), sources.len());
    Ok((mixtures, sources))
}

pub fn start(
    cfg: &TrainingConfig,
    precision: Precision,
    data: &Path,
    run_dir: &Path,
    force: bool,
) -> anyhow::Result<Trained> {
    let sets = load_sets(cfg, data)?;
    fresh_dir(run_dir, force)?;
    std::fs::create_dir_all(run_dir.join("checkpoints"))?;
    std::fs::write(run_dir.join(CONFIG_SNAPSHOT), cfg.to_toml_string())?;
    let mut manifest = Manifest::create(run_dir)?;
    manifest.append(Record::Start {
        config: cfg.clone(),
        seed: cfg.seed,
        start_step: 0,
        precision,
        data: data.to_path_buf(),
        disabled_losses: cfg.disabled_losses.iter().map(|t| t.name().to_string()).collect(),
    })?;
    let (end_step, final_checkpoint) = match precision {
        Precision::F32 => train_loop(TrainState::<f32>::new(cfg.clone())?, &sets, run_dir, &mut manifest, false)?,
        Precision::F64 => train_loop(TrainState::<f64>::new(cfg.clone())?, &sets, run_dir, &mut manifest, false)?,
    };
    Ok(Trained { manifest, end_step, final_checkpoint })
}

/// Continues an unfinished run from the latest checkpoint in its manifest.
pub fn resume(data: &Path, run_dir: &Path) -> anyhow::Result<Trained> {
    let mut manifest = Manifest::open(run_dir)?;
    if manifest.is_finalized() {
        return Err(user_error(format!("{} is a finished run; start a new run directory instead", run_dir.display())));
    }
    let (step, rel) = manifest
        .latest_checkpoint()
        .ok_or_else(|| user_error(format!("{} has no checkpoint to resume from", run_dir.display())))?;
    for log in [LOSS_LOG, DISC_LOG] {
        truncate_log(&run_dir.join(log), step)?;
    }
    manifest.append(Record::Resume { step, checkpoint: rel.clone() })?;
    let path = run_dir.join(&rel);
    let (end_step, final_checkpoint) = match manifest.precision().unwrap_or_default() {
        Precision::F32 => {
            let state = load_checkpoint::<f32>(&path)?;
            let sets = load_sets(&state.config, data)?;
            train_loop(state, &sets, run_dir, &mut manifest, true)?
        }
        Precision::F64 => {
            let state = load_checkpoint::<f64>(&path)?;
            let sets = load_sets(&state.config, data)?;
            train_loop(state, &sets, run_dir, &mut manifest, true)?
        }
    };
    Ok(Trained { manifest, end_step, final_checkpoint })
}

/// Drops log rows for steps at or after `step`.
fn truncate_log(path: &Path, step: u64) -> anyhow::Result<()> {
    let Ok(text) = std::fs::read_to_string(path) else { return Ok(()) };
    let mut kept = String::new();
    for (i, line) in text.lines().enumerate() {
        let row_step = line.split(',').next().and_then(|s| s.parse::<u64>().ok());
        if i == 0 || row_step.is_some_and(|s| s < step) {
            kept.push_str(line);
            kept.push('\n');
        }
    }
    std::fs::write(path, kept).with_context(|| format!("cannot rewrite {}", path.display()))
}

fn checkpoint_name(step: u64) -> PathBuf {
    PathBuf::from("checkpoints").join(format!("step_{step:08}.ckpt"))
}

fn train_loop<T: Real>(
    mut state: TrainState<T>,
    (mixtures, sources): &(Dataset, Dataset),
    run_dir: &Path,
    manifest: &mut Manifest,
    append: bool,
) -> anyhow::Result<(u64, PathBuf)> {
    let cfg = state.config.clone();
    let mut loss_log = LossLog::open(&run_dir.join(LOSS_LOG), append)?;
    let mut disc_log = DiscriminatorLog::open(&run_dir.join(DISC_LOG), append)?;
    let every = (cfg.total_steps / 20).max(1);
    let mut last_saved = None;
    while state.step < cfg.total_steps {
        let batch = state.next_batch(mixtures, sources);
        let report = state.train_step(&batch)?;
        loss_log.record(&report)?;
        disc_log.record(&report)?;
        if state.step % every == 0 {
            let g = &report.generator;
            log::info!(
                "step {}/{}: r1 {:.4} r2 {:.4} r3 {:.4} r4 {:.4} gan_c {:.4} gan_a {:.4} total {:.4}",
                state.step,
                cfg.total_steps,
                g.r1,
                g.r2,
                g.r3,
                g.r4,
                g.gan_c,
                g.gan_a,
                g.total
            );
        }
        if state.step % cfg.checkpoint_interval == 0 || state.step == cfg.total_steps {
            loss_log.flush()?;
            disc_log.flush()?;
            let rel = checkpoint_name(state.step);
            save_checkpoint(&state, &run_dir.join(&rel))?;
            manifest.append(Record::Checkpoint { step: state.step, path: rel.clone() })?;
            last_saved = Some(rel);
        }
    }
    loss_log.flush()?;
    disc_log.flush()?;
    let final_checkpoint = match last_saved {
        Some(p) => p,
        None => {
            let rel = checkpoint_name(state.step);
            save_checkpoint(&state, &run_dir.join(&rel))?;
            manifest.append(Record::Checkpoint { step: state.step, path: rel.clone() })?;
            rel
        }
    };
    Ok((state.step, final_checkpoint))
}
