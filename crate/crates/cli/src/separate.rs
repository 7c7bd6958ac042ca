use std::path::Path;

use anyhow::Context;
use vocalsep::dsp::{read_wav, write_wav, AudioClip, StftEngine, WavEncoding};
use vocalsep::real::Real;
use vocalsep::separate::{separate, Separation};
use vocalsep::train::{load_checkpoint, load_checkpoint_matching, TrainError, TrainState, TrainingConfig};

use crate::{user_error, Cli, TrainOpts};

/// A trained generator in whichever precision its checkpoint was written.
pub enum Model {
    F32(TrainState<f32>),
    F64(TrainState<f64>),
}

impl Model {
    pub fn load(path: &Path, expected: Option<&TrainingConfig>) -> anyhow::Result<Self> {
        fn load<T: Real>(path: &Path, expected: Option<&TrainingConfig>) -> Result<TrainState<T>, TrainError> {
            match expected {
                Some(cfg) => load_checkpoint_matching(path, cfg),
                None => load_checkpoint(path),
            }
        }
        match load::<f32>(path, expected) {
            Ok(s) => Ok(Model::F32(s)),
            Err(TrainError::Precision { found: 8, .. }) => Ok(Model::F64(load::<f64>(path, expected)?)),
            Err(e) => Err(e.into()),
        }
    }

    pub fn config(&self) -> &TrainingConfig {
        match self {
            Model::F32(s) => &s.config,
            Model::F64(s) => &s.config,
        }
    }

    pub fn separate(&self, engine: &StftEngine, audio: &AudioClip) -> anyhow::Result<Separation> {
        Ok(match self {
            Model::F32(s) => separate(&s.generator, engine, audio)?,
            Model::F64(s) => separate(&s.generator, engine, audio)?,
        })
    }
}

pub fn write_outputs(sep: &Separation, vocals: &Path, instrumental: &Path) -> anyhow::Result<()> {
    for (path, clip) in [(vocals, &sep.vocals), (instrumental, &sep.instrumental)] {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
        }
        write_wav(path, clip, WavEncoding::Float32).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

pub fn run(cli: &Cli, checkpoint: &Path, input: &Path, vocals: &Path, instrumental: &Path) -> anyhow::Result<()> {
    for out in [vocals, instrumental] {
        if out.exists() && !cli.force {
            return Err(user_error(format!("{} exists; pass --force to overwrite", out.display())));
        }
    }
    let expected = match &cli.config {
        Some(_) => Some(crate::resolve_config(cli, &TrainOpts::default())?),
        None => None,
    };
    let model = Model::load(checkpoint, expected.as_ref())?;
    let engine = StftEngine::new(model.config().stft_config())?;
    let audio = read_wav(input).with_context(|| format!("cannot read {}", input.display()))?;
    let sep = model.separate(&engine, &audio)?;
    write_outputs(&sep, vocals, instrumental)?;
    log::info!(
        "wrote {} and {} ({} samples at {} Hz)",
        vocals.display(),
        instrumental.display(),
        sep.vocals.len(),
        sep.vocals.sample_rate
    );
    Ok(())
}
