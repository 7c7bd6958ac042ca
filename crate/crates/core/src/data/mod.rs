//! Datasets of compressed spectrogram clips, batch sampling, synthetic crosses
//! and the toy corpus.

mod cross;
mod toy;

pub use cross::{cross_on_tape, estimate_b, estimate_b_with_mask, make_cross, CrossSample, CrossVars, MixingDomain};
pub use toy::{band_energy_split, make_toy_corpus, ToyCorpus, ToyCounts, ToyTrack, VOCAL_BAND_FLOOR};

use std::fmt;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tensor;
use crate::dsp::{analyze, read_wav, resample, segment, AudioClip, CompressedMagnitude, DspError, PhaseGrid, StftEngine};
use crate::real::Real;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("no usable clips found in {}", .0.display())]
    Empty(PathBuf),
    #[error("cannot read directory {}: {source}", path.display())]
    Directory { path: PathBuf, source: std::io::Error },
    #[error("shape mismatch: {0:?} vs {1:?}")]
    Shape((usize, usize), (usize, usize)),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

/// Which domain a dataset holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    /// Mixtures of singing and accompaniment (the set S_A).
    Mixtures,
    /// Instrumental-only recordings (the set S_C).
    Sources,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Mixtures => "mixtures",
            Role::Sources => "instrumentals",
        })
    }
}

/// One analysed clip and where it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub magnitude: CompressedMagnitude,
    pub phase: PhaseGrid,
    pub origin: String,
    pub clip: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub role: Role,
    pub samples: Vec<Sample>,
}

impl Dataset {
    /// Resamples, segments and analyses each named recording in order.
    pub fn from_clips<'a>(
        role: Role,
        engine: &StftEngine,
        clips: impl IntoIterator<Item = (&'a str, &'a AudioClip)>,
    ) -> Result<Self, DspError> {
        let cfg = engine.config();
        let mut samples = Vec::new();
        for (name, audio) in clips {
            let audio = resample(audio, cfg.sample_rate);
            for (i, seg) in segment(&audio, cfg).into_iter().enumerate() {
                let (magnitude, phase) = analyze(engine, &seg.clip.samples)?;
                samples.push(Sample { magnitude, phase, origin: name.to_string(), clip: i });
            }
        }
        Ok(Dataset { role, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `origin#clip` for every sample, in sampling order.
    pub fn index(&self) -> Vec<String> {
        self.samples.iter().map(|s| format!("{}#{}", s.origin, s.clip)).collect()
    }
}

/// WAV files of a directory in file-name order.
pub fn wav_files(dir: &Path) -> Result<Vec<PathBuf>, DataError> {
    let entries = std::fs::read_dir(dir).map_err(|source| DataError::Directory { path: dir.to_path_buf(), source })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    Ok(files)
}

/// Loads every WAV file of `dir`; unreadable files are skipped with a warning.
pub fn load_dataset(dir: &Path, role: Role, engine: &StftEngine) -> Result<Dataset, DataError> {
    let mut clips = Vec::new();
    for path in wav_files(dir)? {
        match read_wav(&path) {
            Ok(clip) => {
                let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                clips.push((name, clip));
            }
            Err(e) => log::warn!("skipping {}: {e}", path.display()),
        }
    }
    let set = Dataset::from_clips(role, engine, clips.iter().map(|(n, c)| (n.as_str(), c)))?;
    if set.is_empty() {
        return Err(DataError::Empty(dir.to_path_buf()));
    }
    Ok(set)
}

/// Indices of one training batch: a mixture, an instrumental, and a second
/// instrumental for the synthetic cross.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchIndices {
    pub a: usize,
    pub c: usize,
    pub c_cross: usize,
}

/// Uniform draws with replacement, a pure function of `(seed, step)`.
pub fn sample_batch(mixtures: usize, sources: usize, seed: u64, step: u64) -> BatchIndices {
    assert!(mixtures > 0 && sources > 0, "sampling from an empty set");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    BatchIndices {
        a: rng.random_range(0..mixtures),
        c: rng.random_range(0..sources),
        c_cross: rng.random_range(0..sources),
    }
}

/// `[1, 1, freq, frames]` tensor of a magnitude grid.
pub fn to_tensor<T: Real>(m: &CompressedMagnitude) -> Tensor<T> {
    Tensor::from_fn(&[1, 1, m.freq, m.frames], |i| T::from_f64_lossy(m.data[i]))
}

/// Inverse of [`to_tensor`] for a single-item batch.
pub fn from_tensor<T: Real>(t: &Tensor<T>) -> Result<CompressedMagnitude, DataError> {
    let shape = t.shape();
    let (f, n) = match shape {
        [1, 1, f, n] => (*f, *n),
        _ => return Err(DataError::Shape((shape.iter().product(), 1), (0, 0))),
    };
    let data = t.data().iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
    Ok(CompressedMagnitude::new(f, n, data)?)
}
