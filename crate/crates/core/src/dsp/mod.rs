//! Audio front end (resampling, segmentation, STFT, compression) and back end
//! (mixture-phase reconstruction, concatenation).

mod audio;
pub mod resample;
mod stft;

pub use audio::{read_wav, write_wav, AudioClip, WavEncoding};
pub use resample::resample;
pub use stft::{
    compress, decompress, reconstruct, ComplexSpectrogram, CompressedMagnitude, PhaseGrid, StftConfig, StftEngine,
    SYNTHESIS_FLOOR,
};

#[derive(Debug, thiserror::Error)]
pub enum DspError {
    #[error("expected {expected} samples, got {got}")]
    Length { expected: usize, got: usize },
    #[error("sample rates differ: {0} Hz vs {1} Hz")]
    RateMismatch(u32, u32),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("audio contains non-finite samples")]
    NonFinite,
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
}

impl PartialEq for DspError {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}

/// Fixed-length piece of a longer recording; `true_len` counts the samples
/// that precede zero padding.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub clip: AudioClip,
    pub true_len: usize,
}

/// Splits audio into non-overlapping clips of `cfg.clip_len()` samples,
/// zero-padding the remainder into a final clip.
pub fn segment(audio: &AudioClip, cfg: &StftConfig) -> Vec<Segment> {
    let len = cfg.clip_len();
    audio
        .samples
        .chunks(len)
        .map(|chunk| {
            let mut samples = chunk.to_vec();
            samples.resize(len, 0.0);
            Segment { clip: AudioClip { samples, sample_rate: audio.sample_rate }, true_len: chunk.len() }
        })
        .collect()
}

/// Joins segments in order, each truncated to its true length.
pub fn concatenate_track(segments: &[Segment]) -> Result<AudioClip, DspError> {
    let Some(first) = segments.first() else {
        return Err(DspError::InvalidConfig("no segments to concatenate".into()));
    };
    let rate = first.clip.sample_rate;
    let mut samples = Vec::with_capacity(segments.iter().map(|s| s.true_len).sum());
    for s in segments {
        if s.clip.sample_rate != rate {
            return Err(DspError::RateMismatch(rate, s.clip.sample_rate));
        }
        samples.extend_from_slice(&s.clip.samples[..s.true_len.min(s.clip.len())]);
    }
    Ok(AudioClip { samples, sample_rate: rate })
}

/// STFT and compression of one clip, ready for the network.
pub fn analyze(engine: &StftEngine, clip: &[f64]) -> Result<(CompressedMagnitude, PhaseGrid), DspError> {
    let spec = engine.stft(clip)?;
    Ok(compress(&spec, engine.config().exponent))
}
