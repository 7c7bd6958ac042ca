//! Whole-recording separation and evaluation against known stems.

use crate::bss::{self, median_report, BssError, MetricReport};
use crate::data::{to_tensor, ToyTrack};
use crate::dsp::{
    analyze, concatenate_track, reconstruct, resample, segment, AudioClip, CompressedMagnitude, DspError, Segment,
    StftEngine,
};
use crate::models::{MaskNetwork, ModelError};
use crate::real::Real;

#[derive(Debug, thiserror::Error)]
pub enum SeparateError {
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Bss(#[from] BssError),
}

/// Vocal estimate `a − g(a)` and instrumental estimate `g(a)` as audio.
#[derive(Clone, Debug, PartialEq)]
pub struct Separation {
    pub vocals: AudioClip,
    pub instrumental: AudioClip,
}

/// Separates a recording clip by clip with the mixture phase; outputs have
/// the input's sample rate and length.
pub fn separate<T: Real>(net: &MaskNetwork<T>, engine: &StftEngine, audio: &AudioClip) -> Result<Separation, SeparateError> {
    let cfg = engine.config();
    let working = resample(audio, cfg.sample_rate);
    let mut vocals = Vec::new();
    let mut instrumental = Vec::new();
    for seg in segment(&working, cfg) {
        let (a, phase) = analyze(engine, &seg.clip.samples)?;
        let mask = net.mask_forward(&to_tensor::<T>(&a))?;
        let mut g = CompressedMagnitude::zeros(a.freq, a.frames);
        let mut b = CompressedMagnitude::zeros(a.freq, a.frames);
        for (i, m) in mask.data().iter().enumerate() {
            let m = m.to_f64().unwrap_or(0.0);
            g.data[i] = a.data[i] * m;
            b.data[i] = a.data[i] - g.data[i];
        }
        let len = seg.clip.len();
        vocals.push(Segment { clip: reconstruct(engine, &b, &phase, len)?, true_len: seg.true_len });
        instrumental.push(Segment { clip: reconstruct(engine, &g, &phase, len)?, true_len: seg.true_len });
    }
    let finish = |segments: &[Segment]| -> Result<AudioClip, DspError> {
        let joined = if segments.is_empty() {
            AudioClip::silence(0, cfg.sample_rate)
        } else {
            concatenate_track(segments)?
        };
        let mut out = resample(&joined, audio.sample_rate);
        out.samples.resize(audio.len(), 0.0);
        Ok(out)
    };
    Ok(Separation { vocals: finish(&vocals)?, instrumental: finish(&instrumental)? })
}

/// Median vocal SDR/SIR of the network's estimates on tracks with known stems.
pub fn evaluate_tracks<T: Real>(
    net: &MaskNetwork<T>,
    engine: &StftEngine,
    tracks: &[ToyTrack],
    filter_len: usize,
) -> Result<MetricReport, SeparateError> {
    let mut items = Vec::with_capacity(tracks.len());
    for t in tracks {
        let sep = separate(net, engine, &t.mixture)?;
        items.push(bss::evaluate_pair(&t.name, &sep.vocals.samples, &t.vocals.samples, &t.instrumental.samples, filter_len)?);
    }
    Ok(median_report(items)?)
}

/// The same metrics for the trivial estimate "vocals = mixture".
pub fn mixture_baseline(tracks: &[ToyTrack], filter_len: usize) -> Result<MetricReport, SeparateError> {
    let items = tracks
        .iter()
        .map(|t| bss::evaluate_pair(&t.name, &t.mixture.samples, &t.vocals.samples, &t.instrumental.samples, filter_len))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(median_report(items)?)
}
