use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use realfft::RealFftPlanner;

use crate::dsp::{AudioClip, StftConfig};

/// Boundary between the accompaniment band and the vocal band, as a fraction
/// of the Nyquist frequency.
pub const VOCAL_BAND_FLOOR: f64 = 0.47;

const VOCAL_BAND: (f64, f64) = (0.53, 0.88);
const ACCOMPANIMENT_BAND: (f64, f64) = (0.03, 0.41);
const FADE_SECS: f64 = 0.012;

/// How much toy material to synthesize.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ToyCounts {
    pub mixtures: usize,
    pub sources: usize,
    /// Track length in clips.
    pub clips_per_track: usize,
}

/// A mixture with its hidden components.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyTrack {
    pub name: String,
    pub mixture: AudioClip,
    pub vocals: AudioClip,
    pub instrumental: AudioClip,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyCorpus {
    pub tracks: Vec<ToyTrack>,
    /// Unrelated instrumental-only recordings.
    pub sources: Vec<(String, AudioClip)>,
}

/// Synthesizes "vocals" (vibrato sine melodies in the upper band) and
/// "instrumentals" (band-limited noise plus chord tones in the lower band).
pub fn make_toy_corpus(seed: u64, counts: ToyCounts, cfg: &StftConfig) -> ToyCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rate = cfg.sample_rate as f64;
    let len = counts.clips_per_track * cfg.clip_len();
    let clip = |samples| AudioClip { samples, sample_rate: cfg.sample_rate };
    let mut tracks = Vec::with_capacity(counts.mixtures);
    for i in 0..counts.mixtures {
        let instrumental = accompaniment(&mut rng, len, rate);
        let mut vocals = melody(&mut rng, len, rate);
        let ratio_db: f64 = rng.random_range(-3.0..3.0);
        let gain = rms(&instrumental) / rms(&vocals).max(1e-12) * 10f64.powf(ratio_db / 20.0);
        vocals.iter_mut().for_each(|v| *v *= gain);
        let mixture = vocals.iter().zip(&instrumental).map(|(v, a)| v + a).collect();
        tracks.push(ToyTrack {
            name: format!("track{i:03}.wav"),
            mixture: clip(mixture),
            vocals: clip(vocals),
            instrumental: clip(instrumental),
        });
    }
    let sources = (0..counts.sources)
        .map(|i| (format!("instrumental{i:03}.wav"), clip(accompaniment(&mut rng, len, rate))))
        .collect();
    ToyCorpus { tracks, sources }
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt()
}

/// Raised-cosine fade in and out over `fade` samples.
fn envelope(i: usize, len: usize, fade: usize) -> f64 {
    let edge = i.min(len - 1 - i);
    if edge >= fade {
        1.0
    } else {
        0.5 - 0.5 * (PI * edge as f64 / fade as f64).cos()
    }
}

fn melody(rng: &mut ChaCha8Rng, len: usize, rate: f64) -> Vec<f64> {
    let nyquist = rate / 2.0;
    let fade = (FADE_SECS * rate) as usize;
    let mut out = vec![0.0; len];
    let mut start = 0;
    while start < len {
        let dur = ((rng.random_range(0.08..0.25) * rate) as usize).max(2 * fade + 1);
        let end = (start + dur).min(len);
        if rng.random_bool(0.8) && end - start > 2 * fade {
            let f0 = rng.random_range(VOCAL_BAND.0 * 1.02..VOCAL_BAND.1 / 1.02) * nyquist;
            let vib_rate = rng.random_range(4.0..6.0);
            let vib_depth = 0.01 * f0;
            let amp = rng.random_range(0.5..1.0);
            let mut phase = rng.random_range(0.0..2.0 * PI);
            for (k, o) in out[start..end].iter_mut().enumerate() {
                let t = k as f64 / rate;
                let f = f0 + vib_depth * (2.0 * PI * vib_rate * t).sin();
                phase += 2.0 * PI * f / rate;
                *o = amp * envelope(k, end - start, fade) * phase.sin();
            }
        }
        start = end;
    }
    out
}

fn accompaniment(rng: &mut ChaCha8Rng, len: usize, rate: f64) -> Vec<f64> {
    let nyquist = rate / 2.0;
    let fade = (FADE_SECS * rate) as usize;
    let noise: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
    let mut out = band_limit(&noise, ACCOMPANIMENT_BAND.0 * nyquist, ACCOMPANIMENT_BAND.1 * nyquist, rate);
    let noise_gain = rng.random_range(0.05..0.15) / rms(&out).max(1e-12);
    out.iter_mut().for_each(|v| *v *= noise_gain);
    let mut start = 0;
    while start < len {
        let end = (start + ((rng.random_range(0.2..0.5) * rate) as usize).max(2 * fade + 1)).min(len);
        if end - start > 2 * fade {
            for _ in 0..3 {
                let f = rng.random_range(ACCOMPANIMENT_BAND.0 * 1.5..ACCOMPANIMENT_BAND.1 / 1.02) * nyquist;
                let amp = rng.random_range(0.1..0.3);
                let phase = rng.random_range(0.0..2.0 * PI);
                for (k, o) in out[start..end].iter_mut().enumerate() {
                    let t = k as f64 / rate;
                    *o += amp * envelope(k, end - start, fade) * (2.0 * PI * f * t + phase).sin();
                }
            }
        }
        start = end;
    }
    out
}

/// Zeroes every DFT bin of `x` outside `[lo, hi]` Hz.
fn band_limit(x: &[f64], lo: f64, hi: f64, rate: f64) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = RealFftPlanner::<f64>::new();
    let (fwd, inv) = (planner.plan_fft_forward(n), planner.plan_fft_inverse(n));
    let mut input = x.to_vec();
    let mut spec = fwd.make_output_vec();
    fwd.process(&mut input, &mut spec).expect("fft buffer sizes");
    for (k, c) in spec.iter_mut().enumerate() {
        let f = k as f64 * rate / n as f64;
        if f < lo || f > hi {
            *c = Default::default();
        }
    }
    // The inverse requires real first and last bins.
    spec[0].im = 0.0;
    if n % 2 == 0 {
        spec[n / 2].im = 0.0;
    }
    let mut out = inv.make_output_vec();
    inv.process(&mut spec, &mut out).expect("fft buffer sizes");
    out.iter_mut().for_each(|v| *v /= n as f64);
    out
}

/// Energy of `clip` below and above the vocal-band floor, from one DFT of the
/// whole clip.
pub fn band_energy_split(clip: &AudioClip) -> (f64, f64) {
    let n = clip.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mut planner = RealFftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let mut input = clip.samples.clone();
    let mut spec = fwd.make_output_vec();
    fwd.process(&mut input, &mut spec).expect("fft buffer sizes");
    let boundary = VOCAL_BAND_FLOOR * clip.sample_rate as f64 / 2.0;
    let (mut low, mut high) = (0.0, 0.0);
    for (k, c) in spec.iter().enumerate() {
        let weight = if k == 0 || (n % 2 == 0 && k == n / 2) { 1.0 } else { 2.0 };
        let e = weight * c.norm_sqr();
        if (k as f64 * clip.sample_rate as f64 / n as f64) < boundary {
            low += e;
        } else {
            high += e;
        }
    }
    (low, high)
}
