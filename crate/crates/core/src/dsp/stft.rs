//! Fixed-length STFT front end and mixture-phase ISTFT back end.

use std::f64::consts::PI;
use std::sync::Arc;

use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use serde::{Deserialize, Serialize};

use super::{AudioClip, DspError};

/// Analysis parameters shared by the whole pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StftConfig {
    pub fft_size: usize,
    pub hop: usize,
    /// Frames per clip.
    pub frames: usize,
    /// Power-law compression exponent applied to magnitudes.
    pub exponent: f64,
    pub sample_rate: u32,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig { fft_size: 512, hop: 64, frames: 256, exponent: 0.3, sample_rate: 20480 }
    }
}

impl StftConfig {
    /// 32×32 grids for desk-scale experiments.
    pub fn toy() -> Self {
        StftConfig { fft_size: 64, hop: 8, frames: 32, exponent: 0.3, sample_rate: 2560 }
    }

    pub fn validate(&self) -> Result<(), DspError> {
        let bad = |m: &str| Err(DspError::InvalidConfig(m.to_string()));
        if self.fft_size < 4 || self.fft_size % 2 != 0 {
            return bad("fft_size must be an even number ≥ 4");
        }
        if self.hop == 0 || self.hop > self.fft_size {
            return bad("hop must satisfy 0 < hop ≤ fft_size");
        }
        if self.frames < 2 {
            return bad("frames must be at least 2");
        }
        if !(self.exponent > 0.0 && self.exponent <= 1.0) {
            return bad("compression exponent must lie in (0, 1]");
        }
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive");
        }
        Ok(())
    }

    /// Samples per clip. Frames are centred on multiples of `hop` with zero
    /// padding of `fft_size / 2` on both sides, so a clip of
    /// `(frames − 1)·hop` samples yields exactly `frames` frames.
    pub fn clip_len(&self) -> usize {
        (self.frames - 1) * self.hop
    }

    /// Bins kept by the real FFT.
    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Rows of the compressed grid (top bin trimmed).
    pub fn freq_rows(&self) -> usize {
        self.fft_size / 2
    }

    /// Periodic Hann analysis (and synthesis) window.
    pub fn window(&self) -> Vec<f64> {
        let n = self.fft_size as f64;
        (0..self.fft_size).map(|i| (PI * i as f64 / n).sin().powi(2)).collect()
    }
}

/// `bins × frames` complex STFT, bin-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSpectrogram {
    pub bins: usize,
    pub frames: usize,
    pub data: Vec<Complex<f64>>,
}

impl ComplexSpectrogram {
    pub fn at(&self, bin: usize, frame: usize) -> Complex<f64> {
        self.data[bin * self.frames + frame]
    }
}

/// Power-compressed magnitudes, `freq × frames`, row-major, all entries ≥ 0.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressedMagnitude {
    pub freq: usize,
    pub frames: usize,
    pub data: Vec<f64>,
}

impl CompressedMagnitude {
    pub fn new(freq: usize, frames: usize, data: Vec<f64>) -> Result<Self, DspError> {
        if data.len() != freq * frames {
            return Err(DspError::Length { expected: freq * frames, got: data.len() });
        }
        Ok(CompressedMagnitude { freq, frames, data })
    }

    pub fn zeros(freq: usize, frames: usize) -> Self {
        CompressedMagnitude { freq, frames, data: vec![0.0; freq * frames] }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.freq, self.frames)
    }
}

/// Unit phasors of a spectrogram at full bin resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGrid {
    pub bins: usize,
    pub frames: usize,
    pub data: Vec<Complex<f64>>,
}

/// Reusable FFT plans for one configuration.
pub struct StftEngine {
    cfg: StftConfig,
    window: Vec<f64>,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl StftEngine {
    pub fn new(cfg: StftConfig) -> Result<Self, DspError> {
        cfg.validate()?;
        let mut planner = RealFftPlanner::<f64>::new();
        Ok(StftEngine {
            window: cfg.window(),
            forward: planner.plan_fft_forward(cfg.fft_size),
            inverse: planner.plan_fft_inverse(cfg.fft_size),
            cfg,
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    /// Windowed real FFT of each frame `[t·hop − N/2, t·hop + N/2)`, with
    /// samples outside the clip taken as zero.
    pub fn stft(&self, clip: &[f64]) -> Result<ComplexSpectrogram, DspError> {
        let cfg = &self.cfg;
        if clip.len() != cfg.clip_len() {
            return Err(DspError::Length { expected: cfg.clip_len(), got: clip.len() });
        }
        let half = cfg.fft_size / 2;
        let mut padded = vec![0.0; clip.len() + cfg.fft_size];
        padded[half..half + clip.len()].copy_from_slice(clip);
        let clip = &padded;
        let bins = cfg.bins();
        let mut data = vec![Complex::new(0.0, 0.0); bins * cfg.frames];
        let mut frame = self.forward.make_input_vec();
        let mut spectrum = self.forward.make_output_vec();
        for t in 0..cfg.frames {
            let start = t * cfg.hop;
            for ((f, &x), &w) in frame.iter_mut().zip(&clip[start..start + cfg.fft_size]).zip(&self.window) {
                *f = x * w;
            }
            self.forward.process(&mut frame, &mut spectrum).expect("buffer sizes come from the plan");
            for (k, &c) in spectrum.iter().enumerate() {
                data[k * cfg.frames + t] = c;
            }
        }
        Ok(ComplexSpectrogram { bins, frames: cfg.frames, data })
    }

    /// Weighted overlap-add inverse of a full-resolution spectrogram.
    pub fn istft(&self, spec: &ComplexSpectrogram) -> Vec<f64> {
        let cfg = &self.cfg;
        let len = cfg.clip_len() + cfg.fft_size;
        let mut out = vec![0.0; len];
        let mut norm = vec![0.0; len];
        let mut spectrum = self.inverse.make_input_vec();
        let mut frame = self.inverse.make_output_vec();
        let scale = 1.0 / cfg.fft_size as f64;
        for t in 0..spec.frames {
            for (k, c) in spectrum.iter_mut().enumerate() {
                *c = spec.at(k, t);
            }
            // A real signal's DC and Nyquist bins are real.
            spectrum[0].im = 0.0;
            let last = spectrum.len() - 1;
            spectrum[last].im = 0.0;
            self.inverse.process(&mut spectrum, &mut frame).expect("buffer sizes come from the plan");
            let start = t * cfg.hop;
            for (i, (&y, &w)) in frame.iter().zip(&self.window).enumerate() {
                out[start + i] += y * scale * w;
                norm[start + i] += w * w;
            }
        }
        let half = cfg.fft_size / 2;
        out.drain(..half);
        out.truncate(cfg.clip_len());
        for (o, &d) in out.iter_mut().zip(&norm[half..]) {
            *o /= d.max(SYNTHESIS_FLOOR);
        }
        out
    }
}

/// Lower bound of the squared-window overlap-add denominator.
pub const SYNTHESIS_FLOOR: f64 = 1e-8;

/// `|X|^p` with the top bin dropped, plus the full-resolution phase.
pub fn compress(spec: &ComplexSpectrogram, exponent: f64) -> (CompressedMagnitude, PhaseGrid) {
    let freq = spec.bins - 1;
    let mags = spec.data[..freq * spec.frames].iter().map(|c| c.norm().powf(exponent)).collect();
    let phase = spec
        .data
        .iter()
        .map(|c| {
            let n = c.norm();
            if n > 0.0 { c / n } else { Complex::new(1.0, 0.0) }
        })
        .collect();
    (
        CompressedMagnitude { freq, frames: spec.frames, data: mags },
        PhaseGrid { bins: spec.bins, frames: spec.frames, data: phase },
    )
}

/// Inverse of the power-law compression.
pub fn decompress(value: f64, exponent: f64) -> f64 {
    value.max(0.0).powf(1.0 / exponent)
}

/// Turns compressed magnitudes back into audio using a mixture's phase.
///
/// Magnitudes are decompressed, a zero top bin is appended, the phase is
/// applied and the overlap-added waveform is truncated to `true_len`.
pub fn reconstruct(
    engine: &StftEngine,
    est: &CompressedMagnitude,
    phase: &PhaseGrid,
    true_len: usize,
) -> Result<AudioClip, DspError> {
    let cfg = engine.config();
    if est.shape() != (cfg.freq_rows(), cfg.frames) {
        return Err(DspError::Length { expected: cfg.freq_rows() * cfg.frames, got: est.data.len() });
    }
    if (phase.bins, phase.frames) != (cfg.bins(), cfg.frames) {
        return Err(DspError::Length { expected: cfg.bins() * cfg.frames, got: phase.data.len() });
    }
    let mut data = vec![Complex::new(0.0, 0.0); cfg.bins() * cfg.frames];
    for (i, (d, &p)) in data.iter_mut().zip(&phase.data).enumerate().take(est.data.len()) {
        *d = p * decompress(est.data[i], cfg.exponent);
    }
    let spec = ComplexSpectrogram { bins: cfg.bins(), frames: cfg.frames, data };
    let mut samples = engine.istft(&spec);
    samples.truncate(true_len.min(samples.len()));
    Ok(AudioClip { samples, sample_rate: cfg.sample_rate })
}
