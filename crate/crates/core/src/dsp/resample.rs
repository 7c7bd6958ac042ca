//! Band-limited sample-rate conversion with a Kaiser-windowed sinc kernel.
//!
//! The conversion ratio is reduced to `up / down`; output sample `n` sits at
//! input position `n·down/up`, so only `up` distinct fractional offsets
//! (phases) occur. Each phase uses 64 taps.

use std::f64::consts::PI;

use super::AudioClip;

pub const TAPS: usize = 64;
pub const KAISER_BETA: f64 = 8.6;
/// Passband edge as a fraction of the lower of the two Nyquist frequencies.
const ROLLOFF: f64 = 0.95;
/// Largest phase table that is precomputed; above this taps are built per sample.
const MAX_TABLE_PHASES: usize = 8192;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

struct Kernel {
    cutoff: f64,
    half: f64,
    i0_beta: f64,
}

impl Kernel {
    fn eval(&self, t: f64) -> f64 {
        let r = t / self.half;
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let x = self.cutoff * t;
        let sinc = if x.abs() < 1e-12 { 1.0 } else { (PI * x).sin() / (PI * x) };
        self.cutoff * sinc * bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / self.i0_beta
    }

    /// Taps for input offsets `-(TAPS/2 - 1) ..= TAPS/2` around `frac`, normalized to unit DC gain.
    fn phase(&self, frac: f64, out: &mut [f64]) {
        let first = -(TAPS as isize / 2 - 1);
        for (i, tap) in out.iter_mut().enumerate() {
            *tap = self.eval((first + i as isize) as f64 - frac);
        }
        let sum: f64 = out.iter().sum();
        out.iter_mut().for_each(|t| *t /= sum);
    }
}

/// Converts `audio` to `target_rate`. Output length is `round(len·target/source)`.
pub fn resample(audio: &AudioClip, target_rate: u32) -> AudioClip {
    assert!(target_rate > 0, "target rate must be positive");
    let source_rate = audio.sample_rate;
    if source_rate == target_rate || audio.is_empty() {
        return AudioClip { samples: audio.samples.clone(), sample_rate: target_rate };
    }
    let g = gcd(source_rate as u64, target_rate as u64);
    let (up, down) = (target_rate as u64 / g, source_rate as u64 / g);
    let out_len = ((audio.len() as f64) * target_rate as f64 / source_rate as f64).round() as usize;
    let kernel = Kernel {
        cutoff: ROLLOFF * (target_rate as f64 / source_rate as f64).min(1.0),
        half: TAPS as f64 / 2.0,
        i0_beta: bessel_i0(KAISER_BETA),
    };
    let table: Option<Vec<f64>> = (up as usize <= MAX_TABLE_PHASES).then(|| {
        let mut t = vec![0.0; up as usize * TAPS];
        for (p, chunk) in t.chunks_mut(TAPS).enumerate() {
            kernel.phase(p as f64 / up as f64, chunk);
        }
        t
    });
    let mut scratch = [0.0; TAPS];
    let x = &audio.samples;
    let first = -(TAPS as i64 / 2 - 1);
    let samples = (0..out_len as u64)
        .map(|n| {
            let pos = n * down;
            let (base, phase) = ((pos / up) as i64, (pos % up) as usize);
            let taps: &[f64] = match &table {
                Some(t) => &t[phase * TAPS..(phase + 1) * TAPS],
                None => {
                    kernel.phase(phase as f64 / up as f64, &mut scratch);
                    &scratch
                }
            };
            taps.iter()
                .enumerate()
                .filter_map(|(i, &h)| {
                    let idx = base + first + i as i64;
                    (idx >= 0 && (idx as usize) < x.len()).then(|| h * x[idx as usize])
                })
                .sum()
        })
        .collect();
    AudioClip { samples, sample_rate: target_rate }
}
