use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vocalsep::dsp::{
    analyze, compress, concatenate_track, decompress, reconstruct, segment, AudioClip, DspError, StftConfig, StftEngine,
};

fn rel_rms(a: &[f64], b: &[f64]) -> f64 {
    let err: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let norm: f64 = b.iter().map(|y| y * y).sum();
    (err / norm).sqrt()
}

fn random_clip(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn round_trip_with_own_phase_recovers_signal() {
    let cfg = StftConfig::default();
    let engine = StftEngine::new(cfg).unwrap();
    for seed in 0..20 {
        let x = random_clip(cfg.clip_len(), seed);
        let spec = engine.stft(&x).unwrap();
        assert_eq!((spec.bins, spec.frames), (257, 256));
        let (mag, phase) = compress(&spec, cfg.exponent);
        assert_eq!(mag.shape(), (256, 256));
        assert_eq!((phase.bins, phase.frames), (257, 256));
        // The top bin is gone, so put it back before checking the round trip.
        let mut full = spec.clone();
        let top = spec.bins - 1;
        for t in 0..spec.frames {
            full.data[top * spec.frames + t] = spec.at(top, t);
        }
        let y = reconstruct(&engine, &mag, &phase, cfg.clip_len()).unwrap();
        // Reconstruction drops the Nyquist bin: compare against x with that
        // component removed by running the same ISTFT on the exact spectrum.
        let mut trimmed = spec.clone();
        for t in 0..spec.frames {
            trimmed.data[top * spec.frames + t] = Default::default();
        }
        let reference = engine.istft(&trimmed);
        assert!(rel_rms(&y.samples, &reference) < 1e-6, "seed {seed}");
        assert!(rel_rms(&engine.istft(&full), &x) < 1e-6, "seed {seed}");
    }
}

#[test]
fn round_trip_is_exact_away_from_trimmed_content() {
    // Partials well below Nyquist under a taper that vanishes before the clip
    // edges leave nothing in the discarded top bin.
    let cfg = StftConfig::default();
    let engine = StftEngine::new(cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let len = cfg.clip_len();
    for _ in 0..20 {
        let partials: Vec<(f64, f64, f64)> = (0..12)
            .map(|_| (rng.random_range(20.0..6000.0), rng.random_range(0.0..2.0 * PI), rng.random_range(0.01..0.2)))
            .collect();
        let x: Vec<f64> = (0..len)
            .map(|n| {
                let t = n as f64 / cfg.sample_rate as f64;
                let taper = if n < 512 || n >= len - 512 {
                    0.0
                } else {
                    (PI * (n - 512) as f64 / (len - 1024) as f64).sin().powi(4)
                };
                taper * partials.iter().map(|(f, p, a)| a * (2.0 * PI * f * t + p).sin()).sum::<f64>()
            })
            .collect();
        let (mag, phase) = analyze(&engine, &x).unwrap();
        let y = reconstruct(&engine, &mag, &phase, x.len()).unwrap();
        assert!(rel_rms(&y.samples, &x) < 1e-6, "{}", rel_rms(&y.samples, &x));
    }
}

#[test]
fn istft_inverts_stft_for_random_signals() {
    for cfg in [StftConfig::default(), StftConfig::toy()] {
        let engine = StftEngine::new(cfg).unwrap();
        for seed in 0..20 {
            let x = random_clip(cfg.clip_len(), 100 + seed);
            let y = engine.istft(&engine.stft(&x).unwrap());
            assert!(rel_rms(&y, &x) < 1e-6);
        }
    }
}

#[test]
fn zero_inputs_stay_silent() {
    let cfg = StftConfig::toy();
    let engine = StftEngine::new(cfg).unwrap();
    let spec = engine.stft(&vec![0.0; cfg.clip_len()]).unwrap();
    assert!(spec.data.iter().all(|c| c.norm() == 0.0));
    let (mag, phase) = compress(&spec, cfg.exponent);
    let y = reconstruct(&engine, &vec_zero_like(&mag), &phase, 100).unwrap();
    assert_eq!(y.samples, vec![0.0; 100]);
}

fn vec_zero_like(m: &vocalsep::dsp::CompressedMagnitude) -> vocalsep::dsp::CompressedMagnitude {
    vocalsep::dsp::CompressedMagnitude::zeros(m.freq, m.frames)
}

#[test]
fn parseval_per_frame() {
    let cfg = StftConfig::default();
    let engine = StftEngine::new(cfg).unwrap();
    let x = random_clip(cfg.clip_len(), 5);
    let spec = engine.stft(&x).unwrap();
    let w = cfg.window();
    let n = cfg.fft_size;
    let mut padded = vec![0.0; n / 2];
    padded.extend_from_slice(&x);
    padded.resize(x.len() + n, 0.0);
    for t in [0, 17, 255] {
        let time: f64 = (0..n).map(|i| (padded[t * cfg.hop + i] * w[i]).powi(2)).sum();
        let mut freq = 0.0;
        for k in 0..spec.bins {
            let weight = if k == 0 || k == spec.bins - 1 { 1.0 } else { 2.0 };
            freq += weight * spec.at(k, t).norm_sqr();
        }
        freq /= n as f64;
        assert!((time - freq).abs() <= 1e-9 * time.max(1.0), "frame {t}: {time} vs {freq}");
    }
}

#[test]
fn bin_centred_sine_concentrates_in_main_lobe() {
    let cfg = StftConfig::default();
    let engine = StftEngine::new(cfg).unwrap();
    let k = 37;
    let f = k as f64 * cfg.sample_rate as f64 / cfg.fft_size as f64;
    let x: Vec<f64> = (0..cfg.clip_len()).map(|i| (2.0 * PI * f * i as f64 / cfg.sample_rate as f64).sin()).collect();
    let spec = engine.stft(&x).unwrap();
    // Frames 4..=251 lie entirely inside the clip.
    for t in [4, 128, 251] {
        let energy: Vec<f64> = (0..spec.bins).map(|b| spec.at(b, t).norm_sqr()).collect();
        let total: f64 = energy.iter().sum();
        let lobe: f64 = energy[k - 1..=k + 1].iter().sum();
        assert!(lobe / total >= 0.99, "{}", lobe / total);
        let peak = energy.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(peak, k);
    }
}

#[test]
fn segmentation_arithmetic() {
    let cfg = StftConfig::default();
    let two = AudioClip::new(random_clip(2 * 16320, 1), 20480).unwrap();
    let segs = segment(&two, &cfg);
    assert_eq!(segs.len(), 2);
    assert!(segs.iter().all(|s| s.true_len == 16320 && s.clip.len() == 16320));

    let odd = AudioClip::new(random_clip(16321, 2), 20480).unwrap();
    let segs = segment(&odd, &cfg);
    assert_eq!(segs.len(), 2);
    assert_eq!(segs[1].true_len, 1);
    assert_eq!(segs[1].clip.len(), 16320);
    assert!(segs[1].clip.samples[1..].iter().all(|&s| s == 0.0));

    assert!(segment(&AudioClip::silence(0, 20480), &cfg).is_empty());
}

#[test]
fn concatenation_contracts() {
    let cfg = StftConfig::default();
    let audio = AudioClip::new(random_clip(2 * 16320, 3), 20480).unwrap();
    let segs = segment(&audio, &cfg);
    assert_eq!(concatenate_track(&segs[..1]).unwrap(), segs[0].clip);
    assert_eq!(concatenate_track(&segs).unwrap().len(), 32640);

    let mut mixed = segs.clone();
    mixed[1].clip.sample_rate = 44100;
    assert_eq!(concatenate_track(&mixed).unwrap_err(), DspError::RateMismatch(20480, 44100));
}

proptest! {
    #[test]
    fn segment_then_concatenate_is_identity(len in 0usize..2000, seed in any::<u64>()) {
        let cfg = StftConfig::toy();
        let audio = AudioClip::new(random_clip(len, seed), cfg.sample_rate).unwrap();
        let segs = segment(&audio, &cfg);
        if len == 0 {
            prop_assert!(segs.is_empty());
        } else {
            prop_assert_eq!(concatenate_track(&segs).unwrap(), audio);
        }
    }

    #[test]
    fn compression_is_monotone_and_invertible(a in 0.0f64..100.0, b in 0.0f64..100.0, p in 0.05f64..1.0) {
        let (ca, cb) = (a.powf(p), b.powf(p));
        if a < b { prop_assert!(ca <= cb); }
        prop_assert!((decompress(ca, p) - a).abs() <= 1e-9 * a.max(1.0));
    }
}
