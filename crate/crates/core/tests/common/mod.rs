#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vocalsep::autodiff::{check_gradients, AutodiffError, GradCheckOptions, GradCheckReport, Tape, Tensor};
use vocalsep::data::to_tensor;
use vocalsep::dsp::CompressedMagnitude;
use vocalsep::models::{Bound, MaskNetwork, ModelError, MultiScaleDiscriminator};
use vocalsep::objective::LossTerm;
use vocalsep::train::{generator_terms, record_fakes, TrainingConfig};

/// An 8×8 configuration small enough to finite-difference every parameter.
pub fn tiny_config() -> TrainingConfig {
    let mut cfg = TrainingConfig::toy();
    cfg.base_width = 2;
    cfg.residual_blocks = 1;
    cfg.grid = 8;
    cfg.upsample_widths = [4, 8];
    cfg.disc_base_width = 2;
    cfg.disc_layers = 1;
    cfg.fft_size = 16;
    cfg.hop = 2;
    cfg.frames = 8;
    cfg.validate().unwrap();
    cfg
}

pub fn random_grid(rng: &mut ChaCha8Rng, side: usize) -> CompressedMagnitude {
    CompressedMagnitude::new(side, side, (0..side * side).map(|_| 0.05 + rng.random::<f64>() * 2.0).collect()).unwrap()
}

pub fn into_autodiff(e: ModelError) -> AutodiffError {
    match e {
        ModelError::Autodiff(e) => e,
        other => panic!("{other}"),
    }
}

/// Finite-difference check of the weighted generator objective (the enabled
/// terms of `cfg`) with respect to every generator parameter, discriminators
/// held fixed.
pub fn check_generator_objective(
    cfg: &TrainingConfig,
    seed: u64,
    step: f64,
    max_entries: Option<usize>,
) -> GradCheckReport {
    let net = MaskNetwork::<f64>::new(cfg.mask_config(), seed).unwrap();
    let d_c = MultiScaleDiscriminator::<f64>::new(cfg.discriminator_config(), cfg.grid, seed + 1).unwrap();
    let d_a = MultiScaleDiscriminator::<f64>::new(cfg.discriminator_config(), cfg.grid, seed + 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 3);
    let a = to_tensor::<f64>(&random_grid(&mut rng, cfg.grid));
    let c = to_tensor::<f64>(&random_grid(&mut rng, cfg.grid));
    let c_cross = to_tensor::<f64>(&random_grid(&mut rng, cfg.grid));
    let weights = cfg.weights();
    let inputs: Vec<Tensor<f64>> = net.params.tensors().to_vec();
    let opts = GradCheckOptions { step, max_entries, seed, ..GradCheckOptions::default() };
    check_gradients(&inputs, opts, |tape: &mut Tape<f64>, vars| {
        let g = Bound { model: &net, params: vars.to_vec() };
        let dc = Bound::discriminator(&d_c, tape, false);
        let da = Bound::discriminator(&d_a, tape, false);
        let (a, c, c_cross) = (tape.constant(a.clone()), tape.constant(c.clone()), tape.constant(c_cross.clone()));
        let fakes = record_fakes(tape, &g, a, c_cross, cfg).map_err(into_autodiff)?;
        let terms = generator_terms(tape, &g, &dc, &da, c, &fakes, cfg).map_err(into_autodiff)?;
        vocalsep::objective::total_on_tape(tape, &terms, &weights).map_err(into_autodiff)
    })
    .unwrap()
}

/// `cfg` with every term but `keep` disabled.
pub fn only(cfg: &TrainingConfig, keep: LossTerm) -> TrainingConfig {
    let mut cfg = cfg.clone();
    cfg.disabled_losses = LossTerm::ALL.iter().copied().filter(|&t| t != keep).collect();
    cfg
}
