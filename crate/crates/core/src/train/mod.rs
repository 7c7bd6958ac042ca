//! Alternating discriminator/generator optimization, checkpoints and loss logs.

mod checkpoint;
mod config;
mod log;

pub use checkpoint::{load_checkpoint, load_checkpoint_matching, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{lr_at, TrainingConfig, TOY_LR};
pub use log::{DiscriminatorLog, LossLog, LOSS_LOG_HEADER};

use std::path::PathBuf;

use crate::autodiff::{AdamState, Tape, Tensor, Var};
use crate::data::{cross_on_tape, sample_batch, to_tensor, CrossVars, Dataset};
use crate::dsp::CompressedMagnitude;
use crate::models::{Bound, Critic, MaskNetwork, Masker, ModelError, MultiScaleDiscriminator};
use crate::objective::{self, GeneratorLossReport, LossTerm};
use crate::real::Real;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite {term} loss ({value}) at step {step}; finite terms: {dump}")]
    NonFinite { term: String, value: f64, step: u64, dump: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint stores {found}-byte values but {expected}-byte values were requested")]
    Precision { found: u8, expected: u8 },
    #[error("checkpoint model configuration differs\n  checkpoint: {found}\n  requested:  {expected}")]
    ConfigMismatch { found: String, expected: String },
}

/// One training batch: a mixture `a`, an instrumental `c` and the
/// instrumental `c′` for the synthetic cross.
#[derive(Clone, Copy, Debug)]
pub struct Batch<'a> {
    pub a: &'a CompressedMagnitude,
    pub c: &'a CompressedMagnitude,
    pub c_cross: &'a CompressedMagnitude,
}

/// Losses observed during one step. Discriminator losses are measured before
/// their update and are 0 when the discriminator was not trained.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    pub step: u64,
    pub generator: GeneratorLossReport,
    pub loss_dc: f64,
    pub loss_da: f64,
}

/// Everything needed to continue training. Batches are a pure function of
/// the seed and step counter, so no separate RNG state is kept.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState<T> {
    pub config: TrainingConfig,
    pub step: u64,
    pub generator: MaskNetwork<T>,
    pub d_c: MultiScaleDiscriminator<T>,
    pub d_a: MultiScaleDiscriminator<T>,
    pub opt_g: AdamState<T>,
    pub opt_dc: AdamState<T>,
    pub opt_da: AdamState<T>,
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl<T: Real> TrainState<T> {
    pub fn new(config: TrainingConfig) -> Result<Self, TrainError> {
        config.validate()?;
        let generator = MaskNetwork::new(config.mask_config(), derive_seed(config.seed, 1))?;
        let d_c = MultiScaleDiscriminator::new(config.discriminator_config(), config.grid, derive_seed(config.seed, 2))?;
        let d_a = MultiScaleDiscriminator::new(config.discriminator_config(), config.grid, derive_seed(config.seed, 3))?;
        let adam = config.adam();
        Ok(TrainState {
            opt_g: AdamState::new(adam, generator.params.tensors()),
            opt_dc: AdamState::new(adam, d_c.params.tensors()),
            opt_da: AdamState::new(adam, d_a.params.tensors()),
            config,
            step: 0,
            generator,
            d_c,
            d_a,
        })
    }

    /// The batch drawn at the current step.
    pub fn next_batch<'a>(&self, mixtures: &'a Dataset, sources: &'a Dataset) -> Batch<'a> {
        let idx = sample_batch(mixtures.len(), sources.len(), self.config.seed, self.step);
        Batch {
            a: &mixtures.samples[idx.a].magnitude,
            c: &sources.samples[idx.c].magnitude,
            c_cross: &sources.samples[idx.c_cross].magnitude,
        }
    }

    /// One step: build `g(a)` and the cross `ā` from `a` and `c′`, update the
    /// discriminators on those values with `g` frozen, then update `g` on its
    /// objective with the updated discriminators frozen.
    pub fn train_step(&mut self, batch: &Batch<'_>) -> Result<StepReport, TrainError> {
        let cfg = &self.config;
        let weights = cfg.weights();
        let on = |t: LossTerm| weights.is_enabled(t);
        let lr = lr_at(self.step, cfg);
        let mut report = StepReport { step: self.step, ..StepReport::default() };

        let mut tape = Tape::new();
        let g = Bound::generator(&self.generator, &mut tape, true);
        let a = tape.constant(to_tensor::<T>(batch.a));
        let c = tape.constant(to_tensor::<T>(batch.c));
        let c_cross = tape.constant(to_tensor::<T>(batch.c_cross));

        let fakes = record_fakes(&mut tape, &g, a, c_cross, cfg)?;

        let adv_updates = cfg.discriminator_updates;
        if let (true, Some(g_a)) = (on(LossTerm::GanC), fakes.g_a) {
            let fake = tape.value(g_a).clone();
            for _ in 0..adv_updates {
                let l = discriminator_step(&mut self.d_c, &mut self.opt_dc, &fake, tape.value(c), lr)?;
                report.loss_dc = l;
            }
        }
        if let (true, Some(x)) = (on(LossTerm::GanA), fakes.cross) {
            let fake = tape.value(x.cross).clone();
            for _ in 0..adv_updates {
                let l = discriminator_step(&mut self.d_a, &mut self.opt_da, &fake, tape.value(a), lr)?;
                report.loss_da = l;
            }
        }

        let d_c = Bound::discriminator(&self.d_c, &mut tape, false);
        let d_a = Bound::discriminator(&self.d_a, &mut tape, false);
        let terms = generator_terms(&mut tape, &g, &d_c, &d_a, c, &fakes, cfg)?;
        for &(term, v) in &terms {
            report.generator.set(term, tape.value(v).item().to_f64().unwrap_or(f64::NAN));
        }
        let total = objective::total_on_tape(&mut tape, &terms, &weights)?;
        report.generator.total = tape.value(total).item().to_f64().unwrap_or(f64::NAN);
        self.check_finite(&report)?;

        let grads = tape.backward(total).map_err(ModelError::from)?;
        let g_grads: Vec<Tensor<T>> = g.params.iter().map(|&p| grads.wrt(p)).collect();
        self.opt_g.update(self.generator.params.tensors_mut(), &g_grads, lr);
        self.step += 1;
        Ok(report)
    }

    fn check_finite(&self, report: &StepReport) -> Result<(), TrainError> {
        let mut named: Vec<(&str, f64)> = LossTerm::ALL.iter().map(|&t| (t.name(), report.generator.get(t))).collect();
        named.push(("total", report.generator.total));
        named.push(("loss_dc", report.loss_dc));
        named.push(("loss_da", report.loss_da));
        if let Some(&(term, value)) = named.iter().find(|(_, v)| !v.is_finite()) {
            let dump = named.iter().map(|(n, v)| format!("{n}={v}")).collect::<Vec<_>>().join(", ");
            return Err(TrainError::NonFinite { term: term.to_string(), value, step: self.step, dump });
        }
        Ok(())
    }

    /// Runs steps until `until` (exclusive), calling `observe` after each one.
    pub fn train_until(
        &mut self,
        mixtures: &Dataset,
        sources: &Dataset,
        until: u64,
        mut observe: impl FnMut(&Self, &StepReport) -> Result<(), TrainError>,
    ) -> Result<(), TrainError> {
        if mixtures.is_empty() || sources.is_empty() {
            return Err(TrainError::Config("training needs at least one mixture and one instrumental clip".into()));
        }
        while self.step < until {
            let batch = self.next_batch(mixtures, sources);
            let report = self.train_step(&batch)?;
            observe(self, &report)?;
        }
        Ok(())
    }
}

/// Fake samples of one step.
#[derive(Clone, Copy, Debug)]
pub struct Fakes {
    /// `g(a)`, when any enabled term needs it.
    pub g_a: Option<Var>,
    /// The cross `ā` of `a − g(a)` and `c′`, when any enabled term needs it.
    pub cross: Option<CrossVars>,
}

/// Records `g(a)` and the cross built from it, skipping whatever no enabled
/// term uses.
pub fn record_fakes<T: Real>(
    tape: &mut Tape<T>,
    g: &impl Masker<T>,
    a: Var,
    c_cross: Var,
    cfg: &TrainingConfig,
) -> Result<Fakes, ModelError> {
    let weights = cfg.weights();
    let on = |t: LossTerm| weights.is_enabled(t);
    let need_cross = on(LossTerm::R3) || on(LossTerm::R4) || on(LossTerm::GanA);
    let g_a = if need_cross || on(LossTerm::R2) || on(LossTerm::GanC) { Some(g.apply(tape, a)?) } else { None };
    let cross = match (need_cross, g_a) {
        (true, Some(g_a)) => {
            let b_est = tape.sub(a, g_a)?;
            Some(cross_on_tape(tape, b_est, c_cross, cfg.mixing, cfg.exponent, cfg.detach_cross)?)
        }
        _ => None,
    };
    Ok(Fakes { g_a, cross })
}

/// Records every enabled generator loss term, in [`LossTerm::ALL`] order.
pub fn generator_terms<T: Real>(
    tape: &mut Tape<T>,
    g: &impl Masker<T>,
    d_c: &impl Critic<T>,
    d_a: &impl Critic<T>,
    c: Var,
    fakes: &Fakes,
    cfg: &TrainingConfig,
) -> Result<Vec<(LossTerm, Var)>, ModelError> {
    let weights = cfg.weights();
    let on = |t: LossTerm| weights.is_enabled(t);
    let mut terms = Vec::new();
    if on(LossTerm::R1) {
        terms.push((LossTerm::R1, objective::r1(tape, g, c)?));
    }
    if let (true, Some(g_a)) = (on(LossTerm::R2), fakes.g_a) {
        terms.push((LossTerm::R2, objective::r2(tape, g, g_a)?));
    }
    if let (true, Some(x)) = (on(LossTerm::R3) || on(LossTerm::R4), fakes.cross) {
        let g_cross = g.apply(tape, x.cross)?;
        if on(LossTerm::R3) {
            terms.push((LossTerm::R3, objective::r3(tape, g_cross, &x)?));
        }
        if on(LossTerm::R4) {
            terms.push((LossTerm::R4, objective::r4(tape, g_cross, &x)?));
        }
    }
    if let (true, Some(g_a)) = (on(LossTerm::GanC), fakes.g_a) {
        terms.push((LossTerm::GanC, objective::gan_term(tape, d_c, g_a, cfg.gan_mode)?));
    }
    if let (true, Some(x)) = (on(LossTerm::GanA), fakes.cross) {
        terms.push((LossTerm::GanA, objective::gan_term(tape, d_a, x.cross, cfg.gan_mode)?));
    }
    Ok(terms)
}

/// One Adam step on `ℓ(d(fake), 0) + ℓ(d(real), 1)`; returns the loss before
/// the update.
pub fn discriminator_step<T: Real>(
    d: &mut MultiScaleDiscriminator<T>,
    opt: &mut AdamState<T>,
    fake: &Tensor<T>,
    real: &Tensor<T>,
    lr: f64,
) -> Result<f64, TrainError> {
    let mut tape = Tape::new();
    let bound = Bound::discriminator(d, &mut tape, true);
    let fake = tape.constant(fake.clone());
    let real = tape.constant(real.clone());
    let loss = objective::discriminator_loss(&mut tape, &bound, fake, real)?;
    let value = tape.value(loss).item().to_f64().unwrap_or(f64::NAN);
    let grads = tape.backward(loss).map_err(ModelError::from)?;
    let grads: Vec<Tensor<T>> = bound.params.iter().map(|&p| grads.wrt(p)).collect();
    opt.update(d.params.tensors_mut(), &grads, lr);
    Ok(value)
}
