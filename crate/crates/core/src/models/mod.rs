//! The masking generator and the multi-scale least-squares discriminators.

mod discriminator;
mod generator;
mod params;

pub use discriminator::{DiscriminatorConfig, MultiScaleDiscriminator};
pub use generator::{MaskNetwork, MaskNetworkConfig};
pub use params::ParamSet;

use crate::autodiff::{AutodiffError, Tape, Var};
use crate::real::Real;

#[derive(Debug, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("input shape {got:?} does not match {expected}")]
    InputShape { expected: String, got: Vec<usize> },
    #[error("expected {expected} bound parameters, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error(transparent)]
    Autodiff(AutodiffError),
}

/// Walks bound parameters in construction order.
struct Cursor<'a> {
    vars: &'a [Var],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(vars: &'a [Var], expected: usize) -> Result<Self, ModelError> {
        if vars.len() != expected {
            return Err(ModelError::ParamCount { expected, got: vars.len() });
        }
        Ok(Cursor { vars, pos: 0 })
    }

    fn next(&mut self) -> Var {
        self.pos += 1;
        self.vars[self.pos - 1]
    }

    fn finish(self) -> Result<(), ModelError> {
        if self.pos != self.vars.len() {
            return Err(ModelError::ParamCount { expected: self.pos, got: self.vars.len() });
        }
        Ok(())
    }
}

/// Anything that records `g(x)` on a tape.
pub trait Masker<T: Real> {
    fn apply(&self, tape: &mut Tape<T>, x: Var) -> Result<Var, ModelError>;
}

/// Anything that records per-scale patch scores on a tape.
pub trait Critic<T: Real> {
    fn scores(&self, tape: &mut Tape<T>, x: Var) -> Result<Vec<Var>, ModelError>;
}

/// A model together with its parameters recorded on one tape.
pub struct Bound<'a, M> {
    pub model: &'a M,
    pub params: Vec<Var>,
}

impl<'a, T: Real> Bound<'a, MaskNetwork<T>> {
    pub fn generator(model: &'a MaskNetwork<T>, tape: &mut Tape<T>, trainable: bool) -> Self {
        Bound { model, params: model.params.bind(tape, trainable) }
    }
}

impl<'a, T: Real> Bound<'a, MultiScaleDiscriminator<T>> {
    pub fn discriminator(model: &'a MultiScaleDiscriminator<T>, tape: &mut Tape<T>, trainable: bool) -> Self {
        Bound { model, params: model.params.bind(tape, trainable) }
    }
}

impl<T: Real> Masker<T> for Bound<'_, MaskNetwork<T>> {
    fn apply(&self, tape: &mut Tape<T>, x: Var) -> Result<Var, ModelError> {
        self.model.apply(tape, &self.params, x)
    }
}

impl<T: Real> Critic<T> for Bound<'_, MultiScaleDiscriminator<T>> {
    fn scores(&self, tape: &mut Tape<T>, x: Var) -> Result<Vec<Var>, ModelError> {
        self.model.scores(tape, &self.params, x)
    }
}
