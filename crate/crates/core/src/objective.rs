//! Reconstruction and least-squares adversarial losses.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::data::CrossVars;
use crate::models::{Critic, Masker, ModelError};
use crate::real::Real;

/// One term of the generator objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossTerm {
    R1,
    R2,
    R3,
    R4,
    GanC,
    GanA,
}

impl LossTerm {
    pub const ALL: [LossTerm; 6] = [LossTerm::R1, LossTerm::R2, LossTerm::R3, LossTerm::R4, LossTerm::GanC, LossTerm::GanA];

    pub fn name(self) -> &'static str {
        match self {
            LossTerm::R1 => "r1",
            LossTerm::R2 => "r2",
            LossTerm::R3 => "r3",
            LossTerm::R4 => "r4",
            LossTerm::GanC => "gan_c",
            LossTerm::GanA => "gan_a",
        }
    }

    pub fn is_adversarial(self) -> bool {
        matches!(self, LossTerm::GanC | LossTerm::GanA)
    }
}

impl fmt::Display for LossTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown loss term `{0}` (expected one of r1, r2, r3, r4, gan_c, gan_a)")]
pub struct UnknownLossTerm(pub String);

impl FromStr for LossTerm {
    type Err = UnknownLossTerm;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LossTerm::ALL.into_iter().find(|t| t.name() == s).ok_or_else(|| UnknownLossTerm(s.to_string()))
    }
}

/// Form of the generator's adversarial terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GanMode {
    /// `ℓ(d(x), 1)`, bounded below by zero.
    #[default]
    Standard,
    /// `−ℓ(d(x), 0)`, unbounded below.
    Literal,
}

impl FromStr for GanMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(GanMode::Standard),
            "literal" => Ok(GanMode::Literal),
            _ => Err(format!("unknown GAN mode `{s}` (expected standard or literal)")),
        }
    }
}

/// Weights of the generator objective and the terms switched off.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    /// Applied to each adversarial term.
    pub gan: f64,
    pub disabled: BTreeSet<LossTerm>,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { r1: 1.0, r2: 1.0, r3: 1.0, r4: 1.0, gan: 0.5, disabled: BTreeSet::new() }
    }
}

impl LossWeights {
    pub fn is_enabled(&self, term: LossTerm) -> bool {
        !self.disabled.contains(&term)
    }

    /// Weight of `term`, or 0 when disabled.
    pub fn weight(&self, term: LossTerm) -> f64 {
        if !self.is_enabled(term) {
            return 0.0;
        }
        match term {
            LossTerm::R1 => self.r1,
            LossTerm::R2 => self.r2,
            LossTerm::R3 => self.r3,
            LossTerm::R4 => self.r4,
            LossTerm::GanC | LossTerm::GanA => self.gan,
        }
    }

    pub fn disable(&mut self, term: LossTerm) {
        self.disabled.insert(term);
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, w) in [("w_r1", self.r1), ("w_r2", self.r2), ("w_r3", self.r3), ("w_r4", self.r4), ("w_gan", self.gan)] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(format!("{name} must be a finite non-negative number, got {w}"));
            }
        }
        Ok(())
    }
}

/// Values of the generator terms at one step; disabled terms are 0.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GeneratorLossReport {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    pub gan_c: f64,
    pub gan_a: f64,
    pub total: f64,
}

impl GeneratorLossReport {
    pub fn get(&self, term: LossTerm) -> f64 {
        match term {
            LossTerm::R1 => self.r1,
            LossTerm::R2 => self.r2,
            LossTerm::R3 => self.r3,
            LossTerm::R4 => self.r4,
            LossTerm::GanC => self.gan_c,
            LossTerm::GanA => self.gan_a,
        }
    }

    pub fn set(&mut self, term: LossTerm, value: f64) {
        *match term {
            LossTerm::R1 => &mut self.r1,
            LossTerm::R2 => &mut self.r2,
            LossTerm::R3 => &mut self.r3,
            LossTerm::R4 => &mut self.r4,
            LossTerm::GanC => &mut self.gan_c,
            LossTerm::GanA => &mut self.gan_a,
        } = value;
    }
}

/// Weighted sum of the enabled terms of `report`.
pub fn generator_total(report: &GeneratorLossReport, weights: &LossWeights) -> f64 {
    LossTerm::ALL.iter().map(|&t| weights.weight(t) * report.get(t)).sum()
}

/// Records the weighted sum of the enabled terms among `terms`.
pub fn total_on_tape<T: Real>(
    tape: &mut Tape<T>,
    terms: &[(LossTerm, Var)],
    weights: &LossWeights,
) -> Result<Var, ModelError> {
    let weighted: Vec<(Var, f64)> =
        terms.iter().filter(|(t, _)| weights.is_enabled(*t)).map(|&(t, v)| (v, weights.weight(t))).collect();
    Ok(tape.combine(&weighted)?)
}

/// `ℓ(x, y)`: mean of `(x − y)²` over all entries of `x`.
pub fn least_squares<T: Real>(tape: &mut Tape<T>, x: Var, y: f64) -> Result<Var, ModelError> {
    Ok(tape.mean_square(x, y)?)
}

/// `ℓ` averaged over the patches of each scale, then over scales.
pub fn patch_loss<T: Real>(tape: &mut Tape<T>, scores: &[Var], y: f64) -> Result<Var, ModelError> {
    let mut per_scale = Vec::with_capacity(scores.len());
    for &s in scores {
        per_scale.push((least_squares(tape, s, y)?, 1.0 / scores.len() as f64));
    }
    Ok(tape.combine(&per_scale)?)
}

/// Mean absolute difference of two equally shaped nodes.
pub fn mean_l1<T: Real>(tape: &mut Tape<T>, x: Var, y: Var) -> Result<Var, ModelError> {
    let d = tape.sub(x, y)?;
    Ok(tape.mean_abs(d)?)
}

/// `‖g(c) − c‖₁`.
pub fn r1<T: Real>(tape: &mut Tape<T>, g: &impl Masker<T>, c: Var) -> Result<Var, ModelError> {
    let gc = g.apply(tape, c)?;
    mean_l1(tape, gc, c)
}

/// `‖g(g(a)) − g(a)‖₁` given the node `g(a)`.
pub fn r2<T: Real>(tape: &mut Tape<T>, g: &impl Masker<T>, g_a: Var) -> Result<Var, ModelError> {
    let gga = g.apply(tape, g_a)?;
    mean_l1(tape, gga, g_a)
}

/// `‖g(ā) − c(ā)‖₁` given the node `g(ā)`.
pub fn r3<T: Real>(tape: &mut Tape<T>, g_cross: Var, cross: &CrossVars) -> Result<Var, ModelError> {
    mean_l1(tape, g_cross, cross.c)
}

/// `‖ā − g(ā) − b(ā)‖₁` given the node `g(ā)`.
pub fn r4<T: Real>(tape: &mut Tape<T>, g_cross: Var, cross: &CrossVars) -> Result<Var, ModelError> {
    let residual = tape.sub(cross.cross, g_cross)?;
    mean_l1(tape, residual, cross.b)
}

/// All four reconstruction terms `[r1, r2, r3, r4]`.
pub fn reconstruction_losses<T: Real>(
    tape: &mut Tape<T>,
    g: &impl Masker<T>,
    a: Var,
    c: Var,
    cross: &CrossVars,
) -> Result<[Var; 4], ModelError> {
    let l1 = r1(tape, g, c)?;
    let g_a = g.apply(tape, a)?;
    let l2 = r2(tape, g, g_a)?;
    let g_cross = g.apply(tape, cross.cross)?;
    let l3 = r3(tape, g_cross, cross)?;
    let l4 = r4(tape, g_cross, cross)?;
    Ok([l1, l2, l3, l4])
}

/// Generator-side adversarial term for the fake sample `x`.
pub fn gan_term<T: Real>(tape: &mut Tape<T>, d: &impl Critic<T>, x: Var, mode: GanMode) -> Result<Var, ModelError> {
    let scores = d.scores(tape, x)?;
    match mode {
        GanMode::Standard => patch_loss(tape, &scores, 1.0),
        GanMode::Literal => {
            let l = patch_loss(tape, &scores, 0.0)?;
            Ok(tape.scale(l, -1.0)?)
        }
    }
}

/// `(gan_c, gan_a)` for the fakes `g(a)` and `ā`.
pub fn generator_gan_losses<T: Real>(
    tape: &mut Tape<T>,
    d_c: &impl Critic<T>,
    d_a: &impl Critic<T>,
    g_a: Var,
    cross: Var,
    mode: GanMode,
) -> Result<(Var, Var), ModelError> {
    Ok((gan_term(tape, d_c, g_a, mode)?, gan_term(tape, d_a, cross, mode)?))
}

/// `ℓ(d(fake), 0) + ℓ(d(real), 1)`.
pub fn discriminator_loss<T: Real>(
    tape: &mut Tape<T>,
    d: &impl Critic<T>,
    fake: Var,
    real: Var,
) -> Result<Var, ModelError> {
    let fake_scores = d.scores(tape, fake)?;
    let lf = patch_loss(tape, &fake_scores, 0.0)?;
    let real_scores = d.scores(tape, real)?;
    let lr = patch_loss(tape, &real_scores, 1.0)?;
    Ok(tape.combine(&[(lf, 1.0), (lr, 1.0)])?)
}

/// `(loss_dC, loss_dA)` with fakes `g(a)`, `ā` and reals `c`, `a`.
pub fn discriminator_losses<T: Real>(
    tape: &mut Tape<T>,
    d_c: &impl Critic<T>,
    d_a: &impl Critic<T>,
    g_a: Var,
    c: Var,
    a: Var,
    cross: Var,
) -> Result<(Var, Var), ModelError> {
    Ok((discriminator_loss(tape, d_c, g_a, c)?, discriminator_loss(tape, d_a, cross, a)?))
}
