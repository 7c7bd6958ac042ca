use serde::{Deserialize, Serialize};

use super::DataError;
use crate::autodiff::{AutodiffError, Tape, Var};
use crate::dsp::{decompress, CompressedMagnitude};
use crate::real::Real;

/// How a vocal estimate and an instrumental are combined into a cross.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixingDomain {
    /// `ā = b + c` on compressed magnitudes.
    Additive,
    /// `ā = (b^(1/p) + c^(1/p))^p`: magnitudes add before compression.
    Physical,
}

/// A synthetic mixture and the two components it was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossSample {
    pub cross: CompressedMagnitude,
    pub component_b: CompressedMagnitude,
    pub component_c: CompressedMagnitude,
}

/// Vocal estimate `a − g(a) = a ⊙ (1 − mask)`.
pub fn estimate_b_with_mask(a: &CompressedMagnitude, mask: &[f64]) -> Result<CompressedMagnitude, DataError> {
    if mask.len() != a.data.len() {
        return Err(DataError::Shape(a.shape(), (mask.len(), 1)));
    }
    let data = a.data.iter().zip(mask).map(|(&x, &m)| x * (1.0 - m)).collect();
    Ok(CompressedMagnitude { freq: a.freq, frames: a.frames, data })
}

/// Vocal estimate of `a` under the network `g`.
pub fn estimate_b<T: Real>(
    g: &crate::models::MaskNetwork<T>,
    a: &CompressedMagnitude,
) -> Result<CompressedMagnitude, crate::models::ModelError> {
    let mask = g.mask_forward(&super::to_tensor::<T>(a))?;
    let mask: Vec<f64> = mask.data().iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
    estimate_b_with_mask(a, &mask).map_err(|e| crate::models::ModelError::Config(e.to_string()))
}

/// Mixes `b_est` with `c` and memorizes both components.
pub fn make_cross(
    b_est: &CompressedMagnitude,
    c: &CompressedMagnitude,
    domain: MixingDomain,
    exponent: f64,
) -> Result<CrossSample, DataError> {
    if b_est.shape() != c.shape() {
        return Err(DataError::Shape(b_est.shape(), c.shape()));
    }
    let data = b_est
        .data
        .iter()
        .zip(&c.data)
        .map(|(&b, &c)| match domain {
            MixingDomain::Additive => b + c,
            MixingDomain::Physical => (decompress(b, exponent) + decompress(c, exponent)).powf(exponent),
        })
        .collect();
    Ok(CrossSample {
        cross: CompressedMagnitude { freq: c.freq, frames: c.frames, data },
        component_b: b_est.clone(),
        component_c: c.clone(),
    })
}

/// Tape nodes of a cross built inside a training step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CrossVars {
    pub cross: Var,
    pub b: Var,
    pub c: Var,
}

/// Records a cross of `b_est` and `c`; with `detach`, no gradient reaches
/// `b_est` through the cross or its memorized component.
pub fn cross_on_tape<T: Real>(
    tape: &mut Tape<T>,
    b_est: Var,
    c: Var,
    domain: MixingDomain,
    exponent: f64,
    detach: bool,
) -> Result<CrossVars, AutodiffError> {
    let b = if detach { tape.detach(b_est) } else { b_est };
    let cross = match domain {
        MixingDomain::Additive => tape.add(b, c)?,
        MixingDomain::Physical => tape.power_mix(b, c, exponent)?,
    };
    Ok(CrossVars { cross, b, c })
}
