use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{he_kernel, ParamSet};
use super::{Cursor, ModelError};
use crate::autodiff::{Tape, Tensor, Var};
use crate::real::Real;

/// Hyperparameters of a multi-scale patch discriminator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    /// Width of the first stride-2 layer; each further layer doubles it.
    pub base_width: usize,
    pub layers: usize,
    pub scales: usize,
    pub slope: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig { base_width: 64, layers: 4, scales: 2, slope: 0.2 }
    }
}

impl DiscriminatorConfig {
    pub fn toy() -> Self {
        DiscriminatorConfig { base_width: 8, layers: 3, ..Self::default() }
    }

    /// Side of each scale's score grid for a square input of side `grid`.
    pub fn score_sides(&self, grid: usize) -> Result<Vec<usize>, ModelError> {
        if self.base_width == 0 || self.layers == 0 || self.scales == 0 {
            return Err(ModelError::Config("discriminator widths, layers and scales must be positive".into()));
        }
        let mut sides = Vec::with_capacity(self.scales);
        let mut side = grid;
        for s in 0..self.scales {
            if s > 0 {
                side /= 2;
            }
            let mut h = side;
            for _ in 0..self.layers {
                if h + 2 < 4 {
                    return Err(ModelError::Config(format!(
                        "{} stride-2 layers do not fit a {side}×{side} input at scale {s}",
                        self.layers
                    )));
                }
                h = (h + 2 - 4) / 2 + 1;
            }
            if h + 2 < 4 {
                return Err(ModelError::Config(format!("no room for the 4×4 head at scale {s} ({h}×{h} features)")));
            }
            sides.push(h - 1);
        }
        Ok(sides)
    }
}

/// Stack of 4×4 stride-2 convolutions with leaky ReLU and a 4×4 stride-1
/// one-channel head, applied to the input and to successive 2× average-pooled
/// copies of it, each scale with its own parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiScaleDiscriminator<T> {
    pub config: DiscriminatorConfig,
    pub grid: usize,
    pub params: ParamSet<T>,
}

impl<T: Real> MultiScaleDiscriminator<T> {
    pub fn new(config: DiscriminatorConfig, grid: usize, seed: u64) -> Result<Self, ModelError> {
        config.score_sides(grid)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamSet::new();
        for s in 0..config.scales {
            let mut cin = 1;
            for l in 0..config.layers {
                let cout = config.base_width << l;
                p.push(format!("scale{s}.conv{l}.kernel"), he_kernel(&mut rng, cout, cin, 4));
                p.push(format!("scale{s}.conv{l}.bias"), Tensor::zeros(&[cout]));
                cin = cout;
            }
            p.push(format!("scale{s}.head.kernel"), he_kernel(&mut rng, 1, cin, 4));
            p.push(format!("scale{s}.head.bias"), Tensor::zeros(&[1]));
        }
        Ok(MultiScaleDiscriminator { config, grid, params: p })
    }

    /// Sets every head to zero, so all scores are 0.
    pub fn zero_heads(&mut self) {
        for s in 0..self.config.scales {
            for part in ["kernel", "bias"] {
                if let Some(t) = self.params.get_mut(&format!("scale{s}.head.{part}")) {
                    t.data_mut().iter_mut().for_each(|v| *v = T::zero());
                }
            }
        }
    }

    /// Records one patch-score grid per scale.
    pub fn scores(&self, tape: &mut Tape<T>, params: &[Var], input: Var) -> Result<Vec<Var>, ModelError> {
        let shape = tape.value(input).shape();
        if shape.len() != 4 || shape[1] != 1 || shape[2] != self.grid || shape[3] != self.grid {
            let g = self.grid;
            return Err(ModelError::InputShape { expected: format!("[N, 1, {g}, {g}]"), got: shape.to_vec() });
        }
        let mut cur = Cursor::new(params, self.params.len())?;
        let mut out = Vec::with_capacity(self.config.scales);
        let mut scale_input = input;
        for s in 0..self.config.scales {
            if s > 0 {
                scale_input = tape.avg_pool2x(scale_input)?;
            }
            let mut x = scale_input;
            for _ in 0..self.config.layers {
                let (k, b) = (cur.next(), cur.next());
                x = tape.conv2d(x, k, Some(b), 2, 1)?;
                x = tape.leaky_relu(x, self.config.slope)?;
            }
            let (k, b) = (cur.next(), cur.next());
            out.push(tape.conv2d(x, k, Some(b), 1, 1)?);
        }
        cur.finish()?;
        Ok(out)
    }

    /// Score grids without gradients.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Vec<Tensor<T>>, ModelError> {
        let mut tape = Tape::new();
        let params = self.params.bind(&mut tape, false);
        let input = tape.constant(x.clone());
        let scores = self.scores(&mut tape, &params, input)?;
        Ok(scores.into_iter().map(|v| tape.value(v).clone()).collect())
    }
}
