use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{he_kernel, ParamSet};
use super::{Cursor, ModelError};
use crate::autodiff::{AutodiffError, Tape, Tensor, Var};
use crate::real::Real;

const NORM_EPS: f64 = 1e-5;

/// Hyperparameters of the mask network `m`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskNetworkConfig {
    pub base_width: usize,
    /// Residual blocks on each side of the bottleneck.
    pub residual_blocks: usize,
    /// Side of the square input grid (frequency rows = frames).
    pub grid: usize,
    /// Output widths of the two upsampling blocks.
    pub upsample_widths: [usize; 2],
}

impl Default for MaskNetworkConfig {
    fn default() -> Self {
        MaskNetworkConfig { base_width: 64, residual_blocks: 4, grid: 256, upsample_widths: [128, 256] }
    }
}

impl MaskNetworkConfig {
    pub fn toy() -> Self {
        MaskNetworkConfig { base_width: 8, residual_blocks: 2, grid: 32, upsample_widths: [16, 32] }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.base_width == 0 || self.upsample_widths.contains(&0) {
            return Err(ModelError::Config("widths must be positive".into()));
        }
        if self.grid < 4 || self.grid % 4 != 0 {
            return Err(ModelError::Config(format!("grid {} is not a positive multiple of 4", self.grid)));
        }
        Ok(())
    }
}

/// Encoder/decoder producing a per-bin mask in (0, 1); `g(a) = a ⊙ m(a)`.
///
/// Encoder: 7×7 stride-1 convolution to `w` channels, two 4×4 stride-2
/// convolutions to `2w` and `4w`, each followed by instance norm and ReLU, then
/// `residual_blocks` residual blocks. Decoder: as many residual blocks, two
/// upsampling blocks (nearest ×2, 5×5 convolution, instance norm, ReLU) and a
/// 7×7 one-channel head with a sigmoid.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskNetwork<T> {
    pub config: MaskNetworkConfig,
    pub params: ParamSet<T>,
}

impl<T: Real> MaskNetwork<T> {
    /// He-normal kernels, unit gains, zero shifts and biases.
    pub fn new(config: MaskNetworkConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamSet::new();
        let w = config.base_width;
        let norm = |p: &mut ParamSet<T>, name: &str, c: usize| {
            p.push(format!("{name}.gain"), Tensor::full(&[c], T::one()));
            p.push(format!("{name}.shift"), Tensor::zeros(&[c]));
        };
        p.push("enc.c7.kernel", he_kernel(&mut rng, w, 1, 7));
        norm(&mut p, "enc.c7.norm", w);
        p.push("enc.down1.kernel", he_kernel(&mut rng, 2 * w, w, 4));
        norm(&mut p, "enc.down1.norm", 2 * w);
        p.push("enc.down2.kernel", he_kernel(&mut rng, 4 * w, 2 * w, 4));
        norm(&mut p, "enc.down2.norm", 4 * w);
        for side in ["enc", "dec"] {
            for b in 0..config.residual_blocks {
                for half in 0..2 {
                    let name = format!("{side}.res{b}.conv{half}");
                    p.push(format!("{name}.kernel"), he_kernel(&mut rng, 4 * w, 4 * w, 3));
                    norm(&mut p, &format!("{name}.norm"), 4 * w);
                }
            }
        }
        let mut cin = 4 * w;
        for (i, &cout) in config.upsample_widths.iter().enumerate() {
            p.push(format!("dec.up{i}.kernel"), he_kernel(&mut rng, cout, cin, 5));
            norm(&mut p, &format!("dec.up{i}.norm"), cout);
            cin = cout;
        }
        p.push("dec.head.kernel", he_kernel(&mut rng, 1, cin, 7));
        p.push("dec.head.bias", Tensor::zeros(&[1]));
        Ok(MaskNetwork { config, params: p })
    }

    /// Sets the output head to zero, making the mask 0.5 everywhere.
    pub fn zero_head(&mut self) {
        for name in ["dec.head.kernel", "dec.head.bias"] {
            if let Some(t) = self.params.get_mut(name) {
                t.data_mut().iter_mut().for_each(|v| *v = T::zero());
            }
        }
    }

    fn check_input(&self, shape: &[usize]) -> Result<(), ModelError> {
        let g = self.config.grid;
        if shape.len() != 4 || shape[1] != 1 || shape[2] != g || shape[3] != g {
            return Err(ModelError::InputShape { expected: format!("[N, 1, {g}, {g}]"), got: shape.to_vec() });
        }
        Ok(())
    }

    /// Records `m(input)` on `tape` using parameters bound by [`ParamSet::bind`].
    pub fn mask(&self, tape: &mut Tape<T>, params: &[Var], input: Var) -> Result<Var, ModelError> {
        self.check_input(tape.value(input).shape())?;
        let mut cur = Cursor::new(params, self.params.len())?;
        let block = |tape: &mut Tape<T>, cur: &mut Cursor, x: Var, stride: usize, pad: usize, relu: bool| {
            let k = cur.next();
            let y = tape.conv2d(x, k, None, stride, pad)?;
            let (gain, shift) = (cur.next(), cur.next());
            let y = tape.instance_norm(y, gain, shift, NORM_EPS)?;
            if relu {
                tape.relu(y)
            } else {
                Ok(y)
            }
        };
        let mut x = block(tape, &mut cur, input, 1, 3, true)?;
        x = block(tape, &mut cur, x, 2, 1, true)?;
        x = block(tape, &mut cur, x, 2, 1, true)?;
        for _ in 0..2 * self.config.residual_blocks {
            let h = block(tape, &mut cur, x, 1, 1, true)?;
            let h = block(tape, &mut cur, h, 1, 1, false)?;
            x = tape.add(x, h)?;
        }
        for _ in 0..2 {
            let up = tape.upsample2x(x)?;
            x = block(tape, &mut cur, up, 1, 2, true)?;
        }
        let (k, b) = (cur.next(), cur.next());
        let logits = tape.conv2d(x, k, Some(b), 1, 3)?;
        cur.finish()?;
        Ok(tape.sigmoid(logits)?)
    }

    /// Records `g(input) = input ⊙ m(input)`.
    pub fn apply(&self, tape: &mut Tape<T>, params: &[Var], input: Var) -> Result<Var, ModelError> {
        let m = self.mask(tape, params, input)?;
        Ok(tape.mul(input, m)?)
    }

    /// Mask values for `a` of shape `[N, 1, grid, grid]`, without gradients.
    pub fn mask_forward(&self, a: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        let mut tape = Tape::new();
        let params = self.params.bind(&mut tape, false);
        let x = tape.constant(a.clone());
        let m = self.mask(&mut tape, &params, x)?;
        Ok(tape.value(m).clone())
    }

    /// `g(a)` without gradients.
    pub fn g_apply(&self, a: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        let m = self.mask_forward(a)?;
        Ok(Tensor::new(a.shape().to_vec(), a.data().iter().zip(m.data()).map(|(&x, &y)| x * y).collect())
            .map_err(ModelError::from)?)
    }
}

impl From<AutodiffError> for ModelError {
    fn from(e: AutodiffError) -> Self {
        ModelError::Autodiff(e)
    }
}
