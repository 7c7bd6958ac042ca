use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::autodiff::AdamConfig;
use crate::data::MixingDomain;
use crate::dsp::StftConfig;
use crate::models::{DiscriminatorConfig, MaskNetworkConfig};
use crate::objective::{GanMode, LossTerm, LossWeights};

/// Every training, model and audio setting, as a flat key–value record.
///
/// The text form is TOML with one `key = value` line per field; a file only
/// needs the keys it changes. The extra key `preset = "toy"` (or `"full"`)
/// selects the base values the other keys override.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub seed: u64,
    pub total_steps: u64,
    pub lr_initial: f64,
    pub lr_halving_step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub discriminator_updates: usize,
    pub checkpoint_interval: u64,
    pub w_r1: f64,
    pub w_r2: f64,
    pub w_r3: f64,
    pub w_r4: f64,
    pub w_gan: f64,
    pub disabled_losses: BTreeSet<LossTerm>,
    pub gan_mode: GanMode,
    pub mixing: MixingDomain,
    pub detach_cross: bool,
    pub base_width: usize,
    pub residual_blocks: usize,
    pub grid: usize,
    pub upsample_widths: [usize; 2],
    pub disc_base_width: usize,
    pub disc_layers: usize,
    pub disc_scales: usize,
    pub disc_slope: f64,
    pub fft_size: usize,
    pub hop: usize,
    pub frames: usize,
    pub exponent: f64,
    pub sample_rate: u32,
    pub eval_filter_len: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl TrainingConfig {
    /// Full-scale settings: 256×256 grids, 10⁴-scale schedules.
    pub fn full() -> Self {
        Self::from_parts(
            MaskNetworkConfig::default(),
            DiscriminatorConfig::default(),
            StftConfig::default(),
            200_000,
            100_000,
            512,
        )
    }

    /// Desk-scale settings: 32×32 grids, width-8 model, 2000 steps.
    pub fn toy() -> Self {
        let mut cfg = Self::from_parts(
            MaskNetworkConfig::toy(),
            DiscriminatorConfig::toy(),
            StftConfig::toy(),
            2000,
            1000,
            32,
        );
        cfg.lr_initial = TOY_LR;
        cfg.checkpoint_interval = 500;
        cfg
    }

    fn from_parts(
        g: MaskNetworkConfig,
        d: DiscriminatorConfig,
        s: StftConfig,
        total_steps: u64,
        lr_halving_step: u64,
        eval_filter_len: usize,
    ) -> Self {
        let w = LossWeights::default();
        let adam = AdamConfig::default();
        TrainingConfig {
            seed: 0,
            total_steps,
            lr_initial: 1e-4,
            lr_halving_step,
            beta1: adam.beta1,
            beta2: adam.beta2,
            adam_eps: adam.eps,
            batch_size: 1,
            discriminator_updates: 1,
            checkpoint_interval: 10_000,
            w_r1: w.r1,
            w_r2: w.r2,
            w_r3: w.r3,
            w_r4: w.r4,
            w_gan: w.gan,
            disabled_losses: BTreeSet::new(),
            gan_mode: GanMode::Standard,
            mixing: MixingDomain::Physical,
            detach_cross: false,
            base_width: g.base_width,
            residual_blocks: g.residual_blocks,
            grid: g.grid,
            upsample_widths: g.upsample_widths,
            disc_base_width: d.base_width,
            disc_layers: d.layers,
            disc_scales: d.scales,
            disc_slope: d.slope,
            fft_size: s.fft_size,
            hop: s.hop,
            frames: s.frames,
            exponent: s.exponent,
            sample_rate: s.sample_rate,
            eval_filter_len,
        }
    }

    pub fn mask_config(&self) -> MaskNetworkConfig {
        MaskNetworkConfig {
            base_width: self.base_width,
            residual_blocks: self.residual_blocks,
            grid: self.grid,
            upsample_widths: self.upsample_widths,
        }
    }

    pub fn discriminator_config(&self) -> DiscriminatorConfig {
        DiscriminatorConfig {
            base_width: self.disc_base_width,
            layers: self.disc_layers,
            scales: self.disc_scales,
            slope: self.disc_slope,
        }
    }

    pub fn stft_config(&self) -> StftConfig {
        StftConfig {
            fft_size: self.fft_size,
            hop: self.hop,
            frames: self.frames,
            exponent: self.exponent,
            sample_rate: self.sample_rate,
        }
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            r1: self.w_r1,
            r2: self.w_r2,
            r3: self.w_r3,
            r4: self.w_r4,
            gan: self.w_gan,
            disabled: self.disabled_losses.clone(),
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { beta1: self.beta1, beta2: self.beta2, eps: self.adam_eps }
    }

    /// The settings that fix parameter shapes and the audio representation.
    pub fn model_signature(&self) -> String {
        let g = self.mask_config();
        let d = self.discriminator_config();
        let s = self.stft_config();
        format!(
            "generator(width {}, blocks {}, grid {}, upsample {:?}), discriminator(width {}, layers {}, scales {}), \
             stft(fft {}, hop {}, frames {}, p {}, rate {})",
            g.base_width,
            g.residual_blocks,
            g.grid,
            g.upsample_widths,
            d.base_width,
            d.layers,
            d.scales,
            s.fft_size,
            s.hop,
            s.frames,
            s.exponent,
            s.sample_rate
        )
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.total_steps == 0 {
            return bad("total_steps must be positive".into());
        }
        if !(self.lr_initial.is_finite() && self.lr_initial > 0.0) {
            return bad(format!("lr_initial must be positive, got {}", self.lr_initial));
        }
        if self.batch_size != 1 {
            return bad(format!("batch_size must be 1, got {}", self.batch_size));
        }
        if self.discriminator_updates == 0 {
            return bad("discriminator_updates must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.adam_eps <= 0.0 {
            return bad("Adam needs 0 ≤ beta1, beta2 < 1 and adam_eps > 0".into());
        }
        if self.eval_filter_len == 0 {
            return bad("eval_filter_len must be at least 1".into());
        }
        self.weights().validate().map_err(TrainError::Config)?;
        let stft = self.stft_config();
        stft.validate().map_err(|e| TrainError::Config(e.to_string()))?;
        if stft.freq_rows() != self.grid || stft.frames != self.grid {
            return bad(format!(
                "grid {} does not match the {}×{} spectrogram of fft_size {} and frames {}",
                self.grid,
                stft.freq_rows(),
                stft.frames,
                self.fft_size,
                self.frames
            ));
        }
        self.mask_config().validate().map_err(|e| TrainError::Config(e.to_string()))?;
        self.discriminator_config().score_sides(self.grid).map_err(|e| TrainError::Config(e.to_string()))?;
        Ok(())
    }

    /// Every key accepted in a config file.
    pub fn valid_keys() -> Vec<String> {
        let mut keys = vec!["preset".to_string()];
        if let Ok(toml::Value::Table(t)) = toml::Value::try_from(Self::full()) {
            keys.extend(t.keys().cloned());
        }
        keys
    }

    /// Parses the key–value text form.
    pub fn from_toml_str(text: &str) -> Result<Self, TrainError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| TrainError::Config(e.to_string()))?;
        Self::from_table(table)
    }

    pub fn from_table(mut table: toml::Table) -> Result<Self, TrainError> {
        let valid = Self::valid_keys();
        let unknown: Vec<&String> = table.keys().filter(|k| !valid.contains(k)).collect();
        if !unknown.is_empty() {
            return Err(TrainError::Config(format!(
                "unknown configuration key(s) {}; valid keys are: {}",
                unknown.iter().map(|k| format!("`{k}`")).collect::<Vec<_>>().join(", "),
                valid.join(", ")
            )));
        }
        let base = match table.remove("preset") {
            None => Self::full(),
            Some(toml::Value::String(s)) if s == "full" => Self::full(),
            Some(toml::Value::String(s)) if s == "toy" => Self::toy(),
            Some(other) => return Err(TrainError::Config(format!("preset must be \"full\" or \"toy\", got {other}"))),
        };
        let toml::Value::Table(mut merged) =
            toml::Value::try_from(base).map_err(|e| TrainError::Config(e.to_string()))?
        else {
            unreachable!("a struct serializes to a table")
        };
        merged.extend(table);
        let cfg: Self = toml::Value::Table(merged).try_into().map_err(|e: toml::de::Error| TrainError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let text = std::fs::read_to_string(path).map_err(|e| TrainError::Io { path: path.to_path_buf(), source: e })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config fields are all representable in TOML")
    }
}

/// Learning rate of the toy preset.
pub const TOY_LR: f64 = 1e-4;

/// `lr_initial` before `lr_halving_step`, half of it from then on.
pub fn lr_at(step: u64, cfg: &TrainingConfig) -> f64 {
    if step < cfg.lr_halving_step {
        cfg.lr_initial
    } else {
        cfg.lr_initial / 2.0
    }
}
