use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quant::DEFAULT_EXPONENT_RANGE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrDecay {
    /// `η(e) = η₀ (η_E/η₀)^(e/E)`
    Geometric,
    /// `η(e) = η₀ + (η_E − η₀) e/E`
    Linear,
}

/// Hyperparameters of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub lr_decay: LrDecay,
    pub lambda_start: f64,
    /// Exponential growth rate α of the regularization weight.
    pub lambda_growth: f64,
    pub momentum: f64,
    /// L2 coefficient on quantizable weights (pretraining only).
    pub weight_decay: f64,
    pub bits: u8,
    pub clipping: bool,
    pub exponent_range: (i32, i32),
    pub seed: u64,
}

impl TrainConfig {
    /// Regularized fixed-point training with the recommended schedule:
    /// N = 2, λ₀ = 10, α = 9/E, η from 0.01 to 0.001, Nesterov 0.9, batch 64.
    pub fn symog(epochs: usize) -> Self {
        TrainConfig {
            epochs,
            batch_size: 64,
            lr_start: 0.01,
            lr_end: 0.001,
            lr_decay: LrDecay::Geometric,
            lambda_start: 10.0,
            lambda_growth: default_growth(epochs),
            momentum: 0.9,
            weight_decay: 0.0,
            bits: 2,
            clipping: true,
            exponent_range: DEFAULT_EXPONENT_RANGE,
            seed: 0,
        }
    }

    /// Float pretraining: same optimizer, no quantization terms, weight decay 5e-4.
    pub fn pretrain(epochs: usize) -> Self {
        TrainConfig {
            lambda_start: 0.0,
            lambda_growth: 0.0,
            weight_decay: 5e-4,
            clipping: false,
            ..TrainConfig::symog(epochs)
        }
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self.lambda_growth = default_growth(epochs);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(self.lr_end > 0.0 && self.lr_end <= self.lr_start) {
            return bad(format!(
                "learning rates must satisfy 0 < lr_end <= lr_start, got {} -> {}",
                self.lr_start, self.lr_end
            ));
        }
        if self.lambda_start < 0.0 || !self.lambda_growth.is_finite() {
            return bad(format!(
                "invalid lambda schedule: start {} growth {}",
                self.lambda_start, self.lambda_growth
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} outside [0, 1)", self.momentum));
        }
        if self.bits < 2 {
            return bad(format!("bit width {} below 2", self.bits));
        }
        if self.exponent_range.0 > self.exponent_range.1 {
            return bad(format!("empty exponent range {:?}", self.exponent_range));
        }
        Ok(())
    }
}

fn default_growth(epochs: usize) -> f64 {
    if epochs == 0 {
        0.0
    } else {
        9.0 / epochs as f64
    }
}
