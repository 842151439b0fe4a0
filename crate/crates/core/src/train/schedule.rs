use serde::{Deserialize, Serialize};

use super::config::{LrDecay, TrainConfig};
use crate::error::{Error, Result};

/// Regularization weight and learning rate in force during one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleState {
    pub epoch: usize,
    pub lambda: f64,
    pub lr: f64,
}

impl ScheduleState {
    pub fn at(cfg: &TrainConfig, epoch: usize) -> Result<Self> {
        Ok(ScheduleState {
            epoch,
            lambda: lambda_at(cfg, epoch)?,
            lr: lr_at(cfg, epoch)?,
        })
    }
}

fn check_epoch(cfg: &TrainConfig, epoch: usize) -> Result<()> {
    if epoch > cfg.epochs {
        return Err(Error::InvalidArgument(format!(
            "epoch {epoch} outside [0, {}]",
            cfg.epochs
        )));
    }
    Ok(())
}

/// `λ(e) = λ₀ · exp(α e)`.
pub fn lambda_at(cfg: &TrainConfig, epoch: usize) -> Result<f64> {
    check_epoch(cfg, epoch)?;
    Ok(cfg.lambda_start * (cfg.lambda_growth * epoch as f64).exp())
}

pub fn lr_at(cfg: &TrainConfig, epoch: usize) -> Result<f64> {
    check_epoch(cfg, epoch)?;
    if cfg.epochs == 0 {
        return Ok(cfg.lr_start);
    }
    let t = epoch as f64 / cfg.epochs as f64;
    Ok(match cfg.lr_decay {
        LrDecay::Geometric => cfg.lr_start * (cfg.lr_end / cfg.lr_start).powf(t),
        LrDecay::Linear => cfg.lr_start + (cfg.lr_end - cfg.lr_start) * t,
    })
}
