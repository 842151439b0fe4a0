//! Fixed-point aware training: regularizer, schedules, Nesterov SGD with
//! clipping, telemetry, and the pretraining / regularized training loops.

mod config;
mod optim;
mod regularizer;
mod schedule;
pub mod telemetry;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{LrDecay, TrainConfig};
pub use optim::{clip_weights, sgd_step, NesterovSgd};
pub use regularizer::{reg_grad, reg_value};
pub use schedule::{lambda_at, lr_at, ScheduleState};
pub use telemetry::{LayerTelemetry, TelemetryRecord};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::nn::Network;
use crate::quant::QuantPlan;

/// What the per-epoch callback sees after each completed epoch.
#[derive(Debug)]
pub struct EpochReport<'a> {
    /// 1-based index of the epoch just finished.
    pub epoch: usize,
    pub schedule: ScheduleState,
    /// Sample-weighted mean task loss over the epoch.
    pub train_loss: f64,
    pub net: &'a Network,
    /// Present for regularized training only.
    pub plan: Option<&'a QuantPlan>,
    pub telemetry: Option<&'a TelemetryRecord>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: Network,
    pub plan: QuantPlan,
    /// Snapshot before training followed by one per epoch.
    pub telemetry: Vec<TelemetryRecord>,
    pub losses: Vec<f64>,
}

/// Regularized fixed-point training from a pretrained float network.
///
/// Per-layer exponents are selected once from the incoming weights and frozen.
/// Epoch `e` (0-based) runs with `λ(e)` and `η(e)`.
pub fn train(net: Network, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(net, data, cfg, |_| Ok::<(), Error>(()))
}

pub fn train_with<E, F>(net: Network, data: &Dataset, cfg: &TrainConfig, mut on_epoch: F) -> Result<TrainOutcome, E>
where
    E: From<Error>,
    F: FnMut(&EpochReport) -> Result<(), E>,
{
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()).into());
    }
    let plan = QuantPlan::select(&net, cfg.bits, cfg.exponent_range)?;
    let (first, mut modes) = telemetry::snapshot(&net, &plan, 0, None)?;
    let mut records = vec![first];
    let mut losses = Vec::new();
    let mut net = net;
    let mut opt = NesterovSgd::new(&net, cfg.momentum, 0.0, cfg.clipping);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    for e in 0..cfg.epochs {
        let schedule = ScheduleState::at(cfg, e)?;
        let loss = run_epoch(&mut net, data, cfg, &schedule, Some(&plan), &mut opt, &mut rng)?;
        let (record, now) = telemetry::snapshot(&net, &plan, e + 1, Some(&modes))?;
        modes = now;
        losses.push(loss);
        on_epoch(&EpochReport {
            epoch: e + 1,
            schedule,
            train_loss: loss,
            net: &net,
            plan: Some(&plan),
            telemetry: Some(&record),
        })?;
        records.push(record);
    }
    Ok(TrainOutcome {
        net,
        plan,
        telemetry: records,
        losses,
    })
}

/// Float pretraining: Nesterov SGD with weight decay and no quantization terms.
pub fn pretrain(net: Network, data: &Dataset, cfg: &TrainConfig) -> Result<Network> {
    pretrain_with(net, data, cfg, |_| Ok::<(), Error>(()))
}

pub fn pretrain_with<E, F>(net: Network, data: &Dataset, cfg: &TrainConfig, mut on_epoch: F) -> Result<Network, E>
where
    E: From<Error>,
    F: FnMut(&EpochReport) -> Result<(), E>,
{
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()).into());
    }
    let mut net = net;
    let mut opt = NesterovSgd::new(&net, cfg.momentum, cfg.weight_decay, false);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for e in 0..cfg.epochs {
        let schedule = ScheduleState {
            lambda: 0.0,
            ..ScheduleState::at(cfg, e)?
        };
        let loss = run_epoch(&mut net, data, cfg, &schedule, None, &mut opt, &mut rng)?;
        on_epoch(&EpochReport {
            epoch: e + 1,
            schedule,
            train_loss: loss,
            net: &net,
            plan: None,
            telemetry: None,
        })?;
    }
    Ok(net)
}

fn run_epoch(
    net: &mut Network,
    data: &Dataset,
    cfg: &TrainConfig,
    schedule: &ScheduleState,
    plan: Option<&QuantPlan>,
    opt: &mut NesterovSgd,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    let mut total = 0.0;
    for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
        let (x, y) = data.batch(idx);
        let loss = sgd_step(net, &x, &y, schedule, plan, opt, b)?;
        total += loss * idx.len() as f64;
    }
    Ok(total / data.len() as f64)
}
