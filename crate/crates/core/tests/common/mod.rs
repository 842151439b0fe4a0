//! Toy setup shared by the trainer tests and the acceptance suite.
#![allow(dead_code)]

use symog::nn::{build_test_mlp, Network};
use symog::train::{self, TrainConfig, TrainOutcome};
use symog::Dataset;

pub const TOY_SIZES: [usize; 4] = [16, 32, 32, 4];
pub const TOY_EPOCHS: usize = 30;

pub fn toy_data() -> Dataset {
    Dataset::gaussian_blobs(4096, TOY_SIZES[0], TOY_SIZES[3], 1.5, 7)
}

pub fn toy_pretrained(data: &Dataset) -> Network {
    let net = build_test_mlp(&TOY_SIZES, 3).unwrap();
    let cfg = TrainConfig { seed: 11, ..TrainConfig::pretrain(10) };
    train::pretrain(net, data, &cfg).unwrap()
}

pub fn toy_symog(data: &Dataset, start: &Network, clipping: bool) -> TrainOutcome {
    let cfg = TrainConfig {
        clipping,
        seed: 12,
        ..TrainConfig::symog(TOY_EPOCHS)
    };
    train::train(start.clone(), data, &cfg).unwrap()
}
