//! Losses, optimisers, learning-rate schedules and the training loop.

mod loss;
mod optim;
mod schedule;
mod trainer;

pub use loss::{margin_cross_entropy, mse_loss};
pub use optim::{adam_step, sgd_step, Adam};
pub use schedule::{one_cycle_lr, Schedule, WARMUP_FRACTION};
pub use trainer::{
    accuracy, mean_loss, train, train_with, Budget, Optimiser, ProbeConfig, Targets, TrainConfig,
    TrainData, TrainLog,
};
