//! Supervised training, class-balanced weighting, instance-discrimination
//! pretraining and anchored fine-tuning.

mod config;
mod engine;
mod log;
mod loss;
mod procedures;

pub use config::{BalanceScheme, FinetuneConfig, FinetuneMode, LossKind, PretrainConfig, TrainConfig};
pub use engine::{argmax, penalty_value};
pub use log::{pairwise_cosine, EpochRecord, TrainLog, COSINE_PAIR_BUDGET};
pub use loss::{class_balanced_weights, erm_loss};
pub use procedures::{
    finetune, instance_classes, nprl_pretrain, predict_scores, strip_labels, train_baseline, Profile,
};
