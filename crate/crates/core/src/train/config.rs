use crate::error::{Error, Result};

/// Class weighting used by the class-balanced loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BalanceScheme {
    /// `w_c = n / (C · n_c)`.
    InverseFrequency,
    /// `w_c ∝ (1 − β) / (1 − β^{n_c})`, scaled so that `Σ w_c n_c = n`.
    EffectiveNumber { beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    Plain,
    ClassBalanced(BalanceScheme),
}

/// Optimizer settings shared by every supervised run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 15,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 0,
            loss: LossKind::Plain,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if let LossKind::ClassBalanced(BalanceScheme::EffectiveNumber { beta }) = self.loss {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::Config(format!("effective-number beta {beta} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            epochs: 30,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("pretrain epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("pretrain learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// How fine-tuning stays close to the pretrained parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FinetuneMode {
    /// Adds `(λ/2)‖θ − θ0‖²_F` over non-head tensors to the loss.
    Regularized { lambda: f64 },
    /// Projects non-head tensors back into `‖θ − θ0‖_F ≤ γ` after every step.
    Projected { gamma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneConfig {
    pub mode: FinetuneMode,
    pub train: TrainConfig,
    /// Whether the caller resampled the training split before fine-tuning.
    pub resample: bool,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            mode: FinetuneMode::Regularized { lambda: 1e-2 },
            train: TrainConfig {
                learning_rate: 1e-4,
                ..TrainConfig::default()
            },
            resample: true,
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        match self.mode {
            FinetuneMode::Regularized { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => {
                Err(Error::Config(format!("lambda {lambda} must be finite and non-negative")))
            }
            FinetuneMode::Projected { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(Error::input(format!("projection radius gamma {gamma} must be positive")))
            }
            _ => Ok(()),
        }
    }

    /// Fine-tuning must use a smaller step than the pretraining it starts from.
    pub fn validate_against(&self, pretrain: &PretrainConfig) -> Result<()> {
        self.validate()?;
        if self.train.learning_rate >= pretrain.learning_rate {
            return Err(Error::Config(format!(
                "fine-tune learning_rate {} must be below the pretrain rate {}",
                self.train.learning_rate, pretrain.learning_rate
            )));
        }
        Ok(())
    }
}
