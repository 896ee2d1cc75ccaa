//! Minimal dense-network engine with hand-written gradients.

pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod matrix;
pub mod optim;
pub mod serialize;

use serde::{Deserialize, Serialize};

pub use gradcheck::{GradCheckOptions, GradCheckReport, grad_check};
pub use layers::{Dense, relu_backward, relu_forward};
pub use loss::{accuracy, mse, softmax, softmax_xent};
pub use matrix::{Matrix, Scalar};
pub use optim::{Objective, Shadowed, sgd_step};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Batch {
    /// Every iteration uses the whole training split.
    #[default]
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub max_iters: usize,
    pub batch: Batch,
    pub seed: u64,
    pub init_scale_rule: String,
    /// Stop once training accuracy has been 100% for this many consecutive
    /// iterations; 0 disables early stopping.
    pub early_stop_patience: usize,
    /// Loss curve sampling period in iterations.
    pub log_every: usize,
}

pub const GLOROT_UNIFORM: &str = "glorot_uniform";

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.2,
            max_iters: 1000,
            batch: Batch::Full,
            seed: 0,
            init_scale_rule: GLOROT_UNIFORM.to_string(),
            early_stop_patience: 50,
            log_every: 10,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("lr must be > 0, got {}", self.lr)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be > 0".into()));
        }
        if self.init_scale_rule != GLOROT_UNIFORM {
            return Err(Error::InvalidArgument(format!(
                "unsupported init rule `{}`",
                self.init_scale_rule
            )));
        }
        Ok(())
    }
}
