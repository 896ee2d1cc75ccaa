use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::objective::{LossParts, Trainable};
use crate::error::{Error, Result};
use crate::nn::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub iter: usize,
    #[serde(flatten)]
    pub parts: LossParts,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// SGD steps actually taken.
    pub iterations: usize,
    pub stopped_early: bool,
    /// Sampled every `log_every` iterations, plus the last evaluation.
    pub loss_curve: Vec<LossPoint>,
    pub final_loss: f64,
    /// Training accuracy measured at the last evaluated iteration.
    pub final_train_acc: f64,
    pub wall_time_secs: f64,
}

impl TrainLog {
    pub fn first_parts(&self) -> Option<LossParts> {
        self.loss_curve.first().map(|p| p.parts)
    }

    pub fn last_parts(&self) -> Option<LossParts> {
        self.loss_curve.last().map(|p| p.parts)
    }
}

/// Full-batch SGD on `obj` until `max_iters` steps or until training
/// accuracy has been 100% for `early_stop_patience` consecutive evaluations.
pub fn fit<O: Trainable>(obj: &mut O, cfg: &TrainConfig) -> Result<TrainLog> {
    cfg.validate()?;
    let start = Instant::now();
    let mut log = TrainLog::default();
    let every = cfg.log_every.max(1);
    let mut streak = 0usize;
    let mut last_logged = None;
    for it in 0..cfg.max_iters {
        obj.begin_iteration();
        let loss = obj.loss_and_grad()?;
        if !loss.is_finite() {
            return Err(Error::NonFinite("training loss"));
        }
        debug_assert!(obj.all_finite(), "non-finite parameter or gradient at iteration {it}");
        let parts = obj.last_parts();
        if it % every == 0 {
            log.loss_curve.push(LossPoint { iter: it, parts });
            last_logged = Some(it);
        }
        log.final_loss = loss;
        log.final_train_acc = obj.last_accuracy();
        streak = if log.final_train_acc >= 1.0 { streak + 1 } else { 0 };
        if cfg.early_stop_patience > 0 && streak >= cfg.early_stop_patience {
            log.stopped_early = true;
            if last_logged != Some(it) {
                log.loss_curve.push(LossPoint { iter: it, parts });
            }
            break;
        }
        obj.sgd(cfg.lr)?;
        log.iterations += 1;
    }
    if !log.stopped_early {
        let parts = obj.last_parts();
        let it = log.iterations.saturating_sub(1);
        if last_logged != Some(it) {
            log.loss_curve.push(LossPoint { iter: it, parts });
        }
    }
    log.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(log)
}
