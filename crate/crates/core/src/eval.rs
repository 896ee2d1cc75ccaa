//! Linear probing of frozen encoders and confusion-matrix metrics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Dense, Matrix, TrainConfig, accuracy};
use crate::rng::{Rng, derive_seed, streams};
use crate::synth::Modality;
use crate::train::{DataView, LinearObjective, Model, ModelBundle, fit};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub encoder_id: String,
    pub probe_train_acc: f64,
    pub probe_test_acc: f64,
    pub seed: u64,
    pub probe_config: TrainConfig,
    /// Iterations the probe ran for.
    pub iterations: usize,
}

/// Post-ReLU features of modality `m` as seen by `model`.
pub fn encoder_features(model: &Model, m: Modality, x: &Matrix) -> Result<Matrix> {
    match model {
        Model::Uni { modality, net } if *modality == m => net.features(x),
        Model::Uni { modality, .. } => Err(Error::InvalidArgument(format!(
            "uni-modal model for modality {} has no tap for modality {}",
            modality.index(),
            m.index()
        ))),
        Model::Fusion(net) => net.tap(m, x),
        Model::Linear(_) => Err(Error::InvalidArgument("a linear model has no encoder tap".into())),
    }
}

/// Fits a fresh softmax-regression probe on frozen features of modality `m`.
/// The probe's init seed is derived from `cfg.seed`.
pub fn linear_probe(bundle: &ModelBundle, m: Modality, view: &DataView, cfg: &TrainConfig) -> Result<ProbeReport> {
    let model = bundle.model()?;
    let before = model.digest();
    let f_train = encoder_features(&model, m, view.train(m))?;
    let f_test = encoder_features(&model, m, view.test(m))?;
    if model.digest() != before {
        return Err(Error::Invariant("encoder parameters changed while probing".into()));
    }
    let mut rng = Rng::new(derive_seed(cfg.seed, streams::PROBE));
    let layer = Dense::glorot(f_train.cols(), view.n_classes, &mut rng);
    let mut obj = LinearObjective::new(layer, f_train.clone(), view.y_train.clone())?;
    let log = fit(&mut obj, cfg)?;
    let probe = obj.layer;
    Ok(ProbeReport {
        encoder_id: format!("{}:{}:enc{}", bundle.strategy.name(), &bundle.params_digest[..12], m.index()),
        probe_train_acc: accuracy(&probe.apply(&f_train)?, &view.y_train),
        probe_test_acc: accuracy(&probe.apply(&f_test)?, &view.y_test),
        seed: cfg.seed,
        probe_config: cfg.clone(),
        iterations: log.iterations,
    })
}

/// Row = actual class, column = predicted class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub k: usize,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(predictions: &[usize], labels: &[usize], k: usize) -> Result<Self> {
        if predictions.len() != labels.len() {
            return Err(Error::shape(
                "confusion",
                format!("{} predictions, {} labels", predictions.len(), labels.len()),
            ));
        }
        let mut counts = vec![vec![0u64; k]; k];
        for (&p, &y) in predictions.iter().zip(labels) {
            if y >= k {
                return Err(Error::LabelOutOfRange { label: y, classes: k });
            }
            if p >= k {
                return Err(Error::LabelOutOfRange { label: p, classes: k });
            }
            counts[y][p] += 1;
        }
        Ok(Self { k, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, r: usize) -> u64 {
        self.counts[r].iter().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let trace: u64 = (0..self.k).map(|i| self.counts[i][i]).sum();
        trace as f64 / total as f64
    }

    /// Row-normalized percentages; empty rows are `None`.
    pub fn percentages(&self) -> Vec<Option<Vec<f64>>> {
        (0..self.k)
            .map(|r| {
                let t = self.row_total(r);
                (t > 0).then(|| self.counts[r].iter().map(|&c| 100.0 * c as f64 / t as f64).collect())
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("actual");
        for c in 0..self.k {
            let _ = write!(s, ",pred_{c}");
        }
        s.push_str(",total\n");
        for r in 0..self.k {
            let _ = write!(s, "{r}");
            for c in 0..self.k {
                let _ = write!(s, ",{}", self.counts[r][c]);
            }
            let _ = writeln!(s, ",{}", self.row_total(r));
        }
        s
    }
}

pub fn confusion(predictions: &[usize], labels: &[usize], k: usize) -> Result<ConfusionMatrix> {
    ConfusionMatrix::new(predictions, labels, k)
}

/// Diagonal of the row-normalized confusion matrix; `None` for classes
/// absent from `labels`.
pub fn per_class_accuracy(predictions: &[usize], labels: &[usize], k: usize) -> Result<Vec<Option<f64>>> {
    let cm = ConfusionMatrix::new(predictions, labels, k)?;
    Ok((0..k)
        .map(|i| {
            let t = cm.row_total(i);
            (t > 0).then(|| cm.counts[i][i] as f64 / t as f64)
        })
        .collect())
}

/// Test-split predictions of any bundle over the view.
pub fn predict_test(model: &Model, view: &DataView) -> Result<Vec<usize>> {
    let logits = match model {
        Model::Uni { modality, net } => net.logits(view.test(*modality))?,
        Model::Fusion(net) => net.logits(&view.x1_test, &view.x2_test)?,
        Model::Linear(_) => {
            return Err(Error::InvalidArgument(
                "a linear classifier needs its feature inputs; predict through its owner".into(),
            ));
        }
    };
    Ok(logits.argmax_rows())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    #[test]
    fn perfect_predictions_are_diagonal() {
        let y = [0, 1, 2, 2, 1];
        let cm = confusion(&y, &y, 3).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 0, 0], vec![0, 2, 0], vec![0, 0, 2]]);
        assert_eq!(cm.accuracy(), 1.0);
        let pc = per_class_accuracy(&y, &y, 3).unwrap();
        assert!(pc.iter().all(|v| *v == Some(1.0)));
    }

    #[test]
    fn constant_predictor_fills_one_column() {
        let y = [0, 1, 2, 0];
        let cm = confusion(&[1, 1, 1, 1], &y, 3).unwrap();
        for r in 0..3 {
            assert_eq!(cm.counts[r][0] + cm.counts[r][2], 0);
        }
    }

    #[test]
    fn empty_class_is_undefined() {
        let pc = per_class_accuracy(&[0, 1], &[0, 1], 3).unwrap();
        assert_eq!(pc[2], None);
        assert_eq!(confusion(&[0, 1], &[0, 1], 3).unwrap().percentages()[2], None);
    }

    #[test]
    fn out_of_range_label() {
        assert!(confusion(&[0], &[3], 3).is_err());
    }

    #[test]
    fn uniform_random_predictions_hit_a_third() {
        let mut rng = Rng::new(4);
        let labels: Vec<usize> = (0..1500).map(|i| i % 3).collect();
        let preds: Vec<usize> = labels.iter().map(|_| rng.below(3) as usize).collect();
        for acc in per_class_accuracy(&preds, &labels, 3).unwrap() {
            assert!((acc.unwrap() - 1.0 / 3.0).abs() < 0.05);
        }
    }

    #[test]
    fn csv_layout() {
        let cm = confusion(&[0, 1], &[0, 0], 2).unwrap();
        assert_eq!(cm.to_csv(), "actual,pred_0,pred_1,total\n0,1,1,2\n1,0,0,0\n");
    }

    proptest! {
        #[test]
        fn rows_sum_to_class_counts(pairs in proptest::collection::vec((0usize..4, 0usize..4), 0..200)) {
            let (p, y): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let cm = confusion(&p, &y, 4).unwrap();
            for c in 0..4 {
                prop_assert_eq!(cm.row_total(c), y.iter().filter(|&&v| v == c).count() as u64);
            }
            let hits = p.iter().zip(&y).filter(|(a, b)| a == b).count();
            if !y.is_empty() {
                prop_assert_eq!(cm.accuracy(), hits as f64 / y.len() as f64);
            }
        }
    }
}
