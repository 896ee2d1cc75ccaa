//! Training strategies on a synthetic dataset and a fixed split.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::bundle::{DataRef, Metrics, Model, ModelBundle, Strategy};
use super::fit::fit;
use super::model::{FusionArch, FusionNet, UniNet};
use super::objective::{
    DropMode, DropoutSampler, FusionObjective, LinearObjective, LossWeights, UniObjective,
};
use crate::error::{Error, Result};
use crate::nn::{Dense, Matrix, TrainConfig, accuracy, softmax};
use crate::rng::{Rng, derive_seed, streams};
use crate::synth::{Modality, SplitSpec, SyntheticDataset};

/// Hidden width of stand-alone uni-modal models.
pub const UNI_HIDDEN: usize = 100;

/// Train and test rows of a dataset under one split.
#[derive(Clone, Debug)]
pub struct DataView {
    pub x1_train: Matrix,
    pub x2_train: Matrix,
    pub y_train: Vec<usize>,
    pub x1_test: Matrix,
    pub x2_test: Matrix,
    pub y_test: Vec<usize>,
    pub n_classes: usize,
    pub data_ref: DataRef,
}

impl DataView {
    /// Gathers rows; fails if any training row is a test row.
    pub fn new(ds: &SyntheticDataset, split: &SplitSpec) -> Result<Self> {
        split.validate()?;
        if split.n != ds.len() {
            return Err(Error::Invariant(format!(
                "split over {} rows used with a {}-row dataset",
                split.n,
                ds.len()
            )));
        }
        let train = split.train_indices();
        if let Some(&i) = train.iter().find(|&&i| split.is_test(i)) {
            return Err(Error::Invariant(format!("test row {i} in training set")));
        }
        if train.len() + split.n_test() != ds.len() {
            return Err(Error::Invariant("train and test rows do not cover the dataset".into()));
        }
        let test = &split.test_indices;
        let pick = |idx: &[usize]| idx.iter().map(|&i| ds.labels[i]).collect::<Vec<_>>();
        Ok(Self {
            x1_train: ds.x1.gather_rows(&train)?,
            x2_train: ds.x2.gather_rows(&train)?,
            y_train: pick(&train),
            x1_test: ds.x1.gather_rows(test)?,
            x2_test: ds.x2.gather_rows(test)?,
            y_test: pick(test),
            n_classes: ds.n_classes,
            data_ref: DataRef::new(ds, split),
        })
    }

    pub fn train(&self, m: Modality) -> &Matrix {
        match m {
            Modality::One => &self.x1_train,
            Modality::Two => &self.x2_train,
        }
    }

    pub fn test(&self, m: Modality) -> &Matrix {
        match m {
            Modality::One => &self.x1_test,
            Modality::Two => &self.x2_test,
        }
    }
}

fn init_rng(cfg: &TrainConfig) -> Rng {
    Rng::new(derive_seed(cfg.seed, streams::INIT))
}

pub fn train_unimodal(view: &DataView, modality: Modality, hidden: usize, cfg: &TrainConfig) -> Result<ModelBundle> {
    if hidden == 0 {
        return Err(Error::InvalidArgument("hidden width must be > 0".into()));
    }
    let x = view.train(modality);
    let net = UniNet::new(x.cols(), hidden, view.n_classes, &mut init_rng(cfg));
    let mut obj = UniObjective::new(net, x.clone(), view.y_train.clone())?;
    let log = fit(&mut obj, cfg)?;
    let net = obj.net;
    let metrics = Metrics {
        train_acc: accuracy(&net.logits(x)?, &view.y_train),
        test_acc: accuracy(&net.logits(view.test(modality))?, &view.y_test),
    };
    let model = Model::Uni { modality, net };
    Ok(ModelBundle::new(
        Strategy::Unimodal,
        &model,
        cfg,
        json!({ "modality": modality.index(), "hidden": hidden }),
        Some(view.data_ref.clone()),
        metrics,
        log,
    ))
}

fn fusion_metrics(net: &FusionNet, view: &DataView) -> Result<Metrics> {
    Ok(Metrics {
        train_acc: accuracy(&net.logits(&view.x1_train, &view.x2_train)?, &view.y_train),
        test_acc: accuracy(&net.logits(&view.x1_test, &view.x2_test)?, &view.y_test),
    })
}

fn fusion_objective(view: &DataView, arch: FusionArch, aux: bool, weights: LossWeights, cfg: &TrainConfig) -> Result<FusionObjective> {
    let net = FusionNet::new(
        arch,
        view.x1_train.cols(),
        view.x2_train.cols(),
        view.n_classes,
        aux,
        &mut init_rng(cfg),
    )?;
    FusionObjective::new(
        net,
        view.x1_train.clone(),
        view.x2_train.clone(),
        view.y_train.clone(),
        weights,
    )
}

fn finish_fusion(
    strategy: Strategy,
    mut obj: FusionObjective,
    view: &DataView,
    cfg: &TrainConfig,
    strategy_config: serde_json::Value,
) -> Result<ModelBundle> {
    let log = fit(&mut obj, cfg)?;
    let metrics = fusion_metrics(&obj.net, view)?;
    Ok(ModelBundle::new(
        strategy,
        &Model::Fusion(obj.net),
        cfg,
        strategy_config,
        Some(view.data_ref.clone()),
        metrics,
        log,
    ))
}

/// End-to-end late fusion trained on cross-entropy alone.
pub fn train_naive_fusion(view: &DataView, arch: FusionArch, cfg: &TrainConfig) -> Result<ModelBundle> {
    let obj = fusion_objective(view, arch, false, LossWeights::default(), cfg)?;
    finish_fusion(Strategy::NaiveFusion, obj, view, cfg, json!({ "arch": arch }))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UmtConfig {
    pub lambda_task: f64,
    pub lambda_distill: f64,
}

impl Default for UmtConfig {
    fn default() -> Self {
        Self {
            lambda_task: 1.0,
            lambda_distill: 50.0,
        }
    }
}

/// Uni-modal teachers whose hidden width matches the student taps, seeded
/// from the teacher streams of `cfg.seed`.
pub fn train_teachers(view: &DataView, arch: FusionArch, cfg: &TrainConfig) -> Result<[ModelBundle; 2]> {
    let t = |m: Modality, stream| {
        let c = TrainConfig {
            seed: derive_seed(cfg.seed, stream),
            ..cfg.clone()
        };
        train_unimodal(view, m, arch.enc_hidden, &c)
    };
    Ok([t(Modality::One, streams::TEACHER1)?, t(Modality::Two, streams::TEACHER2)?])
}

/// Late fusion with each encoder tap regressed onto a frozen uni-modal
/// teacher's features.
pub fn train_umt(
    view: &DataView,
    arch: FusionArch,
    umt: UmtConfig,
    teachers: &[ModelBundle; 2],
    cfg: &TrainConfig,
) -> Result<ModelBundle> {
    let weights = LossWeights {
        task: umt.lambda_task,
        distill: umt.lambda_distill,
        aux: 0.0,
    };
    let mut obj = fusion_objective(view, arch, false, weights, cfg)?;
    let mut targets = Vec::with_capacity(2);
    for (bundle, m) in teachers.iter().zip([Modality::One, Modality::Two]) {
        let (tm, net) = bundle.uni()?;
        if tm != m {
            return Err(Error::InvalidArgument(format!(
                "teacher {} was trained on modality {}",
                m.index(),
                tm.index()
            )));
        }
        if net.hidden_dim() != arch.enc_hidden {
            return Err(Error::shape(
                "train_umt",
                format!("teacher width {} vs student tap width {}", net.hidden_dim(), arch.enc_hidden),
            ));
        }
        if let Some(d) = &bundle.data
            && d.split_digest != view.data_ref.split_digest
        {
            return Err(Error::InvalidArgument("teacher trained on a different split".into()));
        }
        targets.push(net.features(view.train(m))?);
    }
    let t2 = targets.pop().expect("two teachers");
    let t1 = targets.pop().expect("two teachers");
    obj = obj.with_teacher(t1, t2)?;
    finish_fusion(
        Strategy::Umt,
        obj,
        view,
        cfg,
        json!({ "arch": arch, "umt": umt, "teacher_digests": [teachers[0].params_digest, teachers[1].params_digest] }),
    )
}

/// Late fusion plus one linear cross-entropy head per encoder, all three
/// losses weighted equally.
pub fn train_aux_ce(view: &DataView, arch: FusionArch, cfg: &TrainConfig) -> Result<ModelBundle> {
    let weights = LossWeights {
        aux: 1.0,
        ..LossWeights::default()
    };
    let obj = fusion_objective(view, arch, true, weights, cfg)?;
    finish_fusion(Strategy::AuxCe, obj, view, cfg, json!({ "arch": arch, "weights": weights }))
}

pub const DEFAULT_DROP_PROB: f64 = 1.0 / 3.0;

/// Late fusion where each iteration may zero one modality's encoder output.
pub fn train_modality_dropout(
    view: &DataView,
    arch: FusionArch,
    prob: f64,
    mode: DropMode,
    cfg: &TrainConfig,
) -> Result<ModelBundle> {
    let sampler = DropoutSampler::new(prob, mode, derive_seed(cfg.seed, streams::DROPOUT))?;
    let mut obj = fusion_objective(view, arch, false, LossWeights::default(), cfg)?.with_dropout(sampler);
    let log = fit(&mut obj, cfg)?;
    let freq = obj.dropout.as_ref().map(DropoutSampler::frequencies).unwrap_or_default();
    let metrics = fusion_metrics(&obj.net, view)?;
    Ok(ModelBundle::new(
        Strategy::ModalityDropout,
        &Model::Fusion(obj.net),
        cfg,
        json!({ "arch": arch, "drop_prob": prob, "mode": mode, "drop_frequency": freq }),
        Some(view.data_ref.clone()),
        metrics,
        log,
    ))
}

/// Weighted average of the two models' softmax outputs, then argmax.
pub fn ume_predict(m1: &UniNet, m2: &UniNet, x1: &Matrix, x2: &Matrix, weights: (f64, f64)) -> Result<Vec<usize>> {
    if m1.classes() != m2.classes() {
        return Err(Error::shape(
            "ume_predict",
            format!("{} vs {} classes", m1.classes(), m2.classes()),
        ));
    }
    let (w1, w2) = weights;
    let total = w1 + w2;
    if w1 < 0.0 || w2 < 0.0 || !(total > 0.0 && total.is_finite()) {
        return Err(Error::InvalidArgument(format!("bad ensemble weights {weights:?}")));
    }
    let (w1, w2) = (w1 / total, w2 / total);
    let p1 = softmax(&m1.logits(x1)?);
    let p2 = softmax(&m2.logits(x2)?);
    if p1.rows() != p2.rows() {
        return Err(Error::shape("ume_predict", format!("{} vs {} rows", p1.rows(), p2.rows())));
    }
    let avg = Matrix::<f64>::from_fn(p1.rows(), p1.cols(), |r, c| {
        w1 * p1.get(r, c) as f64 + w2 * p2.get(r, c) as f64
    });
    Ok(avg.argmax_rows())
}

/// Splits a linear classifier over `[f1, f2]` into per-block classifiers
/// that each keep the full bias.
pub fn split_mm_classifier(head: &Dense, dim1: usize) -> Result<(Dense, Dense)> {
    let w = &head.weight;
    if dim1 == 0 || dim1 >= w.cols() {
        return Err(Error::shape(
            "split_mm_classifier",
            format!("block boundary {dim1} for input width {}", w.cols()),
        ));
    }
    let c1 = Dense::from_params(w.columns(0, dim1)?, head.bias.clone())?;
    let c2 = Dense::from_params(w.columns(dim1, w.cols())?, head.bias.clone())?;
    Ok((c1, c2))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Recommendation {
    Umt,
    Ume,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecisionReport {
    pub recommendation: Recommendation,
    /// Test accuracy of the linear classifier over both frozen encoders.
    pub mm_clf_acc: f64,
    /// Test accuracy of averaging the uni-modal predictions.
    pub avg_pred_acc: f64,
    pub uni_test_acc: [f64; 2],
    /// Test accuracy of each half of the split classifier.
    pub split_clf_acc: [f64; 2],
    pub warning: Option<String>,
    #[serde(skip)]
    pub classifier: Option<ModelBundle>,
    #[serde(skip)]
    pub uni_models: Option<[ModelBundle; 2]>,
}

/// Trains uni-modal models, fits a linear classifier on their concatenated
/// frozen features and recommends UMT only if it strictly beats UME.
pub fn decision_trick(view: &DataView, hidden: usize, cfg: &TrainConfig) -> Result<DecisionReport> {
    let bundles = train_teachers(
        view,
        FusionArch {
            enc_hidden: hidden,
            ..FusionArch::default()
        },
        cfg,
    )?;
    let (_, u1) = bundles[0].uni()?;
    let (_, u2) = bundles[1].uni()?;
    let f_train = u1.features(&view.x1_train)?.hcat(&u2.features(&view.x2_train)?)?;
    let f_test1 = u1.features(&view.x1_test)?;
    let f_test2 = u2.features(&view.x2_test)?;
    let f_test = f_test1.hcat(&f_test2)?;

    let probe_cfg = TrainConfig {
        seed: derive_seed(cfg.seed, streams::PROBE),
        ..cfg.clone()
    };
    let layer = Dense::glorot(f_train.cols(), view.n_classes, &mut init_rng(&probe_cfg));
    let mut obj = LinearObjective::new(layer, f_train.clone(), view.y_train.clone())?;
    let log = fit(&mut obj, &probe_cfg)?;
    let head = obj.layer;
    let mm_clf_acc = accuracy(&head.apply(&f_test)?, &view.y_test);
    let (c1, c2) = split_mm_classifier(&head, hidden)?;
    let split_clf_acc = [
        accuracy(&c1.apply(&f_test1)?, &view.y_test),
        accuracy(&c2.apply(&f_test2)?, &view.y_test),
    ];

    let preds = ume_predict(&u1, &u2, &view.x1_test, &view.x2_test, (0.5, 0.5))?;
    let hits = preds.iter().zip(&view.y_test).filter(|(p, y)| p == y).count();
    let avg_pred_acc = hits as f64 / view.y_test.len().max(1) as f64;

    let distinct = {
        let mut seen = vec![false; view.n_classes];
        view.y_train.iter().for_each(|&y| seen[y] = true);
        seen.iter().filter(|&&s| s).count()
    };
    let warning = (distinct < 2).then(|| {
        log::warn!("training labels contain a single class; the comparison is degenerate");
        "single-class training data".to_string()
    });
    let recommendation = if mm_clf_acc > avg_pred_acc {
        Recommendation::Umt
    } else {
        Recommendation::Ume
    };
    let metrics = Metrics {
        train_acc: accuracy(&head.apply(&f_train)?, &view.y_train),
        test_acc: mm_clf_acc,
    };
    let classifier = ModelBundle::new(
        Strategy::DecisionClassifier,
        &Model::Linear(head),
        &probe_cfg,
        json!({ "hidden": hidden, "uni_digests": [bundles[0].params_digest, bundles[1].params_digest] }),
        Some(view.data_ref.clone()),
        metrics,
        log,
    );
    Ok(DecisionReport {
        recommendation,
        mm_clf_acc,
        avg_pred_acc,
        uni_test_acc: [bundles[0].metrics.test_acc, bundles[1].metrics.test_acc],
        split_clf_acc,
        warning,
        classifier: Some(classifier),
        uni_models: Some(bundles),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Objective;
    use crate::synth::{GenConfig, Variant, generate, split};
    use crate::train::ModelBundle;

    fn small_view(variant: Variant, n: usize, seed: u64) -> DataView {
        let cfg = GenConfig {
            n,
            ..GenConfig::new(variant, seed)
        };
        let (ds, _) = generate(&cfg).unwrap();
        let sp = split(ds.len(), 0.8, derive_seed(seed, streams::SPLIT)).unwrap();
        DataView::new(&ds, &sp).unwrap()
    }

    fn quick(seed: u64, iters: usize) -> TrainConfig {
        TrainConfig {
            max_iters: iters,
            ..TrainConfig::with_seed(seed)
        }
    }

    fn small_arch() -> FusionArch {
        FusionArch {
            enc_hidden: 16,
            head_hidden: 16,
            ..FusionArch::default()
        }
    }

    #[test]
    fn umt_without_distillation_is_naive_fusion() {
        let view = small_view(Variant::Beta, 300, 1);
        let cfg = quick(4, 40);
        let naive = train_naive_fusion(&view, small_arch(), &cfg).unwrap();
        let teachers = train_teachers(&view, small_arch(), &quick(4, 10)).unwrap();
        let umt = UmtConfig {
            lambda_task: 1.0,
            lambda_distill: 0.0,
        };
        let student = train_umt(&view, small_arch(), umt, &teachers, &cfg).unwrap();
        assert_eq!(student.params_digest, naive.params_digest);
        assert_eq!(student.log.loss_curve, naive.log.loss_curve);
    }

    #[test]
    fn zero_drop_probability_is_naive_fusion() {
        let view = small_view(Variant::Alpha, 200, 2);
        let cfg = quick(1, 30);
        let naive = train_naive_fusion(&view, small_arch(), &cfg).unwrap();
        let drop = train_modality_dropout(&view, small_arch(), 0.0, DropMode::OneOf, &cfg).unwrap();
        assert_eq!(drop.params_digest, naive.params_digest);
    }

    #[test]
    fn drop_frequency_per_modality_is_a_sixth() {
        let mut s = DropoutSampler::new(DEFAULT_DROP_PROB, DropMode::OneOf, 11).unwrap();
        for _ in 0..100_000 {
            let m = s.sample();
            assert!(!(m[0] && m[1]));
        }
        for f in s.frequencies() {
            assert!((f - 1.0 / 6.0).abs() < 0.01, "{f}");
        }
        assert!(DropoutSampler::new(1.0, DropMode::OneOf, 0).is_err());
        assert!(DropoutSampler::new(-0.1, DropMode::OneOf, 0).is_err());
    }

    #[test]
    fn dropped_modality_matches_zeroed_encoder() {
        let view = small_view(Variant::Alpha, 100, 3);
        let net = FusionNet::new(small_arch(), view.x1_train.cols(), view.x2_train.cols(), 2, false, &mut Rng::new(0))
            .unwrap();
        let mut zeroed = net.clone();
        zeroed.enc1.weight.fill(0.0);
        zeroed.enc1.bias.fill(0.0);
        let a = net.predict(&view.x1_test, &view.x2_test, [true, false]).unwrap();
        let b = zeroed.predict(&view.x1_test, &view.x2_test, crate::train::NO_DROP).unwrap();
        assert_eq!(a.logits, b.logits);
        assert_eq!(a.taps[1], b.taps[1]);
    }

    #[test]
    fn aux_loss_parts_sum_to_total() {
        let view = small_view(Variant::Beta, 200, 5);
        let b = train_aux_ce(&view, small_arch(), &quick(0, 20)).unwrap();
        for p in &b.log.loss_curve {
            let parts = p.parts;
            assert!((parts.task + parts.aux + parts.distill - parts.total).abs() < 1e-6);
            assert!(parts.aux > 0.0);
        }
    }

    #[test]
    fn umt_regression_limit_matches_teachers() {
        let view = small_view(Variant::Beta, 200, 6);
        let teachers = train_teachers(&view, small_arch(), &quick(6, 50)).unwrap();
        let umt = UmtConfig {
            lambda_task: 0.0,
            lambda_distill: 50.0,
        };
        let b = train_umt(&view, small_arch(), umt, &teachers, &quick(6, 1500)).unwrap();
        let first = b.log.first_parts().unwrap().distill;
        let last = b.log.last_parts().unwrap().distill;
        assert!(last < 0.01 * first, "{first} -> {last}");
    }

    #[test]
    fn umt_loss_does_not_rise_for_small_steps() {
        let view = small_view(Variant::Beta, 150, 7);
        let teachers = train_teachers(&view, small_arch(), &quick(7, 20)).unwrap();
        let net = FusionNet::new(small_arch(), view.x1_train.cols(), view.x2_train.cols(), 2, false, &mut Rng::new(3))
            .unwrap();
        let weights = LossWeights {
            task: 1.0,
            distill: 50.0,
            aux: 0.0,
        };
        let (_, u1) = teachers[0].uni().unwrap();
        let (_, u2) = teachers[1].uni().unwrap();
        let mut obj = FusionObjective::new(net, view.x1_train.clone(), view.x2_train.clone(), view.y_train.clone(), weights)
            .unwrap()
            .with_teacher(u1.features(&view.x1_train).unwrap(), u2.features(&view.x2_train).unwrap())
            .unwrap();
        for _ in 0..20 {
            let before = obj.loss_and_grad().unwrap();
            obj.sgd(1e-4).unwrap();
            assert!(obj.loss().unwrap() <= before + 1e-7);
        }
    }

    #[test]
    fn teacher_width_must_match() {
        let view = small_view(Variant::Alpha, 100, 8);
        let teachers = train_teachers(&view, small_arch(), &quick(0, 2)).unwrap();
        let wide = FusionArch {
            enc_hidden: 32,
            ..small_arch()
        };
        assert!(train_umt(&view, wide, UmtConfig::default(), &teachers, &quick(0, 2)).is_err());
    }

    #[test]
    fn ume_of_identical_models_is_the_model() {
        let view = small_view(Variant::Alpha, 200, 9);
        let b = train_unimodal(&view, Modality::One, 8, &quick(0, 20)).unwrap();
        let (_, net) = b.uni().unwrap();
        let own = net.logits(&view.x1_test).unwrap().argmax_rows();
        let ume = ume_predict(&net, &net, &view.x1_test, &view.x1_test, (0.5, 0.5)).unwrap();
        assert_eq!(ume, own);
    }

    #[test]
    fn ume_weights() {
        let view = small_view(Variant::Beta, 200, 10);
        let a = train_unimodal(&view, Modality::One, 8, &quick(0, 30)).unwrap();
        let b = train_unimodal(&view, Modality::Two, 8, &quick(1, 30)).unwrap();
        let (_, na) = a.uni().unwrap();
        let (_, nb) = b.uni().unwrap();
        let (x1, x2) = (&view.x1_test, &view.x2_test);
        let only_a = ume_predict(&na, &nb, x1, x2, (1.0, 0.0)).unwrap();
        assert_eq!(only_a, na.logits(x1).unwrap().argmax_rows());
        let base = ume_predict(&na, &nb, x1, x2, (0.3, 0.7)).unwrap();
        assert_eq!(ume_predict(&na, &nb, x1, x2, (3.0, 7.0)).unwrap(), base);
        assert!(ume_predict(&na, &nb, x1, x2, (0.0, 0.0)).is_err());
        assert!(ume_predict(&na, &nb, x1, x2, (-1.0, 2.0)).is_err());
    }

    #[test]
    fn split_classifier_reconstructs_logits() {
        let mut rng = Rng::new(12);
        let head = Dense::<f32>::glorot(10, 3, &mut rng);
        let mut head = head;
        head.bias = Matrix::from_fn(1, 3, |_, _| rng.normal() as f32);
        let f = Matrix::<f32>::from_fn(40, 10, |_, _| rng.normal() as f32);
        let (c1, c2) = split_mm_classifier(&head, 4).unwrap();
        let full = head.apply(&f).unwrap();
        let l1 = c1.apply(&f.columns(0, 4).unwrap()).unwrap();
        let l2 = c2.apply(&f.columns(4, 10).unwrap()).unwrap();
        for r in 0..40 {
            for c in 0..3 {
                let rebuilt = l1.get(r, c) + l2.get(r, c) - head.bias.get(0, c);
                assert!((rebuilt - full.get(r, c)).abs() < 1e-5);
            }
        }
        assert!(split_mm_classifier(&head, 0).is_err());
        assert!(split_mm_classifier(&head, 10).is_err());
    }

    #[test]
    fn inactive_block_leaves_accuracy_unchanged() {
        let mut rng = Rng::new(13);
        let head = Dense::<f32>::glorot(6, 3, &mut rng);
        let f = Matrix::<f32>::from_fn(50, 6, |_, c| if c < 3 { rng.normal() as f32 } else { 0.0 });
        let y: Vec<usize> = (0..50).map(|i| i % 3).collect();
        let (c1, _) = split_mm_classifier(&head, 3).unwrap();
        assert_eq!(
            accuracy(&c1.apply(&f.columns(0, 3).unwrap()).unwrap(), &y),
            accuracy(&head.apply(&f).unwrap(), &y)
        );
    }

    #[test]
    fn decision_trick_single_class_warns() {
        let mut view = small_view(Variant::Alpha, 100, 14);
        view.y_train.iter_mut().for_each(|y| *y = 0);
        view.y_test.iter_mut().for_each(|y| *y = 0);
        let r = decision_trick(&view, 8, &quick(0, 20)).unwrap();
        assert!(r.warning.is_some());
        assert_eq!(r.recommendation, Recommendation::Ume);
    }

    #[test]
    fn bundles_roundtrip_through_disk() {
        let view = small_view(Variant::Alpha, 100, 15);
        let b = train_naive_fusion(&view, small_arch(), &quick(0, 5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        b.save(&path).unwrap();
        let back = ModelBundle::load(&path).unwrap();
        assert_eq!(back.params_digest, b.params_digest);
        let (n1, n2) = (b.fusion().unwrap(), back.fusion().unwrap());
        assert_eq!(
            n1.logits(&view.x1_test, &view.x2_test).unwrap(),
            n2.logits(&view.x1_test, &view.x2_test).unwrap()
        );
    }

    #[test]
    fn view_has_no_leakage() {
        let cfg = GenConfig {
            n: 50,
            ..GenConfig::new(Variant::Alpha, 0)
        };
        let (ds, _) = generate(&cfg).unwrap();
        let mut sp = split(ds.len(), 0.8, 0).unwrap();
        sp.test_indices.push(sp.test_indices[0]);
        assert!(DataView::new(&ds, &sp).is_err());
    }
}
