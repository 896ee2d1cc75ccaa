//! Uni-modal, late-fusion and fusion-with-tricks training on synthetic data.

pub mod bundle;
pub mod fit;
pub mod model;
pub mod objective;
pub mod strategies;

pub use bundle::{DataRef, Metrics, Model, ModelBundle, ModelSpec, Strategy};
pub use fit::{LossPoint, TrainLog, fit};
pub use model::{FusionArch, FusionKind, FusionNet, FusionOutput, Head, HeadKind, NO_DROP, UniNet};
pub use objective::{
    DropMode, DropoutSampler, FusionObjective, LinearObjective, LossParts, LossWeights, Trainable, UniObjective,
};
pub use strategies::{
    DEFAULT_DROP_PROB, DataView, DecisionReport, Recommendation, UNI_HIDDEN, UmtConfig, decision_trick,
    split_mm_classifier, train_aux_ce, train_modality_dropout, train_naive_fusion, train_teachers, train_umt,
    train_unimodal, ume_predict,
};
