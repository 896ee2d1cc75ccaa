//! Self-describing JSON model bundles.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fit::TrainLog;
use super::model::{FusionArch, FusionNet, Head, HeadKind, UniNet};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::nn::serialize::{TensorBlock, decode_dense, encode_dense, params_digest};
use crate::nn::{Dense, Matrix, TrainConfig};
use crate::synth::{Modality, SplitSpec, SyntheticDataset, Variant};

pub const BUNDLE_FORMAT: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Unimodal,
    NaiveFusion,
    Umt,
    AuxCe,
    ModalityDropout,
    Probe,
    DecisionClassifier,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Unimodal => "unimodal",
            Strategy::NaiveFusion => "naive_fusion",
            Strategy::Umt => "umt",
            Strategy::AuxCe => "aux_ce",
            Strategy::ModalityDropout => "modality_dropout",
            Strategy::Probe => "probe",
            Strategy::DecisionClassifier => "decision_classifier",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Unimodal {
        modality: usize,
        input: usize,
        hidden: usize,
        classes: usize,
    },
    Fusion {
        arch: FusionArch,
        d1: usize,
        d2: usize,
        classes: usize,
        aux: bool,
    },
    Linear {
        input: usize,
        classes: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub input: usize,
    pub output: usize,
    pub activation: String,
}

/// Runtime form of a bundle's parameters.
#[derive(Clone, Debug)]
pub enum Model {
    Uni { modality: Modality, net: UniNet },
    Fusion(FusionNet),
    Linear(Dense),
}

impl Model {
    fn named_layers(&self) -> Vec<(String, &Dense, &'static str)> {
        match self {
            Model::Uni { net, .. } => vec![
                ("enc".into(), &net.enc, "relu"),
                ("head".into(), &net.head, "none"),
            ],
            Model::Fusion(net) => {
                let sum = net.arch.fusion == super::model::FusionKind::Sum;
                net.layers()
                    .into_iter()
                    .map(|(name, l)| {
                        let act = match name {
                            "enc1" | "enc2" if sum => "sum_relu",
                            "enc1" | "enc2" | "head.hidden" => "relu",
                            _ => "none",
                        };
                        (name.to_string(), l, act)
                    })
                    .collect()
            }
            Model::Linear(l) => vec![("linear".into(), l, "none")],
        }
    }

    pub fn spec(&self) -> ModelSpec {
        match self {
            Model::Uni { modality, net } => ModelSpec::Unimodal {
                modality: modality.index(),
                input: net.input_dim(),
                hidden: net.hidden_dim(),
                classes: net.classes(),
            },
            Model::Fusion(net) => {
                let (d1, d2) = net.input_dims();
                ModelSpec::Fusion {
                    arch: net.arch,
                    d1,
                    d2,
                    classes: net.classes(),
                    aux: net.aux.is_some(),
                }
            }
            Model::Linear(l) => ModelSpec::Linear {
                input: l.input_dim(),
                classes: l.output_dim(),
            },
        }
    }

    pub fn params(&self) -> Vec<&Matrix<f32>> {
        match self {
            Model::Uni { net, .. } => net.params(),
            Model::Fusion(net) => net.params(),
            Model::Linear(l) => l.params().to_vec(),
        }
    }

    pub fn digest(&self) -> String {
        params_digest(self.params())
    }

    pub fn classes(&self) -> usize {
        match self {
            Model::Uni { net, .. } => net.classes(),
            Model::Fusion(net) => net.classes(),
            Model::Linear(l) => l.output_dim(),
        }
    }
}

/// Which data a bundle was trained on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataRef {
    pub variant: Variant,
    pub seed: u64,
    pub n: usize,
    pub n_test: usize,
    /// SHA-256 of the sorted test indices.
    pub split_digest: String,
}

impl DataRef {
    pub fn new(ds: &SyntheticDataset, split: &SplitSpec) -> Self {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for &i in &split.test_indices {
            h.update((i as u64).to_le_bytes());
        }
        Self {
            variant: ds.variant,
            seed: ds.seed,
            n: ds.len(),
            n_test: split.n_test(),
            split_digest: crate::nn::serialize::hex(&h.finalize()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub train_acc: f64,
    pub test_acc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format: u32,
    pub strategy: Strategy,
    pub spec: ModelSpec,
    pub arch: Vec<LayerSpec>,
    pub seed: u64,
    pub train_config: TrainConfig,
    /// Strategy-specific settings (loss weights, drop probability, ...).
    #[serde(default)]
    pub strategy_config: serde_json::Value,
    pub data: Option<DataRef>,
    pub params: Vec<TensorBlock>,
    pub params_digest: String,
    pub metrics: Metrics,
    pub log: TrainLog,
}

impl ModelBundle {
    pub fn new(
        strategy: Strategy,
        model: &Model,
        train_config: &TrainConfig,
        strategy_config: serde_json::Value,
        data: Option<DataRef>,
        metrics: Metrics,
        log: TrainLog,
    ) -> Self {
        let layers = model.named_layers();
        let arch = layers
            .iter()
            .map(|(name, l, act)| LayerSpec {
                name: name.clone(),
                input: l.input_dim(),
                output: l.output_dim(),
                activation: act.to_string(),
            })
            .collect();
        let params = layers.iter().flat_map(|(name, l, _)| encode_dense(name, l)).collect();
        Self {
            format: BUNDLE_FORMAT,
            strategy,
            spec: model.spec(),
            arch,
            seed: train_config.seed,
            train_config: train_config.clone(),
            strategy_config,
            data,
            params,
            params_digest: model.digest(),
            metrics,
            log,
        }
    }

    /// Rebuilds the network and checks it against the stored digest.
    pub fn model(&self) -> Result<Model> {
        if self.format != BUNDLE_FORMAT {
            return Err(Error::UnsupportedVersion(self.format));
        }
        let p = &self.params;
        let model = match &self.spec {
            ModelSpec::Unimodal { modality, .. } => Model::Uni {
                modality: Modality::from_index(*modality)?,
                net: UniNet::from_layers(decode_dense("enc", p)?, decode_dense("head", p)?)?,
            },
            ModelSpec::Fusion { arch, aux, .. } => {
                let head = match arch.head {
                    HeadKind::Linear => Head::Linear(decode_dense("head", p)?),
                    HeadKind::Mlp => Head::mlp(decode_dense("head.hidden", p)?, decode_dense("head.out", p)?),
                };
                let aux = if *aux {
                    Some([decode_dense("aux1", p)?, decode_dense("aux2", p)?])
                } else {
                    None
                };
                Model::Fusion(FusionNet::from_layers(
                    *arch,
                    decode_dense("enc1", p)?,
                    decode_dense("enc2", p)?,
                    head,
                    aux,
                )?)
            }
            ModelSpec::Linear { .. } => Model::Linear(decode_dense("linear", p)?),
        };
        if model.spec() != self.spec {
            return Err(Error::Decode("parameters do not match the declared spec".into()));
        }
        if model.digest() != self.params_digest {
            return Err(Error::Decode("parameter digest mismatch".into()));
        }
        Ok(model)
    }

    pub fn uni(&self) -> Result<(Modality, UniNet)> {
        match self.model()? {
            Model::Uni { modality, net } => Ok((modality, net)),
            _ => Err(Error::InvalidArgument(format!(
                "{} bundle is not a uni-modal model",
                self.strategy.name()
            ))),
        }
    }

    pub fn fusion(&self) -> Result<FusionNet> {
        match self.model()? {
            Model::Fusion(net) => Ok(net),
            _ => Err(Error::InvalidArgument(format!(
                "{} bundle is not a fusion model",
                self.strategy.name()
            ))),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let b: Self = fsutil::read_json(path)?;
        b.model()?;
        Ok(b)
    }
}
