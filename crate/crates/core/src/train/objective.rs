//! Training objectives binding a network to its (train-split) data.

use serde::{Deserialize, Serialize};

use super::model::{FusionGrads, FusionNet, NO_DROP, UniNet};
use crate::error::{Error, Result};
use crate::nn::{Dense, Matrix, Objective, Scalar, Shadowed, accuracy, mse, softmax_xent};
use crate::rng::Rng;

/// Weighted loss contributions of one evaluation; `total` is their sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub task: f64,
    pub distill: f64,
    pub aux: f64,
}

/// An `f32` objective the generic training loop can drive.
pub trait Trainable: Objective<f32> {
    /// Called once before each iteration's `loss_and_grad`.
    fn begin_iteration(&mut self) {}

    /// Training accuracy of the last forward pass.
    fn last_accuracy(&self) -> f64;

    fn last_parts(&self) -> LossParts;
}

fn check_rows<T: Scalar>(what: &'static str, x: &Matrix<T>, labels: &[usize]) -> Result<()> {
    if x.rows() != labels.len() {
        return Err(Error::shape(what, format!("{} rows, {} labels", x.rows(), labels.len())));
    }
    Ok(())
}

/// Cross-entropy of a uni-modal MLP.
#[derive(Clone, Debug)]
pub struct UniObjective<T: Scalar = f32> {
    pub net: UniNet<T>,
    x: Matrix<T>,
    labels: Vec<usize>,
    acc: f64,
    parts: LossParts,
}

impl<T: Scalar> UniObjective<T> {
    pub fn new(net: UniNet<T>, x: Matrix<T>, labels: Vec<usize>) -> Result<Self> {
        check_rows("UniObjective", &x, &labels)?;
        Ok(Self {
            net,
            x,
            labels,
            acc: 0.0,
            parts: LossParts::default(),
        })
    }

    fn eval(&mut self, grad: bool) -> Result<f64> {
        let logits = self.net.forward(&self.x)?;
        let (loss, g) = softmax_xent(&logits, &self.labels)?;
        self.acc = accuracy(&logits, &self.labels);
        self.parts = LossParts {
            total: loss,
            task: loss,
            ..LossParts::default()
        };
        if grad {
            self.net.backward(&g)?;
        }
        Ok(loss)
    }
}

impl<T: Scalar> Objective<T> for UniObjective<T> {
    fn loss_and_grad(&mut self) -> Result<f64> {
        self.eval(true)
    }

    fn loss(&mut self) -> Result<f64> {
        self.eval(false)
    }

    fn visit(&mut self, f: &mut dyn FnMut(&mut Matrix<T>, &Matrix<T>)) {
        self.net.visit(f);
    }

    fn activation_signature(&self) -> u64 {
        self.net.signature()
    }
}

impl Shadowed for UniObjective<f32> {
    type Shadow = UniObjective<f64>;

    fn shadow(&self) -> UniObjective<f64> {
        UniObjective::new(self.net.cast(), self.x.cast(), self.labels.clone()).expect("same shapes")
    }
}

impl Trainable for UniObjective<f32> {
    fn last_accuracy(&self) -> f64 {
        self.acc
    }

    fn last_parts(&self) -> LossParts {
        self.parts
    }
}

/// Softmax regression on fixed features.
#[derive(Clone, Debug)]
pub struct LinearObjective<T: Scalar = f32> {
    pub layer: Dense<T>,
    x: Matrix<T>,
    labels: Vec<usize>,
    acc: f64,
    parts: LossParts,
}

impl<T: Scalar> LinearObjective<T> {
    pub fn new(layer: Dense<T>, x: Matrix<T>, labels: Vec<usize>) -> Result<Self> {
        check_rows("LinearObjective", &x, &labels)?;
        Ok(Self {
            layer,
            x,
            labels,
            acc: 0.0,
            parts: LossParts::default(),
        })
    }

    fn eval(&mut self, grad: bool) -> Result<f64> {
        let logits = self.layer.forward(&self.x)?;
        let (loss, g) = softmax_xent(&logits, &self.labels)?;
        self.acc = accuracy(&logits, &self.labels);
        self.parts = LossParts {
            total: loss,
            task: loss,
            ..LossParts::default()
        };
        if grad {
            self.layer.backward(&g, false)?;
        }
        Ok(loss)
    }
}

impl<T: Scalar> Objective<T> for LinearObjective<T> {
    fn loss_and_grad(&mut self) -> Result<f64> {
        self.eval(true)
    }

    fn loss(&mut self) -> Result<f64> {
        self.eval(false)
    }

    fn visit(&mut self, f: &mut dyn FnMut(&mut Matrix<T>, &Matrix<T>)) {
        self.layer.visit(f);
    }
}

impl Shadowed for LinearObjective<f32> {
    type Shadow = LinearObjective<f64>;

    fn shadow(&self) -> LinearObjective<f64> {
        LinearObjective::new(self.layer.cast(), self.x.cast(), self.labels.clone()).expect("same shapes")
    }
}

impl Trainable for LinearObjective<f32> {
    fn last_accuracy(&self) -> f64 {
        self.acc
    }

    fn last_parts(&self) -> LossParts {
        self.parts
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub task: f64,
    pub distill: f64,
    pub aux: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            task: 1.0,
            distill: 0.0,
            aux: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropMode {
    /// With probability `p` one modality, chosen uniformly, is dropped.
    #[default]
    OneOf,
    /// Each modality is dropped independently with probability `p`.
    Independent,
}

/// Per-iteration modality-dropout draws.
#[derive(Clone, Debug)]
pub struct DropoutSampler {
    rng: Rng,
    pub prob: f64,
    pub mode: DropMode,
    pub iterations: u64,
    pub drops: [u64; 2],
}

impl DropoutSampler {
    pub fn new(prob: f64, mode: DropMode, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&prob) {
            return Err(Error::InvalidArgument(format!("drop probability must be in [0, 1), got {prob}")));
        }
        Ok(Self {
            rng: Rng::new(seed),
            prob,
            mode,
            iterations: 0,
            drops: [0, 0],
        })
    }

    pub fn sample(&mut self) -> [bool; 2] {
        self.iterations += 1;
        let mask = match self.mode {
            DropMode::OneOf => {
                let mut m = NO_DROP;
                if self.rng.bernoulli(self.prob) {
                    m[self.rng.below(2) as usize] = true;
                }
                m
            }
            DropMode::Independent => [self.rng.bernoulli(self.prob), self.rng.bernoulli(self.prob)],
        };
        for (c, d) in self.drops.iter_mut().zip(mask) {
            *c += u64::from(d);
        }
        mask
    }

    pub fn frequencies(&self) -> [f64; 2] {
        let n = self.iterations.max(1) as f64;
        [self.drops[0] as f64 / n, self.drops[1] as f64 / n]
    }
}

/// Late-fusion cross-entropy plus optional tap distillation and auxiliary
/// uni-modal cross-entropy terms.
#[derive(Clone, Debug)]
pub struct FusionObjective<T: Scalar = f32> {
    pub net: FusionNet<T>,
    x1: Matrix<T>,
    x2: Matrix<T>,
    labels: Vec<usize>,
    pub weights: LossWeights,
    teacher: Option<[Matrix<T>; 2]>,
    /// Mask for the next evaluation; resampled each iteration when a
    /// dropout sampler is attached.
    pub dropped: [bool; 2],
    pub dropout: Option<DropoutSampler>,
    acc: f64,
    parts: LossParts,
}

impl<T: Scalar> FusionObjective<T> {
    pub fn new(net: FusionNet<T>, x1: Matrix<T>, x2: Matrix<T>, labels: Vec<usize>, weights: LossWeights) -> Result<Self> {
        check_rows("FusionObjective", &x1, &labels)?;
        check_rows("FusionObjective", &x2, &labels)?;
        let (d1, d2) = net.input_dims();
        if x1.cols() != d1 || x2.cols() != d2 {
            return Err(Error::shape(
                "FusionObjective",
                format!("inputs {}/{} for network {d1}/{d2}", x1.cols(), x2.cols()),
            ));
        }
        if weights.task < 0.0 || weights.distill < 0.0 || weights.aux < 0.0 {
            return Err(Error::InvalidArgument(format!("negative loss weight in {weights:?}")));
        }
        if weights.aux > 0.0 && net.aux.is_none() {
            return Err(Error::InvalidArgument("aux weight without aux heads".into()));
        }
        Ok(Self {
            net,
            x1,
            x2,
            labels,
            weights,
            teacher: None,
            dropped: NO_DROP,
            dropout: None,
            acc: 0.0,
            parts: LossParts::default(),
        })
    }

    /// Fixed distillation targets for the taps of each encoder.
    pub fn with_teacher(mut self, t1: Matrix<T>, t2: Matrix<T>) -> Result<Self> {
        let h = self.net.arch.enc_hidden;
        for t in [&t1, &t2] {
            if t.shape() != (self.labels.len(), h) {
                return Err(Error::shape(
                    "teacher taps",
                    format!("{:?}, student taps are ({}, {h})", t.shape(), self.labels.len()),
                ));
            }
        }
        self.teacher = Some([t1, t2]);
        Ok(self)
    }

    pub fn with_dropout(mut self, sampler: DropoutSampler) -> Self {
        self.dropout = Some(sampler);
        self
    }

    fn eval(&mut self, grad: bool) -> Result<f64> {
        let out = self.net.forward(&self.x1, &self.x2, self.dropped)?;
        let w = self.weights;
        let mut parts = LossParts::default();

        let (ce, mut g_logits) = softmax_xent(&out.logits, &self.labels)?;
        parts.task = w.task * ce;
        g_logits.scale(T::of_f64(w.task));

        let mut g_taps = None;
        if w.distill != 0.0
            && let Some([t1, t2]) = &self.teacher
        {
            let (l1, mut g1) = mse(&out.taps[0], t1)?;
            let (l2, mut g2) = mse(&out.taps[1], t2)?;
            parts.distill = w.distill * (l1 + l2);
            g1.scale(T::of_f64(w.distill));
            g2.scale(T::of_f64(w.distill));
            g_taps = Some([g1, g2]);
        }

        let mut g_aux = None;
        if w.aux != 0.0
            && let Some([a1, a2]) = &out.aux_logits
        {
            let (c1, mut g1) = softmax_xent(a1, &self.labels)?;
            let (c2, mut g2) = softmax_xent(a2, &self.labels)?;
            parts.aux = w.aux * (c1 + c2);
            g1.scale(T::of_f64(w.aux));
            g2.scale(T::of_f64(w.aux));
            g_aux = Some([g1, g2]);
        }

        parts.total = parts.task + parts.distill + parts.aux;
        self.parts = parts;
        self.acc = accuracy(&out.logits, &self.labels);
        if grad {
            self.net.backward(FusionGrads {
                logits: &g_logits,
                taps: g_taps.as_ref().map(|[a, b]| [a, b]),
                aux_logits: g_aux.as_ref().map(|[a, b]| [a, b]),
            })?;
        }
        Ok(parts.total)
    }
}

impl<T: Scalar> Objective<T> for FusionObjective<T> {
    fn loss_and_grad(&mut self) -> Result<f64> {
        self.eval(true)
    }

    fn loss(&mut self) -> Result<f64> {
        self.eval(false)
    }

    fn visit(&mut self, f: &mut dyn FnMut(&mut Matrix<T>, &Matrix<T>)) {
        self.net.visit(f);
    }

    fn activation_signature(&self) -> u64 {
        self.net.signature()
    }
}

impl Shadowed for FusionObjective<f32> {
    type Shadow = FusionObjective<f64>;

    fn shadow(&self) -> FusionObjective<f64> {
        let mut s = FusionObjective::new(
            self.net.cast(),
            self.x1.cast(),
            self.x2.cast(),
            self.labels.clone(),
            self.weights,
        )
        .expect("same shapes");
        s.teacher = self.teacher.as_ref().map(|[a, b]| [a.cast(), b.cast()]);
        s.dropped = self.dropped;
        s
    }
}

impl Trainable for FusionObjective<f32> {
    fn begin_iteration(&mut self) {
        if let Some(d) = &mut self.dropout {
            self.dropped = d.sample();
        }
    }

    fn last_accuracy(&self) -> f64 {
        self.acc
    }

    fn last_parts(&self) -> LossParts {
        self.parts
    }
}
