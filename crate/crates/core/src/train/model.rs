//! Network definitions: uni-modal MLP, late-fusion network, linear classifier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::layers::relu_pattern_hash;
use crate::nn::{Dense, Matrix, Scalar, relu_backward, relu_forward};
use crate::rng::Rng;
use crate::synth::Modality;

/// `x -> ReLU(W1 x + b1) -> W2 h + b2`.
#[derive(Clone, Debug)]
pub struct UniNet<T: Scalar = f32> {
    pub enc: Dense<T>,
    pub head: Dense<T>,
    pre: Option<Matrix<T>>,
}

impl<T: Scalar> UniNet<T> {
    pub fn new(input: usize, hidden: usize, classes: usize, rng: &mut Rng) -> Self {
        let enc = Dense::glorot(input, hidden, rng);
        let head = Dense::glorot(hidden, classes, rng);
        Self::from_layers(enc, head).expect("consistent shapes")
    }

    pub fn from_layers(enc: Dense<T>, head: Dense<T>) -> Result<Self> {
        if enc.output_dim() != head.input_dim() {
            return Err(Error::shape(
                "UniNet",
                format!("encoder out {} vs head in {}", enc.output_dim(), head.input_dim()),
            ));
        }
        Ok(Self { enc, head, pre: None })
    }

    pub fn input_dim(&self) -> usize {
        self.enc.input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.enc.output_dim()
    }

    pub fn classes(&self) -> usize {
        self.head.output_dim()
    }

    /// Post-ReLU encoder output.
    pub fn features(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        Ok(relu_forward(&self.enc.apply(x)?))
    }

    pub fn logits(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.head.apply(&self.features(x)?)
    }

    pub fn forward(&mut self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let pre = self.enc.forward(x)?;
        let h = relu_forward(&pre);
        self.pre = Some(pre);
        self.head.forward(&h)
    }

    pub fn backward(&mut self, grad_logits: &Matrix<T>) -> Result<()> {
        let gh = self.head.backward(grad_logits, true)?.expect("input grad");
        let pre = self.pre.as_ref().expect("forward before backward");
        let ga = relu_backward(pre, &gh)?;
        self.enc.backward(&ga, false)?;
        Ok(())
    }

    pub fn signature(&self) -> u64 {
        let mut s = 0;
        if let Some(p) = &self.pre {
            relu_pattern_hash(p, &mut s);
        }
        s
    }

    pub fn visit(&mut self, f: &mut dyn FnMut(&mut Matrix<T>, &Matrix<T>)) {
        self.enc.visit(f);
        self.head.visit(f);
    }

    pub fn params(&self) -> Vec<&Matrix<T>> {
        let mut v = self.enc.params().to_vec();
        v.extend(self.head.params());
        v
    }

    pub fn cast<U: Scalar>(&self) -> UniNet<U> {
        UniNet::from_layers(self.enc.cast(), self.head.cast()).expect("consistent shapes")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionKind {
    /// `ReLU(enc1(x1) + enc2(x2))`: one hidden layer over both inputs.
    #[default]
    Sum,
    /// `[ReLU(enc1(x1)), ReLU(enc2(x2))]`.
    Concat,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    #[default]
    Linear,
    Mlp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionArch {
    pub fusion: FusionKind,
    /// Output width of each modality encoder.
    pub enc_hidden: usize,
    pub head: HeadKind,
    /// Hidden width of the MLP head; unused for a linear head.
    pub head_hidden: usize,
}

impl Default for FusionArch {
    fn default() -> Self {
        Self {
            fusion: FusionKind::Sum,
            enc_hidden: 100,
            head: HeadKind::Linear,
            head_hidden: 200,
        }
    }
}

impl FusionArch {
    pub fn concat(head: HeadKind) -> Self {
        Self {
            fusion: FusionKind::Concat,
            enc_hidden: 100,
            head,
            head_hidden: 200,
        }
    }

    pub fn fused_dim(&self) -> usize {
        match self.fusion {
            FusionKind::Sum => self.enc_hidden,
            FusionKind::Concat => 2 * self.enc_hidden,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.enc_hidden == 0 || (self.head == HeadKind::Mlp && self.head_hidden == 0) {
            return Err(Error::InvalidArgument(format!("zero width in {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub enum Head<T: Scalar = f32> {
    Linear(Dense<T>),
    Mlp {
        hidden: Dense<T>,
        out: Dense<T>,
        pre: Option<Matrix<T>>,
    },
}

impl<T: Scalar> Head<T> {
    fn new(kind: HeadKind, input: usize, hidden: usize, classes: usize, rng: &mut Rng) -> Self {
        match kind {
            HeadKind::Linear => Head::Linear(Dense::glorot(input, classes, rng)),
            HeadKind::Mlp => Head::Mlp {
                hidden: Dense::glorot(input, hidden, rng),
                out: Dense::glorot(hidden, classes, rng),
                pre: None,
            },
        }
    }

    fn apply(&self, f: &Matrix<T>) -> Result<Matrix<T>> {
        match self {
            Head::Linear(l) => l.apply(f),
            Head::Mlp { hidden, out, .. } => out.apply(&relu_forward(&hidden.apply(f)?)),
        }
    }

    fn forward(&mut self, f: &Matrix<T>) -> Result<Matrix<T>> {
        match self {
            Head::Linear(l) => l.forward(f),
            Head::Mlp { hidden, out, pre } => {
                let p = hidden.forward(f)?;
                let h = relu_forward(&p);
                *pre = Some(p);
                out.forward(&h)
            }
        }
    }

    fn backward(&mut self, g: &Matrix<T>) -> Result<Matrix<T>> {
        match self {
            Head::Linear(l) => Ok(l.backward(g, true)?.expect("input grad")),
            Head::Mlp { hidden, out, pre } => {
                let gh = out.backward(g, true)?.expect("input grad");
                let ga = relu_backward(pre.as_ref().expect("forward before backward"), &gh)?;
                Ok(hidden.backward(&ga, true)?.expect("input grad"))
            }
        }
    }

    fn layers(&self) -> Vec<&Dense<T>> {
        match self {
            Head::Linear(l) => vec![l],
            Head::Mlp { hidden, out, .. } => vec![hidden, out],
        }
    }

    fn visit(&mut self, f: &mut dyn FnMut(&mut Matrix<T>, &Matrix<T>)) {
        match self {
            Head::Linear(l) => l.visit(f),
            Head::Mlp { hidden, out, .. } => {
                hidden.visit(f);
                out.visit(f);
            }
        }
    }

    fn cast<U: Scalar>(&self) -> Head<U> {
        match self {
            Head::Linear(l) => Head::Linear(l.cast()),
            Head::Mlp { hidden, out, .. } => Head::Mlp {
                hidden: hidden.cast(),
                out: out.cast(),
                pre: None,
            },
        }
    }

    pub fn mlp(hidden: Dense<T>, out: Dense<T>) -> Self {
        Head::Mlp { hidden, out, pre: None }
    }

    pub fn kind(&self) -> HeadKind {
        match self {
            Head::Linear(_) => HeadKind::Linear,
            Head::Mlp { .. } => HeadKind::Mlp,
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            Head::Linear(l) => l.output_dim(),
            Head::Mlp { out, .. } => out.output_dim(),
        }
    }
}

/// Everything a fusion forward pass produces.
#[derive(Clone, Debug)]
pub struct FusionOutput<T: Scalar = f32> {
    pub logits: Matrix<T>,
    /// Post-ReLU response of each encoder to its own modality.
    pub taps: [Matrix<T>; 2],
    pub aux_logits: Option<[Matrix<T>; 2]>,
}

/// Upstream gradients entering a fusion backward pass.
pub struct FusionGrads<'a, T: Scalar> {
    pub logits: &'a Matrix<T>,
    pub taps: Option<[&'a Matrix<T>; 2]>,
    pub aux_logits: Option<[&'a Matrix<T>; 2]>,
}

#[derive(Clone, Debug, Default)]
struct FusionCache<T: Scalar> {
    pre: Option<[Matrix<T>; 2]>,
    /// Sum fusion pre-activation.
    sum: Option<Matrix<T>>,
    dropped: [bool; 2],
}

/// Late-fusion network over two modalities with optional per-modality
/// auxiliary linear heads on the encoder taps.
#[derive(Clone, Debug)]
pub struct FusionNet<T: Scalar = f32> {
    pub arch: FusionArch,
    pub enc1: Dense<T>,
    pub enc2: Dense<T>,
    pub head: Head<T>,
    pub aux: Option<[Dense<T>; 2]>,
    cache: FusionCache<T>,
}

impl<T: Scalar> FusionNet<T> {
    /// Initializes layers in the order enc1, enc2, head, aux1, aux2.
    pub fn new(arch: FusionArch, d1: usize, d2: usize, classes: usize, aux: bool, rng: &mut Rng) -> Result<Self> {
        arch.validate()?;
        let enc1 = Dense::glorot(d1, arch.enc_hidden, rng);
        let enc2 = Dense::glorot(d2, arch.enc_hidden, rng);
        let head = Head::new(arch.head, arch.fused_dim(), arch.head_hidden, classes, rng);
        let aux = aux.then(|| {
            [
                Dense::glorot(arch.enc_hidden, classes, rng),
                Dense::glorot(arch.enc_hidden, classes, rng),
            ]
        });
        Ok(Self {
            arch,
            enc1,
            enc2,
            head,
            aux,
            cache: FusionCache::default(),
        })
    }

    pub fn classes(&self) -> usize {
        self.head.classes()
    }

    pub fn input_dims(&self) -> (usize, usize) {
        (self.enc1.input_dim(), self.enc2.input_dim())
    }

    pub fn encoder(&self, m: Modality) -> &Dense<T> {
        match m {
            Modality::One => &self.enc1,
            Modality::Two => &self.enc2,
        }
    }

    pub fn encoder_mut(&mut self, m: Modality) -> &mut Dense<T> {
        match m {
            Modality::One => &mut self.enc1,
            Modality::Two => &mut self.enc2,
        }
    }

    /// Tap of modality `m` on its own input.
    pub fn tap(&self, m: Modality, x: &Matrix<T>) -> Result<Matrix<T>> {
        Ok(relu_forward(&self.encoder(m).apply(x)?))
    }

    fn fuse(&self, pre: &[Matrix<T>; 2], taps: &[Matrix<T>; 2]) -> Result<(Matrix<T>, Option<Matrix<T>>)> {
        match self.arch.fusion {
            FusionKind::Sum => {
                let mut s = pre[0].clone();
                s.add_assign(&pre[1])?;
                Ok((relu_forward(&s), Some(s)))
            }
            FusionKind::Concat => Ok((taps[0].hcat(&taps[1])?, None)),
        }
    }

    /// Inference; `dropped[m]` zeroes modality `m + 1`'s encoder output
    /// (pre-activation, bias included) before fusion.
    pub fn predict(&self, x1: &Matrix<T>, x2: &Matrix<T>, dropped: [bool; 2]) -> Result<FusionOutput<T>> {
        let mut pre = [self.enc1.apply(x1)?, self.enc2.apply(x2)?];
        apply_drop(&mut pre, dropped);
        let taps = [relu_forward(&pre[0]), relu_forward(&pre[1])];
        let (fused, _) = self.fuse(&pre, &taps)?;
        let logits = self.head.apply(&fused)?;
        let aux_logits = match &self.aux {
            Some([h1, h2]) => Some([h1.apply(&taps[0])?, h2.apply(&taps[1])?]),
            None => None,
        };
        Ok(FusionOutput { logits, taps, aux_logits })
    }

    pub fn logits(&self, x1: &Matrix<T>, x2: &Matrix<T>) -> Result<Matrix<T>> {
        Ok(self.predict(x1, x2, NO_DROP)?.logits)
    }

    pub fn forward(&mut self, x1: &Matrix<T>, x2: &Matrix<T>, dropped: [bool; 2]) -> Result<FusionOutput<T>> {
        let mut pre = [self.enc1.forward(x1)?, self.enc2.forward(x2)?];
        apply_drop(&mut pre, dropped);
        let taps = [relu_forward(&pre[0]), relu_forward(&pre[1])];
        let (fused, sum) = self.fuse(&pre, &taps)?;
        let logits = self.head.forward(&fused)?;
        let aux_logits = match &mut self.aux {
            Some([h1, h2]) => Some([h1.forward(&taps[0])?, h2.forward(&taps[1])?]),
            None => None,
        };
        self.cache = FusionCache {
            pre: Some(pre),
            sum,
            dropped,
        };
        Ok(FusionOutput { logits, taps, aux_logits })
    }

    pub fn backward(&mut self, g: FusionGrads<'_, T>) -> Result<()> {
        let cache = std::mem::take(&mut self.cache);
        let pre = cache.pre.as_ref().expect("forward before backward");
        let g_fused = self.head.backward(g.logits)?;
        // Gradient w.r.t. each encoder's post-ReLU tap, excluding the fusion path
        // for Sum (which bypasses the per-modality ReLU).
        let mut g_tap: [Option<Matrix<T>>; 2] = [None, None];
        let mut g_pre: [Option<Matrix<T>>; 2] = [None, None];
        match self.arch.fusion {
            FusionKind::Sum => {
                let gs = relu_backward(cache.sum.as_ref().expect("sum cached"), &g_fused)?;
                g_pre = [Some(gs.clone()), Some(gs)];
            }
            FusionKind::Concat => {
                let h = self.arch.enc_hidden;
                g_tap = [Some(g_fused.columns(0, h)?), Some(g_fused.columns(h, 2 * h)?)];
            }
        }
        if let Some(gt) = g.taps {
            for m in 0..2 {
                add_into(&mut g_tap[m], gt[m])?;
            }
        }
        if let (Some(heads), Some(ga)) = (&mut self.aux, g.aux_logits) {
            for m in 0..2 {
                let gi = heads[m].backward(ga[m], true)?.expect("input grad");
                add_into(&mut g_tap[m], &gi)?;
            }
        } else if let Some(heads) = &mut self.aux {
            heads.iter_mut().for_each(Dense::zero_grad);
        }
        for m in 0..2 {
            if let Some(gt) = &g_tap[m] {
                let gp = relu_backward(&pre[m], gt)?;
                add_into(&mut g_pre[m], &gp)?;
            }
        }
        for (m, enc) in [&mut self.enc1, &mut self.enc2].into_iter().enumerate() {
            match (&g_pre[m], cache.dropped[m]) {
                (Some(gp), false) => {
                    enc.backward(gp, false)?;
                }
                _ => enc.zero_grad(),
            }
        }
        self.cache = cache;
        Ok(())
    }

    pub fn signature(&self) -> u64 {
        let mut s = 0;
        if let Some(pre) = &self.cache.pre {
            relu_pattern_hash(&pre[0], &mut s);
            relu_pattern_hash(&pre[1], &mut s);
        }
        if let Some(sum) = &self.cache.sum {
            relu_pattern_hash(sum, &mut s);
        }
        if let Head::Mlp { pre: Some(p), .. } = &self.head {
            relu_pattern_hash(p, &mut s);
        }
        s
    }

    pub fn layers(&self) -> Vec<(&'static str, &Dense<T>)> {
        let mut v = vec![("enc1", &self.enc1), ("enc2", &self.enc2)];
        let head = self.head.layers();
        match self.head.kind() {
            HeadKind::Linear => v.push(("head", head[0])),
            HeadKind::Mlp => {
                v.push(("head.hidden", head[0]));
                v.push(("head.out", head[1]));
            }
        }
        if let Some([a1, a2]) = &self.aux {
            v.push(("aux1", a1));
            v.push(("aux2", a2));
        }
        v
    }

    pub fn params(&self) -> Vec<&Matrix<T>> {
        self.layers().into_iter().flat_map(|(_, l)| l.params()).collect()
    }

    pub fn visit(&mut self, f: &mut dyn FnMut(&mut Matrix<T>, &Matrix<T>)) {
        self.enc1.visit(f);
        self.enc2.visit(f);
        self.head.visit(f);
        if let Some(heads) = &mut self.aux {
            heads.iter_mut().for_each(|h| h.visit(f));
        }
    }

    pub fn cast<U: Scalar>(&self) -> FusionNet<U> {
        FusionNet {
            arch: self.arch,
            enc1: self.enc1.cast(),
            enc2: self.enc2.cast(),
            head: self.head.cast(),
            aux: self.aux.as_ref().map(|[a, b]| [a.cast(), b.cast()]),
            cache: FusionCache::default(),
        }
    }

    /// Rebuilds a network from its layers, checking that they fit `arch`.
    pub fn from_layers(
        arch: FusionArch,
        enc1: Dense<T>,
        enc2: Dense<T>,
        head: Head<T>,
        aux: Option<[Dense<T>; 2]>,
    ) -> Result<Self> {
        arch.validate()?;
        let head_in = head.layers()[0].input_dim();
        let ok = enc1.output_dim() == arch.enc_hidden
            && enc2.output_dim() == arch.enc_hidden
            && head_in == arch.fused_dim()
            && head.kind() == arch.head
            && aux.as_ref().is_none_or(|[a, b]| {
                a.input_dim() == arch.enc_hidden
                    && b.input_dim() == arch.enc_hidden
                    && a.output_dim() == head.classes()
                    && b.output_dim() == head.classes()
            });
        if !ok {
            return Err(Error::shape("FusionNet::from_layers", format!("layers do not match {arch:?}")));
        }
        Ok(Self {
            arch,
            enc1,
            enc2,
            head,
            aux,
            cache: FusionCache::default(),
        })
    }
}

pub const NO_DROP: [bool; 2] = [false, false];

fn apply_drop<T: Scalar>(pre: &mut [Matrix<T>; 2], dropped: [bool; 2]) {
    for (p, d) in pre.iter_mut().zip(dropped) {
        if d {
            p.fill(T::zero());
        }
    }
}

fn add_into<T: Scalar>(acc: &mut Option<Matrix<T>>, g: &Matrix<T>) -> Result<()> {
    match acc {
        Some(a) => a.add_assign(g),
        None => {
            *acc = Some(g.clone());
            Ok(())
        }
    }
}
