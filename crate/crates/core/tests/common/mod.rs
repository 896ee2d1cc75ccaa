//! Random gradient-check instances shared by the gradient and acceptance suites.
#![allow(dead_code)]

use mmlab_core::nn::{GradCheckOptions, GradCheckReport, Matrix, grad_check};
use mmlab_core::rng::Rng;
use mmlab_core::train::{
    DropMode, DropoutSampler, FusionArch, FusionKind, FusionNet, FusionObjective, HeadKind, LossWeights, UniNet,
    UniObjective,
};

pub fn normal(rows: usize, cols: usize, rng: &mut Rng) -> Matrix<f32> {
    Matrix::from_fn(rows, cols, |_, _| rng.normal() as f32)
}

pub fn labels(n: usize, k: usize, rng: &mut Rng) -> Vec<usize> {
    (0..n).map(|_| rng.below(k as u64) as usize).collect()
}

pub fn opts(seed: u64) -> GradCheckOptions {
    GradCheckOptions {
        max_coords: 96,
        seed,
        ..GradCheckOptions::default()
    }
}

/// One random objective of kind `i % 6`, checked against its f64 shadow.
pub fn check_instance(i: u64) -> (String, GradCheckReport) {
    let mut rng = Rng::new(1000 + i);
    let n = 4 + rng.below(12) as usize;
    let k = 2 + rng.below(3) as usize;
    let d1 = 2 + rng.below(6) as usize;
    let d2 = 2 + rng.below(6) as usize;
    let h = 2 + rng.below(6) as usize;
    let x1 = normal(n, d1, &mut rng);
    let x2 = normal(n, d2, &mut rng);
    let y = labels(n, k, &mut rng);
    let head = if rng.below(2) == 0 { HeadKind::Linear } else { HeadKind::Mlp };
    let arch = FusionArch {
        fusion: if rng.below(2) == 0 { FusionKind::Sum } else { FusionKind::Concat },
        enc_hidden: h,
        head,
        head_hidden: 2 + rng.below(5) as usize,
    };
    let kind = i % 6;
    let report = match kind {
        0 => {
            let net = UniNet::new(d1, h, k, &mut rng);
            let mut obj = UniObjective::new(net, x1, y).unwrap();
            ("mlp", grad_check(&mut obj, &opts(i)).unwrap())
        }
        1 => {
            let net = FusionNet::new(arch, d1, d2, k, false, &mut rng).unwrap();
            let mut obj = FusionObjective::new(net, x1, x2, y, LossWeights::default()).unwrap();
            ("fusion", grad_check(&mut obj, &opts(i)).unwrap())
        }
        2 => {
            let net = FusionNet::new(arch, d1, d2, k, true, &mut rng).unwrap();
            let w = LossWeights { task: 1.0, distill: 0.0, aux: 0.7 };
            let mut obj = FusionObjective::new(net, x1, x2, y, w).unwrap();
            ("aux", grad_check(&mut obj, &opts(i)).unwrap())
        }
        3 | 4 => {
            let net = FusionNet::new(arch, d1, d2, k, false, &mut rng).unwrap();
            let t1 = normal(n, h, &mut rng).map(|v| v.abs());
            let t2 = normal(n, h, &mut rng).map(|v| v.abs());
            let w = LossWeights { task: 0.5 + rng.uniform(), distill: 0.1 + 3.0 * rng.uniform(), aux: 0.0 };
            let mut obj = FusionObjective::new(net, x1, x2, y, w).unwrap().with_teacher(t1, t2).unwrap();
            ("umt", grad_check(&mut obj, &opts(i)).unwrap())
        }
        _ => {
            let net = FusionNet::new(arch, d1, d2, k, false, &mut rng).unwrap();
            let sampler = DropoutSampler::new(0.5, DropMode::Independent, i).unwrap();
            let mut obj = FusionObjective::new(net, x1, x2, y, LossWeights::default())
                .unwrap()
                .with_dropout(sampler);
            obj.dropped = [i % 4 == 1, i % 4 == 3];
            ("dropout", grad_check(&mut obj, &opts(i)).unwrap())
        }
    };
    (report.0.to_string(), report.1)
}
