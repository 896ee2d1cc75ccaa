//! Central-difference gradient checking against an `f64` shadow copy.

use serde::{Deserialize, Serialize};

use super::matrix::Scalar;
use super::optim::{Objective, Shadowed};
use crate::error::Result;
use crate::rng::Rng;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GradCheckOptions {
    pub step: f64,
    pub max_coords: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-3,
            max_coords: 64,
            tolerance: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub checked: usize,
    /// Coordinates whose perturbation flipped a ReLU mask.
    pub skipped_kinks: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    /// Largest `f32` vs `f64` gradient gap, relative to the largest entry.
    pub f32_max_dev: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// `|a - n| / max(|a| + |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares the analytic gradient of `objective`'s `f64` shadow with central
/// differences on at most `max_coords` sampled parameter coordinates. The
/// `f32` gradient is compared with the shadow's as well.
pub fn grad_check<O: Shadowed>(objective: &mut O, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    objective.loss_and_grad()?;
    let mut single: Vec<Vec<f64>> = Vec::new();
    objective.visit(&mut |_, g| single.push(g.data().iter().map(|v| v.as_f64()).collect()));

    let mut shadow = objective.shadow();
    shadow.loss_and_grad()?;
    let mut analytic: Vec<Vec<f64>> = Vec::new();
    shadow.visit(&mut |_, g| analytic.push(g.data().to_vec()));
    let scale = analytic.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let f32_max_dev = single
        .iter()
        .flatten()
        .zip(analytic.iter().flatten())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        / scale;

    let coords = sample_coords(&analytic, opts.max_coords, opts.seed);
    shadow.loss()?;
    let base_sig = shadow.activation_signature();

    let mut report = GradCheckReport {
        checked: 0,
        skipped_kinks: 0,
        max_rel_err: 0.0,
        max_abs_err: 0.0,
        f32_max_dev,
        tolerance: opts.tolerance,
        passed: true,
    };
    for (tensor, index) in coords {
        let plus = eval_perturbed(&mut shadow, tensor, index, opts.step)?;
        let minus = eval_perturbed(&mut shadow, tensor, index, -opts.step)?;
        if plus.1 != base_sig || minus.1 != base_sig {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (plus.0 - minus.0) / (2.0 * opts.step);
        let a = analytic[tensor][index];
        report.checked += 1;
        report.max_rel_err = report.max_rel_err.max(relative_error(a, numeric));
        report.max_abs_err = report.max_abs_err.max((a - numeric).abs());
    }
    report.passed = report.max_rel_err < opts.tolerance;
    Ok(report)
}

fn sample_coords(tensors: &[Vec<f64>], max: usize, seed: u64) -> Vec<(usize, usize)> {
    let all: Vec<(usize, usize)> = tensors
        .iter()
        .enumerate()
        .flat_map(|(t, v)| (0..v.len()).map(move |i| (t, i)))
        .collect();
    if all.len() <= max {
        return all;
    }
    let mut rng = Rng::new(seed);
    let perm = rng.permutation(all.len());
    let mut picked: Vec<(usize, usize)> = perm[..max].iter().map(|&i| all[i]).collect();
    picked.sort_unstable();
    picked
}

fn eval_perturbed<O: Objective<f64>>(obj: &mut O, tensor: usize, index: usize, delta: f64) -> Result<(f64, u64)> {
    let original = replace_coord(obj, tensor, index, |v| v + delta);
    let loss = obj.loss();
    let sig = obj.activation_signature();
    replace_coord(obj, tensor, index, |_| original);
    Ok((loss?, sig))
}

/// Applies `f` to one coordinate and returns its previous value.
fn replace_coord<O: Objective<f64>>(obj: &mut O, tensor: usize, index: usize, f: impl Fn(f64) -> f64) -> f64 {
    let mut t = 0;
    let mut old = 0.0;
    obj.visit(&mut |p, _| {
        if t == tensor {
            old = p.data()[index];
            p.data_mut()[index] = f(old);
        }
        t += 1;
    });
    old
}
