//! Synthetic two-modality datasets built from random projections of
//! unit-norm latent vectors.
//!
//! Draw order within one dataset is fixed: `P1` row-major, `P2` row-major,
//! the anchor direction `z` (α and γ only), then per-sample latents. Every
//! latent is `d` standard normals normalized to unit L2 length; rejected
//! latents are discarded and redrawn from the same stream.

mod io;
mod split;

pub use io::{load, load_dataset, load_split, save, sidecar_path, split_path};
pub use split::{DEFAULT_TRAIN_FRACTION, SplitSpec, default_split, split, split_stratified};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng::Rng;

pub const GENERATOR_VERSION: &str = "mmlab-synth/1";

/// Margin around the anchor hyperplane for α and γ.
pub const ANCHOR_MARGIN: f64 = 0.1;
/// Margin on the cross-modal dot product for β and γ.
pub const PAIR_MARGIN: f64 = 0.25;
pub const GAMMA_ANCHOR_COUNT: usize = 2500;
pub const GAMMA_TOTAL: usize = 7500;

pub const PER_SAMPLE_CAP: u64 = 10_000_000;
pub const TOTAL_DRAW_CAP: u64 = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Alpha,
    Beta,
    Gamma,
}

impl Variant {
    pub fn code(self) -> u8 {
        match self {
            Variant::Alpha => 0,
            Variant::Beta => 1,
            Variant::Gamma => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Variant::Alpha),
            1 => Some(Variant::Beta),
            2 => Some(Variant::Gamma),
            _ => None,
        }
    }

    pub fn n_classes(self) -> usize {
        match self {
            Variant::Alpha | Variant::Beta => 2,
            Variant::Gamma => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Alpha => "alpha",
            Variant::Beta => "beta",
            Variant::Gamma => "gamma",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "alpha" | "a" => Ok(Variant::Alpha),
            "beta" | "b" => Ok(Variant::Beta),
            "gamma" | "g" => Ok(Variant::Gamma),
            other => Err(Error::InvalidArgument(format!("unknown variant `{other}`"))),
        }
    }
}

/// How γ's paired phase fills its 5000 rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaPhase2 {
    /// 2500 rows each of classes 1 and 2; accepted latents whose class is
    /// already full are discarded.
    #[default]
    Quota,
    /// First 5000 accepted latents, whatever their class mix.
    Literal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub d1: usize,
    pub d2: usize,
    pub d: usize,
    pub n: usize,
    pub seed: u64,
    pub variant: Variant,
    #[serde(default)]
    pub gamma_phase2: GammaPhase2,
}

impl GenConfig {
    pub fn new(variant: Variant, seed: u64) -> Self {
        Self {
            d1: 200,
            d2: 100,
            d: 50,
            n: 5000,
            seed,
            variant,
            gamma_phase2: GammaPhase2::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d1 == 0 || self.d2 == 0 || self.d == 0 || self.n == 0 {
            return Err(Error::InvalidArgument(format!(
                "d1, d2, d, n must be positive (got {}, {}, {}, {})",
                self.d1, self.d2, self.d, self.n
            )));
        }
        Ok(())
    }

    /// Rows the generator will emit.
    pub fn effective_n(&self) -> usize {
        match self.variant {
            Variant::Gamma => GAMMA_TOTAL,
            _ => self.n,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset {
    pub x1: Matrix<f32>,
    pub x2: Matrix<f32>,
    pub labels: Vec<usize>,
    pub variant: Variant,
    pub n_classes: usize,
    pub seed: u64,
    /// Full generator config when known (always after `generate`; after
    /// `load` only if the sidecar was readable).
    pub config: Option<GenConfig>,
    pub generator_version: String,
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn d1(&self) -> usize {
        self.x1.cols()
    }

    pub fn d2(&self) -> usize {
        self.x2.cols()
    }

    pub fn modality(&self, m: Modality) -> &Matrix<f32> {
        match m {
            Modality::One => &self.x1,
            Modality::Two => &self.x2,
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &y in &self.labels {
            if y < counts.len() {
                counts[y] += 1;
            }
        }
        counts
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if self.x1.rows() != n || self.x2.rows() != n {
            return Err(Error::Invariant(format!(
                "row counts differ: x1 {}, x2 {}, labels {n}",
                self.x1.rows(),
                self.x2.rows()
            )));
        }
        if self.n_classes != self.variant.n_classes() {
            return Err(Error::Invariant(format!(
                "{} classes declared for variant {}",
                self.n_classes,
                self.variant.name()
            )));
        }
        if let Some(&y) = self.labels.iter().find(|&&y| y >= self.n_classes) {
            return Err(Error::Invariant(format!("label {y} outside 0..{}", self.n_classes)));
        }
        if !self.x1.all_finite() || !self.x2.all_finite() {
            return Err(Error::Invariant("non-finite feature value".into()));
        }
        if self.variant == Variant::Gamma {
            let zeros = self.labels.iter().filter(|&&y| y == 0).count();
            if n != GAMMA_TOTAL || zeros != GAMMA_ANCHOR_COUNT {
                return Err(Error::Invariant(format!(
                    "gamma needs {GAMMA_ANCHOR_COUNT} zeros of {GAMMA_TOTAL} rows, got {zeros} of {n}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modality {
    One,
    Two,
}

impl Modality {
    pub fn index(self) -> usize {
        match self {
            Modality::One => 1,
            Modality::Two => 2,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            1 => Ok(Modality::One),
            2 => Ok(Modality::Two),
            _ => Err(Error::InvalidArgument(format!("modality must be 1 or 2, got {i}"))),
        }
    }

    pub fn other(self) -> Self {
        match self {
            Modality::One => Modality::Two,
            Modality::Two => Modality::One,
        }
    }
}

/// Sampling diagnostics for one generation run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GenStats {
    /// Latent draws (or candidate latent pairs for β and γ phase 2) attempted.
    pub attempts: u64,
    pub accepted: u64,
    /// Accepted draws thrown away because their class quota was full.
    pub discarded_by_quota: u64,
    pub acceptance_rate: f64,
    /// Smallest `|margin statistic|` among accepted samples; must exceed the
    /// variant's threshold.
    pub min_accepted_margin: f64,
    /// Largest `| ||latent|| - 1 |` seen among accepted latents.
    pub max_norm_error: f64,
}

impl GenStats {
    fn finish(&mut self) {
        self.acceptance_rate = if self.attempts == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempts as f64
        };
    }
}

struct Latents<'a> {
    rng: &'a mut Rng,
    buf: Vec<f64>,
}

impl<'a> Latents<'a> {
    fn new(rng: &'a mut Rng, d: usize) -> Self {
        Self {
            rng,
            buf: vec![0.0; d],
        }
    }

    fn unit(&mut self) -> Vec<f64> {
        loop {
            self.rng.fill_normal(&mut self.buf);
            let norm = dot(&self.buf, &self.buf).sqrt();
            if norm > 0.0 {
                return self.buf.iter().map(|v| v / norm).collect();
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_error(x: &[f64]) -> f64 {
    (dot(x, x).sqrt() - 1.0).abs()
}

fn projection(rng: &mut Rng, rows: usize, d: usize) -> Vec<f64> {
    (0..rows * d).map(|_| rng.uniform_range(-0.5, 0.5)).collect()
}

fn project_into(p: &[f64], d: usize, x: &[f64], out: &mut Vec<f32>) {
    for row in p.chunks_exact(d) {
        out.push(dot(row, x) as f32);
    }
}

struct Builder {
    p1: Vec<f64>,
    p2: Vec<f64>,
    d: usize,
    x1: Vec<f32>,
    x2: Vec<f32>,
    labels: Vec<usize>,
}

impl Builder {
    fn push(&mut self, a: &[f64], b: &[f64], label: usize) {
        project_into(&self.p1, self.d, a, &mut self.x1);
        project_into(&self.p2, self.d, b, &mut self.x2);
        self.labels.push(label);
    }
}

/// Generates a dataset for `cfg.variant` with its sampling diagnostics.
pub fn generate(cfg: &GenConfig) -> Result<(SyntheticDataset, GenStats)> {
    cfg.validate()?;
    if cfg.variant == Variant::Gamma && cfg.n != GAMMA_TOTAL && cfg.n != 5000 {
        log::warn!("gamma has a fixed size of {GAMMA_TOTAL} rows; ignoring n = {}", cfg.n);
    }
    let mut rng = Rng::new(cfg.seed);
    let p1 = projection(&mut rng, cfg.d1, cfg.d);
    let p2 = projection(&mut rng, cfg.d2, cfg.d);
    let n = cfg.effective_n();
    let mut b = Builder {
        p1,
        p2,
        d: cfg.d,
        x1: Vec::with_capacity(n * cfg.d1),
        x2: Vec::with_capacity(n * cfg.d2),
        labels: Vec::with_capacity(n),
    };
    let mut stats = GenStats {
        min_accepted_margin: f64::INFINITY,
        ..GenStats::default()
    };
    match cfg.variant {
        Variant::Alpha => gen_alpha(&mut rng, cfg, &mut b, &mut stats)?,
        Variant::Beta => gen_beta(&mut rng, cfg, &mut b, &mut stats)?,
        Variant::Gamma => gen_gamma(&mut rng, cfg, &mut b, &mut stats)?,
    }
    stats.finish();
    let rows = b.labels.len();
    let ds = SyntheticDataset {
        x1: Matrix::new(rows, cfg.d1, b.x1)?,
        x2: Matrix::new(rows, cfg.d2, b.x2)?,
        labels: b.labels,
        variant: cfg.variant,
        n_classes: cfg.variant.n_classes(),
        seed: cfg.seed,
        config: Some(cfg.clone()),
        generator_version: GENERATOR_VERSION.to_string(),
    };
    ds.validate()?;
    Ok((ds, stats))
}

fn gen_alpha(rng: &mut Rng, cfg: &GenConfig, b: &mut Builder, stats: &mut GenStats) -> Result<()> {
    let mut lat = Latents::new(rng, cfg.d);
    let z = lat.unit();
    for _ in 0..cfg.n {
        let mut tries = 0u64;
        let (x, s) = loop {
            tries += 1;
            if tries > PER_SAMPLE_CAP {
                return Err(Error::RejectionCap {
                    cap: PER_SAMPLE_CAP,
                    context: "alpha sample",
                });
            }
            let x = lat.unit();
            let s = dot(&x, &z);
            if s.abs() > ANCHOR_MARGIN {
                break (x, s);
            }
        };
        stats.attempts += tries;
        stats.accepted += 1;
        stats.min_accepted_margin = stats.min_accepted_margin.min(s.abs());
        stats.max_norm_error = stats.max_norm_error.max(norm_error(&x));
        let y = usize::from(s > ANCHOR_MARGIN);
        b.push(&x, &x, y);
    }
    Ok(())
}

fn gen_beta(rng: &mut Rng, cfg: &GenConfig, b: &mut Builder, stats: &mut GenStats) -> Result<()> {
    let mut lat = Latents::new(rng, cfg.d);
    while b.labels.len() < cfg.n {
        if stats.attempts >= TOTAL_DRAW_CAP {
            return Err(Error::RejectionCap {
                cap: TOTAL_DRAW_CAP,
                context: "beta pairs",
            });
        }
        stats.attempts += 1;
        let x1 = lat.unit();
        let x2 = lat.unit();
        let s = dot(&x1, &x2);
        if s.abs() <= PAIR_MARGIN {
            continue;
        }
        stats.accepted += 1;
        stats.min_accepted_margin = stats.min_accepted_margin.min(s.abs());
        stats.max_norm_error = stats.max_norm_error.max(norm_error(&x1)).max(norm_error(&x2));
        b.push(&x1, &x2, usize::from(s > PAIR_MARGIN));
    }
    Ok(())
}

fn far_side(lat: &mut Latents<'_>, z: &[f64]) -> Result<Vec<f64>> {
    for _ in 0..PER_SAMPLE_CAP {
        let x = lat.unit();
        if dot(&x, z) <= -ANCHOR_MARGIN {
            return Ok(x);
        }
    }
    Err(Error::RejectionCap {
        cap: PER_SAMPLE_CAP,
        context: "gamma far-side latent",
    })
}

fn gen_gamma(rng: &mut Rng, cfg: &GenConfig, b: &mut Builder, stats: &mut GenStats) -> Result<()> {
    let mut lat = Latents::new(rng, cfg.d);
    let z = lat.unit();
    // Phase 1: anchor-side samples, label 0, same latent in both modalities.
    for _ in 0..GAMMA_ANCHOR_COUNT {
        let mut tries = 0u64;
        let (x, s) = loop {
            tries += 1;
            if tries > PER_SAMPLE_CAP {
                return Err(Error::RejectionCap {
                    cap: PER_SAMPLE_CAP,
                    context: "gamma anchor sample",
                });
            }
            let x = lat.unit();
            let s = dot(&x, &z);
            if s >= ANCHOR_MARGIN {
                break (x, s);
            }
        };
        stats.attempts += tries;
        stats.accepted += 1;
        stats.min_accepted_margin = stats.min_accepted_margin.min(s);
        stats.max_norm_error = stats.max_norm_error.max(norm_error(&x));
        b.push(&x, &x, 0);
    }
    // Phase 2: both latents on the far side of the anchor, labelled by their
    // mutual dot product.
    let per_class = (GAMMA_TOTAL - GAMMA_ANCHOR_COUNT) / 2;
    let mut filled = [0usize; 3];
    let mut phase2_attempts = 0u64;
    while b.labels.len() < GAMMA_TOTAL {
        if phase2_attempts >= TOTAL_DRAW_CAP {
            return Err(Error::RejectionCap {
                cap: TOTAL_DRAW_CAP,
                context: "gamma paired phase",
            });
        }
        phase2_attempts += 1;
        stats.attempts += 1;
        // The two side conditions are independent, so each latent is
        // redrawn on its own until it lands on the far side.
        let x1 = far_side(&mut lat, &z)?;
        let x2 = far_side(&mut lat, &z)?;
        let s = dot(&x1, &x2);
        if s.abs() <= PAIR_MARGIN {
            continue;
        }
        let y = if s > PAIR_MARGIN { 2 } else { 1 };
        if cfg.gamma_phase2 == GammaPhase2::Quota && filled[y] >= per_class {
            stats.discarded_by_quota += 1;
            continue;
        }
        filled[y] += 1;
        stats.accepted += 1;
        stats.min_accepted_margin = stats.min_accepted_margin.min(s.abs());
        stats.max_norm_error = stats.max_norm_error.max(norm_error(&x1)).max(norm_error(&x2));
        b.push(&x1, &x2, y);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(variant: Variant, seed: u64) -> GenConfig {
        GenConfig {
            d1: 12,
            d2: 8,
            d: 6,
            n: 300,
            seed,
            variant,
            gamma_phase2: GammaPhase2::Quota,
        }
    }

    #[test]
    fn alpha_shapes_and_margins() {
        let (ds, stats) = generate(&small(Variant::Alpha, 1)).unwrap();
        assert_eq!(ds.x1.shape(), (300, 12));
        assert_eq!(ds.x2.shape(), (300, 8));
        assert!(stats.min_accepted_margin > ANCHOR_MARGIN);
        assert!(stats.max_norm_error < 1e-6);
        assert!(stats.acceptance_rate > 0.0 && stats.acceptance_rate <= 1.0);
    }

    #[test]
    fn beta_margins() {
        let (ds, stats) = generate(&small(Variant::Beta, 2)).unwrap();
        assert_eq!(ds.len(), 300);
        assert!(stats.min_accepted_margin > PAIR_MARGIN);
    }

    #[test]
    fn gamma_counts_fixed_regardless_of_n() {
        let mut cfg = small(Variant::Gamma, 3);
        cfg.n = 10;
        let (ds, _) = generate(&cfg).unwrap();
        assert_eq!(ds.len(), GAMMA_TOTAL);
        assert_eq!(ds.class_counts(), vec![2500, 2500, 2500]);
    }

    #[test]
    fn literal_gamma_keeps_class_zero_count() {
        let mut cfg = small(Variant::Gamma, 4);
        cfg.gamma_phase2 = GammaPhase2::Literal;
        let (ds, stats) = generate(&cfg).unwrap();
        let counts = ds.class_counts();
        assert_eq!(counts[0], 2500);
        assert_eq!(counts[1] + counts[2], 5000);
        assert_eq!(stats.discarded_by_quota, 0);
    }

    #[test]
    fn zero_dims_rejected() {
        let mut cfg = small(Variant::Alpha, 1);
        cfg.d = 0;
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn validate_catches_bad_labels() {
        let (mut ds, _) = generate(&small(Variant::Alpha, 5)).unwrap();
        ds.labels[0] = 7;
        assert!(matches!(ds.validate(), Err(Error::Invariant(_))));
    }
}
