//! Run manifests, per-run result files and the aggregate tables.

pub mod targets;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{ConfusionMatrix, confusion, predict_test};
use crate::fsutil;
use crate::synth::{Modality, Variant};
use crate::train::{DataView, Metrics, ModelBundle, ModelSpec, Strategy};
use targets::Target;

pub const TOOL_VERSION: &str = concat!("mmlab ", env!("CARGO_PKG_VERSION"));
/// Result files are recognized by this suffix.
pub const RESULT_SUFFIX: &str = ".result.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

pub fn file_digest(path: &Path) -> Result<FileDigest> {
    let bytes = fsutil::read(path)?;
    Ok(FileDigest {
        path: path.to_path_buf(),
        sha256: crate::nn::serialize::hex(&Sha256::digest(&bytes)),
    })
}

/// What produced a set of outputs, and from which inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<PathBuf>,
    pub tool_version: String,
    pub wall_time_secs: f64,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seeds: Vec<u64>) -> Self {
        Self {
            command: command.to_string(),
            config,
            seeds,
            inputs: Vec::new(),
            outputs: Vec::new(),
            tool_version: TOOL_VERSION.to_string(),
            wall_time_secs: 0.0,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(file_digest(path)?);
        Ok(())
    }

    /// Fails if any input file is missing or no longer matches its digest.
    pub fn verify_inputs(&self) -> Result<()> {
        for f in &self.inputs {
            let now = file_digest(&f.path)?;
            if now.sha256 != f.sha256 {
                return Err(Error::Invariant(format!("{} changed since the run", f.path.display())));
            }
        }
        Ok(())
    }
}

/// One trained model's evaluation, as written next to its bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub strategy: Strategy,
    /// Set for uni-modal models.
    pub modality: Option<usize>,
    pub variant: Variant,
    pub data_seed: u64,
    pub train_seed: u64,
    pub metrics: Metrics,
    pub confusion: ConfusionMatrix,
    pub iterations: usize,
    pub train_wall_time_secs: f64,
    pub manifest: RunManifest,
}

impl RunResult {
    pub fn from_bundle(bundle: &ModelBundle, view: &DataView, manifest: RunManifest) -> Result<Self> {
        let model = bundle.model()?;
        let preds = predict_test(&model, view)?;
        let modality = match bundle.spec {
            ModelSpec::Unimodal { modality, .. } => Some(modality),
            _ => None,
        };
        Ok(Self {
            strategy: bundle.strategy,
            modality,
            variant: view.data_ref.variant,
            data_seed: view.data_ref.seed,
            train_seed: bundle.seed,
            metrics: bundle.metrics.clone(),
            confusion: confusion(&preds, &view.y_test, view.n_classes)?,
            iterations: bundle.log.iterations,
            train_wall_time_secs: bundle.log.wall_time_secs,
            manifest,
        })
    }

    fn column(&self) -> Option<usize> {
        match (self.strategy, self.modality) {
            (Strategy::Unimodal, Some(m)) => Some(m - 1),
            (Strategy::NaiveFusion, _) => Some(2),
            _ => None,
        }
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub n_runs: usize,
    pub median: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub published: f64,
    pub target: Target,
    /// `None` when there are no runs for this cell.
    pub pass: Option<bool>,
}

impl Cell {
    pub fn new(values: &[f64], published: f64, target: Target) -> Self {
        let med = median(values);
        Self {
            n_runs: values.len(),
            median: med,
            min: values.iter().copied().reduce(f64::min),
            max: values.iter().copied().reduce(f64::max),
            published,
            target,
            pass: med.map(|m| target.contains(m)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub variant: Variant,
    pub uni1: Cell,
    pub uni2: Cell,
    pub multi: Cell,
}

pub fn accuracy_targets(v: Variant) -> ([f64; 3], [Target; 3]) {
    use targets::*;
    match v {
        Variant::Alpha => (PUBLISHED_ALPHA, [ALPHA_UNI, ALPHA_UNI, ALPHA_MULTI]),
        Variant::Beta => (PUBLISHED_BETA, [BETA_UNI, BETA_UNI, BETA_MULTI]),
        Variant::Gamma => (PUBLISHED_GAMMA, [GAMMA_UNI, GAMMA_UNI, GAMMA_MULTI]),
    }
}

/// Test accuracies in percent for uni1, uni2 and naive fusion.
pub fn accuracy_row(variant: Variant, acc: [&[f64]; 3]) -> AccuracyRow {
    let (published, t) = accuracy_targets(variant);
    AccuracyRow {
        variant,
        uni1: Cell::new(acc[0], published[0], t[0]),
        uni2: Cell::new(acc[1], published[1], t[1]),
        multi: Cell::new(acc[2], published[2], t[2]),
    }
}

/// Shape checks on a row-normalized 3-class confusion matrix (percent).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionCheck {
    pub row0_diag: f64,
    /// Share of rows 1 and 2 predicted as 0, each.
    pub col0_leak: [f64; 2],
    /// Share of rows 1 and 2 predicted as 1 or 2, each.
    pub paired_mass: [f64; 2],
    /// Class-1 share within columns 1 and 2, rows 1 and 2.
    pub col1_share: [f64; 2],
    pub pass: bool,
}

pub fn check_gamma_confusion(pct: &[[f64; 3]; 3]) -> ConfusionCheck {
    use targets::*;
    let row = |r: usize| pct[r];
    let col0_leak = [row(1)[0], row(2)[0]];
    let paired_mass = [row(1)[1] + row(1)[2], row(2)[1] + row(2)[2]];
    let share = |r: usize| {
        let m = row(r)[1] + row(r)[2];
        if m > 0.0 { 100.0 * row(r)[1] / m } else { 0.0 }
    };
    let col1_share = [share(1), share(2)];
    let published_share = |r: usize| {
        let p = PUBLISHED_GAMMA_CONFUSION[r];
        100.0 * p[1] / (p[1] + p[2])
    };
    let pass = row(0)[0] >= CONF_ROW0_DIAG_MIN
        && col0_leak.iter().all(|&l| l <= CONF_COL0_LEAK_MAX)
        && paired_mass.iter().all(|&m| m >= CONF_PAIRED_MASS_MIN)
        && (0..2).all(|i| (col1_share[i] - published_share(i + 1)).abs() <= CONF_SPLIT_TOL);
    ConfusionCheck {
        row0_diag: row(0)[0],
        col0_leak,
        paired_mass,
        col1_share,
        pass,
    }
}

/// Element-wise median of row-normalized confusion matrices.
pub fn median_confusion(ms: &[&ConfusionMatrix]) -> Option<[[f64; 3]; 3]> {
    let pcts: Vec<[[f64; 3]; 3]> = ms
        .iter()
        .filter(|m| m.k == 3)
        .map(|m| {
            let p = m.percentages();
            std::array::from_fn(|r| std::array::from_fn(|c| p[r].as_ref().map_or(0.0, |row| row[c])))
        })
        .collect();
    if pcts.is_empty() {
        return None;
    }
    Some(std::array::from_fn(|r| {
        std::array::from_fn(|c| median(&pcts.iter().map(|p| p[r][c]).collect::<Vec<_>>()).unwrap_or(0.0))
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionEntry {
    pub modality: usize,
    pub n_runs: usize,
    pub median_percentages: [[f64; 3]; 3],
    pub published: [[f64; 3]; 3],
    pub check: ConfusionCheck,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub n_results: usize,
    pub warnings: Vec<String>,
    pub accuracy: Vec<AccuracyRow>,
    pub confusion_checks: Vec<ConfusionEntry>,
    /// `None` when nothing could be checked.
    pub all_pass: Option<bool>,
}

pub fn build_report(results: &[RunResult]) -> Report {
    let mut report = Report {
        n_results: results.len(),
        ..Report::default()
    };
    if results.is_empty() {
        report.warnings.push("no result files found".into());
        return report;
    }
    for v in [Variant::Alpha, Variant::Beta, Variant::Gamma] {
        let mut acc: [Vec<f64>; 3] = Default::default();
        for r in results.iter().filter(|r| r.variant == v) {
            if let Some(col) = r.column() {
                acc[col].push(100.0 * r.metrics.test_acc);
            }
        }
        if acc.iter().any(|a| !a.is_empty()) {
            report.accuracy.push(accuracy_row(v, [&acc[0], &acc[1], &acc[2]]));
        }
    }
    for m in [Modality::One, Modality::Two] {
        let ms: Vec<&ConfusionMatrix> = results
            .iter()
            .filter(|r| r.variant == Variant::Gamma && r.column() == Some(m.index() - 1))
            .map(|r| &r.confusion)
            .collect();
        if let Some(med) = median_confusion(&ms) {
            report.confusion_checks.push(ConfusionEntry {
                modality: m.index(),
                n_runs: ms.len(),
                median_percentages: med,
                published: targets::PUBLISHED_GAMMA_CONFUSION,
                check: check_gamma_confusion(&med),
            });
        }
    }
    let skipped = results.iter().filter(|r| r.column().is_none()).count();
    if skipped > 0 {
        report
            .warnings
            .push(format!("{skipped} result(s) from other strategies are not part of the tables"));
    }
    let flags: Vec<bool> = report
        .accuracy
        .iter()
        .flat_map(|r| [r.uni1.pass, r.uni2.pass, r.multi.pass])
        .flatten()
        .chain(report.confusion_checks.iter().map(|e| e.check.pass))
        .collect();
    report.all_pass = (!flags.is_empty()).then(|| flags.iter().all(|&f| f));
    report
}

/// Reads every `*.result.json` under `dir` (recursively). Unreadable files
/// become warnings.
pub fn load_results(dir: &Path) -> Result<(Vec<RunResult>, Vec<String>)> {
    let mut paths = Vec::new();
    collect(dir, &mut paths)?;
    paths.sort();
    let loaded: Vec<(PathBuf, Result<RunResult>)> = paths
        .into_par_iter()
        .map(|p| {
            let r = fsutil::read_json(&p);
            (p, r)
        })
        .collect();
    let mut ok = Vec::new();
    let mut warnings = Vec::new();
    for (p, r) in loaded {
        match r {
            Ok(r) => ok.push(r),
            Err(e) => warnings.push(format!("skipping {}: {e}", p.display())),
        }
    }
    Ok((ok, warnings))
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect(&path, out)?;
        } else if path.to_string_lossy().ends_with(RESULT_SUFFIX) {
            out.push(path);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn published_confusion_passes_its_own_check() {
        assert!(check_gamma_confusion(&targets::PUBLISHED_GAMMA_CONFUSION).pass);
        let mut leaky = targets::PUBLISHED_GAMMA_CONFUSION;
        leaky[1] = [5.0, 52.0, 43.0];
        assert!(!check_gamma_confusion(&leaky).pass);
        let mut swapped = targets::PUBLISHED_GAMMA_CONFUSION;
        swapped[1] = [0.0, 30.0, 70.0];
        assert!(!check_gamma_confusion(&swapped).pass);
    }

    fn result(variant: Variant, strategy: Strategy, modality: Option<usize>, acc: f64) -> RunResult {
        RunResult {
            strategy,
            modality,
            variant,
            data_seed: 0,
            train_seed: 0,
            metrics: Metrics {
                train_acc: 1.0,
                test_acc: acc,
            },
            confusion: ConfusionMatrix {
                k: variant.n_classes(),
                counts: vec![vec![0; variant.n_classes()]; variant.n_classes()],
            },
            iterations: 1,
            train_wall_time_secs: 0.0,
            manifest: RunManifest::new("train", serde_json::Value::Null, vec![0]),
        }
    }

    #[test]
    fn empty_input_gives_an_empty_report_with_a_warning() {
        let r = build_report(&[]);
        assert!(r.accuracy.is_empty() && r.confusion_checks.is_empty());
        assert_eq!(r.all_pass, None);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn beta_row_uses_medians() {
        let rs = vec![
            result(Variant::Beta, Strategy::Unimodal, Some(1), 0.50),
            result(Variant::Beta, Strategy::Unimodal, Some(1), 0.60),
            result(Variant::Beta, Strategy::Unimodal, Some(1), 0.49),
            result(Variant::Beta, Strategy::Unimodal, Some(2), 0.51),
            result(Variant::Beta, Strategy::NaiveFusion, None, 0.91),
            result(Variant::Beta, Strategy::Umt, None, 0.10),
        ];
        let r = build_report(&rs);
        assert_eq!(r.accuracy.len(), 1);
        let row = &r.accuracy[0];
        assert_eq!(row.uni1.median, Some(50.0));
        assert_eq!(row.uni1.max, Some(60.0));
        assert_eq!(row.uni1.published, 51.4);
        assert_eq!(row.multi.pass, Some(true));
        assert_eq!(r.all_pass, Some(true));
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn missing_cells_do_not_count() {
        let r = build_report(&[result(Variant::Alpha, Strategy::NaiveFusion, None, 0.5)]);
        assert_eq!(r.accuracy[0].uni1.pass, None);
        assert_eq!(r.all_pass, Some(false));
    }

    #[test]
    fn results_roundtrip_and_manifests_detect_changed_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("data.bin");
        fsutil::write(&input, b"abc").unwrap();
        let mut r = result(Variant::Alpha, Strategy::Unimodal, Some(1), 1.0);
        r.manifest.add_input(&input).unwrap();
        r.manifest.verify_inputs().unwrap();
        let sub = dir.path().join("runs");
        fsutil::write_json(&sub.join(format!("a{RESULT_SUFFIX}")), &r).unwrap();
        fsutil::write(&sub.join(format!("bad{RESULT_SUFFIX}")), b"{").unwrap();
        let (ok, warn) = load_results(dir.path()).unwrap();
        assert_eq!(ok, vec![r.clone()]);
        assert_eq!(warn.len(), 1);
        fsutil::write(&input, b"abd").unwrap();
        assert!(r.manifest.verify_inputs().is_err());
    }
}
