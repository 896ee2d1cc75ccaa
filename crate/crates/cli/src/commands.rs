use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result, bail, ensure};
use serde::{Deserialize, Serialize};
use serde_json::json;

use mmlab_core::eval::{ProbeReport, confusion, linear_probe};
use mmlab_core::fsutil;
use mmlab_core::nn::TrainConfig;
use mmlab_core::report::{self, RESULT_SUFFIX, RunManifest, RunResult};
use mmlab_core::synth::{self, GammaPhase2, GenConfig, Modality, SplitSpec, SyntheticDataset, Variant};
use mmlab_core::theory::{self, FeatureUniverse, TheoryReport};
use mmlab_core::train::{
    DEFAULT_DROP_PROB, DataView, DropMode, FusionArch, ModelBundle, UNI_HIDDEN, UmtConfig, decision_trick,
    train_aux_ce, train_modality_dropout, train_naive_fusion, train_teachers, train_umt, train_unimodal,
    ume_predict,
};

use crate::output;
use crate::{DecideArgs, GenArgs, Mode, Phase2Arg, ProbeArgs, ReportArgs, TheoryArgs, TrainArgs, UmeArgs, VariantArg};

/// Optional JSON configuration shared by the training commands.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub train: TrainConfig,
    pub arch: FusionArch,
    pub uni_hidden: usize,
    pub umt: UmtConfig,
    pub drop_prob: f64,
    pub drop_mode: DropMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            train: TrainConfig::default(),
            arch: FusionArch::default(),
            uni_hidden: UNI_HIDDEN,
            umt: UmtConfig::default(),
            drop_prob: DEFAULT_DROP_PROB,
            drop_mode: DropMode::default(),
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => fsutil::read_json(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(RunConfig::default()),
    }
}

fn load_view(path: &Path) -> Result<(SyntheticDataset, SplitSpec, DataView)> {
    let (ds, split) = synth::load(path).with_context(|| format!("loading dataset {}", path.display()))?;
    let view = DataView::new(&ds, &split)?;
    Ok((ds, split, view))
}

fn data_manifest(command: &str, config: serde_json::Value, seeds: Vec<u64>, data: &Path) -> Result<RunManifest> {
    let mut m = RunManifest::new(command, config, seeds);
    m.add_input(data)?;
    m.add_input(&synth::split_path(data))?;
    Ok(m)
}

fn emit<T: Serialize>(value: &T, json_out: bool, out: Option<&Path>, human: impl FnOnce()) -> Result<()> {
    if let Some(p) = out {
        fsutil::write_json(p, value)?;
    }
    if json_out {
        println!("{}", serde_json::to_string_pretty(value)?);
    } else {
        human();
    }
    Ok(())
}

pub fn generate(a: &GenArgs, json_out: bool) -> Result<()> {
    let start = Instant::now();
    let variant = match a.variant {
        VariantArg::Alpha => Variant::Alpha,
        VariantArg::Beta => Variant::Beta,
        VariantArg::Gamma => Variant::Gamma,
    };
    let mut cfg = GenConfig::new(variant, a.seed);
    cfg.d1 = a.d1.unwrap_or(cfg.d1);
    cfg.d2 = a.d2.unwrap_or(cfg.d2);
    cfg.d = a.d.unwrap_or(cfg.d);
    cfg.n = a.n.unwrap_or(cfg.n);
    cfg.gamma_phase2 = match a.gamma_phase2 {
        Phase2Arg::Quota => GammaPhase2::Quota,
        Phase2Arg::Literal => GammaPhase2::Literal,
    };
    let (ds, stats) = synth::generate(&cfg)?;
    let split = if a.train_fraction == synth::DEFAULT_TRAIN_FRACTION {
        synth::default_split(ds.len(), a.seed)?
    } else {
        synth::split(
            ds.len(),
            a.train_fraction,
            mmlab_core::rng::derive_seed(a.seed, mmlab_core::rng::streams::SPLIT),
        )?
    };
    synth::save(&ds, &split, &a.out)?;
    let mut manifest = RunManifest::new(
        "gen",
        json!({ "gen": cfg, "train_fraction": a.train_fraction }),
        vec![a.seed],
    );
    manifest.outputs = vec![a.out.clone(), synth::split_path(&a.out), synth::sidecar_path(&a.out)];
    manifest.wall_time_secs = start.elapsed().as_secs_f64();
    let digest = report::file_digest(&a.out)?;
    let summary = json!({
        "path": a.out,
        "sha256": digest.sha256,
        "rows": ds.len(),
        "class_counts": ds.class_counts(),
        "n_train": split.n_train(),
        "n_test": split.n_test(),
        "stats": stats,
        "manifest": manifest,
    });
    fsutil::write_json(&manifest_path(&a.out), &manifest)?;
    emit(&summary, json_out, None, || output::generate(&summary))
}

fn manifest_path(p: &Path) -> PathBuf {
    p.with_extension("manifest.json")
}

fn load_teacher(path: &Path, want: Modality) -> Result<ModelBundle> {
    let b = ModelBundle::load(path).with_context(|| format!("loading teacher {}", path.display()))?;
    let (m, _) = b.uni().with_context(|| format!("{} is not a uni-modal model", path.display()))?;
    ensure!(m == want, "{} was trained on modality {}", path.display(), m.index());
    Ok(b)
}

pub fn train(a: &TrainArgs, json_out: bool) -> Result<()> {
    let start = Instant::now();
    let mut rc = load_config(a.config.as_deref())?;
    let (ds, _, view) = load_view(&a.data)?;
    let seed = a.seed.or(rc.seed).unwrap_or(ds.seed);
    rc.seed = Some(seed);
    rc.train.seed = seed;
    if let Some(n) = a.max_iters {
        rc.train.max_iters = n;
    }
    if let Some(v) = a.lambda_task {
        rc.umt.lambda_task = v;
    }
    if let Some(v) = a.lambda_distill {
        rc.umt.lambda_distill = v;
    }
    if let Some(v) = a.drop_prob {
        rc.drop_prob = v;
    }
    ensure!(
        rc.umt.lambda_task >= 0.0 && rc.umt.lambda_distill >= 0.0,
        "loss weights must be >= 0"
    );
    let mut manifest = data_manifest(
        "train",
        json!({ "mode": a.mode.name(), "run": rc }),
        vec![ds.seed, seed],
        &a.data,
    )?;
    let name = a.mode.name();
    let mut outputs = Vec::new();
    let bundle = match a.mode {
        Mode::Uni1 => train_unimodal(&view, Modality::One, rc.uni_hidden, &rc.train)?,
        Mode::Uni2 => train_unimodal(&view, Modality::Two, rc.uni_hidden, &rc.train)?,
        Mode::Naive => train_naive_fusion(&view, rc.arch, &rc.train)?,
        Mode::Aux => train_aux_ce(&view, rc.arch, &rc.train)?,
        Mode::Dropout => train_modality_dropout(&view, rc.arch, rc.drop_prob, rc.drop_mode, &rc.train)?,
        Mode::Umt => {
            let teachers = match (&a.teacher1, &a.teacher2) {
                (Some(t1), Some(t2)) => {
                    manifest.add_input(t1)?;
                    manifest.add_input(t2)?;
                    [load_teacher(t1, Modality::One)?, load_teacher(t2, Modality::Two)?]
                }
                _ if a.auto_teachers => {
                    let ts = train_teachers(&view, rc.arch, &rc.train)?;
                    for (i, t) in ts.iter().enumerate() {
                        let p = a.out.join(format!("teacher{}.bundle.json", i + 1));
                        t.save(&p)?;
                        outputs.push(p);
                    }
                    ts
                }
                _ => bail!("umt needs --teacher1 and --teacher2, or --auto-teachers"),
            };
            train_umt(&view, rc.arch, rc.umt, &teachers, &rc.train)?
        }
    };
    let bundle_path = a.out.join(format!("{name}.bundle.json"));
    let result_path = a.out.join(format!("{name}{RESULT_SUFFIX}"));
    outputs.push(bundle_path.clone());
    outputs.push(result_path.clone());
    manifest.outputs = outputs;
    manifest.wall_time_secs = start.elapsed().as_secs_f64();
    bundle.save(&bundle_path)?;
    let result = RunResult::from_bundle(&bundle, &view, manifest.clone())?;
    fsutil::write_json(&result_path, &result)?;
    fsutil::write_json(&a.out.join(format!("{name}.manifest.json")), &manifest)?;
    emit(&result, json_out, None, || output::train(&result, &bundle))
}

#[derive(Serialize)]
struct ProbeSummary {
    model: PathBuf,
    modality: u8,
    reports: Vec<ProbeReport>,
    median: f64,
    min: f64,
    max: f64,
    manifest: RunManifest,
}

pub fn probe(a: &ProbeArgs, json_out: bool) -> Result<()> {
    ensure!(a.seeds >= 1, "--seeds must be at least 1");
    let start = Instant::now();
    let rc = load_config(a.config.as_deref())?;
    let (_, _, view) = load_view(&a.data)?;
    let bundle = ModelBundle::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    warn_if_other_split(&bundle, &view, &a.model);
    let m = Modality::from_index(a.modality as usize)?;
    let seeds: Vec<u64> = (a.seed..a.seed + a.seeds).collect();
    let mut reports = Vec::with_capacity(seeds.len());
    for &s in &seeds {
        let cfg = TrainConfig {
            seed: s,
            ..rc.train.clone()
        };
        reports.push(linear_probe(&bundle, m, &view, &cfg)?);
    }
    let accs: Vec<f64> = reports.iter().map(|r| r.probe_test_acc).collect();
    let mut manifest = data_manifest("probe", json!({ "modality": a.modality, "train": rc.train }), seeds, &a.data)?;
    manifest.add_input(&a.model)?;
    manifest.outputs = a.out.iter().cloned().collect();
    manifest.wall_time_secs = start.elapsed().as_secs_f64();
    let summary = ProbeSummary {
        model: a.model.clone(),
        modality: a.modality,
        median: report::median(&accs).unwrap_or(0.0),
        min: accs.iter().copied().fold(f64::INFINITY, f64::min),
        max: accs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        reports,
        manifest,
    };
    emit(&summary, json_out, a.out.as_deref(), || {
        output::probe(&summary.reports, summary.median, summary.min, summary.max)
    })
}

fn warn_if_other_split(bundle: &ModelBundle, view: &DataView, path: &Path) {
    if let Some(d) = &bundle.data
        && d.split_digest != view.data_ref.split_digest
    {
        log::warn!(
            "{} was trained on a different split; test rows may overlap its training data",
            path.display()
        );
    }
}

fn parse_weights(s: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    ensure!(parts.len() == 2, "--weights expects `w1,w2`, got `{s}`");
    let w1: f64 = parts[0].parse().with_context(|| format!("bad weight `{}`", parts[0]))?;
    let w2: f64 = parts[1].parse().with_context(|| format!("bad weight `{}`", parts[1]))?;
    Ok((w1, w2))
}

pub fn ume(a: &UmeArgs, json_out: bool) -> Result<()> {
    let start = Instant::now();
    let weights = parse_weights(&a.weights)?;
    let (_, _, view) = load_view(&a.data)?;
    let b1 = load_teacher(&a.model1, Modality::One)?;
    let b2 = load_teacher(&a.model2, Modality::Two)?;
    warn_if_other_split(&b1, &view, &a.model1);
    warn_if_other_split(&b2, &view, &a.model2);
    let (_, n1) = b1.uni()?;
    let (_, n2) = b2.uni()?;
    let preds = ume_predict(&n1, &n2, &view.x1_test, &view.x2_test, weights)?;
    let cm = confusion(&preds, &view.y_test, view.n_classes)?;
    let mut manifest = data_manifest("ume", json!({ "weights": [weights.0, weights.1] }), vec![], &a.data)?;
    manifest.add_input(&a.model1)?;
    manifest.add_input(&a.model2)?;
    manifest.outputs = a.out.iter().cloned().collect();
    manifest.wall_time_secs = start.elapsed().as_secs_f64();
    let summary = json!({
        "test_acc": cm.accuracy(),
        "uni_test_acc": [b1.metrics.test_acc, b2.metrics.test_acc],
        "weights": [weights.0, weights.1],
        "confusion": cm,
        "manifest": manifest,
    });
    emit(&summary, json_out, a.out.as_deref(), || output::ume(&summary, &cm))
}

pub fn decide(a: &DecideArgs, json_out: bool) -> Result<()> {
    let start = Instant::now();
    let rc = load_config(a.config.as_deref())?;
    let (ds, _, view) = load_view(&a.data)?;
    let seed = a.seed.or(rc.seed).unwrap_or(ds.seed);
    let cfg = TrainConfig {
        seed,
        ..rc.train.clone()
    };
    let rep = decision_trick(&view, a.hidden, &cfg)?;
    let mut manifest = data_manifest("decide", json!({ "hidden": a.hidden, "train": cfg }), vec![ds.seed, seed], &a.data)?;
    manifest.outputs = a.out.iter().cloned().collect();
    manifest.wall_time_secs = start.elapsed().as_secs_f64();
    let summary = json!({ "decision": rep, "manifest": manifest });
    emit(&summary, json_out, a.out.as_deref(), || output::decide(&rep))
}

fn load_universe(spec: &str, c: f64) -> Result<FeatureUniverse> {
    Ok(match spec {
        "example" => FeatureUniverse::worked_example(true, c),
        "example-no-h" => FeatureUniverse::worked_example(false, c),
        path => FeatureUniverse::load(Path::new(path)).with_context(|| format!("loading universe {path}"))?,
    })
}

pub fn theory(a: &TheoryArgs, json_out: bool) -> Result<()> {
    ensure!(a.trials >= 1, "--trials must be at least 1");
    let start = Instant::now();
    let u = load_universe(&a.universe, a.c)?;
    let seeds: Vec<u64> = (a.seed..a.seed + a.trials).collect();
    let p0 = a.boost.unwrap_or(0.0);
    let mut rep: TheoryReport = theory::laziness_report(&u, p0, a.delta, a.n_train, a.n_test, &seeds)?;
    if a.boost.is_some() {
        rep.theorem2 = Some(theory::theorem2_check(&u, p0, a.n_train, a.n_test, &seeds)?);
    }
    let mut warnings = Vec::new();
    if a.lemma_trials > 0 {
        // The lemma conditions on all but one feature.
        let keep: Vec<usize> = (0..u.len().saturating_sub(1).max(1)).collect();
        match theory::lemma_complementary_check(&u.restrict(&keep), a.lemma_trials, a.seed) {
            Ok(l) => rep.lemma = Some(l),
            Err(e) => warnings.push(format!("complementary-event check skipped: {e}")),
        }
    }
    let mut manifest = RunManifest::new(
        "theory",
        json!({ "universe": a.universe, "c": u.c, "delta": a.delta, "boost": a.boost,
                "n_train": a.n_train, "n_test": a.n_test, "lemma_trials": a.lemma_trials }),
        seeds,
    );
    if Path::new(&a.universe).is_file() {
        manifest.add_input(Path::new(&a.universe))?;
    }
    manifest.outputs = a.out.iter().cloned().collect();
    manifest.wall_time_secs = start.elapsed().as_secs_f64();
    for w in &warnings {
        log::warn!("{w}");
    }
    let summary = json!({ "report": rep, "warnings": warnings, "manifest": manifest });
    emit(&summary, json_out, a.out.as_deref(), || output::theory(&rep, &u))
}

pub fn report(a: &ReportArgs, json_out: bool) -> Result<()> {
    ensure!(a.input.is_dir(), "{} is not a directory", a.input.display());
    let (results, mut warnings) = report::load_results(&a.input)?;
    let mut rep = report::build_report(&results);
    warnings.append(&mut rep.warnings);
    rep.warnings = warnings;
    for w in &rep.warnings {
        log::warn!("{w}");
    }
    emit(&rep, json_out, a.out.as_deref(), || output::report(&rep))
}
