//! Executable forms of the laziness statements, the boosting theorem and the
//! complementary-probability lemma.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::learn::{StrategyKind, StrategyRun, accuracy_on, run_on_points, sample_points};
use super::{FeatureModality, FeatureUniverse, sample_realization};
use crate::error::{Error, Result};
use crate::rng::{Rng, derive_seed, streams};

/// Counts and probabilities entering the performance-laziness bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem1cInput {
    pub k_pa: usize,
    /// Joint training's uni-modal feature count per modality.
    pub k: Vec<usize>,
    /// Uni-modal training's feature count per modality.
    pub b: Vec<usize>,
    /// Probabilities of the paired features joint training learned.
    pub p_h: Vec<f64>,
    /// Probabilities of all uni-modal features; sorted descending before use.
    pub p_uni: Vec<f64>,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem1cReport {
    pub radicand: f64,
    pub margin: f64,
    /// Sum of the learned paired probabilities.
    pub lhs: f64,
    /// Tail sum of sorted uni-modal probabilities plus the margin.
    pub rhs: f64,
    /// Inclusive 1-based positions of the tail sum.
    pub range: (usize, usize),
    pub tail_sum: f64,
    pub inequality_holds: bool,
}

fn check_input(inp: &Theorem1cInput) -> Result<()> {
    if !(inp.delta > 0.0 && inp.delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {}", inp.delta)));
    }
    if inp.k.len() != inp.b.len() || inp.b.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "need one k and one b per modality, got {} and {}",
            inp.k.len(),
            inp.b.len()
        )));
    }
    if let Some(m) = (0..inp.b.len()).find(|&m| inp.b[m] < inp.k[m]) {
        return Err(Error::InvalidArgument(format!(
            "modality {}: b = {} is below k = {}",
            m + 1,
            inp.b[m],
            inp.k[m]
        )));
    }
    if inp.p_h.iter().chain(&inp.p_uni).any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidArgument("probabilities must lie in [0, 1]".into()));
    }
    Ok(())
}

fn bound(inp: &Theorem1cInput, lo: usize, hi: usize) -> Theorem1cReport {
    let gaps: usize = inp.b.iter().zip(&inp.k).map(|(b, k)| b - k).sum();
    let radicand = 8.0 * (inp.k_pa + gaps) as f64 * (1.0 / inp.delta).ln();
    let margin = radicand.sqrt();
    let mut sorted = inp.p_uni.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    // Positions past the end of the list contribute nothing.
    let tail_sum: f64 = (lo..=hi).filter_map(|i| sorted.get(i - 1)).sum();
    let lhs: f64 = inp.p_h.iter().sum();
    let rhs = tail_sum + margin;
    Theorem1cReport {
        radicand,
        margin,
        lhs,
        rhs,
        range: (lo, hi),
        tail_sum,
        inequality_holds: lhs <= rhs,
    }
}

/// Two-modality bound; the tail runs over positions `b1 + 1 ..= b1 + b2`.
pub fn theorem1c_check(inp: &Theorem1cInput) -> Result<Theorem1cReport> {
    check_input(inp)?;
    if inp.b.len() != 2 {
        return Err(Error::InvalidArgument(format!("two modalities expected, got {}", inp.b.len())));
    }
    Ok(bound(inp, inp.b[0] + 1, inp.b[0] + inp.b[1]))
}

/// T-modality bound; the tail runs over positions `min b + 1 ..= sum b`.
pub fn theorem1c_tmodal_check(inp: &Theorem1cInput) -> Result<Theorem1cReport> {
    check_input(inp)?;
    let min_b = *inp.b.iter().min().expect("non-empty");
    Ok(bound(inp, min_b + 1, inp.b.iter().sum()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub trials: u64,
    pub count_plus: u64,
    pub count_minus: u64,
    pub p_plus: f64,
    pub p_minus: f64,
    pub c: f64,
    /// `None` when either event was never observed.
    pub ratio_estimate: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub inconclusive: bool,
}

const LEMMA_CHUNK: u64 = 1 << 16;
const Z_99: f64 = 2.575_829_303_549_01;

fn shared_c(u: &FeatureUniverse) -> Result<()> {
    for f in &u.features {
        if f.custom_eps && f.p > 0.0 && ((f.p / f.eps) - u.c).abs() > 1e-9 * u.c {
            return Err(Error::InvalidUniverse(format!(
                "feature `{}` has p / eps = {}, not c = {}",
                f.id,
                f.p / f.eps,
                u.c
            )));
        }
    }
    Ok(())
}

/// Monte-Carlo estimate of `P(sum y r = 1) / P(sum y r = -1)` over all
/// features of `u`, with a 99% delta-method interval on the log ratio.
/// Trials are split into fixed chunks, each with its own derived stream,
/// so the result does not depend on the thread count.
pub fn lemma_complementary_check(u: &FeatureUniverse, n_trials: u64, seed: u64) -> Result<LemmaReport> {
    u.validate()?;
    shared_c(u)?;
    if n_trials == 0 {
        return Err(Error::InvalidArgument("n_trials must be >= 1".into()));
    }
    let base = derive_seed(seed, streams::TRIAL);
    let chunks = n_trials.div_ceil(LEMMA_CHUNK);
    let (count_plus, count_minus) = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = Rng::new(derive_seed(base, k));
            let n = LEMMA_CHUNK.min(n_trials - k * LEMMA_CHUNK);
            let (mut plus, mut minus) = (0u64, 0u64);
            for _ in 0..n {
                let r = sample_realization(u, &mut rng);
                match r.agree.iter().map(|&a| i64::from(a)).sum::<i64>() {
                    1 => plus += 1,
                    -1 => minus += 1,
                    _ => {}
                }
            }
            (plus, minus)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = n_trials as f64;
    let (p_plus, p_minus) = (count_plus as f64 / n, count_minus as f64 / n);
    let inconclusive = count_plus == 0 || count_minus == 0;
    let (ratio_estimate, ci_low, ci_high) = if inconclusive {
        (None, None, None)
    } else {
        let ratio = p_plus / p_minus;
        // Multinomial counts: Cov(p+, p-) = -p+ p- / n.
        let var = (1.0 - p_plus) / (n * p_plus) + (1.0 - p_minus) / (n * p_minus) + 2.0 / n;
        let half = Z_99 * var.sqrt();
        (Some(ratio), Some(ratio * (-half).exp()), Some(ratio * half.exp()))
    };
    Ok(LemmaReport {
        trials: n_trials,
        count_plus,
        count_minus,
        p_plus,
        p_minus,
        c: u.c,
        ratio_estimate,
        ci_low,
        ci_high,
        inconclusive,
    })
}

/// Exact `(P(sum = 1), P(sum = -1))` by enumerating all `3^n` sign patterns.
pub fn lemma_exact_ratio(u: &FeatureUniverse) -> Result<(f64, f64)> {
    if u.len() > 16 {
        return Err(Error::InvalidArgument(format!("{} features is too many to enumerate", u.len())));
    }
    let mut plus = 0.0;
    let mut minus = 0.0;
    for mut code in 0..3usize.pow(u.len() as u32) {
        let (mut prob, mut sum) = (1.0, 0i64);
        for f in &u.features {
            match code % 3 {
                0 => prob *= 1.0 - f.p - f.eps,
                1 => {
                    prob *= f.p;
                    sum += 1;
                }
                _ => {
                    prob *= f.eps;
                    sum -= 1;
                }
            }
            code /= 3;
        }
        match sum {
            1 => plus += prob,
            -1 => minus += prob,
            _ => {}
        }
    }
    Ok((plus, minus))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Seed {
    pub seed: u64,
    pub ensemble_ids: Vec<String>,
    pub joint_ids: Vec<String>,
    pub boosted_ids: Vec<String>,
    /// Boosted set contains every ensemble feature and all of `S`.
    pub superset: bool,
    pub learned_all_s: bool,
    pub ensemble_acc: f64,
    pub joint_acc: f64,
    pub boosted_acc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Report {
    pub p0: f64,
    /// Paired features with `p > p0`.
    pub s: Vec<String>,
    pub s_empty: bool,
    pub seeds: Vec<Theorem2Seed>,
    pub superset_rate: f64,
    pub mean_boosted_minus_joint: f64,
    pub mean_boosted_minus_ensemble: f64,
}

struct SeedTriple {
    ensemble: StrategyRun,
    joint: StrategyRun,
    boosted: StrategyRun,
    test_seed: u64,
    guess_seed: u64,
}

fn run_three(u: &FeatureUniverse, p0: f64, n_train: usize, n_test: usize, seed: u64) -> Result<SeedTriple> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::InvalidArgument("n_train and n_test must be >= 1".into()));
    }
    let train = sample_points(u, n_train, derive_seed(seed, streams::TRAIN_POINTS));
    let test_seed = derive_seed(seed, streams::TEST_POINTS);
    let test = sample_points(u, n_test, test_seed);
    let guess_seed = derive_seed(seed, streams::GUESS);
    Ok(SeedTriple {
        ensemble: run_on_points(u, StrategyKind::UniEnsemble, &train, &test, guess_seed)?,
        joint: run_on_points(u, StrategyKind::Joint, &train, &test, guess_seed)?,
        boosted: run_on_points(u, StrategyKind::JointBoosted(p0), &train, &test, guess_seed)?,
        test_seed,
        guess_seed,
    })
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 { 0.0 } else { s / n as f64 }
}

pub fn theorem2_check(
    u: &FeatureUniverse,
    p0: f64,
    n_train: usize,
    n_test: usize,
    seeds: &[u64],
) -> Result<Theorem2Report> {
    if !(p0 > 0.0 && p0.is_finite()) {
        return Err(Error::InvalidArgument(format!("boost must be > 0, got {p0}")));
    }
    let s: Vec<usize> = u.paired_features().into_iter().filter(|&i| u.features[i].p > p0).collect();
    let mut out = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let t = run_three(u, p0, n_train, n_test, seed)?;
        let has = |i: &usize| t.boosted.learned.ids.contains(i);
        let learned_all_s = s.iter().all(has);
        out.push(Theorem2Seed {
            seed,
            ensemble_ids: u.ids(&t.ensemble.learned.ids),
            joint_ids: u.ids(&t.joint.learned.ids),
            boosted_ids: u.ids(&t.boosted.learned.ids),
            superset: learned_all_s && t.ensemble.learned.ids.iter().all(has),
            learned_all_s,
            ensemble_acc: t.ensemble.accuracy,
            joint_acc: t.joint.accuracy,
            boosted_acc: t.boosted.accuracy,
        });
    }
    Ok(Theorem2Report {
        p0,
        s_empty: s.is_empty(),
        s: u.ids(&s),
        superset_rate: mean(out.iter().map(|r| f64::from(u8::from(r.superset)))),
        mean_boosted_minus_joint: mean(out.iter().map(|r| r.boosted_acc - r.joint_acc)),
        mean_boosted_minus_ensemble: mean(out.iter().map(|r| r.boosted_acc - r.ensemble_acc)),
        seeds: out,
    })
}

/// Per-seed laziness quantities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LazinessReport {
    pub b_counts: Vec<usize>,
    pub k_counts: Vec<usize>,
    pub k_pa: usize,
    pub ens_acc: f64,
    pub joint_acc: f64,
    pub boosted_acc: f64,
    pub delta: f64,
    /// `None` when some `k` exceeds its `b`, where the bound is undefined.
    pub margin: Option<f64>,
    pub inequality_holds: Option<bool>,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    #[serde(flatten)]
    pub report: LazinessReport,
    pub quantity_laziness_holds: bool,
    pub bound: Option<Theorem1cReport>,
    /// Accuracy of joint training's features of each modality alone.
    pub joint_modality_acc: Vec<f64>,
    /// Accuracy of each modality's uni-modal learned set.
    pub uni_modality_acc: Vec<f64>,
    pub ensemble_ids: Vec<String>,
    pub joint_ids: Vec<String>,
    pub boosted_ids: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub c: f64,
    pub n_modalities: usize,
    pub n_features: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub delta: f64,
    pub p0: f64,
    pub runs: Vec<SeedRun>,
    pub mean_ens_acc: f64,
    pub mean_joint_acc: f64,
    pub mean_boosted_acc: f64,
    pub quantity_violation_rate: f64,
    /// Among seeds where the bound is defined.
    pub inequality_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem2: Option<Theorem2Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma: Option<LemmaReport>,
}

/// `sum k + k_pa <= min b`.
pub fn quantity_laziness_holds(b: &[usize], k: &[usize], k_pa: usize) -> bool {
    k.iter().sum::<usize>() + k_pa <= b.iter().copied().min().unwrap_or(0)
}

/// Runs the ensemble, joint and boosted procedures for every seed on shared
/// points and evaluates the laziness statements.
pub fn laziness_report(
    u: &FeatureUniverse,
    p0: f64,
    delta: f64,
    n_train: usize,
    n_test: usize,
    seeds: &[u64],
) -> Result<TheoryReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    let p_uni: Vec<f64> = u.uni_features().iter().map(|&i| u.features[i].p).collect();
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let t = run_three(u, p0, n_train, n_test, seed)?;
        let b: Vec<usize> = t.ensemble.per_modality.iter().map(|l| l.ids.len()).collect();
        let k = t.joint.learned.modality_counts(u);
        let k_pa = t.joint.learned.paired_count(u);
        let p_h = t
            .joint
            .learned
            .ids
            .iter()
            .filter(|&&i| u.features[i].modality == FeatureModality::Paired)
            .map(|&i| u.features[i].p)
            .collect();
        let inp = Theorem1cInput {
            k_pa,
            k: k.clone(),
            b: b.clone(),
            p_h,
            p_uni: p_uni.clone(),
            delta,
        };
        let bound = if b.iter().zip(&k).all(|(b, k)| b >= k) {
            Some(if u.n_modalities == 2 { theorem1c_check(&inp)? } else { theorem1c_tmodal_check(&inp)? })
        } else {
            None
        };
        let test = sample_points(u, n_test, t.test_seed);
        let mut joint_modality_acc = Vec::with_capacity(u.n_modalities);
        let mut uni_modality_acc = Vec::with_capacity(u.n_modalities);
        for m in 1..=u.n_modalities {
            joint_modality_acc.push(accuracy_on(&t.joint.learned.of_modality(u, m), &test, t.guess_seed)?);
            uni_modality_acc.push(accuracy_on(&t.ensemble.per_modality[m - 1].ids, &test, t.guess_seed)?);
        }
        runs.push(SeedRun {
            seed,
            quantity_laziness_holds: quantity_laziness_holds(&b, &k, k_pa),
            report: LazinessReport {
                b_counts: b,
                k_counts: k,
                k_pa,
                ens_acc: t.ensemble.accuracy,
                joint_acc: t.joint.accuracy,
                boosted_acc: t.boosted.accuracy,
                delta,
                margin: bound.as_ref().map(|r| r.margin),
                inequality_holds: bound.as_ref().map(|r| r.inequality_holds),
                trials: n_test,
            },
            bound,
            joint_modality_acc,
            uni_modality_acc,
            ensemble_ids: u.ids(&t.ensemble.learned.ids),
            joint_ids: u.ids(&t.joint.learned.ids),
            boosted_ids: u.ids(&t.boosted.learned.ids),
        });
    }
    let defined: Vec<bool> = runs.iter().filter_map(|r| r.report.inequality_holds).collect();
    Ok(TheoryReport {
        c: u.c,
        n_modalities: u.n_modalities,
        n_features: u.len(),
        n_train,
        n_test,
        delta,
        p0,
        mean_ens_acc: mean(runs.iter().map(|r| r.report.ens_acc)),
        mean_joint_acc: mean(runs.iter().map(|r| r.report.joint_acc)),
        mean_boosted_acc: mean(runs.iter().map(|r| r.report.boosted_acc)),
        quantity_violation_rate: mean(runs.iter().map(|r| f64::from(u8::from(!r.quantity_laziness_holds)))),
        inequality_rate: (!defined.is_empty()).then(|| mean(defined.iter().map(|&h| f64::from(u8::from(h))))),
        runs,
        theorem2: None,
        lemma: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::FeatureModality::*;
    use approx::assert_relative_eq;

    fn input(k_pa: usize, k: [usize; 2], b: [usize; 2], delta: f64) -> Theorem1cInput {
        Theorem1cInput {
            k_pa,
            k: k.to_vec(),
            b: b.to_vec(),
            p_h: vec![],
            p_uni: vec![0.3, 0.2, 0.1, 0.05],
            delta,
        }
    }

    #[test]
    fn zero_radicand() {
        let r = theorem1c_check(&input(0, [2, 1], [2, 1], 0.5)).unwrap();
        assert_eq!(r.margin, 0.0);
        assert_eq!(r.lhs, 0.0);
        assert!(r.inequality_holds);
        assert_eq!(r.range, (3, 3));
        assert_relative_eq!(r.tail_sum, 0.1);
    }

    #[test]
    fn radicand_of_four_at_inverse_e() {
        let r = theorem1c_check(&input(1, [1, 0], [2, 2], (-1.0f64).exp())).unwrap();
        assert_relative_eq!(r.margin, 32f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn invalid_inputs() {
        assert!(theorem1c_check(&input(0, [3, 0], [2, 0], 0.5)).is_err());
        assert!(theorem1c_check(&input(0, [0, 0], [1, 1], 1.0)).is_err());
        assert!(theorem1c_check(&input(0, [0, 0], [1, 1], 0.0)).is_err());
    }

    #[test]
    fn tmodal_matches_two_modal_when_b1_is_the_minimum() {
        let inp = input(1, [0, 1], [1, 3], 0.1);
        let a = theorem1c_check(&inp).unwrap();
        let b = theorem1c_tmodal_check(&inp).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exact_ratio_is_c() {
        for c in [2.0, 4.0, 7.5] {
            let u = FeatureUniverse::from_probs(
                c,
                2,
                &[("a", Uni(1), 0.1), ("b", Uni(2), 0.3), ("h", Paired, 0.2), ("d", Uni(1), 0.05)],
            )
            .unwrap();
            let (plus, minus) = lemma_exact_ratio(&u).unwrap();
            assert_relative_eq!(plus / minus, c, max_relative = 1e-12);
        }
    }

    #[test]
    fn lemma_single_feature() {
        let u = FeatureUniverse::from_probs(4.0, 2, &[("f", Uni(1), 0.3)]).unwrap();
        let r = lemma_complementary_check(&u, 1_000_000, 1).unwrap();
        let ratio = r.ratio_estimate.unwrap();
        assert!((3.8..=4.2).contains(&ratio), "{ratio}");
        assert!(r.ci_low.unwrap() < ratio && ratio < r.ci_high.unwrap());
    }

    #[test]
    fn lemma_empty_features_inconclusive() {
        let u = FeatureUniverse::from_probs(4.0, 2, &[("e", Uni(1), 0.0), ("e2", Uni(2), 0.0)]).unwrap();
        let r = lemma_complementary_check(&u, 10_000, 0).unwrap();
        assert!(r.inconclusive);
        assert_eq!((r.p_plus, r.p_minus), (0.0, 0.0));
        assert_eq!(r.ratio_estimate, None);
    }

    #[test]
    fn lemma_rejects_mixed_c() {
        let mut u = FeatureUniverse::from_probs(4.0, 2, &[("f", Uni(1), 0.3)]).unwrap();
        u.features[0].eps = 0.15;
        u.features[0].custom_eps = true;
        assert!(lemma_complementary_check(&u, 100, 0).is_err());
    }

    #[test]
    fn lemma_is_thread_count_independent() {
        let u = FeatureUniverse::from_probs(2.0, 2, &[("a", Uni(1), 0.1), ("b", Uni(2), 0.1)]).unwrap();
        let a = lemma_complementary_check(&u, 200_000, 9).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| lemma_complementary_check(&u, 200_000, 9).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn theorem2_example() {
        let u = FeatureUniverse::worked_example(true, 4.0);
        let r = theorem2_check(&u, 0.15, 2000, 2000, &[0, 1, 2]).unwrap();
        assert_eq!(r.s, ["h"]);
        for s in &r.seeds {
            assert!(s.boosted_ids.contains(&"h".to_string()));
        }
        assert!(theorem2_check(&u, 0.0, 10, 10, &[0]).is_err());
        assert!(theorem2_check(&u, 0.5, 10, 10, &[0]).unwrap().s_empty);
    }

    #[test]
    fn theorem2_without_paired_features_matches_ensemble() {
        let u = FeatureUniverse::worked_example(false, 4.0);
        let r = theorem2_check(&u, 0.15, 1000, 500, &[0, 1, 2, 3]).unwrap();
        assert!(r.s_empty);
        for s in &r.seeds {
            let mut a = s.boosted_ids.clone();
            let mut b = s.ensemble_ids.clone();
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn laziness_report_is_consistent() {
        let u = FeatureUniverse::worked_example(true, 4.0);
        let r = laziness_report(&u, 0.15, 0.1, 500, 500, &[0, 1]).unwrap();
        for run in &r.runs {
            assert_eq!(run.report.k_counts.iter().sum::<usize>() + run.report.k_pa, run.joint_ids.len());
            assert_eq!(run.report.b_counts.iter().sum::<usize>(), run.ensemble_ids.len());
            assert_eq!(run.report.margin.is_some(), run.bound.is_some());
            for a in [run.report.ens_acc, run.report.joint_acc, run.report.boosted_acc] {
                assert!((0.0..=1.0).contains(&a));
            }
        }
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["runs"][0].get("b_counts").is_some());
    }
}
