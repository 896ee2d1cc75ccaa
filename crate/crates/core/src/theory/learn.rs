use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{FeatureModality, FeatureUniverse, Realization, sample_realization, vote_predict};
use crate::error::{Error, Result};
use crate::rng::{Rng, derive_seed, streams};

/// Features sorted by `p + p0 * [boosted]` descending; ties by modality
/// (uni-modal 1..T, then paired) and then declaration order.
pub fn effective_priority(u: &FeatureUniverse, boosted: &[usize], p0: f64) -> Result<Vec<usize>> {
    if !(p0 >= 0.0 && p0.is_finite()) {
        return Err(Error::InvalidArgument(format!("boost must be >= 0, got {p0}")));
    }
    if let Some(&b) = boosted.iter().find(|&&b| b >= u.len()) {
        return Err(Error::UnknownFeature(format!("#{b}")));
    }
    let prio = |i: usize| u.features[i].p + if boosted.contains(&i) { p0 } else { 0.0 };
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&a, &b| {
        prio(b)
            .total_cmp(&prio(a))
            .then_with(|| u.features[a].modality.cmp(&u.features[b].modality))
            .then(a.cmp(&b))
    });
    Ok(order)
}

/// Learned feature indices, in the order they were accepted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnedSet {
    pub ids: Vec<usize>,
    /// Training misclassification in half-points after learning.
    pub final_error_halves: u64,
}

impl LearnedSet {
    /// Learned uni-modal features per modality (index 0 is modality 1).
    pub fn modality_counts(&self, u: &FeatureUniverse) -> Vec<usize> {
        let mut k = vec![0; u.n_modalities];
        for &i in &self.ids {
            if let FeatureModality::Uni(m) = u.features[i].modality {
                k[m - 1] += 1;
            }
        }
        k
    }

    pub fn paired_count(&self, u: &FeatureUniverse) -> usize {
        self.ids
            .iter()
            .filter(|&&i| u.features[i].modality == FeatureModality::Paired)
            .count()
    }

    pub fn of_modality(&self, u: &FeatureUniverse, m: usize) -> Vec<usize> {
        self.ids
            .iter()
            .copied()
            .filter(|&i| u.features[i].modality == FeatureModality::Uni(m))
            .collect()
    }
}

/// Misclassification in half-points: 2 per wrong point, 1 per tie.
fn point_cost(err: i64) -> u64 {
    match err.cmp(&0) {
        Ordering::Less => 0,
        Ordering::Equal => 1,
        Ordering::Greater => 2,
    }
}

pub fn misclassification_halves(learned: &[usize], points: &[Realization]) -> u64 {
    points
        .iter()
        .map(|p| point_cost(super::point_error(learned, p)))
        .sum()
}

/// Scans `candidates` in order, keeping one only if it strictly lowers the
/// training misclassification; stops at zero error, at `budget` features or
/// when candidates run out.
pub fn greedy_learn(points: &[Realization], candidates: &[usize], budget: Option<usize>) -> Result<LearnedSet> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("greedy learning needs training points".into()));
    }
    let mut errs = vec![0i64; points.len()];
    let mut current: u64 = errs.iter().map(|&e| point_cost(e)).sum();
    let mut ids = Vec::new();
    for &c in candidates {
        if current == 0 || budget.is_some_and(|b| ids.len() >= b) {
            break;
        }
        let trial: u64 = points
            .iter()
            .zip(&errs)
            .map(|(p, &e)| point_cost(e - i64::from(p.agree[c])))
            .sum();
        if trial < current {
            for (p, e) in points.iter().zip(errs.iter_mut()) {
                *e -= i64::from(p.agree[c]);
            }
            current = trial;
            ids.push(c);
        }
    }
    Ok(LearnedSet {
        ids,
        final_error_halves: current,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "p0", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StrategyKind {
    UniEnsemble,
    Joint,
    JointBoosted(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyRun {
    pub strategy: StrategyKind,
    pub learned: LearnedSet,
    /// For the ensemble, each modality's own learned set.
    pub per_modality: Vec<LearnedSet>,
    pub accuracy: f64,
}

pub fn sample_points(u: &FeatureUniverse, n: usize, seed: u64) -> Vec<Realization> {
    let mut rng = Rng::new(seed);
    (0..n).map(|_| sample_realization(u, &mut rng)).collect()
}

/// Vote accuracy of `learned` on `points`, ties guessed from `guess_seed`.
pub fn accuracy_on(learned: &[usize], points: &[Realization], guess_seed: u64) -> Result<f64> {
    if points.is_empty() {
        return Ok(0.0);
    }
    let mut guess = Rng::new(guess_seed);
    let mut hits = 0usize;
    for p in points {
        if vote_predict(learned, p, &mut guess)? == p.y {
            hits += 1;
        }
    }
    Ok(hits as f64 / points.len() as f64)
}

/// Runs one training procedure on points drawn from the seed's train
/// stream and evaluates on the test stream. Every strategy sees the same
/// points for a given seed.
pub fn run_strategy(
    u: &FeatureUniverse,
    strategy: StrategyKind,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<StrategyRun> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::InvalidArgument("n_train and n_test must be >= 1".into()));
    }
    let train = sample_points(u, n_train, derive_seed(seed, streams::TRAIN_POINTS));
    let test = sample_points(u, n_test, derive_seed(seed, streams::TEST_POINTS));
    run_on_points(u, strategy, &train, &test, derive_seed(seed, streams::GUESS))
}

pub(crate) fn run_on_points(
    u: &FeatureUniverse,
    strategy: StrategyKind,
    train: &[Realization],
    test: &[Realization],
    guess_seed: u64,
) -> Result<StrategyRun> {
    let (learned, per_modality) = match strategy {
        StrategyKind::UniEnsemble => {
            let order = effective_priority(u, &[], 0.0)?;
            let mut per = Vec::with_capacity(u.n_modalities);
            let mut ids = Vec::new();
            for m in 1..=u.n_modalities {
                let cands: Vec<usize> = order
                    .iter()
                    .copied()
                    .filter(|&i| u.features[i].modality == FeatureModality::Uni(m))
                    .collect();
                let l = greedy_learn(train, &cands, None)?;
                ids.extend(&l.ids);
                per.push(l);
            }
            let union = LearnedSet {
                final_error_halves: misclassification_halves(&ids, train),
                ids,
            };
            (union, per)
        }
        StrategyKind::Joint => (greedy_learn(train, &effective_priority(u, &[], 0.0)?, None)?, Vec::new()),
        StrategyKind::JointBoosted(p0) => {
            let order = effective_priority(u, &u.uni_features(), p0)?;
            (greedy_learn(train, &order, None)?, Vec::new())
        }
    };
    let accuracy = accuracy_on(&learned.ids, test, guess_seed)?;
    Ok(StrategyRun {
        strategy,
        learned,
        per_modality,
        accuracy,
    })
}
