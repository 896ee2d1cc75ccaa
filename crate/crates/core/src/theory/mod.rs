//! Abstract feature-learning regime: uni-modal, paired and empty features,
//! majority voting and greedy learning in priority order.

mod checks;
mod learn;

pub use checks::{
    LazinessReport, LemmaReport, SeedRun, Theorem1cInput, Theorem1cReport, Theorem2Report, Theorem2Seed,
    TheoryReport, lemma_complementary_check, lemma_exact_ratio, laziness_report, quantity_laziness_holds,
    theorem1c_check, theorem1c_tmodal_check, theorem2_check,
};
pub use learn::{
    LearnedSet, StrategyKind, StrategyRun, accuracy_on, effective_priority, greedy_learn, misclassification_halves,
    run_strategy, sample_points,
};

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::rng::Rng;

pub const DEFAULT_C: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureModality {
    /// 1-based modality index.
    Uni(usize),
    Paired,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FeatureKind {
    Unimodal,
    Paired,
    Empty,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSpec {
    pub id: String,
    pub modality: FeatureModality,
    pub p: f64,
    pub eps: f64,
    /// `eps` was given explicitly rather than derived as `p / c`.
    pub custom_eps: bool,
}

impl FeatureSpec {
    pub fn kind(&self) -> FeatureKind {
        if self.p == 0.0 && self.eps == 0.0 {
            FeatureKind::Empty
        } else if self.modality == FeatureModality::Paired {
            FeatureKind::Paired
        } else {
            FeatureKind::Unimodal
        }
    }

    pub fn is_uni(&self) -> bool {
        matches!(self.modality, FeatureModality::Uni(_))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawModality {
    Index(usize),
    Name(String),
}

#[derive(Serialize, Deserialize)]
struct RawFeature {
    id: String,
    modality: RawModality,
    p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawUniverse {
    c: f64,
    n_modalities: usize,
    features: Vec<RawFeature>,
}

/// Ordered feature set with a shared `c`; `eps = p / c` unless overridden.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureUniverse {
    pub c: f64,
    pub n_modalities: usize,
    pub features: Vec<FeatureSpec>,
}

impl FeatureUniverse {
    pub fn new(c: f64, n_modalities: usize, features: Vec<FeatureSpec>) -> Result<Self> {
        let u = Self {
            c,
            n_modalities,
            features,
        };
        u.validate()?;
        Ok(u)
    }

    /// Features given as `(id, modality, p)` with `eps = p / c`.
    pub fn from_probs(c: f64, n_modalities: usize, feats: &[(&str, FeatureModality, f64)]) -> Result<Self> {
        let features = feats
            .iter()
            .map(|&(id, modality, p)| FeatureSpec {
                id: id.to_string(),
                modality,
                p,
                eps: p / c,
                custom_eps: false,
            })
            .collect();
        Self::new(c, n_modalities, features)
    }

    /// The worked example: f1..f3 in modality 1, g1..g3 in modality 2 and,
    /// optionally, the paired feature h.
    pub fn worked_example(with_h: bool, c: f64) -> Self {
        use FeatureModality::*;
        let mut f = vec![
            ("f1", Uni(1), 0.20),
            ("f2", Uni(1), 0.10),
            ("f3", Uni(1), 0.05),
            ("g1", Uni(2), 0.15),
            ("g2", Uni(2), 0.08),
            ("g3", Uni(2), 0.02),
        ];
        if with_h {
            f.push(("h", Paired, 0.28));
        }
        Self::from_probs(c, 2, &f).expect("valid example universe")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidUniverse(m));
        if !(self.c > 1.0 && self.c.is_finite()) {
            return bad(format!("c must be > 1, got {}", self.c));
        }
        if self.n_modalities < 2 {
            return bad(format!("need at least 2 modalities, got {}", self.n_modalities));
        }
        let mut seen = HashSet::new();
        for f in &self.features {
            if !seen.insert(f.id.as_str()) {
                return bad(format!("duplicate feature id `{}`", f.id));
            }
            if let FeatureModality::Uni(m) = f.modality
                && !(1..=self.n_modalities).contains(&m)
            {
                return bad(format!("feature `{}` has modality {m} of {}", f.id, self.n_modalities));
            }
            if !(0.0..=1.0).contains(&f.p) || !(0.0..=1.0).contains(&f.eps) || f.p + f.eps > 1.0 + 1e-15 {
                return bad(format!("feature `{}` has p = {}, eps = {}", f.id, f.p, f.eps));
            }
            if !f.custom_eps && (f.eps - f.p / self.c).abs() > 1e-12 {
                return bad(format!("feature `{}`: eps {} is not p / c", f.id, f.eps));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.features
            .iter()
            .position(|f| f.id == id)
            .ok_or_else(|| Error::UnknownFeature(id.to_string()))
    }

    pub fn ids(&self, idx: &[usize]) -> Vec<String> {
        idx.iter().map(|&i| self.features[i].id.clone()).collect()
    }

    /// Indices of uni-modal features of modality `m`, in declaration order.
    pub fn modality_features(&self, m: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.features[i].modality == FeatureModality::Uni(m))
            .collect()
    }

    pub fn uni_features(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.features[i].is_uni()).collect()
    }

    pub fn paired_features(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.features[i].modality == FeatureModality::Paired)
            .collect()
    }

    /// A copy keeping only the features at `idx`, in that order.
    pub fn restrict(&self, idx: &[usize]) -> Self {
        Self {
            c: self.c,
            n_modalities: self.n_modalities,
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: RawUniverse = serde_json::from_str(s)?;
        let mut features = Vec::with_capacity(raw.features.len());
        for f in raw.features {
            let modality = match f.modality {
                RawModality::Index(m) => FeatureModality::Uni(m),
                RawModality::Name(s) if s.eq_ignore_ascii_case("paired") => FeatureModality::Paired,
                RawModality::Name(s) => match s.trim_start_matches(['m', 'M']).parse() {
                    Ok(m) => FeatureModality::Uni(m),
                    Err(_) => {
                        return Err(Error::InvalidUniverse(format!("feature `{}`: modality `{s}`", f.id)));
                    }
                },
            };
            features.push(FeatureSpec {
                eps: f.eps.unwrap_or(f.p / raw.c),
                custom_eps: f.eps.is_some(),
                id: f.id,
                modality,
                p: f.p,
            });
        }
        Self::new(raw.c, raw.n_modalities, features)
    }

    pub fn to_json_string(&self) -> String {
        let raw = RawUniverse {
            c: self.c,
            n_modalities: self.n_modalities,
            features: self
                .features
                .iter()
                .map(|f| RawFeature {
                    id: f.id.clone(),
                    modality: match f.modality {
                        FeatureModality::Uni(m) => RawModality::Index(m),
                        FeatureModality::Paired => RawModality::Name("paired".into()),
                    },
                    p: f.p,
                    eps: f.custom_eps.then_some(f.eps),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("serializable")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fsutil::read(path)?;
        let s = String::from_utf8(bytes).map_err(|e| Error::InvalidUniverse(e.to_string()))?;
        Self::from_json_str(&s)
    }

    /// Random two-modality universe: `p ~ U[0.02, 0.4]`, 5-10 features per
    /// modality and 0-3 paired features.
    pub fn random(rng: &mut Rng, c: f64) -> Self {
        let mut feats = Vec::new();
        for m in 1..=2 {
            let n = 5 + rng.below(6) as usize;
            for i in 0..n {
                let p = rng.uniform_range(0.02, 0.4);
                feats.push((format!("m{m}_{i}"), FeatureModality::Uni(m), p));
            }
        }
        for i in 0..rng.below(4) as usize {
            feats.push((format!("h{i}"), FeatureModality::Paired, rng.uniform_range(0.02, 0.4)));
        }
        let refs: Vec<(&str, FeatureModality, f64)> = feats.iter().map(|(s, m, p)| (s.as_str(), *m, *p)).collect();
        Self::from_probs(c, 2, &refs).expect("valid random universe")
    }
}

/// One data point: the label and, per feature, the sign of `y * r`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Realization {
    pub y: i8,
    /// Agreement sign of each universe feature with `y`.
    pub agree: Vec<i8>,
}

impl Realization {
    /// Sign of the feature value itself, `y * (y r)`.
    pub fn raw_sign(&self, i: usize) -> i8 {
        self.y * self.agree[i]
    }

    /// Builds a point from raw feature signs and the label.
    pub fn from_raw(y: i8, raw: &[i8]) -> Self {
        Self {
            y,
            agree: raw.iter().map(|&s| s * y).collect(),
        }
    }
}

/// Draws `y` then one uniform per feature: agree w.p. `p`, disagree w.p.
/// `eps`, absent otherwise.
pub fn sample_realization(u: &FeatureUniverse, rng: &mut Rng) -> Realization {
    let y = rng.sign();
    let agree = u
        .features
        .iter()
        .map(|f| {
            let r = rng.uniform();
            if r < f.p {
                1
            } else if r < f.p + f.eps {
                -1
            } else {
                0
            }
        })
        .collect();
    Realization { y, agree }
}

/// Majority vote of the raw signs of `learned`; ties are a fair coin from
/// `guess`.
pub fn vote_predict(learned: &[usize], point: &Realization, guess: &mut Rng) -> Result<i8> {
    let (mut pos, mut neg) = (0usize, 0usize);
    for &i in learned {
        let s = *point
            .agree
            .get(i)
            .ok_or_else(|| Error::UnknownFeature(format!("#{i}")))?
            * point.y;
        match s {
            1 => pos += 1,
            -1 => neg += 1,
            _ => {}
        }
    }
    Ok(if pos == neg {
        guess.sign()
    } else if pos > neg {
        1
    } else {
        -1
    })
}

/// `#disagree - #agree` over `learned`.
pub fn point_error(learned: &[usize], point: &Realization) -> i64 {
    learned.iter().map(|&i| -i64::from(point.agree[i])).sum()
}
