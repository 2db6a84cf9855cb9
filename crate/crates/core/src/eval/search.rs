use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::models::{ModelKind, ModelSpec};

use super::cv::{cross_validate, CvOptions};
use super::split::SplitPlan;

/// Sampling range for one hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamRange {
    Int {
        low: i64,
        high: i64,
        #[serde(default)]
        log: bool,
    },
    Float {
        low: f64,
        high: f64,
        #[serde(default)]
        log: bool,
    },
    Choice {
        values: Vec<Value>,
    },
    /// A list of 1..=`max_layers` layer widths, each in `[low, high]`.
    Layers {
        max_layers: usize,
        low: usize,
        high: usize,
    },
}

impl ParamRange {
    fn validate(&self, name: &str) -> Result<()> {
        let ok = match self {
            ParamRange::Int { low, high, log } => low <= high && (!log || *low > 0),
            ParamRange::Float { low, high, log } => low <= high && low.is_finite() && high.is_finite() && (!log || *low > 0.0),
            ParamRange::Choice { values } => !values.is_empty(),
            ParamRange::Layers { max_layers, low, high } => *max_layers >= 1 && low <= high && *low >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid search range for {name}: {self:?}")))
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Value {
        match self {
            ParamRange::Int { low, high, log: false } => Value::from(rng.gen_range(*low..=*high)),
            ParamRange::Int { low, high, log: true } => {
                let v = (rng.gen_range((*low as f64).ln()..=((*high as f64) + 1.0).ln())).exp().floor() as i64;
                Value::from(v.clamp(*low, *high))
            }
            ParamRange::Float { low, high, log: false } => Value::from(rng.gen_range(*low..=*high)),
            ParamRange::Float { low, high, log: true } => Value::from(rng.gen_range(low.ln()..=high.ln()).exp().clamp(*low, *high)),
            ParamRange::Choice { values } => values[rng.gen_range(0..values.len())].clone(),
            ParamRange::Layers { max_layers, low, high } => {
                let n = rng.gen_range(1..=*max_layers);
                Value::from((0..n).map(|_| rng.gen_range(*low..=*high)).collect::<Vec<_>>())
            }
        }
    }
}

pub type SearchSpace = BTreeMap<String, ParamRange>;

/// Conventional ranges for each learner.
pub fn default_space(kind: ModelKind) -> SearchSpace {
    let int = |low, high| ParamRange::Int { low, high, log: false };
    let float = |low, high, log| ParamRange::Float { low, high, log };
    let entries: Vec<(&str, ParamRange)> = match kind {
        ModelKind::Knn => vec![("k", int(1, 15))],
        ModelKind::RandomForest => vec![("n_trees", int(100, 500)), ("max_depth", int(2, 12))],
        ModelKind::Gbt => vec![
            ("n_rounds", int(50, 500)),
            ("learning_rate", float(0.01, 0.3, false)),
            ("max_depth", int(2, 8)),
            ("lambda_l2", float(0.0, 10.0, false)),
        ],
        ModelKind::ElasticNet => vec![("alpha", float(1e-4, 10.0, true)), ("l1_ratio", float(0.0, 1.0, false))],
        ModelKind::Mlp => vec![("hidden", ParamRange::Layers { max_layers: 2, low: 8, high: 64 })],
        ModelKind::Ridge => vec![("lambda", float(1e-4, 100.0, true))],
        ModelKind::Linear => vec![],
    };
    entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub params: BTreeMap<String, Value>,
    /// Mean validation R²; `None` when the trial failed.
    pub score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: ModelSpec,
    pub best_score: f64,
    pub trials: Vec<Trial>,
}

/// Seeded random search over `space`, scoring each draw by mean validation
/// R² under [`cross_validate`]. Sampled values override those of `base`.
/// The earliest trial wins ties.
pub fn random_search(
    base: &ModelSpec,
    space: &SearchSpace,
    budget: usize,
    table: &FeatureTable,
    plan: &SplitPlan,
    opts: &CvOptions,
    seed: u64,
) -> Result<SearchOutcome> {
    if budget == 0 {
        return Err(Error::Config("search budget must be at least 1".into()));
    }
    for (k, r) in space {
        r.validate(k)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = Vec::with_capacity(budget);
    let mut best: Option<(f64, ModelSpec)> = None;
    for index in 0..budget {
        let params: BTreeMap<String, Value> = space.iter().map(|(k, r)| (k.clone(), r.sample(&mut rng))).collect();
        let mut spec = base.clone();
        spec.params.extend(params.clone());
        let (score, error) = match cross_validate(&spec, table, plan, opts) {
            Ok(res) => match (res.report.failed, res.report.val_r2) {
                (None, Some(s)) => (Some(s), None),
                (Some(e), _) => (None, Some(e)),
                (None, None) => (None, Some("validation R² undefined".into())),
            },
            Err(e) => (None, Some(e.to_string())),
        };
        log::debug!("trial {index} {} on {}: {score:?}", base.label, table.dataset_id);
        if let Some(s) = score {
            if best.as_ref().is_none_or(|(b, _)| s > *b) {
                best = Some((s, spec));
            }
        }
        trials.push(Trial { index, params, score, error });
    }
    let (best_score, best) = best.ok_or_else(|| {
        Error::Model(format!("all {budget} search trials for {} on {} failed", base.label, table.dataset_id))
    })?;
    Ok(SearchOutcome { best, best_score, trials })
}
