//! Regression models with a uniform fit / predict / save contract.

mod elastic;
mod forest;
mod gbt;
mod knn;
mod linear;
mod mlp;
mod standardize;
mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub use elastic::{fit_elastic_net, fit_elastic_net_observed, ElasticNetFit, ElasticNetParams};
pub use forest::{fit_random_forest, ForestFit, ForestParams};
pub use gbt::{fit_gbt, fit_gbt_observed, GbtFit, GbtParams};
pub use knn::{fit_knn, KnnFit};
pub use linear::{fit_linear, fit_ridge, LinearFit};
pub use mlp::{fit_mlp, Activation, Mlp, MlpParams, Optimizer};
pub use standardize::Standardizer;
pub use tree::{Node, Tree};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "LR")]
    Linear,
    Ridge,
    #[serde(rename = "ELN")]
    ElasticNet,
    #[serde(rename = "KNN")]
    Knn,
    #[serde(rename = "RF")]
    RandomForest,
    #[serde(rename = "GBT")]
    Gbt,
    #[serde(rename = "MLP")]
    Mlp,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Linear => "LR",
            ModelKind::Ridge => "Ridge",
            ModelKind::ElasticNet => "ELN",
            ModelKind::Knn => "KNN",
            ModelKind::RandomForest => "RF",
            ModelKind::Gbt => "GBT",
            ModelKind::Mlp => "MLP",
        }
    }

    /// Whether features are standardised before fitting unless overridden by `scale`.
    pub fn scales_by_default(self) -> bool {
        matches!(self, ModelKind::Ridge | ModelKind::ElasticNet | ModelKind::Knn | ModelKind::Mlp)
    }

    fn known_params(self) -> &'static [&'static str] {
        match self {
            ModelKind::Linear => &[],
            ModelKind::Ridge => &["lambda"],
            ModelKind::ElasticNet => &["alpha", "l1_ratio", "max_iter", "tol"],
            ModelKind::Knn => &["k"],
            ModelKind::RandomForest => &["n_trees", "max_depth", "min_samples_leaf", "max_features", "bootstrap"],
            ModelKind::Gbt => &[
                "n_rounds",
                "learning_rate",
                "max_depth",
                "lambda_l2",
                "gamma_min_gain",
                "min_child_weight",
                "subsample",
            ],
            ModelKind::Mlp => &["hidden", "activation", "optimizer", "learning_rate", "epochs", "batch_size"],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A learner plus its hyperparameters. `label` names the model in reports
/// (e.g. `XGB` for a boosted-tree spec with XGBoost-style defaults).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub label: String,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    #[serde(default)]
    pub seed: u64,
}

fn gbt_params_map(p: GbtParams) -> BTreeMap<String, Value> {
    [
        ("n_rounds", Value::from(p.n_rounds)),
        ("learning_rate", Value::from(p.learning_rate)),
        ("max_depth", Value::from(p.max_depth)),
        ("lambda_l2", Value::from(p.lambda_l2)),
        ("min_child_weight", Value::from(p.min_child_weight)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self { kind, label: kind.name().to_string(), params: BTreeMap::new(), seed: 0 }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    /// Named report columns: LR, ELN, KNN, RF, MLP, and the boosted-tree
    /// stand-ins XGB, LBM and CAT.
    pub fn preset(label: &str) -> Result<Self> {
        let spec = match label {
            "LR" => ModelSpec::new(ModelKind::Linear),
            "Ridge" => ModelSpec::new(ModelKind::Ridge),
            "ELN" => ModelSpec::new(ModelKind::ElasticNet).with("alpha", 0.01).with("l1_ratio", 0.5),
            "KNN" => ModelSpec::new(ModelKind::Knn).with("k", 5),
            "RF" => ModelSpec::new(ModelKind::RandomForest).with("n_trees", 200),
            "MLP" => ModelSpec::new(ModelKind::Mlp),
            "XGB" => ModelSpec { params: gbt_params_map(GbtParams::xgb()), ..ModelSpec::new(ModelKind::Gbt) },
            "LBM" => ModelSpec { params: gbt_params_map(GbtParams::lbm()), ..ModelSpec::new(ModelKind::Gbt) },
            "CAT" => ModelSpec { params: gbt_params_map(GbtParams::cat()), ..ModelSpec::new(ModelKind::Gbt) },
            other => return Err(Error::Config(format!("unknown model preset {other:?}"))),
        };
        Ok(spec.with_label(label))
    }

    pub fn needs_scaling(&self) -> bool {
        self.params.get("scale").and_then(Value::as_bool).unwrap_or(self.kind.scales_by_default())
    }

    pub fn validate(&self) -> Result<()> {
        for k in self.params.keys() {
            if k != "scale" && !self.kind.known_params().contains(&k.as_str()) {
                return Err(Error::Config(format!("{} does not take parameter {k:?}", self.kind)));
            }
        }
        Ok(())
    }

    fn f64_param(&self, key: &str, default: f64) -> Result<f64> {
        match self.params.get(key) {
            None | Some(Value::Null) => Ok(default),
            Some(v) => v
                .as_f64()
                .ok_or_else(|| Error::Config(format!("{}: parameter {key} must be a number, got {v}", self.label))),
        }
    }

    fn usize_param(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.opt_usize_param(key)?.unwrap_or(default))
    }

    fn opt_usize_param(&self, key: &str) -> Result<Option<usize>> {
        match self.params.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_u64()
                .map(|u| Some(u as usize))
                .ok_or_else(|| Error::Config(format!("{}: parameter {key} must be a non-negative integer, got {v}", self.label))),
        }
    }

    fn str_param<'a>(&'a self, key: &str, default: &'a str) -> Result<&'a str> {
        match self.params.get(key) {
            None | Some(Value::Null) => Ok(default),
            Some(v) => v
                .as_str()
                .ok_or_else(|| Error::Config(format!("{}: parameter {key} must be a string, got {v}", self.label))),
        }
    }

    pub fn elastic_net_params(&self) -> Result<ElasticNetParams> {
        let d = ElasticNetParams::default();
        Ok(ElasticNetParams {
            alpha: self.f64_param("alpha", d.alpha)?,
            l1_ratio: self.f64_param("l1_ratio", d.l1_ratio)?,
            max_iter: self.usize_param("max_iter", d.max_iter)?,
            tol: self.f64_param("tol", d.tol)?,
        })
    }

    pub fn forest_params(&self, n_features: usize) -> Result<ForestParams> {
        let d = ForestParams::default();
        let max_features = match self.params.get("max_features") {
            None | Some(Value::Null) => None,
            Some(v) if v.is_u64() => Some(v.as_u64().unwrap_or(1) as usize),
            Some(v) => match v.as_f64() {
                Some(f) if f > 0.0 && f <= 1.0 => Some(((f * n_features as f64).round() as usize).max(1)),
                _ => return Err(Error::Config(format!("{}: max_features must be a count or a fraction in (0, 1]", self.label))),
            },
        };
        Ok(ForestParams {
            n_trees: self.usize_param("n_trees", d.n_trees)?,
            max_depth: self.opt_usize_param("max_depth")?,
            min_samples_leaf: self.usize_param("min_samples_leaf", d.min_samples_leaf)?,
            max_features,
            bootstrap: self.params.get("bootstrap").and_then(Value::as_bool).unwrap_or(d.bootstrap),
            seed: self.seed,
        })
    }

    pub fn gbt_params(&self) -> Result<GbtParams> {
        let d = GbtParams::xgb();
        Ok(GbtParams {
            n_rounds: self.usize_param("n_rounds", d.n_rounds)?,
            learning_rate: self.f64_param("learning_rate", d.learning_rate)?,
            max_depth: self.usize_param("max_depth", d.max_depth)?,
            lambda_l2: self.f64_param("lambda_l2", d.lambda_l2)?,
            gamma_min_gain: self.f64_param("gamma_min_gain", d.gamma_min_gain)?,
            min_child_weight: self.f64_param("min_child_weight", d.min_child_weight)?,
            subsample: self.f64_param("subsample", d.subsample)?,
            seed: self.seed,
        })
    }

    pub fn mlp_params(&self) -> Result<MlpParams> {
        let d = MlpParams::default();
        let hidden = match self.params.get("hidden") {
            None | Some(Value::Null) => d.hidden.clone(),
            Some(v) => serde_json::from_value(v.clone())
                .map_err(|_| Error::Config(format!("{}: hidden must be a list of layer widths", self.label)))?,
        };
        let activation = match self.str_param("activation", "relu")? {
            "relu" => Activation::Relu,
            "tanh" => Activation::Tanh,
            a => return Err(Error::Config(format!("{}: unknown activation {a:?}", self.label))),
        };
        let optimizer = match self.str_param("optimizer", "adam")? {
            "adam" => Optimizer::Adam,
            "sgd" => Optimizer::Sgd,
            o => return Err(Error::Config(format!("{}: unknown optimizer {o:?}", self.label))),
        };
        Ok(MlpParams {
            hidden,
            activation,
            optimizer,
            learning_rate: self.f64_param("learning_rate", d.learning_rate)?,
            epochs: self.usize_param("epochs", d.epochs)?,
            batch_size: self.usize_param("batch_size", d.batch_size)?,
            seed: self.seed,
        })
    }
}

/// Learned parameters, one variant per learner family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value")]
pub enum FittedParams {
    Linear(LinearFit),
    ElasticNet(ElasticNetFit),
    Knn(KnnFit),
    Forest(ForestFit),
    Gbt(GbtFit),
    Mlp(Mlp),
}

impl FittedParams {
    fn predict_row(&self, x: &[f64]) -> f64 {
        match self {
            FittedParams::Linear(m) => m.predict_row(x),
            FittedParams::ElasticNet(m) => m.linear.predict_row(x),
            FittedParams::Knn(m) => m.predict_row(x),
            FittedParams::Forest(m) => m.predict_row(x),
            FittedParams::Gbt(m) => m.predict_row(x),
            FittedParams::Mlp(m) => m.predict_row(x),
        }
    }
}

/// A fitted model with everything needed to predict from named features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub feature_names: Vec<String>,
    pub standardizer: Option<Standardizer>,
    pub params: FittedParams,
}

pub fn fit_model(spec: &ModelSpec, x: &Matrix, y: &[f64], feature_names: &[String]) -> Result<TrainedModel> {
    spec.validate()?;
    if feature_names.len() != x.ncols() {
        return Err(Error::Contract(format!("{} names for {} columns", feature_names.len(), x.ncols())));
    }
    if y.iter().any(|v| !v.is_finite()) || x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Model("training data contains non-finite values".into()));
    }
    let standardizer = spec.needs_scaling().then(|| Standardizer::fit(x));
    let scaled;
    let xs = match &standardizer {
        Some(s) => {
            scaled = s.transform(x);
            &scaled
        }
        None => x,
    };
    let params = match spec.kind {
        ModelKind::Linear => FittedParams::Linear(fit_linear(xs, y)?),
        ModelKind::Ridge => FittedParams::Linear(fit_ridge(xs, y, spec.f64_param("lambda", 1.0)?)?),
        ModelKind::ElasticNet => FittedParams::ElasticNet(fit_elastic_net(xs, y, &spec.elastic_net_params()?)?),
        ModelKind::Knn => FittedParams::Knn(fit_knn(xs, y, spec.usize_param("k", 5)?.min(y.len()))?),
        ModelKind::RandomForest => FittedParams::Forest(fit_random_forest(xs, y, &spec.forest_params(x.ncols())?)?),
        ModelKind::Gbt => FittedParams::Gbt(fit_gbt(xs, y, &spec.gbt_params()?)?),
        ModelKind::Mlp => FittedParams::Mlp(fit_mlp(xs, y, &spec.mlp_params()?)?),
    };
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        spec: spec.clone(),
        feature_names: feature_names.to_vec(),
        standardizer,
        params,
    })
}

impl TrainedModel {
    /// Prediction for one row already in `feature_names` order.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.standardizer {
            Some(s) => {
                let mut r = row.to_vec();
                s.transform_row(&mut r);
                self.params.predict_row(&r)
            }
            None => self.params.predict_row(row),
        }
    }

    /// Predicts rows whose columns are exactly `feature_names` in order.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.ncols() != self.feature_names.len() {
            return Err(Error::Contract(format!(
                "model expects {} features, got {}",
                self.feature_names.len(),
                x.ncols()
            )));
        }
        Ok((0..x.nrows()).into_par_iter().map(|r| self.predict_row(x.row(r))).collect())
    }

    /// Predicts rows whose columns are named by `names`, reordering as needed.
    pub fn predict_named(&self, names: &[String], x: &Matrix) -> Result<Vec<f64>> {
        let idx = self.align(names)?;
        self.predict(&x.select_cols(&idx))
    }

    /// Positions in `names` of each training feature.
    pub fn align(&self, names: &[String]) -> Result<Vec<usize>> {
        self.feature_names
            .iter()
            .map(|f| {
                names
                    .iter()
                    .position(|n| n == f)
                    .ok_or_else(|| Error::Contract(format!("input lacks model feature {f}")))
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: TrainedModel = serde_json::from_str(text)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                m.format_version
            )));
        }
        Ok(m)
    }

    /// SHA-256 of the serialised model, hex encoded.
    pub fn fingerprint(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_json()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingInput(format!("model file {} does not exist", path.display())));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
