use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::features::{screen_features, FeatureTable};
use crate::models::{fit_model, ModelSpec, TrainedModel};

use super::metrics::{r2, rmse};
use super::split::SplitPlan;

/// How features are chosen inside each training fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvOptions {
    /// Keep raw bands plus this many best-correlated indices; `None` uses every column.
    pub top_k: Option<usize>,
    /// Retain the fold models in the result.
    pub keep_models: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self { top_k: Some(crate::features::DEFAULT_TOP_K), keep_models: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_train: usize,
    pub n_val: usize,
    /// `None` when the validation targets are constant.
    pub r2: Option<f64>,
    pub rmse: f64,
    pub n_features: usize,
}

/// Summary of one (dataset, model) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset_id: String,
    pub model: String,
    pub kind: String,
    pub params: BTreeMap<String, Value>,
    pub seed: u64,
    pub folds: Vec<FoldMetrics>,
    /// Mean of the defined fold R² values.
    pub val_r2: Option<f64>,
    pub val_rmse: Option<f64>,
    pub test_r2: Option<f64>,
    pub test_rmse: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub dropped_rows: usize,
    pub high_chl_threshold: f64,
    pub high_chl_quantile: f64,
    pub failed: Option<String>,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Out-of-fold and test predictions behind an [`EvalReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub report: EvalReport,
    /// Training rows in ascending order.
    pub oof_rows: Vec<usize>,
    /// Validation-fold prediction for each entry of `oof_rows`.
    pub oof: Vec<f64>,
    pub test_rows: Vec<usize>,
    /// Test predictions of each fold model.
    pub fold_test: Vec<Vec<f64>>,
    /// Mean of `fold_test`.
    pub test: Vec<f64>,
    #[serde(skip)]
    pub models: Vec<TrainedModel>,
}

impl CvResult {
    pub fn succeeded(&self) -> bool {
        self.report.failed.is_none()
    }
}

pub(crate) fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn gather(y: &[f64], rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&r| y[r]).collect()
}

pub(crate) fn check_plan(table: &FeatureTable, plan: &SplitPlan) -> Result<Vec<f64>> {
    let y = table
        .target()
        .ok_or_else(|| Error::Contract(format!("table {} has no target column", table.dataset_id)))?;
    if plan.n_rows() != table.n_rows() {
        return Err(Error::Contract(format!(
            "split plan covers {} rows but table {} has {}",
            plan.n_rows(),
            table.dataset_id,
            table.n_rows()
        )));
    }
    Ok(y.to_vec())
}

struct FoldOutput {
    metrics: FoldMetrics,
    val_rows: Vec<usize>,
    val_pred: Vec<f64>,
    test_pred: Vec<f64>,
    model: TrainedModel,
}

fn run_fold(spec: &ModelSpec, table: &FeatureTable, plan: &SplitPlan, y: &[f64], fold: usize, opts: &CvOptions) -> Result<FoldOutput> {
    let train = plan.fold_train_rows(fold);
    let val = plan.fold_rows(fold);
    let names = match opts.top_k {
        Some(k) => screen_features(table, &train, k)?,
        None => table.columns().to_vec(),
    };
    let x = table.select(&names)?;
    let model = fit_model(spec, &x.select_rows(&train), &gather(y, &train), &names)?;
    let val_pred = model.predict(&x.select_rows(&val))?;
    let test_pred = model.predict(&x.select_rows(&plan.test_rows))?;
    let val_y = gather(y, &val);
    let metrics = FoldMetrics {
        fold,
        n_train: train.len(),
        n_val: val.len(),
        r2: r2(&val_y, &val_pred).ok(),
        rmse: rmse(&val_y, &val_pred)?,
        n_features: names.len(),
    };
    Ok(FoldOutput { metrics, val_rows: val, val_pred, test_pred, model })
}

pub(crate) fn blank_report(label: &str, kind: &str, table: &FeatureTable, plan: &SplitPlan) -> EvalReport {
    EvalReport {
        dataset_id: table.dataset_id.clone(),
        model: label.to_string(),
        kind: kind.to_string(),
        params: BTreeMap::new(),
        seed: plan.seed,
        folds: Vec::new(),
        val_r2: None,
        val_rmse: None,
        test_r2: None,
        test_rmse: None,
        n_train: plan.train_rows().len(),
        n_test: plan.test_rows.len(),
        dropped_rows: table.dropped_rows,
        high_chl_threshold: plan.threshold,
        high_chl_quantile: plan.threshold_quantile,
        failed: None,
        notes: Vec::new(),
    }
}

/// Fills the aggregate and test metrics of `report` from fold metrics and test predictions.
pub(crate) fn finish_report(report: &mut EvalReport, y: &[f64], test_rows: &[usize], test: &[f64]) {
    let r2s: Vec<f64> = report.folds.iter().filter_map(|f| f.r2).collect();
    let rmses: Vec<f64> = report.folds.iter().map(|f| f.rmse).collect();
    report.val_r2 = mean(&r2s);
    report.val_rmse = mean(&rmses);
    let ty = gather(y, test_rows);
    report.test_r2 = r2(&ty, test).ok();
    report.test_rmse = rmse(&ty, test).ok();
}

/// K-fold evaluation of `spec` on the training rows of `plan`. Feature
/// screening and scaling are fitted inside each fold; the test prediction is
/// the mean of the fold models. A fold that fails to fit marks the report as
/// failed instead of returning an error.
pub fn cross_validate(spec: &ModelSpec, table: &FeatureTable, plan: &SplitPlan, opts: &CvOptions) -> Result<CvResult> {
    let y = check_plan(table, plan)?;
    spec.validate()?;
    let outputs: Vec<Result<FoldOutput>> =
        (0..plan.k).into_par_iter().map(|f| run_fold(spec, table, plan, &y, f, opts)).collect();
    let mut report = blank_report(&spec.label, spec.kind.name(), table, plan);
    report.params = spec.params.clone();
    report.seed = spec.seed;
    let mut result = CvResult {
        report,
        oof_rows: plan.train_rows(),
        oof: Vec::new(),
        test_rows: plan.test_rows.clone(),
        fold_test: Vec::new(),
        test: Vec::new(),
        models: Vec::new(),
    };
    let mut oof = vec![f64::NAN; plan.n_rows()];
    for out in outputs {
        let out = match out {
            Ok(o) => o,
            Err(e) => {
                log::warn!("{} on {}: {e}", spec.label, table.dataset_id);
                result.report.failed = Some(e.to_string());
                return Ok(result);
            }
        };
        for (&r, &p) in out.val_rows.iter().zip(&out.val_pred) {
            oof[r] = p;
        }
        result.report.folds.push(out.metrics);
        result.fold_test.push(out.test_pred);
        if opts.keep_models {
            result.models.push(out.model);
        }
    }
    result.oof = gather(&oof, &result.oof_rows);
    let n_test = plan.test_rows.len();
    result.test = (0..n_test)
        .map(|i| result.fold_test.iter().map(|p| p[i]).sum::<f64>() / result.fold_test.len() as f64)
        .collect();
    finish_report(&mut result.report, &y, &plan.test_rows, &result.test);
    Ok(result)
}
