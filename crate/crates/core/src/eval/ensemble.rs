use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::matrix::Matrix;
use crate::models::{fit_ridge, LinearFit};

use super::cv::{blank_report, check_plan, finish_report, CvResult, FoldMetrics};
use super::metrics::{r2, rmse};
use super::split::SplitPlan;

pub const ENSEMBLE_LABEL: &str = "ENS";
pub const DEFAULT_META_LAMBDA: f64 = 1.0;

/// Ridge stacking over base-model predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackOutcome {
    /// Held-out meta prediction for each out-of-fold row.
    pub oof: Vec<f64>,
    /// Meta-model refitted on every out-of-fold row.
    pub meta: LinearFit,
    pub test: Vec<f64>,
}

/// Fits the meta-model fold by fold on `oof` (rows × base models) and
/// predicts each held-out fold, then refits on all rows for `test`.
pub fn stack_ridge(oof: &Matrix, y: &[f64], folds: &[usize], k: usize, test: &Matrix, lambda: f64) -> Result<StackOutcome> {
    if oof.nrows() != y.len() || folds.len() != y.len() || test.ncols() != oof.ncols() {
        return Err(Error::Contract("stacking inputs disagree in shape".into()));
    }
    if oof.ncols() == 0 {
        return Err(Error::Model("stacking needs at least one base model".into()));
    }
    let mut pred = vec![f64::NAN; y.len()];
    for f in 0..k {
        let train: Vec<usize> = (0..y.len()).filter(|&r| folds[r] != f).collect();
        let val: Vec<usize> = (0..y.len()).filter(|&r| folds[r] == f).collect();
        if val.is_empty() {
            continue;
        }
        let ty: Vec<f64> = train.iter().map(|&r| y[r]).collect();
        let fit = fit_ridge(&oof.select_rows(&train), &ty, lambda)?;
        for r in val {
            pred[r] = fit.predict_row(oof.row(r));
        }
    }
    let meta = fit_ridge(oof, y, lambda)?;
    let test = test.rows_iter().map(|r| meta.predict_row(r)).collect();
    Ok(StackOutcome { oof: pred, meta, test })
}

/// Stacked evaluation over the successful entries of `bases`, which must all
/// come from `plan`. The meta-model uses the same folds as the base models.
pub fn evaluate_ensemble(bases: &[CvResult], table: &FeatureTable, plan: &SplitPlan, lambda: f64) -> Result<CvResult> {
    let y = check_plan(table, plan)?;
    let ok: Vec<&CvResult> = bases.iter().filter(|b| b.succeeded()).collect();
    let train = plan.train_rows();
    for b in &ok {
        if b.oof_rows != train || b.test_rows != plan.test_rows {
            return Err(Error::Contract(format!("{} was not evaluated on this split plan", b.report.model)));
        }
    }
    let mut report = blank_report(ENSEMBLE_LABEL, "Ridge", table, plan);
    report.params.insert("lambda".into(), lambda.into());
    report.notes.push("test meta-model refitted on all out-of-fold rows".into());
    report.notes.push(format!("bases: {}", ok.iter().map(|b| b.report.model.as_str()).collect::<Vec<_>>().join(",")));
    let mut result = CvResult {
        report,
        oof_rows: train.clone(),
        oof: Vec::new(),
        test_rows: plan.test_rows.clone(),
        fold_test: Vec::new(),
        test: Vec::new(),
        models: Vec::new(),
    };
    if ok.is_empty() {
        result.report.failed = Some("no successful base model".into());
        return Ok(result);
    }
    if ok.len() < 2 {
        log::warn!("ensemble on {} has a single base model", table.dataset_id);
    }
    let oof = Matrix::new(train.len(), ok.len(), (0..train.len()).flat_map(|i| ok.iter().map(move |b| b.oof[i])).collect())?;
    let test = Matrix::new(
        plan.test_rows.len(),
        ok.len(),
        (0..plan.test_rows.len()).flat_map(|i| ok.iter().map(move |b| b.test[i])).collect(),
    )?;
    let folds: Vec<usize> = train.iter().map(|&r| plan.folds[r].unwrap_or(0)).collect();
    let train_y: Vec<f64> = train.iter().map(|&r| y[r]).collect();
    let out = stack_ridge(&oof, &train_y, &folds, plan.k, &test, lambda)?;
    for f in 0..plan.k {
        let idx: Vec<usize> = (0..train.len()).filter(|&i| folds[i] == f).collect();
        let vy: Vec<f64> = idx.iter().map(|&i| train_y[i]).collect();
        let vp: Vec<f64> = idx.iter().map(|&i| out.oof[i]).collect();
        result.report.folds.push(FoldMetrics {
            fold: f,
            n_train: train.len() - idx.len(),
            n_val: idx.len(),
            r2: r2(&vy, &vp).ok(),
            rmse: rmse(&vy, &vp)?,
            n_features: ok.len(),
        });
    }
    result.oof = out.oof;
    result.test = out.test;
    result.fold_test = vec![result.test.clone()];
    finish_report(&mut result.report, &y, &plan.test_rows, &result.test);
    Ok(result)
}
