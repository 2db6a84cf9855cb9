use rayon::prelude::*;

use crate::error::{Error, Result};

use super::table::FeatureTable;

/// Pearson correlation; zero variance in either input gives 0.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.is_empty() || x.len() != y.len() {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let r = sxy / (sxx * syy).sqrt();
    if r.is_finite() {
        r
    } else {
        0.0
    }
}

/// Index columns ranked by |r| against the target over `train_rows`, strongest
/// first, ties by name.
pub fn rank_index_columns(table: &FeatureTable, train_rows: &[usize]) -> Result<Vec<(String, f64)>> {
    let target = table
        .target()
        .ok_or_else(|| Error::Contract(format!("table {} has no target column", table.dataset_id)))?;
    if let Some(&bad) = train_rows.iter().find(|&&r| r >= table.n_rows()) {
        return Err(Error::Contract(format!("training row {bad} outside table of {} rows", table.n_rows())));
    }
    let y: Vec<f64> = train_rows.iter().map(|&r| target[r]).collect();
    let vals = table.values();
    let mut ranked: Vec<(String, f64)> = table
        .index_columns()
        .into_par_iter()
        .map(|c| {
            let x: Vec<f64> = train_rows.iter().map(|&r| vals.get(r, c)).collect();
            (table.columns()[c].clone(), pearson(&x, &y).abs())
        })
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Raw band columns (in table order) followed by the `top_k` best-correlated
/// index columns (in rank order).
pub fn screen_features(table: &FeatureTable, train_rows: &[usize], top_k: usize) -> Result<Vec<String>> {
    let ranked = rank_index_columns(table, train_rows)?;
    let mut keep: Vec<String> = table.raw_columns().into_iter().map(|i| table.columns()[i].clone()).collect();
    keep.extend(ranked.into_iter().take(top_k).map(|(n, _)| n));
    Ok(keep)
}
