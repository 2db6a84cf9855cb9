use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::features::parse_dataset_id;

use super::cv::EvalReport;

pub const DEFAULT_TOP_PER_METHOD: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDataset {
    pub dataset_id: String,
    pub method: String,
    /// Best validation R² over the dataset's models.
    pub score: f64,
    /// Lowest validation RMSE over the dataset's models.
    pub best_rmse: f64,
    pub best_model: String,
}

fn method_of(id: &str) -> String {
    parse_dataset_id(id).map(|(set, _, _)| set.method().to_string()).unwrap_or_else(|_| "unknown".into())
}

/// Orders datasets by score, then lower RMSE, then id.
pub fn compare_ranked(a: &RankedDataset, b: &RankedDataset) -> Ordering {
    b.score.total_cmp(&a.score).then(a.best_rmse.total_cmp(&b.best_rmse)).then_with(|| a.dataset_id.cmp(&b.dataset_id))
}

/// Scores every dataset by its best validation R² and keeps the `top` best
/// datasets of each processing method. Failed reports are ignored. The
/// result is grouped by method name, each group in rank order.
pub fn rank_datasets(reports: &[EvalReport], top: usize) -> Vec<RankedDataset> {
    let mut best: BTreeMap<&str, RankedDataset> = BTreeMap::new();
    for r in reports {
        let (Some(score), Some(rmse)) = (r.val_r2, r.val_rmse) else { continue };
        if r.failed.is_some() {
            continue;
        }
        let entry = best.entry(r.dataset_id.as_str()).or_insert_with(|| RankedDataset {
            dataset_id: r.dataset_id.clone(),
            method: method_of(&r.dataset_id),
            score,
            best_rmse: rmse,
            best_model: r.model.clone(),
        });
        if score > entry.score || (score == entry.score && r.model < entry.best_model) {
            entry.score = score;
            entry.best_model = r.model.clone();
        }
        entry.best_rmse = entry.best_rmse.min(rmse);
    }
    let mut by_method: BTreeMap<String, Vec<RankedDataset>> = BTreeMap::new();
    for d in best.into_values() {
        by_method.entry(d.method.clone()).or_default().push(d);
    }
    by_method
        .into_values()
        .flat_map(|mut v| {
            v.sort_by(compare_ranked);
            v.truncate(top);
            v
        })
        .collect()
}
