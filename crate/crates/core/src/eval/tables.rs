use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::features::parse_dataset_id;

use super::cv::EvalReport;

/// Model columns of the published result tables, in order.
pub const REPORT_MODELS: [&str; 10] = ["CAT", "ELN", "ENS", "KNN", "LBM", "LR", "MLP", "RF", "SVR", "XGB"];
pub const REPORT_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableMetric {
    TestR2,
    TestRmse,
}

impl TableMetric {
    pub fn slug(self) -> &'static str {
        match self {
            TableMetric::TestR2 => "test_r2",
            TableMetric::TestRmse => "test_rmse",
        }
    }

    fn value(self, r: &EvalReport) -> Option<f64> {
        match self {
            TableMetric::TestR2 => r.test_r2,
            TableMetric::TestRmse => r.test_rmse,
        }
    }
}

/// Datasets × models matrix of one test metric for one depth bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub depth: String,
    pub metric: TableMetric,
    pub models: Vec<String>,
    pub datasets: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl MetricTable {
    /// `Model,<models…>` header; one row per dataset; two decimals, `NA` for missing cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("Model");
        for m in &self.models {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');
        for (d, row) in self.datasets.iter().zip(&self.values) {
            out.push_str(d);
            for v in row {
                match v {
                    Some(v) => write!(out, ",{}", two_decimals(*v)).unwrap_or(()),
                    None => out.push_str(",NA"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn file_name(&self) -> String {
        format!("{}_depth_{}.csv", self.metric.slug(), self.depth)
    }
}

fn depth_of(id: &str) -> String {
    parse_dataset_id(id).map(|(_, _, b)| b.slug()).unwrap_or_else(|_| "unknown".into())
}

fn best(reports: &[&EvalReport], metric: TableMetric, higher: bool) -> Option<f64> {
    let vals = reports.iter().filter(|r| r.failed.is_none()).filter_map(|r| metric.value(r));
    if higher {
        vals.fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.max(v))))
    } else {
        vals.fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.min(v))))
    }
}

fn cmp_opt(a: Option<f64>, b: Option<f64>, higher: bool) -> Ordering {
    match (a, b) {
        (Some(a), Some(b)) if higher => b.total_cmp(&a),
        (Some(a), Some(b)) => a.total_cmp(&b),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}

/// Result tables per depth bin, R² then RMSE. Each depth keeps the `rows`
/// datasets with the best test R² (ties to lower RMSE, then id); the R² table
/// lists them by best R², the RMSE table by lowest RMSE. Only reports of
/// [`REPORT_MODELS`] count; cells without a successful report are `NA`.
pub fn build_tables(reports: &[EvalReport], rows: usize) -> Vec<MetricTable> {
    let mut by_depth: BTreeMap<String, BTreeMap<&str, Vec<&EvalReport>>> = BTreeMap::new();
    for r in reports.iter().filter(|r| REPORT_MODELS.contains(&r.model.as_str())) {
        by_depth.entry(depth_of(&r.dataset_id)).or_default().entry(r.dataset_id.as_str()).or_default().push(r);
    }
    let models: Vec<String> = REPORT_MODELS.iter().map(|s| s.to_string()).collect();
    let mut out = Vec::new();
    for (depth, datasets) in by_depth {
        let mut ids: Vec<(&str, Option<f64>, Option<f64>)> = datasets
            .iter()
            .map(|(id, rs)| (*id, best(rs, TableMetric::TestR2, true), best(rs, TableMetric::TestRmse, false)))
            .collect();
        ids.sort_by(|a, b| cmp_opt(a.1, b.1, true).then(cmp_opt(a.2, b.2, false)).then(a.0.cmp(b.0)));
        ids.truncate(rows);
        for metric in [TableMetric::TestR2, TableMetric::TestRmse] {
            let mut order = ids.clone();
            if metric == TableMetric::TestRmse {
                order.sort_by(|a, b| cmp_opt(a.2, b.2, false).then(cmp_opt(a.1, b.1, true)).then(a.0.cmp(b.0)));
            }
            let values = order
                .iter()
                .map(|(id, _, _)| {
                    models
                        .iter()
                        .map(|m| {
                            datasets[id]
                                .iter()
                                .find(|r| &r.model == m && r.failed.is_none())
                                .and_then(|r| metric.value(r))
                        })
                        .collect()
                })
                .collect();
            out.push(MetricTable {
                depth: depth.clone(),
                metric,
                models: models.clone(),
                datasets: order.iter().map(|o| o.0.to_string()).collect(),
                values,
            });
        }
    }
    out
}

/// Two decimals, with values that round to zero printed unsigned.
fn two_decimals(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}
