//! Splitting, cross-validation, stacking, ranking and search.

mod cv;
mod ensemble;
mod metrics;
mod rank;
mod search;
mod split;
mod tables;

pub use cv::{cross_validate, CvOptions, CvResult, EvalReport, FoldMetrics};
pub use ensemble::{evaluate_ensemble, stack_ridge, StackOutcome, DEFAULT_META_LAMBDA, ENSEMBLE_LABEL};
pub use metrics::{r2, rmse};
pub use rank::{compare_ranked, rank_datasets, RankedDataset, DEFAULT_TOP_PER_METHOD};
pub use search::{default_space, random_search, ParamRange, SearchOutcome, SearchSpace, Trial};
pub use split::{
    label_high_chl, realised_quantile, stratified_kfold, stratified_split, SplitPlan, HIGH_CHL_THRESHOLD, N_FOLDS,
    TEST_FRACTION,
};
pub use tables::{build_tables, MetricTable, TableMetric, REPORT_MODELS, REPORT_ROWS};
