//! Window extraction, spectral-index enumeration and dataset assembly.

mod dataset;
mod extract;
mod indices;
mod screen;
mod sets;
mod table;

pub use dataset::{buoy_pixel, build_dataset, build_dataset_with};
pub use extract::{set_band_indices, window_mean, FeaturePlan};
pub use indices::{
    all_indices, enumerate_for_bands, enumerate_indices, enumerate_positions, eval_index, is_index_column, IndexFamily,
    SpectralIndex,
};
pub use screen::{pearson, rank_index_columns, screen_features};
pub use sets::ReflectanceSet;
pub use table::{dataset_id, dataset_stem, parse_dataset_id, parse_dataset_stem, FeatureTable, RowKey, TARGET_COLUMN};

/// Window sizes explored by the dataset grid.
pub const WINDOWS: [usize; 5] = [1, 3, 5, 9, 15];

/// Default number of index columns kept by screening.
pub const DEFAULT_TOP_K: usize = 100;
