//! Buoy ground truth and scene catalog ingestion.

mod buoy;
mod scenes;

pub use buoy::{
    bin_depths, load_buoy_source, merge_sources, normalize_buoy_id, parse_buoy_csv, parse_date, station, BuoyDepthTable,
    BuoyRecord, DepthBin, DepthKey, Source, Station, STATIONS,
};
pub use scenes::{
    filter_scenes, load_catalog, parse_exclusion_list, read_exclusion_list, valid_pixel_fraction, Processor,
    SceneCatalogEntry,
};
