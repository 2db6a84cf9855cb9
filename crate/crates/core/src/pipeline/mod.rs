//! Declarative configuration and the resumable ingest → features → train →
//! select → infer → report stages.

mod config;
mod manifest;
mod stages;

pub use config::{FinalChoice, MapConfig, Paths, PipelineConfig, SearchConfig, Thresholds, SCHEMA_VERSION};
pub use manifest::{hash_file, Manifest, MANIFEST_FILE};
pub use stages::{Pipeline, Selection, Session, StageOutcome};
