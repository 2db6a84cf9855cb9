use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{SearchSpace, HIGH_CHL_THRESHOLD};
use crate::features::{ReflectanceSet, DEFAULT_TOP_K, WINDOWS};
use crate::ingest::DepthBin;
use crate::mapping::{Palette, DEFAULT_GAMMA, DEFAULT_PERCENTILE};
use crate::models::ModelSpec;
use crate::raster::GeoBox;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// JSON array of scene catalog entries.
    pub catalog: PathBuf,
    /// UPCT-schema buoy CSVs.
    #[serde(default)]
    pub upct: Vec<PathBuf>,
    /// IMIDA-schema buoy CSVs.
    #[serde(default)]
    pub imida: Vec<PathBuf>,
    /// One excluded date per line.
    #[serde(default)]
    pub exclusions: Option<PathBuf>,
    /// GeoJSON water polygons used to mask maps; the whole grid when absent.
    #[serde(default)]
    pub water_mask: Option<PathBuf>,
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub max_cloud_pct: f64,
    pub min_valid_fraction: f64,
    pub high_chl: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { max_cloud_pct: 20.0, min_valid_fraction: 0.5, high_chl: HIGH_CHL_THRESHOLD }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    /// Trials per (dataset, model); 0 keeps the preset hyperparameters.
    pub budget: usize,
    /// Ranges per model label; labels without an entry use the learner's default ranges.
    #[serde(default)]
    pub spaces: BTreeMap<String, SearchSpace>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { budget: 20, spaces: BTreeMap::new() }
    }
}

/// Dataset (without depth suffix) and model label mapped for one depth bin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinalChoice {
    pub dataset: String,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub gamma: f64,
    pub percentile: f64,
    /// Pixels removed from the water-mask border.
    pub erosion_radius: usize,
    #[serde(default)]
    pub palette: Option<Palette>,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self { gamma: DEFAULT_GAMMA, percentile: DEFAULT_PERCENTILE, erosion_radius: 0, palette: None }
    }
}

fn default_bbox() -> Option<GeoBox> {
    Some(GeoBox::mar_menor())
}
fn default_windows() -> Vec<usize> {
    WINDOWS.to_vec()
}
fn default_sets() -> Vec<ReflectanceSet> {
    ReflectanceSet::all()
}
fn default_bins() -> Vec<DepthBin> {
    DepthBin::ALL.to_vec()
}
fn default_top_k() -> usize {
    DEFAULT_TOP_K
}
fn default_models() -> Vec<String> {
    ["CAT", "ELN", "KNN", "LBM", "LR", "MLP", "RF", "XGB"].iter().map(|s| s.to_string()).collect()
}
fn default_top_datasets() -> usize {
    crate::eval::DEFAULT_TOP_PER_METHOD
}
fn default_lambda() -> f64 {
    crate::eval::DEFAULT_META_LAMBDA
}
fn default_final() -> BTreeMap<DepthBin, FinalChoice> {
    [
        (DepthBin::D0_1, "C2X-Complex_rhow_9x9", "XGB"),
        (DepthBin::D1_2, "C2X-Complex_rhow_5x5", "CAT"),
        (DepthBin::D2_3, "TOA_15x15", "KNN"),
        (DepthBin::D3_4, "C2X-Complex_rhow_5x5", "RF"),
    ]
    .into_iter()
    .map(|(b, d, m)| (b, FinalChoice { dataset: d.into(), model: m.into() }))
    .collect()
}

/// Everything a pipeline run depends on. Relative paths resolve against the
/// configuration file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub paths: Paths,
    /// Study area; `null` uses whole scenes.
    #[serde(default = "default_bbox")]
    pub bbox: Option<GeoBox>,
    #[serde(default = "default_windows")]
    pub windows: Vec<usize>,
    #[serde(default = "default_sets")]
    pub sets: Vec<ReflectanceSet>,
    #[serde(default = "default_bins")]
    pub depth_bins: Vec<DepthBin>,
    pub seed: u64,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    /// Model labels evaluated on every dataset with preset hyperparameters.
    #[serde(default = "default_models")]
    pub models: Vec<String>,
    /// Datasets kept per processing method after the preliminary stage.
    #[serde(default = "default_top_datasets")]
    pub top_datasets: usize,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default = "default_lambda")]
    pub ensemble_lambda: f64,
    /// Mapped model per depth bin; bins without an entry use the best test R².
    #[serde(default = "default_final")]
    pub final_models: BTreeMap<DepthBin, FinalChoice>,
    #[serde(default)]
    pub map: MapConfig,
}

impl PipelineConfig {
    /// Parses and validates; relative paths are joined onto `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("configuration: {e}")))?;
        let p = &mut cfg.paths;
        let fix = |q: &mut PathBuf| {
            if q.is_relative() {
                *q = base.join(&*q);
            }
        };
        fix(&mut p.catalog);
        fix(&mut p.output);
        for q in p.upct.iter_mut().chain(p.imida.iter_mut()).chain(p.exclusions.iter_mut()).chain(p.water_mask.iter_mut()) {
            fix(q);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingInput(format!("configuration file {} does not exist", path.display())));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.windows.is_empty() || self.windows.iter().any(|w| w % 2 == 0) {
            return bad(format!("windows must be odd sizes, got {:?}", self.windows));
        }
        if self.sets.is_empty() || self.depth_bins.is_empty() {
            return bad("sets and depth_bins must not be empty".into());
        }
        if self.paths.upct.is_empty() && self.paths.imida.is_empty() {
            return bad("paths needs at least one upct or imida file".into());
        }
        for m in &self.models {
            ModelSpec::preset(m)?;
        }
        for (bin, c) in &self.final_models {
            ModelSpec::preset(&c.model)?;
            crate::features::parse_dataset_stem(&c.dataset)
                .map_err(|e| Error::Config(format!("final model for {bin}: {e}")))?;
        }
        let t = &self.thresholds;
        if !(0.0..=100.0).contains(&t.max_cloud_pct) || !(0.0..=1.0).contains(&t.min_valid_fraction) {
            return bad(format!("thresholds out of range: {t:?}"));
        }
        if !(self.map.gamma > 0.0) || !(self.map.percentile > 0.0 && self.map.percentile <= 100.0) {
            return bad(format!("map settings out of range: {:?}", self.map));
        }
        if let Some(p) = &self.map.palette {
            Palette::new(p.stops.clone())?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical serialisation, hex encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(hex(&Sha256::digest(serde_json::to_vec(self)?)))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
