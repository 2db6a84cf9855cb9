use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::buoy::parse_date;
use crate::error::{Error, Result};
use crate::raster::{bbox_window, BandStack, GeoBox};

/// Atmospheric-correction network a scene was processed with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Processor {
    #[serde(rename = "C2RCC")]
    C2rcc,
    #[serde(rename = "C2X")]
    C2x,
    #[serde(rename = "C2X-Complex")]
    C2xComplex,
}

impl Processor {
    pub const ALL: [Processor; 3] = [Processor::C2rcc, Processor::C2x, Processor::C2xComplex];

    pub fn name(self) -> &'static str {
        match self {
            Processor::C2rcc => "C2RCC",
            Processor::C2x => "C2X",
            Processor::C2xComplex => "C2X-Complex",
        }
    }
}

impl fmt::Display for Processor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One processed scene file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneCatalogEntry {
    pub date: NaiveDate,
    pub tile_id: String,
    pub processor: Processor,
    pub path: PathBuf,
    pub cloud_pct: f64,
    #[serde(default)]
    pub file_bytes: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_pixel_fraction: Option<f64>,
}

/// Reads a JSON array of entries; relative paths resolve against the catalog's directory.
pub fn load_catalog(path: impl AsRef<Path>) -> Result<Vec<SceneCatalogEntry>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries: Vec<SceneCatalogEntry> =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("scene catalog {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    for e in &mut entries {
        if !(0.0..=100.0).contains(&e.cloud_pct) {
            return Err(Error::Format(format!(
                "scene {} has cloud_pct {} outside [0, 100]",
                e.path.display(),
                e.cloud_pct
            )));
        }
        if e.path.is_relative() {
            e.path = base.join(&e.path);
        }
    }
    Ok(entries)
}

/// One date per line; blank lines and `#` comments are ignored.
pub fn parse_exclusion_list(text: &str) -> Result<BTreeSet<NaiveDate>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(parse_date)
        .collect()
}

pub fn read_exclusion_list(path: impl AsRef<Path>) -> Result<BTreeSet<NaiveDate>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_exclusion_list(&text)
}

/// Fraction of `TOA_B3` pixels inside `bbox` that are neither NaN nor zero.
pub fn valid_pixel_fraction(stack: &BandStack, bbox: &GeoBox) -> Result<f64> {
    let b = stack
        .band_index("TOA_B3")
        .ok_or_else(|| Error::Contract("scene lacks band TOA_B3".into()))?;
    let (r0, c0, rows, cols) = match bbox_window(stack.transform(), stack.width(), stack.height(), bbox) {
        Ok(w) => w,
        Err(Error::Domain(_)) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    let mut valid = 0usize;
    for r in r0..r0 + rows {
        for c in c0..c0 + cols {
            let v = stack.value(b, r, c);
            if !v.is_nan() && v != 0.0 {
                valid += 1;
            }
        }
    }
    Ok(valid as f64 / (rows * cols) as f64)
}

/// Keeps scenes under the cloud threshold with enough valid pixels whose date
/// is not excluded, sorted by date (then processor, then path).
pub fn filter_scenes(
    catalog: &[SceneCatalogEntry],
    max_cloud_pct: f64,
    min_valid_fraction: f64,
    excluded: &BTreeSet<NaiveDate>,
) -> Result<Vec<SceneCatalogEntry>> {
    let mut kept = Vec::new();
    for e in catalog {
        let valid = e.valid_pixel_fraction.ok_or_else(|| {
            Error::Contract(format!("scene {} has no computed valid_pixel_fraction", e.path.display()))
        })?;
        if e.cloud_pct <= max_cloud_pct && valid >= min_valid_fraction && !excluded.contains(&e.date) {
            kept.push(e.clone());
        }
    }
    kept.sort_by(|a, b| (a.date, a.processor, &a.path).cmp(&(b.date, b.processor, &b.path)));
    Ok(kept)
}
