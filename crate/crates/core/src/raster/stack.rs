use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::geo::GeoTransform;
use crate::error::{Error, Result};

/// One named band of row-major `f32` samples. NaN marks nodata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub name: String,
    pub data: Vec<f32>,
}

impl Band {
    pub fn new(name: impl Into<String>, data: Vec<f32>) -> Self {
        Self {
            name: name.into(),
            data,
        }
    }
}

/// Georeferenced multi-band raster. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandStack {
    width: usize,
    height: usize,
    bands: Vec<Band>,
    transform: GeoTransform,
}

impl BandStack {
    /// Validates shape and name uniqueness.
    pub fn new(width: usize, height: usize, bands: Vec<Band>, transform: GeoTransform) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::Integrity("band stack needs at least one band".into()));
        }
        let expected = width
            .checked_mul(height)
            .ok_or_else(|| Error::Integrity("raster dimensions overflow".into()))?;
        let mut seen = HashSet::new();
        for b in &bands {
            if b.data.len() != expected {
                return Err(Error::Integrity(format!(
                    "band {} has {} samples, expected {width}x{height}",
                    b.name,
                    b.data.len()
                )));
            }
            if !seen.insert(b.name.as_str()) {
                return Err(Error::Integrity(format!("duplicate band name {}", b.name)));
            }
        }
        Ok(Self {
            width,
            height,
            bands,
            transform,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn transform(&self) -> &GeoTransform {
        &self.transform
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn band_names(&self) -> impl Iterator<Item = &str> {
        self.bands.iter().map(|b| b.name.as_str())
    }

    pub fn band_index(&self, name: &str) -> Option<usize> {
        self.bands.iter().position(|b| b.name == name)
    }

    pub fn band(&self, name: &str) -> Option<&Band> {
        self.bands.iter().find(|b| b.name == name)
    }

    pub fn band_at(&self, index: usize) -> &Band {
        &self.bands[index]
    }

    /// Sample of band `band` at `(row, col)`; panics when out of range.
    #[inline]
    pub fn value(&self, band: usize, row: usize, col: usize) -> f32 {
        self.bands[band].data[row * self.width + col]
    }

    pub fn contains(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.height && (col as usize) < self.width
    }

    pub fn into_bands(self) -> Vec<Band> {
        self.bands
    }

    /// Copies the `rows × cols` window starting at `(row0, col0)`.
    pub(crate) fn window(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Result<Self> {
        let bands = self
            .bands
            .iter()
            .map(|b| {
                let mut data = Vec::with_capacity(rows * cols);
                for r in row0..row0 + rows {
                    let start = r * self.width + col0;
                    data.extend_from_slice(&b.data[start..start + cols]);
                }
                Band::new(b.name.clone(), data)
            })
            .collect();
        BandStack::new(cols, rows, bands, self.transform.shifted(row0 as i64, col0 as i64))
    }
}

/// Band suffixes of the 12 top-of-atmosphere bands in the canonical stack.
pub const TOA_BANDS: [&str; 12] = ["B1", "B2", "B3", "B4", "B5", "B6", "B7", "B8", "B9", "B10", "B11", "B12"];
/// Band suffixes of the 9 water-leaving reflectance bands.
pub const RHOW_BANDS: [&str; 9] = ["B1", "B2", "B3", "B4", "B5", "B6", "B7", "B8", "B8A"];
/// Band suffixes of the 6 normalized water-leaving reflectance bands.
pub const RHOWN_BANDS: [&str; 6] = ["B1", "B2", "B3", "B4", "B5", "B6"];
pub const FLAGS_BAND: &str = "c2rcc_flags";

/// The 28 band names of a processed scene, in file order.
pub fn canonical_band_names() -> Vec<String> {
    TOA_BANDS
        .iter()
        .map(|b| format!("TOA_{b}"))
        .chain(RHOW_BANDS.iter().map(|b| format!("rhow_{b}")))
        .chain(RHOWN_BANDS.iter().map(|b| format!("rhown_{b}")))
        .chain(std::iter::once(FLAGS_BAND.to_string()))
        .collect()
}

/// MSI central wavelength (nm) of a band suffix such as `B8A`.
pub fn central_wavelength(suffix: &str) -> Option<f64> {
    Some(match suffix {
        "B1" => 443.0,
        "B2" => 490.0,
        "B3" => 560.0,
        "B4" => 665.0,
        "B5" => 705.0,
        "B6" => 740.0,
        "B7" => 783.0,
        "B8" => 842.0,
        "B8A" => 865.0,
        "B9" => 940.0,
        "B10" => 1375.0,
        "B11" => 1610.0,
        "B12" => 2190.0,
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> GeoTransform {
        GeoTransform::new(0.0, 0.0, 1.0, -1.0, "EPSG:4326").unwrap()
    }

    #[test]
    fn canonical_layout_has_28_bands() {
        let names = canonical_band_names();
        assert_eq!(names.len(), 28);
        assert_eq!(names[0], "TOA_B1");
        assert_eq!(names[11], "TOA_B12");
        assert_eq!(names[12], "rhow_B1");
        assert_eq!(names[20], "rhow_B8A");
        assert_eq!(names[21], "rhown_B1");
        assert_eq!(names[26], "rhown_B6");
        assert_eq!(names[27], "c2rcc_flags");
    }

    #[test]
    fn rejects_mismatched_band_lengths() {
        let err = BandStack::new(2, 2, vec![Band::new("a", vec![0.0; 4]), Band::new("b", vec![0.0; 3])], t());
        assert!(matches!(err, Err(Error::Integrity(_))));
    }

    #[test]
    fn rejects_duplicate_names() {
        let err = BandStack::new(1, 1, vec![Band::new("a", vec![0.0]), Band::new("a", vec![1.0])], t());
        assert!(matches!(err, Err(Error::Integrity(_))));
    }

    #[test]
    fn wavelengths_cover_all_bands() {
        for b in TOA_BANDS.iter().chain(RHOW_BANDS.iter()) {
            assert!(central_wavelength(b).is_some(), "{b}");
        }
        assert!(central_wavelength("B8").unwrap() < central_wavelength("B8A").unwrap());
    }
}
