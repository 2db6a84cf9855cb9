//! Band-stack rasters: file formats, georeferencing, cropping, resampling and
//! polygon masks.

mod bsf;
mod geo;
mod geotiff;
mod ops;
mod polygon;
mod stack;

use std::path::Path;

pub use bsf::{decode as decode_bsf, encode as encode_bsf, read_bsf, write_bsf};
pub use geo::{Crs, GeoTransform};
pub use geotiff::{decode_geotiff, encode_geotiff, read_geotiff, write_geotiff, ByteOrder, TiffOptions};
pub use ops::{bbox_window, crop_geo, resample_nearest, GeoBox};
pub use polygon::{parse_geojson, point_in_ring, rasterize_polygon, rasterize_polygons, read_geojson, Mask, Polygon, Ring};
pub use stack::{
    canonical_band_names, central_wavelength, Band, BandStack, FLAGS_BAND, RHOWN_BANDS, RHOW_BANDS, TOA_BANDS,
};

use crate::error::{Error, Result};

/// On-disk raster encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterFormat {
    Bsf,
    GeoTiff,
}

impl RasterFormat {
    /// Guesses from the extension: `.tif`/`.tiff` are GeoTIFF, everything else BSF.
    pub fn from_path(path: &Path) -> Self {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("tif") | Some("tiff") => RasterFormat::GeoTiff,
            _ => RasterFormat::Bsf,
        }
    }
}

pub fn read_band_stack(path: impl AsRef<Path>, format: RasterFormat) -> Result<BandStack> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingInput(format!("raster {} does not exist", path.display())));
    }
    match format {
        RasterFormat::Bsf => read_bsf(path),
        RasterFormat::GeoTiff => read_geotiff(path),
    }
}

/// Writes BSF or GeoTIFF depending on the extension.
pub fn write_band_stack(stack: &BandStack, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match RasterFormat::from_path(path) {
        RasterFormat::Bsf => write_bsf(stack, path),
        RasterFormat::GeoTiff => write_geotiff(stack, path, &TiffOptions::default()),
    }
}
