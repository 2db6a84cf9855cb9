//! Affine georeferencing and the lon/lat → raster CRS mapping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fractional pixel coordinates closer than this to an integer are snapped to
/// it, so that bounding boxes built from pixel edges map back onto those edges.
const SNAP_EPS: f64 = 1e-9;

/// North-up affine transform between pixel indices and CRS coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoTransform {
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_width: f64,
    pub pixel_height: f64,
    pub crs_id: String,
}

impl GeoTransform {
    pub fn new(
        origin_x: f64,
        origin_y: f64,
        pixel_width: f64,
        pixel_height: f64,
        crs_id: impl Into<String>,
    ) -> Result<Self> {
        if pixel_width == 0.0 || pixel_height == 0.0 || !pixel_width.is_finite() || !pixel_height.is_finite() {
            return Err(Error::Domain(format!(
                "pixel size must be finite and non-zero, got {pixel_width} x {pixel_height}"
            )));
        }
        if !origin_x.is_finite() || !origin_y.is_finite() {
            return Err(Error::Domain("geotransform origin must be finite".into()));
        }
        Ok(Self {
            origin_x,
            origin_y,
            pixel_width,
            pixel_height,
            crs_id: crs_id.into(),
        })
    }

    /// CRS coordinates of the center of pixel `(row, col)`.
    pub fn pixel_to_geo(&self, row: i64, col: i64) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.pixel_width,
            self.origin_y + (row as f64 + 0.5) * self.pixel_height,
        )
    }

    /// Fractional `(row, col)` position of a CRS coordinate; pixel edges sit on integers.
    pub fn geo_to_fractional(&self, x: f64, y: f64) -> (f64, f64) {
        (
            snap((y - self.origin_y) / self.pixel_height),
            snap((x - self.origin_x) / self.pixel_width),
        )
    }

    /// Index of the pixel containing `(x, y)`. Out-of-grid results are allowed.
    pub fn geo_to_pixel(&self, x: f64, y: f64) -> (i64, i64) {
        let (r, c) = self.geo_to_fractional(x, y);
        (r.floor() as i64, c.floor() as i64)
    }

    pub fn crs(&self) -> Result<Crs> {
        Crs::parse(&self.crs_id)
    }

    /// Maps WGS84 lon/lat into this transform's CRS.
    pub fn lonlat_to_crs(&self, lon: f64, lat: f64) -> Result<(f64, f64)> {
        Ok(self.crs()?.from_lonlat(lon, lat))
    }

    /// Same transform with the origin moved to the top-left corner of pixel `(row, col)`.
    pub fn shifted(&self, row: i64, col: i64) -> Self {
        Self {
            origin_x: self.origin_x + col as f64 * self.pixel_width,
            origin_y: self.origin_y + row as f64 * self.pixel_height,
            ..self.clone()
        }
    }

    /// Axis-aligned CRS extent `(min_x, min_y, max_x, max_y)` of a `width` × `height` grid.
    pub fn extent(&self, width: usize, height: usize) -> (f64, f64, f64, f64) {
        let x0 = self.origin_x;
        let x1 = self.origin_x + width as f64 * self.pixel_width;
        let y0 = self.origin_y;
        let y1 = self.origin_y + height as f64 * self.pixel_height;
        (x0.min(x1), y0.min(y1), x0.max(x1), y0.max(y1))
    }
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < SNAP_EPS {
        r
    } else {
        v
    }
}

/// Coordinate reference systems the pipeline can place WGS84 points into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Crs {
    /// Plain lon/lat degrees (EPSG:4326, CRS84).
    Geographic,
    /// WGS84 / UTM zone; `north` selects the 326xx vs 327xx family.
    Utm { zone: u8, north: bool },
}

impl Crs {
    pub fn parse(id: &str) -> Result<Self> {
        let norm = id.trim().to_ascii_uppercase();
        match norm.as_str() {
            "EPSG:4326" | "WGS84" | "OGC:CRS84" | "CRS84" => return Ok(Crs::Geographic),
            _ => {}
        }
        if let Some(code) = norm.strip_prefix("EPSG:") {
            if let Ok(code) = code.parse::<u32>() {
                let (base, north) = match code {
                    32601..=32660 => (32600, true),
                    32701..=32760 => (32700, false),
                    _ => return Err(Error::Domain(format!("unsupported CRS {id}"))),
                };
                return Ok(Crs::Utm {
                    zone: (code - base) as u8,
                    north,
                });
            }
        }
        Err(Error::Domain(format!("unsupported CRS {id}")))
    }

    pub fn is_geographic(&self) -> bool {
        matches!(self, Crs::Geographic)
    }

    pub fn from_lonlat(&self, lon: f64, lat: f64) -> (f64, f64) {
        match *self {
            Crs::Geographic => (lon, lat),
            Crs::Utm { zone, north } => utm_forward(lon, lat, zone, north),
        }
    }

    pub fn epsg_code(&self) -> u32 {
        match *self {
            Crs::Geographic => 4326,
            Crs::Utm { zone, north: true } => 32600 + zone as u32,
            Crs::Utm { zone, north: false } => 32700 + zone as u32,
        }
    }
}

/// WGS84 transverse Mercator forward series (USGS Professional Paper 1395 form),
/// accurate to millimetres inside a zone.
fn utm_forward(lon: f64, lat: f64, zone: u8, north: bool) -> (f64, f64) {
    const A: f64 = 6_378_137.0;
    const F: f64 = 1.0 / 298.257_223_563;
    const K0: f64 = 0.9996;
    let e2 = F * (2.0 - F);
    let e4 = e2 * e2;
    let e6 = e4 * e2;
    let ep2 = e2 / (1.0 - e2);

    let lon0 = (zone as f64 - 1.0) * 6.0 - 180.0 + 3.0;
    let phi = lat.to_radians();
    let (sin_phi, cos_phi) = phi.sin_cos();
    let tan_phi = sin_phi / cos_phi;

    let n = A / (1.0 - e2 * sin_phi * sin_phi).sqrt();
    let t = tan_phi * tan_phi;
    let c = ep2 * cos_phi * cos_phi;
    let a = cos_phi * (lon - lon0).to_radians();

    let m = A
        * ((1.0 - e2 / 4.0 - 3.0 * e4 / 64.0 - 5.0 * e6 / 256.0) * phi
            - (3.0 * e2 / 8.0 + 3.0 * e4 / 32.0 + 45.0 * e6 / 1024.0) * (2.0 * phi).sin()
            + (15.0 * e4 / 256.0 + 45.0 * e6 / 1024.0) * (4.0 * phi).sin()
            - (35.0 * e6 / 3072.0) * (6.0 * phi).sin());

    let a2 = a * a;
    let a3 = a2 * a;
    let a4 = a3 * a;
    let a5 = a4 * a;
    let a6 = a5 * a;

    let x = K0
        * n
        * (a + (1.0 - t + c) * a3 / 6.0 + (5.0 - 18.0 * t + t * t + 72.0 * c - 58.0 * ep2) * a5 / 120.0)
        + 500_000.0;
    let mut y = K0
        * (m + n
            * tan_phi
            * (a2 / 2.0
                + (5.0 - t + 9.0 * c + 4.0 * c * c) * a4 / 24.0
                + (61.0 - 58.0 * t + t * t + 600.0 * c - 330.0 * ep2) * a6 / 720.0));
    if !north {
        y += 10_000_000.0;
    }
    (x, y)
}
