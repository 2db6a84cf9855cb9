use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::geo::GeoTransform;
use super::stack::{Band, BandStack};
use crate::error::{Error, Result};

/// WGS84 lon/lat bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoBox {
    pub north: f64,
    pub west: f64,
    pub south: f64,
    pub east: f64,
}

impl GeoBox {
    pub fn new(north: f64, west: f64, south: f64, east: f64) -> Result<Self> {
        if !(north > south) || !(east > west) {
            return Err(Error::Domain(format!(
                "bbox needs north > south and east > west, got N{north} W{west} S{south} E{east}"
            )));
        }
        Ok(Self {
            north,
            west,
            south,
            east,
        })
    }

    /// Study area used for the lagoon scenes.
    pub fn mar_menor() -> Self {
        Self {
            north: 37.82,
            west: -0.867,
            south: 37.62,
            east: -0.7,
        }
    }

    /// Points along the box outline, dense enough to bound its projected shape.
    fn outline(&self, per_edge: usize) -> Vec<(f64, f64)> {
        let mut pts = Vec::with_capacity(4 * per_edge + 4);
        for i in 0..=per_edge {
            let f = i as f64 / per_edge as f64;
            let lon = self.west + f * (self.east - self.west);
            let lat = self.south + f * (self.north - self.south);
            pts.push((lon, self.north));
            pts.push((lon, self.south));
            pts.push((self.west, lat));
            pts.push((self.east, lat));
        }
        pts
    }
}

/// Pixel window `(row0, col0, rows, cols)` covering `bbox`, expanded outward to
/// whole pixels and clipped to the grid.
pub fn bbox_window(transform: &GeoTransform, width: usize, height: usize, bbox: &GeoBox) -> Result<(usize, usize, usize, usize)> {
    let crs = transform.crs()?;
    let per_edge = if crs.is_geographic() { 1 } else { 32 };
    let (mut rmin, mut rmax, mut cmin, mut cmax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (lon, lat) in bbox.outline(per_edge) {
        let (x, y) = crs.from_lonlat(lon, lat);
        let (r, c) = transform.geo_to_fractional(x, y);
        rmin = rmin.min(r);
        rmax = rmax.max(r);
        cmin = cmin.min(c);
        cmax = cmax.max(c);
    }
    let r0 = (rmin.floor().max(0.0)) as i64;
    let r1 = (rmax.ceil() as i64).min(height as i64);
    let c0 = (cmin.floor().max(0.0)) as i64;
    let c1 = (cmax.ceil() as i64).min(width as i64);
    if r1 <= r0 || c1 <= c0 {
        return Err(Error::Domain(format!(
            "bbox N{} W{} S{} E{} does not intersect the raster",
            bbox.north, bbox.west, bbox.south, bbox.east
        )));
    }
    Ok((r0 as usize, c0 as usize, (r1 - r0) as usize, (c1 - c0) as usize))
}

/// Smallest pixel-aligned sub-raster containing the lon/lat box.
pub fn crop_geo(stack: &BandStack, north: f64, west: f64, south: f64, east: f64) -> Result<BandStack> {
    let bbox = GeoBox::new(north, west, south, east)?;
    let (r0, c0, rows, cols) = bbox_window(stack.transform(), stack.width(), stack.height(), &bbox)?;
    stack.window(r0, c0, rows, cols)
}

/// Nearest-neighbour resampling onto square pixels of `target_pixel_size`.
///
/// Each output pixel takes the input pixel whose area contains its center;
/// a center on a shared edge goes to the pixel at the larger index. Output
/// pixels whose centers fall outside the input extent are NaN.
pub fn resample_nearest(stack: &BandStack, target_pixel_size: f64) -> Result<BandStack> {
    if !(target_pixel_size > 0.0) || !target_pixel_size.is_finite() {
        return Err(Error::Domain(format!("target pixel size must be > 0, got {target_pixel_size}")));
    }
    let t = stack.transform();
    let pw = target_pixel_size * t.pixel_width.signum();
    let ph = target_pixel_size * t.pixel_height.signum();
    let span_x = stack.width() as f64 * t.pixel_width.abs();
    let span_y = stack.height() as f64 * t.pixel_height.abs();
    let out_w = output_len(span_x, target_pixel_size);
    let out_h = output_len(span_y, target_pixel_size);
    let out_t = GeoTransform::new(t.origin_x, t.origin_y, pw, ph, t.crs_id.clone())?;

    let src_row: Vec<Option<usize>> = (0..out_h)
        .map(|r| {
            let (_, y) = out_t.pixel_to_geo(r as i64, 0);
            let (fr, _) = t.geo_to_fractional(t.origin_x, y);
            index_in(fr, stack.height())
        })
        .collect();
    let src_col: Vec<Option<usize>> = (0..out_w)
        .map(|c| {
            let (x, _) = out_t.pixel_to_geo(0, c as i64);
            let (_, fc) = t.geo_to_fractional(x, t.origin_y);
            index_in(fc, stack.width())
        })
        .collect();

    let bands = stack
        .bands()
        .par_iter()
        .map(|b| {
            let mut data = vec![f32::NAN; out_w * out_h];
            for (r, sr) in src_row.iter().enumerate() {
                let Some(sr) = sr else { continue };
                for (c, sc) in src_col.iter().enumerate() {
                    if let Some(sc) = sc {
                        data[r * out_w + c] = b.data[sr * stack.width() + sc];
                    }
                }
            }
            Band::new(b.name.clone(), data)
        })
        .collect();
    BandStack::new(out_w, out_h, bands, out_t)
}

fn output_len(span: f64, size: f64) -> usize {
    let n = span / size;
    let r = n.round();
    if (n - r).abs() < 1e-9 {
        r as usize
    } else {
        n.ceil() as usize
    }
}

fn index_in(frac: f64, len: usize) -> Option<usize> {
    let i = frac.floor();
    (i >= 0.0 && (i as usize) < len).then_some(i as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn grid(w: usize, h: usize, vals: Vec<f32>) -> BandStack {
        let t = GeoTransform::new(-1.0, 38.0, 0.25, -0.25, "EPSG:4326").unwrap();
        BandStack::new(w, h, vec![Band::new("v", vals)], t).unwrap()
    }

    fn full_bbox(s: &BandStack) -> (f64, f64, f64, f64) {
        let (minx, miny, maxx, maxy) = s.transform().extent(s.width(), s.height());
        (maxy, minx, miny, maxx)
    }

    #[test]
    fn identity_crop() {
        let s = grid(4, 3, (0..12).map(|v| v as f32).collect());
        let (n, w, so, e) = full_bbox(&s);
        assert_eq!(crop_geo(&s, n, w, so, e).unwrap(), s);
    }

    #[test]
    fn northwest_quadrant_matches_index_oracle() {
        let vals: Vec<f32> = (0..16).map(|v| v as f32).collect();
        let s = grid(4, 4, vals.clone());
        // NW quadrant: lon [-1, -0.5], lat [37.5, 38]; shrink slightly inside.
        let c = crop_geo(&s, 37.99, -0.99, 37.51, -0.51).unwrap();
        let vals = &vals;
        let oracle: Vec<f32> = (0..2).flat_map(|r| (0..2).map(move |c| vals[r * 4 + c])).collect();
        assert_eq!((c.width(), c.height()), (2, 2));
        assert_eq!(c.band("v").unwrap().data, oracle);
        assert_eq!(c.transform().origin_x, -1.0);
        assert_eq!(c.transform().origin_y, 38.0);
    }

    #[test]
    fn crop_expands_outward() {
        let s = grid(4, 4, vec![0.0; 16]);
        // A box straddling the center pixel edges expands to the 2x2 block around it.
        let c = crop_geo(&s, 37.6, -0.6, 37.4, -0.4).unwrap();
        assert_eq!((c.width(), c.height()), (2, 2));
        assert_eq!(c.transform().origin_x, -0.75);
    }

    #[test]
    fn crop_is_idempotent() {
        let s = grid(8, 8, (0..64).map(|v| v as f32).collect());
        let a = crop_geo(&s, 37.77, -0.93, 36.4, -0.11).unwrap();
        let b = crop_geo(&a, 37.77, -0.93, 36.4, -0.11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn default_bbox_corners_inside_utm_crop() {
        use crate::raster::geo::Crs;
        // 10 m UTM 30N grid generously covering the lagoon.
        let t = GeoTransform::new(685_000.0, 4_190_000.0, 10.0, -10.0, "EPSG:32630").unwrap();
        let (w, h) = (2000, 2600);
        let s = BandStack::new(w, h, vec![Band::new("v", vec![0.0; w * h])], t).unwrap();
        let b = GeoBox::mar_menor();
        let c = crop_geo(&s, b.north, b.west, b.south, b.east).unwrap();
        let (minx, miny, maxx, maxy) = c.transform().extent(c.width(), c.height());
        let crs = Crs::parse("EPSG:32630").unwrap();
        for (lon, lat) in [(b.west, b.north), (b.east, b.north), (b.west, b.south), (b.east, b.south)] {
            let (x, y) = crs.from_lonlat(lon, lat);
            assert!(x >= minx && x <= maxx && y >= miny && y <= maxy, "corner {lon},{lat}");
        }
        assert!(c.width() < w && c.height() < h);
    }

    #[test]
    fn empty_intersection_is_domain_error() {
        let s = grid(4, 4, vec![0.0; 16]);
        assert!(matches!(crop_geo(&s, 10.0, 5.0, 9.0, 6.0), Err(Error::Domain(_))));
        assert!(matches!(crop_geo(&s, 37.0, -0.5, 38.0, -0.4), Err(Error::Domain(_))));
    }

    #[test]
    fn resample_identity() {
        let s = grid(3, 2, vec![1.0, f32::NAN, 3.0, 4.0, 5.0, 6.0]);
        let r = resample_nearest(&s, 0.25).unwrap();
        assert_eq!(r.transform(), s.transform());
        let a: Vec<u32> = r.band("v").unwrap().data.iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = s.band("v").unwrap().data.iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn upsample_two_replicates_blocks() {
        let s = grid(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let r = resample_nearest(&s, 0.125).unwrap();
        assert_eq!((r.width(), r.height()), (4, 4));
        assert_eq!(
            r.band("v").unwrap().data,
            vec![1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0, 3.0, 3.0, 4.0, 4.0]
        );
    }

    /// Brute force: the input pixel whose center is nearest in Euclidean distance.
    fn nearest_center_oracle(s: &BandStack, x: f64, y: f64) -> f32 {
        let mut best = (f64::INFINITY, 0usize);
        for r in 0..s.height() {
            for c in 0..s.width() {
                let (cx, cy) = s.transform().pixel_to_geo(r as i64, c as i64);
                let d = (cx - x).powi(2) + (cy - y).powi(2);
                if d < best.0 {
                    best = (d, r * s.width() + c);
                }
            }
        }
        s.band_at(0).data[best.1]
    }

    #[test]
    fn random_upsample_three_matches_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let vals: Vec<f32> = (0..25)
            .map(|_| if rng.gen_bool(0.1) { f32::NAN } else { rng.gen::<f32>() })
            .collect();
        let s = grid(5, 5, vals);
        let r = resample_nearest(&s, 0.25 / 3.0).unwrap();
        assert_eq!((r.width(), r.height()), (15, 15));
        for row in 0..15 {
            for col in 0..15 {
                let (x, y) = r.transform().pixel_to_geo(row, col);
                let got = r.value(0, row as usize, col as usize);
                let want = nearest_center_oracle(&s, x, y);
                assert_eq!(got.to_bits(), want.to_bits(), "({row},{col})");
            }
        }
    }

    #[test]
    fn resample_rejects_nonpositive() {
        let s = grid(1, 1, vec![1.0]);
        assert!(resample_nearest(&s, 0.0).is_err());
        assert!(resample_nearest(&s, -1.0).is_err());
    }
}
