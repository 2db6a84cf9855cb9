use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::map::ChlMap;

pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_PERCENTILE: f64 = 99.0;

/// Colour stops over palette positions in [0, 1], strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub stops: Vec<(f64, [u8; 3])>,
}

impl Palette {
    pub fn new(stops: Vec<(f64, [u8; 3])>) -> Result<Self> {
        if stops.len() < 2 {
            return Err(Error::Config("a palette needs at least two control points".into()));
        }
        if stops.windows(2).any(|w| !(w[0].0 < w[1].0)) || stops.iter().any(|s| !s.0.is_finite()) {
            return Err(Error::Config("palette control points must be strictly increasing".into()));
        }
        Ok(Self { stops })
    }

    /// Six stops from deep blue through green to red.
    pub fn default_chl() -> Self {
        Self::new(vec![
            (0.0, [8, 29, 88]),
            (0.2, [34, 94, 168]),
            (0.4, [29, 145, 192]),
            (0.6, [65, 182, 96]),
            (0.8, [254, 196, 79]),
            (1.0, [189, 0, 38]),
        ])
        .expect("default palette is increasing")
    }

    /// Piecewise-linear colour at `pos`, clamped to the end stops.
    pub fn color(&self, pos: f64) -> [u8; 3] {
        let s = &self.stops;
        if pos <= s[0].0 {
            return s[0].1;
        }
        let last = s[s.len() - 1];
        if pos >= last.0 {
            return last.1;
        }
        let i = s.partition_point(|p| p.0 <= pos);
        let (a, b) = (s[i - 1], s[i]);
        let t = (pos - a.0) / (b.0 - a.0);
        let mut out = [0u8; 3];
        for k in 0..3 {
            out[k] = (a.1[k] as f64 + t * (b.1[k] as f64 - a.1[k] as f64)).round() as u8;
        }
        out
    }
}

/// Palette position of `chl` under `(chl / max)^gamma`, clamped to [0, 1].
pub fn palette_position(chl: f64, max: f64, gamma: f64) -> f64 {
    if !(max > 0.0) || chl <= 0.0 {
        return 0.0;
    }
    (chl / max).powf(gamma).min(1.0)
}

/// Nearest-rank percentile of the finite values, `None` if there are none.
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    Some(v[rank.min(v.len()) - 1])
}

/// Colour-scale description written beside a rendered map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Colorbar {
    pub units: String,
    pub min: f64,
    pub max: f64,
    pub gamma: f64,
    /// Concentration at each palette stop and its colour as `#rrggbb`.
    pub stops: Vec<(f64, String)>,
    /// Pixels above `max`, drawn with the top colour.
    pub saturated: usize,
    pub nodata: String,
}

pub struct Rendered {
    pub png: Vec<u8>,
    pub colorbar: Colorbar,
}

impl Rendered {
    /// Writes the PNG and a `.colorbar.json` sidecar next to it.
    pub fn write(&self, png_path: impl AsRef<Path>) -> Result<()> {
        let p = png_path.as_ref();
        std::fs::write(p, &self.png).map_err(|e| Error::io(p, e))?;
        let side = p.with_extension("colorbar.json");
        std::fs::write(&side, serde_json::to_string_pretty(&self.colorbar)?).map_err(|e| Error::io(&side, e))
    }
}

/// RGBA rendering of `map`. `max` defaults to the 99th percentile of the map;
/// NaN pixels are fully transparent.
pub fn render_png(map: &ChlMap, palette: &Palette, gamma: f64, max: Option<f64>) -> Result<Rendered> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
    }
    let vmax = max.or_else(|| percentile(&map.values, DEFAULT_PERCENTILE)).unwrap_or(0.0);
    let mut rgba = Vec::with_capacity(map.values.len() * 4);
    let mut saturated = 0;
    for &v in &map.values {
        if v.is_nan() {
            rgba.extend_from_slice(&[0, 0, 0, 0]);
            continue;
        }
        if v > vmax {
            saturated += 1;
        }
        let c = palette.color(palette_position(v, vmax, gamma));
        rgba.extend_from_slice(&[c[0], c[1], c[2], 255]);
    }
    if saturated > 0 {
        log::info!("{saturated} pixels exceed the colour-scale maximum {vmax:.3}");
    }
    let mut png = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut png, map.width as u32, map.height as u32);
        enc.set_color(png::ColorType::Rgba);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().map_err(|e| Error::Format(format!("png: {e}")))?;
        w.write_image_data(&rgba).map_err(|e| Error::Format(format!("png: {e}")))?;
    }
    let stops = palette
        .stops
        .iter()
        .map(|(pos, c)| (vmax * pos.max(0.0).powf(1.0 / gamma), format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])))
        .collect();
    Ok(Rendered {
        png,
        colorbar: Colorbar { units: "mg/m3".into(), min: 0.0, max: vmax, gamma, stops, saturated, nodata: "transparent".into() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::map::MapProvenance;
    use crate::raster::GeoTransform;
    use proptest::prelude::*;

    fn map(values: Vec<f64>, w: usize) -> ChlMap {
        let h = values.len() / w;
        ChlMap {
            width: w,
            height: h,
            transform: GeoTransform::new(0.0, h as f64, 1.0, -1.0, "EPSG:4326").unwrap(),
            values,
            provenance: MapProvenance::default(),
        }
    }

    fn decode(png_bytes: &[u8]) -> Vec<u8> {
        let dec = png::Decoder::new(std::io::Cursor::new(png_bytes));
        let mut r = dec.read_info().unwrap();
        let mut buf = vec![0; r.output_buffer_size().unwrap()];
        let info = r.next_frame(&mut buf).unwrap();
        buf.truncate(info.buffer_size());
        buf
    }

    #[test]
    fn uniform_and_transparent() {
        let out = render_png(&map(vec![2.0, 2.0, f64::NAN, 2.0], 2), &Palette::default_chl(), 0.5, None).unwrap();
        let px = decode(&out.png);
        assert_eq!(px[0..4], px[4..8]);
        assert_eq!(px[0..4], px[12..16]);
        assert_eq!(px[11], 0);
        assert_eq!(out.colorbar.max, 2.0);
    }

    #[test]
    fn gamma_one_is_linear() {
        for chl in [0.0, 1.0, 2.5, 7.0] {
            assert!((palette_position(chl, 10.0, 1.0) - chl / 10.0).abs() < 1e-15);
        }
        assert!(palette_position(2.0, 10.0, 0.5) > palette_position(1.0, 10.0, 0.5));
    }

    #[test]
    fn bad_palettes_and_gamma() {
        assert!(Palette::new(vec![(0.0, [0; 3]), (0.0, [1; 3])]).is_err());
        assert!(Palette::new(vec![(0.5, [0; 3]), (0.2, [1; 3])]).is_err());
        assert!(render_png(&map(vec![1.0], 1), &Palette::default_chl(), 0.0, None).is_err());
    }

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 99.0), Some(99.0));
        assert_eq!(percentile(&[f64::NAN], 99.0), None);
    }

    proptest! {
        #[test]
        fn monotone(a in 0.0f64..50.0, b in 0.0f64..50.0, max in 0.1f64..60.0, gamma in 0.05f64..4.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(palette_position(lo, max, gamma) <= palette_position(hi, max, gamma));
        }
    }
}
