//! Seeded synthetic scenes and buoy records with a known chlorophyll law,
//! for end-to-end checks of the pipeline.

use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::features::buoy_pixel;
use crate::ingest::{Processor, SceneCatalogEntry, STATIONS};
use crate::raster::{canonical_band_names, write_bsf, Band, BandStack, GeoTransform};

/// Shape of a synthetic world. Scenes cover every station of the lagoon.
#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub width: usize,
    pub height: usize,
    pub dates: usize,
    pub first_date: NaiveDate,
    pub seed: u64,
    /// Standard deviation of the Gaussian noise on surface chlorophyll.
    pub noise: f64,
    /// Processors the catalog lists each scene under.
    pub processors: Vec<Processor>,
}

impl Default for SyntheticWorld {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            dates: 30,
            first_date: NaiveDate::from_ymd_opt(2021, 1, 4).expect("valid date"),
            seed: 1,
            noise: 0.1,
            processors: vec![Processor::C2rcc],
        }
    }
}

/// Surface chlorophyll law: `120 · ND(rhow_B3, rhow_B4) + 2`.
pub fn surface_chl(rhow_b3: f64, rhow_b4: f64) -> f64 {
    120.0 * (rhow_b3 - rhow_b4) / (rhow_b3 + rhow_b4) + 2.0
}

/// Relative chlorophyll at `depth` metres compared with the top metre.
pub fn depth_factor(depth: f64) -> f64 {
    1.0 - 0.05 * depth.floor()
}

/// Files written by [`SyntheticWorld::write`].
#[derive(Debug, Clone)]
pub struct SyntheticInputs {
    pub catalog: PathBuf,
    pub upct: PathBuf,
    pub scenes: Vec<PathBuf>,
    pub dates: Vec<NaiveDate>,
}

impl SyntheticWorld {
    pub fn transform(&self) -> GeoTransform {
        let px = 0.205 / self.width.max(self.height) as f64;
        GeoTransform::new(-0.86, 37.83, px, -px, "EPSG:4326").expect("valid transform")
    }

    pub fn date(&self, i: usize) -> NaiveDate {
        self.first_date + Days::new(7 * i as u64)
    }

    /// 28-band scene of date `i`. `rhow_B4` is drawn as a fraction of
    /// `rhow_B3` so the surface law stays positive.
    pub fn scene(&self, i: usize) -> Result<BandStack> {
        let n = self.width * self.height;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(1_000_003).wrapping_add(i as u64));
        let names = canonical_band_names();
        let mut bands: Vec<Band> = names
            .iter()
            .map(|name| {
                let data = if name == "c2rcc_flags" {
                    vec![0.0; n]
                } else {
                    (0..n).map(|_| rng.gen_range(0.01f32..0.2)).collect()
                };
                Band::new(name.clone(), data)
            })
            .collect();
        let b3 = names.iter().position(|s| s == "rhow_B3").expect("canonical band");
        let b4 = names.iter().position(|s| s == "rhow_B4").expect("canonical band");
        for p in 0..n {
            let v3 = rng.gen_range(0.02f32..0.1);
            bands[b3].data[p] = v3;
            bands[b4].data[p] = v3 * rng.gen_range(0.75f32..1.0);
        }
        BandStack::new(self.width, self.height, bands, self.transform())
    }

    /// Writes scenes as BSF, a catalog and one UPCT-schema buoy CSV under `dir`.
    pub fn write(&self, dir: &Path) -> Result<SyntheticInputs> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let normal = Normal::new(0.0, self.noise).map_err(|e| Error::Domain(format!("noise: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed);
        let depths: Vec<f64> = (1..=10).map(|i| i as f64 * 0.5).collect();
        let mut csv = String::from("date,buoy");
        for d in &depths {
            csv.push_str(&format!(",{d:.1}"));
        }
        csv.push('\n');
        let mut catalog = Vec::new();
        let mut scenes = Vec::new();
        let mut dates = Vec::new();
        for i in 0..self.dates {
            let date = self.date(i);
            let stack = self.scene(i)?;
            let path = dir.join(format!("scene_{}.bsf", date.format("%Y%m%d")));
            write_bsf(&stack, &path)?;
            let (b3, b4) = (stack.band_index("rhow_B3"), stack.band_index("rhow_B4"));
            let (b3, b4) = (b3.expect("canonical band"), b4.expect("canonical band"));
            for st in &STATIONS {
                let (r, c) = buoy_pixel(&stack, st.id)?
                    .ok_or_else(|| Error::Domain(format!("station {} outside the synthetic grid", st.id)))?;
                let chl0 = surface_chl(stack.value(b3, r, c) as f64, stack.value(b4, r, c) as f64) + normal.sample(&mut rng);
                csv.push_str(&format!("{},{}", date.format("%Y-%m-%d"), st.id));
                for d in &depths {
                    csv.push_str(&format!(",{}", (chl0 * depth_factor(*d)).max(0.0)));
                }
                csv.push('\n');
            }
            for &processor in &self.processors {
                catalog.push(SceneCatalogEntry {
                    date,
                    tile_id: "30SXG".into(),
                    processor,
                    path: PathBuf::from(path.file_name().expect("file name")),
                    cloud_pct: 0.0,
                    file_bytes: 0,
                    valid_pixel_fraction: None,
                });
            }
            scenes.push(path);
            dates.push(date);
        }
        let upct = dir.join("upct.csv");
        std::fs::write(&upct, csv).map_err(|e| Error::io(&upct, e))?;
        let cat = dir.join("catalog.json");
        std::fs::write(&cat, serde_json::to_string_pretty(&catalog)?).map_err(|e| Error::io(&cat, e))?;
        Ok(SyntheticInputs { catalog: cat, upct, scenes, dates })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{bin_depths, load_buoy_source, DepthBin, Source};

    #[test]
    fn stations_inside_and_law_holds() {
        let w = SyntheticWorld { dates: 2, noise: 1e-9, ..Default::default() };
        let dir = tempfile::tempdir().unwrap();
        let inputs = w.write(dir.path()).unwrap();
        let recs = load_buoy_source(&inputs.upct, Source::Upct).unwrap();
        let t = bin_depths(&recs);
        let stack = w.scene(1).unwrap();
        let (r, c) = buoy_pixel(&stack, "CTD-4").unwrap().unwrap();
        let want = surface_chl(
            stack.value(stack.band_index("rhow_B3").unwrap(), r, c) as f64,
            stack.value(stack.band_index("rhow_B4").unwrap(), r, c) as f64,
        );
        let got = t.get(w.date(1), "CTD-4", DepthBin::D0_1).unwrap();
        assert!((got - want).abs() < 1e-6);
        assert_eq!(t.len(), 2 * 12 * 4);
        assert_eq!(w.scene(0).unwrap(), w.scene(0).unwrap());
    }
}
