use std::collections::BTreeMap;

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::{station, BuoyDepthTable, DepthBin};
use crate::matrix::Matrix;
use crate::raster::BandStack;

use super::extract::{set_band_indices, FeaturePlan};
use super::sets::ReflectanceSet;
use super::table::{dataset_id, FeatureTable, RowKey};

/// Grid cell containing a buoy, or `None` if it falls outside the raster.
pub fn buoy_pixel(stack: &BandStack, buoy: &str) -> Result<Option<(usize, usize)>> {
    let st = station(buoy).ok_or_else(|| Error::Contract(format!("no station position for buoy {buoy}")))?;
    let t = stack.transform();
    let (x, y) = t.lonlat_to_crs(st.lon, st.lat)?;
    let (r, c) = t.geo_to_pixel(x, y);
    Ok(stack.contains(r, c).then_some((r as usize, c as usize)))
}

/// Joins buoy samples of one depth bin with same-day scenes and computes every
/// feature of `set` from `w`×`w` window means at each buoy.
pub fn build_dataset(
    buoys: &BuoyDepthTable,
    scenes: &[(NaiveDate, &BandStack)],
    set: ReflectanceSet,
    w: usize,
    bin: DepthBin,
) -> Result<FeatureTable> {
    build_dataset_with(buoys, scenes, &FeaturePlan::full(set), w, bin)
}

/// As [`build_dataset`] with a caller-supplied (possibly cached) plan.
pub fn build_dataset_with(
    buoys: &BuoyDepthTable,
    scenes: &[(NaiveDate, &BandStack)],
    plan: &FeaturePlan,
    w: usize,
    bin: DepthBin,
) -> Result<FeatureTable> {
    let set = plan.set();
    let mut by_date: BTreeMap<NaiveDate, &BandStack> = BTreeMap::new();
    for (d, s) in scenes {
        if by_date.insert(*d, s).is_some() {
            return Err(Error::Integrity(format!("two {set} scenes on {d}")));
        }
    }
    let samples: Vec<_> = buoys
        .for_bin(bin)
        .into_iter()
        .filter(|(d, _, _)| by_date.contains_key(d))
        .collect();
    let id = dataset_id(set, w, bin);
    if samples.is_empty() {
        log::warn!("{id}: no buoy sample shares a date with any scene");
    }
    let rows: Vec<Option<(RowKey, Vec<f64>, f64)>> = samples
        .par_iter()
        .map(|(date, buoy, chl)| {
            let stack = by_date[date];
            let Some(px) = buoy_pixel(stack, buoy)? else {
                log::warn!("{id}: buoy {buoy} lies outside the {date} scene");
                return Ok(None);
            };
            let bands = set_band_indices(stack, set)?;
            let feats = plan.features_at(stack, &bands, px, w)?;
            let key = RowKey::Sample { date: *date, buoy: buoy.clone() };
            Ok(Some((key, feats, *chl)))
        })
        .collect::<Result<_>>()?;
    let mut dropped = 0;
    let (mut keys, mut data, mut target) = (Vec::new(), Vec::new(), Vec::new());
    for row in rows {
        match row {
            Some((k, f, chl)) if chl.is_finite() && f.iter().all(|v| v.is_finite()) => {
                keys.push(k);
                data.extend(f);
                target.push(chl);
            }
            _ => dropped += 1,
        }
    }
    if dropped > 0 {
        log::info!("{id}: dropped {dropped} rows with missing values");
    }
    let values = Matrix::new(keys.len(), plan.columns().len(), data)?;
    let mut table = FeatureTable::new(id, plan.columns().to_vec(), keys, values, Some(target))?;
    table.dropped_rows = dropped;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::indices::is_index_column;
    use crate::ingest::{Processor, STATIONS};
    use crate::raster::{canonical_band_names, Band, GeoTransform};

    const DATE: (i32, u32, u32) = (2021, 6, 1);

    fn date(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(DATE.0, DATE.1, day).unwrap()
    }

    // Lagoon-covering geographic grid with per-band values from `f(band, row, col)`.
    fn scene(f: impl Fn(usize, usize, usize) -> f32) -> BandStack {
        let (w, h) = (40, 40);
        let t = GeoTransform::new(-0.867, 37.82, 0.005, -0.005, "EPSG:4326").unwrap();
        let bands = canonical_band_names()
            .into_iter()
            .enumerate()
            .map(|(b, n)| Band::new(n, (0..w * h).map(|i| f(b, i / w, i % w)).collect()))
            .collect();
        BandStack::new(w, h, bands, t).unwrap()
    }

    fn buoys(days: &[u32]) -> BuoyDepthTable {
        let mut t = BuoyDepthTable::new();
        for &d in days {
            for (i, s) in STATIONS.iter().enumerate() {
                t.insert(date(d), s.id, DepthBin::D0_1, 1.0 + i as f64);
                t.insert(date(d), s.id, DepthBin::D1_2, 0.5);
            }
        }
        t
    }

    #[test]
    fn one_scene_twelve_buoys() {
        let s = scene(|b, r, c| 0.01 + 0.001 * b as f32 + 0.0001 * (r + c) as f32);
        let set = ReflectanceSet::Rhown(Processor::C2x);
        let t = build_dataset(&buoys(&[1]), &[(date(1), &s)], set, 3, DepthBin::D0_1).unwrap();
        assert_eq!(t.n_rows(), 12);
        assert_eq!(t.dropped_rows, 0);
        assert_eq!(t.dataset_id, "C2X_rhown_3x3_depth_in_0_1");
        assert_eq!(t.n_cols(), 6 + 785);
        assert_eq!(t.target().unwrap().len(), 12);
    }

    #[test]
    fn buoy_date_without_scene_is_absent() {
        let s = scene(|_, _, _| 0.02);
        let t = build_dataset(&buoys(&[1, 2]), &[(date(2), &s)], ReflectanceSet::Toa, 1, DepthBin::D0_1).unwrap();
        assert_eq!(t.n_rows(), 12);
        assert!(t.keys().iter().all(|k| matches!(k, RowKey::Sample { date: d, .. } if *d == date(2))));
        let none = build_dataset(&buoys(&[1]), &[(date(3), &s)], ReflectanceSet::Toa, 1, DepthBin::D0_1).unwrap();
        assert_eq!(none.n_rows(), 0);
    }

    #[test]
    fn constant_scene_gives_zero_nd() {
        let s = scene(|_, _, _| 0.03);
        let set = ReflectanceSet::Rhow(Processor::C2xComplex);
        let t = build_dataset(&buoys(&[1]), &[(date(1), &s)], set, 5, DepthBin::D0_1).unwrap();
        assert_eq!(t.n_rows(), 12);
        for (i, c) in t.columns().iter().enumerate() {
            if c.starts_with("ND(") {
                assert!(t.values().column(i).iter().all(|v| *v == 0.0), "{c}");
            }
        }
    }

    #[test]
    fn nan_rows_dropped_and_counted() {
        // The 1x1 pixel of CTD-1 is NaN in every band.
        let probe = scene(|_, _, _| 0.0);
        let (r1, c1) = buoy_pixel(&probe, "CTD-1").unwrap().unwrap();
        let s = scene(move |_, r, c| if (r, c) == (r1, c1) { f32::NAN } else { 0.05 });
        let t = build_dataset(&buoys(&[1]), &[(date(1), &s)], ReflectanceSet::Toa, 1, DepthBin::D0_1).unwrap();
        assert_eq!((t.n_rows(), t.dropped_rows), (11, 1));
        // With a wider window the neighbours fill in.
        let t = build_dataset(&buoys(&[1]), &[(date(1), &s)], ReflectanceSet::Toa, 3, DepthBin::D0_1).unwrap();
        assert_eq!(t.n_rows(), 12);
    }

    #[test]
    fn scene_order_does_not_matter() {
        let a = scene(|b, r, c| 0.01 + 0.002 * b as f32 + 0.0003 * r as f32 + 0.0001 * c as f32);
        let b = scene(|b, r, c| 0.02 + 0.001 * b as f32 + 0.0002 * (r * c % 7) as f32);
        let set = ReflectanceSet::Rhown(Processor::C2rcc);
        let t1 = build_dataset(&buoys(&[1, 2]), &[(date(1), &a), (date(2), &b)], set, 3, DepthBin::D0_1).unwrap();
        let t2 = build_dataset(&buoys(&[2, 1]), &[(date(2), &b), (date(1), &a)], set, 3, DepthBin::D0_1).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(t1.n_rows(), 24);
        assert!(t1.keys().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn duplicate_scene_dates_rejected() {
        let s = scene(|_, _, _| 0.02);
        let r = build_dataset(&buoys(&[1]), &[(date(1), &s), (date(1), &s)], ReflectanceSet::Toa, 1, DepthBin::D0_1);
        assert!(matches!(r, Err(Error::Integrity(_))));
    }

    #[test]
    fn features_equal_manual_window_plus_index() {
        let s = scene(|b, r, c| 0.01 + 0.001 * b as f32 + 0.0007 * r as f32 + 0.0003 * c as f32);
        let set = ReflectanceSet::Rhow(Processor::C2x);
        let t = build_dataset(&buoys(&[1]), &[(date(1), &s)], set, 3, DepthBin::D0_1).unwrap();
        let (r, c) = buoy_pixel(&s, "CTD-5").unwrap().unwrap();
        let row = t
            .keys()
            .iter()
            .position(|k| matches!(k, RowKey::Sample { buoy, .. } if buoy == "CTD-5"))
            .unwrap();
        let mean = |name: &str| {
            let b = s.band_index(name).unwrap();
            let mut acc = 0.0;
            for rr in r - 1..=r + 1 {
                for cc in c - 1..=c + 1 {
                    acc += s.value(b, rr, cc) as f64;
                }
            }
            acc / 9.0
        };
        let (b3, b4) = (mean("rhow_B3"), mean("rhow_B4"));
        let col = t.column_index("ND(rhow_B3,rhow_B4)").unwrap();
        assert!((t.values().get(row, col) - (b3 - b4) / (b3 + b4)).abs() < 1e-12);
        assert!(t.columns().iter().take(9).all(|c| !is_index_column(c)));
    }
}
