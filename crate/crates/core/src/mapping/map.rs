use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{set_band_indices, FeaturePlan, FeatureTable, ReflectanceSet, RowKey};
use crate::matrix::Matrix;
use crate::models::TrainedModel;
use crate::raster::{write_band_stack, Band, BandStack, GeoTransform, Mask};

/// Where a map came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MapProvenance {
    pub date: Option<NaiveDate>,
    pub depth: String,
    pub dataset_id: String,
    pub model: String,
    pub model_fingerprint: String,
    pub config_hash: Option<String>,
    /// Predictions raised from below zero.
    pub clamped: usize,
    pub predicted: usize,
}

/// Per-pixel chlorophyll in mg/m³, NaN where nothing was predicted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChlMap {
    pub width: usize,
    pub height: usize,
    pub transform: GeoTransform,
    pub values: Vec<f64>,
    pub provenance: MapProvenance,
}

pub const CHL_BAND: &str = "chl";

impl ChlMap {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Single-band `f32` raster of the map.
    pub fn to_band_stack(&self) -> Result<BandStack> {
        let data = self.values.iter().map(|v| *v as f32).collect();
        BandStack::new(self.width, self.height, vec![Band::new(CHL_BAND, data)], self.transform.clone())
    }

    /// BSF or GeoTIFF by extension; samples are stored as `f32`.
    pub fn write_raster(&self, path: impl AsRef<Path>) -> Result<()> {
        write_band_stack(&self.to_band_stack()?, path)
    }

    /// `Row,Col,Chl` for every predicted pixel at full precision.
    pub fn write_predictions_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(out, "Row,Col,Chl").map_err(io)?;
        for (i, v) in self.values.iter().enumerate() {
            if v.is_finite() {
                writeln!(out, "{},{},{v}", i / self.width, i % self.width).map_err(io)?;
            }
        }
        out.flush().map_err(io)
    }

    pub fn write_provenance(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(&self.provenance)?).map_err(|e| Error::io(path, e))
    }
}

/// Reads a predictions CSV back as `(row, col, chl)` triples.
pub fn read_predictions_csv(path: impl AsRef<Path>) -> Result<Vec<(usize, usize, f64)>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingInput(format!("predictions {} do not exist", path.display())));
    }
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// One feature row per set mask pixel, in row-major order, computed with
/// every column of `set`.
pub fn extract_all_pixels(stack: &BandStack, mask: &Mask, set: ReflectanceSet, w: usize) -> Result<FeatureTable> {
    extract_pixels(stack, mask, &FeaturePlan::full(set), w)
}

/// As [`extract_all_pixels`] restricted to the columns of `plan`. Rows whose
/// window holds no valid data keep their NaN features.
pub fn extract_pixels(stack: &BandStack, mask: &Mask, plan: &FeaturePlan, w: usize) -> Result<FeatureTable> {
    if mask.width != stack.width() || mask.height != stack.height() {
        return Err(Error::Contract(format!(
            "mask is {}x{} but the stack is {}x{}",
            mask.width,
            mask.height,
            stack.width(),
            stack.height()
        )));
    }
    let bands = set_band_indices(stack, plan.set())?;
    let pixels: Vec<(usize, usize)> =
        (0..mask.data.len()).filter(|&i| mask.data[i]).map(|i| (i / mask.width, i % mask.width)).collect();
    let rows: Vec<Vec<f64>> =
        pixels.par_iter().map(|&p| plan.features_at(stack, &bands, p, w)).collect::<Result<_>>()?;
    let n_cols = plan.columns().len();
    let values = Matrix::new(pixels.len(), n_cols, rows.into_iter().flatten().collect())?;
    let keys = pixels.into_iter().map(|(row, col)| RowKey::Pixel { row, col }).collect();
    FeatureTable::new(format!("{}_{w}x{w}_pixels", plan.set()), plan.columns().to_vec(), keys, values, None)
}

/// Applies `model` to every row of `table` and places the result at its
/// pixel on a `width`×`height` grid. Rows with non-finite features stay NaN;
/// negative predictions are clamped to zero.
pub fn predict_map(model: &TrainedModel, table: &FeatureTable, width: usize, height: usize, transform: &GeoTransform) -> Result<ChlMap> {
    let idx = model.align(table.columns())?;
    let x = table.values().select_cols(&idx);
    let preds: Vec<f64> = (0..x.nrows())
        .into_par_iter()
        .map(|r| {
            let row = x.row(r);
            if row.iter().all(|v| v.is_finite()) {
                model.predict_row(row)
            } else {
                f64::NAN
            }
        })
        .collect();
    let mut values = vec![f64::NAN; width * height];
    let mut clamped = 0;
    let mut predicted = 0;
    for (key, p) in table.keys().iter().zip(preds) {
        let RowKey::Pixel { row, col } = *key else {
            return Err(Error::Contract("map prediction needs pixel-keyed rows".into()));
        };
        if row >= height || col >= width {
            return Err(Error::Contract(format!("pixel ({row}, {col}) outside {width}x{height} grid")));
        }
        if p.is_nan() {
            continue;
        }
        predicted += 1;
        values[row * width + col] = if p < 0.0 {
            clamped += 1;
            0.0
        } else {
            p
        };
    }
    if clamped > 0 {
        log::info!("clamped {clamped} negative predictions to 0");
    }
    Ok(ChlMap {
        width,
        height,
        transform: transform.clone(),
        values,
        provenance: MapProvenance {
            model: model.spec.label.clone(),
            model_fingerprint: model.fingerprint()?,
            clamped,
            predicted,
            ..Default::default()
        },
    })
}
