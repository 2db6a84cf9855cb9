use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::raster::BandStack;

use super::indices::{all_indices, is_index_column, IndexFamily, SpectralIndex};
use super::sets::ReflectanceSet;

/// Per-band mean over the `w`×`w` window centred on `center`, clipped to the
/// grid and ignoring NaN. A band with no valid pixel in the window gives NaN.
pub fn window_mean(stack: &BandStack, center: (usize, usize), w: usize, bands: &[usize]) -> Result<Vec<f64>> {
    let (row, col) = center;
    if row >= stack.height() || col >= stack.width() {
        return Err(Error::Domain(format!(
            "window centre ({row}, {col}) outside {}x{} grid",
            stack.height(),
            stack.width()
        )));
    }
    if w == 0 || w % 2 == 0 {
        return Err(Error::Domain(format!("window size must be odd, got {w}")));
    }
    let h = w / 2;
    let (r0, r1) = (row.saturating_sub(h), (row + h).min(stack.height() - 1));
    let (c0, c1) = (col.saturating_sub(h), (col + h).min(stack.width() - 1));
    let width = stack.width();
    Ok(bands
        .iter()
        .map(|&b| {
            let data = &stack.band_at(b).data;
            let (mut sum, mut n) = (0.0f64, 0usize);
            for r in r0..=r1 {
                for &v in &data[r * width + c0..=r * width + c1] {
                    if !v.is_nan() {
                        sum += v as f64;
                        n += 1;
                    }
                }
            }
            if n == 0 {
                f64::NAN
            } else {
                sum / n as f64
            }
        })
        .collect())
}

/// Stack positions of the set's bands.
pub fn set_band_indices(stack: &BandStack, set: ReflectanceSet) -> Result<Vec<usize>> {
    set.band_names()
        .iter()
        .map(|n| {
            stack
                .band_index(n)
                .ok_or_else(|| Error::Contract(format!("scene lacks band {n} needed by {set}")))
        })
        .collect()
}

#[derive(Debug, Clone)]
enum Op {
    Raw(usize),
    Index(IndexFamily, [usize; 4]),
}

/// A resolved list of feature columns over one reflectance set. Training and
/// inference both compute features through this type, so a column has the same
/// value whichever subset of columns is requested.
#[derive(Debug, Clone)]
pub struct FeaturePlan {
    set: ReflectanceSet,
    columns: Vec<String>,
    ops: Vec<Op>,
}

impl FeaturePlan {
    /// Raw bands followed by every index of every family.
    pub fn full(set: ReflectanceSet) -> Self {
        let names = set.band_names();
        let mut columns = names.clone();
        columns.extend(all_indices(set).iter().map(SpectralIndex::canonical_name));
        Self::for_columns(set, &columns).expect("canonical columns resolve")
    }

    /// Plan for an explicit column list (raw band names or index names).
    pub fn for_columns(set: ReflectanceSet, columns: &[String]) -> Result<Self> {
        let names = set.band_names();
        let pos: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let lookup = |n: &str| {
            pos.get(n)
                .copied()
                .ok_or_else(|| Error::Contract(format!("feature references band {n} outside {set}")))
        };
        let mut ops = Vec::with_capacity(columns.len());
        for c in columns {
            if is_index_column(c) {
                let ix = SpectralIndex::parse(c)?;
                let mut p = [0usize; 4];
                for (slot, b) in p.iter_mut().zip(&ix.band_refs) {
                    *slot = lookup(b)?;
                }
                ops.push(Op::Index(ix.family, p));
            } else {
                ops.push(Op::Raw(lookup(c)?));
            }
        }
        Ok(Self { set, columns: columns.to_vec(), ops })
    }

    pub fn set(&self) -> ReflectanceSet {
        self.set
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    /// Feature values from per-band means given in set order.
    pub fn eval_means(&self, means: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let mut buf = [0.0; 4];
        for op in &self.ops {
            out.push(match op {
                Op::Raw(i) => means[*i],
                Op::Index(f, p) => {
                    let k = f.arity();
                    for (slot, &i) in buf.iter_mut().zip(&p[..k]) {
                        *slot = means[i];
                    }
                    f.apply(&buf[..k])
                }
            });
        }
    }

    /// Window means at `center` followed by feature evaluation.
    pub fn features_at(&self, stack: &BandStack, bands: &[usize], center: (usize, usize), w: usize) -> Result<Vec<f64>> {
        let means = window_mean(stack, center, w, bands)?;
        let mut out = Vec::with_capacity(self.ops.len());
        self.eval_means(&means, &mut out);
        Ok(out)
    }
}
