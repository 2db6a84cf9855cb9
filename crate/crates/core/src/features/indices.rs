use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

use super::sets::ReflectanceSet;

const DEN_EPS: f64 = 1e-12;

/// Band-combination families, in canonical feature order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IndexFamily {
    /// (R1 − R2)/(R1 + R2)
    Nd,
    /// (1/R1 − 1/R2)·R3
    DallGitelson,
    /// (R1 − R2)/(R3 + R4)
    Nd4,
    /// 1/R1 − 1/R2
    InvDiff,
    /// R1/R2 − R3/R4
    RatioDiff,
    /// (R1 + R3)/(R1 + R2) over increasing wavelengths
    ThreeBandSum,
}

impl IndexFamily {
    pub const ALL: [IndexFamily; 6] = [
        IndexFamily::Nd,
        IndexFamily::DallGitelson,
        IndexFamily::Nd4,
        IndexFamily::InvDiff,
        IndexFamily::RatioDiff,
        IndexFamily::ThreeBandSum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IndexFamily::Nd => "ND",
            IndexFamily::DallGitelson => "DallGitelson",
            IndexFamily::Nd4 => "ND4",
            IndexFamily::InvDiff => "InvDiff",
            IndexFamily::RatioDiff => "RatioDiff",
            IndexFamily::ThreeBandSum => "ThreeBandSum",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            IndexFamily::Nd | IndexFamily::InvDiff => 2,
            IndexFamily::DallGitelson | IndexFamily::ThreeBandSum => 3,
            IndexFamily::Nd4 | IndexFamily::RatioDiff => 4,
        }
    }

    /// Fewest distinct bands that yield at least one index.
    pub fn min_bands(self) -> usize {
        match self {
            IndexFamily::DallGitelson | IndexFamily::ThreeBandSum => 3,
            _ => 2,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        IndexFamily::ALL.into_iter().find(|f| f.name() == s)
    }

    /// Applies the formula to values given in `band_refs` order.
    pub fn apply(self, r: &[f64]) -> f64 {
        if r.len() != self.arity() || r.iter().any(|v| !v.is_finite()) {
            return f64::NAN;
        }
        let div = |n: f64, d: f64| if d.abs() < DEN_EPS { f64::NAN } else { n / d };
        let recip = |v: f64| if v <= 0.0 || v < DEN_EPS { f64::NAN } else { 1.0 / v };
        match self {
            IndexFamily::Nd => div(r[0] - r[1], r[0] + r[1]),
            IndexFamily::DallGitelson => (recip(r[0]) - recip(r[1])) * r[2],
            IndexFamily::Nd4 => div(r[0] - r[1], r[2] + r[3]),
            IndexFamily::InvDiff => recip(r[0]) - recip(r[1]),
            IndexFamily::RatioDiff => div(r[0], r[1]) - div(r[2], r[3]),
            IndexFamily::ThreeBandSum => div(r[0] + r[2], r[0] + r[1]),
        }
    }

    /// Closed-form number of indices over `n` bands.
    pub fn count(self, n: usize) -> usize {
        let pairs = n * n.saturating_sub(1) / 2;
        match self {
            IndexFamily::Nd | IndexFamily::InvDiff => pairs,
            IndexFamily::DallGitelson => pairs * n.saturating_sub(2),
            IndexFamily::Nd4 => {
                if n < 2 {
                    0
                } else {
                    pairs * (pairs + n - 1)
                }
            }
            IndexFamily::RatioDiff => {
                let ordered = n * n.saturating_sub(1);
                ordered * ordered.saturating_sub(1) / 2 - pairs * n.saturating_sub(2)
            }
            IndexFamily::ThreeBandSum => {
                if n < 3 {
                    0
                } else {
                    n * (n - 1) * (n - 2) / 6
                }
            }
        }
    }
}

impl fmt::Display for IndexFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One band-combination feature. Its column name is `FAMILY(band,band,...)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpectralIndex {
    pub family: IndexFamily,
    pub band_refs: Vec<String>,
}

impl SpectralIndex {
    pub fn new(family: IndexFamily, band_refs: Vec<String>) -> Result<Self> {
        if band_refs.len() != family.arity() {
            return Err(Error::Domain(format!(
                "{family} takes {} bands, got {}",
                family.arity(),
                band_refs.len()
            )));
        }
        Ok(Self { family, band_refs })
    }

    pub fn canonical_name(&self) -> String {
        format!("{}({})", self.family, self.band_refs.join(","))
    }

    /// Inverse of [`canonical_name`](Self::canonical_name).
    pub fn parse(name: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("not an index column: {name:?}"));
        let (fam, rest) = name.split_once('(').ok_or_else(bad)?;
        let inner = rest.strip_suffix(')').ok_or_else(bad)?;
        let family = IndexFamily::parse(fam).ok_or_else(bad)?;
        let refs: Vec<String> = inner.split(',').map(|s| s.trim().to_string()).collect();
        if refs.iter().any(|r| r.is_empty()) {
            return Err(bad());
        }
        SpectralIndex::new(family, refs).map_err(|_| bad())
    }

    /// Evaluates against named band values; a missing band yields NaN.
    pub fn eval(&self, reflectances: &HashMap<String, f64>) -> f64 {
        let mut vals = [0.0; 4];
        for (slot, name) in vals.iter_mut().zip(&self.band_refs) {
            match reflectances.get(name) {
                Some(v) => *slot = *v,
                None => return f64::NAN,
            }
        }
        self.family.apply(&vals[..self.band_refs.len()])
    }
}

impl fmt::Display for SpectralIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_name())
    }
}

/// True when a column name denotes an index rather than a raw band.
pub fn is_index_column(name: &str) -> bool {
    name.contains('(')
}

pub fn eval_index(ix: &SpectralIndex, reflectances: &HashMap<String, f64>) -> f64 {
    ix.eval(reflectances)
}

/// Positions (into the set's band list) of every index of `family`, in canonical order.
pub fn enumerate_positions(family: IndexFamily, n: usize) -> Result<Vec<Vec<usize>>> {
    if n < family.min_bands() {
        return Err(Error::Domain(format!(
            "{family} needs at least {} bands, set has {n}",
            family.min_bands()
        )));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut out = Vec::with_capacity(family.count(n));
    match family {
        IndexFamily::Nd | IndexFamily::InvDiff => {
            out.extend(pairs.iter().map(|&(i, j)| vec![i, j]));
        }
        IndexFamily::DallGitelson => {
            for &(i, j) in &pairs {
                out.extend((0..n).filter(|&k| k != i && k != j).map(|k| vec![i, j, k]));
            }
        }
        IndexFamily::Nd4 => {
            for &(i, j) in &pairs {
                for k in 0..n {
                    for l in k..n {
                        if (k, l) != (i, j) {
                            out.push(vec![i, j, k, l]);
                        }
                    }
                }
            }
        }
        IndexFamily::RatioDiff => {
            let ordered: Vec<(usize, usize)> =
                (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
            // A shared numerator factors into a DallGitelson index.
            for (p, &(i, j)) in ordered.iter().enumerate() {
                out.extend(ordered[p + 1..].iter().filter(|&&(k, _)| k != i).map(|&(k, l)| vec![i, j, k, l]));
            }
        }
        IndexFamily::ThreeBandSum => {
            for &(i, j) in &pairs {
                out.extend((j + 1..n).map(|k| vec![i, j, k]));
            }
        }
    }
    Ok(out)
}

pub fn enumerate_indices(family: IndexFamily, set: ReflectanceSet) -> Result<Vec<SpectralIndex>> {
    let names = set.band_names();
    enumerate_for_bands(family, &names)
}

/// Enumerates over an arbitrary band list assumed to be in increasing wavelength order.
pub fn enumerate_for_bands(family: IndexFamily, bands: &[String]) -> Result<Vec<SpectralIndex>> {
    Ok(enumerate_positions(family, bands.len())?
        .into_iter()
        .map(|pos| SpectralIndex {
            family,
            band_refs: pos.into_iter().map(|p| bands[p].clone()).collect(),
        })
        .collect())
}

/// Every index of every family over `set`, in canonical order.
pub fn all_indices(set: ReflectanceSet) -> Vec<SpectralIndex> {
    let names = set.band_names();
    IndexFamily::ALL
        .into_iter()
        .flat_map(|f| enumerate_for_bands(f, &names).expect("sets have at least six bands"))
        .collect()
}
