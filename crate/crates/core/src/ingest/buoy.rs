use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Monitoring station with its WGS84 position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Station {
    pub id: &'static str,
    pub lat: f64,
    pub lon: f64,
}

/// The twelve CTD buoys in the lagoon.
pub const STATIONS: [Station; 12] = [
    Station { id: "CTD-1", lat: 37.811800, lon: -0.784483 },
    Station { id: "CTD-2", lat: 37.760617, lon: -0.807800 },
    Station { id: "CTD-3", lat: 37.761783, lon: -0.783550 },
    Station { id: "CTD-4", lat: 37.748233, lon: -0.749617 },
    Station { id: "CTD-5", lat: 37.740450, lon: -0.727117 },
    Station { id: "CTD-6", lat: 37.710417, lon: -0.773833 },
    Station { id: "CTD-7", lat: 37.718000, lon: -0.839783 },
    Station { id: "CTD-8", lat: 37.694517, lon: -0.810400 },
    Station { id: "CTD-9", lat: 37.666817, lon: -0.809683 },
    Station { id: "CTD-10", lat: 37.659833, lon: -0.781967 },
    Station { id: "CTD-11", lat: 37.651800, lon: -0.728883 },
    Station { id: "CTD-12", lat: 37.68735, lon: -0.783783 },
];

pub fn station(id: &str) -> Option<&'static Station> {
    STATIONS.iter().find(|s| s.id == id)
}

/// Maps source-specific station labels (`CTD1`, `ctd_01`, `Boya 7`, ...) onto
/// registry identifiers by their station number.
pub fn normalize_buoy_id(raw: &str) -> Result<String> {
    let digits: String = raw
        .chars()
        .rev()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(|c| c.is_ascii_digit())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    let n: u32 = digits
        .parse()
        .map_err(|_| Error::Schema(format!("cannot map station label {raw:?} to a registry buoy")))?;
    let id = format!("CTD-{n}");
    if station(&id).is_none() {
        return Err(Error::Schema(format!("station {raw:?} ({id}) is not in the registry")));
    }
    Ok(id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "UPCT")]
    Upct,
    #[serde(rename = "IMIDA")]
    Imida,
}

impl Source {
    fn date_column(self) -> &'static str {
        match self {
            Source::Upct => "date",
            Source::Imida => "fecha",
        }
    }

    fn buoy_column(self) -> &'static str {
        match self {
            Source::Upct => "buoy",
            Source::Imida => "boya",
        }
    }

    /// Depths (m) a source reports.
    pub fn depths(self) -> Vec<f64> {
        match self {
            Source::Upct => (1..=10).map(|i| i as f64 * 0.5).collect(),
            Source::Imida => (0..=5).map(f64::from).collect(),
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Upct => "UPCT",
            Source::Imida => "IMIDA",
        })
    }
}

/// One chlorophyll reading (mg/m³) at one depth.
#[derive(Debug, Clone, PartialEq)]
pub struct BuoyRecord {
    pub source: Source,
    pub buoy_id: String,
    pub date: NaiveDate,
    pub depth: f64,
    pub chl: f64,
}

/// Target layer of the water column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DepthBin {
    #[serde(rename = "0-1")]
    D0_1,
    #[serde(rename = "1-2")]
    D1_2,
    #[serde(rename = "2-3")]
    D2_3,
    #[serde(rename = "3-4")]
    D3_4,
}

impl DepthBin {
    pub const ALL: [DepthBin; 4] = [DepthBin::D0_1, DepthBin::D1_2, DepthBin::D2_3, DepthBin::D3_4];

    pub fn upper(self) -> u32 {
        self.lower() + 1
    }

    pub fn lower(self) -> u32 {
        match self {
            DepthBin::D0_1 => 0,
            DepthBin::D1_2 => 1,
            DepthBin::D2_3 => 2,
            DepthBin::D3_4 => 3,
        }
    }

    /// `[a, a+1)`, except 4.0 m which closes the last bin. Deeper readings have no bin.
    pub fn from_depth(depth: f64) -> Option<DepthBin> {
        if !(depth >= 0.0) || depth > 4.0 {
            return None;
        }
        Some(match depth {
            d if d < 1.0 => DepthBin::D0_1,
            d if d < 2.0 => DepthBin::D1_2,
            d if d < 3.0 => DepthBin::D2_3,
            _ => DepthBin::D3_4,
        })
    }

    /// `0_1`-style token used in dataset ids and file names.
    pub fn slug(self) -> String {
        format!("{}_{}", self.lower(), self.upper())
    }

    pub fn parse(s: &str) -> Result<DepthBin> {
        let norm = s.trim().replace('_', "-");
        DepthBin::ALL
            .into_iter()
            .find(|b| b.to_string() == norm)
            .ok_or_else(|| Error::Parse(format!("unknown depth bin {s:?}")))
    }
}

impl fmt::Display for DepthBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lower(), self.upper())
    }
}

pub fn parse_date(s: &str) -> Result<NaiveDate> {
    let s = s.trim();
    let day = s.split(['T', ' ']).next().unwrap_or(s);
    NaiveDate::parse_from_str(day, "%Y-%m-%d").map_err(|e| Error::Parse(format!("date {s:?}: {e}")))
}

fn parse_depth_header(h: &str) -> Option<f64> {
    let t = h.trim().trim_end_matches(['m', 'M']).trim();
    t.parse::<f64>().ok()
}

/// Reads one source CSV: a date column, an optional station column and one
/// column per depth. When the station column is absent the file stem names
/// the buoy. Blank and `NaN` cells are skipped.
pub fn load_buoy_source(path: impl AsRef<Path>, source: Source) -> Result<Vec<BuoyRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    parse_buoy_csv(&text, source, stem)
}

pub fn parse_buoy_csv(text: &str, source: Source, fallback_buoy: &str) -> Result<Vec<BuoyRecord>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let valid_depths = source.depths();

    let mut date_col = None;
    let mut buoy_col = None;
    let mut depth_cols = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        let lower = h.to_ascii_lowercase();
        if lower == source.date_column() {
            date_col = Some(i);
        } else if lower == source.buoy_column() {
            buoy_col = Some(i);
        } else if let Some(d) = parse_depth_header(h).filter(|d| valid_depths.iter().any(|v| (v - d).abs() < 1e-9)) {
            depth_cols.push((i, d));
        } else {
            return Err(Error::Schema(format!("unexpected column {h:?} for {source} schema")));
        }
    }
    let date_col = date_col.ok_or_else(|| Error::Schema(format!("{source} CSV lacks a {:?} column", source.date_column())))?;
    let fixed_buoy = match buoy_col {
        Some(_) => None,
        None => Some(normalize_buoy_id(fallback_buoy)?),
    };

    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let date = parse_date(&rec[date_col])?;
        let buoy_id = match (&fixed_buoy, buoy_col) {
            (Some(b), _) => b.clone(),
            (None, Some(c)) => normalize_buoy_id(&rec[c])?,
            (None, None) => unreachable!(),
        };
        for &(col, depth) in &depth_cols {
            let cell = rec[col].trim();
            if cell.is_empty() || cell.eq_ignore_ascii_case("nan") || cell.eq_ignore_ascii_case("na") {
                continue;
            }
            let chl: f64 = cell
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: chlorophyll {cell:?} is not a number", line + 2)))?;
            if !chl.is_finite() || chl < 0.0 {
                return Err(Error::Parse(format!(
                    "row {}: chlorophyll {chl} must be finite and non-negative",
                    line + 2
                )));
            }
            out.push(BuoyRecord {
                source,
                buoy_id: buoy_id.clone(),
                date,
                depth,
                chl,
            });
        }
    }
    Ok(out)
}

pub type DepthKey = (NaiveDate, String, DepthBin);

/// Depth-binned chlorophyll, one value per (date, buoy, bin).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuoyDepthTable {
    rows: BTreeMap<DepthKey, f64>,
}

impl BuoyDepthTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, date: NaiveDate, buoy: impl Into<String>, bin: DepthBin, chl: f64) {
        self.rows.insert((date, buoy.into(), bin), chl);
    }

    pub fn get(&self, date: NaiveDate, buoy: &str, bin: DepthBin) -> Option<f64> {
        self.rows.get(&(date, buoy.to_string(), bin)).copied()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows in (date, buoy, bin) order.
    pub fn iter(&self) -> impl Iterator<Item = (&DepthKey, f64)> {
        self.rows.iter().map(|(k, v)| (k, *v))
    }

    /// Rows of one bin as `(date, buoy, chl)`.
    pub fn for_bin(&self, bin: DepthBin) -> Vec<(NaiveDate, String, f64)> {
        self.rows
            .iter()
            .filter(|((_, _, b), _)| *b == bin)
            .map(|((d, buoy, _), v)| (*d, buoy.clone(), *v))
            .collect()
    }

    /// Writes `Date,Buoy,Chl` rows for one bin.
    pub fn write_bin_csv(&self, bin: DepthBin, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        w.write_record(["Date", "Buoy", "Chl"])?;
        for (date, buoy, chl) in self.for_bin(bin) {
            w.write_record([date.format("%Y-%m-%d").to_string(), buoy, format!("{chl}")])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a `Date,Buoy,Chl` file back as rows of `bin`.
    pub fn read_bin_csv(bin: DepthBin, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["Date", "Buoy", "Chl"] {
            return Err(Error::Schema(format!("{} must have columns Date,Buoy,Chl", path.display())));
        }
        let mut t = BuoyDepthTable::new();
        for rec in rdr.records() {
            let rec = rec?;
            let chl: f64 = rec[2]
                .parse()
                .map_err(|_| Error::Parse(format!("chlorophyll {:?}", &rec[2])))?;
            t.insert(parse_date(&rec[0])?, normalize_buoy_id(&rec[1])?, bin, chl);
        }
        Ok(t)
    }

    pub fn extend(&mut self, other: BuoyDepthTable) {
        self.rows.extend(other.rows);
    }
}

/// Averages raw readings of one source into depth bins.
pub fn bin_depths(records: &[BuoyRecord]) -> BuoyDepthTable {
    let mut acc: BTreeMap<DepthKey, (f64, usize)> = BTreeMap::new();
    for r in records {
        let Some(bin) = DepthBin::from_depth(r.depth) else { continue };
        let e = acc.entry((r.date, r.buoy_id.clone(), bin)).or_insert((0.0, 0));
        e.0 += r.chl;
        e.1 += 1;
    }
    BuoyDepthTable {
        rows: acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect(),
    }
}

/// Union of two sources; keys present in both take the mean.
pub fn merge_sources(a: &BuoyDepthTable, b: &BuoyDepthTable) -> BuoyDepthTable {
    let mut rows = a.rows.clone();
    for (k, v) in &b.rows {
        rows.entry(k.clone())
            .and_modify(|x| *x = (*x + v) / 2.0)
            .or_insert(*v);
    }
    BuoyDepthTable { rows }
}
