use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ingest::Processor;
use crate::raster::{central_wavelength, RHOWN_BANDS, RHOW_BANDS, TOA_BANDS};

/// Which group of bands a dataset draws from, and from which processor's scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ReflectanceSet {
    Toa,
    Rhow(Processor),
    Rhown(Processor),
}

impl ReflectanceSet {
    /// The seven sets: TOA plus rhow/rhown from each processor.
    pub fn all() -> Vec<ReflectanceSet> {
        let mut v = vec![ReflectanceSet::Toa];
        for p in Processor::ALL {
            v.push(ReflectanceSet::Rhow(p));
            v.push(ReflectanceSet::Rhown(p));
        }
        v
    }

    /// Processor whose scene supplies the bands. TOA bands are identical across
    /// processors and are read from the C2RCC scene.
    pub fn processor(self) -> Processor {
        match self {
            ReflectanceSet::Toa => Processor::C2rcc,
            ReflectanceSet::Rhow(p) | ReflectanceSet::Rhown(p) => p,
        }
    }

    /// Processing method used when ranking datasets (`TOA` is its own method).
    pub fn method(self) -> &'static str {
        match self {
            ReflectanceSet::Toa => "TOA",
            ReflectanceSet::Rhow(p) | ReflectanceSet::Rhown(p) => p.name(),
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            ReflectanceSet::Toa => "TOA",
            ReflectanceSet::Rhow(_) => "rhow",
            ReflectanceSet::Rhown(_) => "rhown",
        }
    }

    fn suffixes(self) -> &'static [&'static str] {
        match self {
            ReflectanceSet::Toa => &TOA_BANDS,
            ReflectanceSet::Rhow(_) => &RHOW_BANDS,
            ReflectanceSet::Rhown(_) => &RHOWN_BANDS,
        }
    }

    /// Stack band names in increasing wavelength order.
    pub fn band_names(self) -> Vec<String> {
        self.suffixes().iter().map(|s| format!("{}_{s}", self.prefix())).collect()
    }

    pub fn wavelengths(self) -> Vec<f64> {
        self.suffixes()
            .iter()
            .map(|s| central_wavelength(s).expect("registered band"))
            .collect()
    }

    pub fn len(self) -> usize {
        self.suffixes().len()
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("TOA") {
            return Ok(ReflectanceSet::Toa);
        }
        let (proc_part, kind) = s
            .rsplit_once('_')
            .ok_or_else(|| Error::Parse(format!("unknown reflectance set {s:?}")))?;
        let p = match proc_part {
            "C2RCC" => Processor::C2rcc,
            "C2X" => Processor::C2x,
            "C2X-Complex" | "C2XC" => Processor::C2xComplex,
            _ => return Err(Error::Parse(format!("unknown processor in {s:?}"))),
        };
        match kind {
            "rhow" => Ok(ReflectanceSet::Rhow(p)),
            "rhown" => Ok(ReflectanceSet::Rhown(p)),
            _ => Err(Error::Parse(format!("unknown reflectance kind in {s:?}"))),
        }
    }
}

impl fmt::Display for ReflectanceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReflectanceSet::Toa => f.write_str("TOA"),
            ReflectanceSet::Rhow(p) => write!(f, "{p}_rhow"),
            ReflectanceSet::Rhown(p) => write!(f, "{p}_rhown"),
        }
    }
}

impl Serialize for ReflectanceSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ReflectanceSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        ReflectanceSet::parse(&s).map_err(serde::de::Error::custom)
    }
}
