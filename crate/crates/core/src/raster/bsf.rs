//! BSF: the pipeline's native band-stack interchange format.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "BSF1"
//! u32 width, u32 height, u32 band_count
//! band_count × (u16 name_len, name_len bytes UTF-8)
//! band_count × height × width f32   (band-sequential, row-major)
//! f64 origin_x, f64 origin_y, f64 pixel_width, f64 pixel_height
//! u16 crs_len, crs_len bytes UTF-8
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::geo::GeoTransform;
use super::stack::{Band, BandStack};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"BSF1";

pub fn write_bsf(stack: &BandStack, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode(stack, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_bsf(path: impl AsRef<Path>) -> Result<BandStack> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    decode(&mut BufReader::new(file))
}

pub fn encode(stack: &BandStack, w: &mut impl Write) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(stack.width() as u32).to_le_bytes())?;
    w.write_all(&(stack.height() as u32).to_le_bytes())?;
    w.write_all(&(stack.bands().len() as u32).to_le_bytes())?;
    for b in stack.bands() {
        write_str(w, &b.name)?;
    }
    for b in stack.bands() {
        for v in &b.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    let t = stack.transform();
    for v in [t.origin_x, t.origin_y, t.pixel_width, t.pixel_height] {
        w.write_all(&v.to_le_bytes())?;
    }
    write_str(w, &t.crs_id)
}

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    let len = u16::try_from(s.len())
        .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "string longer than 65535 bytes"))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(s.as_bytes())
}

pub fn decode(r: &mut impl Read) -> Result<BandStack> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad BSF magic {magic:?}")));
    }
    let width = read_u32(r)? as usize;
    let height = read_u32(r)? as usize;
    let band_count = read_u32(r)? as usize;
    if band_count == 0 {
        return Err(Error::Format("BSF declares zero bands".into()));
    }
    let mut names = Vec::with_capacity(band_count);
    for _ in 0..band_count {
        names.push(read_string(r)?);
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("BSF dimensions overflow".into()))?;
    let mut bands = Vec::with_capacity(band_count);
    let mut buf = vec![0u8; n * 4];
    for name in names {
        read_exact(r, &mut buf)?;
        let data = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        bands.push(Band::new(name, data));
    }
    let mut gt = [0f64; 4];
    for v in gt.iter_mut() {
        let mut b = [0u8; 8];
        read_exact(r, &mut b)?;
        *v = f64::from_le_bytes(b);
    }
    let crs = read_string(r)?;
    let transform = GeoTransform::new(gt[0], gt[1], gt[2], gt[3], crs)
        .map_err(|e| Error::Format(format!("BSF geotransform: {e}")))?;
    BandStack::new(width, height, bands, transform)
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::Format(format!("truncated BSF stream: {e}")))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_string(r: &mut impl Read) -> Result<String> {
    let mut b = [0u8; 2];
    read_exact(r, &mut b)?;
    let mut s = vec![0u8; u16::from_le_bytes(b) as usize];
    read_exact(r, &mut s)?;
    String::from_utf8(s).map_err(|_| Error::Format("BSF string is not UTF-8".into()))
}
