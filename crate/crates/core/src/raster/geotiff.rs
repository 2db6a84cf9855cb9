//! Minimal GeoTIFF support: 32-bit float samples, uncompressed or deflate,
//! stripped or tiled, chunky or planar, either byte order. Only the first IFD
//! is read. Georeferencing comes from the ModelPixelScale/ModelTiepoint pair
//! (or a north-up ModelTransformation) and the EPSG code in the GeoKey
//! directory. Band names are taken from GDAL `DESCRIPTION` metadata items.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::ZlibDecoder;
use flate2::write::ZlibEncoder;

use super::geo::{Crs, GeoTransform};
use super::stack::{canonical_band_names, Band, BandStack};
use crate::error::{Error, Result};

const TAG_IMAGE_WIDTH: u16 = 256;
const TAG_IMAGE_LENGTH: u16 = 257;
const TAG_BITS_PER_SAMPLE: u16 = 258;
const TAG_COMPRESSION: u16 = 259;
const TAG_PHOTOMETRIC: u16 = 262;
const TAG_STRIP_OFFSETS: u16 = 273;
const TAG_SAMPLES_PER_PIXEL: u16 = 277;
const TAG_ROWS_PER_STRIP: u16 = 278;
const TAG_STRIP_BYTE_COUNTS: u16 = 279;
const TAG_PLANAR_CONFIG: u16 = 284;
const TAG_PREDICTOR: u16 = 317;
const TAG_TILE_WIDTH: u16 = 322;
const TAG_TILE_LENGTH: u16 = 323;
const TAG_TILE_OFFSETS: u16 = 324;
const TAG_TILE_BYTE_COUNTS: u16 = 325;
const TAG_SAMPLE_FORMAT: u16 = 339;
const TAG_MODEL_PIXEL_SCALE: u16 = 33550;
const TAG_MODEL_TIEPOINT: u16 = 33922;
const TAG_MODEL_TRANSFORMATION: u16 = 34264;
const TAG_GEO_KEY_DIRECTORY: u16 = 34735;
const TAG_GDAL_METADATA: u16 = 42112;
const TAG_GDAL_NODATA: u16 = 42113;

const KEY_MODEL_TYPE: u16 = 1024;
const KEY_RASTER_TYPE: u16 = 1025;
const KEY_GEOGRAPHIC_TYPE: u16 = 2048;
const KEY_PROJECTED_CS_TYPE: u16 = 3072;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteOrder {
    Little,
    Big,
}

impl ByteOrder {
    fn u16(self, b: &[u8]) -> u16 {
        let a = [b[0], b[1]];
        match self {
            ByteOrder::Little => u16::from_le_bytes(a),
            ByteOrder::Big => u16::from_be_bytes(a),
        }
    }

    fn u32(self, b: &[u8]) -> u32 {
        let a = [b[0], b[1], b[2], b[3]];
        match self {
            ByteOrder::Little => u32::from_le_bytes(a),
            ByteOrder::Big => u32::from_be_bytes(a),
        }
    }

    fn f64(self, b: &[u8]) -> f64 {
        let mut a = [0u8; 8];
        a.copy_from_slice(&b[..8]);
        match self {
            ByteOrder::Little => f64::from_le_bytes(a),
            ByteOrder::Big => f64::from_be_bytes(a),
        }
    }

    fn f32(self, b: &[u8]) -> f32 {
        f32::from_bits(self.u32(b))
    }

    fn put_u16(self, out: &mut Vec<u8>, v: u16) {
        match self {
            ByteOrder::Little => out.extend_from_slice(&v.to_le_bytes()),
            ByteOrder::Big => out.extend_from_slice(&v.to_be_bytes()),
        }
    }

    fn put_u32(self, out: &mut Vec<u8>, v: u32) {
        match self {
            ByteOrder::Little => out.extend_from_slice(&v.to_le_bytes()),
            ByteOrder::Big => out.extend_from_slice(&v.to_be_bytes()),
        }
    }

    fn put_f64(self, out: &mut Vec<u8>, v: f64) {
        match self {
            ByteOrder::Little => out.extend_from_slice(&v.to_le_bytes()),
            ByteOrder::Big => out.extend_from_slice(&v.to_be_bytes()),
        }
    }

    fn put_f32(self, out: &mut Vec<u8>, v: f32) {
        self.put_u32(out, v.to_bits())
    }
}

/// A decoded IFD entry, with its values widened.
#[derive(Debug, Clone)]
enum Value {
    Ints(Vec<u64>),
    Doubles(Vec<f64>),
    Ascii(String),
}

impl Value {
    fn ints(&self) -> Option<&[u64]> {
        match self {
            Value::Ints(v) => Some(v),
            _ => None,
        }
    }

    fn doubles(&self) -> Option<Vec<f64>> {
        match self {
            Value::Doubles(v) => Some(v.clone()),
            Value::Ints(v) => Some(v.iter().map(|&x| x as f64).collect()),
            Value::Ascii(_) => None,
        }
    }
}

struct Ifd {
    order: ByteOrder,
    tags: BTreeMap<u16, Value>,
}

impl Ifd {
    fn int(&self, tag: u16) -> Option<u64> {
        self.tags.get(&tag)?.ints()?.first().copied()
    }

    fn required_int(&self, tag: u16, what: &str) -> Result<u64> {
        self.int(tag)
            .ok_or_else(|| Error::Format(format!("GeoTIFF missing {what} tag ({tag})")))
    }

    fn ints(&self, tag: u16) -> Option<&[u64]> {
        self.tags.get(&tag)?.ints()
    }

    fn ascii(&self, tag: u16) -> Option<&str> {
        match self.tags.get(&tag)? {
            Value::Ascii(s) => Some(s.as_str()),
            _ => None,
        }
    }
}

fn slice<'a>(buf: &'a [u8], offset: usize, len: usize) -> Result<&'a [u8]> {
    buf.get(offset..offset.checked_add(len).unwrap_or(usize::MAX))
        .ok_or_else(|| Error::Format(format!("GeoTIFF offset {offset}+{len} beyond end of file")))
}

fn parse_ifd(buf: &[u8]) -> Result<Ifd> {
    let head = slice(buf, 0, 8)?;
    let order = match &head[..4] {
        b"II*\0" => ByteOrder::Little,
        b"MM\0*" => ByteOrder::Big,
        b"II+\0" | b"MM\0+" => return Err(Error::Format("BigTIFF is not supported".into())),
        _ => return Err(Error::Format("not a TIFF file".into())),
    };
    let ifd_off = order.u32(&head[4..8]) as usize;
    let count = order.u16(slice(buf, ifd_off, 2)?) as usize;
    let mut tags = BTreeMap::new();
    for i in 0..count {
        let e = slice(buf, ifd_off + 2 + i * 12, 12)?;
        let tag = order.u16(&e[0..2]);
        let ty = order.u16(&e[2..4]);
        let n = order.u32(&e[4..8]) as usize;
        let size = match ty {
            1 | 2 | 6 | 7 => 1,
            3 | 8 => 2,
            4 | 9 | 11 => 4,
            5 | 10 | 12 => 8,
            _ => continue,
        };
        let total = size * n;
        let data = if total <= 4 {
            &e[8..8 + total]
        } else {
            slice(buf, order.u32(&e[8..12]) as usize, total)?
        };
        let value = match ty {
            1 | 7 => Value::Ints(data.iter().map(|&b| b as u64).collect()),
            2 => Value::Ascii(
                String::from_utf8_lossy(data)
                    .trim_end_matches('\0')
                    .to_string(),
            ),
            3 => Value::Ints(data.chunks_exact(2).map(|c| order.u16(c) as u64).collect()),
            4 => Value::Ints(data.chunks_exact(4).map(|c| order.u32(c) as u64).collect()),
            5 => Value::Doubles(
                data.chunks_exact(8)
                    .map(|c| order.u32(&c[0..4]) as f64 / order.u32(&c[4..8]) as f64)
                    .collect(),
            ),
            11 => Value::Doubles(data.chunks_exact(4).map(|c| order.f32(c) as f64).collect()),
            12 => Value::Doubles(data.chunks_exact(8).map(|c| order.f64(c)).collect()),
            _ => continue,
        };
        tags.insert(tag, value);
    }
    Ok(Ifd { order, tags })
}

pub fn read_geotiff(path: impl AsRef<Path>) -> Result<BandStack> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_geotiff(&buf)
}

pub fn decode_geotiff(buf: &[u8]) -> Result<BandStack> {
    let ifd = parse_ifd(buf)?;
    let order = ifd.order;
    let width = ifd.required_int(TAG_IMAGE_WIDTH, "ImageWidth")? as usize;
    let height = ifd.required_int(TAG_IMAGE_LENGTH, "ImageLength")? as usize;
    let spp = ifd.int(TAG_SAMPLES_PER_PIXEL).unwrap_or(1) as usize;
    if spp == 0 {
        return Err(Error::Format("SamplesPerPixel is zero".into()));
    }
    if let Some(bits) = ifd.ints(TAG_BITS_PER_SAMPLE) {
        if bits.iter().any(|&b| b != 32) {
            return Err(Error::Format(format!("unsupported BitsPerSample {bits:?}")));
        }
    }
    if ifd.int(TAG_SAMPLE_FORMAT).unwrap_or(1) != 3 {
        return Err(Error::Format("only IEEE float samples are supported".into()));
    }
    let compression = ifd.int(TAG_COMPRESSION).unwrap_or(1);
    if !matches!(compression, 1 | 8 | 32946) {
        return Err(Error::Format(format!("unsupported compression {compression}")));
    }
    if ifd.int(TAG_PREDICTOR).unwrap_or(1) != 1 {
        return Err(Error::Format("TIFF predictors are not supported".into()));
    }
    let planar = ifd.int(TAG_PLANAR_CONFIG).unwrap_or(1) == 2;

    // Chunk geometry: strips are full-width tiles.
    let (chunk_w, chunk_h, offsets, counts) = if let Some(tw) = ifd.int(TAG_TILE_WIDTH) {
        let th = ifd.required_int(TAG_TILE_LENGTH, "TileLength")?;
        let offs = ifd.ints(TAG_TILE_OFFSETS).ok_or_else(|| Error::Format("missing TileOffsets".into()))?;
        let cnts = ifd
            .ints(TAG_TILE_BYTE_COUNTS)
            .ok_or_else(|| Error::Format("missing TileByteCounts".into()))?;
        (tw as usize, th as usize, offs, cnts)
    } else {
        let rps = ifd.int(TAG_ROWS_PER_STRIP).unwrap_or(height as u64).min(height as u64) as usize;
        let offs = ifd.ints(TAG_STRIP_OFFSETS).ok_or_else(|| Error::Format("missing StripOffsets".into()))?;
        let cnts = ifd
            .ints(TAG_STRIP_BYTE_COUNTS)
            .ok_or_else(|| Error::Format("missing StripByteCounts".into()))?;
        (width, rps.max(1), offs, cnts)
    };
    if chunk_w == 0 || chunk_h == 0 {
        return Err(Error::Format("zero-sized TIFF chunk".into()));
    }
    let across = width.div_ceil(chunk_w);
    let down = height.div_ceil(chunk_h);
    let per_plane = across * down;
    let planes = if planar { spp } else { 1 };
    if offsets.len() != per_plane * planes || counts.len() != offsets.len() {
        return Err(Error::Integrity(format!(
            "expected {} chunks, found {} offsets / {} byte counts",
            per_plane * planes,
            offsets.len(),
            counts.len()
        )));
    }
    let samples_per_chunk_px = if planar { 1 } else { spp };
    let is_tiled = ifd.int(TAG_TILE_WIDTH).is_some();

    let mut data = vec![vec![0f32; width * height]; spp];
    for plane in 0..planes {
        for cy in 0..down {
            for cx in 0..across {
                let idx = plane * per_plane + cy * across + cx;
                let raw = slice(buf, offsets[idx] as usize, counts[idx] as usize)?;
                let bytes = if compression == 1 {
                    raw.to_vec()
                } else {
                    let mut out = Vec::new();
                    ZlibDecoder::new(raw)
                        .read_to_end(&mut out)
                        .map_err(|e| Error::Format(format!("deflate: {e}")))?;
                    out
                };
                let rows_here = if is_tiled { chunk_h } else { chunk_h.min(height - cy * chunk_h) };
                let needed = chunk_w * rows_here * samples_per_chunk_px * 4;
                if bytes.len() < needed {
                    return Err(Error::Integrity(format!(
                        "chunk {idx} holds {} bytes, expected {needed}",
                        bytes.len()
                    )));
                }
                for ty in 0..rows_here {
                    let row = cy * chunk_h + ty;
                    if row >= height {
                        break;
                    }
                    for tx in 0..chunk_w {
                        let col = cx * chunk_w + tx;
                        if col >= width {
                            break;
                        }
                        let px = (ty * chunk_w + tx) * samples_per_chunk_px;
                        for s in 0..samples_per_chunk_px {
                            let band = if planar { plane } else { s };
                            let at = (px + s) * 4;
                            data[band][row * width + col] = order.f32(&bytes[at..at + 4]);
                        }
                    }
                }
            }
        }
    }

    if let Some(nodata) = ifd.ascii(TAG_GDAL_NODATA).and_then(|s| s.trim().parse::<f32>().ok()) {
        if !nodata.is_nan() {
            for band in &mut data {
                for v in band.iter_mut() {
                    if *v == nodata {
                        *v = f32::NAN;
                    }
                }
            }
        }
    }

    let names = band_names(&ifd, spp);
    let transform = read_transform(&ifd)?;
    let bands = names.into_iter().zip(data).map(|(n, d)| Band::new(n, d)).collect();
    BandStack::new(width, height, bands, transform)
}

fn band_names(ifd: &Ifd, spp: usize) -> Vec<String> {
    let mut names: Vec<Option<String>> = vec![None; spp];
    if let Some(xml) = ifd.ascii(TAG_GDAL_METADATA) {
        for item in xml.split("<Item").skip(1) {
            let Some(end) = item.find("</Item>") else { continue };
            let item = &item[..end];
            let Some(gt) = item.find('>') else { continue };
            let (attrs, text) = (&item[..gt], &item[gt + 1..]);
            if !attrs.contains("name=\"DESCRIPTION\"") {
                continue;
            }
            let sample = attrs
                .split("sample=\"")
                .nth(1)
                .and_then(|s| s.split('"').next())
                .and_then(|s| s.parse::<usize>().ok());
            if let Some(s) = sample.filter(|&s| s < spp) {
                names[s] = Some(unescape_xml(text.trim()));
            }
        }
    }
    if names.iter().all(Option::is_none) && spp == 28 {
        return canonical_band_names();
    }
    names
        .into_iter()
        .enumerate()
        .map(|(i, n)| n.unwrap_or_else(|| format!("band_{}", i + 1)))
        .collect()
}

fn unescape_xml(s: &str) -> String {
    s.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&apos;", "'")
        .replace("&amp;", "&")
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn read_transform(ifd: &Ifd) -> Result<GeoTransform> {
    let keys = ifd.ints(TAG_GEO_KEY_DIRECTORY).unwrap_or(&[]);
    let mut geokeys = BTreeMap::new();
    if keys.len() >= 4 {
        let n = keys[3] as usize;
        for k in 0..n {
            let e = &keys.get(4 + k * 4..8 + k * 4).unwrap_or(&[]);
            if e.len() == 4 && e[1] == 0 {
                geokeys.insert(e[0] as u16, e[3]);
            }
        }
    }
    let crs_id = match (geokeys.get(&KEY_PROJECTED_CS_TYPE), geokeys.get(&KEY_GEOGRAPHIC_TYPE)) {
        (Some(&p), _) if p != 32767 => format!("EPSG:{p}"),
        (_, Some(&g)) if g != 32767 => format!("EPSG:{g}"),
        _ => "unknown".to_string(),
    };
    let pixel_is_point = geokeys.get(&KEY_RASTER_TYPE) == Some(&2);

    let (mut ox, mut oy, pw, ph) = if let Some(m) = ifd.tags.get(&TAG_MODEL_TRANSFORMATION).and_then(Value::doubles) {
        if m.len() < 16 || m[1] != 0.0 || m[4] != 0.0 {
            return Err(Error::Format("only north-up ModelTransformation is supported".into()));
        }
        (m[3], m[7], m[0], m[5])
    } else {
        let scale = ifd
            .tags
            .get(&TAG_MODEL_PIXEL_SCALE)
            .and_then(Value::doubles)
            .ok_or_else(|| Error::Format("GeoTIFF lacks ModelPixelScale".into()))?;
        let tie = ifd
            .tags
            .get(&TAG_MODEL_TIEPOINT)
            .and_then(Value::doubles)
            .ok_or_else(|| Error::Format("GeoTIFF lacks ModelTiepoint".into()))?;
        if scale.len() < 2 || tie.len() < 6 {
            return Err(Error::Format("malformed georeferencing tags".into()));
        }
        let (sx, sy) = (scale[0], scale[1]);
        (tie[3] - tie[0] * sx, tie[4] + tie[1] * sy, sx, -sy)
    };
    if pixel_is_point {
        ox -= pw / 2.0;
        oy -= ph / 2.0;
    }
    GeoTransform::new(ox, oy, pw, ph, crs_id).map_err(|e| Error::Format(format!("GeoTIFF transform: {e}")))
}

/// Chunking and compression for [`write_geotiff`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiffOptions {
    pub deflate: bool,
    /// `Some((w, h))` writes tiles (dimensions must be multiples of 16).
    pub tiles: Option<(usize, usize)>,
    pub rows_per_strip: usize,
    pub planar: bool,
    pub byte_order: ByteOrder,
}

impl Default for TiffOptions {
    fn default() -> Self {
        Self {
            deflate: true,
            tiles: None,
            rows_per_strip: 16,
            planar: true,
            byte_order: ByteOrder::Little,
        }
    }
}

pub fn write_geotiff(stack: &BandStack, path: impl AsRef<Path>, opts: &TiffOptions) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_geotiff(stack, opts)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn encode_geotiff(stack: &BandStack, opts: &TiffOptions) -> Result<Vec<u8>> {
    let order = opts.byte_order;
    let (w, h) = (stack.width(), stack.height());
    let spp = stack.bands().len();
    let (cw, ch) = match opts.tiles {
        Some((tw, th)) => {
            if tw == 0 || th == 0 || tw % 16 != 0 || th % 16 != 0 {
                return Err(Error::Domain("tile dimensions must be positive multiples of 16".into()));
            }
            (tw, th)
        }
        None => (w, opts.rows_per_strip.clamp(1, h.max(1))),
    };
    let across = w.div_ceil(cw);
    let down = h.div_ceil(ch);
    let planes = if opts.planar { spp } else { 1 };
    let per_px = if opts.planar { 1 } else { spp };

    let mut out = Vec::new();
    match order {
        ByteOrder::Little => out.extend_from_slice(b"II*\0"),
        ByteOrder::Big => out.extend_from_slice(b"MM\0*"),
    }
    order.put_u32(&mut out, 0); // IFD offset, patched below

    let mut offsets = Vec::new();
    let mut counts = Vec::new();
    for plane in 0..planes {
        for cy in 0..down {
            for cx in 0..across {
                let rows_here = if opts.tiles.is_some() { ch } else { ch.min(h - cy * ch) };
                let mut chunk = Vec::with_capacity(cw * rows_here * per_px * 4);
                for ty in 0..rows_here {
                    let row = cy * ch + ty;
                    for tx in 0..cw {
                        let col = cx * cw + tx;
                        for s in 0..per_px {
                            let band = if opts.planar { plane } else { s };
                            let v = if row < h && col < w {
                                stack.band_at(band).data[row * w + col]
                            } else {
                                f32::NAN
                            };
                            order.put_f32(&mut chunk, v);
                        }
                    }
                }
                if opts.deflate {
                    let mut enc = ZlibEncoder::new(Vec::new(), flate2::Compression::default());
                    enc.write_all(&chunk).expect("in-memory write");
                    chunk = enc.finish().expect("in-memory write");
                }
                offsets.push(out.len() as u32);
                counts.push(chunk.len() as u32);
                out.extend_from_slice(&chunk);
                if out.len() % 2 == 1 {
                    out.push(0);
                }
            }
        }
    }

    let t = stack.transform();
    let crs = Crs::parse(&t.crs_id).ok();
    let mut geokeys: Vec<u16> = vec![1, 1, 0, 0];
    let mut push_key = |id: u16, v: u16| {
        geokeys.extend_from_slice(&[id, 0, 1, v]);
    };
    match crs {
        Some(Crs::Geographic) => {
            push_key(KEY_MODEL_TYPE, 2);
            push_key(KEY_RASTER_TYPE, 1);
            push_key(KEY_GEOGRAPHIC_TYPE, 4326);
        }
        Some(c @ Crs::Utm { .. }) => {
            push_key(KEY_MODEL_TYPE, 1);
            push_key(KEY_RASTER_TYPE, 1);
            push_key(KEY_PROJECTED_CS_TYPE, c.epsg_code() as u16);
        }
        None => push_key(KEY_RASTER_TYPE, 1),
    }
    geokeys[3] = ((geokeys.len() - 4) / 4) as u16;

    let mut meta = String::from("<GDALMetadata>");
    for (i, b) in stack.bands().iter().enumerate() {
        meta.push_str(&format!(
            "<Item name=\"DESCRIPTION\" sample=\"{i}\" role=\"description\">{}</Item>",
            escape_xml(&b.name)
        ));
    }
    meta.push_str("</GDALMetadata>");

    let mut entries: Vec<(u16, u16, Vec<u8>, u32)> = Vec::new();
    let add_shorts = |tag: u16, vals: &[u16]| {
        let mut b = Vec::new();
        for &v in vals {
            order.put_u16(&mut b, v);
        }
        (tag, 3u16, b, vals.len() as u32)
    };
    entries.push(add_shorts(TAG_BITS_PER_SAMPLE, &vec![32; spp]));
    entries.push(add_shorts(TAG_COMPRESSION, &[if opts.deflate { 8 } else { 1 }]));
    entries.push(add_shorts(TAG_PHOTOMETRIC, &[1]));
    entries.push(add_shorts(TAG_SAMPLES_PER_PIXEL, &[spp as u16]));
    entries.push(add_shorts(TAG_PLANAR_CONFIG, &[if opts.planar { 2 } else { 1 }]));
    entries.push(add_shorts(TAG_SAMPLE_FORMAT, &vec![3; spp]));
    entries.push(add_shorts(TAG_GEO_KEY_DIRECTORY, &geokeys));
    let longs = |tag: u16, vals: &[u32]| {
        let mut b = Vec::new();
        for &v in vals {
            order.put_u32(&mut b, v);
        }
        (tag, 4u16, b, vals.len() as u32)
    };
    entries.push(longs(TAG_IMAGE_WIDTH, &[w as u32]));
    entries.push(longs(TAG_IMAGE_LENGTH, &[h as u32]));
    if opts.tiles.is_some() {
        entries.push(longs(TAG_TILE_WIDTH, &[cw as u32]));
        entries.push(longs(TAG_TILE_LENGTH, &[ch as u32]));
        entries.push(longs(TAG_TILE_OFFSETS, &offsets));
        entries.push(longs(TAG_TILE_BYTE_COUNTS, &counts));
    } else {
        entries.push(longs(TAG_ROWS_PER_STRIP, &[ch as u32]));
        entries.push(longs(TAG_STRIP_OFFSETS, &offsets));
        entries.push(longs(TAG_STRIP_BYTE_COUNTS, &counts));
    }
    let doubles = |tag: u16, vals: &[f64]| {
        let mut b = Vec::new();
        for &v in vals {
            order.put_f64(&mut b, v);
        }
        (tag, 12u16, b, vals.len() as u32)
    };
    entries.push(doubles(TAG_MODEL_PIXEL_SCALE, &[t.pixel_width, -t.pixel_height, 0.0]));
    entries.push(doubles(TAG_MODEL_TIEPOINT, &[0.0, 0.0, 0.0, t.origin_x, t.origin_y, 0.0]));
    let ascii = |tag: u16, s: &str| {
        let mut b = s.as_bytes().to_vec();
        b.push(0);
        let n = b.len() as u32;
        (tag, 2u16, b, n)
    };
    entries.push(ascii(TAG_GDAL_METADATA, &meta));
    entries.push(ascii(TAG_GDAL_NODATA, "nan"));
    entries.sort_by_key(|e| e.0);

    // Out-of-line values first, then the IFD itself.
    let mut value_offsets = Vec::with_capacity(entries.len());
    for (_, _, bytes, _) in &entries {
        if bytes.len() > 4 {
            if out.len() % 2 == 1 {
                out.push(0);
            }
            value_offsets.push(Some(out.len() as u32));
            out.extend_from_slice(bytes);
        } else {
            value_offsets.push(None);
        }
    }
    if out.len() % 2 == 1 {
        out.push(0);
    }
    let ifd_offset = out.len() as u32;
    order.put_u16(&mut out, entries.len() as u16);
    for ((tag, ty, bytes, n), off) in entries.iter().zip(&value_offsets) {
        order.put_u16(&mut out, *tag);
        order.put_u16(&mut out, *ty);
        order.put_u32(&mut out, *n);
        match off {
            Some(o) => order.put_u32(&mut out, *o),
            None => {
                let mut inline = bytes.clone();
                inline.resize(4, 0);
                out.extend_from_slice(&inline);
            }
        }
    }
    order.put_u32(&mut out, 0);
    let mut patched = Vec::new();
    order.put_u32(&mut patched, ifd_offset);
    out[4..8].copy_from_slice(&patched);
    Ok(out)
}
