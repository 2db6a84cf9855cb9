//! Lon/lat polygons, GeoJSON loading, and rasterization onto a band-stack grid.

use std::path::Path;

use rayon::prelude::*;
use serde_json::Value;

use super::geo::GeoTransform;
use crate::error::{Error, Result};

pub type Ring = Vec<(f64, f64)>;

/// A polygon as lon/lat rings: the first is the outer boundary, the rest holes.
/// Rings are closed (first vertex repeated at the end).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    rings: Vec<Ring>,
}

impl Polygon {
    pub fn new(rings: Vec<Ring>) -> Result<Self> {
        if rings.is_empty() {
            return Err(Error::Geometry("polygon has no rings".into()));
        }
        for (i, ring) in rings.iter().enumerate() {
            if ring.len() < 4 {
                return Err(Error::Geometry(format!(
                    "ring {i} has {} vertices; a closed ring needs at least 3 distinct plus the closing vertex",
                    ring.len()
                )));
            }
            if ring.first() != ring.last() {
                return Err(Error::Geometry(format!("ring {i} is not closed")));
            }
            if ring.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
                return Err(Error::Geometry(format!("ring {i} has non-finite coordinates")));
            }
        }
        Ok(Self { rings })
    }

    pub fn outer(&self) -> &Ring {
        &self.rings[0]
    }

    pub fn holes(&self) -> &[Ring] {
        &self.rings[1..]
    }

    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }
}

/// Even-odd crossing test. A horizontal ray is cast toward +x; an edge counts
/// when it straddles `py` with one endpoint strictly above and the other at or
/// below, and its crossing lies strictly right of `px`. Consequently points on
/// a left or bottom edge are inside and points on a right or top edge are not.
pub fn point_in_ring(ring: &[(f64, f64)], px: f64, py: f64) -> bool {
    let mut inside = false;
    let n = ring.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = ring[i];
        let (xj, yj) = ring[j];
        if (yi > py) != (yj > py) {
            let x_cross = (xj - xi) * (py - yi) / (yj - yi) + xi;
            if px < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Boolean raster aligned to a band stack, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// Square erosion: a pixel survives when every pixel within `radius`
    /// (Chebyshev distance) is set. Out-of-grid neighbours count as unset.
    pub fn erode(&self, radius: usize) -> Mask {
        if radius == 0 {
            return self.clone();
        }
        let r = radius as i64;
        let (w, h) = (self.width as i64, self.height as i64);
        let data = (0..self.height * self.width)
            .into_par_iter()
            .map(|i| {
                let (row, col) = ((i / self.width) as i64, (i % self.width) as i64);
                if !self.data[i] {
                    return false;
                }
                for dr in -r..=r {
                    for dc in -r..=r {
                        let (rr, cc) = (row + dr, col + dc);
                        if rr < 0 || cc < 0 || rr >= h || cc >= w || !self.data[(rr * w + cc) as usize] {
                            return false;
                        }
                    }
                }
                true
            })
            .collect();
        Mask {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// Marks pixels whose centers fall inside any of `polygons` (inside the outer
/// ring and outside every hole). Vertices are lon/lat and are mapped into the
/// grid's CRS before testing.
pub fn rasterize_polygons(polygons: &[Polygon], transform: &GeoTransform, width: usize, height: usize) -> Result<Mask> {
    let crs = transform.crs()?;
    let projected: Vec<Vec<Ring>> = polygons
        .iter()
        .map(|p| {
            p.rings()
                .iter()
                .map(|ring| ring.iter().map(|&(lon, lat)| crs.from_lonlat(lon, lat)).collect())
                .collect()
        })
        .collect();
    let data: Vec<bool> = (0..height)
        .into_par_iter()
        .flat_map_iter(|row| {
            let projected = &projected;
            (0..width).map(move |col| {
                let (x, y) = transform.pixel_to_geo(row as i64, col as i64);
                projected.iter().any(|rings| {
                    point_in_ring(&rings[0], x, y) && !rings[1..].iter().any(|h| point_in_ring(h, x, y))
                })
            })
        })
        .collect();
    Ok(Mask { width, height, data })
}

pub fn rasterize_polygon(polygon: &Polygon, transform: &GeoTransform, width: usize, height: usize) -> Result<Mask> {
    rasterize_polygons(std::slice::from_ref(polygon), transform, width, height)
}

/// Reads Polygon / MultiPolygon geometries from a GeoJSON document
/// (bare geometry, Feature, or FeatureCollection).
pub fn parse_geojson(text: &str) -> Result<Vec<Polygon>> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Geometry(format!("GeoJSON: {e}")))?;
    let mut out = Vec::new();
    collect_polygons(&v, &mut out)?;
    if out.is_empty() {
        return Err(Error::Geometry("GeoJSON contains no Polygon or MultiPolygon".into()));
    }
    Ok(out)
}

pub fn read_geojson(path: impl AsRef<Path>) -> Result<Vec<Polygon>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_geojson(&text)
}

fn collect_polygons(v: &Value, out: &mut Vec<Polygon>) -> Result<()> {
    let kind = v.get("type").and_then(Value::as_str).unwrap_or("");
    match kind {
        "FeatureCollection" => {
            for f in v.get("features").and_then(Value::as_array).into_iter().flatten() {
                collect_polygons(f, out)?;
            }
        }
        "Feature" => {
            if let Some(g) = v.get("geometry").filter(|g| !g.is_null()) {
                collect_polygons(g, out)?;
            }
        }
        "GeometryCollection" => {
            for g in v.get("geometries").and_then(Value::as_array).into_iter().flatten() {
                collect_polygons(g, out)?;
            }
        }
        "Polygon" => out.push(polygon_from(coords(v)?)?),
        "MultiPolygon" => {
            for p in coords(v)?.as_array().into_iter().flatten() {
                out.push(polygon_from(p)?);
            }
        }
        _ => {}
    }
    Ok(())
}

fn coords(v: &Value) -> Result<&Value> {
    v.get("coordinates")
        .ok_or_else(|| Error::Geometry("geometry lacks coordinates".into()))
}

fn polygon_from(v: &Value) -> Result<Polygon> {
    let rings = v
        .as_array()
        .ok_or_else(|| Error::Geometry("polygon coordinates must be an array of rings".into()))?
        .iter()
        .map(|ring| {
            ring.as_array()
                .ok_or_else(|| Error::Geometry("ring must be an array of positions".into()))?
                .iter()
                .map(|pos| {
                    let p = pos.as_array().filter(|p| p.len() >= 2);
                    match p.map(|p| (p[0].as_f64(), p[1].as_f64())) {
                        Some((Some(x), Some(y))) => Ok((x, y)),
                        _ => Err(Error::Geometry("position must be [lon, lat]".into())),
                    }
                })
                .collect::<Result<Ring>>()
        })
        .collect::<Result<Vec<Ring>>>()?;
    Polygon::new(rings)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid() -> GeoTransform {
        // 5x5 grid of 0.25-wide pixels covering [-0.125, 1.125]^2.
        GeoTransform::new(-0.125, 1.125, 0.25, -0.25, "EPSG:4326").unwrap()
    }

    fn square(x0: f64, y0: f64, x1: f64, y1: f64) -> Ring {
        vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)]
    }

    #[test]
    fn unit_square_contains_nine_interior_centers() {
        // Centers at 0, .25, .5, .75, 1; the inner 3x3 lie strictly inside (0,1)^2.
        let p = Polygon::new(vec![square(0.01, 0.01, 0.99, 0.99)]).unwrap();
        let m = rasterize_polygon(&p, &unit_grid(), 5, 5).unwrap();
        assert_eq!(m.count(), 9);
        assert!(!m.get(0, 0) && m.get(2, 2));
    }

    #[test]
    fn hole_is_subtracted() {
        let t = GeoTransform::new(0.0, 10.0, 0.5, -0.5, "EPSG:4326").unwrap();
        let outer = square(1.1, 1.1, 8.9, 8.9);
        let hole = square(3.1, 3.1, 6.9, 6.9);
        let with_hole = Polygon::new(vec![outer.clone(), hole.clone()]).unwrap();
        let m = rasterize_polygon(&with_hole, &t, 20, 20).unwrap();
        let outer_only = rasterize_polygon(&Polygon::new(vec![outer.clone()]).unwrap(), &t, 20, 20).unwrap();
        let hole_only = rasterize_polygon(&Polygon::new(vec![hole.clone()]).unwrap(), &t, 20, 20).unwrap();
        // Brute force over centers.
        let mut expected = 0;
        for r in 0..20 {
            for c in 0..20 {
                let (x, y) = t.pixel_to_geo(r, c);
                let inside = x > 1.1 && x < 8.9 && y > 1.1 && y < 8.9;
                let in_hole = x > 3.1 && x < 6.9 && y > 3.1 && y < 6.9;
                if inside && !in_hole {
                    expected += 1;
                }
            }
        }
        assert_eq!(m.count(), expected);
        assert_eq!(m.count(), outer_only.count() - hole_only.count());
    }

    #[test]
    fn polygon_outside_grid_is_empty() {
        let p = Polygon::new(vec![square(10.0, 10.0, 11.0, 11.0)]).unwrap();
        let m = rasterize_polygon(&p, &unit_grid(), 5, 5).unwrap();
        assert_eq!(m.count(), 0);
    }

    #[test]
    fn unclosed_ring_rejected() {
        let err = Polygon::new(vec![vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]]);
        assert!(matches!(err, Err(Error::Geometry(_))));
        let err = Polygon::new(vec![vec![(0.0, 0.0), (1.0, 0.0), (0.0, 0.0)]]);
        assert!(matches!(err, Err(Error::Geometry(_))));
    }

    #[test]
    fn edge_tie_rule_is_half_open() {
        let ring = square(0.0, 0.0, 1.0, 1.0);
        assert!(point_in_ring(&ring, 0.0, 0.5)); // left edge
        assert!(!point_in_ring(&ring, 1.0, 0.5)); // right edge
        assert!(point_in_ring(&ring, 0.5, 0.0)); // bottom edge
        assert!(!point_in_ring(&ring, 0.5, 1.0)); // top edge
    }

    #[test]
    fn geojson_variants() {
        let fc = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{},"geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,0]]]}},
            {"type":"Feature","properties":{},"geometry":{"type":"MultiPolygon","coordinates":[
                [[[2,2],[3,2],[3,3],[2,2]]],
                [[[4,4],[5,4],[5,5],[4,4]],[[4.2,4.1],[4.8,4.1],[4.8,4.5],[4.2,4.1]]]
            ]}}]}"#;
        let polys = parse_geojson(fc).unwrap();
        assert_eq!(polys.len(), 3);
        assert_eq!(polys[2].holes().len(), 1);
        assert!(parse_geojson(r#"{"type":"Point","coordinates":[0,0]}"#).is_err());
        assert!(parse_geojson(r#"{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1]]]}"#).is_err());
    }

    #[test]
    fn erosion_shrinks_by_radius() {
        let mut m = Mask::filled(7, 7, false);
        for r in 1..6 {
            for c in 1..6 {
                m.data[r * 7 + c] = true;
            }
        }
        assert_eq!(m.erode(0), m);
        let e = m.erode(1);
        assert_eq!(e.count(), 9);
        assert!(e.get(3, 3) && !e.get(1, 1));
        assert_eq!(m.erode(3).count(), 0);
        // Border pixels of a full grid are eroded too.
        assert_eq!(Mask::filled(4, 4, true).erode(1).count(), 4);
    }
}
