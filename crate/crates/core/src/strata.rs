//! Spatial strata: a uniform grid over an extent or a set of custom polygons,
//! with point lookup and a GeoJSON-compatible file format.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::geo::{BoundingBox, GeoPoint, METERS_PER_DEGREE};

/// A trailing row or column narrower than this fraction of a cell is merged
/// into its neighbour instead of becoming a sliver stratum.
pub const SLIVER_TOLERANCE: f64 = 0.01;

/// Upper bound on grid size; larger grids are almost certainly a unit mistake.
pub const MAX_GRID_CELLS: usize = 20_000_000;

pub type StratumId = u64;

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Cell(BoundingBox),
    /// Outer ring without the repeated closing vertex.
    Polygon(Vec<GeoPoint>),
}

impl Geometry {
    pub fn bounds(&self) -> BoundingBox {
        match self {
            Geometry::Cell(b) => *b,
            Geometry::Polygon(ring) => ring_bounds(ring),
        }
    }

    /// Closed containment: boundary points count as inside.
    pub fn contains(&self, p: &GeoPoint) -> bool {
        match self {
            Geometry::Cell(b) => b.contains(p),
            Geometry::Polygon(ring) => polygon_contains(ring, p),
        }
    }

    fn ring_coordinates(&self) -> Vec<[f64; 2]> {
        let mut coords: Vec<[f64; 2]> = match self {
            Geometry::Cell(b) => vec![
                [b.min_lon, b.min_lat],
                [b.max_lon, b.min_lat],
                [b.max_lon, b.max_lat],
                [b.min_lon, b.max_lat],
            ],
            Geometry::Polygon(ring) => ring.iter().map(|p| [p.lon(), p.lat()]).collect(),
        };
        coords.push(coords[0]);
        coords
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stratum {
    pub id: StratumId,
    pub geometry: Geometry,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub extent: BoundingBox,
    pub cell_size_m: f64,
    pub rows: usize,
    pub cols: usize,
    pub lat_step: f64,
    pub lon_step: f64,
}

impl GridSpec {
    fn lat_edge(&self, r: usize) -> f64 {
        if r >= self.rows {
            self.extent.max_lat
        } else {
            self.extent.min_lat + r as f64 * self.lat_step
        }
    }

    fn lon_edge(&self, c: usize) -> f64 {
        if c >= self.cols {
            self.extent.max_lon
        } else {
            self.extent.min_lon + c as f64 * self.lon_step
        }
    }

    fn cell(&self, row: usize, col: usize) -> BoundingBox {
        BoundingBox {
            min_lon: self.lon_edge(col),
            min_lat: self.lat_edge(row),
            max_lon: self.lon_edge(col + 1),
            max_lat: self.lat_edge(row + 1),
        }
    }

    fn locate(&self, p: &GeoPoint) -> Option<StratumId> {
        if !self.extent.contains(p) {
            return None;
        }
        let row = axis_index(
            p.lat(),
            self.extent.min_lat,
            self.lat_step,
            self.rows,
            |k| self.lat_edge(k),
        );
        let col = axis_index(
            p.lon(),
            self.extent.min_lon,
            self.lon_step,
            self.cols,
            |k| self.lon_edge(k),
        );
        Some((row * self.cols + col) as StratumId)
    }
}

/// Smallest cell index `k` whose closed span `[edge(k), edge(k+1)]` holds `v`.
fn axis_index(v: f64, min: f64, step: f64, n: usize, edge: impl Fn(usize) -> f64) -> usize {
    let guess = ((v - min) / step).floor();
    let mut k = if guess.is_finite() && guess > 0.0 {
        (guess as usize).min(n - 1)
    } else {
        0
    };
    while k > 0 && v <= edge(k) {
        k -= 1;
    }
    while k + 1 < n && v > edge(k + 1) {
        k += 1;
    }
    k
}

fn cells_along(span: f64, step: f64) -> usize {
    ((span / step - SLIVER_TOLERANCE).ceil() as usize).max(1)
}

#[derive(Debug, Clone)]
enum Layout {
    Grid(GridSpec),
    Custom(BucketIndex),
}

/// The set of strata covering a study area.
#[derive(Debug, Clone)]
pub struct Stratification {
    /// Sorted by id.
    strata: Vec<Stratum>,
    extent: BoundingBox,
    layout: Layout,
}

impl Stratification {
    pub fn strata(&self) -> &[Stratum] {
        &self.strata
    }

    pub fn len(&self) -> usize {
        self.strata.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strata.is_empty()
    }

    pub fn extent(&self) -> BoundingBox {
        self.extent
    }

    pub fn grid(&self) -> Option<&GridSpec> {
        match &self.layout {
            Layout::Grid(g) => Some(g),
            Layout::Custom(_) => None,
        }
    }

    pub fn spatial_granularity_m(&self) -> Option<f64> {
        self.grid().map(|g| g.cell_size_m)
    }

    pub fn get(&self, id: StratumId) -> Option<&Stratum> {
        self.strata
            .binary_search_by_key(&id, |s| s.id)
            .ok()
            .map(|i| &self.strata[i])
    }

    /// Id of the stratum containing `p`; on shared boundaries the smallest id wins.
    pub fn assign_stratum(&self, p: &GeoPoint) -> Option<StratumId> {
        match &self.layout {
            Layout::Grid(g) => g.locate(p),
            Layout::Custom(index) => index
                .candidates(p)
                .iter()
                .map(|&i| &self.strata[i])
                .find(|s| s.geometry.contains(p))
                .map(|s| s.id),
        }
    }

    /// GeoJSON FeatureCollection of all strata. Grids carry a `grid` member so a
    /// reload restores arithmetic lookup.
    pub fn to_geojson(&self) -> Value {
        let features: Vec<Value> = self
            .strata
            .iter()
            .map(|s| {
                serde_json::json!({
                    "type": "Feature",
                    "properties": { "stratum_id": s.id },
                    "geometry": {
                        "type": "Polygon",
                        "coordinates": [s.geometry.ring_coordinates()],
                    }
                })
            })
            .collect();
        let mut doc = serde_json::json!({
            "type": "FeatureCollection",
            "bbox": <[f64; 4]>::from(self.extent),
            "features": features,
        });
        if let Layout::Grid(g) = &self.layout {
            doc["grid"] = serde_json::json!({
                "extent": g.extent,
                "cell_size_m": g.cell_size_m,
            });
        }
        doc
    }
}

/// Uniform grid over `extent` with square-ish cells of side `cell_size_m`.
///
/// Degree steps are derived at the extent's center latitude. Ids run row-major
/// from the south-west corner starting at 0; the last row and column are
/// clipped to the extent.
pub fn make_grid(extent: BoundingBox, cell_size_m: f64) -> Result<Stratification> {
    if !cell_size_m.is_finite() || cell_size_m <= 0.0 {
        return Err(Error::InvalidGrid(format!(
            "cell size {cell_size_m} m must be positive"
        )));
    }
    if extent.is_degenerate() {
        return Err(Error::InvalidGrid("extent has zero width or height".into()));
    }
    let cos_lat = extent.center().lat().to_radians().cos();
    if cos_lat <= 0.01 {
        return Err(Error::InvalidGrid("polar extents are not supported".into()));
    }
    let lat_step = cell_size_m / METERS_PER_DEGREE;
    let lon_step = cell_size_m / (METERS_PER_DEGREE * cos_lat);
    let rows = cells_along(extent.height(), lat_step);
    let cols = cells_along(extent.width(), lon_step);
    if rows.saturating_mul(cols) > MAX_GRID_CELLS {
        return Err(Error::InvalidGrid(format!(
            "{rows} x {cols} cells exceeds the limit of {MAX_GRID_CELLS}"
        )));
    }
    let spec = GridSpec {
        extent,
        cell_size_m,
        rows,
        cols,
        lat_step,
        lon_step,
    };
    let mut strata = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            strata.push(Stratum {
                id: (r * cols + c) as StratumId,
                geometry: Geometry::Cell(spec.cell(r, c)),
            });
        }
    }
    Ok(Stratification {
        strata,
        extent,
        layout: Layout::Grid(spec),
    })
}

#[derive(Deserialize)]
struct FeatureCollection {
    #[serde(rename = "type")]
    kind: String,
    features: Vec<Feature>,
    #[serde(default)]
    grid: Option<GridMember>,
}

#[derive(Deserialize)]
struct Feature {
    geometry: Option<FeatureGeometry>,
    #[serde(default)]
    properties: Option<Map<String, Value>>,
}

#[derive(Deserialize)]
struct FeatureGeometry {
    #[serde(rename = "type")]
    kind: String,
    coordinates: Value,
}

#[derive(Deserialize)]
struct GridMember {
    extent: BoundingBox,
    cell_size_m: f64,
}

/// Parse a strata document (GeoJSON FeatureCollection of Polygons).
pub fn load_custom_strata(document: &str) -> Result<Stratification> {
    let fc: FeatureCollection =
        serde_json::from_str(document).map_err(|e| Error::InvalidStrata(e.to_string()))?;
    if fc.kind != "FeatureCollection" {
        return Err(Error::InvalidStrata(format!(
            "expected a FeatureCollection, got {:?}",
            fc.kind
        )));
    }

    let mut strata = Vec::with_capacity(fc.features.len());
    for (i, feature) in fc.features.into_iter().enumerate() {
        let id = match feature
            .properties
            .as_ref()
            .and_then(|p| p.get("stratum_id"))
        {
            None | Some(Value::Null) => i as StratumId,
            Some(v) => v.as_u64().ok_or_else(|| {
                Error::InvalidStrata(format!(
                    "feature {i}: stratum_id {v} is not a non-negative integer"
                ))
            })?,
        };
        let geometry = feature
            .geometry
            .ok_or_else(|| Error::InvalidStrata(format!("feature {i} has no geometry")))?;
        let ring = parse_polygon(&geometry)
            .map_err(|e| Error::InvalidStrata(format!("feature {i}: {e}")))?;
        strata.push(Stratum {
            id,
            geometry: Geometry::Polygon(ring),
        });
    }
    strata.sort_by_key(|s| s.id);
    if let Some(w) = strata.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::DuplicateStratum(w[0].id));
    }

    if let Some(grid) = fc.grid {
        return restore_grid(grid, &strata);
    }

    let extent = strata
        .iter()
        .map(|s| s.geometry.bounds())
        .reduce(|a, b| a.union(&b))
        .ok_or_else(|| Error::InvalidStrata("no features".into()))?;
    let index = BucketIndex::build(&strata, extent);
    Ok(Stratification {
        strata,
        extent,
        layout: Layout::Custom(index),
    })
}

fn restore_grid(member: GridMember, polygons: &[Stratum]) -> Result<Stratification> {
    let grid = make_grid(member.extent, member.cell_size_m)?;
    let consistent = grid.strata.len() == polygons.len()
        && grid.strata.iter().zip(polygons).all(|(cell, poly)| {
            cell.id == poly.id
                && cell.geometry.ring_coordinates() == poly.geometry.ring_coordinates()
        });
    if consistent {
        Ok(grid)
    } else {
        Err(Error::InvalidStrata(
            "features do not match the declared grid".into(),
        ))
    }
}

fn parse_polygon(geometry: &FeatureGeometry) -> std::result::Result<Vec<GeoPoint>, String> {
    if geometry.kind != "Polygon" {
        return Err(format!("geometry type {:?} is not Polygon", geometry.kind));
    }
    let rings: Vec<Vec<Vec<f64>>> =
        serde_json::from_value(geometry.coordinates.clone()).map_err(|e| e.to_string())?;
    match rings.len() {
        0 => return Err("polygon has no rings".into()),
        1 => {}
        _ => return Err("polygons with holes are not supported".into()),
    }
    let mut ring = Vec::with_capacity(rings[0].len());
    for pos in &rings[0] {
        if pos.len() < 2 {
            return Err("position with fewer than 2 coordinates".into());
        }
        ring.push(GeoPoint::new(pos[1], pos[0]).map_err(|e| e.to_string())?);
    }
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    validate_ring(&ring)?;
    Ok(ring)
}

fn validate_ring(ring: &[GeoPoint]) -> std::result::Result<(), String> {
    let mut distinct: Vec<(f64, f64)> = ring.iter().map(|p| (p.lon(), p.lat())).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(format!(
            "ring has {} distinct vertices, need at least 3",
            distinct.len()
        ));
    }
    let n = ring.len();
    let edge = |i: usize| (xy(&ring[i]), xy(&ring[(i + 1) % n]));
    for i in 0..n {
        if edge(i).0 == edge(i).1 {
            return Err("ring repeats a vertex consecutively".into());
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = edge(i);
            let (c, d) = edge(j);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // Consecutive edges may only share their common vertex.
                let shared = if j == i + 1 { b } else { a };
                let (far_i, far_j) = if j == i + 1 { (a, d) } else { (b, c) };
                if orient(far_i, shared, far_j) == 0.0
                    && (far_i.0 - shared.0) * (far_j.0 - shared.0)
                        + (far_i.1 - shared.1) * (far_j.1 - shared.1)
                        > 0.0
                {
                    return Err("ring folds back on itself".into());
                }
            } else if segments_intersect(a, b, c, d) {
                return Err("ring is self-intersecting".into());
            }
        }
    }
    Ok(())
}

type Xy = (f64, f64);

fn xy(p: &GeoPoint) -> Xy {
    (p.lon(), p.lat())
}

fn orient(a: Xy, b: Xy, c: Xy) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn on_segment(a: Xy, b: Xy, p: Xy) -> bool {
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

fn segments_intersect(a: Xy, b: Xy, c: Xy, d: Xy) -> bool {
    let (o1, o2, o3, o4) = (
        orient(a, b, c),
        orient(a, b, d),
        orient(c, d, a),
        orient(c, d, b),
    );
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

fn ring_bounds(ring: &[GeoPoint]) -> BoundingBox {
    let mut b = BoundingBox {
        min_lon: f64::INFINITY,
        min_lat: f64::INFINITY,
        max_lon: f64::NEG_INFINITY,
        max_lat: f64::NEG_INFINITY,
    };
    for p in ring {
        b.min_lon = b.min_lon.min(p.lon());
        b.min_lat = b.min_lat.min(p.lat());
        b.max_lon = b.max_lon.max(p.lon());
        b.max_lat = b.max_lat.max(p.lat());
    }
    b
}

/// Even-odd ray casting; points on an edge count as inside.
pub fn polygon_contains(ring: &[GeoPoint], p: &GeoPoint) -> bool {
    let q = xy(p);
    let n = ring.len();
    let mut inside = false;
    for i in 0..n {
        let a = xy(&ring[i]);
        let b = xy(&ring[(i + 1) % n]);
        if orient(a, b, q) == 0.0 && on_segment(a, b, q) {
            return true;
        }
        if (a.1 > q.1) != (b.1 > q.1) {
            let x = a.0 + (q.1 - a.1) / (b.1 - a.1) * (b.0 - a.0);
            if q.0 < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Coarse uniform buckets over the extent, each listing (in id order) the
/// strata whose bounds touch it.
#[derive(Debug, Clone)]
struct BucketIndex {
    extent: BoundingBox,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl BucketIndex {
    fn build(strata: &[Stratum], extent: BoundingBox) -> Self {
        let side = ((strata.len() as f64).sqrt().ceil() as usize).clamp(1, 512);
        let nx = if extent.width() > 0.0 { side } else { 1 };
        let ny = if extent.height() > 0.0 { side } else { 1 };
        let mut index = BucketIndex {
            extent,
            nx,
            ny,
            buckets: vec![Vec::new(); nx * ny],
        };
        for (i, s) in strata.iter().enumerate() {
            let b = s.geometry.bounds();
            let (x0, y0) = index.bucket_of(b.min_lon, b.min_lat);
            let (x1, y1) = index.bucket_of(b.max_lon, b.max_lat);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    index.buckets[y * nx + x].push(i);
                }
            }
        }
        index
    }

    fn bucket_of(&self, lon: f64, lat: f64) -> (usize, usize) {
        let fx = if self.extent.width() > 0.0 {
            (lon - self.extent.min_lon) / self.extent.width()
        } else {
            0.0
        };
        let fy = if self.extent.height() > 0.0 {
            (lat - self.extent.min_lat) / self.extent.height()
        } else {
            0.0
        };
        let x = ((fx * self.nx as f64).floor().max(0.0) as usize).min(self.nx - 1);
        let y = ((fy * self.ny as f64).floor().max(0.0) as usize).min(self.ny - 1);
        (x, y)
    }

    fn candidates(&self, p: &GeoPoint) -> &[usize] {
        if !self.extent.contains(p) {
            return &[];
        }
        let (x, y) = self.bucket_of(p.lon(), p.lat());
        &self.buckets[y * self.nx + x]
    }
}
