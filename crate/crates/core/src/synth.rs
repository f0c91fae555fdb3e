//! Synthetic fleets: day-periodic fixed-route vehicles shuttling along a
//! polyline, and random-waypoint vehicles roaming the extent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{haversine_distance, BoundingBox, GeoPoint, METERS_PER_DEGREE};
use crate::store::{MobilityRecord, VehicleId};

pub const SECONDS_PER_DAY: i64 = 86_400;

fn default_sample_interval() -> i64 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetSpec {
    pub fixed_route_count: usize,
    pub random_route_count: usize,
    pub extent: BoundingBox,
    pub days: u32,
    #[serde(default = "default_sample_interval")]
    pub sample_interval_s: i64,
    pub speed_mps: f64,
    pub seed: u64,
}

impl FleetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sample_interval_s <= 0 {
            return Err(Error::InvalidFleet(
                "sample interval must be positive".into(),
            ));
        }
        if !self.speed_mps.is_finite() || self.speed_mps <= 0.0 {
            return Err(Error::InvalidFleet("speed must be positive".into()));
        }
        if self.extent.is_degenerate() {
            return Err(Error::InvalidFleet(
                "extent has zero width or height".into(),
            ));
        }
        Ok(())
    }

    fn samples_per_day(&self) -> i64 {
        (SECONDS_PER_DAY + self.sample_interval_s - 1) / self.sample_interval_s
    }
}

/// A polyline parameterised by arc length.
struct Polyline {
    points: Vec<GeoPoint>,
    /// Cumulative length at each vertex.
    cumulative: Vec<f64>,
}

impl Polyline {
    fn new(points: &[GeoPoint]) -> Self {
        let mut cumulative = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in points.windows(2) {
            acc += haversine_distance(&w[0], &w[1]);
            cumulative.push(acc);
        }
        Self {
            points: points.to_vec(),
            cumulative,
        }
    }

    fn length(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    fn at(&self, s: f64) -> GeoPoint {
        let s = s.clamp(0.0, self.length());
        let seg = match self.cumulative.partition_point(|&c| c <= s) {
            0 => 0,
            i => (i - 1).min(self.points.len() - 2),
        };
        let (a, b) = (self.points[seg], self.points[seg + 1]);
        let span = self.cumulative[seg + 1] - self.cumulative[seg];
        let f = if span > 0.0 {
            (s - self.cumulative[seg]) / span
        } else {
            0.0
        };
        GeoPoint::new(
            a.lat() + f * (b.lat() - a.lat()),
            a.lon() + f * (b.lon() - a.lon()),
        )
        .expect("interpolation between valid points stays valid")
    }
}

/// Shuttles back and forth along `route` at constant speed, sampling every
/// `sample_interval_s` from midnight. Each day restarts at the route's first
/// point, so every day repeats the first one shifted by 86,400 s.
pub fn gen_fixed_route(
    route: &[GeoPoint],
    spec: &FleetSpec,
    vehicle_id: VehicleId,
) -> Result<Vec<MobilityRecord>> {
    spec.validate()?;
    if route.len() < 2 {
        return Err(Error::InvalidFleet(
            "a route needs at least two points".into(),
        ));
    }
    if let Some(p) = route.iter().find(|p| !spec.extent.contains(p)) {
        return Err(Error::InvalidFleet(format!(
            "route point ({}, {}) lies outside the extent",
            p.lat(),
            p.lon()
        )));
    }
    let line = Polyline::new(route);
    let length = line.length();
    if length <= 0.0 {
        return Err(Error::InvalidFleet("route has zero length".into()));
    }

    let day: Vec<(i64, GeoPoint)> = (0..spec.samples_per_day())
        .map(|k| {
            let t = k * spec.sample_interval_s;
            let s = (spec.speed_mps * t as f64) % (2.0 * length);
            let along = if s <= length { s } else { 2.0 * length - s };
            (t, line.at(along))
        })
        .collect();

    let mut out = Vec::with_capacity(day.len() * spec.days as usize);
    for d in 0..spec.days as i64 {
        out.extend(day.iter().map(|&(t, location)| MobilityRecord {
            vehicle_id,
            timestamp: d * SECONDS_PER_DAY + t,
            location,
        }));
    }
    Ok(out)
}

/// Local planar frame around the extent's center: meters east/north.
struct Frame {
    extent: BoundingBox,
    m_per_lon: f64,
}

impl Frame {
    fn new(extent: BoundingBox) -> Self {
        Self {
            extent,
            m_per_lon: METERS_PER_DEGREE * extent.center().lat().to_radians().cos(),
        }
    }

    fn size(&self) -> (f64, f64) {
        (
            self.extent.width() * self.m_per_lon,
            self.extent.height() * METERS_PER_DEGREE,
        )
    }

    fn to_point(&self, x: f64, y: f64) -> GeoPoint {
        let (w, h) = self.size();
        let lon = self.extent.min_lon + x.clamp(0.0, w) / self.m_per_lon;
        let lat = self.extent.min_lat + y.clamp(0.0, h) / METERS_PER_DEGREE;
        GeoPoint::new(
            lat.clamp(self.extent.min_lat, self.extent.max_lat),
            lon.clamp(self.extent.min_lon, self.extent.max_lon),
        )
        .expect("clamped to a valid extent")
    }
}

/// Random-waypoint walk: head in a straight line toward a uniformly drawn
/// waypoint at constant speed, draw the next on arrival. Samples run
/// continuously for `spec.days` days from t = 0.
pub fn gen_random_walk(
    extent: &BoundingBox,
    spec: &FleetSpec,
    vehicle_id: VehicleId,
    seed: u64,
) -> Result<Vec<MobilityRecord>> {
    spec.validate()?;
    if extent.is_degenerate() {
        return Err(Error::InvalidFleet(
            "extent has zero width or height".into(),
        ));
    }
    let frame = Frame::new(*extent);
    let (w, h) = frame.size();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| (rng.gen_range(0.0..=w), rng.gen_range(0.0..=h));

    let mut pos = draw(&mut rng);
    let mut target = draw(&mut rng);
    let step = spec.speed_mps * spec.sample_interval_s as f64;
    let total = spec.samples_per_day() * spec.days as i64;
    let mut out = Vec::with_capacity(total as usize);
    for k in 0..total {
        out.push(MobilityRecord {
            vehicle_id,
            timestamp: k * spec.sample_interval_s,
            location: frame.to_point(pos.0, pos.1),
        });
        let mut remaining = step;
        loop {
            let (dx, dy) = (target.0 - pos.0, target.1 - pos.1);
            let dist = dx.hypot(dy);
            if dist > remaining {
                pos = (pos.0 + dx / dist * remaining, pos.1 + dy / dist * remaining);
                break;
            }
            remaining -= dist;
            pos = target;
            target = draw(&mut rng);
        }
    }
    Ok(out)
}

/// Per-vehicle seed derived from the fleet seed (SplitMix64 finalizer).
pub fn derive_seed(fleet_seed: u64, vehicle_id: VehicleId) -> u64 {
    let mut z = fleet_seed
        ^ vehicle_id
            .wrapping_add(1)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// East-west route across the extent for fixed-route vehicle `i` of `n`,
/// at evenly spaced latitudes.
pub fn fixed_route_line(extent: &BoundingBox, i: usize, n: usize) -> Vec<GeoPoint> {
    let lat = extent.min_lat + (i as f64 + 0.5) / n as f64 * extent.height();
    vec![
        GeoPoint::new(lat, extent.min_lon).expect("inside extent"),
        GeoPoint::new(lat, extent.max_lon).expect("inside extent"),
    ]
}

/// Whole fleet: ids `0..fixed` are fixed-route, the rest random-walk.
pub fn gen_fleet(spec: &FleetSpec) -> Result<Vec<MobilityRecord>> {
    spec.validate()?;
    let mut out = Vec::new();
    for i in 0..spec.fixed_route_count {
        let route = fixed_route_line(&spec.extent, i, spec.fixed_route_count);
        out.extend(gen_fixed_route(&route, spec, i as VehicleId)?);
    }
    for j in 0..spec.random_route_count {
        let v = (spec.fixed_route_count + j) as VehicleId;
        out.extend(gen_random_walk(
            &spec.extent,
            spec,
            v,
            derive_seed(spec.seed, v),
        )?);
    }
    Ok(out)
}
