//! Geodesy primitives: validated points, bounding boxes, haversine distance
//! and geohash encoding.
//!
//! Geohashes use the common variant: bits alternate starting with longitude,
//! five bits per base32 character.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Length in meters of one degree of arc on the mean-radius sphere.
pub const METERS_PER_DEGREE: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

pub const GEOHASH_MAX_PRECISION: usize = 12;

const BASE32: &[u8; 32] = b"0123456789bcdefghjkmnpqrstuvwxyz";

/// A WGS84-style latitude/longitude pair in degrees.
///
/// Longitude `180` is folded onto `-180` so every point has one representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) {
            return Err(Error::LatitudeOutOfRange(lat));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(Error::LongitudeOutOfRange(lon));
        }
        let lon = if lon == 180.0 { -180.0 } else { lon };
        Ok(Self { lat, lon })
    }

    #[inline]
    pub fn lat(&self) -> f64 {
        self.lat
    }

    #[inline]
    pub fn lon(&self) -> f64 {
        self.lon
    }
}

impl<'de> Deserialize<'de> for GeoPoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            lat: f64,
            lon: f64,
        }
        let raw = Raw::deserialize(d)?;
        GeoPoint::new(raw.lat, raw.lon).map_err(serde::de::Error::custom)
    }
}

/// Axis-aligned box in degrees. Containment is closed on all sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BoundingBox {
    pub fn new(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Result<Self> {
        let all = [min_lon, min_lat, max_lon, max_lat];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBoundingBox("non-finite coordinate".into()));
        }
        if min_lon > max_lon || min_lat > max_lat {
            return Err(Error::InvalidBoundingBox(format!(
                "[{min_lon}, {min_lat}, {max_lon}, {max_lat}] has min > max"
            )));
        }
        if !(-90.0..=90.0).contains(&min_lat) || !(-90.0..=90.0).contains(&max_lat) {
            return Err(Error::InvalidBoundingBox(
                "latitude outside [-90, 90]".into(),
            ));
        }
        if !(-180.0..=180.0).contains(&min_lon) || !(-180.0..=180.0).contains(&max_lon) {
            return Err(Error::InvalidBoundingBox(
                "longitude outside [-180, 180]".into(),
            ));
        }
        Ok(Self {
            min_lon,
            min_lat,
            max_lon,
            max_lat,
        })
    }

    pub fn width(&self) -> f64 {
        self.max_lon - self.min_lon
    }

    pub fn height(&self) -> f64 {
        self.max_lat - self.min_lat
    }

    pub fn is_degenerate(&self) -> bool {
        self.width() <= 0.0 || self.height() <= 0.0
    }

    pub fn contains(&self, p: &GeoPoint) -> bool {
        p.lon >= self.min_lon
            && p.lon <= self.max_lon
            && p.lat >= self.min_lat
            && p.lat <= self.max_lat
    }

    pub fn center(&self) -> GeoPoint {
        GeoPoint {
            lat: (self.min_lat + self.max_lat) / 2.0,
            lon: (self.min_lon + self.max_lon) / 2.0,
        }
    }

    /// Smallest box containing both.
    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            min_lon: self.min_lon.min(other.min_lon),
            min_lat: self.min_lat.min(other.min_lat),
            max_lon: self.max_lon.max(other.max_lon),
            max_lat: self.max_lat.max(other.max_lat),
        }
    }

    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.min_lon <= other.max_lon
            && other.min_lon <= self.max_lon
            && self.min_lat <= other.max_lat
            && other.min_lat <= self.max_lat
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        BoundingBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.min_lon, b.min_lat, b.max_lon, b.max_lat]
    }
}

/// Great-circle distance in meters on the mean-radius sphere.
pub fn haversine_distance(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// A geohash cell, stored as its interleaved bit string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Geohash {
    bits: u64,
    precision: u8,
}

impl Geohash {
    pub fn precision(&self) -> usize {
        self.precision as usize
    }

    /// The raw interleaved bits, `5 * precision` of them, right-aligned.
    pub fn bits(&self) -> u64 {
        self.bits
    }

    /// Column and row of this cell in the regular lon/lat grid at its precision.
    pub fn grid_index(&self) -> (u64, u64) {
        let total = 5 * self.precision as u32;
        let (mut lon, mut lat) = (0u64, 0u64);
        for i in 0..total {
            let bit = (self.bits >> (total - 1 - i)) & 1;
            if i % 2 == 0 {
                lon = (lon << 1) | bit;
            } else {
                lat = (lat << 1) | bit;
            }
        }
        (lon, lat)
    }

    /// Inverse of [`Geohash::grid_index`].
    pub fn from_grid_index(lon_idx: u64, lat_idx: u64, precision: usize) -> Result<Self> {
        check_precision(precision)?;
        let total = 5 * precision as u32;
        let (lon_bits, lat_bits) = grid_bits(precision);
        if lon_idx >> lon_bits != 0 || lat_idx >> lat_bits != 0 {
            return Err(Error::InvalidBoundingBox(format!(
                "grid index ({lon_idx}, {lat_idx}) out of range at precision {precision}"
            )));
        }
        let mut bits = 0u64;
        let (mut lo, mut la) = (lon_bits, lat_bits);
        for i in 0..total {
            let bit = if i % 2 == 0 {
                lo -= 1;
                (lon_idx >> lo) & 1
            } else {
                la -= 1;
                (lat_idx >> la) & 1
            };
            bits = (bits << 1) | bit;
        }
        Ok(Self {
            bits,
            precision: precision as u8,
        })
    }
}

impl fmt::Display for Geohash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.precision as u32;
        let mut s = String::with_capacity(p as usize);
        for i in 0..p {
            let idx = (self.bits >> (5 * (p - 1 - i))) & 0b11111;
            s.push(BASE32[idx as usize] as char);
        }
        f.write_str(&s)
    }
}

impl FromStr for Geohash {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        check_precision(s.chars().count())?;
        let mut bits = 0u64;
        for c in s.chars() {
            let idx = BASE32
                .iter()
                .position(|&b| b as char == c)
                .ok_or(Error::GeohashChar(c))?;
            bits = (bits << 5) | idx as u64;
        }
        Ok(Self {
            bits,
            precision: s.len() as u8,
        })
    }
}

fn check_precision(precision: usize) -> Result<()> {
    if (1..=GEOHASH_MAX_PRECISION).contains(&precision) {
        Ok(())
    } else {
        Err(Error::GeohashPrecision(precision))
    }
}

/// Number of longitude and latitude bits at a precision.
pub fn grid_bits(precision: usize) -> (u32, u32) {
    let total = 5 * precision as u32;
    (total.div_ceil(2), total / 2)
}

/// Cell width and height in degrees at a precision.
pub fn cell_size_degrees(precision: usize) -> (f64, f64) {
    let (lon_bits, lat_bits) = grid_bits(precision);
    (
        360.0 / (1u64 << lon_bits) as f64,
        180.0 / (1u64 << lat_bits) as f64,
    )
}

pub fn geohash_encode(p: &GeoPoint, precision: usize) -> Result<Geohash> {
    check_precision(precision)?;
    let (mut lon_lo, mut lon_hi) = (-180.0f64, 180.0f64);
    let (mut lat_lo, mut lat_hi) = (-90.0f64, 90.0f64);
    let mut bits = 0u64;
    for i in 0..5 * precision {
        let bit = if i % 2 == 0 {
            let mid = (lon_lo + lon_hi) / 2.0;
            if p.lon >= mid {
                lon_lo = mid;
                1
            } else {
                lon_hi = mid;
                0
            }
        } else {
            let mid = (lat_lo + lat_hi) / 2.0;
            if p.lat >= mid {
                lat_lo = mid;
                1
            } else {
                lat_hi = mid;
                0
            }
        };
        bits = (bits << 1) | bit;
    }
    Ok(Geohash {
        bits,
        precision: precision as u8,
    })
}

/// The cell occupied by every point that encodes to `g`.
pub fn geohash_decode(g: &Geohash) -> BoundingBox {
    let (mut lon_lo, mut lon_hi) = (-180.0f64, 180.0f64);
    let (mut lat_lo, mut lat_hi) = (-90.0f64, 90.0f64);
    let total = 5 * g.precision as u32;
    for i in 0..total {
        let bit = (g.bits >> (total - 1 - i)) & 1;
        if i % 2 == 0 {
            let mid = (lon_lo + lon_hi) / 2.0;
            if bit == 1 {
                lon_lo = mid;
            } else {
                lon_hi = mid;
            }
        } else {
            let mid = (lat_lo + lat_hi) / 2.0;
            if bit == 1 {
                lat_lo = mid;
            } else {
                lat_hi = mid;
            }
        }
    }
    BoundingBox {
        min_lon: lon_lo,
        min_lat: lat_lo,
        max_lon: lon_hi,
        max_lat: lat_hi,
    }
}
