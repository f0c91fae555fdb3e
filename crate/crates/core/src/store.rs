//! In-memory mobility store: records tagged with stratum and interval ids,
//! bucketed by (geohash cell, interval) for spatio-temporal colocation queries.

use std::collections::{BTreeMap, HashMap};
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{
    geohash_encode, grid_bits, haversine_distance, GeoPoint, Geohash, EARTH_RADIUS_M,
    GEOHASH_MAX_PRECISION, METERS_PER_DEGREE,
};
use crate::strata::{Stratification, StratumId};

pub type VehicleId = u64;

/// One GPS ping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityRecord {
    pub vehicle_id: VehicleId,
    /// Unix seconds.
    pub timestamp: i64,
    pub location: GeoPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndexedRecord {
    pub vehicle_id: VehicleId,
    pub timestamp: i64,
    pub location: GeoPoint,
    pub stratum_id: Option<StratumId>,
    pub interval_id: i64,
}

/// A fixed reference-grade station reporting every `reporting_period_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMonitor {
    pub monitor_id: u64,
    pub location: GeoPoint,
    pub reporting_period_s: i64,
}

impl ReferenceMonitor {
    pub fn new(monitor_id: u64, location: GeoPoint, reporting_period_s: i64) -> Result<Self> {
        if reporting_period_s <= 0 {
            return Err(Error::InvalidConfig(format!(
                "monitor {monitor_id}: reporting period {reporting_period_s} s must be positive"
            )));
        }
        Ok(Self {
            monitor_id,
            location,
            reporting_period_s,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StoreConfig {
    pub temporal_granularity_s: i64,
    pub epoch: i64,
    pub index_geohash_precision: usize,
    pub colocation_spatial_radius_m: f64,
    pub colocation_temporal_radius_s: i64,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            temporal_granularity_s: 7200,
            epoch: 0,
            index_geohash_precision: 6,
            colocation_spatial_radius_m: 50.0,
            colocation_temporal_radius_s: 300,
        }
    }
}

impl StoreConfig {
    pub fn validate(&self) -> Result<()> {
        if self.temporal_granularity_s <= 0 {
            return Err(Error::InvalidConfig(
                "temporal granularity must be positive".into(),
            ));
        }
        if self.epoch < 0 {
            return Err(Error::InvalidConfig("epoch must be non-negative".into()));
        }
        if !(1..=GEOHASH_MAX_PRECISION).contains(&self.index_geohash_precision) {
            return Err(Error::GeohashPrecision(self.index_geohash_precision));
        }
        if !self.colocation_spatial_radius_m.is_finite() || self.colocation_spatial_radius_m <= 0.0
        {
            return Err(Error::InvalidConfig(
                "spatial radius must be positive".into(),
            ));
        }
        if self.colocation_temporal_radius_s <= 0 {
            return Err(Error::InvalidConfig(
                "temporal radius must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn interval_of(&self, timestamp: i64) -> i64 {
        (timestamp - self.epoch).div_euclid(self.temporal_granularity_s)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub malformed: usize,
    pub out_of_extent: usize,
}

type BucketKey = (u64, i64);

#[derive(Debug, Clone)]
pub struct MobilityStore {
    cfg: StoreConfig,
    /// Sorted by (vehicle, timestamp, lon, lat) so layout is independent of input order.
    records: Vec<IndexedRecord>,
    vehicles: BTreeMap<VehicleId, Range<usize>>,
    buckets: HashMap<BucketKey, Vec<u32>>,
    report: IngestReport,
}

/// Tag every record with its stratum and interval and build the bucket index.
///
/// Records with a negative timestamp are rejected and counted in the report.
pub fn ingest(
    records: &[MobilityRecord],
    strat: &Stratification,
    cfg: StoreConfig,
) -> Result<MobilityStore> {
    cfg.validate()?;
    let mut report = IngestReport::default();
    let mut indexed: Vec<IndexedRecord> = records
        .par_iter()
        .filter(|r| r.timestamp >= 0)
        .map(|r| IndexedRecord {
            vehicle_id: r.vehicle_id,
            timestamp: r.timestamp,
            location: r.location,
            stratum_id: strat.assign_stratum(&r.location),
            interval_id: cfg.interval_of(r.timestamp),
        })
        .collect();
    report.malformed = records.len() - indexed.len();
    report.accepted = indexed.len();
    report.out_of_extent = indexed.iter().filter(|r| r.stratum_id.is_none()).count();
    if indexed.len() > u32::MAX as usize {
        return Err(Error::InvalidConfig("more than 2^32 records".into()));
    }

    indexed.par_sort_unstable_by(|a, b| {
        (a.vehicle_id, a.timestamp)
            .cmp(&(b.vehicle_id, b.timestamp))
            .then(a.location.lon().total_cmp(&b.location.lon()))
            .then(a.location.lat().total_cmp(&b.location.lat()))
    });

    let mut vehicles = BTreeMap::new();
    let mut start = 0;
    for i in 1..=indexed.len() {
        if i == indexed.len() || indexed[i].vehicle_id != indexed[start].vehicle_id {
            vehicles.insert(indexed[start].vehicle_id, start..i);
            start = i;
        }
    }

    let mut buckets: HashMap<BucketKey, Vec<u32>> = HashMap::new();
    for (i, r) in indexed.iter().enumerate() {
        let cell = geohash_encode(&r.location, cfg.index_geohash_precision)?;
        buckets
            .entry((cell.bits(), r.interval_id))
            .or_default()
            .push(i as u32);
    }

    Ok(MobilityStore {
        cfg,
        records: indexed,
        vehicles,
        buckets,
        report,
    })
}

impl MobilityStore {
    pub fn config(&self) -> &StoreConfig {
        &self.cfg
    }

    pub fn report(&self) -> IngestReport {
        self.report
    }

    pub fn records(&self) -> &[IndexedRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Vehicle ids in ascending order.
    pub fn vehicle_ids(&self) -> impl Iterator<Item = VehicleId> + '_ {
        self.vehicles.keys().copied()
    }

    /// Records of one vehicle in time order; empty for unknown ids.
    pub fn vehicle_records(&self, vehicle: VehicleId) -> &[IndexedRecord] {
        self.vehicles
            .get(&vehicle)
            .map(|r| &self.records[r.clone()])
            .unwrap_or(&[])
    }

    fn within_radii(&self, r: &IndexedRecord, center: &GeoPoint, time: i64) -> bool {
        (r.timestamp - time).abs() <= self.cfg.colocation_temporal_radius_s
            && haversine_distance(center, &r.location) <= self.cfg.colocation_spatial_radius_m
    }

    /// Indices of records within both radii of (`center`, `time`), unordered.
    fn colocated_indices(&self, center: &GeoPoint, time: i64) -> Vec<u32> {
        let rt = self.cfg.colocation_temporal_radius_s;
        let t_lo = self.cfg.interval_of(time.saturating_sub(rt));
        let t_hi = self.cfg.interval_of(time.saturating_add(rt));
        let intervals = (t_hi - t_lo + 1) as u128;

        let cells = self.query_cells(center);
        let probes = cells
            .as_ref()
            .map_or(u128::MAX, |c| c.len() as u128 * intervals);
        let mut out = Vec::new();
        match cells {
            Some(cells) if probes <= self.buckets.len().max(64) as u128 => {
                for &cell in &cells {
                    for t in t_lo..=t_hi {
                        if let Some(bucket) = self.buckets.get(&(cell, t)) {
                            out.extend(bucket.iter().copied().filter(|&i| {
                                self.within_radii(&self.records[i as usize], center, time)
                            }));
                        }
                    }
                }
            }
            // Query box spans more buckets than exist; a scan is cheaper.
            _ => {
                out.extend(
                    (0..self.records.len() as u32)
                        .filter(|&i| self.within_radii(&self.records[i as usize], center, time)),
                );
            }
        }
        out
    }

    /// Geohash cells (as bit strings) that can hold a point within the spatial
    /// radius of `center`. `None` when the search cap reaches a pole.
    fn query_cells(&self, center: &GeoPoint) -> Option<Vec<u64>> {
        let precision = self.cfg.index_geohash_precision;
        let radius = self.cfg.colocation_spatial_radius_m;
        // Slightly inflate so rounding never drops a boundary point.
        let margin = 1.0 + 1e-9;
        let dlat = radius / METERS_PER_DEGREE * margin + 1e-12;
        let angular = radius / EARTH_RADIUS_M;
        let cos_lat = center.lat().to_radians().cos();
        if angular.sin() >= cos_lat {
            return None;
        }
        let dlon = (angular.sin() / cos_lat).asin().to_degrees() * margin + 1e-12;

        let lat_lo = (center.lat() - dlat).max(-90.0);
        let lat_hi = (center.lat() + dlat).min(90.0);
        let y0 = cell_of(center.lon(), lat_lo, precision).1;
        let y1 = cell_of(center.lon(), lat_hi, precision).1;

        let (lon_bits, _) = grid_bits(precision);
        let n_lon = 1u64 << lon_bits;
        let lon_lo = center.lon() - dlon;
        let lon_hi = center.lon() + dlon;
        let mut lon_ranges = Vec::with_capacity(2);
        if dlon >= 180.0 {
            lon_ranges.push((0, n_lon - 1));
        } else if lon_lo < -180.0 {
            lon_ranges.push((
                cell_of(lon_lo + 360.0, center.lat(), precision).0,
                n_lon - 1,
            ));
            lon_ranges.push((0, cell_of(lon_hi, center.lat(), precision).0));
        } else if lon_hi >= 180.0 {
            lon_ranges.push((cell_of(lon_lo, center.lat(), precision).0, n_lon - 1));
            lon_ranges.push((0, cell_of(lon_hi - 360.0, center.lat(), precision).0));
        } else {
            lon_ranges.push((
                cell_of(lon_lo, center.lat(), precision).0,
                cell_of(lon_hi, center.lat(), precision).0,
            ));
        }

        let count: u64 = lon_ranges.iter().map(|(a, b)| b - a + 1).sum::<u64>() * (y1 - y0 + 1);
        if count > (self.buckets.len().max(64) as u64) {
            return None;
        }
        let mut cells = Vec::with_capacity(count as usize);
        for &(x0, x1) in &lon_ranges {
            for x in x0..=x1 {
                for y in y0..=y1 {
                    let g = Geohash::from_grid_index(x, y, precision).ok()?;
                    cells.push(g.bits());
                }
            }
        }
        Some(cells)
    }

    /// All records within the spatial and temporal radii of (`center`, `time`),
    /// ordered by (timestamp, vehicle_id).
    pub fn find_colocations(&self, center: &GeoPoint, time: i64) -> Vec<IndexedRecord> {
        let mut idx = self.colocated_indices(center, time);
        idx.sort_unstable_by_key(|&i| {
            let r = &self.records[i as usize];
            (r.timestamp, r.vehicle_id, i)
        });
        idx.into_iter().map(|i| self.records[i as usize]).collect()
    }

    /// Number of (record, monitor) pairs where a record of `vehicle` lies within
    /// the radii of the monitor's nearest report instant.
    pub fn count_reference_colocations(
        &self,
        vehicle: VehicleId,
        monitors: &[ReferenceMonitor],
    ) -> u64 {
        self.vehicle_records(vehicle)
            .iter()
            .map(|r| {
                monitors
                    .iter()
                    .filter(|m| self.matches_monitor(r, m))
                    .count() as u64
            })
            .sum()
    }

    fn matches_monitor(&self, r: &IndexedRecord, m: &ReferenceMonitor) -> bool {
        let offset = r.timestamp - self.cfg.epoch;
        let period = m.reporting_period_s;
        let k = offset.div_euclid(period).max(0);
        let gap = [k, k + 1]
            .iter()
            .map(|&k| (offset - k * period).abs())
            .min()
            .unwrap_or(i64::MAX);
        gap <= self.cfg.colocation_temporal_radius_s
            && haversine_distance(&m.location, &r.location) <= self.cfg.colocation_spatial_radius_m
    }

    /// Reference colocation counts for every vehicle in the store.
    pub fn reference_colocation_counts(
        &self,
        monitors: &[ReferenceMonitor],
    ) -> BTreeMap<VehicleId, u64> {
        self.vehicles
            .keys()
            .map(|&v| (v, self.count_reference_colocations(v, monitors)))
            .collect()
    }

    /// Number of record pairs, one from each vehicle, within both radii.
    pub fn count_pairwise_colocations(&self, a: VehicleId, b: VehicleId) -> Result<u64> {
        if a == b {
            return Err(Error::SameVehicle(a));
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        Ok(self
            .vehicle_records(lo)
            .iter()
            .map(|r| {
                self.colocated_indices(&r.location, r.timestamp)
                    .into_iter()
                    .filter(|&i| self.records[i as usize].vehicle_id == hi)
                    .count() as u64
            })
            .sum())
    }

    /// Pairwise colocation counts for every vehicle pair with at least one
    /// colocation, keyed `(smaller id, larger id)`.
    pub fn pairwise_colocation_counts(&self) -> BTreeMap<(VehicleId, VehicleId), u64> {
        let partials: Vec<BTreeMap<(VehicleId, VehicleId), u64>> = self
            .vehicles
            .par_iter()
            .map(|(&lo, range)| {
                let mut local = BTreeMap::new();
                for r in &self.records[range.clone()] {
                    for i in self.colocated_indices(&r.location, r.timestamp) {
                        let other = self.records[i as usize].vehicle_id;
                        if other > lo {
                            *local.entry((lo, other)).or_insert(0) += 1;
                        }
                    }
                }
                local
            })
            .collect();
        let mut merged = BTreeMap::new();
        for part in partials {
            for (k, v) in part {
                *merged.entry(k).or_insert(0) += v;
            }
        }
        merged
    }
}

fn cell_of(lon: f64, lat: f64, precision: usize) -> (u64, u64) {
    let lon = if lon >= 180.0 {
        -180.0
    } else {
        lon.max(-180.0)
    };
    let p = GeoPoint::new(lat.clamp(-90.0, 90.0), lon).expect("clamped coordinates are valid");
    geohash_encode(&p, precision)
        .expect("precision validated by StoreConfig")
        .grid_index()
}
