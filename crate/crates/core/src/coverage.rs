//! Per-vehicle coverage sets over (stratum, interval) cells, cell weights,
//! the Percentage Coverage metric and the train/test holdout harness.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{MobilityRecord, MobilityStore, VehicleId};
use crate::strata::StratumId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CoverageCell {
    pub stratum_id: StratumId,
    pub interval_id: i64,
}

impl CoverageCell {
    pub fn new(stratum_id: StratumId, interval_id: i64) -> Self {
        Self {
            stratum_id,
            interval_id,
        }
    }
}

/// Coverage sets for a fleet. Cells are interned into a sorted universe and
/// each vehicle holds a sorted list of universe indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoverageMatrix {
    universe: Vec<CoverageCell>,
    vehicle_ids: Vec<VehicleId>,
    sets: Vec<Vec<u32>>,
    record_counts: Vec<u64>,
}

impl CoverageMatrix {
    /// Build from explicit `(vehicle, cells, record_count)` entries. Duplicate
    /// cells collapse; a vehicle listed twice is merged.
    pub fn from_sets<I, C>(entries: I) -> Self
    where
        I: IntoIterator<Item = (VehicleId, C, u64)>,
        C: IntoIterator<Item = CoverageCell>,
    {
        let mut by_vehicle: BTreeMap<VehicleId, (BTreeSet<CoverageCell>, u64)> = BTreeMap::new();
        for (v, cells, count) in entries {
            let e = by_vehicle.entry(v).or_default();
            e.0.extend(cells);
            e.1 += count;
        }
        let universe: Vec<CoverageCell> = by_vehicle
            .values()
            .flat_map(|(cells, _)| cells.iter().copied())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let position: HashMap<CoverageCell, u32> = universe
            .iter()
            .enumerate()
            .map(|(i, c)| (*c, i as u32))
            .collect();
        let mut m = CoverageMatrix {
            universe,
            ..Default::default()
        };
        for (v, (cells, count)) in by_vehicle {
            m.vehicle_ids.push(v);
            // BTreeSet order matches universe order, so indices come out sorted.
            m.sets.push(cells.iter().map(|c| position[c]).collect());
            m.record_counts.push(count);
        }
        m
    }

    pub fn universe(&self) -> &[CoverageCell] {
        &self.universe
    }

    pub fn universe_size(&self) -> usize {
        self.universe.len()
    }

    /// Vehicle ids, ascending.
    pub fn vehicle_ids(&self) -> &[VehicleId] {
        &self.vehicle_ids
    }

    pub fn len(&self) -> usize {
        self.vehicle_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicle_ids.is_empty()
    }

    pub fn position(&self, vehicle: VehicleId) -> Option<usize> {
        self.vehicle_ids.binary_search(&vehicle).ok()
    }

    /// Universe indices covered by the vehicle at `position`.
    pub fn set_at(&self, position: usize) -> &[u32] {
        &self.sets[position]
    }

    pub fn record_count_at(&self, position: usize) -> u64 {
        self.record_counts[position]
    }

    pub fn record_count(&self, vehicle: VehicleId) -> Option<u64> {
        self.position(vehicle).map(|i| self.record_counts[i])
    }

    pub fn cells_of(&self, vehicle: VehicleId) -> Result<Vec<CoverageCell>> {
        let i = self
            .position(vehicle)
            .ok_or(Error::UnknownVehicle(vehicle))?;
        Ok(self.sets[i]
            .iter()
            .map(|&c| self.universe[c as usize])
            .collect())
    }

    pub fn to_export(&self) -> CoverageExport {
        CoverageExport {
            universe_size: self.universe.len(),
            vehicles: self
                .vehicle_ids
                .iter()
                .zip(&self.sets)
                .map(|(&v, set)| {
                    let cells = set
                        .iter()
                        .map(|&c| {
                            let cell = self.universe[c as usize];
                            (cell.stratum_id, cell.interval_id)
                        })
                        .collect();
                    (v, cells)
                })
                .collect(),
            record_counts: self
                .vehicle_ids
                .iter()
                .copied()
                .zip(self.record_counts.iter().copied())
                .collect(),
        }
    }

    pub fn from_export(export: &CoverageExport) -> Result<Self> {
        let m = CoverageMatrix::from_sets(export.vehicles.iter().map(|(&v, cells)| {
            let count = export.record_counts.get(&v).copied().unwrap_or(0);
            (
                v,
                cells
                    .iter()
                    .map(|&(s, t)| CoverageCell::new(s, t))
                    .collect::<Vec<_>>(),
                count,
            )
        }));
        if let Some(v) = export
            .record_counts
            .keys()
            .find(|v| !export.vehicles.contains_key(v))
        {
            return Err(Error::InvalidConfig(format!(
                "record count given for vehicle {v} with no coverage entry"
            )));
        }
        if m.universe_size() != export.universe_size {
            return Err(Error::InvalidConfig(format!(
                "coverage export declares universe size {} but its cells union to {}",
                export.universe_size,
                m.universe_size()
            )));
        }
        Ok(m)
    }
}

/// Serialized coverage: vehicle id -> list of `[stratum_id, interval_id]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageExport {
    pub universe_size: usize,
    pub vehicles: BTreeMap<VehicleId, Vec<(StratumId, i64)>>,
    #[serde(default)]
    pub record_counts: BTreeMap<VehicleId, u64>,
}

/// Per-cell weights; cells without an explicit entry weigh `default`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    weights: HashMap<CoverageCell, f64>,
    default: f64,
}

impl Default for WeightMap {
    fn default() -> Self {
        Self::uniform()
    }
}

impl WeightMap {
    pub fn uniform() -> Self {
        Self {
            weights: HashMap::new(),
            default: 1.0,
        }
    }

    pub fn new(weights: impl IntoIterator<Item = (CoverageCell, f64)>) -> Result<Self> {
        let mut map = HashMap::new();
        for (cell, w) in weights {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::NegativeWeight {
                    stratum_id: cell.stratum_id,
                    interval_id: cell.interval_id,
                    weight: w,
                });
            }
            map.insert(cell, w);
        }
        Ok(Self {
            weights: map,
            default: 1.0,
        })
    }

    pub fn get(&self, cell: &CoverageCell) -> f64 {
        self.weights.get(cell).copied().unwrap_or(self.default)
    }

    pub fn is_uniform(&self) -> bool {
        self.weights.values().all(|&w| w == self.default)
    }

    /// Explicit entries, sorted by cell.
    pub fn entries(&self) -> Vec<(CoverageCell, f64)> {
        let mut e: Vec<_> = self.weights.iter().map(|(c, w)| (*c, *w)).collect();
        e.sort_by_key(|a| a.0);
        e
    }

    /// Weights aligned with a matrix's universe.
    pub fn dense(&self, m: &CoverageMatrix) -> Vec<f64> {
        m.universe().iter().map(|c| self.get(c)).collect()
    }
}

/// Coverage sets from an ingested store; records outside every stratum add nothing.
pub fn build_coverage(store: &MobilityStore) -> CoverageMatrix {
    CoverageMatrix::from_sets(store.vehicle_ids().map(|v| {
        let records = store.vehicle_records(v);
        let cells: Vec<CoverageCell> = records
            .iter()
            .filter_map(|r| r.stratum_id.map(|s| CoverageCell::new(s, r.interval_id)))
            .collect();
        (v, cells, records.len() as u64)
    }))
}

pub fn union_coverage(
    m: &CoverageMatrix,
    vehicles: &[VehicleId],
) -> Result<BTreeSet<CoverageCell>> {
    let mut out = BTreeSet::new();
    for &v in vehicles {
        let i = m.position(v).ok_or(Error::UnknownVehicle(v))?;
        out.extend(m.set_at(i).iter().map(|&c| m.universe()[c as usize]));
    }
    Ok(out)
}

pub fn weighted_value<'a>(cells: impl IntoIterator<Item = &'a CoverageCell>, w: &WeightMap) -> f64 {
    cells.into_iter().map(|c| w.get(c)).sum()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageMetric {
    /// Distinct cells covered by the selection over distinct cells covered by the fleet.
    #[default]
    Union,
    /// Sum of per-vehicle set sizes, so a cell visited by two selected vehicles
    /// counts twice.
    Multiplicity,
}

/// `100 * |cells(selected)| / |cells(all vehicles)|`, 0 for an empty universe.
/// Ids not present in `m` contribute nothing.
pub fn percentage_coverage(m: &CoverageMatrix, selected: &[VehicleId]) -> f64 {
    percentage_coverage_with(m, selected, CoverageMetric::Union)
}

pub fn percentage_coverage_with(
    m: &CoverageMatrix,
    selected: &[VehicleId],
    metric: CoverageMetric,
) -> f64 {
    let positions: BTreeSet<usize> = selected.iter().filter_map(|&v| m.position(v)).collect();
    let (num, den) = match metric {
        CoverageMetric::Union => {
            let mut covered = vec![false; m.universe_size()];
            for &p in &positions {
                for &c in m.set_at(p) {
                    covered[c as usize] = true;
                }
            }
            (covered.iter().filter(|&&c| c).count(), m.universe_size())
        }
        CoverageMetric::Multiplicity => (
            positions.iter().map(|&p| m.set_at(p).len()).sum(),
            (0..m.len()).map(|p| m.set_at(p).len()).sum(),
        ),
    };
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Records before `boundary` train, the rest test; input order kept in each half.
pub fn holdout_split(
    records: &[MobilityRecord],
    boundary: i64,
) -> (Vec<MobilityRecord>, Vec<MobilityRecord>) {
    records.iter().partition(|r| r.timestamp < boundary)
}

/// Percentage Coverage of `selected` on the test period.
pub fn evaluate_selection(
    train: &MobilityStore,
    test: &MobilityStore,
    selected: &[VehicleId],
) -> Result<f64> {
    let (a, b) = (train.config(), test.config());
    if a.temporal_granularity_s != b.temporal_granularity_s || a.epoch != b.epoch {
        return Err(Error::InvalidConfig(
            "train and test stores use different temporal granularity or epoch".into(),
        ));
    }
    Ok(percentage_coverage(&build_coverage(test), selected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{BoundingBox, GeoPoint};
    use crate::store::{ingest, StoreConfig};
    use crate::strata::make_grid;

    pub(crate) fn abcde() -> CoverageMatrix {
        let c = |s| CoverageCell::new(s, 0);
        CoverageMatrix::from_sets(vec![
            (1, vec![c(0), c(1), c(2)], 10),
            (2, vec![c(2), c(3)], 3),
            (3, vec![c(3), c(4)], 8),
        ])
    }

    #[test]
    fn union_examples() {
        let m = abcde();
        assert!(union_coverage(&m, &[]).unwrap().is_empty());
        assert_eq!(union_coverage(&m, &[1]).unwrap().len(), 3);
        let u: Vec<_> = union_coverage(&m, &[1, 2])
            .unwrap()
            .into_iter()
            .map(|c| c.stratum_id)
            .collect();
        assert_eq!(u, vec![0, 1, 2, 3]);
        assert!(matches!(
            union_coverage(&m, &[4]),
            Err(Error::UnknownVehicle(4))
        ));
    }

    #[test]
    fn weighted_values() {
        let x = CoverageCell::new(1, 1);
        let y = CoverageCell::new(2, 1);
        let z = CoverageCell::new(3, 1);
        assert_eq!(weighted_value(&[], &WeightMap::uniform()), 0.0);
        assert_eq!(weighted_value(&[x, y, z], &WeightMap::uniform()), 3.0);
        let w = WeightMap::new([(x, 2.5)]).unwrap();
        assert_eq!(weighted_value(&[x, y], &w), 3.5);
        assert!(WeightMap::new([(x, -1.0)]).is_err());
        assert!(WeightMap::new([(x, f64::NAN)]).is_err());
    }

    #[test]
    fn percentage_examples() {
        let m = abcde();
        assert_eq!(percentage_coverage(&m, &[1, 2, 3]), 100.0);
        assert_eq!(percentage_coverage(&m, &[]), 0.0);
        assert_eq!(percentage_coverage(&m, &[2]), 40.0);
        let two = CoverageMatrix::from_sets(vec![
            (
                1,
                vec![
                    CoverageCell::new(0, 0),
                    CoverageCell::new(1, 0),
                    CoverageCell::new(2, 0),
                ],
                1,
            ),
            (2, vec![CoverageCell::new(2, 0), CoverageCell::new(3, 0)], 1),
        ]);
        assert_eq!(percentage_coverage(&two, &[2]), 50.0);
        assert_eq!(percentage_coverage(&two, &[2, 99]), 50.0);
        assert_eq!(percentage_coverage(&CoverageMatrix::default(), &[]), 0.0);
    }

    #[test]
    fn multiplicity_metric_double_counts() {
        let m = abcde();
        // sizes 3 + 2 + 2 = 7; {1, 2} -> 5 / 7
        let p = percentage_coverage_with(&m, &[1, 2], CoverageMetric::Multiplicity);
        assert!((p - 500.0 / 7.0).abs() < 1e-12);
        assert_eq!(
            percentage_coverage_with(&m, &[1, 2], CoverageMetric::Union),
            80.0
        );
    }

    fn grid_store(records: &[MobilityRecord]) -> MobilityStore {
        let g = make_grid(
            BoundingBox::new(0.0, 0.0, 0.0179931, 0.0179931).unwrap(),
            1000.0,
        )
        .unwrap();
        ingest(records, &g, StoreConfig::default()).unwrap()
    }

    fn rec(v: u64, t: i64, lat: f64, lon: f64) -> MobilityRecord {
        MobilityRecord {
            vehicle_id: v,
            timestamp: t,
            location: GeoPoint::new(lat, lon).unwrap(),
        }
    }

    #[test]
    fn build_dedups_and_skips_out_of_extent() {
        let store = grid_store(&[
            rec(1, 0, 0.001, 0.001),
            rec(1, 60, 0.002, 0.002),
            rec(1, 120, 0.003, 0.001),
            rec(2, 0, 0.001, 0.001),
            rec(2, 0, 0.015, 0.015),
            rec(2, 7200, 0.001, 0.001),
            rec(2, 7300, 0.015, 0.015),
            rec(3, 0, 1.0, 1.0),
        ]);
        let m = build_coverage(&store);
        assert_eq!(m.vehicle_ids(), &[1, 2, 3]);
        assert_eq!(m.cells_of(1).unwrap().len(), 1);
        assert_eq!(m.cells_of(2).unwrap().len(), 4);
        assert!(m.cells_of(3).unwrap().is_empty());
        assert_eq!(m.record_count(3), Some(1));
        assert_eq!(m.universe_size(), 4);
    }

    #[test]
    fn export_roundtrip_and_validation() {
        let m = abcde();
        let json = serde_json::to_string(&m.to_export()).unwrap();
        let back: CoverageExport = serde_json::from_str(&json).unwrap();
        assert_eq!(CoverageMatrix::from_export(&back).unwrap(), m);

        let mut bad = m.to_export();
        bad.universe_size = 9;
        assert!(CoverageMatrix::from_export(&bad).is_err());
    }

    #[test]
    fn split_examples() {
        let rs = vec![
            rec(1, 10, 0.0, 0.0),
            rec(2, 20, 0.0, 0.0),
            rec(1, 30, 0.0, 0.0),
        ];
        let (train, test) = holdout_split(&rs, 100);
        assert_eq!((train.len(), test.len()), (3, 0));
        let (train, test) = holdout_split(&rs, 20);
        assert_eq!(train, vec![rs[0]]);
        assert_eq!(test, vec![rs[1], rs[2]]);
    }

    #[test]
    fn evaluate_on_test_half() {
        let train = grid_store(&[rec(1, 0, 0.001, 0.001), rec(9, 0, 0.001, 0.001)]);
        let test = grid_store(&[rec(1, 7200, 0.001, 0.001), rec(2, 7200, 0.015, 0.015)]);
        assert_eq!(evaluate_selection(&train, &test, &[1, 2]).unwrap(), 100.0);
        assert_eq!(evaluate_selection(&train, &test, &[1]).unwrap(), 50.0);
        assert_eq!(evaluate_selection(&train, &test, &[9]).unwrap(), 0.0);

        let g = make_grid(
            BoundingBox::new(0.0, 0.0, 0.0179931, 0.0179931).unwrap(),
            1000.0,
        )
        .unwrap();
        let other = ingest(
            &[],
            &g,
            StoreConfig {
                temporal_granularity_s: 3600,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(evaluate_selection(&train, &other, &[1]).is_err());
    }
}
