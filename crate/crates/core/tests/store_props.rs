use std::collections::BTreeMap;

use fleet_select::{
    build_coverage, haversine_distance, ingest, make_grid, BoundingBox, CoverageCell, GeoPoint,
    IndexedRecord, MobilityRecord, MobilityStore, StoreConfig, Stratification,
};
use proptest::prelude::*;

/// Records clustered around `anchor` so colocations actually happen.
fn records_near(anchor: (f64, f64), spread_deg: f64) -> impl Strategy<Value = Vec<MobilityRecord>> {
    prop::collection::vec((0u64..6, 0i64..20_000, -1.0..1.0f64, -1.0..1.0f64), 0..300).prop_map(
        move |rows| {
            rows.into_iter()
                .map(|(v, t, dy, dx)| {
                    let lat = (anchor.0 + dy * spread_deg).clamp(-90.0, 90.0);
                    let mut lon = anchor.1 + dx * spread_deg;
                    if lon >= 180.0 {
                        lon -= 360.0;
                    } else if lon < -180.0 {
                        lon += 360.0;
                    }
                    MobilityRecord {
                        vehicle_id: v,
                        timestamp: t,
                        location: GeoPoint::new(lat, lon).unwrap(),
                    }
                })
                .collect()
        },
    )
}

/// Ordinary mid-latitude places, the antimeridian, and the poles.
fn anchor() -> impl Strategy<Value = (f64, f64)> {
    prop_oneof![
        (-60.0..60.0f64, -170.0..170.0f64),
        (-60.0..60.0f64, prop_oneof![Just(179.999), Just(-179.999)]),
        (prop_oneof![Just(89.999), Just(-89.999)], -180.0..180.0f64),
    ]
}

fn config() -> impl Strategy<Value = StoreConfig> {
    (
        60i64..7200,
        0i64..5000,
        1usize..=9,
        1.0..20_000.0f64,
        0i64..2000,
    )
        .prop_map(|(g, epoch, p, r, rt)| StoreConfig {
            temporal_granularity_s: g,
            epoch,
            index_geohash_precision: p,
            colocation_spatial_radius_m: r,
            colocation_temporal_radius_s: rt,
        })
}

fn world_grid() -> Stratification {
    make_grid(
        BoundingBox::new(-180.0, -90.0, 179.999_999, 90.0).unwrap(),
        200_000.0,
    )
    .unwrap()
}

fn store(records: &[MobilityRecord], cfg: StoreConfig) -> MobilityStore {
    ingest(records, &world_grid(), cfg).unwrap()
}

fn scan(s: &MobilityStore, center: &GeoPoint, t: i64) -> Vec<IndexedRecord> {
    let cfg = s.config();
    let mut out: Vec<IndexedRecord> = s
        .records()
        .iter()
        .filter(|r| {
            (r.timestamp - t).abs() <= cfg.colocation_temporal_radius_s
                && haversine_distance(&r.location, center) <= cfg.colocation_spatial_radius_m
        })
        .copied()
        .collect();
    out.sort_by_key(|r| (r.timestamp, r.vehicle_id));
    out
}

fn same_records(a: &[IndexedRecord], b: &[IndexedRecord]) -> bool {
    let key = |r: &IndexedRecord| {
        (
            r.timestamp,
            r.vehicle_id,
            r.location.lat().to_bits(),
            r.location.lon().to_bits(),
        )
    };
    let (mut ka, mut kb): (Vec<_>, Vec<_>) =
        (a.iter().map(key).collect(), b.iter().map(key).collect());
    ka.sort_unstable();
    kb.sort_unstable();
    ka == kb
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn index_matches_linear_scan(
        (a, records, spread) in anchor().prop_flat_map(|a| {
            let spread = 0.05;
            (Just(a), records_near(a, spread), Just(spread))
        }),
        cfg in config(),
        queries in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, 0i64..20_000), 1..12),
    ) {
        let s = store(&records, cfg);
        for (dy, dx, t) in queries {
            let lat = (a.0 + dy * spread).clamp(-90.0, 90.0);
            let lon = (a.1 + dx * spread).clamp(-180.0, 179.999_999);
            let center = GeoPoint::new(lat, lon).unwrap();
            let got = s.find_colocations(&center, t);
            prop_assert!(got.windows(2).all(|w| (w[0].timestamp, w[0].vehicle_id) <= (w[1].timestamp, w[1].vehicle_id)));
            prop_assert!(same_records(&got, &scan(&s, &center, t)));
        }
        // every record finds itself
        for r in s.records().iter().take(20) {
            prop_assert!(s.find_colocations(&r.location, r.timestamp).contains(r));
        }
    }

    #[test]
    fn pairwise_counts_match_definition(records in records_near((45.0, 7.0), 0.002), cfg in config()) {
        let s = store(&records, cfg);
        let mut naive: BTreeMap<(u64, u64), u64> = BTreeMap::new();
        for a in s.records() {
            for b in s.records() {
                if a.vehicle_id < b.vehicle_id
                    && (a.timestamp - b.timestamp).abs() <= cfg.colocation_temporal_radius_s
                    && haversine_distance(&a.location, &b.location) <= cfg.colocation_spatial_radius_m
                {
                    *naive.entry((a.vehicle_id, b.vehicle_id)).or_default() += 1;
                }
            }
        }
        prop_assert_eq!(&s.pairwise_colocation_counts(), &naive);
        for (&(a, b), &n) in &naive {
            prop_assert_eq!(s.count_pairwise_colocations(a, b).unwrap(), n);
            prop_assert_eq!(s.count_pairwise_colocations(b, a).unwrap(), n);
        }
    }

    #[test]
    fn coverage_sets_match_records(records in records_near((10.0, 10.0), 1.0), cfg in config()) {
        let s = store(&records, cfg);
        let m = build_coverage(&s);
        let world = world_grid();
        let mut want: BTreeMap<u64, Vec<CoverageCell>> = BTreeMap::new();
        for r in &records {
            let cells = want.entry(r.vehicle_id).or_default();
            if let Some(id) = world.assign_stratum(&r.location) {
                cells.push(CoverageCell::new(id, cfg.interval_of(r.timestamp)));
            }
        }
        prop_assert_eq!(m.len(), want.len());
        for (v, mut cells) in want {
            cells.sort();
            cells.dedup();
            prop_assert_eq!(m.cells_of(v).unwrap(), cells);
            prop_assert_eq!(m.record_count(v), Some(records.iter().filter(|r| r.vehicle_id == v).count() as u64));
        }
    }

    #[test]
    fn ingest_is_order_independent(records in records_near((0.0, 0.0), 0.01), cfg in config()) {
        let mut reversed = records.clone();
        reversed.reverse();
        let (a, b) = (store(&records, cfg), store(&reversed, cfg));
        prop_assert_eq!(a.records(), b.records());
    }
}
