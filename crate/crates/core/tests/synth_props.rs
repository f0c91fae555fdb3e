use std::collections::BTreeSet;

use fleet_select::geo::METERS_PER_DEGREE;
use fleet_select::synth::{derive_seed, fixed_route_line, SECONDS_PER_DAY};
use fleet_select::{
    gen_fixed_route, gen_fleet, gen_random_walk, ingest, make_grid, BoundingBox, FleetSpec,
    MobilityRecord, StoreConfig, Stratification,
};
use proptest::prelude::*;

fn extent(km: f64) -> BoundingBox {
    let deg = km * 1000.0 / METERS_PER_DEGREE;
    BoundingBox::new(0.0, 45.0, deg, 45.0 + deg).unwrap()
}

fn spec(seed: u64) -> FleetSpec {
    FleetSpec {
        fixed_route_count: 1,
        random_route_count: 1,
        extent: extent(5.0),
        days: 2,
        sample_interval_s: 60,
        speed_mps: 9.0,
        seed,
    }
}

/// (stratum, interval-of-day) cells of the records in `[from, from + 1 day)`.
fn day_cells(
    records: &[MobilityRecord],
    strata: &Stratification,
    granularity: i64,
    from: i64,
) -> BTreeSet<(u64, i64)> {
    let cfg = StoreConfig {
        temporal_granularity_s: granularity,
        ..Default::default()
    };
    let day: Vec<_> = records
        .iter()
        .filter(|r| (from..from + SECONDS_PER_DAY).contains(&r.timestamp))
        .copied()
        .collect();
    ingest(&day, strata, cfg)
        .unwrap()
        .records()
        .iter()
        .filter_map(|r| {
            r.stratum_id
                .map(|s| (s, (r.timestamp - from).div_euclid(granularity)))
        })
        .collect()
}

fn jaccard(a: &BTreeSet<(u64, i64)>, b: &BTreeSet<(u64, i64)>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

#[test]
fn fixed_routes_are_predictable_random_walks_are_not() {
    let strata = make_grid(spec(0).extent, 100.0).unwrap();
    let (mut fixed_sum, mut random_sum) = (0.0, 0.0);
    for seed in 0..10 {
        let s = spec(seed);
        let route = fixed_route_line(&s.extent, seed as usize, 10);
        let bus = gen_fixed_route(&route, &s, 0).unwrap();
        let taxi = gen_random_walk(&s.extent, &s, 1, derive_seed(seed, 1)).unwrap();
        let fixed = jaccard(
            &day_cells(&bus, &strata, 7200, 0),
            &day_cells(&bus, &strata, 7200, SECONDS_PER_DAY),
        );
        assert!(fixed >= 0.9, "fixed-route overlap {fixed}");
        fixed_sum += fixed;
        random_sum += jaccard(
            &day_cells(&taxi, &strata, 7200, 0),
            &day_cells(&taxi, &strata, 7200, SECONDS_PER_DAY),
        );
    }
    assert!(
        random_sum < fixed_sum,
        "random {random_sum} vs fixed {fixed_sum}"
    );
}

#[test]
fn fleet_ids_put_fixed_routes_first() {
    let s = FleetSpec {
        fixed_route_count: 3,
        random_route_count: 4,
        ..spec(9)
    };
    let records = gen_fleet(&s).unwrap();
    let ids: BTreeSet<u64> = records.iter().map(|r| r.vehicle_id).collect();
    assert_eq!(ids, (0..7).collect());
    // fixed-route vehicles repeat daily, the walkers do not
    let day = |v: u64, d: i64| -> Vec<_> {
        records
            .iter()
            .filter(|r| r.vehicle_id == v && r.timestamp / SECONDS_PER_DAY == d)
            .map(|r| r.location)
            .collect()
    };
    for v in 0..3 {
        assert_eq!(day(v, 0), day(v, 1));
    }
    for v in 3..7 {
        assert_ne!(day(v, 0), day(v, 1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fleets_are_deterministic_and_inside(seed: u64, fixed in 0usize..3, random in 0usize..3, km in 0.5..20.0f64, speed in 0.5..30.0f64) {
        let s = FleetSpec { fixed_route_count: fixed, random_route_count: random, extent: extent(km), days: 1, speed_mps: speed, ..spec(seed) };
        let a = gen_fleet(&s).unwrap();
        prop_assert_eq!(&a, &gen_fleet(&s).unwrap());
        prop_assert_eq!(a.len(), (fixed + random) * 1440);
        prop_assert!(a.iter().all(|r| s.extent.contains(&r.location)));
        prop_assert!(a.iter().all(|r| (0..SECONDS_PER_DAY).contains(&r.timestamp) && r.timestamp % 60 == 0));
    }

    #[test]
    fn walker_seeds_matter(seed: u64) {
        let s = spec(seed);
        let a = gen_random_walk(&s.extent, &s, 0, seed).unwrap();
        let b = gen_random_walk(&s.extent, &s, 0, seed.wrapping_add(1)).unwrap();
        prop_assert_ne!(a, b);
    }
}
