use fleet_select::geo::METERS_PER_DEGREE;
use fleet_select::{load_custom_strata, make_grid, BoundingBox, GeoPoint};
use proptest::prelude::*;

/// Extents from a few hundred meters to tens of kilometres, anywhere but the poles.
fn extent() -> impl Strategy<Value = BoundingBox> {
    (
        -70.0..70.0f64,
        -179.0..170.0f64,
        0.002..0.3f64,
        0.002..0.3f64,
    )
        .prop_map(|(lat, lon, w, h)| BoundingBox::new(lon, lat, lon + w, lat + h).unwrap())
}

fn inside(b: BoundingBox) -> impl Strategy<Value = GeoPoint> {
    (0.0..=1.0f64, 0.0..=1.0f64).prop_map(move |(fx, fy)| {
        GeoPoint::new(b.min_lat + fy * b.height(), b.min_lon + fx * b.width()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_partitions_the_extent(
        (b, cell, pts) in extent().prop_flat_map(|b| (Just(b), 200.0..3000.0f64, prop::collection::vec(inside(b), 1..40)))
    ) {
        let g = make_grid(b, cell).unwrap();
        let spec = *g.grid().unwrap();
        prop_assert_eq!(g.len(), spec.rows * spec.cols);
        // ids are dense and row-major
        for (i, s) in g.strata().iter().enumerate() {
            prop_assert_eq!(s.id, i as u64);
        }
        for p in &pts {
            let id = g.assign_stratum(p).expect("every extent point has a stratum");
            let s = g.get(id).unwrap();
            prop_assert!(s.geometry.contains(p));
            // no smaller id also contains the point
            prop_assert!(g.strata()[..id as usize].iter().all(|o| !o.geometry.contains(p)));
        }
    }

    #[test]
    fn grid_cell_count_tracks_area(b in extent(), cell in 200.0..3000.0f64) {
        let g = make_grid(b, cell).unwrap();
        let cos = b.center().lat().to_radians().cos();
        let w = b.width() * METERS_PER_DEGREE * cos / cell;
        let h = b.height() * METERS_PER_DEGREE / cell;
        prop_assert!(g.len() as f64 <= (w + 1.0).ceil() * (h + 1.0).ceil());
        prop_assert!(g.len() as f64 >= (w.floor() * h.floor()).max(1.0));
    }

    #[test]
    fn polygon_reload_agrees_with_grid(
        (b, pts) in extent().prop_flat_map(|b| (Just(b), prop::collection::vec(inside(b), 1..40)))
    ) {
        let cell = b.height().max(b.width()) * METERS_PER_DEGREE / 4.0;
        let g = make_grid(b, cell).unwrap();
        let mut doc = g.to_geojson();
        doc.as_object_mut().unwrap().remove("grid");
        let polys = load_custom_strata(&doc.to_string()).unwrap();
        prop_assert!(polys.grid().is_none());
        for p in &pts {
            prop_assert_eq!(polys.assign_stratum(p), g.assign_stratum(p));
        }
    }
}

#[test]
fn outside_points_have_no_stratum() {
    let g = make_grid(BoundingBox::new(10.0, 10.0, 10.1, 10.1).unwrap(), 1000.0).unwrap();
    assert_eq!(g.assign_stratum(&GeoPoint::new(9.99, 10.05).unwrap()), None);
    assert_eq!(
        g.assign_stratum(&GeoPoint::new(10.05, 10.11).unwrap()),
        None
    );
    assert_eq!(
        g.assign_stratum(&GeoPoint::new(10.1, 10.1).unwrap()),
        Some(g.len() as u64 - 1)
    );
}
