use fleet_select::geo::{cell_size_degrees, GEOHASH_MAX_PRECISION};
use fleet_select::{geohash_decode, geohash_encode, haversine_distance, GeoPoint, Geohash};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = GeoPoint> {
    (-90.0..=90.0f64, -180.0..180.0f64).prop_map(|(lat, lon)| GeoPoint::new(lat, lon).unwrap())
}

proptest! {
    #[test]
    fn geohash_prefixes_nest(p in point()) {
        let full = geohash_encode(&p, GEOHASH_MAX_PRECISION).unwrap().to_string();
        for k in 1..=GEOHASH_MAX_PRECISION {
            let g = geohash_encode(&p, k).unwrap();
            prop_assert_eq!(g.to_string(), &full[..k]);
            prop_assert!(geohash_decode(&g).contains(&p));
        }
    }

    #[test]
    fn geohash_cell_size_matches_precision(p in point(), k in 1..=GEOHASH_MAX_PRECISION) {
        let b = geohash_decode(&geohash_encode(&p, k).unwrap());
        let (w, h) = cell_size_degrees(k);
        prop_assert!((b.width() - w).abs() < 1e-9 && (b.height() - h).abs() < 1e-9);
    }

    #[test]
    fn geohash_text_and_grid_roundtrip(p in point(), k in 1..=GEOHASH_MAX_PRECISION) {
        let g = geohash_encode(&p, k).unwrap();
        let parsed: Geohash = g.to_string().parse().unwrap();
        prop_assert_eq!(parsed, g);
        let (x, y) = g.grid_index();
        prop_assert_eq!(Geohash::from_grid_index(x, y, k).unwrap(), g);
    }

    #[test]
    fn haversine_symmetry_and_identity(a in point(), b in point()) {
        let d = haversine_distance(&a, &b);
        prop_assert!(d >= 0.0);
        prop_assert!(d <= std::f64::consts::PI * fleet_select::geo::EARTH_RADIUS_M + 1e-6);
        prop_assert_eq!(d, haversine_distance(&b, &a));
        prop_assert_eq!(haversine_distance(&a, &a), 0.0);
    }

    #[test]
    fn haversine_triangle_inequality(a in point(), b in point(), c in point()) {
        let (ab, bc, ac) = (haversine_distance(&a, &b), haversine_distance(&b, &c), haversine_distance(&a, &c));
        prop_assert!(ac <= ab + bc + 1e-6);
    }
}
