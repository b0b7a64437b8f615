use proptest::prelude::*;
use rthkp_core::geo::{
    geometry_bbox, haversine_distance, point_in_polygon, polygon_centroid, GeoPoint, GeoPolygon,
    EARTH_RADIUS_M,
};

fn arb_point() -> impl Strategy<Value = GeoPoint> {
    (-180.0f64..=180.0, -90.0f64..=90.0).prop_map(|(lon, lat)| GeoPoint::new(lon, lat).unwrap())
}

/// Convex polygon: vertices on a circle at sorted random angles, closed.
fn arb_convex() -> impl Strategy<Value = GeoPolygon> {
    (
        -170.0f64..170.0,
        -60.0f64..60.0,
        0.001f64..5.0,
        prop::collection::vec(0.0f64..std::f64::consts::TAU, 3..12),
    )
        .prop_filter_map("needs three distinct angles", |(cx, cy, r, mut angles)| {
            angles.sort_by(f64::total_cmp);
            angles.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
            if angles.len() < 3 {
                return None;
            }
            let mut ring: Vec<[f64; 2]> = angles
                .iter()
                .map(|a| [cx + r * a.cos(), cy + r * a.sin()])
                .collect();
            ring.push(ring[0]);
            GeoPolygon::from_coords(&ring).ok()
        })
}

/// Winding number of `ring` around `p`; nonzero means inside.
fn winding_number(p: [f64; 2], ring: &[[f64; 2]]) -> i32 {
    let is_left =
        |a: [f64; 2], b: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
    let mut wn = 0;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a[1] <= p[1] {
            if b[1] > p[1] && is_left(a, b) > 0.0 {
                wn += 1;
            }
        } else if b[1] <= p[1] && is_left(a, b) < 0.0 {
            wn -= 1;
        }
    }
    wn
}

fn distance_to_ring(p: [f64; 2], ring: &[[f64; 2]]) -> f64 {
    ring.windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let d = [b[0] - a[0], b[1] - a[1]];
            let len2 = d[0] * d[0] + d[1] * d[1];
            let t = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
            (p[0] - a[0] - t * d[0]).hypot(p[1] - a[1] - t * d[1])
        })
        .fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn haversine_symmetric_identity_range(a in arb_point(), b in arb_point()) {
        let d = haversine_distance(a, b);
        prop_assert_eq!(d.to_bits(), haversine_distance(b, a).to_bits());
        prop_assert_eq!(haversine_distance(a, a), 0.0);
        prop_assert!((0.0..=std::f64::consts::PI * EARTH_RADIUS_M + 1e-6).contains(&d));
    }

    #[test]
    fn haversine_triangle_inequality(a in arb_point(), b in arb_point(), c in arb_point()) {
        let ac = haversine_distance(a, c);
        let via_b = haversine_distance(a, b) + haversine_distance(b, c);
        prop_assert!(ac <= via_b + 1e-6, "{} > {}", ac, via_b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    #[test]
    fn outside_bbox_means_outside(poly in arb_convex(), p in arb_point()) {
        let bbox = poly.bbox();
        if !bbox.contains_point(p) {
            prop_assert!(!point_in_polygon(p, &poly));
        }
    }

    #[test]
    fn agrees_with_winding_number(poly in arb_convex(), fx in -0.2f64..1.2, fy in -0.2f64..1.2) {
        let b = poly.bbox();
        let lon = b.min_lon + fx * (b.max_lon - b.min_lon);
        let lat = b.min_lat + fy * (b.max_lat - b.min_lat);
        let ring = poly.coords();
        prop_assume!(distance_to_ring([lon, lat], &ring) > 1e-9);
        let p = GeoPoint::new(lon, lat).unwrap();
        prop_assert_eq!(point_in_polygon(p, &poly), winding_number([lon, lat], &ring) != 0);
    }

    #[test]
    fn centroid_of_convex_polygon_is_inside(poly in arb_convex()) {
        let c = polygon_centroid(&poly);
        prop_assert!(point_in_polygon(c, &poly), "{:?} not in {:?}", c, poly.coords());
    }

    #[test]
    fn geometry_bbox_covers_everything(poly in arb_convex(), m in arb_point()) {
        let b = geometry_bbox(m, Some(&poly));
        prop_assert!(b.contains_point(m));
        for v in poly.exterior() {
            prop_assert!(b.contains_point(*v));
        }
    }
}
