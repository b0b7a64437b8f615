use chrono::{TimeZone, Utc};
use proptest::prelude::*;
use rthkp_core::geojson::{
    parse_feature_collection, parse_feature_collection_bytes, serialize_feature_collection,
    SpaceFeature,
};
use rthkp_core::{Category, GeoPoint, GeoPolygon};

fn arb_text() -> impl Strategy<Value = String> {
    prop_oneof![
        Just(String::new()),
        "[a-zA-Z0-9 ]{1,20}",
        any::<String>(),
        Just("quote \" backslash \\ newline \n tab \t".to_string()),
    ]
}

fn arb_feature() -> impl Strategy<Value = SpaceFeature> {
    (
        "[a-z0-9]{1,8}(-[a-z0-9]{1,6}){0,2}",
        "[A-Za-z][A-Za-z0-9 ]{0,30}",
        prop_oneof![Just(Category::CityPark), Just(Category::NatureTourismPark)],
        (-180.0f64..=180.0, -90.0f64..=90.0),
        prop::option::of((0.0001f64..0.5, 3usize..8)),
        arb_text(),
        prop::collection::vec(arb_text(), 0..3),
        prop::collection::vec("[a-z0-9]{1,8}(/[a-z0-9]{1,8}){0,2}\\.jpg", 0..3),
        prop::option::of((0i64..2_000_000_000, 0i64..100_000_000)),
    )
        .prop_map(
            |(id, name, category, (lon, lat), boundary, description, facilities, photos, times)| {
                let boundary = boundary.map(|(r, n)| {
                    let mut ring: Vec<[f64; 2]> = (0..n)
                        .map(|i| {
                            let a = i as f64 / n as f64 * std::f64::consts::TAU;
                            [
                                (lon + r * a.cos()).clamp(-180.0, 180.0),
                                (lat + r * a.sin()).clamp(-90.0, 90.0),
                            ]
                        })
                        .collect();
                    ring.push(ring[0]);
                    GeoPolygon::from_coords(&ring).unwrap()
                });
                let (created_at, updated_at) = match times {
                    Some((c, d)) => (
                        Some(Utc.timestamp_opt(c, 0).unwrap()),
                        Some(Utc.timestamp_opt(c + d, 0).unwrap()),
                    ),
                    None => (None, None),
                };
                SpaceFeature {
                    id,
                    name,
                    category,
                    marker: GeoPoint::new(lon, lat).unwrap(),
                    boundary,
                    description,
                    facilities,
                    photos,
                    created_at,
                    updated_at,
                }
            },
        )
}

fn arb_features() -> impl Strategy<Value = Vec<SpaceFeature>> {
    prop::collection::vec(arb_feature(), 0..15).prop_map(|mut fs| {
        fs.sort_by(|a, b| a.id.cmp(&b.id));
        fs.dedup_by(|a, b| a.id == b.id);
        fs
    })
}

fn close(a: [f64; 2], b: [f64; 2]) -> bool {
    (a[0] - b[0]).abs() <= 1e-9 && (a[1] - b[1]).abs() <= 1e-9
}

fn same_feature(a: &SpaceFeature, b: &SpaceFeature) -> bool {
    let rings_close = match (&a.boundary, &b.boundary) {
        (None, None) => true,
        (Some(x), Some(y)) => {
            x.coords().len() == y.coords().len()
                && x.coords().iter().zip(y.coords()).all(|(p, q)| close(*p, q))
        }
        _ => false,
    };
    a.id == b.id
        && a.name == b.name
        && a.category == b.category
        && close(a.marker.coords(), b.marker.coords())
        && rings_close
        && a.description == b.description
        && a.facilities == b.facilities
        && a.photos == b.photos
        && a.created_at == b.created_at
        && a.updated_at == b.updated_at
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn parse_inverts_serialize(features in arb_features()) {
        let text = serialize_feature_collection(&features).unwrap();
        let back = parse_feature_collection(&text).unwrap();
        prop_assert_eq!(back.len(), features.len());
        for (a, b) in features.iter().zip(&back) {
            prop_assert!(same_feature(a, b), "{:?}\n{:?}", a, b);
        }
    }

    #[test]
    fn second_serialization_is_byte_identical(features in arb_features()) {
        let once = serialize_feature_collection(&features).unwrap();
        let twice = serialize_feature_collection(&parse_feature_collection(&once).unwrap()).unwrap();
        prop_assert_eq!(&once, &twice);
        // And the parsed list is now a fixpoint of parse ∘ serialize.
        let p1 = parse_feature_collection(&once).unwrap();
        let p2 = parse_feature_collection(&twice).unwrap();
        prop_assert_eq!(p1, p2);
    }

    #[test]
    fn output_order_ignores_input_order(mut features in arb_features()) {
        let sorted = serialize_feature_collection(&features).unwrap();
        features.reverse();
        prop_assert_eq!(serialize_feature_collection(&features).unwrap(), sorted);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(5_000))]

    #[test]
    fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..512)) {
        let _ = parse_feature_collection_bytes(&bytes);
    }

    #[test]
    fn mutated_documents_never_panic(features in arb_features(), cuts in prop::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 1..8)) {
        let mut bytes = serialize_feature_collection(&features).unwrap().into_bytes();
        for (at, b) in cuts {
            if bytes.is_empty() { break; }
            let i = at.index(bytes.len());
            bytes[i] = b;
        }
        let _ = parse_feature_collection_bytes(&bytes);
    }
}

#[test]
fn deeply_nested_input_is_an_error_not_a_crash() {
    let deep = "[".repeat(100_000);
    assert!(parse_feature_collection(&deep).is_err());
    let deep_obj = format!(
        r#"{{"type":"FeatureCollection","features":[{{"type":"Feature","properties":{}}}]}}"#,
        "{\"a\":".repeat(10_000)
    );
    assert!(parse_feature_collection(&deep_obj).is_err());
}
