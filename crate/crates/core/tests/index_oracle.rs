//! Spatial index answers checked against brute-force scans.

use proptest::prelude::*;
use rthkp_core::geo::{haversine_distance, BBox, GeoPoint};
use rthkp_core::spatial_index::{IndexEntry, Mutation, SpatialIndex};
use std::collections::BTreeMap;

fn brute_bbox(entries: &[IndexEntry], q: &BBox) -> Vec<String> {
    let mut ids: Vec<String> = entries
        .iter()
        .filter(|e| e.bbox().intersects(q))
        .map(|e| e.id().to_string())
        .collect();
    ids.sort();
    ids
}

fn brute_knn(entries: &[IndexEntry], origin: GeoPoint, k: usize) -> Vec<(String, f64)> {
    let mut all: Vec<(String, f64)> = entries
        .iter()
        .map(|e| (e.id().to_string(), haversine_distance(origin, e.marker())))
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// Entries with small random boxes around their markers. Coordinates are
/// snapped to a coarse grid so that distance ties actually occur.
fn arb_entries(max: usize) -> impl Strategy<Value = Vec<IndexEntry>> {
    prop::collection::vec(
        (
            -180i32..=180,
            -90i32..=90,
            0.0f64..2.0,
            0.0f64..2.0,
            0.0f64..2.0,
            0.0f64..2.0,
        ),
        0..max,
    )
    .prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(i, (lon, lat, w, s, e, n))| {
                let (lon, lat) = (lon as f64, lat as f64);
                let marker = GeoPoint::new(lon, lat).unwrap();
                let bbox = BBox::new(
                    (lon - w).max(-180.0),
                    (lat - s).max(-90.0),
                    (lon + e).min(180.0),
                    (lat + n).min(90.0),
                )
                .unwrap();
                IndexEntry::new(format!("id-{i:04}"), marker, bbox).unwrap()
            })
            .collect()
    })
}

fn arb_point() -> impl Strategy<Value = GeoPoint> {
    (-180.0f64..=180.0, -90.0f64..=90.0).prop_map(|(x, y)| GeoPoint::new(x, y).unwrap())
}

fn arb_box() -> impl Strategy<Value = BBox> {
    (
        -180.0f64..=180.0,
        -180.0f64..=180.0,
        -90.0f64..=90.0,
        -90.0f64..=90.0,
    )
        .prop_map(|(a, b, c, d)| BBox::new(a.min(b), c.min(d), a.max(b), c.max(d)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bbox_matches_brute_force(entries in arb_entries(300), queries in prop::collection::vec(arb_box(), 1..20)) {
        let idx = SpatialIndex::build(entries.clone()).unwrap();
        idx.audit().unwrap();
        prop_assert_eq!(idx.len(), entries.len());
        for q in &queries {
            prop_assert_eq!(idx.query_bbox(q), brute_bbox(&entries, q));
        }
    }

    #[test]
    fn knn_matches_brute_force(
        entries in arb_entries(300),
        origins in prop::collection::vec(arb_point(), 1..10),
        k in 1usize..20,
    ) {
        let idx = SpatialIndex::build(entries.clone()).unwrap();
        for o in origins {
            let got = idx.k_nearest(o, k);
            prop_assert_eq!(got.len(), k.min(entries.len()));
            prop_assert!(got.windows(2).all(|w| w[0].1 <= w[1].1));
            prop_assert_eq!(got, brute_knn(&entries, o, k));
        }
    }

    #[test]
    fn knn_from_grid_points_resolves_ties(entries in arb_entries(200), lon in -180i32..=180, lat in -90i32..=90) {
        let idx = SpatialIndex::build(entries.clone()).unwrap();
        let o = GeoPoint::new(lon as f64, lat as f64).unwrap();
        prop_assert_eq!(idx.k_nearest(o, 10), brute_knn(&entries, o, 10));
    }

    #[test]
    fn build_is_order_independent(entries in arb_entries(100), q in arb_box(), o in arb_point()) {
        let a = SpatialIndex::build(entries.clone()).unwrap();
        let mut rev = entries;
        rev.reverse();
        let b = SpatialIndex::build(rev).unwrap();
        prop_assert_eq!(a.query_bbox(&q), b.query_bbox(&q));
        prop_assert_eq!(a.k_nearest(o, 5), b.k_nearest(o, 5));
    }
}

#[derive(Debug, Clone)]
enum Op {
    Insert(u8, i32, i32),
    Remove(u8),
    Replace(u8, i32, i32),
}

fn arb_op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (any::<u8>(), -180i32..=180, -90i32..=90).prop_map(|(k, x, y)| Op::Insert(k, x, y)),
        any::<u8>().prop_map(Op::Remove),
        (any::<u8>(), -180i32..=180, -90i32..=90).prop_map(|(k, x, y)| Op::Replace(k, x, y)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    /// Mutation scripts replayed against a plain map; the final index must
    /// answer like a fresh build over the map's entries.
    #[test]
    fn mutation_replay(ops in prop::collection::vec(arb_op(), 200), queries in prop::collection::vec((arb_box(), arb_point()), 50)) {
        let mut idx = SpatialIndex::default();
        let mut model: BTreeMap<String, IndexEntry> = BTreeMap::new();
        for op in ops {
            let (mutation, expect_ok) = match op {
                Op::Insert(k, x, y) => {
                    let e = IndexEntry::point(format!("k{k}"), GeoPoint::new(x as f64, y as f64).unwrap());
                    let ok = !model.contains_key(e.id());
                    if ok { model.insert(e.id().to_string(), e.clone()); }
                    (Mutation::Insert(e), ok)
                }
                Op::Remove(k) => {
                    let id = format!("k{k}");
                    (Mutation::Remove(id.clone()), model.remove(&id).is_some())
                }
                Op::Replace(k, x, y) => {
                    let e = IndexEntry::point(format!("k{k}"), GeoPoint::new(x as f64, y as f64).unwrap());
                    let ok = model.contains_key(e.id());
                    if ok { model.insert(e.id().to_string(), e.clone()); }
                    (Mutation::Replace(e), ok)
                }
            };
            match idx.apply_mutation(mutation) {
                Ok(next) => { prop_assert!(expect_ok); idx = next; }
                Err(_) => prop_assert!(!expect_ok),
            }
            idx.audit().unwrap();
            prop_assert_eq!(idx.len(), model.len());
        }
        let fresh = SpatialIndex::build(model.values().cloned().collect()).unwrap();
        for (q, o) in queries {
            prop_assert_eq!(idx.query_bbox(&q), fresh.query_bbox(&q));
            prop_assert_eq!(idx.k_nearest(o, 3), fresh.k_nearest(o, 3));
        }
    }
}

#[test]
fn insert_then_remove_is_empty() {
    let e = IndexEntry::point("a", GeoPoint::new(1.0, 1.0).unwrap());
    let idx = SpatialIndex::default()
        .apply_mutation(Mutation::Insert(e))
        .unwrap()
        .apply_mutation(Mutation::Remove("a".into()))
        .unwrap();
    assert!(idx.is_empty());
    assert!(idx.query_bbox(&BBox::world()).is_empty());
}
