//! Browser bindings over the default inventory: nearest markers, bounding
//! box queries and boundary hit-testing, all computed client-side.
//!
//! Results cross the boundary as JSON strings.

use rthkp_core::geo::{haversine_distance, point_in_polygon};
use rthkp_core::model::slugify;
use rthkp_core::seed::{PALEMBANG_BBOX, SEED_SPACES};
use rthkp_core::spatial_index::{IndexEntry, SpatialIndex};
use rthkp_core::{BBox, Category, GeoPoint, GeoPolygon};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

struct Space {
    id: String,
    name: &'static str,
    category: Category,
    marker: GeoPoint,
    boundary: Option<GeoPolygon>,
}

#[wasm_bindgen]
pub struct Demo {
    spaces: Vec<Space>,
    index: SpatialIndex,
}

impl Default for Demo {
    fn default() -> Self {
        Self::with_seed()
    }
}

impl Demo {
    pub fn with_seed() -> Self {
        let spaces: Vec<Space> = SEED_SPACES
            .iter()
            .map(|s| Space {
                id: slugify(s.name),
                name: s.name,
                category: s.category,
                marker: GeoPoint::new(s.marker[0], s.marker[1]).expect("seed marker"),
                boundary: s
                    .boundary
                    .map(|r| GeoPolygon::from_coords(r).expect("seed ring")),
            })
            .collect();
        let entries = spaces
            .iter()
            .map(|s| {
                let bbox = match &s.boundary {
                    Some(b) => b.bbox().union(BBox::from_point(s.marker)),
                    None => BBox::from_point(s.marker),
                };
                IndexEntry::new(s.id.clone(), s.marker, bbox).expect("seed entry")
            })
            .collect();
        Self {
            index: SpatialIndex::build(entries).expect("unique seed ids"),
            spaces,
        }
    }

    fn space(&self, id: &str) -> &Space {
        self.spaces.iter().find(|s| s.id == id).expect("indexed id")
    }

    pub fn spaces_value(&self) -> Value {
        let mut spaces: Vec<&Space> = self.spaces.iter().collect();
        spaces.sort_by(|a, b| a.id.cmp(&b.id));
        spaces
            .into_iter()
            .map(|s| {
                json!({
                    "id": s.id,
                    "name": s.name,
                    "category": s.category.as_str(),
                    "marker": s.marker.coords(),
                    "boundary": s.boundary.as_ref().map(GeoPolygon::coords),
                })
            })
            .collect()
    }

    pub fn nearest_value(&self, lon: f64, lat: f64, k: usize) -> Result<Value, String> {
        let origin = GeoPoint::new(lon, lat).map_err(|e| e.to_string())?;
        if k == 0 {
            return Err("k must be at least 1".into());
        }
        Ok(self
            .index
            .k_nearest(origin, k)
            .into_iter()
            .map(|(id, d)| {
                let s = self.space(&id);
                json!({"id": id, "name": s.name, "category": s.category.as_str(), "distance_m": d})
            })
            .collect())
    }

    pub fn bbox_value(&self, a: f64, b: f64, c: f64, d: f64) -> Result<Value, String> {
        let query = BBox::new(a.min(c), b.min(d), a.max(c), b.max(d)).map_err(|e| e.to_string())?;
        Ok(self.index.query_bbox(&query).into())
    }

    /// Id of the space whose boundary contains the point, if any.
    pub fn locate_id(&self, lon: f64, lat: f64) -> Result<Option<String>, String> {
        let p = GeoPoint::new(lon, lat).map_err(|e| e.to_string())?;
        let hits = self.index.query_bbox(&BBox::from_point(p));
        Ok(hits.into_iter().find(|id| {
            self.space(id)
                .boundary
                .as_ref()
                .is_some_and(|b| point_in_polygon(p, b))
        }))
    }
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Demo {
        Self::with_seed()
    }

    /// `[min_lon, min_lat, max_lon, max_lat]` of the fixture area.
    #[wasm_bindgen(js_name = areaBounds)]
    pub fn area_bounds() -> Vec<f64> {
        let (a, b, c, d) = PALEMBANG_BBOX;
        vec![a, b, c, d]
    }

    pub fn spaces(&self) -> String {
        self.spaces_value().to_string()
    }

    pub fn nearest(&self, lon: f64, lat: f64, k: usize) -> Result<String, JsError> {
        self.nearest_value(lon, lat, k)
            .map(|v| v.to_string())
            .map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(js_name = queryBbox)]
    pub fn query_bbox(&self, a: f64, b: f64, c: f64, d: f64) -> Result<String, JsError> {
        self.bbox_value(a, b, c, d)
            .map(|v| v.to_string())
            .map_err(|e| JsError::new(&e))
    }

    pub fn locate(&self, lon: f64, lat: f64) -> Result<Option<String>, JsError> {
        self.locate_id(lon, lat).map_err(|e| JsError::new(&e))
    }

    /// Great-circle distance in metres.
    pub fn distance(lon1: f64, lat1: f64, lon2: f64, lat2: f64) -> Result<f64, JsError> {
        let p = |lon, lat| GeoPoint::new(lon, lat).map_err(|e| JsError::new(&e.to_string()));
        Ok(haversine_distance(p(lon1, lat1)?, p(lon2, lat2)?))
    }
}
