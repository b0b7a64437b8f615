//! Registry of urban green open spaces: WGS84 geometry, a packed R-tree over
//! record markers, the GeoJSON store format and a crash-safe file-backed
//! store.
//!
//! ```
//! use rthkp_core::geo::{haversine_distance, GeoPoint};
//!
//! let a = GeoPoint::new(0.0, 0.0).unwrap();
//! let b = GeoPoint::new(1.0, 0.0).unwrap();
//! assert!((haversine_distance(a, b) - 111_194.93).abs() < 0.01);
//! ```

pub mod geo;
pub mod geojson;
pub mod model;
pub mod persist;
pub mod registry;
pub mod seed;
pub mod spatial_index;

pub use geo::{BBox, GeoPoint, GeoPolygon};
pub use model::Category;
pub use registry::{Draft, GreenSpace, ListFilter, Patch, RegistryError, Store};
