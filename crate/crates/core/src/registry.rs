//! The authoritative collection of green space records.
//!
//! A [`Store`] publishes immutable [`Snapshot`]s. Readers clone the current
//! `Arc<Snapshot>` and never wait on file I/O. Writers serialize on a mutex,
//! build the successor snapshot off to the side, persist it, and only then
//! swap it in; a failed write leaves both the file and the published snapshot
//! untouched.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{SubsecRound, Utc};
use thiserror::Error;

use crate::geo::{geometry_bbox, BBox, GeoPoint, GeoPolygon};
use crate::geojson::{
    parse_feature_collection_bytes, quantize_coord, serialize_feature_collection, ParseError,
    RawGeometry, SpaceFeature,
};
use crate::model::{is_valid_photo_path, slugify, Category, Timestamp};
use crate::persist::{AtomicFile, Persister};
use crate::seed::SEED_SPACES;
use crate::spatial_index::{IndexEntry, SpatialIndex};

/// File name of the store inside a data directory.
pub const STORE_FILE: &str = "spaces.geojson";

/// Id used when a name has no ASCII letters or digits to slug from.
const FALLBACK_SLUG: &str = "space";

#[derive(Debug, Clone, PartialEq)]
pub struct GreenSpace {
    pub id: String,
    pub name: String,
    pub category: Category,
    pub marker: GeoPoint,
    pub boundary: Option<GeoPolygon>,
    pub description: String,
    pub facilities: Vec<String>,
    pub photos: Vec<String>,
    pub created_at: Timestamp,
    pub updated_at: Timestamp,
}

impl GreenSpace {
    pub fn bbox(&self) -> BBox {
        geometry_bbox(self.marker, self.boundary.as_ref())
    }

    pub fn to_feature(&self) -> SpaceFeature {
        SpaceFeature {
            id: self.id.clone(),
            name: self.name.clone(),
            category: self.category,
            marker: self.marker,
            boundary: self.boundary.clone(),
            description: self.description.clone(),
            facilities: self.facilities.clone(),
            photos: self.photos.clone(),
            created_at: Some(self.created_at),
            updated_at: Some(self.updated_at),
        }
    }

    /// Missing timestamps default to `now`; `updated_at` never precedes
    /// `created_at`. Coordinates are quantized to the stored precision.
    pub fn from_feature(f: SpaceFeature, now: Timestamp) -> Self {
        let created_at = f.created_at.unwrap_or(now);
        let updated_at = f.updated_at.unwrap_or(created_at).max(created_at);
        let (marker, boundary) = quantized(
            f.marker.coords(),
            f.boundary.as_ref().map(GeoPolygon::coords).as_deref(),
        )
        .expect("quantizing valid geometry keeps it valid");
        Self {
            id: f.id,
            name: f.name,
            category: f.category,
            marker,
            boundary,
            description: f.description,
            facilities: f.facilities,
            photos: f.photos,
            created_at,
            updated_at,
        }
    }

    fn index_entry(&self) -> IndexEntry {
        IndexEntry::new(self.id.clone(), self.marker, self.bbox()).expect("bbox holds marker")
    }
}

/// Input for a new record. Coordinates are raw so that out-of-range values
/// surface as validation reports.
#[derive(Debug, Clone, PartialEq)]
pub struct Draft {
    pub name: String,
    pub category: Category,
    pub marker: [f64; 2],
    pub boundary: Option<Vec<[f64; 2]>>,
    pub description: String,
    pub facilities: Vec<String>,
    pub photos: Vec<String>,
}

impl Draft {
    pub fn new(name: impl Into<String>, category: Category, marker: [f64; 2]) -> Self {
        Self {
            name: name.into(),
            category,
            marker,
            boundary: None,
            description: String::new(),
            facilities: Vec::new(),
            photos: Vec::new(),
        }
    }
}

/// Partial update. `None` leaves a field alone; `boundary: Some(None)`
/// removes the boundary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Patch {
    pub name: Option<String>,
    pub category: Option<Category>,
    pub marker: Option<[f64; 2]>,
    pub boundary: Option<Option<Vec<[f64; 2]>>>,
    pub description: Option<String>,
    pub facilities: Option<Vec<String>>,
    pub photos: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldViolation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("validation failed: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Validation(Vec<FieldViolation>),
    #[error("no green space with id `{0}`")]
    NotFound(String),
    #[error("store already holds {0} records; seeding requires force")]
    SeedConflict(usize),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("failed to persist {path}: {source}")]
    Persist { path: PathBuf, source: io::Error },
}

pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Utc::now()
    }
}

/// Manually advanced clock for deterministic tests.
#[derive(Debug)]
pub struct FixedClock(Mutex<Timestamp>);

impl FixedClock {
    pub fn new(t: Timestamp) -> Self {
        Self(Mutex::new(t))
    }

    pub fn set(&self, t: Timestamp) {
        *self.0.lock().unwrap() = t;
    }

    pub fn advance(&self, d: chrono::Duration) {
        *self.0.lock().unwrap() += d;
    }
}

impl Clock for FixedClock {
    fn now(&self) -> Timestamp {
        *self.0.lock().unwrap()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ListFilter {
    pub category: Option<Category>,
    pub bbox: Option<BBox>,
}

/// A consistent view of the records and their index at one revision.
#[derive(Debug, Clone, Default)]
pub struct Snapshot {
    records: BTreeMap<String, GreenSpace>,
    index: SpatialIndex,
    revision: u64,
}

impl Snapshot {
    fn from_records(records: BTreeMap<String, GreenSpace>, revision: u64) -> Self {
        let entries = records.values().map(GreenSpace::index_entry).collect();
        let index = SpatialIndex::build(entries).expect("map keys are unique");
        Self {
            records,
            index,
            revision,
        }
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn index(&self) -> &SpatialIndex {
        &self.index
    }

    pub fn get(&self, id: &str) -> Option<&GreenSpace> {
        self.records.get(id)
    }

    /// Records matching every given filter, ascending by id.
    pub fn list(&self, filter: &ListFilter) -> Vec<GreenSpace> {
        let by_category = |r: &&GreenSpace| filter.category.is_none_or(|c| r.category == c);
        match &filter.bbox {
            Some(bbox) => self
                .index
                .query_bbox(bbox)
                .iter()
                .filter_map(|id| self.records.get(id))
                .filter(by_category)
                .cloned()
                .collect(),
            None => self.records.values().filter(by_category).cloned().collect(),
        }
    }

    /// The `k` records with markers nearest to `origin`, with distances in
    /// meters.
    pub fn nearest(&self, origin: GeoPoint, k: usize) -> Vec<(GreenSpace, f64)> {
        self.index
            .k_nearest(origin, k)
            .into_iter()
            .map(|(id, d)| (self.records[&id].clone(), d))
            .collect()
    }

    pub fn features(&self) -> Vec<SpaceFeature> {
        self.records.values().map(GreenSpace::to_feature).collect()
    }
}

pub struct Store {
    path: PathBuf,
    current: RwLock<Arc<Snapshot>>,
    writer: Mutex<()>,
    clock: Arc<dyn Clock>,
    persister: Arc<dyn Persister>,
}

impl fmt::Debug for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Store")
            .field("path", &self.path)
            .field("revision", &self.snapshot().revision)
            .finish_non_exhaustive()
    }
}

impl Store {
    /// Opens the store file at `path` with the system clock and atomic file
    /// writes. An absent file yields an empty store; nothing is written until
    /// the first mutation.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, RegistryError> {
        Self::open_with(path, Arc::new(SystemClock), Arc::new(AtomicFile))
    }

    pub fn open_with(
        path: impl Into<PathBuf>,
        clock: Arc<dyn Clock>,
        persister: Arc<dyn Persister>,
    ) -> Result<Self, RegistryError> {
        let path = path.into();
        let records = match std::fs::read(&path) {
            Ok(bytes) => {
                let features = parse_feature_collection_bytes(&bytes).map_err(|source| {
                    RegistryError::Parse {
                        path: path.clone(),
                        source,
                    }
                })?;
                let now = clock.now().trunc_subsecs(0);
                features
                    .into_iter()
                    .map(|f| (f.id.clone(), GreenSpace::from_feature(f, now)))
                    .collect()
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => BTreeMap::new(),
            Err(source) => return Err(RegistryError::Read { path, source }),
        };
        Ok(Self {
            current: RwLock::new(Arc::new(Snapshot::from_records(records, 0))),
            path,
            writer: Mutex::new(()),
            clock,
            persister,
        })
    }

    /// Opens `<data_dir>/spaces.geojson`.
    pub fn open_dir(data_dir: impl AsRef<Path>) -> Result<Self, RegistryError> {
        Self::open(data_dir.as_ref().join(STORE_FILE))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().unwrap().clone()
    }

    pub fn revision(&self) -> u64 {
        self.snapshot().revision
    }

    pub fn get_space(&self, id: &str) -> Result<GreenSpace, RegistryError> {
        self.snapshot()
            .get(id)
            .cloned()
            .ok_or_else(|| RegistryError::NotFound(id.to_string()))
    }

    pub fn list_spaces(&self, filter: &ListFilter) -> Vec<GreenSpace> {
        self.snapshot().list(filter)
    }

    pub fn nearest(&self, origin: GeoPoint, k: usize) -> Vec<(GreenSpace, f64)> {
        self.snapshot().nearest(origin, k)
    }

    pub fn create_space(&self, draft: Draft) -> Result<GreenSpace, RegistryError> {
        self.mutate(|records, now| {
            let (marker, boundary) = validate_fields(
                &draft.name,
                draft.marker,
                draft.boundary.as_deref(),
                &draft.photos,
            )?;
            let id = unique_slug(&draft.name, records);
            let space = GreenSpace {
                id: id.clone(),
                name: draft.name.trim().to_string(),
                category: draft.category,
                marker,
                boundary,
                description: draft.description,
                facilities: draft.facilities,
                photos: draft.photos,
                created_at: now,
                updated_at: now,
            };
            records.insert(id, space.clone());
            Ok(space)
        })
    }

    pub fn update_space(&self, id: &str, patch: Patch) -> Result<GreenSpace, RegistryError> {
        self.mutate(|records, now| {
            let old = records
                .get(id)
                .ok_or_else(|| RegistryError::NotFound(id.to_string()))?;
            let name = patch.name.unwrap_or_else(|| old.name.clone());
            let raw_marker = patch.marker.unwrap_or(old.marker.coords());
            let raw_boundary = match patch.boundary {
                Some(b) => b,
                None => old.boundary.as_ref().map(GeoPolygon::coords),
            };
            let photos = patch.photos.unwrap_or_else(|| old.photos.clone());
            let (marker, boundary) =
                validate_fields(&name, raw_marker, raw_boundary.as_deref(), &photos)?;
            let updated = GreenSpace {
                id: old.id.clone(),
                name: name.trim().to_string(),
                category: patch.category.unwrap_or(old.category),
                marker,
                boundary,
                description: patch.description.unwrap_or_else(|| old.description.clone()),
                facilities: patch.facilities.unwrap_or_else(|| old.facilities.clone()),
                photos,
                created_at: old.created_at,
                updated_at: now.max(old.created_at),
            };
            records.insert(id.to_string(), updated.clone());
            Ok(updated)
        })
    }

    pub fn delete_space(&self, id: &str) -> Result<(), RegistryError> {
        self.mutate(|records, _| {
            records
                .remove(id)
                .map(drop)
                .ok_or_else(|| RegistryError::NotFound(id.to_string()))
        })
    }

    /// Loads the default inventory. A non-empty store is rejected unless
    /// `force`, in which case its contents are replaced.
    pub fn seed_default(&self, force: bool) -> Result<usize, RegistryError> {
        self.mutate(|records, now| {
            if !records.is_empty() && !force {
                return Err(RegistryError::SeedConflict(records.len()));
            }
            records.clear();
            for seed in &SEED_SPACES {
                let mut draft = Draft::new(seed.name, seed.category, seed.marker);
                draft.boundary = seed.boundary.map(<[_]>::to_vec);
                let (marker, boundary) =
                    validate_fields(seed.name, draft.marker, draft.boundary.as_deref(), &[])?;
                let id = unique_slug(seed.name, records);
                records.insert(
                    id.clone(),
                    GreenSpace {
                        id,
                        name: seed.name.to_string(),
                        category: seed.category,
                        marker,
                        boundary,
                        description: seed.description.to_string(),
                        facilities: seed.facilities.iter().map(|s| s.to_string()).collect(),
                        photos: Vec::new(),
                        created_at: now,
                        updated_at: now,
                    },
                );
            }
            Ok(records.len())
        })
    }

    /// Swaps the whole record set for `features` in one commit.
    pub fn replace_all(&self, features: Vec<SpaceFeature>) -> Result<usize, RegistryError> {
        self.mutate(|records, now| {
            records.clear();
            for f in features {
                records.insert(f.id.clone(), GreenSpace::from_feature(f, now));
            }
            Ok(records.len())
        })
    }

    /// Inserts or overwrites records by id in one commit. An overwritten
    /// record keeps its `created_at` unless the feature carries one.
    /// Returns `(inserted, updated)`.
    pub fn upsert_all(&self, features: Vec<SpaceFeature>) -> Result<(usize, usize), RegistryError> {
        self.mutate(|records, now| {
            let (mut inserted, mut updated) = (0, 0);
            for mut f in features {
                match records.get(&f.id) {
                    Some(old) => {
                        f.created_at = f.created_at.or(Some(old.created_at));
                        f.updated_at = f.updated_at.or(Some(now));
                        updated += 1;
                    }
                    None => inserted += 1,
                }
                records.insert(f.id.clone(), GreenSpace::from_feature(f, now));
            }
            Ok((inserted, updated))
        })
    }

    /// Runs `f` against a private copy of the records and commits the result:
    /// serialize, persist atomically, then publish with revision + 1.
    fn mutate<T>(
        &self,
        f: impl FnOnce(&mut BTreeMap<String, GreenSpace>, Timestamp) -> Result<T, RegistryError>,
    ) -> Result<T, RegistryError> {
        let _writer = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let base = self.snapshot();
        let mut records = base.records.clone();
        let now = self.clock.now().trunc_subsecs(0);
        let out = f(&mut records, now)?;

        let next = Snapshot::from_records(records, base.revision + 1);
        let text = serialize_feature_collection(&next.features()).expect("map keys are unique");
        self.persister
            .write(&self.path, text.as_bytes())
            .map_err(|source| RegistryError::Persist {
                path: self.path.clone(),
                source,
            })?;
        *self.current.write().unwrap() = Arc::new(next);
        Ok(out)
    }
}

fn validate_fields(
    name: &str,
    marker: [f64; 2],
    boundary: Option<&[[f64; 2]]>,
    photos: &[String],
) -> Result<(GeoPoint, Option<GeoPolygon>), RegistryError> {
    let mut violations = Vec::new();
    if name.trim().is_empty() {
        violations.push(FieldViolation {
            field: "name".into(),
            message: "empty name".into(),
        });
    }
    let validated = quantized(marker, boundary);
    if let Err(vs) = &validated {
        violations.extend(vs.iter().map(|v| FieldViolation {
            field: v.field().into(),
            message: v.to_string(),
        }));
    }
    for p in photos.iter().filter(|p| !is_valid_photo_path(p)) {
        violations.push(FieldViolation {
            field: "photos".into(),
            message: format!("`{p}` is not a relative path"),
        });
    }
    match validated {
        Ok(geometry) if violations.is_empty() => Ok(geometry),
        _ => Err(RegistryError::Validation(violations)),
    }
}

/// Validated geometry with every coordinate rounded to the precision the
/// store file keeps, so a reload reproduces the in-memory records exactly.
fn quantized(
    marker: [f64; 2],
    boundary: Option<&[[f64; 2]]>,
) -> Result<(GeoPoint, Option<GeoPolygon>), Vec<crate::geo::Violation>> {
    // Validate first: rounding could pull a slightly out-of-range value back in.
    RawGeometry {
        marker,
        boundary: boundary.map(<[_]>::to_vec),
    }
    .validate()?;
    let q = |[x, y]: [f64; 2]| [quantize_coord(x), quantize_coord(y)];
    RawGeometry {
        marker: q(marker),
        boundary: boundary.map(|ring| ring.iter().copied().map(q).collect()),
    }
    .validate()
}

/// `slugify(name)`, with `-2`, `-3`, … appended until the id is free.
fn unique_slug(name: &str, records: &BTreeMap<String, GreenSpace>) -> String {
    let mut base = slugify(name);
    if base.is_empty() {
        base = FALLBACK_SLUG.to_string();
    }
    if !records.contains_key(&base) {
        return base;
    }
    (2..)
        .map(|n| format!("{base}-{n}"))
        .find(|id| !records.contains_key(id))
        .expect("unbounded suffixes")
}
