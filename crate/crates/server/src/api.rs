//! HTTP routes over a [`Store`].
//!
//! ```text
//! GET    /api/health                      {"status":"ok","revision":n}
//! GET    /api/categories                  ["taman_kota","taman_wisata_alam"]
//! GET    /api/spaces?category=&bbox=      FeatureCollection
//! GET    /api/spaces/{id}                 Feature
//! GET    /api/nearest?lon=&lat=&k=        [{id,name,category,distance_m}]
//! POST   /api/spaces            (admin)   201 Feature, Location header
//! PUT    /api/spaces/{id}       (admin)   200 Feature
//! DELETE /api/spaces/{id}       (admin)   204
//! POST   /api/admin/seed?force= (admin)   {"created":12} | 409
//! GET    /, /assets/…, /photos/…          static files
//! ```
//!
//! Mutations are committed to disk before the response is sent.

use std::collections::HashMap;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{PathRejection, QueryRejection};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::header::{CONTENT_TYPE, LOCATION};
use axum::http::{HeaderMap, HeaderValue, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use percent_encoding::percent_decode_str;
use rthkp_core::geojson::{
    parse_geometry, serialize_feature, serialize_feature_collection, RawGeometry,
};
use rthkp_core::registry::Patch;
use rthkp_core::{BBox, Category, Draft, GeoPoint, ListFilter, Store};
use serde_json::{json, Map, Value};
use tower_http::cors::CorsLayer;

use crate::auth::{authenticate_admin, AdminCredential, AuthOutcome};
use crate::error::{ApiError, FieldDetail};

/// Default `k` for `/api/nearest` when the parameter is absent.
pub const DEFAULT_NEAREST_K: usize = 5;

const GEOJSON: &str = "application/geo+json";

#[derive(Debug, Clone, Default)]
pub struct ApiConfig {
    pub admin: Option<AdminCredential>,
    pub static_dir: Option<PathBuf>,
    pub photos_dir: Option<PathBuf>,
    pub permissive_cors: bool,
}

#[derive(Clone)]
struct AppState {
    store: Arc<Store>,
    admin: Option<AdminCredential>,
    static_dir: Option<PathBuf>,
    photos_dir: Option<PathBuf>,
}

pub fn router(store: Arc<Store>, config: ApiConfig) -> Router {
    let state = AppState {
        store,
        admin: config.admin,
        static_dir: config.static_dir,
        photos_dir: config.photos_dir,
    };
    let router = Router::new()
        .route("/api/health", get(health))
        .route("/api/categories", get(categories))
        .route("/api/spaces", get(list_spaces).post(create_space))
        .route(
            "/api/spaces/{id}",
            get(get_space).put(update_space).delete(delete_space),
        )
        .route("/api/nearest", get(nearest))
        .route("/api/admin/seed", post(seed))
        .method_not_allowed_fallback(|| async { ApiError::method_not_allowed() })
        .fallback(static_files)
        .with_state(state);
    if config.permissive_cors {
        router.layer(CorsLayer::permissive())
    } else {
        router
    }
}

type Params = Result<Query<HashMap<String, String>>, QueryRejection>;
type IdParam = Result<UrlPath<String>, PathRejection>;

fn params(p: Params) -> Result<HashMap<String, String>, ApiError> {
    p.map(|Query(q)| q)
        .map_err(|e| ApiError::bad_request(format!("malformed query string: {e}")))
}

fn id_param(p: IdParam) -> Result<String, ApiError> {
    p.map(|UrlPath(id)| id)
        .map_err(|e| ApiError::bad_request(format!("malformed path: {e}")))
}

fn geojson_response(status: StatusCode, body: String) -> Response {
    (
        status,
        [(CONTENT_TYPE, HeaderValue::from_static(GEOJSON))],
        body,
    )
        .into_response()
}

async fn health(State(s): State<AppState>) -> Json<Value> {
    Json(json!({"status": "ok", "revision": s.store.revision()}))
}

async fn categories() -> Json<Vec<&'static str>> {
    Json(Category::ALL.iter().map(Category::as_str).collect())
}

async fn list_spaces(State(s): State<AppState>, q: Params) -> Result<Response, ApiError> {
    let q = params(q)?;
    let category = q.get("category").map(|c| parse_category(c)).transpose()?;
    let bbox = q.get("bbox").map(|b| parse_bbox(b)).transpose()?;
    let spaces = s.store.list_spaces(&ListFilter { category, bbox });
    let features: Vec<_> = spaces.iter().map(|r| r.to_feature()).collect();
    let body =
        serialize_feature_collection(&features).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(geojson_response(StatusCode::OK, body))
}

async fn get_space(State(s): State<AppState>, id: IdParam) -> Result<Response, ApiError> {
    let space = s.store.get_space(&id_param(id)?)?;
    Ok(geojson_response(
        StatusCode::OK,
        serialize_feature(&space.to_feature()),
    ))
}

async fn nearest(State(s): State<AppState>, q: Params) -> Result<Json<Value>, ApiError> {
    let q = params(q)?;
    let number = |name: &str| -> Result<f64, ApiError> {
        let raw = q
            .get(name)
            .ok_or_else(|| ApiError::bad_request(format!("missing `{name}`")))?;
        raw.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| ApiError::bad_request(format!("`{name}` must be a number")))
    };
    let origin = GeoPoint::new(number("lon")?, number("lat")?)
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let k = match q.get("k") {
        None => DEFAULT_NEAREST_K,
        Some(raw) => raw
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&k| k >= 1)
            .ok_or_else(|| ApiError::bad_request("`k` must be an integer >= 1"))?,
    };
    let items: Vec<Value> = s
        .store
        .nearest(origin, k)
        .into_iter()
        .map(|(space, d)| {
            json!({
                "id": space.id,
                "name": space.name,
                "category": space.category.as_str(),
                "distance_m": d,
            })
        })
        .collect();
    Ok(Json(Value::Array(items)))
}

fn parse_category(raw: &str) -> Result<Category, ApiError> {
    raw.parse::<Category>()
        .map_err(|e| ApiError::bad_request(e.to_string()))
}

/// `min_lon,min_lat,max_lon,max_lat`
pub fn parse_bbox(raw: &str) -> Result<BBox, ApiError> {
    let parts: Vec<f64> = raw
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| ApiError::bad_request("bbox must be four comma-separated numbers"))?;
    let [a, b, c, d] = parts[..] else {
        return Err(ApiError::bad_request(
            "bbox must be min_lon,min_lat,max_lon,max_lat",
        ));
    };
    BBox::new(a, b, c, d).map_err(|e| ApiError::bad_request(e.to_string()))
}

fn require_admin(s: &AppState, headers: &HeaderMap) -> Result<(), ApiError> {
    let cred = s.admin.as_ref().ok_or_else(ApiError::admin_disabled)?;
    match authenticate_admin(headers, cred) {
        AuthOutcome::Authorized => Ok(()),
        AuthOutcome::Unauthorized => Err(ApiError::unauthorized()),
    }
}

/// Runs a store mutation off the async workers.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("mutation task failed: {e}")))?
}

async fn create_space(
    State(s): State<AppState>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    require_admin(&s, &headers)?;
    let draft = parse_draft(&body)?;
    let store = s.store.clone();
    let space = blocking(move || Ok(store.create_space(draft)?)).await?;
    let location = HeaderValue::from_str(&format!("/api/spaces/{}", space.id))
        .map_err(|e| ApiError::internal(e.to_string()))?;
    let mut resp = geojson_response(StatusCode::CREATED, serialize_feature(&space.to_feature()));
    resp.headers_mut().insert(LOCATION, location);
    Ok(resp)
}

async fn update_space(
    State(s): State<AppState>,
    headers: HeaderMap,
    id: IdParam,
    body: Bytes,
) -> Result<Response, ApiError> {
    require_admin(&s, &headers)?;
    let id = id_param(id)?;
    if s.store.snapshot().get(&id).is_none() {
        return Err(ApiError::not_found(format!(
            "no green space with id `{id}`"
        )));
    }
    let patch = parse_patch(&body)?;
    let store = s.store.clone();
    let space = blocking(move || Ok(store.update_space(&id, patch)?)).await?;
    Ok(geojson_response(
        StatusCode::OK,
        serialize_feature(&space.to_feature()),
    ))
}

async fn delete_space(
    State(s): State<AppState>,
    headers: HeaderMap,
    id: IdParam,
) -> Result<StatusCode, ApiError> {
    require_admin(&s, &headers)?;
    let id = id_param(id)?;
    let store = s.store.clone();
    blocking(move || Ok(store.delete_space(&id)?)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn seed(
    State(s): State<AppState>,
    headers: HeaderMap,
    q: Params,
) -> Result<Json<Value>, ApiError> {
    require_admin(&s, &headers)?;
    let q = params(q)?;
    let force = match q.get("force").map(String::as_str) {
        None | Some("false") | Some("0") => false,
        Some("true") | Some("1") => true,
        Some(other) => {
            return Err(ApiError::bad_request(format!(
                "`force` must be true or false, got `{other}`"
            )))
        }
    };
    let store = s.store.clone();
    let created = blocking(move || Ok(store.seed_default(force)?)).await?;
    Ok(Json(json!({"created": created})))
}

fn detail(field: &str, message: impl Into<String>) -> FieldDetail {
    FieldDetail {
        field: field.into(),
        message: message.into(),
    }
}

/// Request bodies are Feature-shaped:
/// `{"type":"Feature","geometry":{...},"properties":{name, category, ...}}`.
struct BodyFields {
    geometry: Option<RawGeometry>,
    name: Option<String>,
    category: Option<Category>,
    description: Option<String>,
    facilities: Option<Vec<String>>,
    photos: Option<Vec<String>>,
}

fn parse_body(body: &[u8]) -> Result<BodyFields, ApiError> {
    let value: Value = serde_json::from_slice(body)
        .map_err(|e| ApiError::validation(vec![detail("body", format!("invalid JSON: {e}"))]))?;
    let obj = value
        .as_object()
        .ok_or_else(|| ApiError::validation(vec![detail("body", "must be a JSON object")]))?;
    let mut problems = Vec::new();
    if let Some(t) = obj.get("type") {
        if t != "Feature" {
            problems.push(detail("type", "must be \"Feature\""));
        }
    }
    let empty = Map::new();
    let props = match obj.get("properties") {
        None | Some(Value::Null) => &empty,
        Some(Value::Object(p)) => p,
        Some(_) => {
            problems.push(detail("properties", "must be an object"));
            &empty
        }
    };
    let geometry = match obj.get("geometry") {
        None | Some(Value::Null) => None,
        Some(g) => match parse_geometry(g) {
            Ok(g) => Some(g),
            Err(msg) => {
                problems.push(detail("geometry", msg));
                None
            }
        },
    };
    let mut string = |name: &str| match props.get(name) {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            problems.push(detail(name, "must be a string"));
            None
        }
    };
    let name = string("name");
    let category_raw = string("category");
    let description = string("description");
    let mut list = |name: &str| match props.get(name) {
        None | Some(Value::Null) => None,
        Some(Value::Array(items)) if items.iter().all(Value::is_string) => Some(
            items
                .iter()
                .filter_map(|v| v.as_str().map(str::to_string))
                .collect(),
        ),
        Some(_) => {
            problems.push(detail(name, "must be an array of strings"));
            None
        }
    };
    let facilities = list("facilities");
    let photos = list("photos");
    let category = match category_raw {
        None => None,
        Some(raw) => match raw.parse::<Category>() {
            Ok(c) => Some(c),
            Err(e) => {
                problems.push(detail("category", e.to_string()));
                None
            }
        },
    };
    if !problems.is_empty() {
        return Err(ApiError::validation(problems));
    }
    Ok(BodyFields {
        geometry,
        name,
        category,
        description,
        facilities,
        photos,
    })
}

fn parse_draft(body: &[u8]) -> Result<Draft, ApiError> {
    let fields = parse_body(body)?;
    let mut missing = Vec::new();
    if fields.geometry.is_none() {
        missing.push(detail("geometry", "required"));
    }
    if fields.name.is_none() {
        missing.push(detail("name", "required"));
    }
    if fields.category.is_none() {
        missing.push(detail("category", "required"));
    }
    let (Some(geometry), Some(name), Some(category)) =
        (fields.geometry, fields.name, fields.category)
    else {
        return Err(ApiError::validation(missing));
    };
    Ok(Draft {
        name,
        category,
        marker: geometry.marker,
        boundary: geometry.boundary,
        description: fields.description.unwrap_or_default(),
        facilities: fields.facilities.unwrap_or_default(),
        photos: fields.photos.unwrap_or_default(),
    })
}

/// A supplied geometry replaces both marker and boundary; a bare `Point`
/// therefore removes any boundary.
fn parse_patch(body: &[u8]) -> Result<Patch, ApiError> {
    let fields = parse_body(body)?;
    let (marker, boundary) = match fields.geometry {
        Some(g) => (Some(g.marker), Some(g.boundary)),
        None => (None, None),
    };
    Ok(Patch {
        name: fields.name,
        category: fields.category,
        marker,
        boundary,
        description: fields.description,
        facilities: fields.facilities,
        photos: fields.photos,
    })
}

/// Resolves a URL path under `root`, refusing any `..` segment.
fn safe_join(root: &Path, url_path: &str) -> Option<PathBuf> {
    let decoded = percent_decode_str(url_path).decode_utf8().ok()?;
    let mut out = root.to_path_buf();
    for seg in decoded.split('/') {
        if seg.contains('\\') || seg.contains('\0') {
            return None;
        }
        match Path::new(seg).components().next() {
            None | Some(Component::CurDir) => {}
            Some(Component::Normal(_)) if Path::new(seg).components().count() == 1 => out.push(seg),
            _ => return None,
        }
    }
    Some(out)
}

async fn read_file(root: &Path, url_path: &str) -> Option<(PathBuf, Vec<u8>)> {
    let path = safe_join(root, url_path)?;
    let canonical_root = tokio::fs::canonicalize(root).await.ok()?;
    let canonical = tokio::fs::canonicalize(&path).await.ok()?;
    if !canonical.starts_with(&canonical_root) || !canonical.is_file() {
        return None;
    }
    let bytes = tokio::fs::read(&canonical).await.ok()?;
    Some((canonical, bytes))
}

fn file_response(path: &Path, bytes: Vec<u8>, head: bool) -> Response {
    let mime = mime_guess::from_path(path).first_or_octet_stream();
    let body = if head { Vec::new() } else { bytes };
    (
        StatusCode::OK,
        [(
            CONTENT_TYPE,
            HeaderValue::from_str(mime.as_ref()).expect("mime is ascii"),
        )],
        body,
    )
        .into_response()
}

/// Webmap bundle and photos. Paths without an extension that do not name a
/// file fall back to the bundle's `index.html` for client-side routes.
async fn static_files(State(s): State<AppState>, method: Method, uri: Uri) -> Response {
    let path = uri.path();
    if path == "/api" || path.starts_with("/api/") {
        return ApiError::not_found(format!("no endpoint at {path}")).into_response();
    }
    if method != Method::GET && method != Method::HEAD {
        return ApiError::method_not_allowed().into_response();
    }
    let head = method == Method::HEAD;
    let not_found = || ApiError::not_found(format!("no file at {path}")).into_response();

    if let Some(rest) = path.strip_prefix("/photos/") {
        let Some(root) = &s.photos_dir else {
            return not_found();
        };
        return match read_file(root, rest).await {
            Some((p, bytes)) => file_response(&p, bytes, head),
            None => not_found(),
        };
    }
    let Some(root) = &s.static_dir else {
        return not_found();
    };
    let rest = path.trim_start_matches('/');
    let rest = if rest.is_empty() { "index.html" } else { rest };
    if safe_join(root, rest).is_none() {
        return not_found();
    }
    if let Some((p, bytes)) = read_file(root, rest).await {
        return file_response(&p, bytes, head);
    }
    let last = rest.rsplit('/').next().unwrap_or_default();
    if !last.contains('.') {
        if let Some((p, bytes)) = read_file(root, "index.html").await {
            return file_response(&p, bytes, head);
        }
    }
    not_found()
}
