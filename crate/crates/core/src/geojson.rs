//! Strict GeoJSON (RFC 7946 subset) reader and canonical writer for green
//! space records.
//!
//! A record is one `Feature`. Its geometry is a `Point` (the marker) or, when
//! the record has a boundary, a `GeometryCollection` holding the `Point` first
//! and a single-ring `Polygon` second. Properties form a closed schema:
//! unknown members are dropped on parse.
//!
//! The writer is canonical. Features are ordered by id, keys appear in a fixed
//! order, coordinates carry at most nine fractional digits with trailing
//! zeros trimmed, and indentation is two spaces:
//!
//! ```text
//! FeatureCollection: type, features
//! Feature:           type, geometry, properties
//! Geometry:          type, coordinates | geometries
//! properties:        id, name, category, description, facilities, photos,
//!                    created_at, updated_at
//! ```
//!
//! Absent timestamps are omitted rather than written as `null`.

use std::collections::HashSet;
use std::fmt::{self, Write as _};

use serde_json::{Map, Value};
use thiserror::Error;

use crate::geo::{validate_geometry, GeoPoint, GeoPolygon, Violation};
use crate::model::{
    format_timestamp, is_valid_photo_path, is_valid_slug, parse_timestamp, Category, Timestamp,
};

/// One green space as it appears in a GeoJSON document.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceFeature {
    pub id: String,
    pub name: String,
    pub category: Category,
    pub marker: GeoPoint,
    pub boundary: Option<GeoPolygon>,
    pub description: String,
    pub facilities: Vec<String>,
    pub photos: Vec<String>,
    pub created_at: Option<Timestamp>,
    pub updated_at: Option<Timestamp>,
}

/// Marker and optional ring as read from a document, before range checks.
#[derive(Debug, Clone, PartialEq)]
pub struct RawGeometry {
    pub marker: [f64; 2],
    pub boundary: Option<Vec<[f64; 2]>>,
}

impl RawGeometry {
    pub fn violations(&self) -> Vec<Violation> {
        validate_geometry(self.marker, self.boundary.as_deref())
    }

    /// Builds validated geometry, or returns every violation.
    pub fn validate(&self) -> Result<(GeoPoint, Option<GeoPolygon>), Vec<Violation>> {
        let violations = self.violations();
        if !violations.is_empty() {
            return Err(violations);
        }
        let marker = GeoPoint::new(self.marker[0], self.marker[1]).expect("validated");
        let boundary = self
            .boundary
            .as_deref()
            .map(|ring| GeoPolygon::from_coords(ring).expect("validated"));
        Ok((marker, boundary))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("malformed JSON: {0}")]
    Syntax(String),
    #[error("document must not start with a byte order mark")]
    ByteOrderMark,
    #[error("document is not valid UTF-8")]
    NotUtf8,
    #[error("top level is not a FeatureCollection")]
    NotFeatureCollection,
    #[error("`features` must be an array")]
    FeaturesNotArray,
    #[error("not a Feature object")]
    NotAFeature,
    #[error("missing required property `{0}`")]
    MissingProperty(&'static str),
    #[error("property `{name}`: {reason}")]
    InvalidProperty { name: &'static str, reason: String },
    #[error("invalid category `{0}`")]
    InvalidCategory(String),
    #[error("invalid geometry: {0}")]
    MalformedGeometry(String),
    #[error("invalid geometry: {}", join(.0))]
    GeometryViolations(Vec<Violation>),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Failure report: the first offending feature (if the failure is inside
/// one) and the reason.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ParseError {
    pub feature: Option<usize>,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.feature {
            Some(i) => write!(f, "feature {i}: {}", self.kind),
            None => write!(f, "{}", self.kind),
        }
    }
}

impl ParseError {
    fn document(kind: ParseErrorKind) -> Self {
        Self {
            feature: None,
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SerializeError {
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
}

/// Parses raw bytes, rejecting a UTF-8 byte order mark and invalid UTF-8.
pub fn parse_feature_collection_bytes(bytes: &[u8]) -> Result<Vec<SpaceFeature>, ParseError> {
    if bytes.starts_with(&[0xEF, 0xBB, 0xBF]) {
        return Err(ParseError::document(ParseErrorKind::ByteOrderMark));
    }
    let text =
        std::str::from_utf8(bytes).map_err(|_| ParseError::document(ParseErrorKind::NotUtf8))?;
    parse_feature_collection(text)
}

pub fn parse_feature_collection(text: &str) -> Result<Vec<SpaceFeature>, ParseError> {
    if text.starts_with('\u{feff}') {
        return Err(ParseError::document(ParseErrorKind::ByteOrderMark));
    }
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| ParseError::document(ParseErrorKind::Syntax(e.to_string())))?;
    let obj = doc
        .as_object()
        .filter(|o| o.get("type").and_then(Value::as_str) == Some("FeatureCollection"))
        .ok_or_else(|| ParseError::document(ParseErrorKind::NotFeatureCollection))?;
    let features = obj
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| ParseError::document(ParseErrorKind::FeaturesNotArray))?;

    let mut seen = HashSet::with_capacity(features.len());
    let mut out = Vec::with_capacity(features.len());
    for (i, value) in features.iter().enumerate() {
        let at = |kind| ParseError {
            feature: Some(i),
            kind,
        };
        let feature = parse_feature(value).map_err(at)?;
        if !seen.insert(feature.id.clone()) {
            return Err(at(ParseErrorKind::DuplicateId(feature.id)));
        }
        out.push(feature);
    }
    Ok(out)
}

/// Parses a single `Feature` object.
pub fn parse_feature(value: &Value) -> Result<SpaceFeature, ParseErrorKind> {
    let obj = value
        .as_object()
        .filter(|o| o.get("type").and_then(Value::as_str) == Some("Feature"))
        .ok_or(ParseErrorKind::NotAFeature)?;
    let empty = Map::new();
    let props = match obj.get("properties") {
        Some(Value::Object(p)) => p,
        Some(Value::Null) | None => &empty,
        Some(_) => {
            return Err(ParseErrorKind::InvalidProperty {
                name: "properties",
                reason: "must be an object".into(),
            })
        }
    };

    let id = required_string(props, "id")?;
    if !is_valid_slug(&id) {
        return Err(ParseErrorKind::InvalidProperty {
            name: "id",
            reason: format!("`{id}` is not a lowercase hyphenated slug"),
        });
    }
    let name = required_string(props, "name")?;
    if name.trim().is_empty() {
        return Err(ParseErrorKind::InvalidProperty {
            name: "name",
            reason: "must not be blank".into(),
        });
    }
    let category = required_string(props, "category")?;
    let category = category
        .parse::<Category>()
        .map_err(|_| ParseErrorKind::InvalidCategory(category))?;

    let geometry = obj
        .get("geometry")
        .ok_or_else(|| ParseErrorKind::MalformedGeometry("missing geometry".into()))?;
    let (marker, boundary) = parse_geometry(geometry)
        .map_err(ParseErrorKind::MalformedGeometry)?
        .validate()
        .map_err(ParseErrorKind::GeometryViolations)?;

    let description = optional_string(props, "description")?.unwrap_or_default();
    let facilities = optional_string_list(props, "facilities")?;
    let photos = optional_string_list(props, "photos")?;
    if let Some(bad) = photos.iter().find(|p| !is_valid_photo_path(p)) {
        return Err(ParseErrorKind::InvalidProperty {
            name: "photos",
            reason: format!("`{bad}` is not a relative path"),
        });
    }
    let created_at = optional_timestamp(props, "created_at")?;
    let updated_at = optional_timestamp(props, "updated_at")?;
    if let (Some(c), Some(u)) = (created_at, updated_at) {
        if u < c {
            return Err(ParseErrorKind::InvalidProperty {
                name: "updated_at",
                reason: "precedes created_at".into(),
            });
        }
    }

    Ok(SpaceFeature {
        id,
        name,
        category,
        marker,
        boundary,
        description,
        facilities,
        photos,
        created_at,
        updated_at,
    })
}

/// Structural read of a `Point` or `GeometryCollection[Point, Polygon]`.
/// Coordinate ranges are not checked here.
pub fn parse_geometry(value: &Value) -> Result<RawGeometry, String> {
    let obj = value.as_object().ok_or("geometry must be an object")?;
    match obj.get("type").and_then(Value::as_str) {
        Some("Point") => Ok(RawGeometry {
            marker: position(obj.get("coordinates"))?,
            boundary: None,
        }),
        Some("GeometryCollection") => {
            let parts = obj
                .get("geometries")
                .and_then(Value::as_array)
                .ok_or("GeometryCollection needs a `geometries` array")?;
            let [point, polygon] = parts.as_slice() else {
                return Err("GeometryCollection must hold exactly a Point and a Polygon".into());
            };
            let marker = match typed(point, "Point") {
                Some(p) => position(p.get("coordinates"))?,
                None => return Err("first member of GeometryCollection must be a Point".into()),
            };
            let ring = match typed(polygon, "Polygon") {
                Some(p) => single_ring(p.get("coordinates"))?,
                None => return Err("second member of GeometryCollection must be a Polygon".into()),
            };
            Ok(RawGeometry {
                marker,
                boundary: Some(ring),
            })
        }
        Some(other) => Err(format!("unsupported geometry type `{other}`")),
        None => Err("geometry has no `type`".into()),
    }
}

fn typed<'a>(value: &'a Value, ty: &str) -> Option<&'a Map<String, Value>> {
    value
        .as_object()
        .filter(|o| o.get("type").and_then(Value::as_str) == Some(ty))
}

fn position(value: Option<&Value>) -> Result<[f64; 2], String> {
    match value.and_then(Value::as_array).map(Vec::as_slice) {
        Some([lon, lat]) => match (lon.as_f64(), lat.as_f64()) {
            (Some(lon), Some(lat)) => Ok([lon, lat]),
            _ => Err("position members must be numbers".into()),
        },
        _ => Err("position must be an array of [lon, lat]".into()),
    }
}

fn single_ring(value: Option<&Value>) -> Result<Vec<[f64; 2]>, String> {
    let rings = value
        .and_then(Value::as_array)
        .ok_or("Polygon coordinates must be an array of rings")?;
    match rings.as_slice() {
        [ring] => ring
            .as_array()
            .ok_or_else(|| "ring must be an array of positions".to_string())?
            .iter()
            .map(|p| position(Some(p)))
            .collect(),
        [] => Err("Polygon has no rings".into()),
        _ => Err("Polygon holes are not supported".into()),
    }
}

fn required_string(
    props: &Map<String, Value>,
    name: &'static str,
) -> Result<String, ParseErrorKind> {
    optional_string(props, name)?.ok_or(ParseErrorKind::MissingProperty(name))
}

fn optional_string(
    props: &Map<String, Value>,
    name: &'static str,
) -> Result<Option<String>, ParseErrorKind> {
    match props.get(name) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(ParseErrorKind::InvalidProperty {
            name,
            reason: "must be a string".into(),
        }),
    }
}

fn optional_string_list(
    props: &Map<String, Value>,
    name: &'static str,
) -> Result<Vec<String>, ParseErrorKind> {
    let invalid = || ParseErrorKind::InvalidProperty {
        name,
        reason: "must be an array of strings".into(),
    };
    match props.get(name) {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| v.as_str().map(str::to_string).ok_or_else(invalid))
            .collect(),
        Some(_) => Err(invalid()),
    }
}

fn optional_timestamp(
    props: &Map<String, Value>,
    name: &'static str,
) -> Result<Option<Timestamp>, ParseErrorKind> {
    optional_string(props, name)?
        .map(|s| {
            parse_timestamp(&s).ok_or_else(|| ParseErrorKind::InvalidProperty {
                name,
                reason: format!("`{s}` is not an RFC 3339 timestamp"),
            })
        })
        .transpose()
}

/// Canonical document for a record set. Output order is ascending id.
pub fn serialize_feature_collection(features: &[SpaceFeature]) -> Result<String, SerializeError> {
    let mut sorted: Vec<&SpaceFeature> = features.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = sorted.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(SerializeError::DuplicateId(w[0].id.clone()));
    }
    let mut out = String::from("{\n  \"type\": \"FeatureCollection\",\n  \"features\": [");
    for (i, f) in sorted.iter().enumerate() {
        out.push_str(if i == 0 { "\n" } else { ",\n" });
        write_feature(&mut out, f, 4);
    }
    if !sorted.is_empty() {
        out.push_str("\n  ");
    }
    out.push_str("]\n}\n");
    Ok(out)
}

/// Canonical text of a single `Feature`, as served for one record.
pub fn serialize_feature(feature: &SpaceFeature) -> String {
    let mut out = String::new();
    write_feature(&mut out, feature, 0);
    out.push('\n');
    out
}

/// The feature's properties object with keys in canonical order.
pub fn properties_json(f: &SpaceFeature) -> Value {
    let mut map = Map::new();
    map.insert("id".into(), f.id.clone().into());
    map.insert("name".into(), f.name.clone().into());
    map.insert("category".into(), f.category.as_str().into());
    map.insert("description".into(), f.description.clone().into());
    map.insert("facilities".into(), f.facilities.clone().into());
    map.insert("photos".into(), f.photos.clone().into());
    if let Some(t) = &f.created_at {
        map.insert("created_at".into(), format_timestamp(t).into());
    }
    if let Some(t) = &f.updated_at {
        map.insert("updated_at".into(), format_timestamp(t).into());
    }
    Value::Object(map)
}

fn write_feature(out: &mut String, f: &SpaceFeature, indent: usize) {
    let pad = " ".repeat(indent);
    let pad2 = " ".repeat(indent + 2);
    let pad4 = " ".repeat(indent + 4);
    let _ = write!(
        out,
        "{pad}{{\n{pad2}\"type\": \"Feature\",\n{pad2}\"geometry\": "
    );
    let point = format!(
        "{{\"type\": \"Point\", \"coordinates\": {}}}",
        fmt_position(f.marker.coords())
    );
    match &f.boundary {
        None => out.push_str(&point),
        Some(poly) => {
            let ring = poly
                .coords()
                .into_iter()
                .map(fmt_position)
                .collect::<Vec<_>>()
                .join(", ");
            let _ = write!(
                out,
                "{{\n{pad4}\"type\": \"GeometryCollection\",\n{pad4}\"geometries\": [\n\
                 {pad4}  {point},\n\
                 {pad4}  {{\"type\": \"Polygon\", \"coordinates\": [[{ring}]]}}\n\
                 {pad4}]\n{pad2}}}"
            );
        }
    }
    let _ = write!(out, ",\n{pad2}\"properties\": {{\n");
    let mut fields = vec![
        ("id", json_str(&f.id)),
        ("name", json_str(&f.name)),
        ("category", json_str(f.category.as_str())),
        ("description", json_str(&f.description)),
        ("facilities", json_str_list(&f.facilities)),
        ("photos", json_str_list(&f.photos)),
    ];
    if let Some(t) = &f.created_at {
        fields.push(("created_at", json_str(&format_timestamp(t))));
    }
    if let Some(t) = &f.updated_at {
        fields.push(("updated_at", json_str(&format_timestamp(t))));
    }
    let body = fields
        .into_iter()
        .map(|(k, v)| format!("{pad4}\"{k}\": {v}"))
        .collect::<Vec<_>>()
        .join(",\n");
    let _ = write!(out, "{body}\n{pad2}}}\n{pad}}}");
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn json_str_list(items: &[String]) -> String {
    let inner = items.iter().map(|s| json_str(s)).collect::<Vec<_>>();
    format!("[{}]", inner.join(", "))
}

fn fmt_position([lon, lat]: [f64; 2]) -> String {
    format!("[{}, {}]", fmt_coord(lon), fmt_coord(lat))
}

/// The value a coordinate takes after a serialize/parse cycle.
pub fn quantize_coord(x: f64) -> f64 {
    fmt_coord(x).parse().expect("formatted float parses")
}

/// Up to nine fractional digits, trailing zeros trimmed, no negative zero.
pub fn fmt_coord(x: f64) -> String {
    let mut s = format!("{x:.9}");
    let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
    s.truncate(trimmed);
    if s == "-0" {
        s = "0".into();
    }
    s
}
