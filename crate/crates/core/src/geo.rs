//! WGS84 geometry primitives.
//!
//! Coordinates are decimal degrees in `[lon, lat]` order. Distances are meters
//! on a spherical earth of radius [`EARTH_RADIUS_M`]. Containment and centroids
//! work in planar lon/lat space, which is adequate for city-scale shapes far
//! from the poles and the antimeridian.
//!
//! Every value type here validates on construction, so the operations that
//! take them are total.

use std::fmt;

use thiserror::Error;

/// Mean earth radius used by every distance computation, in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Tolerance for boundary-inclusive containment, in degrees.
pub const BOUNDARY_EPSILON_DEG: f64 = 1e-12;

/// Shoelace area below which a ring is treated as degenerate.
const DEGENERATE_AREA: f64 = 1e-18;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("invalid point: {0}")]
    Point(ViolationKind),
    #[error("invalid polygon: {}", join_violations(.0))]
    Polygon(Vec<Violation>),
    #[error("invalid bbox: {0}")]
    BBox(&'static str),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Where in a geometry a violation was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Marker,
    /// Zero-based index into the boundary ring.
    Vertex(usize),
    Ring,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ViolationKind {
    NonFinite,
    LonOutOfRange(f64),
    LatOutOfRange(f64),
    RingNotClosed,
    TooFewVertices(usize),
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonFinite => write!(f, "coordinate is not a finite number"),
            Self::LonOutOfRange(v) => write!(f, "lon out of range: {v} not in [-180, 180]"),
            Self::LatOutOfRange(v) => write!(f, "lat out of range: {v} not in [-90, 90]"),
            Self::RingNotClosed => write!(f, "ring not closed: first vertex differs from last"),
            Self::TooFewVertices(n) => {
                write!(f, "too few vertices: {n}, a closed ring needs at least 4")
            }
        }
    }
}

/// One broken geometry invariant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub location: Location,
    pub kind: ViolationKind,
}

impl Violation {
    /// The field the violation belongs to: `"marker"` or `"boundary"`.
    pub fn field(&self) -> &'static str {
        match self.location {
            Location::Marker => "marker",
            Location::Vertex(_) | Location::Ring => "boundary",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.location {
            Location::Marker => write!(f, "marker: {}", self.kind),
            Location::Vertex(i) => write!(f, "boundary vertex {i}: {}", self.kind),
            Location::Ring => write!(f, "boundary: {}", self.kind),
        }
    }
}

fn check_coords(lon: f64, lat: f64) -> Option<ViolationKind> {
    if !lon.is_finite() || !lat.is_finite() {
        Some(ViolationKind::NonFinite)
    } else if !(-180.0..=180.0).contains(&lon) {
        Some(ViolationKind::LonOutOfRange(lon))
    } else if !(-90.0..=90.0).contains(&lat) {
        Some(ViolationKind::LatOutOfRange(lat))
    } else {
        None
    }
}

/// A validated WGS84 position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    lon: f64,
    lat: f64,
}

impl GeoPoint {
    pub fn new(lon: f64, lat: f64) -> Result<Self, GeoError> {
        match check_coords(lon, lat) {
            Some(kind) => Err(GeoError::Point(kind)),
            None => Ok(Self { lon, lat }),
        }
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn coords(&self) -> [f64; 2] {
        [self.lon, self.lat]
    }
}

/// A single closed exterior ring. Holes are not represented.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoPolygon {
    exterior: Vec<GeoPoint>,
}

impl GeoPolygon {
    pub fn new(exterior: Vec<GeoPoint>) -> Result<Self, GeoError> {
        let violations = ring_violations(exterior.iter().map(GeoPoint::coords));
        if violations.is_empty() {
            Ok(Self { exterior })
        } else {
            Err(GeoError::Polygon(violations))
        }
    }

    pub fn from_coords(ring: &[[f64; 2]]) -> Result<Self, GeoError> {
        let violations = ring_violations(ring.iter().copied());
        if !violations.is_empty() {
            return Err(GeoError::Polygon(violations));
        }
        let exterior = ring
            .iter()
            .map(|&[lon, lat]| GeoPoint { lon, lat })
            .collect();
        Ok(Self { exterior })
    }

    /// Ring vertices, including the closing vertex.
    pub fn exterior(&self) -> &[GeoPoint] {
        &self.exterior
    }

    pub fn coords(&self) -> Vec<[f64; 2]> {
        self.exterior.iter().map(GeoPoint::coords).collect()
    }

    pub fn bbox(&self) -> BBox {
        let first = self.exterior[0];
        let mut bbox = BBox::from_point(first);
        for p in &self.exterior[1..] {
            bbox = bbox.expand(*p);
        }
        bbox
    }

    /// Edges as vertex pairs, closing edge included.
    fn edges(&self) -> impl Iterator<Item = (GeoPoint, GeoPoint)> + '_ {
        self.exterior.windows(2).map(|w| (w[0], w[1]))
    }
}

fn ring_violations(ring: impl ExactSizeIterator<Item = [f64; 2]> + Clone) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = ring.len();
    for (i, [lon, lat]) in ring.clone().enumerate() {
        if let Some(kind) = check_coords(lon, lat) {
            out.push(Violation {
                location: Location::Vertex(i),
                kind,
            });
        }
    }
    if n < 4 {
        out.push(Violation {
            location: Location::Ring,
            kind: ViolationKind::TooFewVertices(n),
        });
    }
    let mut it = ring;
    let first = it.next();
    let last = it.last();
    let closed = match (first, last) {
        (Some(a), Some(b)) => a[0] == b[0] && a[1] == b[1],
        _ => false,
    };
    if !closed {
        out.push(Violation {
            location: Location::Ring,
            kind: ViolationKind::RingNotClosed,
        });
    }
    out
}

/// Axis-aligned box in lon/lat. Never crosses the antimeridian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BBox {
    pub fn new(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Result<Self, GeoError> {
        if check_coords(min_lon, min_lat).is_some() || check_coords(max_lon, max_lat).is_some() {
            return Err(GeoError::BBox("corner outside WGS84 range"));
        }
        if min_lon > max_lon {
            return Err(GeoError::BBox("min_lon greater than max_lon"));
        }
        if min_lat > max_lat {
            return Err(GeoError::BBox("min_lat greater than max_lat"));
        }
        Ok(Self {
            min_lon,
            min_lat,
            max_lon,
            max_lat,
        })
    }

    /// The box covering the whole globe.
    pub fn world() -> Self {
        Self {
            min_lon: -180.0,
            min_lat: -90.0,
            max_lon: 180.0,
            max_lat: 90.0,
        }
    }

    pub fn from_point(p: GeoPoint) -> Self {
        Self {
            min_lon: p.lon,
            min_lat: p.lat,
            max_lon: p.lon,
            max_lat: p.lat,
        }
    }

    pub fn expand(self, p: GeoPoint) -> Self {
        Self {
            min_lon: self.min_lon.min(p.lon),
            min_lat: self.min_lat.min(p.lat),
            max_lon: self.max_lon.max(p.lon),
            max_lat: self.max_lat.max(p.lat),
        }
    }

    pub fn union(self, other: BBox) -> Self {
        Self {
            min_lon: self.min_lon.min(other.min_lon),
            min_lat: self.min_lat.min(other.min_lat),
            max_lon: self.max_lon.max(other.max_lon),
            max_lat: self.max_lat.max(other.max_lat),
        }
    }

    /// Closed-interval intersection: boxes sharing only an edge intersect.
    pub fn intersects(&self, other: &BBox) -> bool {
        self.min_lon <= other.max_lon
            && other.min_lon <= self.max_lon
            && self.min_lat <= other.max_lat
            && other.min_lat <= self.max_lat
    }

    pub fn contains_point(&self, p: GeoPoint) -> bool {
        (self.min_lon..=self.max_lon).contains(&p.lon)
            && (self.min_lat..=self.max_lat).contains(&p.lat)
    }

    pub fn contains_bbox(&self, other: &BBox) -> bool {
        self.min_lon <= other.min_lon
            && self.min_lat <= other.min_lat
            && self.max_lon >= other.max_lon
            && self.max_lat >= other.max_lat
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.min_lon + self.max_lon) / 2.0,
            (self.min_lat + self.max_lat) / 2.0,
        )
    }
}

/// Great-circle distance in meters by the haversine formula.
///
/// Symmetric bit-for-bit in its arguments and never exceeds `π·R`.
pub fn haversine_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let half_dlat = ((b.lat - a.lat).to_radians() / 2.0).sin();
    let half_dlon = ((b.lon - a.lon).to_radians() / 2.0).sin();
    let h = half_dlat * half_dlat + lat1.cos() * lat2.cos() * half_dlon * half_dlon;
    let h = h.clamp(0.0, 1.0);
    2.0 * EARTH_RADIUS_M * h.sqrt().asin()
}

/// Containment by even-odd ray casting, inclusive of the boundary within
/// [`BOUNDARY_EPSILON_DEG`].
pub fn point_in_polygon(p: GeoPoint, poly: &GeoPolygon) -> bool {
    if poly
        .edges()
        .any(|(a, b)| segment_distance(p, a, b) <= BOUNDARY_EPSILON_DEG)
    {
        return true;
    }
    let (px, py) = (p.lon, p.lat);
    let mut inside = false;
    for (a, b) in poly.edges() {
        if (a.lat > py) != (b.lat > py) {
            let cross_x = (b.lon - a.lon) * (py - a.lat) / (b.lat - a.lat) + a.lon;
            if px < cross_x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Planar distance, in degrees, from `p` to the segment `a`-`b`.
fn segment_distance(p: GeoPoint, a: GeoPoint, b: GeoPoint) -> f64 {
    let (dx, dy) = (b.lon - a.lon, b.lat - a.lat);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.lon - a.lon) * dx + (p.lat - a.lat) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.lon + t * dx, a.lat + t * dy);
    (p.lon - cx).hypot(p.lat - cy)
}

/// Smallest box holding the marker and every boundary vertex.
pub fn geometry_bbox(marker: GeoPoint, boundary: Option<&GeoPolygon>) -> BBox {
    let bbox = BBox::from_point(marker);
    match boundary {
        Some(poly) => bbox.union(poly.bbox()),
        None => bbox,
    }
}

/// Area centroid of the exterior ring (shoelace formula).
///
/// Degenerate rings fall back to the mean of the vertices without the closing
/// vertex.
pub fn polygon_centroid(poly: &GeoPolygon) -> GeoPoint {
    let ring = poly.exterior();
    // Work relative to the first vertex to keep the cross products small.
    let origin = ring[0];
    let mut twice_area = 0.0;
    let (mut cx, mut cy) = (0.0, 0.0);
    for w in ring.windows(2) {
        let (x0, y0) = (w[0].lon - origin.lon, w[0].lat - origin.lat);
        let (x1, y1) = (w[1].lon - origin.lon, w[1].lat - origin.lat);
        let cross = x0 * y1 - x1 * y0;
        twice_area += cross;
        cx += (x0 + x1) * cross;
        cy += (y0 + y1) * cross;
    }
    if (twice_area / 2.0).abs() < DEGENERATE_AREA {
        let open = &ring[..ring.len() - 1];
        let n = open.len() as f64;
        let lon = open.iter().map(|p| p.lon).sum::<f64>() / n;
        let lat = open.iter().map(|p| p.lat).sum::<f64>() / n;
        return GeoPoint { lon, lat };
    }
    let lon = origin.lon + cx / (3.0 * twice_area);
    let lat = origin.lat + cy / (3.0 * twice_area);
    // A mean of in-range values is in range; clamp guards the last ulp.
    GeoPoint {
        lon: lon.clamp(-180.0, 180.0),
        lat: lat.clamp(-90.0, 90.0),
    }
}

/// Checks raw marker and boundary coordinates, returning every violation.
/// An empty list means the geometry is valid.
pub fn validate_geometry(marker: [f64; 2], boundary: Option<&[[f64; 2]]>) -> Vec<Violation> {
    let mut out = Vec::new();
    if let Some(kind) = check_coords(marker[0], marker[1]) {
        out.push(Violation {
            location: Location::Marker,
            kind,
        });
    }
    if let Some(ring) = boundary {
        out.extend(ring_violations(ring.iter().copied()));
    }
    out
}
