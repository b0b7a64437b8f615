//! Sort-Tile-Recursive packed R-tree over record markers and boxes.
//!
//! The index is an immutable value. [`SpatialIndex::apply_mutation`] returns a
//! successor built from the mutated entry set; at registry scale a full
//! rebuild is cheap and keeps the tree perfectly packed.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::geo::{haversine_distance, BBox, GeoPoint};

/// Maximum children per node.
pub const MAX_FANOUT: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndexError {
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("unknown id `{0}`")]
    MissingId(String),
    #[error("entry `{0}`: bbox does not contain marker")]
    MarkerOutsideBBox(String),
    #[error("tree invariant broken: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    id: String,
    marker: GeoPoint,
    bbox: BBox,
}

impl IndexEntry {
    pub fn new(id: impl Into<String>, marker: GeoPoint, bbox: BBox) -> Result<Self, IndexError> {
        let id = id.into();
        if !bbox.contains_point(marker) {
            return Err(IndexError::MarkerOutsideBBox(id));
        }
        Ok(Self { id, marker, bbox })
    }

    /// Entry whose box is the degenerate box of its marker.
    pub fn point(id: impl Into<String>, marker: GeoPoint) -> Self {
        Self {
            id: id.into(),
            marker,
            bbox: BBox::from_point(marker),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn marker(&self) -> GeoPoint {
        self.marker
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }
}

#[derive(Debug, Clone)]
pub enum Mutation {
    Insert(IndexEntry),
    Remove(String),
    Replace(IndexEntry),
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bbox: BBox, items: Vec<usize> },
    Branch { bbox: BBox, children: Vec<Node> },
}

impl Node {
    fn bbox(&self) -> BBox {
        match self {
            Node::Leaf { bbox, .. } | Node::Branch { bbox, .. } => *bbox,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SpatialIndex {
    /// Sorted by id.
    entries: Vec<IndexEntry>,
    root: Option<Node>,
}

impl SpatialIndex {
    /// Bulk-loads an index. Input order does not affect query results.
    pub fn build(mut entries: Vec<IndexEntry>) -> Result<Self, IndexError> {
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = entries.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(IndexError::DuplicateId(w[0].id.clone()));
        }
        let root = pack(&entries);
        Ok(Self { entries, root })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in ascending id order.
    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Option<&IndexEntry> {
        self.position(id).map(|i| &self.entries[i])
    }

    fn position(&self, id: &str) -> Option<usize> {
        self.entries
            .binary_search_by(|e| e.id.as_str().cmp(id))
            .ok()
    }

    /// Ids whose stored box intersects `query`, ascending.
    pub fn query_bbox(&self, query: &BBox) -> Vec<String> {
        let mut hits = Vec::new();
        let mut stack: Vec<&Node> = self.root.iter().collect();
        while let Some(node) = stack.pop() {
            if !node.bbox().intersects(query) {
                continue;
            }
            match node {
                Node::Leaf { items, .. } => hits.extend(
                    items
                        .iter()
                        .copied()
                        .filter(|&i| self.entries[i].bbox.intersects(query)),
                ),
                Node::Branch { children, .. } => stack.extend(children.iter()),
            }
        }
        // Entry positions follow id order.
        hits.sort_unstable();
        hits.into_iter()
            .map(|i| self.entries[i].id.clone())
            .collect()
    }

    /// The `k` entries whose markers are nearest to `origin` by great-circle
    /// distance. Ties are broken by ascending id.
    pub fn k_nearest(&self, origin: GeoPoint, k: usize) -> Vec<(String, f64)> {
        let Some(root) = &self.root else {
            return Vec::new();
        };
        if k == 0 {
            return Vec::new();
        }
        let mut frontier = BinaryHeap::new();
        frontier.push(Pending {
            bound: 0.0,
            node: root,
        });
        // Max-heap on (distance, id): the top is the current worst kept result.
        let mut best: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);

        while let Some(Pending { bound, node }) = frontier.pop() {
            if best.len() == k && bound > best.peek().map_or(f64::INFINITY, |c| c.dist) {
                break;
            }
            match node {
                Node::Leaf { items, .. } => {
                    for &i in items {
                        let cand = Candidate {
                            dist: haversine_distance(origin, self.entries[i].marker),
                            pos: i,
                        };
                        if best.len() < k {
                            best.push(cand);
                        } else if best.peek().is_some_and(|worst| cand < *worst) {
                            best.pop();
                            best.push(cand);
                        }
                    }
                }
                Node::Branch { children, .. } => {
                    for child in children {
                        let bound = distance_lower_bound(origin, &child.bbox());
                        let worst = best.peek().map_or(f64::INFINITY, |c| c.dist);
                        if best.len() < k || bound <= worst {
                            frontier.push(Pending { bound, node: child });
                        }
                    }
                }
            }
        }
        best.into_sorted_vec()
            .into_iter()
            .map(|c| (self.entries[c.pos].id.clone(), c.dist))
            .collect()
    }

    /// Successor index with one mutation applied.
    pub fn apply_mutation(&self, mutation: Mutation) -> Result<Self, IndexError> {
        let mut entries = self.entries.clone();
        match mutation {
            Mutation::Insert(entry) => {
                if self.position(&entry.id).is_some() {
                    return Err(IndexError::DuplicateId(entry.id));
                }
                entries.push(entry);
            }
            Mutation::Remove(id) => {
                let pos = self.position(&id).ok_or(IndexError::MissingId(id))?;
                entries.remove(pos);
            }
            Mutation::Replace(entry) => {
                let pos = self
                    .position(&entry.id)
                    .ok_or_else(|| IndexError::MissingId(entry.id.clone()))?;
                entries[pos] = entry;
            }
        }
        Self::build(entries)
    }

    /// Walks the tree checking that each node box contains its children,
    /// fan-out stays within bounds and every entry appears exactly once.
    pub fn audit(&self) -> Result<(), IndexError> {
        let mut seen = vec![false; self.entries.len()];
        if let Some(root) = &self.root {
            self.audit_node(root, &mut seen)?;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(IndexError::Corrupt(format!(
                "entry `{}` not reachable",
                self.entries[i].id
            )));
        }
        Ok(())
    }

    fn audit_node(&self, node: &Node, seen: &mut [bool]) -> Result<(), IndexError> {
        let bbox = node.bbox();
        let child_boxes: Vec<BBox> = match node {
            Node::Leaf { items, .. } => {
                for &i in items {
                    if std::mem::replace(&mut seen[i], true) {
                        return Err(IndexError::Corrupt(format!(
                            "entry `{}` stored twice",
                            self.entries[i].id
                        )));
                    }
                }
                items.iter().map(|&i| self.entries[i].bbox).collect()
            }
            Node::Branch { children, .. } => {
                for child in children {
                    self.audit_node(child, seen)?;
                }
                children.iter().map(Node::bbox).collect()
            }
        };
        if child_boxes.is_empty() || child_boxes.len() > MAX_FANOUT {
            return Err(IndexError::Corrupt(format!(
                "node with {} children",
                child_boxes.len()
            )));
        }
        if let Some(b) = child_boxes.iter().find(|b| !bbox.contains_bbox(b)) {
            return Err(IndexError::Corrupt(format!(
                "child box {b:?} escapes parent {bbox:?}"
            )));
        }
        Ok(())
    }
}

struct Pending<'a> {
    bound: f64,
    node: &'a Node,
}

impl PartialEq for Pending<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending<'_> {}

impl PartialOrd for Pending<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending<'_> {
    // Reversed so the max-heap pops the smallest bound first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound)
    }
}

struct Candidate {
    dist: f64,
    /// Position in the id-sorted entry list, so it orders like the id.
    pos: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.pos.cmp(&other.pos))
    }
}

fn pack(entries: &[IndexEntry]) -> Option<Node> {
    if entries.is_empty() {
        return None;
    }
    let items: Vec<usize> = (0..entries.len()).collect();
    let mut level: Vec<Node> = str_groups(items, |&i| entries[i].bbox)
        .into_iter()
        .map(|items| Node::Leaf {
            bbox: union_all(items.iter().map(|&i| entries[i].bbox)),
            items,
        })
        .collect();
    while level.len() > 1 {
        level = str_groups(level, Node::bbox)
            .into_iter()
            .map(|children| Node::Branch {
                bbox: union_all(children.iter().map(Node::bbox)),
                children,
            })
            .collect();
    }
    level.pop()
}

/// One STR pass: sort by box center longitude, cut into vertical slices,
/// sort each slice by center latitude and chunk into groups of `MAX_FANOUT`.
fn str_groups<T>(mut items: Vec<T>, bbox_of: impl Fn(&T) -> BBox) -> Vec<Vec<T>> {
    let groups = items.len().div_ceil(MAX_FANOUT);
    let slices = (groups as f64).sqrt().ceil() as usize;
    let slice_len = slices * MAX_FANOUT;

    items.sort_by(|a, b| bbox_of(a).center().0.total_cmp(&bbox_of(b).center().0));
    let mut out = Vec::with_capacity(groups);
    let mut rest = items.into_iter().peekable();
    while rest.peek().is_some() {
        let mut slice: Vec<T> = rest.by_ref().take(slice_len).collect();
        slice.sort_by(|a, b| bbox_of(a).center().1.total_cmp(&bbox_of(b).center().1));
        let mut slice = slice.into_iter().peekable();
        while slice.peek().is_some() {
            out.push(slice.by_ref().take(MAX_FANOUT).collect());
        }
    }
    out
}

fn union_all(mut boxes: impl Iterator<Item = BBox>) -> BBox {
    let first = boxes.next().expect("non-empty group");
    boxes.fold(first, BBox::union)
}

/// A value no greater than the great-circle distance from `p` to any point
/// of `bbox`.
fn distance_lower_bound(p: GeoPoint, bbox: &BBox) -> f64 {
    let exact = min_distance_to_box(p, bbox);
    // Shave off rounding slack so pruning never drops an equal-distance entry.
    (exact * (1.0 - 1e-9) - 1e-6).max(0.0)
}

fn min_distance_to_box(p: GeoPoint, bbox: &BBox) -> f64 {
    if bbox.contains_point(p) {
        return 0.0;
    }
    let clamp_lat = |lat: f64| lat.clamp(bbox.min_lat, bbox.max_lat);
    if (bbox.min_lon..=bbox.max_lon).contains(&p.lon()) {
        // Straight along the meridian.
        let q = GeoPoint::new(p.lon(), clamp_lat(p.lat())).expect("inside box");
        return haversine_distance(p, q);
    }
    // The nearest box point lies on the meridian edge with the smallest
    // longitude gap; find the latitude on that edge segment closest to `p`.
    let gap_min = wrapped_gap(p.lon(), bbox.min_lon);
    let gap_max = wrapped_gap(p.lon(), bbox.max_lon);
    let (edge_lon, gap) = if gap_min <= gap_max {
        (bbox.min_lon, gap_min)
    } else {
        (bbox.max_lon, gap_max)
    };
    let phi = p.lat().to_radians();
    let (a, b) = (phi.sin(), phi.cos() * gap.to_radians().cos());
    // cos(distance) on the edge is a·sin(lat) + b·cos(lat), peaking at atan2(a, b).
    let score = |lat: f64| a * lat.sin() + b * lat.cos();
    let (lo, hi) = (bbox.min_lat.to_radians(), bbox.max_lat.to_radians());
    let peak = a.atan2(b);
    let mut best = if score(lo) >= score(hi) { lo } else { hi };
    if (lo..=hi).contains(&peak) && score(peak) > score(best) {
        best = peak;
    }
    let q = GeoPoint::new(edge_lon, clamp_lat(best.to_degrees())).expect("inside box");
    haversine_distance(p, q)
}

/// Absolute longitude difference, going the short way around.
fn wrapped_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}
