//! Lane geometry approximated by oriented rectangles.
//!
//! Dense lane reference lines are simplified with iterative end-point fitting and
//! one rectangle is fitted per remaining segment. Rectangles carry successor ids so
//! a lane (and branches at intersections) can be followed downstream.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::angle::{angular_distance, wrap_angle};
use crate::error::{Error, Result};
use crate::lmb::Vector2;

pub type Point = Vector2;
pub type RectId = u32;

/// Default lane width in meters.
pub const DEFAULT_LANE_WIDTH: f64 = 3.5;
pub const DEFAULT_TOLERANCE: f64 = 0.1;

const BOUNDARY_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub id: RectId,
    pub center: Point,
    /// Extent along the direction of travel.
    pub length: f64,
    pub width: f64,
    /// Direction of travel, radians.
    pub orientation: f64,
    #[serde(default)]
    pub successors: Vec<RectId>,
}

impl Rectangle {
    /// Coordinates of `p` in the rectangle frame: (along-lane, across-lane).
    pub fn local(&self, p: &Point) -> (f64, f64) {
        let d = p - self.center;
        let (s, c) = self.orientation.sin_cos();
        (c * d.x + s * d.y, -s * d.x + c * d.y)
    }

    /// Boundary-inclusive containment.
    pub fn contains(&self, p: &Point) -> bool {
        let (u, w) = self.local(p);
        u.abs() <= 0.5 * self.length + BOUNDARY_EPS && w.abs() <= 0.5 * self.width + BOUNDARY_EPS
    }

    pub fn corners(&self) -> [Point; 4] {
        let (s, c) = self.orientation.sin_cos();
        let along = Point::new(c, s) * (0.5 * self.length);
        let across = Point::new(-s, c) * (0.5 * self.width);
        [
            self.center + along + across,
            self.center + along - across,
            self.center - along - across,
            self.center - along + across,
        ]
    }

    pub fn diagonal(&self) -> f64 {
        self.length.hypot(self.width)
    }

    fn bounding_box(&self) -> (Point, Point) {
        let corners = self.corners();
        let mut lo = corners[0];
        let mut hi = corners[0];
        for c in &corners[1..] {
            lo = lo.inf(c);
            hi = hi.sup(c);
        }
        (lo, hi)
    }

    /// Along-lane distance left until `p` reaches the downstream short edge,
    /// clamped to `[0, length]`. Does not check containment.
    pub fn remaining_length(&self, p: &Point) -> f64 {
        let (u, _) = self.local(p);
        (0.5 * self.length - u).clamp(0.0, self.length)
    }
}

#[derive(Serialize, Deserialize)]
struct RoadMapFile {
    rectangles: Vec<Rectangle>,
}

/// Uniform grid over rectangle bounding boxes.
#[derive(Clone, Debug, Default)]
struct SpatialGrid {
    cell: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl SpatialGrid {
    fn build(rects: &[Rectangle]) -> Self {
        let cell = rects.iter().map(Rectangle::diagonal).fold(0.0, f64::max).max(1e-6);
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (idx, r) in rects.iter().enumerate() {
            let (lo, hi) = r.bounding_box();
            let (i0, j0) = Self::key_of(cell, &lo);
            let (i1, j1) = Self::key_of(cell, &hi);
            for i in i0..=i1 {
                for j in j0..=j1 {
                    cells.entry((i, j)).or_default().push(idx);
                }
            }
        }
        Self { cell, cells }
    }

    fn key_of(cell: f64, p: &Point) -> (i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
    }

    fn candidates(&self, p: &Point) -> &[usize] {
        self.cells
            .get(&Self::key_of(self.cell, p))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

/// Immutable set of rectangles with a spatial index.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RoadMapFile", into = "RoadMapFile")]
pub struct RoadMap {
    rectangles: Vec<Rectangle>,
    index: HashMap<RectId, usize>,
    predecessors: HashMap<RectId, Vec<RectId>>,
    grid: SpatialGrid,
}

impl TryFrom<RoadMapFile> for RoadMap {
    type Error = Error;
    fn try_from(f: RoadMapFile) -> Result<Self> {
        RoadMap::new(f.rectangles)
    }
}

impl From<RoadMap> for RoadMapFile {
    fn from(m: RoadMap) -> Self {
        RoadMapFile { rectangles: m.rectangles }
    }
}

impl RoadMap {
    pub fn new(rectangles: Vec<Rectangle>) -> Result<Self> {
        let mut index = HashMap::with_capacity(rectangles.len());
        for (i, r) in rectangles.iter().enumerate() {
            if !(r.length > 0.0) || !(r.width > 0.0) {
                return Err(Error::InvalidRectangle {
                    id: r.id,
                    reason: format!("length {} and width {} must be positive", r.length, r.width),
                });
            }
            if index.insert(r.id, i).is_some() {
                return Err(Error::DuplicateRectangle(r.id));
            }
        }
        let mut map = Self { rectangles, index, predecessors: HashMap::new(), grid: SpatialGrid::default() };
        for r in &map.rectangles {
            for s in &r.successors {
                if !map.index.contains_key(s) {
                    return Err(Error::UnknownRectangle(*s));
                }
                if *s == r.id {
                    return Err(Error::SelfLink(r.id));
                }
            }
        }
        map.rebuild();
        Ok(map)
    }

    fn rebuild(&mut self) {
        let mut preds: HashMap<RectId, Vec<RectId>> = HashMap::new();
        for r in &self.rectangles {
            for s in &r.successors {
                preds.entry(*s).or_default().push(r.id);
            }
        }
        self.predecessors = preds;
        self.grid = SpatialGrid::build(&self.rectangles);
    }

    pub fn rectangles(&self) -> &[Rectangle] {
        &self.rectangles
    }

    pub fn len(&self) -> usize {
        self.rectangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rectangles.is_empty()
    }

    pub fn get(&self, id: RectId) -> Option<&Rectangle> {
        self.index.get(&id).map(|&i| &self.rectangles[i])
    }

    pub fn rect(&self, id: RectId) -> Result<&Rectangle> {
        self.get(id).ok_or(Error::UnknownRectangle(id))
    }

    pub fn predecessors(&self, id: RectId) -> &[RectId] {
        self.predecessors.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Appends `to` to the successors of `from` unless already present.
    pub fn link(&mut self, from: RectId, to: RectId) -> Result<()> {
        if from == to {
            return Err(Error::SelfLink(from));
        }
        self.rect(to)?;
        let idx = *self.index.get(&from).ok_or(Error::UnknownRectangle(from))?;
        let succ = &mut self.rectangles[idx].successors;
        if !succ.contains(&to) {
            succ.push(to);
            self.predecessors.entry(to).or_default().push(from);
        }
        Ok(())
    }

    /// Ids of all rectangles containing `p`, ascending.
    pub fn containing(&self, p: &Point) -> Vec<RectId> {
        let mut ids: Vec<RectId> = self
            .grid
            .candidates(p)
            .iter()
            .map(|&i| &self.rectangles[i])
            .filter(|r| r.contains(p))
            .map(|r| r.id)
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Rectangles reachable from `start` in at most `hops` successor steps,
    /// including `start`.
    pub fn downstream(&self, start: RectId, hops: usize) -> BTreeSet<RectId> {
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([(start, 0usize)]);
        while let Some((id, depth)) = queue.pop_front() {
            if depth == hops {
                continue;
            }
            if let Some(r) = self.get(id) {
                for s in &r.successors {
                    if seen.insert(*s) {
                        queue.push_back((*s, depth + 1));
                    }
                }
            }
        }
        seen
    }

    /// Among `ids`, the rectangle whose orientation is angularly closest to `heading`.
    pub fn closest_in_orientation(&self, ids: &[RectId], heading: f64) -> Option<RectId> {
        ids.iter()
            .filter_map(|id| self.get(*id))
            .min_by(|a, b| {
                angular_distance(a.orientation, heading)
                    .total_cmp(&angular_distance(b.orientation, heading))
                    .then(a.id.cmp(&b.id))
            })
            .map(|r| r.id)
    }

    pub fn bounding_box(&self) -> Option<(Point, Point)> {
        let mut it = self.rectangles.iter().map(Rectangle::bounding_box);
        let first = it.next()?;
        Some(it.fold(first, |(lo, hi), (l, h)| (lo.inf(&l), hi.sup(&h))))
    }
}

/// Adds the successor edge `from -> to`; idempotent.
pub fn link_lanes(mut map: RoadMap, from: RectId, to: RectId) -> Result<RoadMap> {
    map.link(from, to)?;
    Ok(map)
}

/// Set of rectangles containing `point` (spatial index + exact test).
pub fn rectangles_containing(map: &RoadMap, point: &Point) -> Vec<RectId> {
    map.containing(point)
}

/// Along-lane distance from `point` to the downstream short edge of `rect`.
pub fn distance_to_exit(rect: &Rectangle, point: &Point) -> Result<f64> {
    if !rect.contains(point) {
        return Err(Error::OutsideRectangle { id: rect.id, x: point.x, y: point.y });
    }
    Ok(rect.remaining_length(point))
}

fn segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_squared();
    if len_sq == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len_sq).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Iterative end-point fit (Ramer): keeps the first and last point and recursively
/// splits at the point of maximum deviation while it exceeds `tolerance`.
pub fn simplify_polyline(points: &[Point], tolerance: f64) -> Result<Vec<Point>> {
    if points.len() < 2 {
        return Err(Error::InvalidPolyline(points.len()));
    }
    if !(tolerance > 0.0) {
        return Err(Error::InvalidTolerance(tolerance));
    }
    let mut keep = vec![false; points.len()];
    keep[0] = true;
    keep[points.len() - 1] = true;
    let mut stack = vec![(0usize, points.len() - 1)];
    while let Some((first, last)) = stack.pop() {
        if last <= first + 1 {
            continue;
        }
        let (a, b) = (&points[first], &points[last]);
        let (split, dev) = ((first + 1)..last)
            .map(|i| (i, segment_distance(&points[i], a, b)))
            .fold((first, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if dev > tolerance {
            keep[split] = true;
            stack.push((split, last));
            stack.push((first, split));
        }
    }
    Ok(points.iter().zip(&keep).filter(|(_, k)| **k).map(|(p, _)| *p).collect())
}

/// One rectangle per consecutive point pair, chained by successor links.
/// Ids are assigned from `id_seed` upwards; zero-length segments are skipped.
pub fn fit_rectangles(simplified: &[Point], width: f64, id_seed: RectId) -> Result<Vec<Rectangle>> {
    if simplified.len() < 2 {
        return Err(Error::InvalidPolyline(simplified.len()));
    }
    if !(width > 0.0) {
        return Err(Error::param("width", format!("must be positive, got {width}")));
    }
    let mut rects: Vec<Rectangle> = Vec::with_capacity(simplified.len() - 1);
    for pair in simplified.windows(2) {
        let d = pair[1] - pair[0];
        let length = d.norm();
        if length == 0.0 {
            log::warn!("skipping zero-length segment at ({}, {})", pair[0].x, pair[0].y);
            continue;
        }
        let id = id_seed + rects.len() as RectId;
        if let Some(prev) = rects.last_mut() {
            prev.successors.push(id);
        }
        rects.push(Rectangle {
            id,
            center: (pair[0] + pair[1]) * 0.5,
            length,
            width,
            orientation: wrap_angle(d.y.atan2(d.x)),
            successors: Vec::new(),
        });
    }
    Ok(rects)
}

/// Dense reference line of one lane in a map document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaneSpec {
    /// Lane id; also the id of the lane's first rectangle.
    pub id_prefix: RectId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub points: Vec<[f64; 2]>,
}

impl LaneSpec {
    pub fn points(&self) -> Vec<Point> {
        self.points.iter().map(|p| Point::new(p[0], p[1])).collect()
    }
}

fn default_width() -> f64 {
    DEFAULT_LANE_WIDTH
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

/// Map file: lanes as dense polylines plus explicit rectangle links.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapDocument {
    #[serde(default = "default_width")]
    pub default_width: f64,
    #[serde(default = "default_tolerance")]
    pub default_tolerance: f64,
    pub lanes: Vec<LaneSpec>,
    /// Rectangle-level successor links `[from_id, to_id]`.
    #[serde(default)]
    pub links: Vec<[RectId; 2]>,
    /// Lane-level links: last rectangle of the first lane to the first rectangle
    /// of the second.
    #[serde(default)]
    pub lane_links: Vec<[RectId; 2]>,
}

/// Result of building a [`MapDocument`].
#[derive(Clone, Debug)]
pub struct BuiltMap {
    pub map: RoadMap,
    /// Rectangle ids of each lane in travel order, keyed by lane id.
    pub lanes: BTreeMap<RectId, Vec<RectId>>,
}

impl BuiltMap {
    pub fn lane_connected(&self, from: RectId, to: RectId) -> bool {
        match (self.lanes.get(&from).and_then(|r| r.last()), self.lanes.get(&to).and_then(|r| r.first())) {
            (Some(last), Some(first)) => {
                self.map.get(*last).is_some_and(|r| r.successors.contains(first))
            }
            _ => false,
        }
    }
}

impl MapDocument {
    /// Runs simplify -> fit -> link for every lane.
    pub fn build(&self) -> Result<BuiltMap> {
        let mut rects = Vec::new();
        let mut lanes = BTreeMap::new();
        for (i, lane) in self.lanes.iter().enumerate() {
            let tol = lane.tolerance.unwrap_or(self.default_tolerance);
            let width = lane.width.unwrap_or(self.default_width);
            let simplified = simplify_polyline(&lane.points(), tol).map_err(|e| {
                Error::scenario(format!("lanes[{i}].points"), e.to_string())
            })?;
            let fitted = fit_rectangles(&simplified, width, lane.id_prefix)?;
            if lanes.insert(lane.id_prefix, fitted.iter().map(|r| r.id).collect::<Vec<_>>()).is_some() {
                return Err(Error::scenario(format!("lanes[{i}].id_prefix"), "duplicate lane id"));
            }
            rects.extend(fitted);
        }
        let mut map = RoadMap::new(rects)?;
        for (i, [from, to]) in self.lane_links.iter().enumerate() {
            let last = lanes.get(from).and_then(|r: &Vec<RectId>| r.last().copied());
            let first = lanes.get(to).and_then(|r: &Vec<RectId>| r.first().copied());
            match (last, first) {
                (Some(a), Some(b)) => map.link(a, b)?,
                _ => return Err(Error::scenario(format!("lane_links[{i}]"), "unknown lane id")),
            }
        }
        for [from, to] in &self.links {
            map.link(*from, *to)?;
        }
        Ok(BuiltMap { map, lanes })
    }
}
