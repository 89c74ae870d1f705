//! Ground-truth environment, robot model and the point-robot executor.
//!
//! A world is a union of axis-aligned free-space boxes inside a bounding box; everything
//! else is solid. Worlds are read from JSON:
//!
//! ```json
//! {
//!   "bounds": {"min": [0, 0, 0], "max": [62, 6, 4]},
//!   "free_boxes": [{"min": [1, 1, 0.4], "max": [61, 5, 3.4]}],
//!   "non_traversable": [],
//!   "artifacts": [{"id": "a1", "class": "backpack", "position": [20, 1.4, 0.6], "size": 0.4}],
//!   "start": {"position": [2, 3, 1.0], "heading": 0.0},
//!   "home": [2, 3, 1.0]
//! }
//! ```

use std::collections::HashSet;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{Artifact, ArtifactClass};
use crate::geometry::{wrap_angle, yaw_of, Aabb, Point, Vec3};

/// Look-ahead horizon of the legged traversability check.
pub const LOOKAHEAD_DISTANCE: f64 = 0.30;
const LOOKAHEAD_STEP: f64 = 0.05;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("cannot read world file: {0}")]
    Io(#[from] std::io::Error),
    #[error("world file parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid world field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> WorldError {
    WorldError::Invalid { field: field.into(), message: message.into() }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxSpec {
    min: [f64; 3],
    max: [f64; 3],
}

impl BoxSpec {
    fn to_aabb(self) -> Aabb {
        Aabb::new(Point::from(self.min), Point::from(self.max))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArtifactSpec {
    #[serde(default)]
    id: Option<String>,
    class: ArtifactClass,
    position: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    size: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StartSpec {
    position: [f64; 3],
    #[serde(default)]
    heading: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldFile {
    bounds: BoxSpec,
    free_boxes: Vec<BoxSpec>,
    #[serde(default)]
    non_traversable: Vec<BoxSpec>,
    #[serde(default)]
    artifacts: Vec<ArtifactSpec>,
    start: StartSpec,
    home: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub bounds: Aabb,
    pub free_boxes: Vec<Aabb>,
    pub non_traversable: Vec<Aabb>,
    pub artifacts: Vec<Artifact>,
    pub start_position: Point,
    pub start_heading: f64,
    pub home: Point,
}

impl World {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, WorldError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let file: WorldFile = serde_json::from_str(text).map_err(|e| WorldError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_file(file)
    }

    fn from_file(file: WorldFile) -> Result<Self, WorldError> {
        let bounds = file.bounds.to_aabb();
        if !bounds.is_valid() {
            return Err(invalid("bounds", "min must be strictly below max on every axis"));
        }
        let mut free_boxes = Vec::with_capacity(file.free_boxes.len());
        for (i, b) in file.free_boxes.iter().enumerate() {
            let field = format!("free_boxes[{i}]");
            let b = b.to_aabb();
            if !b.is_valid() {
                return Err(invalid(field, "min must be strictly below max on every axis"));
            }
            let clipped = b.intersection(&bounds).ok_or_else(|| invalid(field, "box lies outside bounds"))?;
            free_boxes.push(clipped);
        }
        if free_boxes.is_empty() {
            return Err(invalid("free_boxes", "at least one free box is required"));
        }
        let mut non_traversable = Vec::new();
        for (i, b) in file.non_traversable.iter().enumerate() {
            let b = b.to_aabb();
            if !b.is_valid() {
                return Err(invalid(format!("non_traversable[{i}]"), "min must be strictly below max on every axis"));
            }
            non_traversable.push(b);
        }
        let mut artifacts = Vec::new();
        let mut ids = HashSet::new();
        for (i, a) in file.artifacts.iter().enumerate() {
            let position = Point::from(a.position);
            if !bounds.contains(&position) {
                return Err(invalid(format!("artifacts[{i}].position"), "artifact lies outside bounds"));
            }
            let id = a.id.clone().unwrap_or_else(|| format!("artifact-{i}"));
            if !ids.insert(id.clone()) {
                return Err(invalid(format!("artifacts[{i}].id"), format!("duplicate artifact id '{id}'")));
            }
            let mut artifact = Artifact::new(id, a.class, position);
            if let Some(size) = a.size {
                if !(size >= 0.0 && size.is_finite()) {
                    return Err(invalid(format!("artifacts[{i}].size"), "size must be non-negative"));
                }
                artifact.size = size;
            }
            artifacts.push(artifact);
        }
        let world = World {
            bounds,
            free_boxes,
            non_traversable,
            artifacts,
            start_position: Point::from(file.start.position),
            start_heading: wrap_angle(file.start.heading),
            home: Point::from(file.home),
        };
        if !world.is_free(&world.start_position) {
            return Err(invalid("start.position", "start must lie in free space"));
        }
        if !world.is_free(&world.home) {
            return Err(invalid("home", "home must lie in free space"));
        }
        Ok(world)
    }

    pub fn to_json(&self) -> String {
        let spec = |b: &Aabb| BoxSpec { min: b.min.coords.into(), max: b.max.coords.into() };
        let file = WorldFile {
            bounds: spec(&self.bounds),
            free_boxes: self.free_boxes.iter().map(spec).collect(),
            non_traversable: self.non_traversable.iter().map(spec).collect(),
            artifacts: self
                .artifacts
                .iter()
                .map(|a| ArtifactSpec { id: Some(a.id.clone()), class: a.class, position: a.position.coords.into(), size: Some(a.size) })
                .collect(),
            start: StartSpec { position: self.start_position.coords.into(), heading: self.start_heading },
            home: self.home.coords.into(),
        };
        serde_json::to_string_pretty(&file).expect("world serializes")
    }

    pub fn is_free(&self, p: &Point) -> bool {
        self.bounds.contains(p)
            && self.free_boxes.iter().any(|b| b.contains(p))
            && !self.artifacts.iter().filter_map(Artifact::solid).any(|b| b.contains(p))
    }

    pub fn in_non_traversable(&self, p: &Point) -> bool {
        self.non_traversable.iter().any(|b| b.contains(p))
    }

    /// Distance along the unit ray to the first solid surface, or `None` beyond `max_range`.
    pub fn ray_cast(&self, origin: &Point, dir: &Vec3, max_range: f64) -> Option<f64> {
        let walls = self.ray_cast_walls(origin, dir, max_range);
        let limit = walls.unwrap_or(max_range);
        let object = self
            .artifacts
            .iter()
            .filter_map(Artifact::solid)
            .filter_map(|b| b.ray_interval(origin, dir))
            .filter(|(enter, exit)| *exit >= 0.0 && *enter <= limit)
            .map(|(enter, _)| enter.max(0.0))
            .min_by(f64::total_cmp);
        object.or(walls)
    }

    fn ray_cast_walls(&self, origin: &Point, dir: &Vec3, max_range: f64) -> Option<f64> {
        const EPS: f64 = 1e-9;
        let mut t = 0.0;
        loop {
            let p = origin + dir * t;
            let mut reach = t;
            for b in &self.free_boxes {
                if b.contains_eps(&p, EPS) {
                    if let Some((_, exit)) = b.ray_interval(origin, dir) {
                        reach = reach.max(exit);
                    }
                }
            }
            if reach <= t + EPS {
                return (t <= max_range).then_some(t);
            }
            t = reach;
            if t > max_range {
                return None;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotClass {
    Legged,
    Aerial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    pub class: RobotClass,
    /// Reference speed, m/s.
    pub v_ref: f64,
    /// Maximum yaw rate for aerial robots, rad/s.
    pub yaw_rate_max: f64,
    /// Distance a legged robot backs up after a traversability stop, m.
    pub reverse_distance: f64,
    /// Half-extents of the collision box, m.
    pub half_extents: Vec3,
    /// Random-walk localization drift, m per sqrt(s). Zero means ideal localization.
    pub localization_noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub position: Point,
    pub heading: f64,
    pub traveled: f64,
    pub completed: bool,
}

/// Moves a point robot along a polyline at constant speed.
#[derive(Debug, Clone)]
pub struct PathFollower {
    points: Vec<Point>,
    headings: Vec<f64>,
    class: RobotClass,
    segment: usize,
    along: f64,
}

impl PathFollower {
    /// `headings` must have one entry per point.
    pub fn new(points: Vec<Point>, headings: Vec<f64>, class: RobotClass) -> Self {
        assert!(!points.is_empty(), "path follower needs at least one point");
        assert_eq!(points.len(), headings.len());
        Self { points, headings, class, segment: 0, along: 0.0 }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn is_complete(&self) -> bool {
        self.segment + 1 >= self.points.len()
    }

    /// Index of the last path vertex that has been reached.
    pub fn last_reached(&self) -> usize {
        if self.is_complete() {
            self.points.len() - 1
        } else {
            self.segment
        }
    }

    pub fn position(&self) -> Point {
        if self.is_complete() {
            return *self.points.last().unwrap();
        }
        let a = self.points[self.segment];
        let b = self.points[self.segment + 1];
        let len = (b - a).norm();
        if len == 0.0 {
            a
        } else {
            a + (b - a) * (self.along / len)
        }
    }

    pub fn heading(&self) -> f64 {
        if self.is_complete() {
            return *self.headings.last().unwrap();
        }
        let h0 = self.headings[self.segment];
        match self.class {
            RobotClass::Legged => h0,
            RobotClass::Aerial => {
                let len = (self.points[self.segment + 1] - self.points[self.segment]).norm();
                let frac = if len == 0.0 { 1.0 } else { self.along / len };
                let h1 = self.headings[self.segment + 1];
                wrap_angle(h0 + wrap_angle(h1 - h0) * frac)
            }
        }
    }

    /// Direction of travel at the current position, if moving.
    pub fn direction(&self) -> Option<Vec3> {
        let mut s = self.segment;
        while s + 1 < self.points.len() {
            let d = self.points[s + 1] - self.points[s];
            if d.norm() > 1e-12 {
                return Some(d.normalize());
            }
            s += 1;
        }
        None
    }

    /// Advances up to `distance` metres along the path.
    pub fn advance(&mut self, distance: f64) -> StepOutcome {
        let mut remaining = distance.max(0.0);
        let mut traveled = 0.0;
        while !self.is_complete() {
            let len = (self.points[self.segment + 1] - self.points[self.segment]).norm();
            let left = len - self.along;
            if remaining < left {
                self.along += remaining;
                traveled += remaining;
                break;
            }
            remaining -= left;
            traveled += left;
            self.segment += 1;
            self.along = 0.0;
        }
        StepOutcome { position: self.position(), heading: self.heading(), traveled, completed: self.is_complete() }
    }
}

/// Advances the robot by one tick of `dt` seconds along its path.
pub fn step_robot(model: &RobotModel, follower: &mut PathFollower, dt: f64) -> StepOutcome {
    follower.advance(model.v_ref * dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Traversability {
    Clear,
    Blocked,
}

/// Projects the robot box up to 30 cm ahead and reports whether it would enter
/// non-traversable ground. Aerial robots ignore ground traversability.
pub fn traversability_lookahead(model: &RobotModel, position: &Point, direction: &Vec3, world: &World) -> Traversability {
    if model.class == RobotClass::Aerial || direction.norm() < 1e-12 {
        return Traversability::Clear;
    }
    lookahead_hit(position, direction, &model.half_extents, world).map_or(Traversability::Clear, |_| Traversability::Blocked)
}

/// First non-traversable region met by the projected robot box, as the point of that region
/// nearest to the robot.
pub fn lookahead_hit(position: &Point, direction: &Vec3, half: &Vec3, world: &World) -> Option<Point> {
    let dir = direction.normalize();
    let n = (LOOKAHEAD_DISTANCE / LOOKAHEAD_STEP).round() as usize;
    (0..=n).find_map(|k| {
        let b = Aabb::from_center(position + dir * (k as f64 * LOOKAHEAD_STEP), *half);
        let region = world.non_traversable.iter().find(|r| r.overlaps(&b))?;
        Some(Point::from(position.coords.zip_zip_map(&region.min.coords, &region.max.coords, |p, lo, hi| p.clamp(lo, hi))))
    })
}

/// Random-walk localization drift with per-step Gaussian increments of std `sigma * sqrt(dt)`.
#[derive(Debug, Clone)]
pub struct LocalizationNoise {
    sigma: f64,
    offset: Vec3,
    rng: ChaCha8Rng,
}

impl LocalizationNoise {
    pub fn new(sigma: f64, seed: u64) -> Self {
        Self { sigma, offset: Vec3::zeros(), rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn offset(&self) -> Vec3 {
        self.offset
    }

    pub fn step(&mut self, dt: f64) {
        if self.sigma <= 0.0 {
            return;
        }
        let normal = Normal::new(0.0, self.sigma * dt.sqrt()).expect("finite std");
        for i in 0..3 {
            self.offset[i] += normal.sample(&mut self.rng);
        }
    }

    pub fn reported(&self, true_position: &Point) -> Point {
        true_position + self.offset
    }
}

/// Heading of travel from `a` to `b`, falling back to `current` for vertical or empty moves.
pub fn travel_heading(a: &Point, b: &Point, current: f64) -> f64 {
    yaw_of(&(b - a)).unwrap_or(current)
}
