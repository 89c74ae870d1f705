//! Artifact detection, map attachment and scoring.
//!
//! Detections are projected into the occupancy map by casting a grid of rays through the
//! bounding box and keeping the median-range hit. Points are grouped into hypothesis spheres,
//! each carrying one binary Bayes filter (in log-odds form) per artifact class. A sphere whose
//! class probability crosses the confirmation threshold emits a report and is frozen.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{direction, Aabb, Point, Vec3};
use crate::sensor::SensorFrustum;
use crate::voxel_map::{RobotConfig, VoxelMap, VoxelState};

/// Reports within this distance of a same-class ground-truth artifact score.
pub const SCORING_RADIUS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactClass {
    Survivor,
    CellPhone,
    Backpack,
    Drill,
    FireExtinguisher,
    Gas,
    Vent,
}

impl ArtifactClass {
    pub const ALL: [ArtifactClass; 7] = [
        ArtifactClass::Survivor,
        ArtifactClass::CellPhone,
        ArtifactClass::Backpack,
        ArtifactClass::Drill,
        ArtifactClass::FireExtinguisher,
        ArtifactClass::Gas,
        ArtifactClass::Vent,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Classes sensed by proximity (radio / gas concentration) instead of by camera.
    pub fn is_proximity(self) -> bool {
        matches!(self, ArtifactClass::CellPhone | ArtifactClass::Gas)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub id: String,
    pub class: ArtifactClass,
    pub position: Point,
    /// Edge of the solid cube the artifact occupies, m. Zero for artifacts with no geometry.
    pub size: f64,
}

/// Default edge of a camera-detected artifact, m.
pub const DEFAULT_ARTIFACT_SIZE: f64 = 0.4;

impl Artifact {
    pub fn new(id: impl Into<String>, class: ArtifactClass, position: Point) -> Self {
        let size = if class.is_proximity() { 0.0 } else { DEFAULT_ARTIFACT_SIZE };
        Self { id: id.into(), class, position, size }
    }

    /// The solid volume of the artifact, if it has one.
    pub fn solid(&self) -> Option<Aabb> {
        (self.size > 0.0).then(|| Aabb::from_center(self.position, Vec3::repeat(self.size / 2.0)))
    }
}

/// Normalized image-plane rectangle; `u` grows to the right, `v` downward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
}

impl BoundingBox {
    pub fn center(&self) -> (f64, f64) {
        ((self.u_min + self.u_max) / 2.0, (self.v_min + self.v_max) / 2.0)
    }

    pub fn is_empty(&self) -> bool {
        self.u_max <= self.u_min || self.v_max <= self.v_min
    }
}

/// Equiangular camera model: image coordinates are linear in yaw and pitch across the FOV.
fn project(camera: &SensorFrustum, heading: f64, d: &Vec3) -> (f64, f64) {
    let yaw = crate::geometry::wrap_angle(d.y.atan2(d.x) - heading);
    let pitch = d.z.atan2(d.x.hypot(d.y));
    (0.5 - yaw / camera.fov_h, 0.5 - pitch / camera.fov_v)
}

fn unproject(camera: &SensorFrustum, heading: f64, u: f64, v: f64) -> Vec3 {
    direction(heading + (0.5 - u) * camera.fov_h, (0.5 - v) * camera.fov_v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DetectionKind {
    Visual { bbox: BoundingBox, camera: SensorFrustum },
    /// Range-only detection; localized at the robot position.
    Proximity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub timestamp: f64,
    pub pose: RobotConfig,
    pub class: ArtifactClass,
    pub kind: DetectionKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionParams {
    /// Maximum camera detection distance, m.
    pub range: f64,
    /// Angular size of the generated box for artifacts with no geometry, rad. Solid artifacts
    /// get a box matching their apparent size.
    pub box_extent: f64,
    /// Std of the box-center jitter as a fraction of the box size; zero disables.
    pub box_jitter: f64,
    pub false_negative_rate: f64,
    /// Detection radius for proximity-sensed classes, m.
    pub proximity_range: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self { range: 8.0, box_extent: 0.15, box_jitter: 0.1, false_negative_rate: 0.0, proximity_range: 3.0 }
    }
}

/// Geometric detection oracle standing in for a learned detector.
pub fn simulate_detection<R: Rng>(
    timestamp: f64,
    pose: &RobotConfig,
    camera: &SensorFrustum,
    artifacts: &[Artifact],
    map: &VoxelMap,
    params: &DetectionParams,
    rng: &mut R,
) -> Vec<Detection> {
    let origin = camera.origin(pose);
    let mut out = Vec::new();
    for artifact in artifacts {
        if artifact.class.is_proximity() {
            if (artifact.position - pose.position).norm() <= params.proximity_range
                && !rng.gen_bool(params.false_negative_rate.clamp(0.0, 1.0))
            {
                out.push(Detection { timestamp, pose: *pose, class: artifact.class, kind: DetectionKind::Proximity });
            }
            continue;
        }
        let d = artifact.position - origin;
        let dist = d.norm();
        if dist > params.range || dist < 1e-9 || !camera.contains(&origin, pose.heading, &artifact.position) {
            continue;
        }
        let dir = d / dist;
        let solid = artifact.solid();
        let surface = solid.and_then(|b| b.ray_interval(&origin, &dir)).map_or(dist, |(enter, _)| enter.max(0.0));
        let mut occluded = false;
        map.traverse(&origin, &dir, surface - map.resolution(), |lin, _| {
            occluded = map.state_linear(lin) == VoxelState::Occupied;
            !occluded
        });
        if occluded || rng.gen_bool(params.false_negative_rate.clamp(0.0, 1.0)) {
            continue;
        }
        let (mut u, mut v) = project(camera, pose.heading, &d);
        let extent = match solid {
            Some(_) => 2.0 * (artifact.size / 2.0).atan2(dist),
            None => params.box_extent,
        };
        let half_u = extent / camera.fov_h / 2.0;
        let half_v = extent / camera.fov_v / 2.0;
        if params.box_jitter > 0.0 {
            let nu = Normal::new(0.0, params.box_jitter * 2.0 * half_u).expect("finite jitter");
            let nv = Normal::new(0.0, params.box_jitter * 2.0 * half_v).expect("finite jitter");
            u += nu.sample(rng);
            v += nv.sample(rng);
        }
        let bbox = BoundingBox {
            u_min: (u - half_u).clamp(0.0, 1.0),
            v_min: (v - half_v).clamp(0.0, 1.0),
            u_max: (u + half_u).clamp(0.0, 1.0),
            v_max: (v + half_v).clamp(0.0, 1.0),
        };
        if bbox.is_empty() {
            continue;
        }
        out.push(Detection { timestamp, pose: *pose, class: artifact.class, kind: DetectionKind::Visual { bbox, camera: *camera } });
    }
    out
}

#[derive(Debug, Error, PartialEq)]
pub enum ArtifactError {
    #[error("no grid ray hit an occupied surface within range")]
    NoSurfaceHit,
}

/// Casts one ray per grid cell of the box and returns the median-range surface hit.
///
/// With an even number of surviving hits the lower median is used.
pub fn bbox_to_point(
    detection: &Detection,
    map: &VoxelMap,
    rows: usize,
    cols: usize,
    range_cap: f64,
) -> Result<Point, ArtifactError> {
    let (bbox, camera) = match &detection.kind {
        DetectionKind::Proximity => return Ok(detection.pose.position),
        DetectionKind::Visual { bbox, camera } => (bbox, camera),
    };
    let origin = camera.origin(&detection.pose);
    let mut hits = surface_hits(&origin, detection.pose.heading, bbox, camera, map, rows, cols, range_cap);
    if hits.is_empty() {
        return Err(ArtifactError::NoSurfaceHit);
    }
    hits.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (t, dir) = hits[(hits.len() - 1) / 2];
    Ok(origin + dir * t)
}

/// Range and direction of every grid ray that reaches an occupied voxel, in grid order.
#[allow(clippy::too_many_arguments)]
pub fn surface_hits(
    origin: &Point,
    heading: f64,
    bbox: &BoundingBox,
    camera: &SensorFrustum,
    map: &VoxelMap,
    rows: usize,
    cols: usize,
    range_cap: f64,
) -> Vec<(f64, Vec3)> {
    let mut hits = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let u = bbox.u_min + (c as f64 + 0.5) / cols as f64 * (bbox.u_max - bbox.u_min);
            let v = bbox.v_min + (r as f64 + 0.5) / rows as f64 * (bbox.v_max - bbox.v_min);
            let dir = unproject(camera, heading, u, v);
            let mut hit = None;
            map.traverse(origin, &dir, range_cap, |lin, t| {
                if map.state_linear(lin) == VoxelState::Occupied {
                    hit = Some(t);
                    false
                } else {
                    true
                }
            });
            if let Some(t) = hit {
                hits.push((t, dir));
            }
        }
    }
    hits
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BayesParams {
    /// Association sphere radius, m.
    pub radius: f64,
    pub p_hit: f64,
    pub p_miss: f64,
    pub confirm_threshold: f64,
}

impl Default for BayesParams {
    fn default() -> Self {
        Self { radius: 1.0, p_hit: 0.7, p_miss: 0.3, confirm_threshold: 0.9 }
    }
}

impl BayesParams {
    pub fn hit_log_odds(&self) -> f64 {
        (self.p_hit / self.p_miss).ln()
    }
}

pub fn logistic(l: f64) -> f64 {
    1.0 / (1.0 + (-l).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHypothesis {
    pub id: usize,
    pub center: Point,
    pub radius: f64,
    pub log_odds: [f64; 7],
    pub count: usize,
    pub frozen: bool,
    pub representative: Option<Detection>,
    sum: Vec3,
}

impl ArtifactHypothesis {
    fn new(id: usize, radius: f64) -> Self {
        Self {
            id,
            center: Point::origin(),
            radius,
            log_odds: [0.0; 7],
            count: 0,
            frozen: false,
            representative: None,
            sum: Vec3::zeros(),
        }
    }

    pub fn probability(&self, class: ArtifactClass) -> f64 {
        logistic(self.log_odds[class.index()])
    }

    /// Most likely class; ties go to the earlier class in [`ArtifactClass::ALL`].
    pub fn best_class(&self) -> ArtifactClass {
        let mut best = ArtifactClass::ALL[0];
        for c in ArtifactClass::ALL {
            if self.log_odds[c.index()] > self.log_odds[best.index()] {
                best = c;
            }
        }
        best
    }

    fn absorb(&mut self, point: &Point, class: ArtifactClass, params: &BayesParams) {
        self.sum += point.coords;
        self.count += 1;
        self.center = Point::from(self.sum / self.count as f64);
        self.log_odds[class.index()] += params.hit_log_odds();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "hypothesis")]
pub enum Association {
    Absorbed(usize),
    Created(usize),
    /// The point fell inside a frozen sphere and was dropped.
    Ignored(usize),
}

/// Routes a projected detection to its hypothesis sphere and updates that sphere's filters.
pub fn associate_and_update(
    point: &Point,
    class: ArtifactClass,
    hypotheses: &mut Vec<ArtifactHypothesis>,
    params: &BayesParams,
) -> Association {
    let within = |h: &ArtifactHypothesis| (h.center - point).norm() <= h.radius;
    if let Some(h) = hypotheses.iter().find(|h| h.frozen && within(h)) {
        return Association::Ignored(h.id);
    }
    let nearest = hypotheses
        .iter_mut()
        .filter(|h| !h.frozen && within(h))
        .min_by(|a, b| (a.center - point).norm().total_cmp(&(b.center - point).norm()));
    match nearest {
        Some(h) => {
            h.absorb(point, class, params);
            Association::Absorbed(h.id)
        }
        None => {
            let mut h = ArtifactHypothesis::new(hypotheses.len(), params.radius);
            h.absorb(point, class, params);
            let id = h.id;
            hypotheses.push(h);
            Association::Created(id)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub class: ArtifactClass,
    pub position: Point,
    pub hypothesis: usize,
    pub scored: Option<bool>,
}

/// Emits a report and freezes the sphere once any class probability exceeds `threshold`.
pub fn confirm_and_freeze(hypothesis: &mut ArtifactHypothesis, threshold: f64) -> Option<Report> {
    if hypothesis.frozen {
        return None;
    }
    let class = hypothesis.best_class();
    if hypothesis.probability(class) <= threshold {
        return None;
    }
    hypothesis.frozen = true;
    Some(Report { class, position: hypothesis.center, hypothesis: hypothesis.id, scored: None })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "outcome", content = "artifact")]
pub enum ScoreOutcome {
    Scored(String),
    Rejected,
}

/// Scores reports against ground truth; each artifact can be claimed once.
#[derive(Debug, Clone)]
pub struct Scorer {
    artifacts: Vec<Artifact>,
    consumed: Vec<bool>,
}

impl Scorer {
    pub fn new(artifacts: Vec<Artifact>) -> Self {
        let n = artifacts.len();
        Self { artifacts, consumed: vec![false; n] }
    }

    pub fn score(&mut self, report: &Report) -> ScoreOutcome {
        let candidate = self
            .artifacts
            .iter()
            .enumerate()
            .filter(|(i, a)| !self.consumed[*i] && a.class == report.class)
            .map(|(i, a)| (i, (a.position - report.position).norm()))
            .filter(|(_, d)| *d <= SCORING_RADIUS)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match candidate {
            Some((i, _)) => {
                self.consumed[i] = true;
                ScoreOutcome::Scored(self.artifacts[i].id.clone())
            }
            None => ScoreOutcome::Rejected,
        }
    }

    pub fn score_count(&self) -> usize {
        self.consumed.iter().filter(|c| **c).count()
    }
}

/// One-shot scoring of a single report.
pub fn score_report(report: &Report, artifacts: &[Artifact]) -> ScoreOutcome {
    Scorer::new(artifacts.to_vec()).score(report)
}
