//! Local exploration planning.
//!
//! A random graph is grown inside a bound around the robot, shortest paths from the root are
//! extracted, and each path is scored by the exploration gain
//!
//! ```text
//! gain(path) = exp(-zeta * Z(path, straight)) * sum_j VolumeGain(v_j) * exp(-delta_gain * D(v_1, v_j))
//! ```
//!
//! where `D` is the cumulative length along the path and `Z` is the DTW distance to a straight
//! path of equal length along the current exploration direction.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtw::{dtw, polyline_length, resample};
use crate::geometry::{wrap_angle, yaw_of, Point, Vec3};
use crate::graph::{dijkstra, ExplorationGraph, PathKind, PlannedPath};
use crate::sensor::{GainEvaluator, SensorFrustum};
use crate::voxel_map::{LocalBound, RobotConfig, VoxelMap};
use crate::world::RobotClass;

/// Spacing used when resampling paths for the direction-similarity term, m.
pub const SIMILARITY_SPACING: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("root configuration is inadmissible")]
    DegenerateRoot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainParams {
    pub zeta: f64,
    /// Distance decay of per-vertex gain along the path, 1/m.
    pub delta_gain: f64,
    /// Unit exploration direction, or zero to disable the similarity term.
    pub direction: Vec3,
    pub threshold: f64,
}

impl Default for GainParams {
    fn default() -> Self {
        Self { zeta: 0.3, delta_gain: 0.15, direction: Vec3::zeros(), threshold: 30.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalPlannerParams {
    pub bound: Vec3,
    pub n_samples: usize,
    /// Connection radius between graph vertices, m.
    pub edge_radius: f64,
    pub mode: SamplingMode,
    /// Keep every sample at the root height (ground robots in horizontal mode).
    pub planar: bool,
    /// Height difference that counts as a level change in vertical mode, m.
    pub floor_height: f64,
    /// Gain added to vertices on another level in vertical mode.
    pub level_bonus: f64,
}

impl Default for LocalPlannerParams {
    fn default() -> Self {
        Self {
            bound: Vec3::new(12.0, 12.0, 3.0),
            n_samples: 300,
            edge_radius: 1.5,
            mode: SamplingMode::Horizontal,
            planar: false,
            floor_height: 2.5,
            level_bonus: 200.0,
        }
    }
}

fn sample_position<R: Rng>(root: &Point, bound: &LocalBound, mode: SamplingMode, planar: bool, rng: &mut R) -> Point {
    let b = bound.aabb();
    match mode {
        SamplingMode::Horizontal => {
            let x = rng.gen_range(b.min.x..=b.max.x);
            let y = rng.gen_range(b.min.y..=b.max.y);
            let z = if planar { root.z } else { rng.gen_range(b.min.z..=b.max.z) };
            Point::new(x, y, z)
        }
        SamplingMode::Vertical => {
            let nx = Normal::new(root.x, bound.dimensions.x / 4.0).expect("positive bound");
            let ny = Normal::new(root.y, bound.dimensions.y / 4.0).expect("positive bound");
            let x = nx.sample(rng).clamp(b.min.x, b.max.x);
            let y = ny.sample(rng).clamp(b.min.y, b.max.y);
            let z = rng.gen_range(b.min.z..=b.max.z);
            Point::new(x, y, z)
        }
    }
}

/// Grows the local graph rooted at `root` from `n_samples` random configurations.
///
/// Inadmissible samples are rejected, every sample connects to all earlier vertices within
/// `edge_radius` through admissible segments, and vertices unreachable from the root are dropped.
#[allow(clippy::too_many_arguments)]
pub fn build_local_graph<R: Rng>(
    map: &VoxelMap,
    root: &RobotConfig,
    bound: &LocalBound,
    n_samples: usize,
    edge_radius: f64,
    mode: SamplingMode,
    planar: bool,
    rng: &mut R,
) -> Result<ExplorationGraph, PlanError> {
    let half = root.half_extents;
    if !map.box_admissible(&root.position, &half) {
        return Err(PlanError::DegenerateRoot);
    }
    let mut graph = ExplorationGraph::new(*root);
    let r2 = edge_radius * edge_radius;
    for _ in 0..n_samples {
        let p = sample_position(&root.position, bound, mode, planar, rng);
        if !map.box_admissible(&p, &half) {
            continue;
        }
        let neighbors: Vec<usize> = graph
            .vertices()
            .iter()
            .filter(|v| (v.config.position - p).norm_squared() <= r2)
            .filter(|v| map.segment_admissible(&v.config.position, &p, &half))
            .map(|v| v.id)
            .collect();
        let id = graph.add_vertex(root.with_position(p));
        for n in neighbors {
            graph.add_edge(n, id);
        }
    }
    graph.retain_reachable();
    Ok(graph)
}

/// Shortest path from the root to every other reachable vertex.
pub fn shortest_paths(graph: &ExplorationGraph) -> Vec<PlannedPath> {
    let sp = dijkstra(graph, graph.root());
    (0..graph.len())
        .filter(|v| *v != graph.root())
        .filter_map(|v| sp.path_to(v))
        .map(|ids| PlannedPath::from_vertices(graph, &ids, PathKind::Local))
        .collect()
}

/// DTW distance between the path and a straight path of equal length along `direction`,
/// both resampled at `spacing`. Zero when the direction is unset.
pub fn direction_similarity(positions: &[Point], direction: &Vec3, spacing: f64) -> f64 {
    if positions.len() < 2 || direction.norm() < 1e-12 {
        return 0.0;
    }
    let dir = direction.normalize();
    let len = polyline_length(positions);
    let straight = [positions[0], positions[0] + dir * len];
    dtw(&resample(positions, spacing), &resample(&straight, spacing))
}

/// Exploration gain of a path given the volumetric gain of each of its waypoints.
pub fn exploration_gain(path: &PlannedPath, waypoint_gains: &[f64], params: &GainParams) -> f64 {
    assert_eq!(path.waypoints.len(), waypoint_gains.len());
    let cum = path.cumulative_lengths();
    let sum: f64 = waypoint_gains.iter().zip(&cum).map(|(g, d)| g * (-params.delta_gain * d).exp()).sum();
    if sum == 0.0 {
        return 0.0;
    }
    let z = direction_similarity(&path.positions(), &params.direction, SIMILARITY_SPACING);
    (-params.zeta * z).exp() * sum
}

/// Exploration gain of a path, ray casting the volumetric gain at each waypoint.
pub fn path_gain(path: &PlannedPath, map: &VoxelMap, frustum: &SensorFrustum, params: &GainParams) -> f64 {
    let eval = GainEvaluator::new(*frustum);
    let gains: Vec<f64> = path.waypoints.iter().map(|w| eval.volume_gain(w, map) as f64).collect();
    exploration_gain(path, &gains, params)
}

/// Assigns a heading to every waypoint.
///
/// Legged robots face along the outgoing segment (turning in place); aerial robots turn toward
/// each segment direction by at most `yaw_rate_max * length / v_ref` per segment. Degenerate
/// segments carry the previous heading.
pub fn assign_headings(path: &PlannedPath, v_ref: f64, yaw_rate_max: f64, class: RobotClass) -> PlannedPath {
    let mut out = path.clone();
    let n = out.waypoints.len();
    if n < 2 {
        return out;
    }
    let pos = path.positions();
    match class {
        RobotClass::Legged => {
            let mut current = path.waypoints[0].heading;
            for i in 0..n - 1 {
                if let Some(y) = yaw_of(&(pos[i + 1] - pos[i])) {
                    current = y;
                }
                out.waypoints[i] = out.waypoints[i].with_heading(current);
            }
            out.waypoints[n - 1] = out.waypoints[n - 1].with_heading(current);
        }
        RobotClass::Aerial => {
            let mut current = path.waypoints[0].heading;
            for i in 0..n - 1 {
                let seg = pos[i + 1] - pos[i];
                if let Some(target) = yaw_of(&seg) {
                    let allowed = yaw_rate_max * seg.norm() / v_ref;
                    current = wrap_angle(current + wrap_angle(target - current).clamp(-allowed, allowed));
                }
                out.waypoints[i + 1] = out.waypoints[i + 1].with_heading(current);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum LocalDecision {
    BestPath(PlannedPath),
    LocalCompletion,
}

#[derive(Debug, Clone)]
pub struct LocalPlan {
    /// Local graph with per-vertex volumetric gains filled in.
    pub graph: ExplorationGraph,
    pub paths: Vec<PlannedPath>,
    pub decision: LocalDecision,
}

#[derive(Debug, Clone)]
pub struct LocalPlanner {
    pub params: LocalPlannerParams,
    evaluator: GainEvaluator,
}

impl LocalPlanner {
    pub fn new(params: LocalPlannerParams, frustum: SensorFrustum) -> Self {
        Self { params, evaluator: GainEvaluator::new(frustum) }
    }

    pub fn evaluator(&self) -> &GainEvaluator {
        &self.evaluator
    }

    /// Per-vertex gain used in path scoring, including the level-change bonus in vertical mode.
    fn scoring_gain(&self, graph: &ExplorationGraph, id: usize) -> f64 {
        let v = graph.vertex(id);
        let dz = (v.config.position.z - graph.vertex(graph.root()).config.position.z).abs();
        if self.params.mode == SamplingMode::Vertical && v.gain > 0.0 && dz > self.params.floor_height {
            v.gain + self.params.level_bonus
        } else {
            v.gain
        }
    }

    /// Builds the local graph around `root` and picks the highest-gain admissible path.
    ///
    /// Ties go to the shorter path, then to the lower terminal vertex id.
    pub fn plan<R: Rng>(&self, map: &VoxelMap, root: &RobotConfig, gain: &GainParams, rng: &mut R) -> Result<LocalPlan, PlanError> {
        let bound = LocalBound::new(root.position, self.params.bound);
        let mut graph = build_local_graph(
            map,
            root,
            &bound,
            self.params.n_samples,
            self.params.edge_radius,
            self.params.mode,
            self.params.planar,
            rng,
        )?;
        for id in 0..graph.len() {
            let g = self.evaluator.volume_gain(&graph.vertex(id).config, map) as f64;
            graph.vertex_mut(id).gain = g;
        }
        let mut paths = shortest_paths(&graph);
        let mut best: Option<usize> = None;
        for i in 0..paths.len() {
            let gains: Vec<f64> = paths[i].vertex_ids.iter().map(|v| self.scoring_gain(&graph, *v)).collect();
            paths[i].gain = exploration_gain(&paths[i], &gains, gain);
            best = match best {
                None => Some(i),
                Some(b) if better(&paths[i], &paths[b]) => Some(i),
                keep => keep,
            };
        }
        let decision = match best {
            Some(b) if paths[b].gain >= gain.threshold => LocalDecision::BestPath(paths[b].clone()),
            _ => LocalDecision::LocalCompletion,
        };
        Ok(LocalPlan { graph, paths, decision })
    }
}

fn better(a: &PlannedPath, b: &PlannedPath) -> bool {
    if a.gain != b.gain {
        return a.gain > b.gain;
    }
    if a.length != b.length {
        return a.length < b.length;
    }
    a.terminal() < b.terminal()
}

/// Exploration direction from the position several planning iterations ago to the current one.
#[derive(Debug, Clone)]
pub struct DirectionEstimator {
    window: usize,
    history: VecDeque<Point>,
}

impl DirectionEstimator {
    pub fn new(window: usize) -> Self {
        Self { window, history: VecDeque::with_capacity(window + 1) }
    }

    pub fn record(&mut self, p: Point) {
        self.history.push_back(p);
        while self.history.len() > self.window + 1 {
            self.history.pop_front();
        }
    }

    /// Unit direction, or zero until there is enough history.
    pub fn direction(&self) -> Vec3 {
        if self.history.len() < 2 {
            return Vec3::zeros();
        }
        let d = self.history.back().unwrap() - self.history.front().unwrap();
        if d.norm() < 1e-6 {
            Vec3::zeros()
        } else {
            d.normalize()
        }
    }
}
