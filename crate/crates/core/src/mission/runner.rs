//! The mission state machine.

use std::collections::HashMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::artifact::{
    associate_and_update, bbox_to_point, confirm_and_freeze, simulate_detection, ArtifactHypothesis, Association, BayesParams,
    DetectionParams, ScoreOutcome, Scorer,
};
use crate::geometry::{Aabb, Point, Vec3};
use crate::global_planner::{
    cluster_and_select_principal, dedup_against_global, extract_frontiers, homing_path, merge_into_global, reevaluate_frontiers,
    select_frontier, GlobalGraph,
};
use crate::graph::{dijkstra, PathKind, PlannedPath, ShortestPaths, VertexId};
use crate::local_planner::{assign_headings, DirectionEstimator, LocalDecision, LocalPlanner};
use crate::mission::config::MissionConfig;
use crate::mission::log::{
    Event, EventRecord, HomingReason, LogChunk, LogSink, MissionLog, Mode, NullSink, PathRecord, ReportRecord, TickRecord,
};
use crate::mission::metrics::{compute_metrics, Summary};
use crate::path_refiner::refine;
use crate::sensor::{simulate_scan, RangeNoise, SensorFrustum};
use crate::voxel_map::{MapError, RobotConfig, VoxelMap};
use crate::world::{lookahead_hit, LocalizationNoise, PathFollower, RobotClass, RobotModel, World};

#[derive(Debug, Error)]
pub enum MissionError {
    #[error(transparent)]
    Config(#[from] crate::mission::config::ConfigError),
    #[error("cannot build the map: {0}")]
    Map(#[from] MapError),
    #[error("cannot write mission log: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MissionOutcome {
    /// The state machine terminated normally (at home, or when the time limit expired).
    Completed,
    /// The tick cap given by the caller was reached first.
    TickLimit,
    /// The robot could not make progress.
    Aborted(String),
}

impl MissionOutcome {
    pub fn label(&self) -> &'static str {
        match self {
            MissionOutcome::Completed => "completed",
            MissionOutcome::TickLimit => "tick_limit",
            MissionOutcome::Aborted(_) => "aborted",
        }
    }
}

#[derive(Debug, Clone)]
pub struct MissionResult {
    pub log: MissionLog,
    pub map: VoxelMap,
    pub global: GlobalGraph,
    pub outcome: MissionOutcome,
    pub summary: Summary,
}

/// Spacing for attaching travelled stretches to the global graph, m.
const ATTACH_SPACING: f64 = 0.5;
/// Extra back-up steps allowed when the root still overlaps a fresh geofence.
const MAX_EXTRA_REVERSALS: usize = 10;
/// Planning iterations in a row without simulated motion before giving up.
const MAX_IDLE_ITERATIONS: usize = 25;

#[derive(Debug, Clone, Copy)]
struct TrailPoint {
    p: Point,
    tag: Option<VertexId>,
}

enum Motion {
    Forward { follower: PathFollower, path: PlannedPath, attached: usize, frontier: Option<VertexId> },
    Reverse { follower: PathFollower, keep: usize, cut: Point, hit: Option<Point>, resume: Mode, extra: usize },
}

struct Runner<'a> {
    cfg: &'a MissionConfig,
    world: &'a World,
    model: RobotModel,
    frustum: SensorFrustum,
    camera: SensorFrustum,
    det_params: DetectionParams,
    bayes: BayesParams,
    map: VoxelMap,
    global: GlobalGraph,
    planner: LocalPlanner,
    plan_rng: ChaCha8Rng,
    det_rng: ChaCha8Rng,
    range_noise: Option<RangeNoise>,
    loc: LocalizationNoise,
    direction: DirectionEstimator,
    hyps: Vec<ArtifactHypothesis>,
    scorer: Scorer,
    tick: u64,
    t: f64,
    pos: Point,
    heading: f64,
    distance: f64,
    trail: Vec<TrailPoint>,
    cur_vertex: VertexId,
    home_sp: Option<ShortestPaths>,
    mode: Mode,
    motion: Option<Motion>,
    outcome: Option<MissionOutcome>,
    blocked: usize,
    recoveries: usize,
    idle: usize,
    last_scan: Option<Point>,
    scan_every: u64,
    detect_every: u64,
    log: MissionLog,
    sink: &'a mut dyn LogSink,
    flushed: [usize; 4],
    next_flush: f64,
}

/// Runs a mission to completion and returns the log, final map and global graph.
pub fn run_mission(cfg: &MissionConfig, world: &World, ticks_max: Option<u64>) -> Result<MissionResult, MissionError> {
    run_mission_with_sink(cfg, world, ticks_max, &mut NullSink)
}

/// As [`run_mission`], streaming the log to `sink` in chunks of `mission.flush_period` simulated seconds.
pub fn run_mission_with_sink(
    cfg: &MissionConfig,
    world: &World,
    ticks_max: Option<u64>,
    sink: &mut dyn LogSink,
) -> Result<MissionResult, MissionError> {
    cfg.validate()?;
    let seed = cfg.mission.seed;
    let mut plan_rng = ChaCha8Rng::seed_from_u64(seed);
    plan_rng.set_stream(1);
    let mut det_rng = ChaCha8Rng::seed_from_u64(seed);
    det_rng.set_stream(2);
    let model = cfg.robot_model();
    let frustum = cfg.sensor.frustum();
    let map = VoxelMap::covering(&world.bounds, cfg.planner.resolution)?;
    let home_cfg = RobotConfig::new(world.home, world.start_heading, model.half_extents);
    let per_tick = |period: f64| ((period / cfg.mission.dt).round() as u64).max(1);
    let mut runner = Runner {
        cfg,
        world,
        model,
        frustum,
        camera: cfg.camera.frustum(),
        det_params: cfg.camera.detection_params(),
        bayes: cfg.artifacts.bayes(),
        map,
        global: GlobalGraph::new(home_cfg),
        planner: LocalPlanner::new(cfg.local_planner_params(), frustum),
        plan_rng,
        det_rng,
        range_noise: (cfg.sensor.range_noise > 0.0).then(|| RangeNoise::new(cfg.sensor.range_noise, seed ^ 0x5eed_0003)),
        loc: LocalizationNoise::new(model.localization_noise, seed ^ 0x5eed_0004),
        direction: DirectionEstimator::new(cfg.planner.direction_window),
        hyps: Vec::new(),
        scorer: Scorer::new(world.artifacts.clone()),
        tick: 0,
        t: 0.0,
        pos: world.start_position,
        heading: world.start_heading,
        distance: 0.0,
        trail: Vec::new(),
        cur_vertex: 0,
        home_sp: None,
        mode: Mode::Explore,
        motion: None,
        outcome: None,
        blocked: 0,
        recoveries: 0,
        idle: 0,
        last_scan: None,
        scan_every: per_tick(cfg.sensor.scan_period),
        detect_every: per_tick(cfg.camera.period),
        log: MissionLog::default(),
        sink,
        flushed: [0; 4],
        next_flush: cfg.mission.flush_period,
    };
    runner.run(ticks_max)?;
    let outcome = runner.outcome.clone().unwrap_or(MissionOutcome::Completed);
    let summary = compute_metrics(&runner.log, world, &runner.map, outcome.label());
    Ok(MissionResult { log: runner.log, map: runner.map, global: runner.global, outcome, summary })
}

fn trail_length(points: &[TrailPoint]) -> f64 {
    points.windows(2).map(|w| (w[1].p - w[0].p).norm()).sum()
}

impl<'a> Runner<'a> {
    fn run(&mut self, ticks_max: Option<u64>) -> Result<(), MissionError> {
        self.start();
        while self.outcome.is_none() {
            if ticks_max.is_some_and(|m| self.tick >= m) {
                self.event(Event::TickLimit { ticks: self.tick });
                self.outcome = Some(MissionOutcome::TickLimit);
                break;
            }
            match self.motion.take() {
                None => self.plan_iteration(),
                Some(m) => self.motion_tick(m),
            }
            self.maybe_flush(false)?;
        }
        self.maybe_flush(true)
    }

    fn event(&mut self, event: Event) {
        self.log.events.push(EventRecord { t: self.t, event });
    }

    fn abort(&mut self, reason: &str) {
        self.event(Event::Aborted { reason: reason.to_string() });
        self.outcome = Some(MissionOutcome::Aborted(reason.to_string()));
        self.motion = None;
    }

    fn set_mode(&mut self, to: Mode) {
        if self.mode == to {
            return;
        }
        if !self.mode.can_transition(to) && self.mode.can_transition(Mode::Explore) {
            self.push_mode(Mode::Explore);
        }
        self.push_mode(to);
    }

    fn push_mode(&mut self, to: Mode) {
        debug_assert!(self.mode.can_transition(to), "illegal transition {:?} -> {:?}", self.mode, to);
        self.event(Event::ModeChange { from: self.mode, to });
        self.mode = to;
    }

    fn config_at(&self, p: Point) -> RobotConfig {
        RobotConfig::new(p, self.heading, self.model.half_extents)
    }

    fn start(&mut self) {
        self.event(Event::MissionStarted { position: Event::point(&self.pos), home: Event::point(&self.world.home) });
        self.scan();
        let start_vertex = if (self.pos - self.world.home).norm() < 1e-6 {
            Some(self.global.home())
        } else if self.map.segment_admissible(&self.world.home, &self.pos, &self.model.half_extents) {
            Some(self.global.attach(self.global.home(), self.config_at(self.pos)))
        } else {
            None
        };
        self.trail.push(TrailPoint { p: self.pos, tag: start_vertex });
        self.record_tick();
        match start_vertex {
            Some(v) => self.cur_vertex = v,
            None => self.abort("start position is not connected to home"),
        }
    }

    // --- global graph bookkeeping -------------------------------------------------------------

    fn last_tag(&self) -> (usize, VertexId) {
        self.trail
            .iter()
            .enumerate()
            .rev()
            .find_map(|(i, tp)| tp.tag.map(|v| (i, v)))
            .unwrap_or((0, self.global.home()))
    }

    /// Adds the stretch travelled since the last global vertex to the global graph.
    fn attach_current(&mut self) {
        let (k, v) = self.last_tag();
        let mut prev = v;
        if k + 1 < self.trail.len() {
            let pts: Vec<Point> = self.trail[k..].iter().map(|tp| tp.p).collect();
            let mut keep = Vec::new();
            let mut anchor = pts[0];
            for i in 1..pts.len() {
                let last = i + 1 == pts.len();
                let turn = !last && {
                    let a = pts[i] - anchor;
                    let b = pts[i + 1] - pts[i];
                    a.norm() > 1e-9 && b.norm() > 1e-9 && a.cross(&b).norm() > 1e-9 * a.norm() * b.norm()
                };
                if last || turn || (pts[i] - anchor).norm() >= ATTACH_SPACING {
                    keep.push(pts[i]);
                    anchor = pts[i];
                }
            }
            for p in keep {
                prev = self.global.attach(prev, self.config_at(p));
            }
            self.trail.last_mut().expect("trail is never empty").tag = Some(prev);
            self.home_sp = None;
        }
        self.cur_vertex = prev;
    }

    fn home_distances(&mut self) -> &ShortestPaths {
        if self.home_sp.is_none() {
            self.home_sp = Some(dijkstra(&self.global.graph, self.global.home()));
        }
        self.home_sp.as_ref().expect("just computed")
    }

    /// Estimated travel time back home from the current position.
    fn time_to_home(&mut self) -> f64 {
        let (k, v) = self.last_tag();
        let since = trail_length(&self.trail[k..]);
        let d = self.home_distances().dist[v];
        (since + d) / self.model.v_ref
    }

    fn remaining(&self) -> f64 {
        self.cfg.mission.time_limit - self.t
    }

    fn budget_exceeded(&mut self) -> bool {
        let to_home = self.time_to_home();
        self.remaining() - to_home <= self.cfg.planner.safety_margin
    }

    fn apply_remap(&mut self, remap: &[Option<VertexId>]) {
        for tp in &mut self.trail {
            tp.tag = tp.tag.and_then(|v| remap.get(v).copied().flatten());
        }
        self.home_sp = None;
        self.cur_vertex = self.last_tag().1;
    }

    // --- planning -----------------------------------------------------------------------------

    fn log_path(&mut self, path: &PlannedPath) -> usize {
        let id = self.log.paths.len();
        self.log.paths.push(PathRecord::new(id, self.t, path));
        id
    }

    fn headings(&self, path: &PlannedPath) -> PlannedPath {
        let mut p = path.clone();
        if let Some(first) = p.waypoints.first_mut() {
            *first = first.with_heading(self.heading);
        }
        assign_headings(&p, self.model.v_ref, self.model.yaw_rate_max, self.model.class)
    }

    fn begin_forward(&mut self, path: PlannedPath, frontier: Option<VertexId>) {
        let points = path.positions();
        let headings = path.waypoints.iter().map(|w| w.heading).collect();
        let follower = PathFollower::new(points, headings, self.model.class);
        let complete = follower.is_complete();
        self.motion = Some(Motion::Forward { follower, path: path.clone(), attached: 0, frontier });
        if complete {
            let m = self.motion.take().expect("just set");
            if let Motion::Forward { frontier, .. } = m {
                self.on_forward_complete(frontier);
            }
        }
    }

    fn plan_iteration(&mut self) {
        self.idle += 1;
        if self.idle > MAX_IDLE_ITERATIONS {
            self.abort("planning makes no progress");
            return;
        }
        self.attach_current();
        self.direction.record(self.pos);
        let root = self.config_at(self.pos);
        if !self.map.box_admissible(&root.position, &root.half_extents) {
            self.recover_root();
            return;
        }
        let started = Instant::now();
        let gain = self.cfg.gain_params(self.direction.direction());
        let plan = match self.planner.plan(&self.map, &root, &gain, &mut self.plan_rng) {
            Ok(p) => p,
            Err(_) => {
                self.recover_root();
                return;
            }
        };
        self.recoveries = 0;

        let p = &self.cfg.planner;
        let candidates = dedup_against_global(extract_frontiers(&plan.graph, p.gain_threshold), &self.global, p.lambda);
        let gains: HashMap<VertexId, f64> = candidates.iter().map(|c| (c.vertex, c.gain)).collect();
        let paths: Vec<PlannedPath> = candidates.iter().map(|c| c.path.clone()).collect();
        let principals = cluster_and_select_principal(&paths, p.dtw_threshold);
        let merged = merge_into_global(
            &mut self.global,
            &principals,
            &gains,
            self.cur_vertex,
            &self.map,
            p.edge_radius,
            p.lambda,
            self.t,
        );
        let removed = reevaluate_frontiers(&mut self.global, &self.map, self.planner.evaluator(), p.gain_threshold, self.t);
        self.home_sp = None;
        let best = match plan.decision {
            LocalDecision::BestPath(path) => {
                let path = if p.refine { refine(&path, &self.map, &self.cfg.refine_params()) } else { path };
                Some(self.headings(&path))
            }
            LocalDecision::LocalCompletion => None,
        };
        self.log.planning_times.push(started.elapsed().as_secs_f64());
        if !merged.new_frontiers.is_empty() || !removed.is_empty() {
            let total = self.global.frontiers.len();
            self.event(Event::FrontiersUpdated { added: merged.new_frontiers, removed, total });
        }

        if self.budget_exceeded() {
            self.start_homing(HomingReason::Budget);
            return;
        }
        match best {
            Some(path) => {
                let id = self.log_path(&path);
                self.event(Event::LocalPlan { path: id, gain: path.gain, length: path.length, graph_vertices: plan.graph.len() });
                self.set_mode(Mode::Execute);
                self.begin_forward(path, None);
            }
            None => {
                self.event(Event::LocalCompletion { graph_vertices: plan.graph.len() });
                self.reposition_or_home();
            }
        }
    }

    fn reposition_or_home(&mut self) {
        loop {
            let budget = self.cfg.time_budget(self.remaining());
            let Some(choice) = select_frontier(&self.global, self.cur_vertex, &budget) else {
                self.start_homing(HomingReason::NoFrontiers);
                return;
            };
            if choice.path.length < 1e-9 {
                self.global.clear_frontier(choice.frontier);
                self.event(Event::FrontierReached { vertex: choice.frontier });
                continue;
            }
            let path = self.headings(&choice.path);
            let id = self.log_path(&path);
            self.event(Event::FrontierSelected {
                vertex: choice.frontier,
                position: Event::point(&self.global.graph.position(choice.frontier)),
                volume_gain: choice.volume_gain,
                global_gain: choice.global_gain,
                remaining_time: choice.remaining_time,
                path: id,
            });
            self.set_mode(Mode::Reposition);
            self.begin_forward(path, Some(choice.frontier));
            return;
        }
    }

    fn start_homing(&mut self, reason: HomingReason) {
        self.attach_current();
        let cur = self.cur_vertex;
        if !self.home_distances().reachable(cur) {
            self.abort("home is unreachable in the global graph");
            return;
        }
        let path = self.headings(&homing_path(&self.global, self.cur_vertex));
        let id = self.log_path(&path);
        let remaining_time = self.remaining();
        let time_to_home = path.length / self.model.v_ref;
        if self.mode != Mode::Home {
            self.event(Event::HomingTriggered { reason, remaining_time, time_to_home, path: id });
            self.set_mode(Mode::Home);
        }
        self.begin_forward(path, None);
    }

    fn recover_root(&mut self) {
        self.recoveries += 1;
        self.event(Event::DegenerateRoot { position: Event::point(&self.pos), attempt: self.recoveries });
        if self.recoveries > self.cfg.mission.max_recoveries {
            self.abort("root configuration stays inadmissible after recovery");
            return;
        }
        self.start_reverse(self.model.reverse_distance, None, Mode::Explore, 0);
    }

    // --- motion -------------------------------------------------------------------------------

    fn start_reverse(&mut self, distance: f64, hit: Option<Point>, resume: Mode, extra: usize) {
        let mut points = vec![self.pos];
        let mut acc = 0.0;
        let mut keep = 1;
        let mut cut = self.trail[0].p;
        let mut i = self.trail.len() - 1;
        while i > 0 {
            let (a, b) = (self.trail[i].p, self.trail[i - 1].p);
            let len = (b - a).norm();
            if acc + len >= distance {
                cut = if len > 0.0 { a + (b - a) * ((distance - acc) / len) } else { a };
                keep = i;
                break;
            }
            acc += len;
            points.push(b);
            i -= 1;
        }
        if i == 0 {
            keep = 1;
            cut = self.trail[0].p;
        }
        if (points.last().expect("non-empty") - cut).norm() > 1e-12 {
            points.push(cut);
        }
        let headings = vec![self.heading; points.len()];
        let follower = PathFollower::new(points, headings, self.model.class);
        self.motion = Some(Motion::Reverse { follower, keep, cut, hit, resume, extra });
    }

    fn motion_tick(&mut self, motion: Motion) {
        match motion {
            Motion::Forward { mut follower, path, mut attached, frontier } => {
                if self.model.class == RobotClass::Legged {
                    if let Some(dir) = follower.direction() {
                        if let Some(hit) = lookahead_hit(&self.pos, &dir, &self.model.half_extents, self.world) {
                            self.on_blocked(hit);
                            return;
                        }
                    }
                }
                let out = follower.advance(self.model.v_ref * self.cfg.mission.dt);
                self.advance_clock(out.position, out.heading, out.traveled, true);
                while attached < follower.last_reached() {
                    attached += 1;
                    self.attach_waypoint(&path, attached);
                }
                self.after_tick(out.completed);
                if self.outcome.is_some() {
                    return;
                }
                if out.completed {
                    self.on_forward_complete(frontier);
                } else if matches!(self.mode, Mode::Execute | Mode::Reposition) && self.budget_exceeded() {
                    self.start_homing(HomingReason::Budget);
                } else {
                    self.motion = Some(Motion::Forward { follower, path, attached, frontier });
                }
            }
            Motion::Reverse { mut follower, keep, cut, hit, resume, extra } => {
                let out = follower.advance(self.model.v_ref * self.cfg.mission.dt);
                self.advance_clock(out.position, self.heading, out.traveled, false);
                self.after_tick(out.completed);
                if self.outcome.is_some() {
                    return;
                }
                if out.completed {
                    self.on_reverse_complete(keep, cut, hit, resume, extra);
                } else {
                    self.motion = Some(Motion::Reverse { follower, keep, cut, hit, resume, extra });
                }
            }
        }
    }

    fn advance_clock(&mut self, position: Point, heading: f64, traveled: f64, extend_trail: bool) {
        self.tick += 1;
        self.t = self.tick as f64 * self.cfg.mission.dt;
        self.idle = 0;
        self.pos = position;
        self.heading = heading;
        self.distance += traveled;
        if extend_trail && traveled > 0.0 {
            self.trail.push(TrailPoint { p: position, tag: None });
        }
        self.loc.step(self.cfg.mission.dt);
    }

    /// Registers waypoint `k` of the executing path as a global vertex.
    fn attach_waypoint(&mut self, path: &PlannedPath, k: usize) {
        let wp = path.waypoints[k];
        let v = match path.kind {
            PathKind::Global | PathKind::Homing => path.vertex_ids[k],
            PathKind::Local | PathKind::Refined => {
                let v = self.global.attach(self.cur_vertex, wp.with_heading(self.heading));
                self.home_sp = None;
                v
            }
        };
        self.cur_vertex = v;
        let n = self.trail.len();
        if (self.trail[n - 1].p - wp.position).norm() < 1e-9 {
            self.trail[n - 1].tag = Some(v);
        } else {
            self.trail.insert(n - 1, TrailPoint { p: wp.position, tag: Some(v) });
        }
    }

    fn after_tick(&mut self, completed: bool) {
        if self.tick.is_multiple_of(self.scan_every) || completed {
            self.scan();
        }
        if self.tick.is_multiple_of(self.detect_every) {
            self.detect();
        }
        self.record_tick();
        if !self.world.is_free(&self.pos) || (self.model.class == RobotClass::Legged && self.world.in_non_traversable(&self.pos)) {
            self.event(Event::AdmissibilityViolation { position: Event::point(&self.pos) });
            self.abort("robot left traversable free space");
            return;
        }
        if self.remaining() <= 1e-9 && self.mode != Mode::Terminated {
            self.event(Event::TimeExpired { position: Event::point(&self.pos) });
            self.outcome = Some(MissionOutcome::Completed);
            self.motion = None;
        }
    }

    fn on_forward_complete(&mut self, frontier: Option<VertexId>) {
        match self.mode {
            Mode::Home => {
                self.event(Event::HomeReached { position: Event::point(&self.pos) });
                self.set_mode(Mode::Terminated);
                self.outcome = Some(MissionOutcome::Completed);
            }
            Mode::Reposition => {
                if let Some(f) = frontier {
                    self.global.clear_frontier(f);
                    self.event(Event::FrontierReached { vertex: f });
                }
                self.set_mode(Mode::Explore);
            }
            _ => self.set_mode(Mode::Explore),
        }
    }

    fn on_blocked(&mut self, hit: Point) {
        self.blocked += 1;
        self.event(Event::Blocked { position: Event::point(&self.pos), hit: Event::point(&hit) });
        if self.blocked > self.cfg.mission.max_blocked {
            self.abort("too many blocked events");
            return;
        }
        let resume = self.mode;
        if self.mode == Mode::Execute {
            self.set_mode(Mode::Blocked);
        }
        self.start_reverse(self.model.reverse_distance, Some(hit), resume, 0);
    }

    fn on_reverse_complete(&mut self, keep: usize, cut: Point, hit: Option<Point>, resume: Mode, extra: usize) {
        self.trail.truncate(keep);
        if (self.trail[keep - 1].p - cut).norm() > 1e-12 {
            self.trail.push(TrailPoint { p: cut, tag: None });
        }
        self.pos = cut;
        let reversed = if extra == 0 { self.model.reverse_distance } else { self.map.resolution() };
        self.event(Event::Reversed { position: Event::point(&self.pos), distance: reversed });
        if let Some(h) = hit {
            let half = Vec3::repeat(self.cfg.mission.geofence_size / 2.0);
            let fence = Aabb::from_center(h, half);
            let added = self.map.add_geofence(fence);
            let before = self.global.graph.len();
            let remap = self.global.prune_inadmissible(&self.map, &self.model.half_extents);
            self.apply_remap(&remap);
            self.event(Event::GeofenceAdded {
                min: Event::point(&fence.min),
                max: Event::point(&fence.max),
                added,
                pruned_vertices: before - self.global.graph.len(),
            });
        }
        // A fresh geofence may still overlap the robot box; back up a voxel at a time.
        let root_ok = self.map.box_admissible(&self.pos, &self.model.half_extents);
        if !root_ok && (hit.is_some() || extra > 0) && extra < MAX_EXTRA_REVERSALS {
            self.start_reverse(self.map.resolution(), None, resume, extra + 1);
            return;
        }
        match resume {
            Mode::Home => self.start_homing(HomingReason::Budget),
            Mode::Execute | Mode::Blocked | Mode::Reposition => self.set_mode(Mode::Explore),
            _ => {}
        }
    }

    // --- sensing ------------------------------------------------------------------------------

    fn scan(&mut self) {
        if self.range_noise.is_none() && self.last_scan.is_some_and(|p| (p - self.pos).norm() < 1e-9) {
            return;
        }
        let cfg = self.config_at(self.pos);
        let scan = simulate_scan(&cfg, &self.frustum, self.world, self.range_noise.as_mut());
        self.map.integrate_scan(&scan);
        self.map.clear_box(&self.pos, &self.model.half_extents);
        self.last_scan = Some(self.pos);
    }

    fn detect(&mut self) {
        let pose = self.config_at(self.pos);
        let detections =
            simulate_detection(self.t, &pose, &self.camera, &self.world.artifacts, &self.map, &self.det_params, &mut self.det_rng);
        let grid = (self.cfg.artifacts.grid_rows, self.cfg.artifacts.grid_cols);
        for det in detections {
            let point = match bbox_to_point(&det, &self.map, grid.0, grid.1, 1.5 * self.det_params.range) {
                Ok(p) => p + self.loc.offset(),
                Err(_) => {
                    self.event(Event::DetectionDiscarded { class: det.class });
                    continue;
                }
            };
            let idx = match associate_and_update(&point, det.class, &mut self.hyps, &self.bayes) {
                Association::Absorbed(i) | Association::Created(i) => i,
                Association::Ignored(_) => continue,
            };
            let Some(report) = confirm_and_freeze(&mut self.hyps[idx], self.bayes.confirm_threshold) else { continue };
            let position = Event::point(&report.position);
            self.event(Event::ArtifactConfirmed {
                hypothesis: report.hypothesis,
                class: report.class,
                position,
                detections: self.hyps[idx].count,
            });
            self.event(Event::ArtifactReported { hypothesis: report.hypothesis, class: report.class, position });
            let outcome = self.scorer.score(&report);
            let (scored, artifact) = match outcome {
                ScoreOutcome::Scored(id) => (true, Some(id)),
                ScoreOutcome::Rejected => (false, None),
            };
            let error = self
                .world
                .artifacts
                .iter()
                .filter(|a| a.class == report.class)
                .map(|a| (a.position - report.position).norm())
                .min_by(f64::total_cmp);
            self.event(Event::ArtifactScored { hypothesis: report.hypothesis, artifact: artifact.clone(), scored });
            self.log.reports.push(ReportRecord {
                t: self.t,
                hypothesis: report.hypothesis,
                class: report.class,
                position,
                scored,
                artifact,
                error,
            });
        }
    }

    // --- logging ------------------------------------------------------------------------------

    fn record_tick(&mut self) {
        let reported = self.loc.reported(&self.pos);
        self.log.ticks.push(TickRecord {
            tick: self.tick,
            t: self.t,
            position: Event::point(&self.pos),
            heading: self.heading,
            reported: Event::point(&reported),
            mode: self.mode,
            known_voxels: self.map.known_count(),
            distance: self.distance,
        });
    }

    fn maybe_flush(&mut self, force: bool) -> Result<(), MissionError> {
        if !force && self.t < self.next_flush {
            return Ok(());
        }
        while self.next_flush <= self.t {
            self.next_flush += self.cfg.mission.flush_period;
        }
        let [a, b, c, d] = self.flushed;
        let chunk = LogChunk {
            ticks: &self.log.ticks[a..],
            events: &self.log.events[b..],
            reports: &self.log.reports[c..],
            paths: &self.log.paths[d..],
        };
        self.sink.write_chunk(chunk)?;
        self.flushed = [self.log.ticks.len(), self.log.events.len(), self.log.reports.len(), self.log.paths.len()];
        Ok(())
    }
}
