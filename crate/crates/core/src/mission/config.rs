//! Mission configuration, read from TOML. Every key has a default and unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{BayesParams, DetectionParams};
use crate::geometry::Vec3;
use crate::global_planner::TimeBudget;
use crate::local_planner::{GainParams, LocalPlannerParams, SamplingMode};
use crate::path_refiner::RefineParams;
use crate::sensor::SensorFrustum;
use crate::world::{RobotClass, RobotModel};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config value `{key}`: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotSection {
    pub class: RobotClass,
    pub v_ref: f64,
    pub yaw_rate_max: f64,
    pub reverse_distance: f64,
    pub half_extents: [f64; 3],
    pub localization_noise: f64,
}

impl Default for RobotSection {
    fn default() -> Self {
        Self {
            class: RobotClass::Aerial,
            v_ref: 1.0,
            yaw_rate_max: 1.0,
            reverse_distance: 0.5,
            half_extents: [0.3, 0.3, 0.2],
            localization_noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSection {
    pub max_range: f64,
    pub fov_h_deg: f64,
    pub fov_v_deg: f64,
    pub ray_step_deg: f64,
    pub offset: [f64; 3],
    /// Std of additive range noise, m.
    pub range_noise: f64,
    /// Time between scans, s.
    pub scan_period: f64,
}

impl Default for SensorSection {
    fn default() -> Self {
        Self {
            max_range: 6.0,
            fov_h_deg: 360.0,
            fov_v_deg: 180.0,
            ray_step_deg: 2.0,
            offset: [0.0; 3],
            range_noise: 0.0,
            scan_period: 0.5,
        }
    }
}

impl SensorSection {
    pub fn frustum(&self) -> SensorFrustum {
        SensorFrustum {
            max_range: self.max_range,
            fov_h: self.fov_h_deg.to_radians(),
            fov_v: self.fov_v_deg.to_radians(),
            ray_step: self.ray_step_deg.to_radians(),
            offset: self.offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraSection {
    pub fov_h_deg: f64,
    pub fov_v_deg: f64,
    pub offset: [f64; 3],
    pub detection_range: f64,
    pub box_extent_deg: f64,
    pub box_jitter: f64,
    pub false_negative_rate: f64,
    pub proximity_range: f64,
    /// Time between detector runs, s.
    pub period: f64,
}

impl Default for CameraSection {
    fn default() -> Self {
        Self {
            fov_h_deg: 360.0,
            fov_v_deg: 90.0,
            offset: [0.0; 3],
            detection_range: 8.0,
            box_extent_deg: 8.0,
            box_jitter: 0.1,
            false_negative_rate: 0.0,
            proximity_range: 3.0,
            period: 1.0,
        }
    }
}

impl CameraSection {
    pub fn frustum(&self) -> SensorFrustum {
        SensorFrustum {
            max_range: self.detection_range,
            fov_h: self.fov_h_deg.to_radians(),
            fov_v: self.fov_v_deg.to_radians(),
            ray_step: 1f64.to_radians(),
            offset: self.offset,
        }
    }

    pub fn detection_params(&self) -> DetectionParams {
        DetectionParams {
            range: self.detection_range,
            box_extent: self.box_extent_deg.to_radians(),
            box_jitter: self.box_jitter,
            false_negative_rate: self.false_negative_rate,
            proximity_range: self.proximity_range,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerSection {
    pub resolution: f64,
    pub bound: [f64; 3],
    pub n_samples: usize,
    pub edge_radius: f64,
    pub zeta: f64,
    pub delta_gain: f64,
    pub gain_threshold: f64,
    pub lambda: f64,
    pub dtw_threshold: f64,
    pub eps_d: f64,
    pub safety_margin: f64,
    pub mode: SamplingMode,
    pub floor_height: f64,
    pub level_bonus: f64,
    /// Planning iterations between the two positions that define the exploration direction.
    pub direction_window: usize,
    pub refine: bool,
    /// Defaults to twice the largest robot half-extent.
    pub target_clearance: Option<f64>,
    pub refine_iterations: usize,
}

impl Default for PlannerSection {
    fn default() -> Self {
        Self {
            resolution: 0.2,
            bound: [12.0, 12.0, 3.0],
            n_samples: 300,
            edge_radius: 1.5,
            zeta: 0.3,
            delta_gain: 0.15,
            gain_threshold: 30.0,
            lambda: 3.0,
            dtw_threshold: 4.0,
            eps_d: 0.02,
            safety_margin: 30.0,
            mode: SamplingMode::Horizontal,
            floor_height: 2.5,
            level_bonus: 200.0,
            direction_window: 10,
            refine: true,
            target_clearance: None,
            refine_iterations: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArtifactSection {
    pub radius: f64,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub p_hit: f64,
    pub p_miss: f64,
    pub confirm_threshold: f64,
}

impl Default for ArtifactSection {
    fn default() -> Self {
        let b = BayesParams::default();
        Self { radius: b.radius, grid_rows: 5, grid_cols: 5, p_hit: b.p_hit, p_miss: b.p_miss, confirm_threshold: b.confirm_threshold }
    }
}

impl ArtifactSection {
    pub fn bayes(&self) -> BayesParams {
        BayesParams { radius: self.radius, p_hit: self.p_hit, p_miss: self.p_miss, confirm_threshold: self.confirm_threshold }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MissionSection {
    /// World file, resolved relative to the config file.
    pub world: Option<PathBuf>,
    /// Exploration time limit, s.
    pub time_limit: f64,
    /// Simulation tick, s.
    pub dt: f64,
    pub seed: u64,
    /// Blocked events tolerated before the mission is aborted.
    pub max_blocked: usize,
    /// Consecutive failed root recoveries tolerated before the mission is aborted.
    pub max_recoveries: usize,
    /// Edge of the geofence cube placed at a blocking location, m.
    pub geofence_size: f64,
    /// Simulated time between log flushes, s.
    pub flush_period: f64,
}

impl Default for MissionSection {
    fn default() -> Self {
        Self {
            world: None,
            time_limit: 600.0,
            dt: 0.1,
            seed: 0,
            max_blocked: 30,
            max_recoveries: 3,
            geofence_size: 1.0,
            flush_period: 300.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MissionConfig {
    pub robot: RobotSection,
    pub sensor: SensorSection,
    pub camera: CameraSection,
    pub planner: PlannerSection,
    pub artifacts: ArtifactSection,
    pub mission: MissionSection,
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, "must be positive and finite"))
    }
}

fn non_negative(key: &str, v: f64) -> Result<(), ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, "must be non-negative and finite"))
    }
}

fn probability(key: &str, v: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(key, "must lie in [0, 1]"))
    }
}

impl MissionConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: MissionConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; a relative `mission.world` is resolved against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if let (Some(w), Some(dir)) = (cfg.mission.world.as_ref(), path.parent()) {
            if w.is_relative() {
                cfg.mission.world = Some(dir.join(w));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let r = &self.robot;
        positive("robot.v_ref", r.v_ref)?;
        positive("robot.yaw_rate_max", r.yaw_rate_max)?;
        non_negative("robot.reverse_distance", r.reverse_distance)?;
        for (i, h) in r.half_extents.iter().enumerate() {
            positive(&format!("robot.half_extents[{i}]"), *h)?;
        }
        non_negative("robot.localization_noise", r.localization_noise)?;

        let s = &self.sensor;
        self.sensor.frustum().validate().map_err(|e| invalid("sensor", e.to_string()))?;
        non_negative("sensor.range_noise", s.range_noise)?;
        positive("sensor.scan_period", s.scan_period)?;

        let c = &self.camera;
        self.camera.frustum().validate().map_err(|e| invalid("camera", e.to_string()))?;
        positive("camera.box_extent_deg", c.box_extent_deg)?;
        non_negative("camera.box_jitter", c.box_jitter)?;
        probability("camera.false_negative_rate", c.false_negative_rate)?;
        non_negative("camera.proximity_range", c.proximity_range)?;
        positive("camera.period", c.period)?;

        let p = &self.planner;
        positive("planner.resolution", p.resolution)?;
        for (i, b) in p.bound.iter().enumerate() {
            positive(&format!("planner.bound[{i}]"), *b)?;
        }
        if p.n_samples == 0 {
            return Err(invalid("planner.n_samples", "must be at least 1"));
        }
        positive("planner.edge_radius", p.edge_radius)?;
        non_negative("planner.zeta", p.zeta)?;
        non_negative("planner.delta_gain", p.delta_gain)?;
        positive("planner.gain_threshold", p.gain_threshold)?;
        non_negative("planner.lambda", p.lambda)?;
        non_negative("planner.dtw_threshold", p.dtw_threshold)?;
        non_negative("planner.eps_d", p.eps_d)?;
        non_negative("planner.safety_margin", p.safety_margin)?;
        positive("planner.floor_height", p.floor_height)?;
        non_negative("planner.level_bonus", p.level_bonus)?;
        if p.direction_window == 0 {
            return Err(invalid("planner.direction_window", "must be at least 1"));
        }
        if let Some(t) = p.target_clearance {
            positive("planner.target_clearance", t)?;
        }

        let a = &self.artifacts;
        positive("artifacts.radius", a.radius)?;
        if a.grid_rows == 0 || a.grid_cols == 0 {
            return Err(invalid("artifacts.grid_rows", "grid must have at least one cell"));
        }
        probability("artifacts.p_hit", a.p_hit)?;
        probability("artifacts.p_miss", a.p_miss)?;
        if !(a.p_hit > a.p_miss && a.p_miss > 0.0 && a.p_hit < 1.0) {
            return Err(invalid("artifacts.p_hit", "need 0 < p_miss < p_hit < 1"));
        }
        if !(a.confirm_threshold > 0.5 && a.confirm_threshold < 1.0) {
            return Err(invalid("artifacts.confirm_threshold", "must lie in (0.5, 1)"));
        }

        let m = &self.mission;
        positive("mission.time_limit", m.time_limit)?;
        positive("mission.dt", m.dt)?;
        positive("mission.geofence_size", m.geofence_size)?;
        positive("mission.flush_period", m.flush_period)?;
        Ok(())
    }

    pub fn robot_model(&self) -> RobotModel {
        let r = &self.robot;
        RobotModel {
            class: r.class,
            v_ref: r.v_ref,
            yaw_rate_max: r.yaw_rate_max,
            reverse_distance: r.reverse_distance,
            half_extents: Vec3::from(r.half_extents),
            localization_noise: r.localization_noise,
        }
    }

    pub fn local_planner_params(&self) -> LocalPlannerParams {
        let p = &self.planner;
        LocalPlannerParams {
            bound: Vec3::from(p.bound),
            n_samples: p.n_samples,
            edge_radius: p.edge_radius,
            mode: p.mode,
            planar: self.robot.class == RobotClass::Legged,
            floor_height: p.floor_height,
            level_bonus: p.level_bonus,
        }
    }

    pub fn gain_params(&self, direction: Vec3) -> GainParams {
        let p = &self.planner;
        GainParams { zeta: p.zeta, delta_gain: p.delta_gain, direction, threshold: p.gain_threshold }
    }

    pub fn refine_params(&self) -> RefineParams {
        let planar = self.robot.class == RobotClass::Legged;
        let mut r = RefineParams::for_robot(&Vec3::from(self.robot.half_extents), planar);
        if let Some(t) = self.planner.target_clearance {
            r.target_clearance = t;
        }
        r.max_iterations = self.planner.refine_iterations;
        r
    }

    pub fn time_budget(&self, remaining: f64) -> TimeBudget {
        TimeBudget { remaining, v_ref: self.robot.v_ref, eps_d: self.planner.eps_d, safety_margin: self.planner.safety_margin }
    }
}
