//! Frustum sensor model used both to simulate scans and to score candidate views.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{direction, wrap_angle, Point, Vec3};
use crate::voxel_map::{RangeReturn, RobotConfig, Scan, VoxelMap, VoxelState};
use crate::world::World;

const ANGLE_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SensorError {
    #[error("invalid sensor frustum: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorFrustum {
    /// Effective range, m.
    pub max_range: f64,
    /// Horizontal field of view, rad, in `(0, 2pi]`.
    pub fov_h: f64,
    /// Vertical field of view, rad, in `(0, pi]`.
    pub fov_v: f64,
    /// Angular spacing of the cast rays, rad.
    pub ray_step: f64,
    /// Mounting offset in the body frame, m.
    #[serde(default = "zero_offset")]
    pub offset: [f64; 3],
}

fn zero_offset() -> [f64; 3] {
    [0.0; 3]
}

impl Default for SensorFrustum {
    fn default() -> Self {
        Self { max_range: 6.0, fov_h: 2.0 * PI, fov_v: PI / 2.0, ray_step: 2f64.to_radians(), offset: [0.0; 3] }
    }
}

fn angle_grid(fov: f64, step: f64, full_circle: bool) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let a = k as f64 * step;
        let inside = if full_circle { a < fov - ANGLE_EPS } else { a <= fov + ANGLE_EPS };
        if !inside {
            break;
        }
        out.push(a - fov / 2.0);
        k += 1;
    }
    out
}

impl SensorFrustum {
    pub fn validate(&self) -> Result<(), SensorError> {
        let bad = |m: &str| Err(SensorError::Invalid(m.to_string()));
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return bad("max_range must be positive");
        }
        if !(self.fov_h > 0.0 && self.fov_h <= 2.0 * PI + ANGLE_EPS) {
            return bad("fov_h must lie in (0, 2pi]");
        }
        if !(self.fov_v > 0.0 && self.fov_v <= PI + ANGLE_EPS) {
            return bad("fov_v must lie in (0, pi]");
        }
        if !(self.ray_step > 0.0 && self.ray_step.is_finite()) {
            return bad("ray_step must be positive");
        }
        Ok(())
    }

    fn full_circle(&self) -> bool {
        self.fov_h >= 2.0 * PI - ANGLE_EPS
    }

    /// Sensor origin for a robot configuration (offset rotated by the heading).
    pub fn origin(&self, config: &RobotConfig) -> Point {
        let (s, c) = config.heading.sin_cos();
        let o = self.offset;
        config.position + Vec3::new(c * o[0] - s * o[1], s * o[0] + c * o[1], o[2])
    }

    /// Yaw offsets (relative to heading) and pitches of the ray grid.
    pub fn ray_angles(&self) -> (Vec<f64>, Vec<f64>) {
        (angle_grid(self.fov_h, self.ray_step, self.full_circle()), angle_grid(self.fov_v, self.ray_step, false))
    }

    /// World-frame unit ray directions for a given heading.
    pub fn directions(&self, heading: f64) -> Vec<Vec3> {
        let (yaws, pitches) = self.ray_angles();
        let mut out = Vec::with_capacity(yaws.len() * pitches.len());
        for p in &pitches {
            for y in &yaws {
                out.push(direction(heading + y, *p));
            }
        }
        out
    }

    /// Whether `p` lies inside the frustum volume seen from `origin` with `heading`.
    pub fn contains(&self, origin: &Point, heading: f64, p: &Point) -> bool {
        let d = p - origin;
        let range = d.norm();
        if range > self.max_range {
            return false;
        }
        if range < 1e-12 {
            return true;
        }
        let horiz = d.x.hypot(d.y);
        let pitch = d.z.atan2(horiz);
        if pitch.abs() > self.fov_v / 2.0 + ANGLE_EPS {
            return false;
        }
        if self.full_circle() || horiz < 1e-12 {
            return true;
        }
        let yaw = wrap_angle(d.y.atan2(d.x) - heading);
        yaw.abs() <= self.fov_h / 2.0 + ANGLE_EPS
    }
}

/// Ray-casting evaluator for the number of unknown voxels visible from a configuration.
///
/// Rays run at the frustum's fixed angular resolution, pass through unknown and free
/// voxels and stop at the first occupied voxel or at the frustum range. An unknown voxel is
/// counted once, and only if its center lies inside the frustum volume.
#[derive(Debug, Clone)]
pub struct GainEvaluator {
    frustum: SensorFrustum,
    yaws: Vec<f64>,
    pitches: Vec<f64>,
}

impl GainEvaluator {
    pub fn new(frustum: SensorFrustum) -> Self {
        let (yaws, pitches) = frustum.ray_angles();
        Self { frustum, yaws, pitches }
    }

    pub fn frustum(&self) -> &SensorFrustum {
        &self.frustum
    }

    /// Distinct unknown voxels (as linear indices, sorted) visible from `config`.
    pub fn visible_unknown(&self, config: &RobotConfig, map: &VoxelMap) -> Vec<usize> {
        let origin = self.frustum.origin(config);
        let heading = config.heading;
        let mut seen = Vec::new();
        for pitch in &self.pitches {
            for yaw in &self.yaws {
                let dir = direction(heading + yaw, *pitch);
                map.traverse(&origin, &dir, self.frustum.max_range, |lin, _| match map.state_linear(lin) {
                    VoxelState::Occupied => false,
                    VoxelState::Free => true,
                    VoxelState::Unknown => {
                        seen.push(lin);
                        true
                    }
                });
            }
        }
        seen.sort_unstable();
        seen.dedup();
        seen.retain(|lin| self.frustum.contains(&origin, heading, &map.voxel_center(map.unlinear(*lin))));
        seen
    }

    pub fn volume_gain(&self, config: &RobotConfig, map: &VoxelMap) -> usize {
        self.visible_unknown(config, map).len()
    }
}

/// Unknown-voxel count visible from `config`; see [`GainEvaluator`].
pub fn volume_gain(config: &RobotConfig, frustum: &SensorFrustum, map: &VoxelMap) -> usize {
    GainEvaluator::new(*frustum).volume_gain(config, map)
}

/// Additive Gaussian range noise with its own seeded stream.
#[derive(Debug, Clone)]
pub struct RangeNoise {
    normal: Normal<f64>,
    rng: ChaCha8Rng,
}

impl RangeNoise {
    pub fn new(sigma: f64, seed: u64) -> Self {
        Self { normal: Normal::new(0.0, sigma.max(0.0)).expect("finite sigma"), rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

/// Simulates one scan against the ground-truth world geometry.
pub fn simulate_scan(config: &RobotConfig, frustum: &SensorFrustum, world: &World, noise: Option<&mut RangeNoise>) -> Scan {
    let origin = frustum.origin(config);
    let mut noise = noise;
    let returns = frustum
        .directions(config.heading)
        .into_iter()
        .map(|dir| match world.ray_cast(&origin, &dir, frustum.max_range) {
            Some(range) => {
                let range = match noise.as_deref_mut() {
                    Some(n) => (range + n.normal.sample(&mut n.rng)).max(0.0),
                    None => range,
                };
                RangeReturn { direction: dir, range, hit: true }
            }
            None => RangeReturn { direction: dir, range: frustum.max_range, hit: false },
        })
        .collect();
    Scan { origin, returns }
}
