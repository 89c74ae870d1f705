//! Pushes interior path vertices away from obstacles.
//!
//! Each vertex climbs the distance-to-nearest-occupied field, estimated by central differences
//! at one voxel step over the six axis neighbours. A move is kept only if it increases the
//! vertex clearance and both adjoining segments stay admissible.

use serde::{Deserialize, Serialize};

use crate::geometry::{Point, Vec3};
use crate::graph::{PathKind, PlannedPath};
use crate::voxel_map::{VoxelMap, VoxelState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefineParams {
    /// Desired distance from every interior vertex to the nearest occupied voxel, m.
    pub target_clearance: f64,
    pub max_iterations: usize,
    /// Keep vertices at their original height (ground robots).
    pub planar: bool,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self { target_clearance: 0.6, max_iterations: 10, planar: false }
    }
}

impl RefineParams {
    /// Default target: twice the largest robot half-extent.
    pub fn for_robot(half_extents: &Vec3, planar: bool) -> Self {
        Self { target_clearance: 2.0 * half_extents.max(), planar, ..Default::default() }
    }
}

/// Distance from `p` to the nearest occupied voxel box, saturating at `cap`.
pub fn clearance(map: &VoxelMap, p: &Point, cap: f64) -> f64 {
    let r = map.resolution();
    let o = map.origin();
    let dims = map.dims();
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for k in 0..3 {
        let a = ((p[k] - cap - o[k]) / r).floor();
        let b = ((p[k] + cap - o[k]) / r).floor();
        if b < 0.0 || a >= dims[k] as f64 {
            return cap;
        }
        lo[k] = a.max(0.0) as usize;
        hi[k] = (b as usize).min(dims[k] - 1);
    }
    let mut best = cap;
    for i in lo[0]..=hi[0] {
        for j in lo[1]..=hi[1] {
            for k in lo[2]..=hi[2] {
                if map.state([i, j, k]) == VoxelState::Occupied {
                    best = best.min(map.voxel_box([i, j, k]).distance_to(p));
                }
            }
        }
    }
    best
}

fn gradient(map: &VoxelMap, p: &Point, cap: f64, planar: bool) -> Vec3 {
    let h = map.resolution();
    let mut g = Vec3::zeros();
    let axes = if planar { 2 } else { 3 };
    for k in 0..axes {
        let mut e = Vec3::zeros();
        e[k] = h;
        g[k] = (clearance(map, &(p + e), cap) - clearance(map, &(p - e), cap)) / (2.0 * h);
    }
    g
}

/// Returns a copy of `path` with interior vertices moved toward `target_clearance`.
/// Endpoints and headings are preserved; the result is admissible whenever the input is.
pub fn refine(path: &PlannedPath, map: &VoxelMap, params: &RefineParams) -> PlannedPath {
    let mut out = path.clone();
    out.kind = PathKind::Refined;
    let n = out.waypoints.len();
    if n < 3 {
        return out;
    }
    let step = map.resolution();
    let cap = params.target_clearance + 2.0 * step;
    for _ in 0..params.max_iterations {
        let mut moved = false;
        for i in 1..n - 1 {
            let p = out.waypoints[i].position;
            let c = clearance(map, &p, cap);
            if c >= params.target_clearance {
                continue;
            }
            let g = gradient(map, &p, cap, params.planar);
            let norm = g.norm();
            if norm < 1e-12 {
                continue;
            }
            let q = p + g * (step / norm);
            if clearance(map, &q, cap) <= c {
                continue;
            }
            let half = out.waypoints[i].half_extents;
            let prev = out.waypoints[i - 1].position;
            let next = out.waypoints[i + 1].position;
            if map.segment_admissible(&prev, &q, &half) && map.segment_admissible(&q, &next, &half) {
                out.waypoints[i].position = q;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    out.recompute_length();
    out
}
