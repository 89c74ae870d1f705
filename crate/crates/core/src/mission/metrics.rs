//! Post-mission metrics and the explorable-volume oracle.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, Point};
use crate::mission::log::MissionLog;
use crate::voxel_map::{VoxelMap, VoxelState};
use crate::world::World;

/// Voxels an ideal robot could observe: ground-truth free voxels connected to the start,
/// plus the solid voxels that face them.
#[derive(Debug, Clone)]
pub struct Explorable {
    dims: [usize; 3],
    mask: Vec<bool>,
    count: usize,
}

impl Explorable {
    /// Flood fill over voxels whose centers are free in `world`, seeded at `start`, on the grid of `map`.
    pub fn compute(world: &World, map: &VoxelMap, start: &Point) -> Self {
        let dims = map.dims();
        let n = map.len();
        let free: Vec<bool> = (0..n).map(|lin| world.is_free(&map.voxel_center(map.unlinear(lin)))).collect();
        let mut reached = vec![false; n];
        let mut mask = vec![false; n];
        let mut queue = VecDeque::new();
        if let Some(idx) = map.index_of(start) {
            let lin = map.linear(idx);
            if free[lin] {
                reached[lin] = true;
                queue.push_back(idx);
            }
        }
        while let Some(idx) = queue.pop_front() {
            mask[map.linear(idx)] = true;
            for axis in 0..3 {
                for step in [-1i64, 1] {
                    let c = idx[axis] as i64 + step;
                    if c < 0 || c >= dims[axis] as i64 {
                        continue;
                    }
                    let mut nb = idx;
                    nb[axis] = c as usize;
                    let lin = map.linear(nb);
                    if free[lin] {
                        if !reached[lin] {
                            reached[lin] = true;
                            queue.push_back(nb);
                        }
                    } else {
                        mask[lin] = true;
                    }
                }
            }
        }
        let count = mask.iter().filter(|m| **m).count();
        Self { dims, mask, count }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn contains(&self, lin: usize) -> bool {
        self.mask[lin]
    }

    /// Fraction of explorable voxels that are known in `map`, optionally restricted to voxels
    /// whose centers fall inside `region`.
    pub fn explored_fraction(&self, map: &VoxelMap, region: Option<&Aabb>) -> f64 {
        assert_eq!(map.dims(), self.dims, "map grid must match the oracle grid");
        let mut total = 0usize;
        let mut known = 0usize;
        for (lin, m) in self.mask.iter().enumerate() {
            if !*m {
                continue;
            }
            if let Some(r) = region {
                if !r.contains(&map.voxel_center(map.unlinear(lin))) {
                    continue;
                }
            }
            total += 1;
            if map.state_linear(lin) != VoxelState::Unknown {
                known += 1;
            }
        }
        if total == 0 {
            0.0
        } else {
            known as f64 / total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub outcome: String,
    pub ticks: u64,
    pub final_time: f64,
    pub explored_fraction: f64,
    pub explorable_voxels: usize,
    pub known_voxels: usize,
    pub reports: usize,
    pub score: usize,
    pub artifacts: usize,
    pub total_distance: f64,
    pub return_home: bool,
    pub final_distance_to_home: f64,
    pub planning_iterations: usize,
    pub mean_planning_seconds: f64,
    pub max_planning_seconds: f64,
    pub geofences: usize,
    pub admissibility_violations: usize,
}

/// Distance within which the robot counts as home, m.
pub const HOME_TOLERANCE: f64 = 0.05;

pub fn compute_metrics(log: &MissionLog, world: &World, map: &VoxelMap, outcome: &str) -> Summary {
    let explorable = Explorable::compute(world, map, &world.start_position);
    let last = log.ticks.last();
    let final_pos = last.map_or(world.start_position, |t| Point::from(t.position));
    let dist_home = (final_pos - world.home).norm();
    let times = &log.planning_times;
    Summary {
        outcome: outcome.to_string(),
        ticks: last.map_or(0, |t| t.tick),
        final_time: last.map_or(0.0, |t| t.t),
        explored_fraction: explorable.explored_fraction(map, None),
        explorable_voxels: explorable.count(),
        known_voxels: map.known_count(),
        reports: log.reports.len(),
        score: log.reports.iter().filter(|r| r.scored).count(),
        artifacts: world.artifacts.len(),
        total_distance: last.map_or(0.0, |t| t.distance),
        return_home: dist_home <= HOME_TOLERANCE,
        final_distance_to_home: dist_home,
        planning_iterations: times.len(),
        mean_planning_seconds: if times.is_empty() { 0.0 } else { times.iter().sum::<f64>() / times.len() as f64 },
        max_planning_seconds: times.iter().copied().fold(0.0, f64::max),
        geofences: map.geofences().len(),
        admissibility_violations: log.events_of("admissibility_violation").count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world() -> World {
        World::from_json(
            r#"{"bounds": {"min": [0,0,0], "max": [4,2,2]},
                "free_boxes": [{"min": [0.4,0.4,0.4], "max": [3.6,1.6,1.6]}],
                "start": {"position": [1,1,1]}, "home": [1,1,1]}"#,
        )
        .unwrap()
    }

    #[test]
    fn explorable_is_free_block_plus_face_shell() {
        let w = world();
        let m = VoxelMap::covering(&w.bounds, 0.2).unwrap();
        let e = Explorable::compute(&w, &m, &w.start_position);
        // Free block 16 x 6 x 6 voxels; shell adds one layer on each face (no edges or corners).
        let (a, b, c) = (16usize, 6usize, 6usize);
        assert_eq!(e.count(), a * b * c + 2 * (a * b + b * c + a * c));
        assert_eq!(e.explored_fraction(&m, None), 0.0);
    }

    #[test]
    fn disconnected_free_space_is_not_explorable() {
        let mut w = world();
        w.free_boxes.push(Aabb::new(Point::new(0.0, 1.8, 0.0), Point::new(4.0, 2.0, 2.0)));
        let m = VoxelMap::covering(&w.bounds, 0.2).unwrap();
        let e = Explorable::compute(&w, &m, &w.start_position);
        assert_eq!(e.count(), 16 * 6 * 6 + 2 * (16 * 6 + 6 * 6 + 16 * 6));
    }

    #[test]
    fn fully_known_map_is_fully_explored() {
        let w = world();
        let mut m = VoxelMap::covering(&w.bounds, 0.2).unwrap();
        m.fill(&m.bounds(), VoxelState::Free);
        let e = Explorable::compute(&w, &m, &w.start_position);
        assert_eq!(e.explored_fraction(&m, None), 1.0);
        let half = Aabb::new(Point::new(0.0, 0.0, 0.0), Point::new(2.0, 2.0, 2.0));
        assert_eq!(e.explored_fraction(&m, Some(&half)), 1.0);
    }
}
