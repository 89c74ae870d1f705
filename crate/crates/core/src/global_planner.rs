//! Sparse global graph with frontier bookkeeping, repositioning and homing.
//!
//! Frontier selection maximizes `T * VolumeGain * exp(-eps_d * D)` where `D` is the graph
//! distance to the frontier and `T = T_e - travel(cur, frontier) - travel(frontier, home)` is the
//! exploration time left after visiting the frontier and returning.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtw::dtw;
use crate::geometry::{Point, Vec3};
use crate::graph::{dijkstra, ExplorationGraph, PathKind, PlannedPath, ShortestPaths, VertexId};
use crate::sensor::GainEvaluator;
use crate::voxel_map::{RobotConfig, VoxelMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlobalError {
    #[error("frontier {0} is not reachable in the global graph")]
    UnreachableFrontier(VertexId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierInfo {
    pub gain: f64,
    pub last_evaluated: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBudget {
    /// Remaining exploration time, s.
    pub remaining: f64,
    pub v_ref: f64,
    /// Distance penalty of the global gain, 1/m.
    pub eps_d: f64,
    pub safety_margin: f64,
}

impl TimeBudget {
    /// Estimated travel time for a graph distance.
    pub fn travel_time(&self, distance: f64) -> f64 {
        distance / self.v_ref
    }
}

/// Mission-wide graph rooted at the home position (vertex 0).
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalGraph {
    pub graph: ExplorationGraph,
    pub frontiers: BTreeMap<VertexId, FrontierInfo>,
}

const SAME_POINT: f64 = 1e-6;

impl GlobalGraph {
    pub fn new(home: RobotConfig) -> Self {
        Self { graph: ExplorationGraph::new(home), frontiers: BTreeMap::new() }
    }

    pub fn home(&self) -> VertexId {
        self.graph.root()
    }

    /// Adds `config` connected to `from`, reusing `from` when the positions coincide.
    /// The caller guarantees the connecting segment is admissible.
    pub fn attach(&mut self, from: VertexId, config: RobotConfig) -> VertexId {
        if (self.graph.position(from) - config.position).norm() < SAME_POINT {
            return from;
        }
        let id = self.graph.add_vertex(config);
        self.graph.add_edge(from, id);
        id
    }

    fn set_frontier(&mut self, id: VertexId, gain: f64, now: f64) {
        self.graph.vertex_mut(id).frontier = true;
        self.graph.vertex_mut(id).gain = gain;
        self.frontiers.insert(id, FrontierInfo { gain, last_evaluated: now });
    }

    pub fn clear_frontier(&mut self, id: VertexId) {
        self.graph.vertex_mut(id).frontier = false;
        self.frontiers.remove(&id);
    }

    pub fn near_frontier(&self, p: &Point, radius: f64) -> bool {
        self.frontiers.keys().any(|f| (self.graph.position(*f) - p).norm() <= radius)
    }

    /// Removes edges whose swept robot box is no longer admissible in `map`, then drops vertices
    /// cut off from home. Returns the old-to-new id map.
    pub fn prune_inadmissible(&mut self, map: &VoxelMap, half: &Vec3) -> Vec<Option<VertexId>> {
        let positions: Vec<Point> = self.graph.vertices().iter().map(|v| v.config.position).collect();
        self.graph.retain_edges(|e| map.segment_admissible(&positions[e.a], &positions[e.b], half));
        let remap = self.graph.retain_reachable();
        self.frontiers = std::mem::take(&mut self.frontiers)
            .into_iter()
            .filter_map(|(k, v)| remap[k].map(|n| (n, v)))
            .collect();
        remap
    }

    pub fn to_json(&self) -> serde_json::Value {
        let vertices: Vec<_> = self
            .graph
            .vertices()
            .iter()
            .map(|v| {
                serde_json::json!({
                    "id": v.id,
                    "position": [v.config.position.x, v.config.position.y, v.config.position.z],
                    "heading": v.config.heading,
                    "gain": v.gain,
                    "frontier": v.frontier,
                })
            })
            .collect();
        let edges: Vec<_> = self.graph.edges().iter().map(|e| serde_json::json!({"a": e.a, "b": e.b, "length": e.length})).collect();
        serde_json::json!({"home": self.home(), "vertices": vertices, "edges": edges})
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierCandidate {
    /// Vertex id in the local graph.
    pub vertex: VertexId,
    pub position: Point,
    pub gain: f64,
    pub path: PlannedPath,
}

/// Local vertices whose volumetric gain exceeds `threshold`, each with its root path.
pub fn extract_frontiers(local: &ExplorationGraph, threshold: f64) -> Vec<FrontierCandidate> {
    let sp = dijkstra(local, local.root());
    local
        .vertices()
        .iter()
        .filter(|v| v.id != local.root() && v.gain > threshold)
        .filter_map(|v| {
            let ids = sp.path_to(v.id)?;
            Some(FrontierCandidate {
                vertex: v.id,
                position: v.config.position,
                gain: v.gain,
                path: PlannedPath::from_vertices(local, &ids, PathKind::Local),
            })
        })
        .collect()
}

/// Drops candidates within `lambda` of an existing global frontier.
pub fn dedup_against_global(candidates: Vec<FrontierCandidate>, global: &GlobalGraph, lambda: f64) -> Vec<FrontierCandidate> {
    candidates.into_iter().filter(|c| !global.near_frontier(&c.position, lambda)).collect()
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut c = i;
    while parent[c] != r {
        let next = parent[c];
        parent[c] = r;
        c = next;
    }
    r
}

/// Single-linkage clustering of paths under DTW distance; keeps the longest path per cluster.
///
/// Length ties resolve toward the lower terminal vertex id. Output follows the order in which
/// clusters first appear in `paths`.
pub fn cluster_and_select_principal(paths: &[PlannedPath], dtw_threshold: f64) -> Vec<PlannedPath> {
    let n = paths.len();
    let positions: Vec<Vec<Point>> = paths.iter().map(|p| p.positions()).collect();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if dtw(&positions[i], &positions[j]) <= dtw_threshold {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut best: BTreeMap<usize, usize> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        best.entry(root)
            .and_modify(|b| {
                let (pi, pb) = (&paths[i], &paths[*b]);
                if pi.length > pb.length || (pi.length == pb.length && pi.terminal() < pb.terminal()) {
                    *b = i;
                }
            })
            .or_insert(i);
    }
    best.values().map(|i| paths[*i].clone()).collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MergeReport {
    pub added_vertices: usize,
    pub cross_edges: usize,
    pub new_frontiers: Vec<VertexId>,
}

/// Appends principal paths (rooted at the local root, which maps to `attach`) to the global
/// graph, links new vertices to nearby global vertices through admissible edges and marks the
/// path terminals as frontiers while keeping frontiers `lambda` apart.
#[allow(clippy::too_many_arguments)]
pub fn merge_into_global(
    global: &mut GlobalGraph,
    principals: &[PlannedPath],
    frontier_gains: &HashMap<VertexId, f64>,
    attach: VertexId,
    map: &VoxelMap,
    edge_radius: f64,
    lambda: f64,
    now: f64,
) -> MergeReport {
    let mut report = MergeReport::default();
    let mut local_to_global: HashMap<VertexId, VertexId> = HashMap::new();
    for path in principals {
        let Some(&root) = path.vertex_ids.first() else { continue };
        local_to_global.insert(root, attach);
        let mut prev = attach;
        for (k, (&lid, wp)) in path.vertex_ids.iter().zip(&path.waypoints).enumerate().skip(1) {
            let gid = match local_to_global.get(&lid) {
                Some(g) => *g,
                None => {
                    let g = global.graph.add_vertex(*wp);
                    report.added_vertices += 1;
                    let half = wp.half_extents;
                    let p = wp.position;
                    let near: Vec<VertexId> = global
                        .graph
                        .vertices()
                        .iter()
                        .filter(|v| v.id != g && v.id != prev && (v.config.position - p).norm() <= edge_radius)
                        .map(|v| v.id)
                        .collect();
                    for other in near {
                        if map.segment_admissible(&global.graph.position(other), &p, &half) && global.graph.add_edge(other, g) {
                            report.cross_edges += 1;
                        }
                    }
                    local_to_global.insert(lid, g);
                    g
                }
            };
            global.graph.add_edge(prev, gid);
            prev = gid;
            if k + 1 == path.vertex_ids.len() {
                let gain = frontier_gains.get(&lid).copied().unwrap_or(path.gain);
                if !global.near_frontier(&wp.position, lambda) {
                    global.set_frontier(gid, gain, now);
                    report.new_frontiers.push(gid);
                }
            }
        }
    }
    report
}

/// Recomputes each frontier's gain and drops those no longer above `threshold`.
pub fn reevaluate_frontiers(global: &mut GlobalGraph, map: &VoxelMap, evaluator: &GainEvaluator, threshold: f64, now: f64) -> Vec<VertexId> {
    let ids: Vec<VertexId> = global.frontiers.keys().copied().collect();
    let mut removed = Vec::new();
    for id in ids {
        let gain = evaluator.volume_gain(&global.graph.vertex(id).config, map) as f64;
        if gain > threshold {
            global.set_frontier(id, gain, now);
        } else {
            global.clear_frontier(id);
            removed.push(id);
        }
    }
    removed
}

/// Time left after travelling to `frontier` and then home, given shortest-path trees rooted at
/// the current vertex and at home.
pub fn remaining_time_from(from_cur: &ShortestPaths, from_home: &ShortestPaths, frontier: VertexId, budget: &TimeBudget) -> Result<f64, GlobalError> {
    let (a, b) = (from_cur.dist[frontier], from_home.dist[frontier]);
    if !a.is_finite() || !b.is_finite() {
        return Err(GlobalError::UnreachableFrontier(frontier));
    }
    Ok(budget.remaining - budget.travel_time(a) - budget.travel_time(b))
}

pub fn remaining_time(global: &GlobalGraph, current: VertexId, frontier: VertexId, budget: &TimeBudget) -> Result<f64, GlobalError> {
    let from_cur = dijkstra(&global.graph, current);
    let from_home = dijkstra(&global.graph, global.home());
    remaining_time_from(&from_cur, &from_home, frontier, budget)
}

/// Global exploration gain; `None` when the frontier is infeasible (`remaining <= 0`).
pub fn global_gain(remaining: f64, volume_gain: f64, distance: f64, eps_d: f64) -> Option<f64> {
    (remaining > 0.0).then(|| remaining * volume_gain * (-eps_d * distance).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierChoice {
    pub frontier: VertexId,
    pub volume_gain: f64,
    pub global_gain: f64,
    pub remaining_time: f64,
    pub path: PlannedPath,
}

/// Argmax of the global gain over feasible frontiers. Ties go to the larger stored gain, then
/// the lower vertex id.
pub fn select_frontier(global: &GlobalGraph, current: VertexId, budget: &TimeBudget) -> Option<FrontierChoice> {
    let from_cur = dijkstra(&global.graph, current);
    let from_home = dijkstra(&global.graph, global.home());
    let mut best: Option<(VertexId, f64, f64, f64)> = None;
    for (&f, info) in &global.frontiers {
        if f == current {
            continue;
        }
        let Ok(t) = remaining_time_from(&from_cur, &from_home, f, budget) else { continue };
        let Some(g) = global_gain(t, info.gain, from_cur.dist[f], budget.eps_d) else { continue };
        let take = match best {
            None => true,
            Some((bf, bg, bvol, _)) => g > bg || (g == bg && (info.gain > bvol || (info.gain == bvol && f < bf))),
        };
        if take {
            best = Some((f, g, info.gain, t));
        }
    }
    best.map(|(f, g, vol, t)| {
        let ids = from_cur.path_to(f).expect("reachable frontier");
        FrontierChoice {
            frontier: f,
            volume_gain: vol,
            global_gain: g,
            remaining_time: t,
            path: PlannedPath::from_vertices(&global.graph, &ids, PathKind::Global),
        }
    })
}

/// Shortest global path from `current` back to home.
pub fn homing_path(global: &GlobalGraph, current: VertexId) -> PlannedPath {
    let sp = dijkstra(&global.graph, current);
    let ids = sp.path_to(global.home()).expect("home reachable from every global vertex");
    PlannedPath::from_vertices(&global.graph, &ids, PathKind::Homing)
}
