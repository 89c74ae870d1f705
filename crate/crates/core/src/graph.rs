//! Exploration graphs, Dijkstra shortest paths and planned paths.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::voxel_map::RobotConfig;

pub type VertexId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: VertexId,
    pub config: RobotConfig,
    /// Volumetric gain in voxels.
    pub gain: f64,
    pub frontier: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: VertexId,
    pub b: VertexId,
    pub length: f64,
}

/// Undirected graph with Euclidean edge lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationGraph {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    #[serde(skip)]
    adjacency: Vec<Vec<(VertexId, f64)>>,
    root: VertexId,
}

impl ExplorationGraph {
    pub fn new(root: RobotConfig) -> Self {
        Self { vertices: vec![Vertex { id: 0, config: root, gain: 0.0, frontier: false }], edges: Vec::new(), adjacency: vec![Vec::new()], root: 0 }
    }

    pub fn root(&self) -> VertexId {
        self.root
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, id: VertexId) -> &Vertex {
        &self.vertices[id]
    }

    pub fn vertex_mut(&mut self, id: VertexId) -> &mut Vertex {
        &mut self.vertices[id]
    }

    pub fn position(&self, id: VertexId) -> Point {
        self.vertices[id].config.position
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, id: VertexId) -> &[(VertexId, f64)] {
        &self.adjacency[id]
    }

    pub fn add_vertex(&mut self, config: RobotConfig) -> VertexId {
        let id = self.vertices.len();
        self.vertices.push(Vertex { id, config, gain: 0.0, frontier: false });
        self.adjacency.push(Vec::new());
        id
    }

    pub fn has_edge(&self, a: VertexId, b: VertexId) -> bool {
        self.adjacency[a].iter().any(|(n, _)| *n == b)
    }

    /// Adds an undirected edge; self-loops and duplicates are ignored.
    pub fn add_edge(&mut self, a: VertexId, b: VertexId) -> bool {
        if a == b || self.has_edge(a, b) {
            return false;
        }
        let length = (self.position(a) - self.position(b)).norm();
        self.edges.push(Edge { a, b, length });
        self.adjacency[a].push((b, length));
        self.adjacency[b].push((a, length));
        true
    }

    /// Drops every edge for which `keep` returns false.
    pub fn retain_edges<F: FnMut(&Edge) -> bool>(&mut self, mut keep: F) -> usize {
        let before = self.edges.len();
        self.edges.retain(|e| keep(e));
        self.rebuild_adjacency();
        before - self.edges.len()
    }

    fn rebuild_adjacency(&mut self) {
        self.adjacency = vec![Vec::new(); self.vertices.len()];
        for e in &self.edges {
            self.adjacency[e.a].push((e.b, e.length));
            self.adjacency[e.b].push((e.a, e.length));
        }
    }

    /// Removes vertices not reachable from the root and renumbers the rest in order.
    /// Returns the old-to-new id map.
    pub fn retain_reachable(&mut self) -> Vec<Option<VertexId>> {
        let dist = dijkstra(self, self.root).dist;
        let mut remap = vec![None; self.vertices.len()];
        let mut next = 0;
        for (i, d) in dist.iter().enumerate() {
            if d.is_finite() {
                remap[i] = Some(next);
                next += 1;
            }
        }
        let vertices = std::mem::take(&mut self.vertices);
        self.vertices = vertices
            .into_iter()
            .filter_map(|mut v| {
                remap[v.id].map(|id| {
                    v.id = id;
                    v
                })
            })
            .collect();
        self.edges = self
            .edges
            .iter()
            .filter_map(|e| Some(Edge { a: remap[e.a]?, b: remap[e.b]?, length: e.length }))
            .collect();
        self.root = remap[self.root].expect("root reaches itself");
        self.rebuild_adjacency();
        remap
    }

    /// Restores adjacency after deserialization.
    pub fn reindex(&mut self) {
        self.rebuild_adjacency();
    }

    pub fn nearest(&self, p: &Point) -> Option<(VertexId, f64)> {
        self.vertices
            .iter()
            .map(|v| (v.id, (v.config.position - p).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    id: VertexId,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest-path tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortestPaths {
    pub source: VertexId,
    /// `f64::INFINITY` for unreachable vertices.
    pub dist: Vec<f64>,
    pub pred: Vec<Option<VertexId>>,
}

impl ShortestPaths {
    pub fn reachable(&self, v: VertexId) -> bool {
        self.dist[v].is_finite()
    }

    /// Vertex sequence from the source to `target`.
    pub fn path_to(&self, target: VertexId) -> Option<Vec<VertexId>> {
        if !self.reachable(target) {
            return None;
        }
        let mut path = vec![target];
        let mut cur = target;
        while let Some(p) = self.pred[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        Some(path)
    }
}

/// Dijkstra over Euclidean edge lengths. Equal-distance ties resolve toward lower ids.
pub fn dijkstra(graph: &ExplorationGraph, source: VertexId) -> ShortestPaths {
    let n = graph.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry { dist: 0.0, id: source });
    while let Some(HeapEntry { dist: d, id }) = heap.pop() {
        if done[id] {
            continue;
        }
        done[id] = true;
        for &(next, w) in graph.neighbors(id) {
            let nd = d + w;
            if nd < dist[next] {
                dist[next] = nd;
                pred[next] = Some(id);
                heap.push(HeapEntry { dist: nd, id: next });
            }
        }
    }
    ShortestPaths { source, dist, pred }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Local,
    Global,
    Homing,
    Refined,
}

/// Ordered waypoint sequence with its cumulative length and exploration gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPath {
    pub waypoints: Vec<RobotConfig>,
    /// Graph vertex ids backing each waypoint.
    pub vertex_ids: Vec<VertexId>,
    pub length: f64,
    pub gain: f64,
    pub kind: PathKind,
}

impl PlannedPath {
    pub fn from_vertices(graph: &ExplorationGraph, ids: &[VertexId], kind: PathKind) -> Self {
        let waypoints: Vec<RobotConfig> = ids.iter().map(|i| graph.vertex(*i).config).collect();
        let mut p = Self { waypoints, vertex_ids: ids.to_vec(), length: 0.0, gain: 0.0, kind };
        p.recompute_length();
        p
    }

    pub fn positions(&self) -> Vec<Point> {
        self.waypoints.iter().map(|w| w.position).collect()
    }

    pub fn recompute_length(&mut self) {
        self.length = crate::dtw::polyline_length(&self.positions());
    }

    /// Cumulative length from the first waypoint to each waypoint.
    pub fn cumulative_lengths(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.waypoints.len());
        for (i, w) in self.waypoints.iter().enumerate() {
            if i > 0 {
                acc += (w.position - self.waypoints[i - 1].position).norm();
            }
            out.push(acc);
        }
        out
    }

    pub fn terminal(&self) -> Option<VertexId> {
        self.vertex_ids.last().copied()
    }
}
