//! Fixed-resolution occupancy grid with free/occupied/unknown voxels and geofences.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, Aabb, Point, Vec3};

pub const DEFAULT_RESOLUTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum VoxelState {
    Unknown = 0,
    Free = 1,
    Occupied = 2,
}

impl VoxelState {
    pub fn as_str(self) -> &'static str {
        match self {
            VoxelState::Unknown => "unknown",
            VoxelState::Free => "free",
            VoxelState::Occupied => "occupied",
        }
    }
}

impl FromStr for VoxelState {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "unknown" => Ok(VoxelState::Unknown),
            "free" => Ok(VoxelState::Free),
            "occupied" => Ok(VoxelState::Occupied),
            _ => Err(()),
        }
    }
}

/// Position and heading of the robot together with its collision box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotConfig {
    pub position: Point,
    /// Heading in `(-pi, pi]`.
    pub heading: f64,
    /// Half-extents of the robot bounding box.
    pub half_extents: Vec3,
}

impl RobotConfig {
    pub fn new(position: Point, heading: f64, half_extents: Vec3) -> Self {
        debug_assert!(half_extents.iter().all(|h| *h > 0.0), "robot box must have positive extents");
        Self { position, heading: wrap_angle(heading), half_extents }
    }

    pub fn with_position(&self, position: Point) -> Self {
        Self { position, ..*self }
    }

    pub fn with_heading(&self, heading: f64) -> Self {
        Self { heading: wrap_angle(heading), ..*self }
    }

    pub fn bounding_box(&self) -> Aabb {
        Aabb::from_center(self.position, self.half_extents)
    }
}

/// Local planning volume centered on the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalBound {
    pub center: Point,
    pub dimensions: Vec3,
}

impl LocalBound {
    pub fn new(center: Point, dimensions: Vec3) -> Self {
        debug_assert!(dimensions.iter().all(|d| *d > 0.0));
        Self { center, dimensions }
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_center(self.center, self.dimensions / 2.0)
    }
}

/// One range measurement of a scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeReturn {
    /// Unit direction in the world frame.
    pub direction: Vec3,
    pub range: f64,
    /// `false` marks a max-range return with no surface.
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scan {
    pub origin: Point,
    pub returns: Vec<RangeReturn>,
}

#[derive(Debug, Error)]
pub enum MapError {
    #[error("invalid map parameters: {0}")]
    InvalidParameters(String),
    #[error("map format error on line {line}: {message}")]
    Format { line: usize, message: String },
}

const HIT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelMap {
    origin: Point,
    resolution: f64,
    dims: [usize; 3],
    cells: Vec<VoxelState>,
    geofences: Vec<Aabb>,
    known: usize,
}

impl VoxelMap {
    /// Creates an all-unknown map whose lower corner is `origin`.
    pub fn new(origin: Point, resolution: f64, dims: [usize; 3]) -> Result<Self, MapError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(MapError::InvalidParameters(format!("resolution must be positive, got {resolution}")));
        }
        if dims.contains(&0) {
            return Err(MapError::InvalidParameters(format!("extents must be nonzero, got {dims:?}")));
        }
        let n = dims[0]
            .checked_mul(dims[1])
            .and_then(|v| v.checked_mul(dims[2]))
            .ok_or_else(|| MapError::InvalidParameters("extents overflow".into()))?;
        Ok(Self { origin, resolution, dims, cells: vec![VoxelState::Unknown; n], geofences: Vec::new(), known: 0 })
    }

    /// Map covering `bounds`, rounded up to whole voxels.
    pub fn covering(bounds: &Aabb, resolution: f64) -> Result<Self, MapError> {
        let ext = bounds.max - bounds.min;
        let dims = [0, 1, 2].map(|i| ((ext[i] / resolution) - 1e-9).ceil().max(1.0) as usize);
        Self::new(bounds.min, resolution, dims)
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn known_count(&self) -> usize {
        self.known
    }

    pub fn unknown_count(&self) -> usize {
        self.cells.len() - self.known
    }

    pub fn bounds(&self) -> Aabb {
        let r = self.resolution;
        Aabb::new(
            self.origin,
            self.origin + Vec3::new(self.dims[0] as f64 * r, self.dims[1] as f64 * r, self.dims[2] as f64 * r),
        )
    }

    pub fn geofences(&self) -> &[Aabb] {
        &self.geofences
    }

    pub fn linear(&self, idx: [usize; 3]) -> usize {
        (idx[2] * self.dims[1] + idx[1]) * self.dims[0] + idx[0]
    }

    pub fn unlinear(&self, lin: usize) -> [usize; 3] {
        let x = lin % self.dims[0];
        let y = (lin / self.dims[0]) % self.dims[1];
        let z = lin / (self.dims[0] * self.dims[1]);
        [x, y, z]
    }

    /// Voxel index containing `p`, if inside the map.
    pub fn index_of(&self, p: &Point) -> Option<[usize; 3]> {
        let mut idx = [0usize; 3];
        for i in 0..3 {
            let f = ((p[i] - self.origin[i]) / self.resolution).floor();
            if f < 0.0 || f >= self.dims[i] as f64 || f.is_nan() {
                return None;
            }
            idx[i] = f as usize;
        }
        Some(idx)
    }

    pub fn voxel_center(&self, idx: [usize; 3]) -> Point {
        let r = self.resolution;
        self.origin + Vec3::new((idx[0] as f64 + 0.5) * r, (idx[1] as f64 + 0.5) * r, (idx[2] as f64 + 0.5) * r)
    }

    pub fn voxel_box(&self, idx: [usize; 3]) -> Aabb {
        let c = self.voxel_center(idx);
        Aabb::from_center(c, Vec3::repeat(self.resolution / 2.0))
    }

    pub fn state(&self, idx: [usize; 3]) -> VoxelState {
        self.cells[self.linear(idx)]
    }

    pub fn state_linear(&self, lin: usize) -> VoxelState {
        self.cells[lin]
    }

    /// State at a point; anything outside the map is unknown.
    pub fn classify(&self, p: &Point) -> VoxelState {
        self.index_of(p).map_or(VoxelState::Unknown, |i| self.state(i))
    }

    pub fn set_state(&mut self, idx: [usize; 3], state: VoxelState) {
        let lin = self.linear(idx);
        self.set_linear(lin, state);
    }

    fn set_linear(&mut self, lin: usize, state: VoxelState) {
        let old = self.cells[lin];
        if old == VoxelState::Unknown && state != VoxelState::Unknown {
            self.known += 1;
        } else if old != VoxelState::Unknown && state == VoxelState::Unknown {
            self.known -= 1;
        }
        self.cells[lin] = state;
    }

    /// Sets every voxel inside `region` (by center) to `state`. Fixture helper.
    pub fn fill(&mut self, region: &Aabb, state: VoxelState) {
        for lin in 0..self.cells.len() {
            let c = self.voxel_center(self.unlinear(lin));
            if region.contains(&c) {
                self.set_linear(lin, state);
            }
        }
    }

    /// Marks unknown voxels overlapping the box as free. Used for the space the robot body occupies.
    pub fn clear_box(&mut self, center: &Point, half: &Vec3) {
        let b = Aabb::from_center(*center, *half);
        if let Some(range) = self.overlap_range(&b) {
            for z in range[2].0..=range[2].1 {
                for y in range[1].0..=range[1].1 {
                    for x in range[0].0..=range[0].1 {
                        let lin = self.linear([x, y, z]);
                        if self.cells[lin] == VoxelState::Unknown {
                            self.set_linear(lin, VoxelState::Free);
                        }
                    }
                }
            }
        }
    }

    /// Walks the voxels pierced by the ray `start + t * dir` for `t <= max_t` in order.
    ///
    /// `visit` receives the linear index and the entry parameter of each voxel and
    /// returns `false` to stop. `dir` must be a unit vector. Traversal ends at the map border.
    pub fn traverse<F>(&self, start: &Point, dir: &Vec3, max_t: f64, mut visit: F)
    where
        F: FnMut(usize, f64) -> bool,
    {
        let Some((t_in, t_out)) = self.bounds().ray_interval(start, dir) else {
            return;
        };
        if t_out < 0.0 || t_in > max_t {
            return;
        }
        let t_start = t_in.max(0.0);
        let p = start + dir * t_start;
        let r = self.resolution;
        let mut idx = [0i64; 3];
        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for i in 0..3 {
            let f = ((p[i] - self.origin[i]) / r).floor() as i64;
            idx[i] = f.clamp(0, self.dims[i] as i64 - 1);
            if dir[i] > 0.0 {
                step[i] = 1;
                let boundary = self.origin[i] + (idx[i] + 1) as f64 * r;
                t_max[i] = t_start + (boundary - p[i]) / dir[i];
                t_delta[i] = r / dir[i];
            } else if dir[i] < 0.0 {
                step[i] = -1;
                let boundary = self.origin[i] + idx[i] as f64 * r;
                t_max[i] = t_start + (boundary - p[i]) / dir[i];
                t_delta[i] = -r / dir[i];
            }
        }
        let mut t = t_start;
        loop {
            let lin = self.linear([idx[0] as usize, idx[1] as usize, idx[2] as usize]);
            if !visit(lin, t) {
                return;
            }
            let axis = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
                0
            } else if t_max[1] <= t_max[2] {
                1
            } else {
                2
            };
            t = t_max[axis];
            if t > max_t {
                return;
            }
            idx[axis] += step[axis];
            if idx[axis] < 0 || idx[axis] >= self.dims[axis] as i64 {
                return;
            }
            t_max[axis] += t_delta[axis];
        }
    }

    /// Integrates a scan: traversed voxels become free, hit voxels occupied.
    ///
    /// Occupied voxels are never cleared, so a voxel hit by any ray stays occupied
    /// regardless of the order in which rays are processed.
    pub fn integrate_scan(&mut self, scan: &Scan) {
        for ret in &scan.returns {
            let hit_lin = if ret.hit {
                let end = scan.origin + ret.direction * (ret.range + HIT_EPS);
                self.index_of(&end).map(|i| self.linear(i))
            } else {
                None
            };
            let limit = if ret.hit { ret.range - HIT_EPS } else { ret.range };
            let mut carve = Vec::new();
            self.traverse(&scan.origin, &ret.direction, limit, |lin, _| {
                if Some(lin) != hit_lin {
                    carve.push(lin);
                }
                true
            });
            for lin in carve {
                if self.cells[lin] == VoxelState::Unknown {
                    self.set_linear(lin, VoxelState::Free);
                }
            }
            if let Some(lin) = hit_lin {
                self.set_linear(lin, VoxelState::Occupied);
            }
        }
    }

    /// Adds a no-go box, clamped to the map. Boxes fully outside the map are dropped.
    pub fn add_geofence(&mut self, region: Aabb) -> bool {
        let Some(clamped) = region.intersection(&self.bounds()) else {
            return false;
        };
        if self.geofences.contains(&clamped) {
            return false;
        }
        self.geofences.push(clamped);
        true
    }

    pub fn in_geofence(&self, region: &Aabb) -> bool {
        self.geofences.iter().any(|g| g.overlaps(region))
    }

    /// Inclusive voxel index ranges overlapped by the interior of `b`, or `None` when
    /// `b` pokes outside the map.
    fn overlap_range(&self, b: &Aabb) -> Option<[(usize, usize); 3]> {
        let mut out = [(0, 0); 3];
        for i in 0..3 {
            let lo = ((b.min[i] - self.origin[i]) / self.resolution).floor();
            let hi = ((b.max[i] - self.origin[i]) / self.resolution).ceil() - 1.0;
            if lo < 0.0 || hi >= self.dims[i] as f64 || lo > hi {
                return None;
            }
            out[i] = (lo as usize, hi as usize);
        }
        Some(out)
    }

    /// True when every voxel overlapped by the box is free and no geofence overlaps it.
    pub fn box_admissible(&self, center: &Point, half: &Vec3) -> bool {
        let b = Aabb::from_center(*center, *half);
        if self.in_geofence(&b) {
            return false;
        }
        let Some(range) = self.overlap_range(&b) else {
            return false;
        };
        for z in range[2].0..=range[2].1 {
            for y in range[1].0..=range[1].1 {
                let row = self.linear([0, y, z]);
                if self.cells[row + range[0].0..=row + range[0].1].iter().any(|s| *s != VoxelState::Free) {
                    return false;
                }
            }
        }
        true
    }

    /// Sample points used to sweep the robot box along `a -> b` at half-voxel spacing.
    ///
    /// Endpoints are put in a canonical order so the sweep is symmetric in `a` and `b`.
    pub fn sweep_samples(&self, a: &Point, b: &Point) -> Vec<Point> {
        let (p, q) = if (a.x, a.y, a.z) <= (b.x, b.y, b.z) { (a, b) } else { (b, a) };
        let len = (q - p).norm();
        let n = (len / (self.resolution / 2.0)).ceil().max(1.0) as usize;
        (0..=n).map(|k| p + (q - p) * (k as f64 / n as f64)).collect()
    }

    pub fn segment_admissible(&self, a: &Point, b: &Point, half: &Vec3) -> bool {
        self.sweep_samples(a, b).iter().all(|p| self.box_admissible(p, half))
    }

    pub fn path_admissible(&self, points: &[Point], half: &Vec3) -> bool {
        match points {
            [] => true,
            [p] => self.box_admissible(p, half),
            _ => points.windows(2).all(|w| self.segment_admissible(&w[0], &w[1], half)),
        }
    }

    /// Line-oriented text export: header lines followed by `i j k state` per voxel.
    pub fn export_text(&self) -> String {
        let mut s = String::with_capacity(self.cells.len() * 16);
        let o = self.origin;
        let _ = writeln!(s, "voxelmap 1");
        let _ = writeln!(s, "origin {} {} {}", o.x, o.y, o.z);
        let _ = writeln!(s, "resolution {}", self.resolution);
        let _ = writeln!(s, "extents {} {} {}", self.dims[0], self.dims[1], self.dims[2]);
        for g in &self.geofences {
            let _ = writeln!(s, "geofence {} {} {} {} {} {}", g.min.x, g.min.y, g.min.z, g.max.x, g.max.y, g.max.z);
        }
        let _ = writeln!(s, "data");
        for (lin, state) in self.cells.iter().enumerate() {
            let [x, y, z] = self.unlinear(lin);
            let _ = writeln!(s, "{x} {y} {z} {}", state.as_str());
        }
        s
    }

    pub fn import_text(text: &str) -> Result<Self, MapError> {
        fn err(line: usize, message: impl Into<String>) -> MapError {
            MapError::Format { line, message: message.into() }
        }
        fn floats<const N: usize>(line: usize, parts: &[&str]) -> Result<[f64; N], MapError> {
            if parts.len() != N {
                return Err(err(line, format!("expected {N} values, got {}", parts.len())));
            }
            let mut out = [0.0; N];
            for (o, p) in out.iter_mut().zip(parts) {
                *o = p.parse().map_err(|_| err(line, format!("bad number '{p}'")))?;
            }
            Ok(out)
        }

        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        let (n, magic) = lines.next().ok_or_else(|| err(1, "empty input"))?;
        if magic != "voxelmap 1" {
            return Err(err(n, "missing 'voxelmap 1' header"));
        }
        let mut origin = None;
        let mut resolution = None;
        let mut dims = None;
        let mut fences = Vec::new();
        let mut map: Option<VoxelMap> = None;
        for (n, line) in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if let Some(m) = map.as_mut() {
                if parts.len() != 4 {
                    return Err(err(n, "expected 'x y z state'"));
                }
                let mut idx = [0usize; 3];
                for i in 0..3 {
                    idx[i] = parts[i].parse().map_err(|_| err(n, format!("bad index '{}'", parts[i])))?;
                    if idx[i] >= m.dims[i] {
                        return Err(err(n, format!("index {} out of extents", idx[i])));
                    }
                }
                let state = parts[3].parse().map_err(|_| err(n, format!("bad state '{}'", parts[3])))?;
                m.set_state(idx, state);
                continue;
            }
            match parts[0] {
                "origin" => origin = Some(floats::<3>(n, &parts[1..])?),
                "resolution" => resolution = Some(floats::<1>(n, &parts[1..])?[0]),
                "extents" => {
                    if parts.len() != 4 {
                        return Err(err(n, "expected 3 extents"));
                    }
                    let mut d = [0usize; 3];
                    for i in 0..3 {
                        d[i] = parts[i + 1].parse().map_err(|_| err(n, format!("bad extent '{}'", parts[i + 1])))?;
                    }
                    dims = Some(d);
                }
                "geofence" => {
                    let v = floats::<6>(n, &parts[1..])?;
                    fences.push(Aabb::new(Point::new(v[0], v[1], v[2]), Point::new(v[3], v[4], v[5])));
                }
                "data" => {
                    let o = origin.ok_or_else(|| err(n, "missing origin"))?;
                    let r = resolution.ok_or_else(|| err(n, "missing resolution"))?;
                    let d = dims.ok_or_else(|| err(n, "missing extents"))?;
                    let mut m = VoxelMap::new(Point::new(o[0], o[1], o[2]), r, d).map_err(|e| err(n, e.to_string()))?;
                    for f in fences.drain(..) {
                        m.add_geofence(f);
                    }
                    map = Some(m);
                }
                other => return Err(err(n, format!("unknown header key '{other}'"))),
            }
        }
        map.ok_or_else(|| err(text.lines().count(), "missing 'data' section"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map8() -> VoxelMap {
        VoxelMap::new(Point::origin(), 0.2, [16, 16, 16]).unwrap()
    }

    fn all_states_partitioned(m: &VoxelMap) -> bool {
        let unknown = m.cells.iter().filter(|s| **s == VoxelState::Unknown).count();
        unknown + m.known_count() == m.len()
    }

    #[test]
    fn fresh_map_is_unknown_everywhere() {
        let m = map8();
        assert_eq!(m.classify(&Point::new(1.0, 1.0, 1.0)), VoxelState::Unknown);
        assert_eq!(m.classify(&Point::new(-1.0, 1.0, 1.0)), VoxelState::Unknown);
        assert_eq!(m.unknown_count(), 16 * 16 * 16);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(VoxelMap::new(Point::origin(), 0.0, [1, 1, 1]).is_err());
        assert!(VoxelMap::new(Point::origin(), 0.2, [0, 1, 1]).is_err());
    }

    #[test]
    fn axis_aligned_ray_carves_five_and_hits_one() {
        // Oracle: voxel k spans [0.2k, 0.2k + 0.2); the ray covers x in [0.1, 1.1].
        let expected_free: Vec<usize> = (0..16).filter(|k| (0.2 * *k as f64) < 1.1 - 0.2 && 0.2 * (*k as f64 + 1.0) > 0.1).collect();
        assert_eq!(expected_free, vec![0, 1, 2, 3, 4]);

        let mut m = map8();
        let origin = Point::new(0.1, 0.1, 0.1);
        m.integrate_scan(&Scan { origin, returns: vec![RangeReturn { direction: Vec3::x(), range: 1.0, hit: true }] });
        for k in 0..16 {
            let s = m.state([k, 0, 0]);
            if expected_free.contains(&k) {
                assert_eq!(s, VoxelState::Free, "voxel {k}");
            } else if k == 5 {
                assert_eq!(s, VoxelState::Occupied);
            } else {
                assert_eq!(s, VoxelState::Unknown, "voxel {k}");
            }
        }
        assert_eq!(m.classify(&Point::new(1.1, 0.1, 0.1)), VoxelState::Occupied);
        assert_eq!(m.known_count(), 6);
        assert!(all_states_partitioned(&m));
    }

    #[test]
    fn max_range_ray_carves_full_length() {
        let mut m = map8();
        m.integrate_scan(&Scan {
            origin: Point::new(0.1, 0.1, 0.1),
            returns: vec![RangeReturn { direction: Vec3::y(), range: 1.0, hit: false }],
        });
        for k in 0..=5 {
            assert_eq!(m.state([0, k, 0]), VoxelState::Free);
        }
        assert_eq!(m.state([0, 6, 0]), VoxelState::Unknown);
    }

    #[test]
    fn empty_scan_is_noop() {
        let mut m = map8();
        let before = m.clone();
        m.integrate_scan(&Scan { origin: Point::new(1.0, 1.0, 1.0), returns: vec![] });
        assert_eq!(m, before);
    }

    #[test]
    fn crossing_rays_and_occupied_wins() {
        let mut m = map8();
        let origin = Point::new(1.1, 1.1, 1.1);
        let scan = Scan {
            origin,
            returns: vec![
                RangeReturn { direction: Vec3::x(), range: 0.6, hit: true },
                // Passes straight through the voxel the first ray hits.
                RangeReturn { direction: Vec3::x(), range: 1.2, hit: false },
                RangeReturn { direction: Vec3::y(), range: 0.6, hit: false },
            ],
        };
        m.integrate_scan(&scan);
        assert_eq!(m.classify(&Point::new(1.75, 1.1, 1.1)), VoxelState::Occupied);
        assert_eq!(m.classify(&Point::new(1.1, 1.1, 1.1)), VoxelState::Free);
        assert!(all_states_partitioned(&m));
        // Re-integrating is idempotent.
        let once = m.clone();
        m.integrate_scan(&scan);
        assert_eq!(m, once);
    }

    #[test]
    fn geofence_set_semantics_and_clamping() {
        let mut m = map8();
        m.fill(&m.bounds(), VoxelState::Free);
        let g = Aabb::new(Point::new(1.0, 1.0, 1.0), Point::new(1.4, 1.4, 1.4));
        assert!(m.add_geofence(g));
        assert!(!m.add_geofence(g));
        assert_eq!(m.geofences().len(), 1);
        assert!(!m.box_admissible(&Point::new(1.2, 1.2, 1.2), &Vec3::repeat(0.05)));
        assert!(m.box_admissible(&Point::new(2.2, 2.2, 2.2), &Vec3::repeat(0.05)));

        let outside = Aabb::new(Point::new(10.0, 10.0, 10.0), Point::new(11.0, 11.0, 11.0));
        assert!(!m.add_geofence(outside));
        let straddling = Aabb::new(Point::new(3.0, 3.0, 3.0), Point::new(5.0, 5.0, 5.0));
        assert!(m.add_geofence(straddling));
        assert!(m.bounds().contains(&m.geofences()[1].max));
    }

    #[test]
    fn segment_admissibility_basics() {
        let mut m = map8();
        m.fill(&Aabb::new(Point::new(0.0, 1.2, 1.2), Point::new(3.2, 2.0, 2.0)), VoxelState::Free);
        let half = Vec3::repeat(0.15);
        let a = Point::new(0.5, 1.6, 1.6);
        let b = Point::new(2.7, 1.6, 1.6);
        assert!(m.segment_admissible(&a, &b, &half));
        assert!(m.segment_admissible(&b, &a, &half));
        m.set_state(m.index_of(&Point::new(1.5, 1.6, 1.6)).unwrap(), VoxelState::Occupied);
        assert!(!m.segment_admissible(&a, &b, &half));
        // Leaving the carved corridor touches unknown voxels.
        assert!(!m.segment_admissible(&a, &Point::new(0.5, 2.5, 1.6), &half));
    }

    #[test]
    fn export_import_preserves_map() {
        let mut m = VoxelMap::new(Point::new(-1.0, 0.5, 0.0), 0.25, [4, 3, 2]).unwrap();
        m.set_state([1, 2, 1], VoxelState::Occupied);
        m.set_state([0, 0, 0], VoxelState::Free);
        m.add_geofence(Aabb::new(Point::new(-1.0, 0.5, 0.0), Point::new(-0.5, 1.0, 0.25)));
        let text = m.export_text();
        assert!(text.contains("\n1 2 1 occupied\n"));
        let back = VoxelMap::import_text(&text).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn import_reports_line_numbers() {
        let bad = "voxelmap 1\norigin 0 0 0\nresolution 0.2\nextents 1 1 1\ndata\n0 0 0 solid\n";
        match VoxelMap::import_text(bad) {
            Err(MapError::Format { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
    }
}
