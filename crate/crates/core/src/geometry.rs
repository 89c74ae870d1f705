//! Points, vectors and axis-aligned boxes shared by every module.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

pub type Point = Point3<f64>;
pub type Vec3 = Vector3<f64>;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

/// Yaw of the horizontal projection of `v`, or `None` when `v` is (nearly) vertical.
pub fn yaw_of(v: &Vec3) -> Option<f64> {
    if v.x.hypot(v.y) < 1e-12 {
        None
    } else {
        Some(v.y.atan2(v.x))
    }
}

/// Unit direction for a yaw/pitch pair.
pub fn direction(yaw: f64, pitch: f64) -> Vec3 {
    Vec3::new(pitch.cos() * yaw.cos(), pitch.cos() * yaw.sin(), pitch.sin())
}

/// Closed axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }

    pub fn from_center(center: Point, half: Vec3) -> Self {
        Self { min: center - half, max: center + half }
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|i| self.min[i].is_finite() && self.max[i].is_finite() && self.min[i] < self.max[i])
    }

    pub fn center(&self) -> Point {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn contains_eps(&self, p: &Point, eps: f64) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - eps && p[i] <= self.max[i] + eps)
    }

    /// True when the interiors overlap (touching faces do not count).
    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] < other.max[i] && other.min[i] < self.max[i])
    }

    pub fn intersection(&self, other: &Aabb) -> Option<Aabb> {
        let b = Aabb {
            min: Point::new(
                self.min.x.max(other.min.x),
                self.min.y.max(other.min.y),
                self.min.z.max(other.min.z),
            ),
            max: Point::new(
                self.max.x.min(other.max.x),
                self.max.y.min(other.max.y),
                self.max.z.min(other.max.z),
            ),
        };
        b.is_valid().then_some(b)
    }

    /// Distance from `p` to the box surface, zero when inside.
    pub fn distance_to(&self, p: &Point) -> f64 {
        let mut d2 = 0.0;
        for i in 0..3 {
            let d = (self.min[i] - p[i]).max(0.0).max(p[i] - self.max[i]);
            d2 += d * d;
        }
        d2.sqrt()
    }

    /// Parametric interval `[t0, t1]` where `origin + t * dir` lies inside the box.
    pub fn ray_interval(&self, origin: &Point, dir: &Vec3) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            if dir[i].abs() < 1e-15 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
            } else {
                let inv = 1.0 / dir[i];
                let mut a = (self.min[i] - origin[i]) * inv;
                let mut b = (self.max[i] - origin[i]) * inv;
                if a > b {
                    std::mem::swap(&mut a, &mut b);
                }
                t0 = t0.max(a);
                t1 = t1.min(b);
            }
        }
        (t0 <= t1).then_some((t0, t1))
    }

    /// Whether the segment `a -> b` intersects the box.
    pub fn intersects_segment(&self, a: &Point, b: &Point) -> bool {
        let d = b - a;
        match self.ray_interval(a, &d) {
            Some((t0, t1)) => t1 >= 0.0 && t0 <= 1.0,
            None => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5) - 0.5).abs() < 1e-12);
        assert!((wrap_angle(-0.5 - 2.0 * PI) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn ray_interval_hits_and_misses() {
        let b = Aabb::new(Point::new(1.0, -1.0, -1.0), Point::new(2.0, 1.0, 1.0));
        let (t0, t1) = b.ray_interval(&Point::origin(), &Vec3::x()).unwrap();
        assert!((t0 - 1.0).abs() < 1e-12 && (t1 - 2.0).abs() < 1e-12);
        assert!(b.ray_interval(&Point::origin(), &Vec3::y()).is_none());
        assert!(b.intersects_segment(&Point::new(0.0, 0.0, 0.0), &Point::new(1.5, 0.0, 0.0)));
        assert!(!b.intersects_segment(&Point::new(0.0, 0.0, 0.0), &Point::new(0.5, 0.0, 0.0)));
    }

    #[test]
    fn overlap_ignores_touching_faces() {
        let a = Aabb::new(Point::new(0.0, 0.0, 0.0), Point::new(1.0, 1.0, 1.0));
        let b = Aabb::new(Point::new(1.0, 0.0, 0.0), Point::new(2.0, 1.0, 1.0));
        assert!(!a.overlaps(&b));
        let c = Aabb::new(Point::new(0.9, 0.0, 0.0), Point::new(2.0, 1.0, 1.0));
        assert!(a.overlaps(&c));
    }
}
