//! Small 2D geometry helpers shared by the simulator and the ray sensor.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `degrees` counter-clockwise from +x.
    pub fn from_heading(degrees: f64) -> Self {
        let r = degrees.to_radians();
        Self::new(r.cos(), r.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn length(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).length()
    }

    pub fn normalized(self) -> Option<Vec2> {
        let len = self.length();
        if len > 0.0 && len.is_finite() {
            Some(Vec2::new(self.x / len, self.y / len))
        } else {
            None
        }
    }

    /// Rotate counter-clockwise by `degrees`.
    pub fn rotated(self, degrees: f64) -> Vec2 {
        let (s, c) = degrees.to_radians().sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wrap an angle in degrees into `[0, 360)`.
pub fn normalize_degrees(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

/// Signed smallest difference `to - from` in degrees, in `(-180, 180]`.
pub fn angle_difference(from: f64, to: f64) -> f64 {
    let d = (to - from).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

/// An oriented rectangle (center, rotation in degrees, half extents).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: Vec2,
    pub rotation: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl OrientedBox {
    /// Express a world point in the box frame (length along local x).
    pub fn to_local(&self, p: Vec2) -> Vec2 {
        (p - self.center).rotated(-self.rotation)
    }

    pub fn to_world_dir(&self, d: Vec2) -> Vec2 {
        d.rotated(self.rotation)
    }

    /// Euclidean distance from `p` to the box (0 inside).
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let l = self.to_local(p);
        let dx = (l.x.abs() - self.half_length).max(0.0);
        let dy = (l.y.abs() - self.half_width).max(0.0);
        dx.hypot(dy)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= self.half_length && l.y.abs() <= self.half_width
    }

    /// Radius of the bounding circle.
    pub fn bounding_radius(&self) -> f64 {
        self.half_length.hypot(self.half_width)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heading_wraps_into_range() {
        assert_eq!(normalize_degrees(360.0), 0.0);
        assert_eq!(normalize_degrees(-2.0), 358.0);
        assert_eq!(normalize_degrees(-1e-18), 0.0);
        assert!((normalize_degrees(725.0) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn angle_difference_takes_short_way() {
        assert!((angle_difference(350.0, 10.0) - 20.0).abs() < 1e-12);
        assert!((angle_difference(10.0, 350.0) + 20.0).abs() < 1e-12);
        assert!((angle_difference(0.0, 180.0) - 180.0).abs() < 1e-12);
    }

    #[test]
    fn box_distance_and_containment() {
        let b = OrientedBox {
            center: Vec2::new(1.0, 1.0),
            rotation: 90.0,
            half_length: 2.0,
            half_width: 0.25,
        };
        assert!(b.contains(Vec2::new(1.0, 2.9)));
        assert!(!b.contains(Vec2::new(1.5, 1.0)));
        assert!((b.distance_to(Vec2::new(2.25, 1.0)) - 1.0).abs() < 1e-12);
        assert!((b.distance_to(Vec2::new(1.0, 4.0)) - 1.0).abs() < 1e-12);
    }
}
