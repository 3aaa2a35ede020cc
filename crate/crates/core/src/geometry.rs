//! Planar air-combat geometry.
//!
//! Positions are kilometres on a flat map with `x` pointing east and `y`
//! pointing north. Headings are compass degrees: `0` is north and angles grow
//! clockwise, so `90` is east. Every angle returned from this module is in
//! degrees.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum GeometryError {
    #[error("bearing between coincident points is undefined")]
    Coincident,
}

/// A point or displacement on the map, in kilometres.
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

    /// Unit vector pointing along a compass heading.
    pub fn from_heading(heading: HeadingDeg) -> Self {
        let rad = heading.value().to_radians();
        Self::new(rad.sin(), rad.cos())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 2D cross product `self × other`.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Compass heading in `[0, 360)`, clockwise from north.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HeadingDeg(f64);

impl HeadingDeg {
    pub const NORTH: HeadingDeg = HeadingDeg(0.0);

    /// Wraps any finite angle into `[0, 360)`.
    pub fn new(degrees: f64) -> Self {
        let wrapped = degrees.rem_euclid(360.0);
        // rem_euclid can round tiny negatives up to exactly 360
        if wrapped >= 360.0 {
            HeadingDeg(0.0)
        } else {
            HeadingDeg(wrapped)
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn reversed(self) -> Self {
        HeadingDeg::new(self.0 + 180.0)
    }

    pub fn rotated(self, delta: f64) -> Self {
        HeadingDeg::new(self.0 + delta)
    }

    /// Signed shortest rotation from `self` to `target`, in `(-180, 180]`.
    /// Positive means clockwise.
    pub fn delta_to(self, target: HeadingDeg) -> f64 {
        let d = (target.0 - self.0).rem_euclid(360.0);
        if d > 180.0 {
            d - 360.0
        } else {
            d
        }
    }
}

/// Compass bearing from `from` to `to`.
pub fn bearing_to(from: Vec2, to: Vec2) -> Result<HeadingDeg, GeometryError> {
    let d = to - from;
    if d.x == 0.0 && d.y == 0.0 {
        return Err(GeometryError::Coincident);
    }
    Ok(HeadingDeg::new(d.x.atan2(d.y).to_degrees()))
}

/// Unsigned difference between two headings, in `[0, 180]`.
pub fn angle_off(a: HeadingDeg, b: HeadingDeg) -> f64 {
    a.delta_to(b).abs()
}

/// Antenna train angle: unsigned angle between `a`'s nose and the line of
/// sight from `a` to `b`, in `[0, 180]`. Coincident positions give 0.
pub fn ata(pos_a: Vec2, heading_a: HeadingDeg, pos_b: Vec2) -> f64 {
    match bearing_to(pos_a, pos_b) {
        Ok(bearing) => angle_off(heading_a, bearing),
        Err(_) => 0.0,
    }
}

/// Aspect angle of `b` as seen from `a`: the angle between `b`'s tail and the
/// line from `b` to `a`. Zero when `a` sits directly behind `b`, 180 when `b`
/// points straight at `a`.
pub fn aspect_angle(pos_a: Vec2, pos_b: Vec2, heading_b: HeadingDeg) -> f64 {
    if pos_a == pos_b {
        return 0.0;
    }
    180.0 - ata(pos_b, heading_b, pos_a)
}

/// Sign of the determinant of `(AB, AC)`: `+1` when `C` lies to the left of
/// the ray `A -> B` (counter-clockwise), `-1` to the right, `0` when collinear.
pub fn turn_sign(a: Vec2, b: Vec2, c: Vec2) -> i8 {
    let det = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    if det > 0.0 {
        1
    } else if det < 0.0 {
        -1
    } else {
        0
    }
}

pub fn distance(a: Vec2, b: Vec2) -> f64 {
    (b - a).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: f64) -> HeadingDeg {
        HeadingDeg::new(v)
    }

    #[test]
    fn bearing_cardinal_directions() {
        let o = Vec2::ZERO;
        assert_eq!(bearing_to(o, Vec2::new(0.0, 5.0)).unwrap().value(), 0.0);
        assert!((bearing_to(o, Vec2::new(5.0, 0.0)).unwrap().value() - 90.0).abs() < 1e-12);
        assert!((bearing_to(o, Vec2::new(-3.0, -3.0)).unwrap().value() - 225.0).abs() < 1e-12);
        assert_eq!(bearing_to(o, o), Err(GeometryError::Coincident));
    }

    #[test]
    fn heading_wraps_into_range() {
        assert_eq!(h(360.0).value(), 0.0);
        assert_eq!(h(-90.0).value(), 270.0);
        assert_eq!(h(-1e-300).value(), 0.0);
        assert_eq!(h(725.0).value(), 5.0);
    }

    #[test]
    fn angle_off_examples() {
        assert_eq!(angle_off(h(0.0), h(0.0)), 0.0);
        assert!((angle_off(h(10.0), h(350.0)) - 20.0).abs() < 1e-12);
        assert_eq!(angle_off(h(90.0), h(270.0)), 180.0);
    }

    #[test]
    fn ata_examples() {
        let o = Vec2::ZERO;
        let b = Vec2::new(0.0, 5.0);
        assert_eq!(ata(o, h(0.0), b), 0.0);
        assert_eq!(ata(o, h(90.0), b), 90.0);
        assert_eq!(ata(o, h(180.0), b), 180.0);
        assert_eq!(ata(o, h(45.0), o), 0.0);
    }

    #[test]
    fn aspect_examples() {
        let b = Vec2::new(10.0, 10.0);
        assert_eq!(aspect_angle(Vec2::new(10.0, 5.0), b, h(0.0)), 0.0);
        assert_eq!(aspect_angle(Vec2::new(10.0, 15.0), b, h(0.0)), 180.0);
        assert!((aspect_angle(Vec2::new(15.0, 10.0), b, h(0.0)) - 90.0).abs() < 1e-12);
        assert_eq!(aspect_angle(b, b, h(0.0)), 0.0);
    }

    #[test]
    fn turn_sign_examples() {
        let a = Vec2::ZERO;
        let b = Vec2::new(0.0, 1.0);
        assert_eq!(turn_sign(a, b, Vec2::new(1.0, 0.0)), -1);
        assert_eq!(turn_sign(a, b, Vec2::new(-1.0, 0.0)), 1);
        assert_eq!(turn_sign(a, b, Vec2::new(0.0, 2.0)), 0);
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance(Vec2::ZERO, Vec2::ZERO), 0.0);
        assert_eq!(distance(Vec2::ZERO, Vec2::new(3.0, 4.0)), 5.0);
        assert_eq!(distance(Vec2::new(1.0, 1.0), Vec2::new(4.0, 5.0)), 5.0);
    }

    #[test]
    fn delta_to_prefers_clockwise_at_half_turn() {
        assert_eq!(h(0.0).delta_to(h(180.0)), 180.0);
        assert_eq!(h(350.0).delta_to(h(10.0)), 20.0);
        assert_eq!(h(10.0).delta_to(h(350.0)), -20.0);
    }
}
