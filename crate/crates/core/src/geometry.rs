//! Planar primitives shared by the kinematics, collision and route code.

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

    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn length(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).length()
    }

    /// Counterclockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Unit vector in the same direction, or `None` for (near) zero vectors.
    pub fn normalized(self) -> Option<Vec2> {
        let len = self.length();
        if len > 1e-12 {
            Some(Vec2::new(self.x / len, self.y / len))
        } else {
            None
        }
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

/// Wraps an angle into `(-π, π]`. Angles already in range are returned bit-for-bit.
pub fn normalize_angle(theta: f64) -> f64 {
    use std::f64::consts::PI;
    if theta > -PI && theta <= PI {
        return theta;
    }
    let wrapped = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped <= -PI {
        PI
    } else {
        wrapped
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub const fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    /// Closest point on the segment to `p` and its parameter in `[0, 1]`.
    pub fn closest_point(&self, p: Vec2) -> (Vec2, f64) {
        let ab = self.b - self.a;
        let len_sq = ab.dot(ab);
        if len_sq == 0.0 {
            return (self.a, 0.0);
        }
        let t = ((p - self.a).dot(ab) / len_sq).clamp(0.0, 1.0);
        (self.a + ab * t, t)
    }

    pub fn distance_to(&self, p: Vec2) -> f64 {
        self.closest_point(p).0.distance(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
}

impl Circle {
    pub const fn new(center: Vec2, radius: f64) -> Self {
        Self { center, radius }
    }

    /// Strict containment: points on the rim are outside.
    pub fn contains_strict(&self, p: Vec2) -> bool {
        p.distance(self.center) < self.radius
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub const fn new(min: Vec2, max: Vec2) -> Self {
        Self { min, max }
    }

    pub fn clamp_point(&self, p: Vec2) -> Vec2 {
        Vec2::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
        )
    }
}

/// Signed distance from a point to a solid shape together with the outward
/// unit normal at the closest boundary point (pointing from the shape to the point).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedDistance {
    pub distance: f64,
    pub normal: Vec2,
}

pub fn segment_signed_distance(seg: &Segment, p: Vec2) -> SignedDistance {
    let (closest, _) = seg.closest_point(p);
    let offset = p - closest;
    let distance = offset.length();
    let normal = offset
        .normalized()
        .or_else(|| (seg.b - seg.a).perp().normalized())
        .unwrap_or(Vec2::new(1.0, 0.0));
    SignedDistance { distance, normal }
}

pub fn circle_signed_distance(circle: &Circle, p: Vec2) -> SignedDistance {
    let offset = p - circle.center;
    SignedDistance {
        distance: offset.length() - circle.radius,
        normal: offset.normalized().unwrap_or(Vec2::new(1.0, 0.0)),
    }
}

pub fn rect_signed_distance(rect: &Rect, p: Vec2) -> SignedDistance {
    let closest = rect.clamp_point(p);
    let offset = p - closest;
    if let Some(normal) = offset.normalized() {
        return SignedDistance {
            distance: offset.length(),
            normal,
        };
    }
    // Inside or on the boundary: exit through the nearest face.
    let faces = [
        (p.x - rect.min.x, Vec2::new(-1.0, 0.0)),
        (rect.max.x - p.x, Vec2::new(1.0, 0.0)),
        (p.y - rect.min.y, Vec2::new(0.0, -1.0)),
        (rect.max.y - p.y, Vec2::new(0.0, 1.0)),
    ];
    let (depth, normal) =
        faces.into_iter().fold(
            faces[0],
            |best, face| if face.0 < best.0 { face } else { best },
        );
    SignedDistance {
        distance: -depth,
        normal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn angle_wrapping() {
        assert_eq!(normalize_angle(0.3), 0.3);
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(-PI / 2.0 - 2.0 * PI) + PI / 2.0).abs() < 1e-12);
        let w = normalize_angle(7.5);
        assert!(w > -PI && w <= PI);
    }

    #[test]
    fn segment_distance_interior_and_endpoint() {
        let s = Segment::new(Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0));
        assert!((s.distance_to(Vec2::new(3.0, 0.4)) - 0.4).abs() < 1e-15);
        assert!((s.distance_to(Vec2::new(13.0, 4.0)) - 5.0).abs() < 1e-12);
        let sd = segment_signed_distance(&s, Vec2::new(3.0, -2.0));
        assert_eq!(sd.normal, Vec2::new(0.0, -1.0));
    }

    #[test]
    fn point_on_segment_gets_perpendicular_normal() {
        let s = Segment::new(Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0));
        let sd = segment_signed_distance(&s, Vec2::new(1.0, 0.0));
        assert_eq!(sd.distance, 0.0);
        assert!((sd.normal.length() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rect_inside_exits_nearest_face() {
        let r = Rect::new(Vec2::new(0.0, 0.0), Vec2::new(4.0, 2.0));
        let sd = rect_signed_distance(&r, Vec2::new(3.8, 1.0));
        assert!((sd.distance + 0.2).abs() < 1e-12);
        assert_eq!(sd.normal, Vec2::new(1.0, 0.0));
        let outside = rect_signed_distance(&r, Vec2::new(7.0, 6.0));
        assert!((outside.distance - 5.0).abs() < 1e-12);
    }

    #[test]
    fn circle_distance() {
        let c = Circle::new(Vec2::new(1.0, 1.0), 0.5);
        let sd = circle_signed_distance(&c, Vec2::new(1.0, 2.0));
        assert!((sd.distance - 0.5).abs() < 1e-15);
        assert_eq!(sd.normal, Vec2::new(0.0, 1.0));
        assert!(!c.contains_strict(Vec2::new(1.5, 1.0)));
        assert!(c.contains_strict(Vec2::new(1.0, 1.0)));
    }
}
