//! Planar geometry helpers for the ray-walk.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

const EPS: f64 = 1e-12;

/// Point or vector in the local planar frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Self) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Self) -> f64 {
        (self - o).norm()
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        (n > EPS && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Intersection of segments `p1p2` and `q1q2`, returned as the parameters
/// `(s, t)` along each segment. Touching endpoints count as intersecting.
pub fn segment_intersection(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> Option<(f64, f64)> {
    let r = p2 - p1;
    let s = q2 - q1;
    let denom = r.cross(s);
    if denom.abs() < EPS {
        return None;
    }
    let qp = q1 - p1;
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    let tol = 1e-12;
    ((-tol..=1.0 + tol).contains(&t) && (-tol..=1.0 + tol).contains(&u)).then_some((t, u))
}

pub fn polyline_length(points: &[Point2]) -> f64 {
    points.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Even-odd point in polygon test.
pub fn point_in_polygon(p: Point2, poly: &[Point2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Length of the part of segment `ab` that lies inside `poly`.
pub fn segment_length_in_polygon(a: Point2, b: Point2, poly: &[Point2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut cuts = vec![0.0, 1.0];
    for i in 0..poly.len() {
        let (c, d) = (poly[i], poly[(i + 1) % poly.len()]);
        if let Some((t, _)) = segment_intersection(a, b, c, d) {
            cuts.push(t.clamp(0.0, 1.0));
        }
    }
    cuts.sort_by(f64::total_cmp);
    let len = a.distance(b);
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .filter(|w| point_in_polygon(a + (b - a) * (0.5 * (w[0] + w[1])), poly))
        .map(|w| (w[1] - w[0]) * len)
        .sum()
}

/// Vehicle footprint: a rectangle centered on the trajectory point and
/// aligned with the heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub center: Point2,
    /// Unit vector pointing from the back to the front.
    pub heading: Point2,
    pub length: f64,
    pub width: f64,
}

impl OrientedRect {
    pub fn left(&self) -> Point2 {
        self.heading.perp()
    }

    /// Point on the mid-axis at signed axial coordinate `x` (front is `+length/2`).
    pub fn axis_point(&self, x: f64) -> Point2 {
        self.center + self.heading * x
    }

    pub fn front_mid(&self) -> Point2 {
        self.axis_point(0.5 * self.length)
    }

    pub fn back_mid(&self) -> Point2 {
        self.axis_point(-0.5 * self.length)
    }

    /// Corners in order front-left, front-right, back-right, back-left.
    pub fn corners(&self) -> [Point2; 4] {
        let h = self.heading * (0.5 * self.length);
        let l = self.left() * (0.5 * self.width);
        [
            self.center + h + l,
            self.center + h - l,
            self.center - h - l,
            self.center - h + l,
        ]
    }

    pub fn front_face(&self) -> (Point2, Point2) {
        let c = self.corners();
        (c[0], c[1])
    }

    pub fn back_face(&self) -> (Point2, Point2) {
        let c = self.corners();
        (c[2], c[3])
    }

    /// Axial and lateral coordinates of `p` in the vehicle frame.
    pub fn to_local(&self, p: Point2) -> (f64, f64) {
        let d = p - self.center;
        (d.dot(self.heading), d.dot(self.left()))
    }

    pub fn contains(&self, p: Point2) -> bool {
        let (a, l) = self.to_local(p);
        a.abs() <= 0.5 * self.length && l.abs() <= 0.5 * self.width
    }

    pub fn intersects_segment(&self, a: Point2, b: Point2) -> bool {
        if self.contains(a) || self.contains(b) {
            return true;
        }
        let c = self.corners();
        (0..4).any(|i| segment_intersection(a, b, c[i], c[(i + 1) % 4]).is_some())
    }

    /// Axial coordinate where the line through `a` and `b` crosses the
    /// mid-axis, clamped to the vehicle length. `None` when parallel.
    pub fn axis_crossing(&self, a: Point2, b: Point2) -> Option<f64> {
        let (a_ax, a_lat) = self.to_local(a);
        let (b_ax, b_lat) = self.to_local(b);
        let dl = b_lat - a_lat;
        if dl.abs() < EPS {
            return None;
        }
        let s = -a_lat / dl;
        let x = a_ax + s * (b_ax - a_ax);
        Some(x.clamp(-0.5 * self.length, 0.5 * self.length))
    }
}
