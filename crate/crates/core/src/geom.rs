//! Planar geometry: points, vectors, strictly convex polygons and disks.
//!
//! Everything here is an immutable value type. Polygons are stored
//! counter-clockwise and are validated on construction, so the operations
//! below never have to handle degenerate input.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("vertex {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("vertices {0} and {1} coincide")]
    RepeatedVertex(usize, usize),
    #[error("polygon is not strictly convex and counter-clockwise at vertex {0}")]
    NotStrictlyConvex(usize),
    #[error("disk radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("{0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub dx: f64,
    pub dy: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn distance_sq(self, other: Point2) -> f64 {
        (self - other).norm_sq()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Position vector from the origin.
    pub fn to_vec(self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Rotate counter-clockwise about the origin.
    pub fn rotated(self, angle: f64) -> Point2 {
        let (s, c) = angle.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { dx: 0.0, dy: 0.0 };

    pub const fn new(dx: f64, dy: f64) -> Self {
        Self { dx, dy }
    }

    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Vec2::new(c, s)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.dx * o.dx + self.dy * o.dy
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.dx * o.dy - self.dy * o.dx
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.dx.hypot(self.dy)
    }

    /// Unit vector, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn perp_left(self) -> Vec2 {
        Vec2::new(-self.dy, self.dx)
    }

    pub fn angle(self) -> f64 {
        self.dy.atan2(self.dx)
    }

    pub fn is_finite(self) -> bool {
        self.dx.is_finite() && self.dy.is_finite()
    }

    /// Scale down to `max_norm` if longer; direction is preserved.
    pub fn clamp_norm(self, max_norm: f64) -> Vec2 {
        let n = self.norm();
        if n > max_norm && n > 0.0 {
            self * (max_norm / n)
        } else {
            self
        }
    }
}

impl Sub for Point2 {
    type Output = Vec2;
    fn sub(self, o: Point2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Add<Vec2> for Point2 {
    type Output = Point2;
    fn add(self, v: Vec2) -> Point2 {
        Point2::new(self.x + v.dx, self.y + v.dy)
    }
}

impl Sub<Vec2> for Point2 {
    type Output = Point2;
    fn sub(self, v: Vec2) -> Point2 {
        Point2::new(self.x - v.dx, self.y - v.dy)
    }
}

impl AddAssign<Vec2> for Point2 {
    fn add_assign(&mut self, v: Vec2) {
        self.x += v.dx;
        self.y += v.dy;
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.dx + o.dx, self.dy + o.dy)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.dx - o.dx, self.dy - o.dy)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.dx * k, self.dy * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.dx, -self.dy)
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Distance from `p` to the closed segment `a`–`b`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    p.distance(closest_on_segment(p, a, b))
}

pub fn closest_on_segment(p: Point2, a: Point2, b: Point2) -> Point2 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == 0.0 {
        return a;
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    a + ab * t
}

/// Reduce an angle to `[0, π)`; directions of lines are only defined mod π.
pub fn normalize_line_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(PI);
    if t >= PI {
        t -= PI;
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub center: Point2,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Point2, radius: f64) -> Result<Self, GeomError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GeomError::BadRadius(radius));
        }
        if !center.is_finite() {
            return Err(GeomError::NonFinite(0));
        }
        Ok(Self { center, radius })
    }

    /// Boundary-inclusive membership.
    pub fn contains(&self, q: Point2) -> bool {
        self.center.distance_sq(q) <= self.radius * self.radius
    }

    /// Closed disks share at least one point.
    pub fn intersects(&self, other: &Disk) -> bool {
        let r = self.radius + other.radius;
        self.center.distance_sq(other.center) <= r * r
    }

    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point2,
    pub max: Point2,
}

impl Aabb {
    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

/// A strictly convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Point2>,
}

impl ConvexPolygon {
    /// Validate and wrap a CCW vertex list.
    ///
    /// Collinear or repeated vertices are rejected; use [`ConvexPolygon::normalized`]
    /// to clean raw input first.
    pub fn new(vertices: Vec<Point2>) -> Result<Self, GeomError> {
        let n = vertices.len();
        if n < 3 {
            return Err(GeomError::TooFewVertices(n));
        }
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(GeomError::NonFinite(i));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if vertices[i] == vertices[j] {
                    return Err(GeomError::RepeatedVertex(i, j));
                }
            }
        }
        for i in 0..n {
            let a = vertices[(i + n - 1) % n];
            let b = vertices[i];
            let c = vertices[(i + 1) % n];
            if (b - a).cross(c - b) <= 0.0 {
                return Err(GeomError::NotStrictlyConvex(i));
            }
        }
        // Locally convex everywhere can still wind around more than once.
        let mut turn = 0.0;
        for i in 0..n {
            let a = vertices[(i + n - 1) % n];
            let b = vertices[i];
            let c = vertices[(i + 1) % n];
            let e1 = b - a;
            let e2 = c - b;
            turn += e1.cross(e2).atan2(e1.dot(e2));
        }
        if (turn - 2.0 * PI).abs() > 1e-6 {
            return Err(GeomError::NotStrictlyConvex(0));
        }
        let poly = Self { vertices };
        if poly.area() <= 0.0 {
            return Err(GeomError::Domain("polygon has zero area".into()));
        }
        Ok(poly)
    }

    /// Build from an ordered ring in either orientation, dropping repeated and
    /// collinear vertices.
    pub fn normalized(points: &[Point2]) -> Result<Self, GeomError> {
        let mut pts: Vec<Point2> = points.to_vec();
        if signed_area(&pts) < 0.0 {
            pts.reverse();
        }
        Self::new(clean_ring(pts))
    }

    /// Convex hull of an arbitrary point set (Andrew's monotone chain).
    pub fn hull(points: &[Point2]) -> Result<Self, GeomError> {
        let mut pts: Vec<Point2> = points.to_vec();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        pts.dedup();
        if pts.len() < 3 {
            return Err(GeomError::TooFewVertices(pts.len()));
        }
        let mut lower: Vec<Point2> = Vec::new();
        for &p in &pts {
            while lower.len() >= 2
                && (lower[lower.len() - 1] - lower[lower.len() - 2]).cross(p - lower[lower.len() - 1])
                    <= 0.0
            {
                lower.pop();
            }
            lower.push(p);
        }
        let mut upper: Vec<Point2> = Vec::new();
        for &p in pts.iter().rev() {
            while upper.len() >= 2
                && (upper[upper.len() - 1] - upper[upper.len() - 2]).cross(p - upper[upper.len() - 1])
                    <= 0.0
            {
                upper.pop();
            }
            upper.push(p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        Self::new(clean_ring(lower))
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GeomError> {
        Self::new(vec![
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ])
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edges as `(start, end)` pairs in CCW order.
    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace area.
    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.distance(b)).sum()
    }

    pub fn centroid(&self) -> Point2 {
        let a = self.area();
        let (mut cx, mut cy) = (0.0, 0.0);
        for (p, q) in self.edges() {
            let w = p.x * q.y - q.x * p.y;
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
        }
        Point2::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    pub fn bounding_box(&self) -> Aabb {
        let mut min = self.vertices[0];
        let mut max = self.vertices[0];
        for v in &self.vertices[1..] {
            min.x = min.x.min(v.x);
            min.y = min.y.min(v.y);
            max.x = max.x.max(v.x);
            max.y = max.y.max(v.y);
        }
        Aabb { min, max }
    }

    /// Largest bounding-box side; the length scale for tolerances.
    pub fn scale(&self) -> f64 {
        let b = self.bounding_box();
        b.width().max(b.height())
    }

    /// `(min, max)` of the vertex projections onto `dir` (not normalised).
    pub fn extent_along(&self, dir: Vec2) -> (f64, f64) {
        self.vertices
            .iter()
            .map(|v| v.to_vec().dot(dir))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p), hi.max(p))
            })
    }

    /// Width of the polygon measured along the unit direction at angle `theta`.
    ///
    /// Equivalent to the height of the polygon after rolling it so that this
    /// direction points up; periodic with period π.
    pub fn diameter(&self, theta: f64) -> f64 {
        let (lo, hi) = self.extent_along(Vec2::from_angle(theta));
        hi - lo
    }

    /// `(theta_opt, d_min)`: the direction in `[0, π)` of minimum width, and
    /// that width.
    ///
    /// Rotating calipers: the minimum width of a convex polygon is always
    /// attained with one edge flush against a caliper, so only edge normals
    /// need to be checked. Ties go to the smallest angle.
    pub fn min_diameter(&self) -> (f64, f64) {
        let v = &self.vertices;
        let n = v.len();
        let height = |i: usize, j: usize| {
            let a = v[i];
            let b = v[(i + 1) % n];
            (b - a).cross(v[j % n] - a)
        };
        let mut j = 1;
        let mut candidates: Vec<(f64, f64)> = Vec::with_capacity(n);
        for i in 0..n {
            if j < i + 1 {
                j = i + 1;
            }
            while height(i, j + 1) > height(i, j) {
                j += 1;
            }
            let edge = v[(i + 1) % n] - v[i];
            let width = height(i, j) / edge.norm();
            let theta = normalize_line_angle(edge.perp_left().angle());
            candidates.push((width, theta));
        }
        let d_min = candidates
            .iter()
            .map(|c| c.0)
            .fold(f64::INFINITY, f64::min);
        let tol = d_min * 1e-12;
        candidates
            .into_iter()
            .filter(|c| c.0 <= d_min + tol)
            .map(|c| (c.1, c.0))
            .fold((f64::INFINITY, d_min), |best, c| if c.0 < best.0 { c } else { best })
    }

    /// Boundary-inclusive point membership.
    pub fn contains(&self, q: Point2) -> bool {
        let tol = 1e-9 * self.scale().max(1.0);
        self.edges().all(|(a, b)| {
            let e = b - a;
            e.cross(q - a) / e.norm() >= -tol
        })
    }

    /// Distance from an interior point to the boundary (negative outside).
    pub fn signed_boundary_distance(&self, q: Point2) -> f64 {
        self.edges()
            .map(|(a, b)| {
                let e = b - a;
                e.cross(q - a) / e.norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Closest point of the (closed) polygon to `q`.
    pub fn project(&self, q: Point2) -> Point2 {
        if self.contains(q) {
            return q;
        }
        self.edges()
            .map(|(a, b)| closest_on_segment(q, a, b))
            .min_by(|p1, p2| q.distance_sq(*p1).total_cmp(&q.distance_sq(*p2)))
            .unwrap_or(q)
    }

    /// Distance from `q` to the polygon; zero inside.
    pub fn distance_outside(&self, q: Point2) -> f64 {
        q.distance(self.project(q))
    }

    /// Keep the part with `normal · p >= offset`. `None` when nothing of
    /// positive area remains.
    pub fn clip_half_plane(&self, normal: Vec2, offset: f64) -> Option<ConvexPolygon> {
        let side = |p: Point2| p.to_vec().dot(normal) - offset;
        let mut out: Vec<Point2> = Vec::with_capacity(self.vertices.len() + 2);
        for (a, b) in self.edges() {
            let sa = side(a);
            let sb = side(b);
            if sa >= 0.0 {
                out.push(a);
            }
            if (sa >= 0.0) != (sb >= 0.0) {
                let t = sa / (sa - sb);
                out.push(a + (b - a) * t);
            }
        }
        let cleaned = clean_ring(out);
        if cleaned.len() < 3 {
            return None;
        }
        ConvexPolygon::new(cleaned).ok()
    }

    /// Area of the part with `normal · p >= offset`.
    fn area_above(&self, normal: Vec2, offset: f64) -> f64 {
        let side = |p: Point2| p.to_vec().dot(normal) - offset;
        let mut ring: Vec<Point2> = Vec::with_capacity(self.vertices.len() + 2);
        for (a, b) in self.edges() {
            let sa = side(a);
            let sb = side(b);
            if sa >= 0.0 {
                ring.push(a);
            }
            if (sa >= 0.0) != (sb >= 0.0) {
                let t = sa / (sa - sb);
                ring.push(a + (b - a) * t);
            }
        }
        if ring.len() < 3 {
            0.0
        } else {
            signed_area(&ring)
        }
    }

    /// Cut with a line parallel to `line_direction` so that the part on the
    /// left of the (directed) line has `target_area`.
    ///
    /// Returns `(left, right)`. The cut offset is found by bisection; the
    /// area on one side is continuous and monotone in the offset.
    pub fn slice(
        &self,
        line_direction: f64,
        target_area: f64,
    ) -> Result<(ConvexPolygon, ConvexPolygon), GeomError> {
        let total = self.area();
        if !(target_area > 0.0 && target_area < total) {
            return Err(GeomError::Domain(format!(
                "slice target area {target_area} outside (0, {total})"
            )));
        }
        let normal = Vec2::from_angle(line_direction).perp_left();
        let (lo, hi) = self.extent_along(normal);
        let offset = self.offset_for_area(normal, lo, hi, target_area);
        let left = self.clip_half_plane(normal, offset);
        let right = self.clip_half_plane(-normal, -offset);
        match (left, right) {
            (Some(l), Some(r)) => Ok((l, r)),
            _ => Err(GeomError::Domain(
                "slice produced a degenerate piece".into(),
            )),
        }
    }

    fn offset_for_area(&self, normal: Vec2, mut lo: f64, mut hi: f64, target: f64) -> f64 {
        // area_above is decreasing in the offset
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.area_above(normal, mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let a_lo = self.area_above(normal, lo);
        let a_hi = self.area_above(normal, hi);
        if (a_lo - target).abs() <= (a_hi - target).abs() {
            lo
        } else {
            hi
        }
    }

    /// Split at `normal · p = offset` into `(below, above)`; either side may
    /// be empty.
    pub fn split_at(
        &self,
        normal: Vec2,
        offset: f64,
    ) -> (Option<ConvexPolygon>, Option<ConvexPolygon>) {
        (
            self.clip_half_plane(-normal, -offset),
            self.clip_half_plane(normal, offset),
        )
    }

    pub fn rotated(&self, angle: f64) -> ConvexPolygon {
        ConvexPolygon {
            vertices: self.vertices.iter().map(|v| v.rotated(angle)).collect(),
        }
    }

    pub fn translated(&self, by: Vec2) -> ConvexPolygon {
        ConvexPolygon {
            vertices: self.vertices.iter().map(|&v| v + by).collect(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolygonTextError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Shape(GeomError),
}

/// Parse the polygon text format: one `x y` vertex per line in metres,
/// counter-clockwise. Blank lines and `#` comments are ignored.
pub fn parse_polygon_text(text: &str) -> Result<ConvexPolygon, PolygonTextError> {
    let mut vertices = Vec::new();
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(PolygonTextError::Line {
                line,
                message: format!("expected \"x y\", found {} fields", fields.len()),
            });
        }
        let mut xy = [0.0; 2];
        for (slot, field) in xy.iter_mut().zip(&fields) {
            *slot = field.parse::<f64>().map_err(|_| PolygonTextError::Line {
                line,
                message: format!("{field:?} is not a number"),
            })?;
            if !slot.is_finite() {
                return Err(PolygonTextError::Line {
                    line,
                    message: format!("{field:?} is not finite"),
                });
            }
        }
        vertices.push(Point2::new(xy[0], xy[1]));
        lines.push(line);
    }
    ConvexPolygon::new(vertices).map_err(|e| {
        let at = |v: usize, message: String| PolygonTextError::Line {
            line: lines[v],
            message,
        };
        match e {
            GeomError::NotStrictlyConvex(v) => at(
                v,
                "vertex breaks strict convexity or counter-clockwise order".into(),
            ),
            GeomError::RepeatedVertex(first, v) => {
                at(v, format!("vertex repeats the one on line {}", lines[first]))
            }
            other => PolygonTextError::Shape(other),
        }
    })
}

/// Inverse of [`parse_polygon_text`]. Uses shortest round-trip formatting.
pub fn polygon_to_text(polygon: &ConvexPolygon) -> String {
    polygon
        .vertices()
        .iter()
        .map(|v| format!("{} {}\n", v.x, v.y))
        .collect()
}

/// Random strictly convex polygon with `n_vertices` corners on an ellipse of
/// random eccentricity and orientation, centred at the origin.
pub fn random_convex_polygon<R: rand::Rng + ?Sized>(
    rng: &mut R,
    n_vertices: usize,
    radius: f64,
) -> ConvexPolygon {
    assert!(n_vertices >= 3);
    loop {
        let semi_minor = radius * rng.random_range(0.2..1.0);
        let tilt = rng.random_range(0.0..PI);
        let mut angles: Vec<f64> = (0..n_vertices)
            .map(|_| rng.random_range(0.0..2.0 * PI))
            .collect();
        angles.sort_by(f64::total_cmp);
        let pts: Vec<Point2> = angles
            .iter()
            .map(|&a| Point2::new(radius * a.cos(), semi_minor * a.sin()).rotated(tilt))
            .collect();
        if let Ok(poly) = ConvexPolygon::new(pts) {
            if poly.len() == n_vertices && poly.area() > 1e-3 * radius * radius {
                return poly;
            }
        }
    }
}

fn signed_area(pts: &[Point2]) -> f64 {
    let n = pts.len();
    let mut s = 0.0;
    for i in 0..n {
        let p = pts[i];
        let q = pts[(i + 1) % n];
        s += p.x * q.y - q.x * p.y;
    }
    0.5 * s
}

/// Drop (near-)duplicate and collinear vertices from a closed ring.
fn clean_ring(mut pts: Vec<Point2>) -> Vec<Point2> {
    let scale = pts
        .iter()
        .flat_map(|p| [p.x.abs(), p.y.abs()])
        .fold(0.0_f64, f64::max)
        .max(1e-300);
    let dup_tol = 1e-12 * scale;
    loop {
        let n = pts.len();
        if n < 3 {
            return pts;
        }
        let mut removed = false;
        for i in 0..n {
            let prev = pts[(i + n - 1) % n];
            let cur = pts[i];
            let next = pts[(i + 1) % n];
            let e1 = cur - prev;
            let e2 = next - cur;
            let duplicate = e1.norm() <= dup_tol;
            let collinear = e1.cross(e2) <= 1e-12 * e1.norm() * e2.norm();
            if duplicate || collinear {
                pts.remove(i);
                removed = true;
                break;
            }
        }
        if !removed {
            return pts;
        }
    }
}
