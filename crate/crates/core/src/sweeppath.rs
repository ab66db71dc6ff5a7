//! Boustrophedon sweep paths over a convex area.
//!
//! Laps run parallel to the sweep direction at offsets spaced `2 R (1 - overlap)`
//! apart along the perpendicular axis. Each lap covers a band of half-width
//! `R (1 - overlap)` around it. Where the area bulges past the lap's chord
//! inside its band (slanted boundaries), the lap is extended by a short
//! excursion to the band's extreme point, so every point of the band stays
//! within the coverage radius of the path.

use std::fmt::Write as _;

use crate::geom::{ConvexPolygon, Point2, Vec2};

#[derive(Debug, Clone, PartialEq)]
pub struct ZigzagPath {
    pub waypoints: Vec<Point2>,
    pub lap_spacing: f64,
    pub sweep_direction: f64,
    /// Offsets of the laps along the axis perpendicular to the sweep
    /// direction.
    pub lap_offsets: Vec<f64>,
}

impl ZigzagPath {
    pub fn lap_count(&self) -> usize {
        self.lap_offsets.len()
    }

    pub fn length(&self) -> f64 {
        path_length(&self.waypoints)
    }

    /// Waypoints as `x,y` CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_m,y_m\n");
        for p in &self.waypoints {
            let _ = writeln!(out, "{},{}", p.x, p.y);
        }
        out
    }

    pub fn start(&self) -> Point2 {
        self.waypoints[0]
    }

    /// Smallest distance from `q` to the polyline.
    pub fn distance_to(&self, q: Point2) -> f64 {
        polyline_distance(&self.waypoints, q)
    }
}

/// Sum of segment lengths.
pub fn path_length(waypoints: &[Point2]) -> f64 {
    waypoints.windows(2).map(|w| w[0].distance(w[1])).sum()
}

pub fn polyline_distance(waypoints: &[Point2], q: Point2) -> f64 {
    if waypoints.len() == 1 {
        return q.distance(waypoints[0]);
    }
    waypoints
        .windows(2)
        .map(|w| crate::geom::point_segment_distance(q, w[0], w[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Axis perpendicular to the sweep direction, oriented so that it matches
/// the minimum-width direction of a decomposition with this sweep direction.
pub fn offset_axis(sweep_direction: f64) -> Vec2 {
    let s = sweep_unit(sweep_direction);
    Vec2::new(s.dy, -s.dx)
}

/// Unit vector along the sweep direction, with rounding noise from
/// axis-aligned angles flushed to zero.
fn sweep_unit(sweep_direction: f64) -> Vec2 {
    let v = Vec2::from_angle(sweep_direction);
    let flush = |c: f64| if c.abs() < 1e-15 { 0.0 } else { c };
    Vec2::new(flush(v.dx), flush(v.dy))
}

/// Frame with `o` along the offset axis and `s` along the sweep direction.
#[derive(Clone, Copy)]
struct Frame {
    n: Vec2,
    s: Vec2,
}

impl Frame {
    fn new(sweep_direction: f64) -> Self {
        Frame {
            n: offset_axis(sweep_direction),
            s: sweep_unit(sweep_direction),
        }
    }

    fn coords(&self, p: Point2) -> (f64, f64) {
        let v = p.to_vec();
        (v.dot(self.n), v.dot(self.s))
    }

    fn point(&self, o: f64, s: f64) -> Point2 {
        let v = self.n * o + self.s * s;
        Point2::new(v.dx, v.dy)
    }
}

/// `(s_min, s_max)` of the chord of `area` at offset `o`.
fn chord(area: &ConvexPolygon, frame: Frame, o: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (a, b) in area.edges() {
        let (oa, sa) = frame.coords(a);
        let (ob, sb) = frame.coords(b);
        let (omin, omax) = if oa <= ob { (oa, ob) } else { (ob, oa) };
        if o < omin || o > omax {
            continue;
        }
        if ob == oa {
            lo = lo.min(sa.min(sb));
            hi = hi.max(sa.max(sb));
        } else {
            let s = sa + (sb - sa) * (o - oa) / (ob - oa);
            lo = lo.min(s);
            hi = hi.max(s);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Extreme point of the band polygon along `±s`, chosen as close to offset
/// `o` as the extreme face allows.
fn band_extreme(band: &ConvexPolygon, frame: Frame, o: f64, forward: bool) -> (f64, f64) {
    let sign = if forward { 1.0 } else { -1.0 };
    let pts: Vec<(f64, f64)> = band
        .vertices()
        .iter()
        .map(|&p| {
            let (po, ps) = frame.coords(p);
            (po, ps * sign)
        })
        .collect();
    let best = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * band.scale().max(1.0);
    let (omin, omax) = pts
        .iter()
        .filter(|p| p.1 >= best - tol)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.0), b.max(p.0))
        });
    (o.clamp(omin, omax), best * sign)
}

fn push_distinct(out: &mut Vec<Point2>, p: Point2, tol: f64) {
    if out.last().is_none_or(|q| q.distance(p) > tol) {
        out.push(p);
    }
}

/// Zigzag path covering `area` with disks of radius `coverage_radius`.
///
/// The first lap runs in the sweep direction at the lowest offset; laps
/// alternate direction.
pub fn generate_zigzag(
    area: &ConvexPolygon,
    sweep_direction: f64,
    coverage_radius: f64,
    overlap: f64,
) -> ZigzagPath {
    assert!(coverage_radius > 0.0, "coverage radius must be positive");
    assert!((0.0..1.0).contains(&overlap), "overlap must be in [0, 1)");
    let frame = Frame::new(sweep_direction);
    let spacing = 2.0 * coverage_radius * (1.0 - overlap);
    let half = 0.5 * spacing;
    let (lo, hi) = area.extent_along(frame.n);
    let extent = hi - lo;
    let laps = ((extent / spacing - 1e-9).ceil() as usize).max(1);

    let mid = 0.5 * (lo + hi);
    let first = (lo + half).min(mid);
    let mut offsets: Vec<f64> = (0..laps).map(|i| first + i as f64 * spacing).collect();
    if laps > 1 {
        offsets[laps - 1] = hi - half;
    }

    let tol = 1e-9 * area.scale().max(1.0);
    let mut waypoints = Vec::with_capacity(4 * laps);
    for (i, &o) in offsets.iter().enumerate() {
        let (s0, s1) = chord(area, frame, o).unwrap_or((0.0, 0.0));
        let band = area
            .clip_half_plane(frame.n, o - half)
            .and_then(|b| b.clip_half_plane(-frame.n, -(o + half)))
            .unwrap_or_else(|| area.clone());
        let back = band_extreme(&band, frame, o, false);
        let front = band_extreme(&band, frame, o, true);
        let lap = [
            frame.point(back.0, back.1),
            frame.point(o, s0),
            frame.point(o, s1),
            frame.point(front.0, front.1),
        ];
        if i % 2 == 0 {
            for p in lap {
                push_distinct(&mut waypoints, p, tol);
            }
        } else {
            for p in lap.into_iter().rev() {
                push_distinct(&mut waypoints, p, tol);
            }
        }
    }
    if waypoints.len() == 1 {
        let p = waypoints[0];
        waypoints.push(p);
    }

    ZigzagPath {
        waypoints,
        lap_spacing: spacing,
        sweep_direction,
        lap_offsets: offsets,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mc_misses(area: &ConvexPolygon, path: &ZigzagPath, radius: f64, seed: u64) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bb = area.bounding_box();
        let mut misses = 0;
        let mut n = 0;
        while n < 10_000 {
            let q = Point2::new(
                rng.random_range(bb.min.x..=bb.max.x),
                rng.random_range(bb.min.y..=bb.max.y),
            );
            if !area.contains(q) {
                continue;
            }
            n += 1;
            if path.distance_to(q) > radius * (1.0 + 1e-9) {
                misses += 1;
            }
        }
        misses
    }

    #[test]
    fn single_lap_through_mid_line() {
        let sq = ConvexPolygon::rectangle(0.0, 0.0, 1000.0, 1000.0).unwrap();
        let path = generate_zigzag(&sq, FRAC_PI_2, 500.0, 0.0);
        assert_eq!(path.lap_offsets, vec![500.0]);
        assert_eq!(path.waypoints.len(), 2);
        for c in sq.vertices() {
            assert!((path.distance_to(*c) - 500.0).abs() < 1e-9);
        }
        assert_eq!(mc_misses(&sq, &path, 500.0, 1), 0);
    }

    #[test]
    fn two_laps_in_square() {
        let sq = ConvexPolygon::rectangle(0.0, 0.0, 1000.0, 1000.0).unwrap();
        let path = generate_zigzag(&sq, FRAC_PI_2, 250.0, 0.0);
        assert_eq!(path.lap_offsets, vec![250.0, 750.0]);
        assert_eq!(path.waypoints.len(), 4);
        assert_eq!(mc_misses(&sq, &path, 250.0, 2), 0);
    }

    #[test]
    fn thin_area_has_one_lap() {
        let strip = ConvexPolygon::rectangle(0.0, 0.0, 300.0, 5000.0).unwrap();
        let path = generate_zigzag(&strip, FRAC_PI_2, 500.0, 0.0);
        assert_eq!(path.lap_count(), 1);
        assert_eq!(path.lap_offsets[0], 150.0);
    }

    #[test]
    fn strip_length() {
        let strip = ConvexPolygon::rectangle(0.0, 0.0, 2000.0, 10_000.0).unwrap();
        let path = generate_zigzag(&strip, FRAC_PI_2, 500.0, 0.0);
        assert_eq!(path.lap_count(), 2);
        assert!((path.length() - 21_000.0).abs() < 1e-6);
        assert!(path.waypoints.iter().all(|p| strip.contains(*p)));
    }

    #[test]
    fn length_of_simple_polylines() {
        let two = [Point2::new(0.0, 0.0), Point2::new(60.0, 80.0)];
        assert_eq!(path_length(&two), 100.0);
        let ring = [
            Point2::new(0.0, 0.0),
            Point2::new(10.0, 0.0),
            Point2::new(10.0, 10.0),
            Point2::new(0.0, 10.0),
            Point2::new(0.0, 0.0),
        ];
        assert_eq!(path_length(&ring), 40.0);
    }

    #[test]
    fn triangle_needs_excursions() {
        // a thin wedge: chords alone would leave the tip uncovered
        let tri = ConvexPolygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(3000.0, 0.0),
            Point2::new(0.0, 900.0),
        ])
        .unwrap();
        let (theta, _) = tri.min_diameter();
        let path = generate_zigzag(&tri, theta + FRAC_PI_2, 200.0, 0.0);
        assert_eq!(mc_misses(&tri, &path, 200.0, 3), 0);
        assert!(path.waypoints.iter().all(|p| tri.contains(*p)));
    }

    #[test]
    fn csv_export() {
        let sq = ConvexPolygon::rectangle(0.0, 0.0, 10.0, 10.0).unwrap();
        let path = generate_zigzag(&sq, FRAC_PI_2, 5.0, 0.0);
        assert_eq!(path.to_csv(), "x_m,y_m\n5,0\n5,10\n");
    }
}
