//! Plain SVG drawings of decomposition plans and sweep paths.

use std::fmt::Write as _;

use sweepsearch::decomp::DecompositionPlan;
use sweepsearch::geom::{ConvexPolygon, Point2, Vec2};
use sweepsearch::sweeppath::ZigzagPath;

const CANVAS: f64 = 800.0;
const PAD: f64 = 40.0;
const COLOURS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

/// Maps world metres onto the canvas with y pointing up.
struct View {
    min: Point2,
    max_y: f64,
    scale: f64,
}

impl View {
    fn fit(area: &ConvexPolygon) -> Self {
        let bb = area.bounding_box();
        let span = bb.width().max(bb.height()).max(f64::MIN_POSITIVE);
        View {
            min: bb.min,
            max_y: bb.max.y,
            scale: (CANVAS - 2.0 * PAD) / span,
        }
    }

    fn map(&self, p: Point2) -> (f64, f64) {
        (
            PAD + (p.x - self.min.x) * self.scale,
            PAD + (self.max_y - p.y) * self.scale,
        )
    }

    fn points(&self, pts: impl IntoIterator<Item = Point2>) -> String {
        pts.into_iter()
            .map(|p| {
                let (x, y) = self.map(p);
                format!("{x:.2},{y:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub fn render_plan(area: &ConvexPolygon, plan: &DecompositionPlan, paths: &[ZigzagPath]) -> String {
    let view = View::fit(area);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);

    for s in &plan.sub_areas {
        let colour = COLOURS[s.drone_id % COLOURS.len()];
        let _ = writeln!(
            out,
            r#"<polygon points="{}" fill="{colour}" fill-opacity="0.15" stroke="{colour}" stroke-width="1.5"/>"#,
            view.points(s.polygon.vertices().iter().copied())
        );
        let (cx, cy) = view.map(s.polygon.centroid());
        let _ = writeln!(
            out,
            r#"<text x="{cx:.2}" y="{cy:.2}" font-size="14" text-anchor="middle">{} ({:.2})</text>"#,
            s.drone_id, s.proportion
        );
    }
    let _ = writeln!(
        out,
        r#"<polygon points="{}" fill="none" stroke="black" stroke-width="2"/>"#,
        view.points(area.vertices().iter().copied())
    );

    for (i, path) in paths.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1" stroke-dasharray="4 2"/>"#,
            view.points(path.waypoints.iter().copied())
        );
        let (sx, sy) = view.map(path.start());
        let _ = writeln!(out, r#"<circle cx="{sx:.2}" cy="{sy:.2}" r="4" fill="{colour}"/>"#);
    }

    // Sweep direction arrow from the centroid.
    let c = area.centroid();
    let dir = Vec2::from_angle(plan.sweep_direction);
    let len = 0.25 * area.bounding_box().width().max(area.bounding_box().height());
    let tip = c + dir * len;
    let (x0, y0) = view.map(c);
    let (x1, y1) = view.map(tip);
    let _ = writeln!(
        out,
        r#"<defs><marker id="head" markerWidth="10" markerHeight="7" refX="10" refY="3.5" orient="auto"><path d="M0,0 L10,3.5 L0,7 Z"/></marker></defs>"#
    );
    let _ = writeln!(
        out,
        r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}" stroke="black" stroke-width="2" marker-end="url(#head)"/>"#
    );
    out.push_str("</svg>\n");
    out
}
