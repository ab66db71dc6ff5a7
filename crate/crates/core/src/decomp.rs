//! Proportional area decomposition of the operating polygon.
//!
//! The polygon is cut by lines parallel to the sweep direction (which is
//! perpendicular to the minimum-width direction), in order of increasing
//! offset along the minimum-width direction. Sub-area `i` goes to drone `i`.

use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

use crate::geom::{ConvexPolygon, GeomError, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecompError {
    #[error("invalid proportions: {0}")]
    InvalidProportions(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("drone {0} has no assigned sub-area")]
    UnknownDrone(usize),
    #[error("drone {0} has no live neighbour to take over its area")]
    NoLiveNeighbour(usize),
    #[error("unswept region must be an end piece of drone {0}'s sub-area")]
    BadUnswept(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubArea {
    pub polygon: ConvexPolygon,
    /// Fraction of the parent polygon's area.
    pub proportion: f64,
    pub drone_id: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionPlan {
    /// Direction of the laps and of the dividing lines (radians).
    pub sweep_direction: f64,
    /// Direction along which the parent polygon is narrowest, in `[0, π)`.
    pub min_diameter_direction: f64,
    pub min_diameter: f64,
    pub total_area: f64,
    pub sub_areas: Vec<SubArea>,
    pub failed: Vec<usize>,
}

impl DecompositionPlan {
    /// Unit vector of the minimum-width direction; sub-areas are ordered by
    /// offset along it.
    pub fn offset_axis(&self) -> Vec2 {
        Vec2::from_angle(self.min_diameter_direction)
    }

    /// All regions currently assigned to `drone_id`, in assignment order.
    pub fn assignments(&self, drone_id: usize) -> impl Iterator<Item = &SubArea> {
        self.sub_areas.iter().filter(move |s| s.drone_id == drone_id)
    }

    pub fn n_drones(&self) -> usize {
        self.sub_areas
            .iter()
            .map(|s| s.drone_id + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn is_live(&self, drone_id: usize) -> bool {
        drone_id < self.n_drones() && !self.failed.contains(&drone_id)
    }

    /// One row per sub-area vertex, sub-areas in plan order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(PLAN_CSV_HEADER);
        out.push('\n');
        for (k, s) in self.sub_areas.iter().enumerate() {
            for (i, v) in s.polygon.vertices().iter().enumerate() {
                out.push_str(&format!(
                    "{k},{},{},{i},{},{}\n",
                    s.drone_id, s.proportion, v.x, v.y
                ));
            }
        }
        out
    }
}

pub const PLAN_CSV_HEADER: &str = "sub_area,drone_id,proportion,vertex,x_m,y_m";

/// Uniform proportions `1/n`.
pub fn uniform_proportions(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

fn check_proportions(proportions: &[f64]) -> Result<(), DecompError> {
    if proportions.is_empty() {
        return Err(DecompError::InvalidProportions("empty list".into()));
    }
    if let Some(p) = proportions.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        return Err(DecompError::InvalidProportions(format!(
            "every proportion must be positive, got {p}"
        )));
    }
    let sum: f64 = proportions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(DecompError::InvalidProportions(format!(
            "proportions sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// Split `polygon` into sub-areas with the given area proportions.
pub fn decompose(
    polygon: &ConvexPolygon,
    proportions: &[f64],
) -> Result<DecompositionPlan, DecompError> {
    check_proportions(proportions)?;
    let (theta_opt, d_min) = polygon.min_diameter();
    let sweep_direction = theta_opt + FRAC_PI_2;
    let total_area = polygon.area();

    let mut sub_areas = Vec::with_capacity(proportions.len());
    let mut remaining = polygon.clone();
    let last = proportions.len() - 1;
    for (i, &p) in proportions.iter().enumerate() {
        if i == last {
            sub_areas.push(SubArea {
                polygon: remaining.clone(),
                proportion: p,
                drone_id: i,
            });
            break;
        }
        // The left side of a line running along the sweep direction is the
        // low-offset side, so slices come out in offset order.
        let (left, right) = remaining.slice(sweep_direction, p * total_area)?;
        sub_areas.push(SubArea {
            polygon: left,
            proportion: p,
            drone_id: i,
        });
        remaining = right;
    }

    Ok(DecompositionPlan {
        sweep_direction,
        min_diameter_direction: theta_opt,
        min_diameter: d_min,
        total_area,
        sub_areas,
        failed: Vec::new(),
    })
}

/// Hand the unswept part of a failed drone's area to a neighbouring drone.
///
/// `unswept` must be a piece cut from one end (along the offset axis) of one
/// of the failed drone's regions. The neighbour on that end takes it over;
/// when nothing has been swept yet both ends qualify and the lower id wins.
/// If the preferred side has no live drone the other side is used.
pub fn reassign_on_failure(
    plan: &DecompositionPlan,
    failed: usize,
    unswept: &ConvexPolygon,
) -> Result<DecompositionPlan, DecompError> {
    let axis = plan.offset_axis();
    let (u_lo, u_hi) = unswept.extent_along(axis);
    let centroid = unswept.centroid();

    let (idx, entry) = plan
        .sub_areas
        .iter()
        .enumerate()
        .filter(|(_, s)| s.drone_id == failed)
        .find(|(_, s)| s.polygon.contains(centroid))
        .ok_or(DecompError::UnknownDrone(failed))?;

    let (e_lo, e_hi) = entry.polygon.extent_along(axis);
    let tol = 1e-9 * entry.polygon.scale().max(1.0);
    let at_low_end = (u_lo - e_lo).abs() <= tol;
    let at_high_end = (u_hi - e_hi).abs() <= tol;

    let n = plan.n_drones();
    let mut failed_set = plan.failed.clone();
    if !failed_set.contains(&failed) {
        failed_set.push(failed);
    }
    let live = |id: usize| id < n && !failed_set.contains(&id);
    let lower = (0..failed).rev().find(|&id| live(id));
    let upper = ((failed + 1)..n).find(|&id| live(id));

    let (remainder, preferred, fallback) = match (at_low_end, at_high_end) {
        (true, true) => (None, lower, upper),
        (false, true) => {
            let (below, _) = entry.polygon.split_at(axis, u_lo);
            (below, upper, lower)
        }
        (true, false) => {
            let (_, above) = entry.polygon.split_at(axis, u_hi);
            (above, lower, upper)
        }
        (false, false) => return Err(DecompError::BadUnswept(failed)),
    };
    let heir = preferred
        .or(fallback)
        .ok_or(DecompError::NoLiveNeighbour(failed))?;

    let mut sub_areas = plan.sub_areas.clone();
    match remainder {
        Some(poly) => {
            sub_areas[idx].proportion = poly.area() / plan.total_area;
            sub_areas[idx].polygon = poly;
        }
        None => {
            sub_areas.remove(idx);
        }
    }
    sub_areas.push(SubArea {
        proportion: unswept.area() / plan.total_area,
        polygon: unswept.clone(),
        drone_id: heir,
    });

    Ok(DecompositionPlan {
        sub_areas,
        failed: failed_set,
        ..plan.clone()
    })
}
