//! Pairwise collision avoidance from the point of closest approach.
//!
//! For two drones on straight constant-velocity courses, the relative position
//! at closest approach is the pass distance `d_p`. When it is below the safe
//! distance, each drone is given a displacement setpoint that pushes the pass
//! distance apart by a target margin, split in proportion to the other drone's
//! speed.

use thiserror::Error;

use crate::geom::{ConvexPolygon, Point2, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AvoidError {
    #[error("safe distance {d_safe} m must exceed twice the shared location radius {r_s} m")]
    SafeDistanceTooSmall { d_safe: f64, r_s: f64 },
    #[error("{0} must be positive and finite")]
    NonPositive(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeState {
    /// Position of A minus position of B.
    pub d: Vec2,
    /// Velocity of A minus velocity of B.
    pub c: Vec2,
}

impl RelativeState {
    pub fn between(a: (Point2, Vec2), b: (Point2, Vec2)) -> Self {
        RelativeState {
            d: a.0 - b.0,
            c: a.1 - b.1,
        }
    }

    /// Relative speeds below this are rounding noise between drones flying
    /// the same course; treated as zero.
    pub const MIN_RELATIVE_SPEED: f64 = 1e-9;

    fn has_motion(&self) -> bool {
        self.c.norm() > Self::MIN_RELATIVE_SPEED
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvoidanceParams {
    /// r_s: uncertainty radius of shared positions.
    pub shared_location_radius: f64,
    pub safe_distance: f64,
    /// d*_margin: total extra pass distance requested per conflict.
    pub target_margin: f64,
    /// Bound on the norm of a displacement setpoint.
    pub max_correction: f64,
    /// Closest approaches further ahead than this many seconds are ignored.
    pub horizon: f64,
}

impl Default for AvoidanceParams {
    fn default() -> Self {
        AvoidanceParams {
            shared_location_radius: 10.0,
            safe_distance: 50.0,
            target_margin: 100.0,
            max_correction: 200.0,
            horizon: 120.0,
        }
    }
}

impl AvoidanceParams {
    pub fn validate(&self) -> Result<(), AvoidError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(self.shared_location_radius.is_finite() && self.shared_location_radius >= 0.0) {
            return Err(AvoidError::NonPositive("shared location radius"));
        }
        if !positive(self.safe_distance) {
            return Err(AvoidError::NonPositive("safe distance"));
        }
        if !positive(self.target_margin) {
            return Err(AvoidError::NonPositive("target margin"));
        }
        if !positive(self.max_correction) {
            return Err(AvoidError::NonPositive("max correction"));
        }
        if !(self.horizon > 0.0) {
            return Err(AvoidError::NonPositive("look-ahead horizon"));
        }
        if self.safe_distance <= 2.0 * self.shared_location_radius {
            return Err(AvoidError::SafeDistanceTooSmall {
                d_safe: self.safe_distance,
                r_s: self.shared_location_radius,
            });
        }
        Ok(())
    }
}

/// Component of `d` orthogonal to `c`. `None` when `c` is zero.
pub fn pass_distance(rel: &RelativeState) -> Option<Vec2> {
    if !rel.has_motion() {
        return None;
    }
    let c_hat = rel.c.normalized()?;
    Some(rel.d - c_hat * rel.d.dot(c_hat))
}

/// Time until closest approach; negative when the pair is separating.
/// `None` when `c` is zero.
pub fn closest_approach_time(rel: &RelativeState) -> Option<f64> {
    if !rel.has_motion() {
        return None;
    }
    Some(-rel.d.dot(rel.c) / rel.c.norm_sq())
}

/// Displacement setpoints `(u_A, u_B)` for a pair heading into conflict, or
/// `None` when no correction is needed.
pub fn plan_avoidance(
    a: (Point2, Vec2),
    b: (Point2, Vec2),
    params: &AvoidanceParams,
) -> Option<(Vec2, Vec2)> {
    plan_with_share(a, b, params, None)
}

/// As [`plan_avoidance`], with `share_a` of the margin given to `a` instead
/// of the speed-proportional split.
fn plan_with_share(
    a: (Point2, Vec2),
    b: (Point2, Vec2),
    params: &AvoidanceParams,
    share_a: Option<f64>,
) -> Option<(Vec2, Vec2)> {
    let rel = RelativeState::between(a, b);
    let (va, vb) = (a.1, b.1);
    let (sa, sb) = (va.norm(), vb.norm());

    let Some(tau) = closest_approach_time(&rel) else {
        // identical velocities: the gap never changes
        if rel.d.norm() > params.safe_distance {
            return None;
        }
        let dir = rel
            .d
            .normalized()
            .or_else(|| va.perp_left().normalized())
            .unwrap_or(Vec2::new(1.0, 0.0));
        let k = share_a.unwrap_or(0.5);
        let u_a = (va + dir * (params.target_margin * k)).clamp_norm(params.max_correction);
        let u_b = (vb - dir * (params.target_margin * (1.0 - k))).clamp_norm(params.max_correction);
        return Some((u_a, u_b));
    };
    if tau <= 0.0 || tau > params.horizon || sa + sb == 0.0 {
        return None;
    }
    let dp = pass_distance(&rel)?;
    if dp.norm() - params.safe_distance > 0.0 {
        return None;
    }
    let dir = dp
        .normalized()
        .filter(|_| dp.norm() > 1e-12 * rel.d.norm().max(1.0))
        .unwrap_or_else(|| {
            rel.c
                .perp_left()
                .normalized()
                .expect("relative velocity is non-zero here")
        });
    let k = share_a.unwrap_or(sb / (sa + sb));
    let vs_a = dir * (params.target_margin * k);
    let vs_b = -dir * (params.target_margin * (1.0 - k));
    let u_a = (va * tau + vs_a).clamp_norm(params.max_correction);
    let u_b = (vb * tau + vs_b).clamp_norm(params.max_correction);
    Some((u_a, u_b))
}

/// Kinematic input to [`resolve_step`] for one drone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentInput {
    pub position: Point2,
    /// Velocity the mission controller wants this step.
    pub mission_velocity: Vec2,
    /// Speed flown while maneuvering.
    pub cruise_speed: f64,
    /// Failed drones are obstacles but never maneuver.
    pub can_maneuver: bool,
}

/// An avoidance maneuver in progress.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maneuver {
    pub partner: usize,
    pub velocity: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManeuverEvent {
    Started(usize),
    Ended(usize),
}

/// Mirror a velocity off any edge it would cross within `dt`, so a drone
/// pushed towards the boundary turns back into the area at full speed. A step
/// that would still leave ends on the boundary.
pub fn keep_inside(area: &ConvexPolygon, position: Point2, velocity: Vec2, dt: f64) -> Vec2 {
    let mut v = velocity;
    for (a, b) in area.edges() {
        let e = b - a;
        let inward = e.perp_left() * (1.0 / e.norm());
        let depth = e.cross(position - a) / e.norm();
        let vin = v.dot(inward);
        if vin < 0.0 && depth + vin * dt < 0.0 {
            v = v - inward * (2.0 * vin);
        }
    }
    let next = position + v * dt;
    if area.contains(next) {
        v
    } else {
        (area.project(next) - position) * (1.0 / dt)
    }
}

/// One avoidance pass over all drones.
///
/// Velocities in use are the active maneuver velocity if any, else the mission
/// velocity. Pairs in conflict are handled nearest-first; a drone takes at
/// most one correction per step. A maneuver is held until the two mission
/// courses no longer conflict. A pair that
/// would still close below the safe distance within `dt` flies straight
/// apart instead. Returns the velocity each drone flies this step.
pub fn resolve_step(
    agents: &[AgentInput],
    maneuvers: &mut [Option<Maneuver>],
    params: &AvoidanceParams,
    dt: f64,
    area: Option<&ConvexPolygon>,
    events: &mut Vec<ManeuverEvent>,
) -> Vec<Vec2> {
    let fly = |me: usize, v: Vec2| match area {
        Some(area) => keep_inside(area, agents[me].position, v, dt),
        None => v,
    };
    assert_eq!(agents.len(), maneuvers.len());
    let mission: Vec<Vec2> = agents
        .iter()
        .map(|a| if a.can_maneuver { a.mission_velocity } else { Vec2::ZERO })
        .collect();
    let current: Vec<Vec2> = agents
        .iter()
        .zip(maneuvers.iter())
        .zip(&mission)
        .map(|((a, m), v)| match m {
            Some(m) if a.can_maneuver => m.velocity,
            _ => *v,
        })
        .collect();

    let mut conflicts: Vec<(f64, usize, usize, Vec2, Vec2)> = Vec::new();
    for i in 0..agents.len() {
        for j in (i + 1)..agents.len() {
            let a = (agents[i].position, current[i]);
            let b = (agents[j].position, current[j]);
            // a drone that cannot move leaves the whole margin to the other
            let share = match (agents[i].can_maneuver, agents[j].can_maneuver) {
                (true, false) => Some(1.0),
                (false, true) => Some(0.0),
                _ => None,
            };
            if let Some((ua, ub)) = plan_with_share(a, b, params, share) {
                let rel = RelativeState::between(a, b);
                let tau = closest_approach_time(&rel).unwrap_or(0.0);
                conflicts.push((tau, i, j, ua, ub));
            }
        }
    }
    conflicts.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));

    let mut claimed = vec![false; agents.len()];
    let mut out = current.clone();
    for (_, i, j, ua, ub) in conflicts {
        for (me, other, u) in [(i, j, ua), (j, i, ub)] {
            if claimed[me] || !agents[me].can_maneuver {
                continue;
            }
            let Some(dir) = u.normalized() else { continue };
            claimed[me] = true;
            let v = fly(me, dir * agents[me].cruise_speed);
            if maneuvers[me].is_none() {
                events.push(ManeuverEvent::Started(me));
            }
            maneuvers[me] = Some(Maneuver {
                partner: other,
                velocity: v,
            });
            out[me] = v;
        }
    }

    let mut ending = vec![false; agents.len()];
    for me in 0..agents.len() {
        if claimed[me] {
            continue;
        }
        let Some(m) = maneuvers[me] else { continue };
        let p = m.partner;
        let courses_clear = plan_avoidance(
            (agents[me].position, mission[me]),
            (agents[p].position, mission[p]),
            params,
        )
        .is_none();
        if courses_clear || !agents[me].can_maneuver {
            ending[me] = true;
            out[me] = mission[me];
        }
    }

    // near-field guard, closest pairs first
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..agents.len() {
        for j in (i + 1)..agents.len() {
            let next = (agents[j].position + fly(j, out[j]) * dt) - (agents[i].position + fly(i, out[i]) * dt);
            if next.norm() < params.safe_distance {
                pairs.push((agents[i].position.distance(agents[j].position), i, j));
            }
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    let mut escaped = vec![false; agents.len()];
    for (_, i, j) in pairs {
        if escaped[i] || escaped[j] {
            continue;
        }
        let d = agents[j].position - agents[i].position;
        let dir = d
            .normalized()
            .or_else(|| (current[j] - current[i]).perp_left().normalized())
            .unwrap_or(Vec2::new(1.0, 0.0));
        let away = |me: usize, u: Vec2| {
            if agents[me].can_maneuver {
                fly(me, u * agents[me].cruise_speed)
            } else {
                Vec2::ZERO
            }
        };
        let (vi, vj) = (away(i, -dir), away(j, dir));
        // at a wall the reflected escape may close in; hovering always works
        let gap = |a: Vec2, b: Vec2| (d + (b - a) * dt).norm();
        let best = [(vi, vj), (Vec2::ZERO, vj), (vi, Vec2::ZERO)]
            .into_iter()
            .fold((vi, vj), |acc, o| if gap(o.0, o.1) > gap(acc.0, acc.1) { o } else { acc });
        for (me, other, v) in [(i, j, best.0), (j, i, best.1)] {
            if !agents[me].can_maneuver {
                continue;
            }
            escaped[me] = true;
            ending[me] = false;
            if maneuvers[me].is_none() {
                events.push(ManeuverEvent::Started(me));
            }
            maneuvers[me] = Some(Maneuver {
                partner: other,
                velocity: v,
            });
            out[me] = v;
        }
    }

    for me in 0..agents.len() {
        if ending[me] {
            maneuvers[me] = None;
            events.push(ManeuverEvent::Ended(me));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(dx: f64, dy: f64, cx: f64, cy: f64) -> RelativeState {
        RelativeState {
            d: Vec2::new(dx, dy),
            c: Vec2::new(cx, cy),
        }
    }

    #[test]
    fn pass_distance_examples() {
        assert_eq!(pass_distance(&rel(-10.0, 0.0, 2.0, 0.0)), Some(Vec2::ZERO));
        assert_eq!(
            pass_distance(&rel(-10.0, -1.0, 2.0, 0.0)),
            Some(Vec2::new(0.0, -1.0))
        );
        assert_eq!(
            pass_distance(&rel(0.0, 3.0, 5.0, 0.0)),
            Some(Vec2::new(0.0, 3.0))
        );
        assert_eq!(pass_distance(&rel(1.0, 1.0, 0.0, 0.0)), None);
    }

    #[test]
    fn approach_time_examples() {
        let r = rel(-10.0, 0.0, 2.0, 0.0);
        let tau = closest_approach_time(&r).unwrap();
        assert_eq!(tau, 5.0);
        assert_eq!(r.d + r.c * tau, Vec2::ZERO);
        assert_eq!(closest_approach_time(&rel(10.0, 0.0, 2.0, 0.0)), Some(-5.0));
        assert_eq!(closest_approach_time(&rel(0.0, 3.0, 5.0, 0.0)), Some(0.0));
    }

    #[test]
    fn offset_pass_propagates() {
        // A at (-10,-1) moving +x at 2 m/s, B at rest at the origin
        let r = rel(-10.0, -1.0, 2.0, 0.0);
        let tau = closest_approach_time(&r).unwrap();
        assert_eq!(tau, 5.0);
        let at = r.d + r.c * 5.0;
        assert_eq!(at, pass_distance(&r).unwrap());
    }

    #[test]
    fn separating_pair_needs_nothing() {
        let p = AvoidanceParams::default();
        let a = (Point2::new(100.0, 0.0), Vec2::new(10.0, 0.0));
        let b = (Point2::new(0.0, 0.0), Vec2::new(-10.0, 0.0));
        assert_eq!(plan_avoidance(a, b, &p), None);
    }

    #[test]
    fn wide_pass_needs_nothing() {
        let p = AvoidanceParams::default();
        let a = (Point2::new(-500.0, 60.0), Vec2::new(10.0, 0.0));
        let b = (Point2::new(500.0, 0.0), Vec2::new(-10.0, 0.0));
        assert_eq!(plan_avoidance(a, b, &p), None);
    }

    #[test]
    fn head_on_uses_left_perpendicular() {
        let p = AvoidanceParams {
            max_correction: 1e9,
            ..AvoidanceParams::default()
        };
        let a = (Point2::new(-500.0, 0.0), Vec2::new(10.0, 0.0));
        let b = (Point2::new(500.0, 0.0), Vec2::new(-10.0, 0.0));
        let (ua, ub) = plan_avoidance(a, b, &p).unwrap();
        // tau = 50 s; equal speeds split the margin in half
        assert_eq!(ua, Vec2::new(500.0, 50.0));
        assert_eq!(ub, Vec2::new(-500.0, -50.0));
    }

    #[test]
    fn unequal_speeds_split_by_other_speed() {
        let p = AvoidanceParams {
            max_correction: 1e9,
            ..AvoidanceParams::default()
        };
        let a = (Point2::new(0.0, -10.0), Vec2::new(0.0, 30.0));
        let b = (Point2::new(0.0, 0.0), Vec2::new(10.0, 0.0));
        let rel = RelativeState::between(a, b);
        let tau = closest_approach_time(&rel).unwrap();
        let (ua, ub) = plan_avoidance(a, b, &p).unwrap();
        let vs_a = ua - a.1 * tau;
        let vs_b = ub - b.1 * tau;
        assert!((vs_a.norm() - 100.0 * 10.0 / 40.0).abs() < 1e-9);
        assert!((vs_b.norm() - 100.0 * 30.0 / 40.0).abs() < 1e-9);
        assert!((vs_a.norm() + vs_b.norm() - p.target_margin).abs() < 1e-9);
        assert!(vs_a.dot(vs_b) < 0.0);
    }

    #[test]
    fn correction_is_clamped() {
        let p = AvoidanceParams::default();
        let a = (Point2::new(-1000.0, 0.0), Vec2::new(10.0, 0.0));
        let b = (Point2::new(1000.0, 0.0), Vec2::new(-10.0, 0.0));
        let (ua, ub) = plan_avoidance(a, b, &p).unwrap();
        assert!((ua.norm() - 200.0).abs() < 1e-9);
        assert!((ub.norm() - 200.0).abs() < 1e-9);
    }

    #[test]
    fn conflicts_past_the_horizon_are_ignored() {
        let p = AvoidanceParams::default();
        // closest approach 125 s ahead
        let a = (Point2::new(-1250.0, 0.0), Vec2::new(10.0, 0.0));
        let b = (Point2::new(1250.0, 0.0), Vec2::new(-10.0, 0.0));
        assert_eq!(plan_avoidance(a, b, &p), None);
        let wide = AvoidanceParams {
            horizon: 130.0,
            ..p
        };
        assert!(plan_avoidance(a, b, &wide).is_some());
        // parallel courses with rounding-level drift never conflict
        let c = (Point2::new(0.0, 0.0), Vec2::new(1e-12, 10.0));
        let d = (Point2::new(2000.0, 0.0), Vec2::new(0.0, 10.0));
        assert_eq!(plan_avoidance(c, d, &p), None);
    }

    #[test]
    fn parallel_close_pair_pushes_apart() {
        let p = AvoidanceParams::default();
        let a = (Point2::new(0.0, 20.0), Vec2::new(10.0, 0.0));
        let b = (Point2::new(0.0, 0.0), Vec2::new(10.0, 0.0));
        let (ua, ub) = plan_avoidance(a, b, &p).unwrap();
        assert!(ua.dy > 0.0 && ub.dy < 0.0);
        let far = (Point2::new(0.0, 80.0), Vec2::new(10.0, 0.0));
        assert_eq!(plan_avoidance(far, b, &p), None);
        // coincident and stationary: still finite
        let (ua, ub) = plan_avoidance(b, b, &p).unwrap();
        assert!(ua.is_finite() && ub.is_finite());
        let still = (Point2::new(0.0, 0.0), Vec2::ZERO);
        let (ua, ub) = plan_avoidance(still, still, &p).unwrap();
        assert!(ua.is_finite() && ub.is_finite() && ua.norm() > 0.0);
    }

    #[test]
    fn params_validation() {
        assert!(AvoidanceParams::default().validate().is_ok());
        let bad = AvoidanceParams {
            safe_distance: 20.0,
            ..AvoidanceParams::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(AvoidError::SafeDistanceTooSmall { .. })
        ));
    }

    #[test]
    fn head_on_rollout_keeps_distance() {
        let p = AvoidanceParams::default();
        let mut pos = [Point2::new(-1000.0, 0.0), Point2::new(1000.0, 0.0)];
        let mission = [Vec2::new(10.0, 0.0), Vec2::new(-10.0, 0.0)];
        let mut man = [None, None];
        let mut events = Vec::new();
        let mut min_sep = f64::INFINITY;
        for _ in 0..400 {
            let agents: Vec<AgentInput> = (0..2)
                .map(|i| AgentInput {
                    position: pos[i],
                    mission_velocity: mission[i],
                    cruise_speed: 10.0,
                    can_maneuver: true,
                })
                .collect();
            let v = resolve_step(&agents, &mut man, &p, 0.5, None, &mut events);
            for i in 0..2 {
                pos[i] += v[i] * 0.5;
            }
            min_sep = min_sep.min(pos[0].distance(pos[1]));
        }
        assert!(min_sep >= p.safe_distance, "min separation {min_sep}");
        assert!(events.contains(&ManeuverEvent::Started(0)));
        assert!(events.contains(&ManeuverEvent::Ended(0)));
    }
}
