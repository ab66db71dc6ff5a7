//! Per-drone mission logic.
//!
//! Each step a controller senses the number of users in its coverage disk,
//! updates its mode, and proposes a velocity. The engine may override the
//! proposal for collision avoidance before integrating positions.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;

use crate::geom::{ConvexPolygon, Disk, Point2, Vec2};
use crate::users::UserPopulation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Transit,
    Sweep,
    Search,
    Return,
    Done,
    Failed,
}

/// How detected clusters are kept from triggering new searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SuppressionRule {
    /// Ignore encounters while the coverage disk overlaps a detected area.
    DiskIntersection,
    /// Users inside detected areas are left out of every count, so they
    /// cannot cause an encounter.
    #[default]
    ExcludeDetected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    /// ε_th: an encounter needs a one-sample increase strictly above this.
    pub epsilon_threshold: f64,
    /// T_s, seconds.
    pub sample_time: f64,
    /// v, m/s.
    pub speed: f64,
    /// R_d, metres.
    pub coverage_radius: f64,
    pub suppression: SuppressionRule,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            epsilon_threshold: 10.0,
            sample_time: 0.5,
            speed: 10.0,
            coverage_radius: 500.0,
            suppression: SuppressionRule::default(),
        }
    }
}

impl SearchParams {
    pub fn step_length(&self) -> f64 {
        self.speed * self.sample_time
    }

    pub fn coverage(&self, at: Point2) -> Disk {
        Disk {
            center: at,
            radius: self.coverage_radius,
        }
    }
}

/// Coefficients of the attractive searcher.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttractiveParams {
    pub inertia: f64,
    pub attraction: f64,
}

impl Default for AttractiveParams {
    fn default() -> Self {
        AttractiveParams {
            inertia: 0.9,
            attraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breakpoint {
    pub position: Point2,
    pub velocity: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub location: Point2,
    pub served: usize,
    pub drone_id: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct ArcSearch {
    points: Vec<Point2>,
    next: usize,
    best: Option<(Point2, usize)>,
    claim: Disk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroneState {
    pub id: usize,
    pub position: Point2,
    pub velocity: Vec2,
    pub mode: Mode,
    /// Waypoints to sweep, in order; `path_cursor` is the next one to reach.
    pub route: Vec<Point2>,
    pub path_cursor: usize,
    pub breakpoint: Option<Breakpoint>,
    pub last_count: usize,
    pub search_log: Vec<(Point2, usize)>,
    /// Baselines: best location seen so far and its count.
    pub best: Option<(Point2, usize)>,
    /// Where the proposed velocity lands exactly on a waypoint this step.
    pub snap: Option<Point2>,
    search: Option<ArcSearch>,
}

impl DroneState {
    /// A sweeping drone parked at the start of `route`.
    pub fn sweeper(id: usize, route: Vec<Point2>, speed: f64) -> Self {
        assert!(!route.is_empty());
        let position = route[0];
        let velocity = route
            .iter()
            .find_map(|p| (*p - position).normalized())
            .map_or(Vec2::new(speed, 0.0), |d| d * speed);
        DroneState {
            id,
            position,
            velocity,
            mode: Mode::Sweep,
            route,
            path_cursor: 1,
            breakpoint: None,
            last_count: 0,
            search_log: Vec::new(),
            best: None,
            snap: None,
            search: None,
        }
    }

    /// A free-roaming searcher at `position` with the given heading.
    pub fn roamer(id: usize, position: Point2, heading: f64, speed: f64) -> Self {
        DroneState {
            id,
            position,
            velocity: Vec2::from_angle(heading) * speed,
            mode: Mode::Sweep,
            route: Vec::new(),
            path_cursor: 0,
            breakpoint: None,
            last_count: 0,
            search_log: Vec::new(),
            best: None,
            snap: None,
            search: None,
        }
    }

    pub fn is_live(&self) -> bool {
        self.mode != Mode::Failed
    }

    pub fn coverage(&self, params: &SearchParams) -> Disk {
        params.coverage(self.position)
    }

    /// Append more waypoints; a finished drone flies to them first.
    pub fn extend_route(&mut self, waypoints: &[Point2]) {
        let fresh = self.path_cursor >= self.route.len();
        self.route.extend_from_slice(waypoints);
        if fresh && self.mode == Mode::Done {
            self.mode = Mode::Transit;
        }
    }

    pub fn fail(&mut self) {
        self.mode = Mode::Failed;
        self.velocity = Vec2::ZERO;
        self.snap = None;
        self.search = None;
        self.breakpoint = None;
    }

    /// Abandon the mission leg and fly back to `bp` before sweeping on.
    pub fn rejoin(&mut self, bp: Breakpoint) {
        if self.mode == Mode::Sweep {
            self.breakpoint = Some(bp);
            self.mode = Mode::Return;
        }
    }

    pub fn active_claim(&self) -> Option<Disk> {
        self.search.as_ref().map(|s| s.claim)
    }

    fn head_to(&mut self, target: Point2, speed: f64, dt: f64) {
        let to = target - self.position;
        let dist = to.norm();
        if let Some(dir) = to.normalized() {
            let v = dir * speed;
            // keep the current velocity when it already points at the target,
            // so a resumed sweep flies with exactly the stored velocity
            if (v - self.velocity).norm() > 1e-9 * speed {
                self.velocity = v;
            }
        }
        self.snap = (dist <= speed * dt).then_some(target);
    }

}

fn arrived(position: Point2, p: Point2) -> bool {
    position.distance(p) <= 1e-9 * (1.0 + p.x.abs().max(p.y.abs()))
}

/// Shared store of detected areas, searches in progress, and published
/// candidates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Blackboard {
    pub detected_areas: Vec<Disk>,
    /// Published candidates, highest count first, ties in discovery order.
    pub candidates: Vec<Candidate>,
    claims: Vec<(usize, Disk)>,
}

impl Blackboard {
    pub fn with_surviving_coverage(disks: Vec<Disk>) -> Self {
        Blackboard {
            detected_areas: disks,
            ..Default::default()
        }
    }

    pub fn publish(&mut self, candidate: Candidate, detected: Disk) {
        let pos = self
            .candidates
            .iter()
            .position(|c| c.served < candidate.served)
            .unwrap_or(self.candidates.len());
        self.candidates.insert(pos, candidate);
        self.detected_areas.push(detected);
        self.release_claim(candidate.drone_id);
    }

    pub fn claim(&mut self, drone: usize, area: Disk) {
        self.release_claim(drone);
        self.claims.push((drone, area));
    }

    pub fn release_claim(&mut self, drone: usize) {
        self.claims.retain(|(d, _)| *d != drone);
    }

    /// True when `disk` overlaps a search that another drone is running.
    pub fn claimed_by_other(&self, drone: usize, disk: &Disk) -> bool {
        self.claims
            .iter()
            .any(|(d, c)| *d != drone && c.intersects(disk))
    }

    pub fn touches_detected(&self, disk: &Disk) -> bool {
        self.detected_areas.iter().any(|d| d.intersects(disk))
    }
}

/// Users a drone sees at `at` under the suppression rule.
pub fn sense(
    population: &UserPopulation,
    board: &Blackboard,
    params: &SearchParams,
    at: Point2,
) -> usize {
    let disk = params.coverage(at);
    match params.suppression {
        SuppressionRule::DiskIntersection => population.count_in_disk(&disk),
        SuppressionRule::ExcludeDetected => {
            population.count_in_disk_excluding(&disk, &board.detected_areas)
        }
    }
}

/// Encounter test: a one-sample increase strictly above the threshold, with
/// the disk-intersection rule also requiring no overlap with detected areas.
pub fn detect_encounter(
    previous_count: usize,
    current_count: usize,
    position: Point2,
    board: &Blackboard,
    params: &SearchParams,
) -> bool {
    let delta = current_count as f64 - previous_count as f64;
    if delta <= params.epsilon_threshold {
        return false;
    }
    match params.suppression {
        SuppressionRule::DiskIntersection => !board.touches_detected(&params.coverage(position)),
        SuppressionRule::ExcludeDetected => true,
    }
}

/// Sample points along the front half of the coverage circle around
/// `center`, from the right of `heading` round to its left, one step apart
/// in arc length.
pub fn arc_points(center: Point2, heading: f64, radius: f64, step: f64) -> Vec<Point2> {
    let n = ((PI * radius / step).floor() as usize) + 1;
    let dphi = step / radius;
    (0..n)
        .map(|k| {
            let phi = heading - FRAC_PI_2 + k as f64 * dphi;
            center + Vec2::from_angle(phi) * radius
        })
        .collect()
}

/// Arc samples pulled onto the area where the arc leaves it. Projection onto
/// a convex set never moves a point away from any point of the set, so the
/// pulled samples cover at least as much of the area.
pub fn arc_points_within(
    area: &ConvexPolygon,
    center: Point2,
    heading: f64,
    radius: f64,
    step: f64,
) -> Vec<Point2> {
    let mut out: Vec<Point2> = Vec::new();
    for p in arc_points(center, heading, radius, step) {
        let q = area.project(p);
        if out.last().is_none_or(|l| l.distance(q) > 1e-9 * radius) {
            out.push(q);
        }
    }
    out
}

/// Best sample on the search arc. Ties keep the earliest sample.
pub fn search_arc(
    encounter_point: Point2,
    heading: f64,
    population: &UserPopulation,
    board: &Blackboard,
    params: &SearchParams,
) -> (Point2, usize) {
    let pts = arc_points_within(
        population.area(),
        encounter_point,
        heading,
        params.coverage_radius,
        params.step_length(),
    );
    let mut best = (pts[0], sense(population, board, params, pts[0]));
    for &p in &pts[1..] {
        let n = sense(population, board, params, p);
        if n > best.1 {
            best = (p, n);
        }
    }
    best
}

/// Top `n_drones` candidate locations by served count.
pub fn finalize_deployment(board: &Blackboard, n_drones: usize) -> Vec<Point2> {
    board
        .candidates
        .iter()
        .take(n_drones)
        .map(|c| c.location)
        .collect()
}

/// One step of the sweep-and-search state machine. Sets `velocity` and
/// `snap`; the caller moves the drone.
pub fn step_sweep_search(
    drone: &mut DroneState,
    board: &mut Blackboard,
    population: &UserPopulation,
    params: &SearchParams,
    dt: f64,
) {
    drone.snap = None;
    if matches!(drone.mode, Mode::Failed) {
        return;
    }
    let count = sense(population, board, params, drone.position);
    let v = params.speed;

    if drone.mode == Mode::Sweep {
        let held = board.claimed_by_other(drone.id, &drone.coverage(params));
        if !held {
            if detect_encounter(drone.last_count, count, drone.position, board, params) {
                start_search(drone, board, population.area(), params);
            }
            drone.last_count = count;
        }
    } else {
        drone.last_count = count;
    }

    loop {
        match drone.mode {
            Mode::Transit | Mode::Sweep => {
                while drone.path_cursor < drone.route.len() && arrived(drone.position, drone.route[drone.path_cursor]) {
                    drone.path_cursor += 1;
                    if drone.mode == Mode::Transit {
                        drone.mode = Mode::Sweep;
                    }
                }
                if drone.path_cursor >= drone.route.len() {
                    drone.mode = Mode::Done;
                    continue;
                }
                let target = drone.route[drone.path_cursor];
                drone.head_to(target, v, dt);
            }
            Mode::Search => {
                let here = drone.position;
                let search = drone.search.as_mut().expect("search state");
                if search.next < search.points.len() && arrived(here, search.points[search.next]) {
                    let n = sense(population, board, params, here);
                    drone.search_log.push((here, n));
                    if search.best.is_none_or(|b| n > b.1) {
                        search.best = Some((here, n));
                    }
                    search.next += 1;
                }
                if search.next >= search.points.len() {
                    let (location, _) = search.best.expect("arc has samples");
                    let served = population.count_in_disk(&params.coverage(location));
                    board.publish(
                        Candidate {
                            location,
                            served,
                            drone_id: drone.id,
                        },
                        params.coverage(location),
                    );
                    drone.search = None;
                    drone.mode = Mode::Return;
                    continue;
                }
                let target = search.points[search.next];
                drone.head_to(target, v, dt);
            }
            Mode::Return => {
                let bp = drone.breakpoint.expect("breakpoint while returning");
                if arrived(drone.position, bp.position) {
                    drone.position = bp.position;
                    drone.velocity = bp.velocity;
                    drone.breakpoint = None;
                    drone.mode = Mode::Sweep;
                    drone.last_count = sense(population, board, params, drone.position);
                    continue;
                }
                drone.head_to(bp.position, v, dt);
            }
            Mode::Done => {
                drone.velocity = Vec2::ZERO;
            }
            Mode::Failed => {}
        }
        break;
    }
}

fn start_search(
    drone: &mut DroneState,
    board: &mut Blackboard,
    area: &ConvexPolygon,
    params: &SearchParams,
) {
    let heading = drone.velocity.angle();
    let points = arc_points_within(
        area,
        drone.position,
        heading,
        params.coverage_radius,
        params.step_length(),
    );
    let claim = Disk {
        center: drone.position,
        radius: 2.0 * params.coverage_radius,
    };
    board.claim(drone.id, claim);
    drone.breakpoint = Some(Breakpoint {
        position: drone.position,
        velocity: drone.velocity,
    });
    drone.search = Some(ArcSearch {
        points,
        next: 0,
        best: None,
        claim,
    });
    drone.mode = Mode::Search;
}

/// Unit normals pointing away from every obstacle the coverage disk touches:
/// area edges first, then other drones' coverage disks.
fn obstacle_normals(
    drone: &DroneState,
    others: &[Point2],
    area: &ConvexPolygon,
    params: &SearchParams,
) -> (Vec<Vec2>, Vec<Vec2>) {
    let r = params.coverage_radius;
    let walls = area
        .edges()
        .filter_map(|(a, b)| {
            let e = b - a;
            let dist = e.cross(drone.position - a) / e.norm();
            (dist <= r).then(|| e.perp_left().normalized().expect("non-degenerate edge"))
        })
        .collect();
    let drones = others
        .iter()
        .filter(|o| drone.position.distance(**o) <= 2.0 * r)
        .filter_map(|o| (drone.position - *o).normalized())
        .collect();
    (walls, drones)
}

/// Pick a new heading, uniformly from the half-circle facing away from the
/// obstacles, when the drone is flying into one. Headings that would still
/// point out of the area are redrawn.
fn bounce<R: Rng + ?Sized>(
    drone: &mut DroneState,
    others: &[Point2],
    area: &ConvexPolygon,
    params: &SearchParams,
    rng: &mut R,
) {
    let (walls, drones) = obstacle_normals(drone, others, area, params);
    let v = drone.velocity;
    if walls.iter().chain(&drones).all(|n| v.dot(*n) >= 0.0) {
        return;
    }
    let sum = |ns: &[Vec2]| ns.iter().fold(Vec2::ZERO, |acc, n| acc + *n).normalized();
    let all: Vec<Vec2> = walls.iter().chain(&drones).copied().collect();
    let Some(away) = sum(&all).or_else(|| sum(&walls)).or(all.first().copied()) else {
        return;
    };
    for _ in 0..32 {
        let phi = away.angle() + rng.random_range(-FRAC_PI_2..FRAC_PI_2);
        let u = Vec2::from_angle(phi);
        if walls.iter().all(|n| u.dot(*n) >= 0.0) {
            drone.velocity = u * params.speed;
            return;
        }
    }
    let inward = sum(&walls).unwrap_or(away);
    drone.velocity = inward * params.speed;
}

fn track_best(drone: &mut DroneState, count: usize) {
    if drone.best.is_none_or(|b| count > b.1) {
        drone.best = Some((drone.position, count));
    }
}

/// Random search: straight flight, new random inward heading on contact.
pub fn step_random_search<R: Rng + ?Sized>(
    drone: &mut DroneState,
    others: &[Point2],
    area: &ConvexPolygon,
    population: &UserPopulation,
    params: &SearchParams,
    rng: &mut R,
) {
    drone.snap = None;
    if drone.mode == Mode::Failed {
        return;
    }
    let count = population.count_in_disk(&drone.coverage(params));
    track_best(drone, count);
    drone.last_count = count;
    bounce(drone, others, area, params, rng);
}

/// Attractive search: heading blends inertia with a pull towards the
/// drone's own best-known location.
#[allow(clippy::too_many_arguments)]
pub fn step_attractive_search<R: Rng + ?Sized>(
    drone: &mut DroneState,
    others: &[Point2],
    area: &ConvexPolygon,
    population: &UserPopulation,
    params: &SearchParams,
    coeffs: &AttractiveParams,
    rng: &mut R,
) {
    drone.snap = None;
    if drone.mode == Mode::Failed {
        return;
    }
    let count = population.count_in_disk(&drone.coverage(params));
    track_best(drone, count);
    drone.last_count = count;
    let (p_best, _) = drone.best.expect("best is tracked");
    let r: f64 = rng.random();
    drone.velocity = attract(drone.velocity, drone.position, p_best, r, coeffs, params.speed);
    bounce(drone, others, area, params, rng);
}

/// `normalize(w v + c1 r (p_best - x)) * speed`, keeping the old heading
/// when the blend vanishes.
pub fn attract(
    velocity: Vec2,
    position: Point2,
    p_best: Point2,
    r: f64,
    coeffs: &AttractiveParams,
    speed: f64,
) -> Vec2 {
    let blend = velocity * coeffs.inertia + (p_best - position) * (coeffs.attraction * r);
    match blend.normalized() {
        Some(u) => u * speed,
        None => velocity,
    }
}
