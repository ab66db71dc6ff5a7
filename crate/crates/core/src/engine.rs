//! Time-stepped simulation of a drone fleet over one scenario.
//!
//! A run advances in steps of one sampling period. Each step every live drone
//! senses and runs its controller (in id order), pairwise collision avoidance
//! may override the proposed velocities, positions are integrated, and the
//! metrics for that instant are recorded. Everything random is drawn from
//! streams seeded by the scenario seed, so a run is a pure function of its
//! scenario.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::avoid::{keep_inside, resolve_step, AgentInput, AvoidanceParams, Maneuver, ManeuverEvent};
use crate::controllers::{
    sense, step_attractive_search, step_random_search, step_sweep_search, AttractiveParams,
    Blackboard, Breakpoint, Candidate, DroneState, Mode, SearchParams,
};
use crate::decomp::{decompose, reassign_on_failure, uniform_proportions, DecompError, DecompositionPlan};
use crate::geom::{ConvexPolygon, Disk, Point2, Vec2};
use crate::sweeppath::generate_zigzag;
use crate::users::{has_errors, validate_scenario, Diagnostic, PopulationError, PopulationSpec, Severity, UserPopulation};

const STREAM_MOTION: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_COVERAGE: u64 = 3;
const COVERAGE_SAMPLES: usize = 10_000;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("scenario is invalid:\n{}", format_diagnostics(.0))]
    Validation(Vec<Diagnostic>),
    #[error(transparent)]
    Population(#[from] PopulationError),
    #[error(transparent)]
    Decomposition(#[from] DecompError),
}

fn format_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|x| format!("  {x}")).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    SweepSearch,
    RandomSearch,
    AttractiveSearch,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::SweepSearch,
        Algorithm::RandomSearch,
        Algorithm::AttractiveSearch,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::SweepSearch => "sweep_search",
            Algorithm::RandomSearch => "random_search",
            Algorithm::AttractiveSearch => "attractive_search",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.label() == s)
    }
}

/// A drone that stops working at a given time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureEvent {
    pub drone_id: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub population_spec: PopulationSpec,
    pub n_drones: usize,
    pub params: SearchParams,
    pub avoidance: AvoidanceParams,
    /// Coverage of ground stations still working; treated as already
    /// detected.
    pub surviving_bs: Vec<Disk>,
    pub algorithm: Algorithm,
    /// Seconds of simulated time.
    pub duration: f64,
    pub seed: u64,
    /// Area proportions per drone; uniform when `None`.
    pub proportions: Option<Vec<f64>>,
    pub overlap: f64,
    pub attractive: AttractiveParams,
    pub failures: Vec<FailureEvent>,
    /// Blur shared positions uniformly within the shared location radius.
    pub position_noise: bool,
    /// Count users covered by several deployed drones once (default) or once
    /// per covering drone.
    pub distinct_served: bool,
}

impl Scenario {
    pub fn area(&self) -> &ConvexPolygon {
        &self.population_spec.area
    }

    pub fn with_seed(&self, seed: u64) -> Scenario {
        Scenario {
            seed,
            ..self.clone()
        }
    }

    pub fn with_algorithm(&self, algorithm: Algorithm) -> Scenario {
        Scenario {
            algorithm,
            ..self.clone()
        }
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.params.sample_time - 1e-9).ceil().max(1.0) as usize
    }

    /// The user population of this scenario's seed.
    pub fn population(&self) -> Result<UserPopulation, PopulationError> {
        UserPopulation::generate(&self.population_spec, self.seed)
    }

    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out =
            validate_scenario(&self.population_spec, self.n_drones, self.params.coverage_radius);
        let mut err = |code: &'static str, message: String| {
            out.push(Diagnostic {
                severity: Severity::Error,
                code,
                message,
            })
        };
        let p = &self.params;
        if self.n_drones == 0 {
            err("no-drones", "at least one drone is required".into());
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            err("bad-duration", format!("duration must be positive, got {}", self.duration));
        }
        for (name, v) in [
            ("sample time", p.sample_time),
            ("speed", p.speed),
            ("coverage radius", p.coverage_radius),
        ] {
            if !(v.is_finite() && v > 0.0) {
                err("bad-parameter", format!("{name} must be positive, got {v}"));
            }
        }
        if !(p.epsilon_threshold.is_finite() && p.epsilon_threshold >= 0.0) {
            err("bad-parameter", format!("threshold must be non-negative, got {}", p.epsilon_threshold));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            err("bad-parameter", format!("overlap must be in [0, 1), got {}", self.overlap));
        }
        if let Err(e) = self.avoidance.validate() {
            err("bad-avoidance", e.to_string());
        }
        if let Err(e) = self.population_spec.validate() {
            err("bad-population", e.to_string());
        }
        if let Some(props) = &self.proportions {
            if props.len() != self.n_drones {
                err(
                    "bad-proportions",
                    format!("{} proportions for {} drones", props.len(), self.n_drones),
                );
            }
        }
        for f in &self.failures {
            if f.drone_id >= self.n_drones {
                err("bad-failure", format!("failure names drone {} of {}", f.drone_id, self.n_drones));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub served_users: usize,
    pub n_candidates: usize,
    /// Smallest distance between two live drones at this instant.
    pub min_separation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub time_series: Vec<Sample>,
    /// Deployment achieving the best served count so far.
    pub final_deployment: Vec<Point2>,
    /// Candidates known at the end, highest count first.
    pub candidates: Vec<Candidate>,
    pub min_pairwise_separation: f64,
    /// Fraction of Monte Carlo points of the area that came within the
    /// coverage radius of some drone.
    pub swept_fraction: f64,
    /// Largest distance of any drone outside the area.
    pub max_outside: f64,
    /// Time at which every live sweeping drone had finished its route.
    pub sweep_completed_at: Option<f64>,
    pub diagnostics: Vec<Diagnostic>,
}

impl RunResult {
    pub fn final_served(&self) -> usize {
        self.time_series.last().map_or(0, |s| s.served_users)
    }
}

/// Users served by deploying drones at the top `n_drones` candidates.
pub fn served_users(
    candidates: &[Candidate],
    n_drones: usize,
    population: &UserPopulation,
    coverage_radius: f64,
    distinct: bool,
) -> usize {
    let mut ranked: Vec<&Candidate> = candidates.iter().collect();
    ranked.sort_by(|a, b| b.served.cmp(&a.served));
    let disks: Vec<Disk> = ranked
        .iter()
        .take(n_drones)
        .map(|c| Disk {
            center: c.location,
            radius: coverage_radius,
        })
        .collect();
    if distinct {
        population.count_in_union(&disks)
    } else {
        disks.iter().map(|d| population.count_in_disk(d)).sum()
    }
}

/// Monte Carlo points of the area still waiting to be covered, bucketed by
/// grid cell.
struct CoverageProbe {
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<Point2>>,
    total: usize,
    radius: f64,
}

impl CoverageProbe {
    fn new(area: &ConvexPolygon, radius: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(STREAM_COVERAGE);
        let bb = area.bounding_box();
        let cell = radius.max(area.scale() / 256.0);
        let nx = ((bb.width() / cell).ceil() as usize).max(1);
        let ny = ((bb.height() / cell).ceil() as usize).max(1);
        let mut probe = CoverageProbe {
            x0: bb.min.x,
            y0: bb.min.y,
            cell,
            nx,
            ny,
            cells: vec![Vec::new(); nx * ny],
            total: 0,
            radius,
        };
        while probe.total < COVERAGE_SAMPLES {
            let p = Point2::new(
                rng.random_range(bb.min.x..=bb.max.x),
                rng.random_range(bb.min.y..=bb.max.y),
            );
            if area.contains(p) {
                let c = probe.cell_index(p.x, p.y);
                probe.cells[c].push(p);
                probe.total += 1;
            }
        }
        probe
    }

    fn col(&self, x: f64) -> usize {
        (((x - self.x0) / self.cell).floor().max(0.0) as usize).min(self.nx - 1)
    }

    fn row(&self, y: f64) -> usize {
        (((y - self.y0) / self.cell).floor().max(0.0) as usize).min(self.ny - 1)
    }

    fn cell_index(&self, x: f64, y: f64) -> usize {
        self.row(y) * self.nx + self.col(x)
    }

    fn cover_segment(&mut self, a: Point2, b: Point2) {
        let r = self.radius;
        let (c0, c1) = (self.col(a.x.min(b.x) - r), self.col(a.x.max(b.x) + r));
        let (r0, r1) = (self.row(a.y.min(b.y) - r), self.row(a.y.max(b.y) + r));
        for row in r0..=r1 {
            for col in c0..=c1 {
                let bucket = &mut self.cells[row * self.nx + col];
                bucket.retain(|q| crate::geom::point_segment_distance(*q, a, b) > r);
            }
        }
    }

    fn fraction(&self) -> f64 {
        let left: usize = self.cells.iter().map(Vec::len).sum();
        1.0 - left as f64 / self.total as f64
    }
}

fn initial_roamers(scenario: &Scenario, rng: &mut ChaCha8Rng) -> Vec<DroneState> {
    let area = scenario.area();
    let bb = area.bounding_box();
    let r = scenario.params.coverage_radius;
    let mut placed: Vec<Point2> = Vec::with_capacity(scenario.n_drones);
    let mut drones = Vec::with_capacity(scenario.n_drones);
    for id in 0..scenario.n_drones {
        // prefer spots whose disk is inside the area and clear of the others,
        // relaxing when the area is too crowded
        let mut chosen = None;
        'relax: for (clearance, spacing) in [(r, 2.0 * r), (0.0, 2.0 * r), (0.0, 0.0)] {
            for _ in 0..10_000 {
                let p = Point2::new(
                    rng.random_range(bb.min.x..=bb.max.x),
                    rng.random_range(bb.min.y..=bb.max.y),
                );
                if area.signed_boundary_distance(p) >= clearance
                    && placed.iter().all(|q| q.distance(p) > spacing)
                {
                    chosen = Some(p);
                    break 'relax;
                }
            }
        }
        let p = chosen.unwrap_or_else(|| area.centroid());
        placed.push(p);
        let heading = rng.random_range(0.0..std::f64::consts::TAU);
        drones.push(DroneState::roamer(id, p, heading, scenario.params.speed));
    }
    drones
}

/// The part of a sweeper's sub-area from its current lap onwards.
fn unswept_region(
    plan: &DecompositionPlan,
    drone: &DroneState,
    params: &SearchParams,
    overlap: f64,
) -> Option<ConvexPolygon> {
    let entry = plan.sub_areas.iter().find(|s| s.drone_id == drone.id)?;
    let axis = plan.offset_axis();
    let (lo, _) = entry.polygon.extent_along(axis);
    let half = params.coverage_radius * (1.0 - overlap);
    let path = generate_zigzag(&entry.polygon, plan.sweep_direction, params.coverage_radius, overlap);
    let here = drone.breakpoint.map_or(drone.position, |b| b.position);
    let o = here.to_vec().dot(axis);
    let lap = path
        .lap_offsets
        .iter()
        .copied()
        .min_by(|a, b| (a - o).abs().total_cmp(&(b - o).abs()))?;
    let cut = lap - half;
    if cut <= lo + 1e-9 * entry.polygon.scale() {
        Some(entry.polygon.clone())
    } else {
        entry.polygon.split_at(axis, cut).1
    }
}

struct Fleet {
    drones: Vec<DroneState>,
    board: Blackboard,
    plan: Option<DecompositionPlan>,
}

/// Run one scenario to completion.
pub fn run(scenario: &Scenario) -> Result<RunResult, EngineError> {
    let diagnostics = scenario.diagnostics();
    if has_errors(&diagnostics) {
        return Err(EngineError::Validation(diagnostics));
    }
    let population = scenario.population()?;
    let params = scenario.params;
    let area = scenario.area().clone();
    let dt = params.sample_time;
    let n = scenario.n_drones;

    let mut motion_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    motion_rng.set_stream(STREAM_MOTION);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    noise_rng.set_stream(STREAM_NOISE);

    let mut fleet = match scenario.algorithm {
        Algorithm::SweepSearch => {
            let props = scenario
                .proportions
                .clone()
                .unwrap_or_else(|| uniform_proportions(n));
            let plan = decompose(&area, &props)?;
            let drones = plan
                .sub_areas
                .iter()
                .map(|s| {
                    let path = generate_zigzag(
                        &s.polygon,
                        plan.sweep_direction,
                        params.coverage_radius,
                        scenario.overlap,
                    );
                    DroneState::sweeper(s.drone_id, path.waypoints, params.speed)
                })
                .collect();
            Fleet {
                drones,
                board: Blackboard::with_surviving_coverage(scenario.surviving_bs.clone()),
                plan: Some(plan),
            }
        }
        _ => Fleet {
            drones: initial_roamers(scenario, &mut motion_rng),
            board: Blackboard::with_surviving_coverage(scenario.surviving_bs.clone()),
            plan: None,
        },
    };

    let mut probe = CoverageProbe::new(&area, params.coverage_radius, scenario.seed);
    for d in &fleet.drones {
        probe.cover_segment(d.position, d.position);
    }

    let mut failures = scenario.failures.clone();
    failures.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.drone_id.cmp(&b.drone_id)));
    let mut next_failure = 0;

    let mut maneuvers: Vec<Option<Maneuver>> = vec![None; n];
    let mut anchors: Vec<Option<Breakpoint>> = vec![None; n];
    let mut events = Vec::new();

    let steps = scenario.steps();
    let mut series = Vec::with_capacity(steps);
    let mut best_served = 0usize;
    let mut best_deployment: Vec<Point2> = Vec::new();
    let mut last_candidates: Option<Vec<Candidate>> = None;
    let mut min_sep_run = f64::INFINITY;
    let mut max_outside: f64 = 0.0;
    let mut sweep_completed_at = None;

    for k in 0..steps {
        let t_now = k as f64 * dt;
        while next_failure < failures.len() && failures[next_failure].time <= t_now {
            let f = failures[next_failure];
            next_failure += 1;
            inject_failure(&mut fleet, f.drone_id, scenario, &mut maneuvers);
        }

        // controllers
        let positions: Vec<Point2> = fleet.drones.iter().map(|d| d.position).collect();
        for i in 0..n {
            if !fleet.drones[i].is_live() {
                continue;
            }
            if maneuvers[i].is_some() {
                let d = &mut fleet.drones[i];
                d.snap = None;
                d.last_count = sense(&population, &fleet.board, &params, d.position);
                continue;
            }
            let others: Vec<Point2> = (0..n)
                .filter(|&j| j != i && fleet.drones[j].is_live())
                .map(|j| positions[j])
                .collect();
            let d = &mut fleet.drones[i];
            match scenario.algorithm {
                Algorithm::SweepSearch => {
                    step_sweep_search(d, &mut fleet.board, &population, &params, dt)
                }
                Algorithm::RandomSearch => {
                    step_random_search(d, &others, &area, &population, &params, &mut motion_rng)
                }
                Algorithm::AttractiveSearch => step_attractive_search(
                    d,
                    &others,
                    &area,
                    &population,
                    &params,
                    &scenario.attractive,
                    &mut motion_rng,
                ),
            }
        }

        // collision avoidance
        let agents: Vec<AgentInput> = fleet
            .drones
            .iter()
            .map(|d| {
                let mut position = d.position;
                if scenario.position_noise && scenario.avoidance.shared_location_radius > 0.0 {
                    let r = scenario.avoidance.shared_location_radius * noise_rng.random::<f64>().sqrt();
                    let phi = noise_rng.random_range(0.0..std::f64::consts::TAU);
                    position += Vec2::from_angle(phi) * r;
                }
                AgentInput {
                    position,
                    mission_velocity: d.velocity,
                    cruise_speed: params.speed,
                    can_maneuver: d.is_live(),
                }
            })
            .collect();
        events.clear();
        let velocities = resolve_step(&agents, &mut maneuvers, &scenario.avoidance, dt, Some(&area), &mut events);
        for ev in &events {
            match *ev {
                ManeuverEvent::Started(i) => {
                    let d = &fleet.drones[i];
                    if d.mode == Mode::Sweep && anchors[i].is_none() {
                        anchors[i] = Some(Breakpoint {
                            position: d.position,
                            velocity: d.velocity,
                        });
                    }
                }
                ManeuverEvent::Ended(i) => {
                    if let Some(bp) = anchors[i].take() {
                        let wrecks: Vec<Point2> = fleet
                            .drones
                            .iter()
                            .filter(|o| o.mode == Mode::Failed)
                            .map(|o| o.position)
                            .collect();
                        let d = &mut fleet.drones[i];
                        if off_track(d.position, bp) {
                            let clearance = scenario.avoidance.safe_distance + scenario.avoidance.target_margin;
                            let bp = track_point(d, bp, &wrecks, clearance);
                            d.rejoin(bp);
                        }
                    }
                }
            }
        }

        // integrate
        for (i, d) in fleet.drones.iter_mut().enumerate() {
            if !d.is_live() {
                continue;
            }
            let before = d.position;
            if let Some(m) = maneuvers[i].as_mut() {
                // The mission velocity is kept so the end of the maneuver is
                // judged on the mission courses. The maneuver records what is
                // actually flown so the next conflict check sees it.
                let v = keep_inside(&area, d.position, velocities[i], dt);
                m.velocity = v;
                d.snap = None;
                d.position += v * dt;
            } else if velocities[i] != d.velocity {
                d.velocity = keep_inside(&area, d.position, velocities[i], dt);
                d.snap = None;
                d.position += d.velocity * dt;
            } else if let Some(target) = d.snap.take() {
                d.position = target;
            } else {
                d.position += d.velocity * dt;
            }
            probe.cover_segment(before, d.position);
            max_outside = max_outside.max(area.distance_outside(d.position));
        }

        // metrics
        let t = (k + 1) as f64 * dt;
        let candidates = current_candidates(&fleet, scenario.algorithm);
        if last_candidates.as_ref() != Some(&candidates) {
            let served = served_users(
                &candidates,
                n,
                &population,
                params.coverage_radius,
                scenario.distinct_served,
            );
            if served > best_served || best_deployment.is_empty() && !candidates.is_empty() {
                best_served = best_served.max(served);
                best_deployment = ranked_locations(&candidates, n);
            }
            last_candidates = Some(candidates);
        }
        let n_candidates = last_candidates.as_ref().map_or(0, Vec::len);
        let min_sep = min_separation(&fleet.drones);
        min_sep_run = min_sep_run.min(min_sep);
        if sweep_completed_at.is_none()
            && scenario.algorithm == Algorithm::SweepSearch
            && fleet
                .drones
                .iter()
                .all(|d| matches!(d.mode, Mode::Done | Mode::Failed))
        {
            sweep_completed_at = Some(t);
        }
        series.push(Sample {
            t,
            served_users: best_served,
            n_candidates,
            min_separation: min_sep,
        });
    }

    Ok(RunResult {
        algorithm: scenario.algorithm,
        seed: scenario.seed,
        time_series: series,
        final_deployment: best_deployment,
        candidates: last_candidates.unwrap_or_default(),
        min_pairwise_separation: min_sep_run,
        swept_fraction: probe.fraction(),
        max_outside,
        sweep_completed_at,
        diagnostics,
    })
}

fn off_track(position: Point2, bp: Breakpoint) -> bool {
    match bp.velocity.normalized() {
        Some(u) => (position - bp.position).cross(u).abs() > 1e-6,
        None => position.distance(bp.position) > 1e-6,
    }
}

/// Point of the interrupted leg nearest `d`, so progress made along the
/// leg during the maneuver is kept.
fn track_point(d: &DroneState, bp: Breakpoint, wrecks: &[Point2], clearance: f64) -> Breakpoint {
    let Some(&target) = d.route.get(d.path_cursor) else {
        return bp;
    };
    let leg = target - bp.position;
    let len2 = leg.norm_sq();
    if len2 == 0.0 {
        return bp;
    }
    let len = len2.sqrt();
    let mut s = ((d.position - bp.position).dot(leg) / len2).clamp(0.0, 1.0);
    // a failed drone on the leg never moves; rejoin beyond it
    let mut ahead: Vec<f64> = wrecks
        .iter()
        .filter(|w| (leg.cross(**w - bp.position) / len).abs() < clearance)
        .map(|w| (*w - bp.position).dot(leg) / len2)
        .collect();
    ahead.sort_by(f64::total_cmp);
    for t in ahead {
        if t + clearance / len > s && t - clearance / len < s {
            s = (t + clearance / len).min(1.0);
        }
    }
    Breakpoint {
        position: bp.position + leg * s,
        velocity: bp.velocity,
    }
}

fn ranked_locations(candidates: &[Candidate], n: usize) -> Vec<Point2> {
    let mut ranked: Vec<&Candidate> = candidates.iter().collect();
    ranked.sort_by(|a, b| b.served.cmp(&a.served));
    ranked.iter().take(n).map(|c| c.location).collect()
}

fn current_candidates(fleet: &Fleet, algorithm: Algorithm) -> Vec<Candidate> {
    match algorithm {
        Algorithm::SweepSearch => fleet.board.candidates.clone(),
        _ => fleet
            .drones
            .iter()
            .filter_map(|d| {
                d.best.filter(|b| b.1 > 0).map(|(location, served)| Candidate {
                    location,
                    served,
                    drone_id: d.id,
                })
            })
            .collect(),
    }
}

fn min_separation(drones: &[DroneState]) -> f64 {
    let live: Vec<Point2> = drones
        .iter()
        .filter(|d| d.is_live())
        .map(|d| d.position)
        .collect();
    let mut best = f64::INFINITY;
    for i in 0..live.len() {
        for j in (i + 1)..live.len() {
            best = best.min(live[i].distance(live[j]));
        }
    }
    best
}

fn inject_failure(
    fleet: &mut Fleet,
    id: usize,
    scenario: &Scenario,
    maneuvers: &mut [Option<Maneuver>],
) {
    if !fleet.drones[id].is_live() {
        return;
    }
    let params = &scenario.params;
    let unswept = match (&fleet.plan, fleet.drones[id].mode) {
        (Some(plan), mode) if mode != Mode::Done => {
            unswept_region(plan, &fleet.drones[id], params, scenario.overlap)
        }
        _ => None,
    };
    fleet.drones[id].fail();
    fleet.board.release_claim(id);
    maneuvers[id] = None;
    let (Some(plan), Some(unswept)) = (fleet.plan.as_ref(), unswept) else {
        return;
    };
    let Ok(new_plan) = reassign_on_failure(plan, id, &unswept) else {
        // no live neighbour: the area stays unswept
        return;
    };
    let heir = new_plan
        .sub_areas
        .last()
        .expect("reassignment appends the handed-over area")
        .drone_id;
    let path = generate_zigzag(&unswept, new_plan.sweep_direction, params.coverage_radius, scenario.overlap);
    fleet.drones[heir].extend_route(&path.waypoints);
    fleet.plan = Some(new_plan);
}

/// Execution strategy for ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    /// Runs on the rayon thread pool when the `parallel` feature is on;
    /// otherwise the same as `Sequential`.
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub algorithm: Algorithm,
    pub base_seed: u64,
    pub runs: Vec<RunResult>,
}

impl EnsembleResult {
    /// `(t, mean served users)` over the runs.
    pub fn mean_curve(&self) -> Vec<(f64, f64)> {
        let Some(first) = self.runs.first() else {
            return Vec::new();
        };
        let k = self.runs.len() as f64;
        (0..first.time_series.len())
            .map(|i| {
                let sum: f64 = self
                    .runs
                    .iter()
                    .map(|r| r.time_series[i].served_users as f64)
                    .sum();
                (first.time_series[i].t, sum / k)
            })
            .collect()
    }

    pub fn mean_final(&self) -> f64 {
        self.mean_curve().last().map_or(0.0, |p| p.1)
    }
}

fn map_runs<T: Send, F>(count: usize, mode: ExecMode, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            (0..count).into_par_iter().map(f).collect()
        }
        _ => (0..count).map(f).collect(),
    }
}

/// `n_runs` runs with seeds `base_seed + i`.
pub fn ensemble(
    scenario: &Scenario,
    n_runs: usize,
    base_seed: u64,
    mode: ExecMode,
) -> Result<EnsembleResult, EngineError> {
    assert!(n_runs >= 1, "an ensemble needs at least one run");
    let runs = map_runs(n_runs, mode, |i| {
        run(&scenario.with_seed(base_seed.wrapping_add(i as u64)))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(EnsembleResult {
        algorithm: scenario.algorithm,
        base_seed,
        runs,
    })
}

/// All three algorithms on the same seeds, so run `i` of each sees the same
/// user population.
pub fn compare(
    scenario: &Scenario,
    n_runs: usize,
    base_seed: u64,
    mode: ExecMode,
) -> Result<Vec<EnsembleResult>, EngineError> {
    assert!(n_runs >= 1, "an ensemble needs at least one run");
    let algos = Algorithm::ALL;
    let flat = map_runs(algos.len() * n_runs, mode, |j| {
        let algo = algos[j / n_runs];
        let seed = base_seed.wrapping_add((j % n_runs) as u64);
        run(&scenario.with_algorithm(algo).with_seed(seed))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let mut it = flat.into_iter();
    Ok(algos
        .iter()
        .map(|&algorithm| EnsembleResult {
            algorithm,
            base_seed,
            runs: it.by_ref().take(n_runs).collect(),
        })
        .collect())
}

pub const RUNS_CSV_HEADER: &str = "algorithm,run,seed,t_s,served_users,n_candidates,min_sep_m";

/// One row per sample per run.
pub fn runs_csv(ensembles: &[EnsembleResult]) -> String {
    let mut out = String::from(RUNS_CSV_HEADER);
    out.push('\n');
    for e in ensembles {
        for (i, r) in e.runs.iter().enumerate() {
            for s in &r.time_series {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    e.algorithm.label(),
                    i,
                    r.seed,
                    s.t,
                    s.served_users,
                    s.n_candidates,
                    fmt_sep(s.min_separation)
                );
            }
        }
    }
    out
}

/// Mean served users per algorithm and time.
pub fn aggregate_csv(ensembles: &[EnsembleResult]) -> String {
    let mut out = String::from("algorithm,t_s,mean_served_users\n");
    for e in ensembles {
        for (t, m) in e.mean_curve() {
            let _ = writeln!(out, "{},{},{:.3}", e.algorithm.label(), t, m);
        }
    }
    out
}

fn fmt_sep(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3}")
    } else {
        String::new()
    }
}
