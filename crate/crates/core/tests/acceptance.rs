//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sweepsearch::avoid::{
    closest_approach_time, pass_distance, resolve_step, AgentInput, AvoidanceParams,
    RelativeState,
};
use sweepsearch::channel::{
    coverage_radius, optimal_altitude, p_los, ChannelConfig, Environment,
    DEFAULT_ALTITUDE_BRACKET,
};
use sweepsearch::controllers::{AttractiveParams, SearchParams};
use sweepsearch::decomp::decompose;
use sweepsearch::engine::{
    compare, runs_csv, aggregate_csv, Algorithm, EnsembleResult, ExecMode, Scenario,
};
use sweepsearch::geom::{random_convex_polygon, ConvexPolygon, Disk, Point2, Vec2};
use sweepsearch::users::{has_errors, validate_scenario, PopulationSpec, UserPopulation};

const RUNS: usize = 50;
const DURATION_S: f64 = 6000.0;

fn reference_scenario(n_clusters: usize) -> Scenario {
    Scenario {
        population_spec: PopulationSpec {
            area: ConvexPolygon::rectangle(0.0, 0.0, 10_000.0, 10_000.0).unwrap(),
            n_clusters,
            cluster_radius: 250.0,
            clustered_density: 0.02,
            background_density: 3e-6,
        },
        n_drones: 5,
        params: SearchParams::default(),
        avoidance: AvoidanceParams::default(),
        surviving_bs: vec![],
        algorithm: Algorithm::SweepSearch,
        duration: DURATION_S,
        seed: 0,
        proportions: None,
        overlap: 0.0,
        attractive: AttractiveParams::default(),
        failures: vec![],
        position_noise: false,
        distinct_served: true,
    }
}

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!(
            "criterion {id} {name}: {} ({detail})",
            if pass { "PASS" } else { "FAIL" }
        );
    }
}

fn by_algo(e: &[EnsembleResult], a: Algorithm) -> &EnsembleResult {
    e.iter().find(|x| x.algorithm == a).unwrap()
}

struct ComparisonOutcome {
    end: [f64; 3],
    crossing: Option<f64>,
    advantage_over_random: f64,
}

fn summarize(ensembles: &[EnsembleResult]) -> ComparisonOutcome {
    let s = by_algo(ensembles, Algorithm::SweepSearch).mean_curve();
    let r = by_algo(ensembles, Algorithm::RandomSearch).mean_curve();
    let a = by_algo(ensembles, Algorithm::AttractiveSearch).mean_curve();
    // earliest time after which sweep-and-search never falls behind
    let mut crossing = None;
    for i in (0..s.len()).rev() {
        if s[i].1 >= r[i].1 && s[i].1 >= a[i].1 {
            crossing = Some(s[i].0);
        } else {
            break;
        }
    }
    let end = [s.last().unwrap().1, r.last().unwrap().1, a.last().unwrap().1];
    ComparisonOutcome {
        end,
        crossing,
        advantage_over_random: (end[0] - end[1]) / end[1].max(1.0),
    }
}

/// Every sweep run covers the whole area and finds every cluster whole.
fn sweep_completeness(scenario: &Scenario, e: &EnsembleResult) -> (usize, usize, Vec<String>) {
    let mut swept_ok = 0;
    let mut clusters_ok = 0;
    let mut problems = Vec::new();
    for run in &e.runs {
        if run.swept_fraction == 1.0 {
            swept_ok += 1;
        } else {
            problems.push(format!("seed {} swept {}", run.seed, run.swept_fraction));
        }
        let pop = scenario.with_seed(run.seed).population().unwrap();
        let r_d = scenario.params.coverage_radius;
        let mut all = true;
        for k in 0..pop.cluster_centers().len() {
            let members: Vec<Point2> = pop.cluster_members(k).map(|i| pop.users()[i].position).collect();
            let found = run.candidates.iter().any(|c| {
                members.iter().all(|m| m.distance(c.location) <= r_d)
            });
            if !found {
                all = false;
                let centres = pop.cluster_centers();
                let nearest = centres
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != k)
                    .map(|(_, c)| c.distance(centres[k]))
                    .fold(f64::INFINITY, f64::min);
                problems.push(format!(
                    "seed {} cluster {k} not covered whole, nearest other cluster {nearest:.0} m away",
                    run.seed
                ));
            }
        }
        if all {
            clusters_ok += 1;
        }
    }
    (swept_ok, clusters_ok, problems)
}

fn min_sep_all(ensembles: &[EnsembleResult]) -> f64 {
    ensembles
        .iter()
        .flat_map(|e| e.runs.iter())
        .flat_map(|r| r.time_series.iter())
        .map(|s| s.min_separation)
        .fold(f64::INFINITY, f64::min)
}

/// Width of a point set measured across direction `theta`, straight from the
/// vertex projections.
fn width(points: &[Point2], theta: f64) -> f64 {
    let n = Vec2::from_angle(theta);
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let t = p.to_vec().dot(n);
        (lo.min(t), hi.max(t))
    });
    hi - lo
}

/// Minimum width by a 0.01 degree grid over [0, pi), with the best coarse
/// cells refined by nested local grids down to about 1e-12 rad.
fn grid_min_width(points: &[Point2]) -> f64 {
    let coarse = 18_000;
    let step = PI / coarse as f64;
    let mut cells: Vec<(f64, f64)> = (0..coarse)
        .map(|i| {
            let t = i as f64 * step;
            (width(points, t), t)
        })
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = f64::INFINITY;
    for &(w, centre) in cells.iter().take(8) {
        best = best.min(w);
        let (mut centre, mut half) = (centre, step);
        for _ in 0..4 {
            let samples = 400;
            let (w, t) = (0..=samples)
                .map(|k| {
                    let t = centre - half + 2.0 * half * k as f64 / samples as f64;
                    (width(points, t), t)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .unwrap();
            best = best.min(w);
            centre = t;
            half = 2.0 * half / samples as f64;
        }
    }
    best
}

fn decomposition_suite() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_slice: f64 = 0.0;
    let mut worst_union: f64 = 0.0;
    let mut worst_calipers: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(5..=12);
        let radius = rng.random_range(100.0..5000.0);
        let poly = random_convex_polygon(&mut rng, n, radius);
        let k = rng.random_range(2..=8);
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let sum: f64 = raw.iter().sum();
        let props: Vec<f64> = raw.iter().map(|p| p / sum).collect();
        let plan = decompose(&poly, &props).unwrap();
        let total = poly.area();
        let mut union = 0.0;
        for (s, p) in plan.sub_areas.iter().zip(&props) {
            let a = s.polygon.area();
            union += a;
            worst_slice = worst_slice.max((a - p * total).abs() / (p * total));
        }
        worst_union = worst_union.max((union - total).abs() / total);
        let (_, d_min) = poly.min_diameter();
        let grid = grid_min_width(poly.vertices());
        worst_calipers = worst_calipers.max((grid - d_min) / d_min);
        if d_min > grid * (1.0 + 1e-12) {
            worst_calipers = f64::INFINITY;
        }
    }
    let pass = worst_slice <= 1e-6 && worst_union <= 1e-6 && worst_calipers <= 1e-6;
    (
        pass,
        format!(
            "max slice error {worst_slice:.2e}, union error {worst_union:.2e}, calipers vs grid {worst_calipers:.2e}"
        ),
    )
}

fn channel_suite() -> (bool, String) {
    let cfg = ChannelConfig::default();
    let mut details = Vec::new();
    let mut pass = true;
    for env in [Environment::urban(), Environment::suburban()] {
        let radii: Vec<f64> = (10..=10_000)
            .map(|h| coverage_radius(h as f64, &env, &cfg).unwrap().radius)
            .collect();
        let peaks = (1..radii.len() - 1)
            .filter(|&i| radii[i] > radii[i - 1] && radii[i] >= radii[i + 1])
            .count();
        let grid_h = 10 + (0..radii.len())
            .max_by(|&a, &b| radii[a].total_cmp(&radii[b]).then(b.cmp(&a)))
            .unwrap();
        let (h_star, _) = optimal_altitude(&env, &cfg, DEFAULT_ALTITUDE_BRACKET).unwrap();
        let r = |h: f64| coverage_radius(h, &env, &cfg).unwrap().radius;
        let slope = (r(h_star + 1.0) - r(h_star - 1.0)) / 2.0;
        // non-decreasing everywhere; strictly increasing until it rounds to
        // its limit
        let los: Vec<f64> = (1..=2000)
            .map(|h| p_los(h as f64, 300.0, &env).unwrap())
            .collect();
        let los_monotone = los.windows(2).all(|w| w[1] >= w[0])
            && los.windows(2).take(1000).all(|w| w[1] > w[0]);
        let ok = peaks == 1
            && (h_star - grid_h as f64).abs() <= 1.0
            && slope.abs() < 1e-3
            && los_monotone;
        pass &= ok;
        details.push(format!(
            "{}: h* {h_star:.1} m vs grid {grid_h} m, dr/dh {slope:.1e}, peaks {peaks}",
            env.name
        ));
    }
    (pass, details.join("; "))
}

fn avoidance_suite() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut ortho_ok = true;
    let mut tau_ok = true;
    for _ in 0..10_000 {
        let d = Vec2::new(rng.random_range(-2000.0..2000.0), rng.random_range(-2000.0..2000.0));
        let c = Vec2::new(rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0));
        if c.norm() == 0.0 {
            continue;
        }
        let rel = RelativeState { d, c };
        let dp = pass_distance(&rel).unwrap();
        ortho_ok &= dp.dot(c).abs() <= 1e-9 * dp.norm().max(1e-300) * c.norm() || dp.norm() == 0.0;
        let tau = closest_approach_time(&rel).unwrap();
        let best = (d + c * tau).norm();
        for k in -50..=50 {
            let t = tau + k as f64 * 0.5;
            tau_ok &= best <= (d + c * t).norm() + 1e-9 * d.norm().max(1.0);
        }
    }
    let params = AvoidanceParams::default();
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        worst = worst.min(conflict_rollout(&mut rng, &params));
    }
    let pass = ortho_ok && tau_ok && worst >= params.safe_distance;
    (
        pass,
        format!("orthogonality {ortho_ok}, tau minimises {tau_ok}, worst rollout separation {worst:.2} m"),
    )
}

fn conflict_rollout(rng: &mut ChaCha8Rng, params: &AvoidanceParams) -> f64 {
    let meet = Point2::new(rng.random_range(-500.0..500.0), rng.random_range(-500.0..500.0));
    let t_meet = rng.random_range(20.0..150.0);
    let speeds = [rng.random_range(5.0..20.0), rng.random_range(5.0..20.0)];
    let h0 = rng.random_range(0.0..std::f64::consts::TAU);
    let h1 = h0 + rng.random_range(0.3..(std::f64::consts::TAU - 0.3));
    let miss = Vec2::from_angle(rng.random_range(0.0..std::f64::consts::TAU))
        * rng.random_range(0.0..params.safe_distance * 0.9);
    let mission = [Vec2::from_angle(h0) * speeds[0], Vec2::from_angle(h1) * speeds[1]];
    let mut pos = [meet - mission[0] * t_meet + miss, meet - mission[1] * t_meet];
    let mut man = [None, None];
    let mut events = Vec::new();
    let dt = 0.5;
    let mut min_sep = pos[0].distance(pos[1]);
    for _ in 0..((2.0 * t_meet + 60.0) / dt) as usize {
        let agents: Vec<AgentInput> = (0..2)
            .map(|i| AgentInput {
                position: pos[i],
                mission_velocity: mission[i],
                cruise_speed: speeds[i],
                can_maneuver: true,
            })
            .collect();
        let v = resolve_step(&agents, &mut man, params, dt, None, &mut events);
        for i in 0..2 {
            pos[i] += v[i] * dt;
        }
        min_sep = min_sep.min(pos[0].distance(pos[1]));
    }
    min_sep
}

fn population_suite() -> (bool, String) {
    let spec = reference_scenario(1).population_spec;
    let mut cluster_sum = 0usize;
    let mut background_sum = 0usize;
    for seed in 0..1000 {
        let pop = UserPopulation::generate(&spec, 10_000 + seed).unwrap();
        let clustered = pop.users().iter().filter(|u| u.cluster.is_some()).count();
        cluster_sum += clustered;
        background_sum += pop.len() - clustered;
    }
    let mean_c = cluster_sum as f64 / 1000.0;
    let mean_b = background_sum as f64 / 1000.0;
    let expect_c = 0.02 * PI * 250.0 * 250.0;
    let expect_b = 3e-6 * 1e8;
    let means_ok = (mean_c - expect_c).abs() / expect_c <= 0.02
        && (mean_b - expect_b).abs() / expect_b <= 0.02;

    let pop = UserPopulation::generate(&reference_scenario(5).population_spec, 77).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut grid_ok = true;
    for q in 0..1000 {
        let center = if q % 2 == 0 {
            let c = pop.cluster_centers()[q % 5];
            Point2::new(c.x + rng.random_range(-800.0..800.0), c.y + rng.random_range(-800.0..800.0))
        } else {
            Point2::new(rng.random_range(-500.0..10_500.0), rng.random_range(-500.0..10_500.0))
        };
        let disk = Disk::new(center, rng.random_range(1.0..1500.0)).unwrap();
        let brute = pop
            .users()
            .iter()
            .filter(|u| {
                let dx = u.position.x - center.x;
                let dy = u.position.y - center.y;
                dx * dx + dy * dy <= disk.radius * disk.radius
            })
            .count();
        grid_ok &= pop.count_in_disk(&disk) == brute;
    }

    let base = reference_scenario(2).population_spec;
    let clean = validate_scenario(&base, 5, 500.0).is_empty();
    let wide = PopulationSpec {
        cluster_radius: 300.0,
        ..base.clone()
    };
    let wide_ok = validate_scenario(&wide, 5, 500.0)
        .iter()
        .any(|d| d.code == "cluster-too-wide")
        && has_errors(&validate_scenario(&wide, 5, 500.0));
    let small = PopulationSpec {
        area: ConvexPolygon::rectangle(0.0, 0.0, 1000.0, 1000.0).unwrap(),
        ..base.clone()
    };
    let small_ok = validate_scenario(&small, 5, 500.0)
        .iter()
        .any(|d| d.code == "area-too-small");
    let noisy = PopulationSpec {
        background_density: 5e-5,
        ..base
    };
    let noisy_ok = validate_scenario(&noisy, 5, 500.0)
        .iter()
        .any(|d| d.code == "background-dominates");
    let validator_ok = clean && wide_ok && small_ok && noisy_ok;
    (
        means_ok && grid_ok && validator_ok,
        format!(
            "cluster mean {mean_c:.1} vs {expect_c:.1}, background mean {mean_b:.1} vs {expect_b:.0}, grid == brute force {grid_ok}, validator {validator_ok}"
        ),
    )
}

fn main() {
    let mut report = Report { failures: 0 };
    let started = Instant::now();

    let two_scenario = reference_scenario(2);
    let five_scenario = reference_scenario(5);
    let two = compare(&two_scenario, RUNS, 1000, ExecMode::Parallel).unwrap();
    let five = compare(&five_scenario, RUNS, 2000, ExecMode::Parallel).unwrap();
    let two_out = summarize(&two);
    let five_out = summarize(&five);

    let c1 = two_out.end[0] >= two_out.end[1] && two_out.end[0] >= two_out.end[2] && two_out.crossing.is_some();
    report.line(
        1,
        "two-cluster comparison",
        c1,
        format!(
            "end means sweep {:.0}, random {:.0}, attractive {:.0}; sweep stays ahead from t = {}",
            two_out.end[0],
            two_out.end[1],
            two_out.end[2],
            two_out.crossing.map_or("never".into(), |t| format!("{t} s"))
        ),
    );
    let c2 = five_out.end[0] >= five_out.end[1]
        && five_out.end[0] >= five_out.end[2]
        && five_out.crossing.is_some()
        && five_out.advantage_over_random < two_out.advantage_over_random;
    report.line(
        2,
        "five-cluster comparison",
        c2,
        format!(
            "end means sweep {:.0}, random {:.0}, attractive {:.0}; sweep stays ahead from t = {}; relative advantage over random {:.3} (five clusters) vs {:.3} (two clusters)",
            five_out.end[0],
            five_out.end[1],
            five_out.end[2],
            five_out.crossing.map_or("never".into(), |t| format!("{t} s")),
            five_out.advantage_over_random,
            two_out.advantage_over_random
        ),
    );

    let (swept_two, whole_two, misses_two) = sweep_completeness(&two_scenario, by_algo(&two, Algorithm::SweepSearch));
    let (swept_five, whole_five, misses_five) = sweep_completeness(&five_scenario, by_algo(&five, Algorithm::SweepSearch));
    let c3 = swept_two == RUNS && swept_five == RUNS && whole_two == RUNS && whole_five == RUNS;
    let problems: Vec<String> = misses_two.into_iter().chain(misses_five).collect();
    report.line(
        3,
        "sweep completeness",
        c3,
        format!(
            "fully swept {}/{} runs, all clusters found whole {}/{} runs{}",
            swept_two + swept_five,
            2 * RUNS,
            whole_two + whole_five,
            2 * RUNS,
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    );

    let (c4, d4) = decomposition_suite();
    report.line(4, "decomposition", c4, d4);
    let (c5, d5) = channel_suite();
    report.line(5, "channel", c5, d5);
    let (c6a, d6) = avoidance_suite();
    let ens_sep = min_sep_all(&two).min(min_sep_all(&five));
    let c6 = c6a && ens_sep >= AvoidanceParams::default().safe_distance;
    report.line(
        6,
        "collision avoidance",
        c6,
        format!("{d6}; smallest separation in the ensembles {ens_sep:.2} m"),
    );
    let (c7, d7) = population_suite();
    report.line(7, "population", c7, d7);

    let replay_scenario = reference_scenario(2);
    let first = compare(&replay_scenario, 2, 31, ExecMode::Sequential).unwrap();
    let second = compare(&replay_scenario, 2, 31, ExecMode::Parallel).unwrap();
    let c8 = runs_csv(&first) == runs_csv(&second) && aggregate_csv(&first) == aggregate_csv(&second);
    report.line(8, "determinism", c8, "sequential and parallel replays of the same seeds compared byte for byte".into());

    println!(
        "{} of 8 criteria passed in {:.0} s",
        8 - report.failures,
        started.elapsed().as_secs_f64()
    );
    if report.failures > 0 {
        std::process::exit(1);
    }
}
