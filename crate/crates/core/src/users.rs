//! Synthetic user populations and disk counting.
//!
//! Users are static points. Clustered users come from a Poisson number of
//! uniform draws in a disk around each cluster centre; background users are a
//! Poisson number of uniform draws over the whole area.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::geom::{ConvexPolygon, Disk, Point2};

const MAX_CENTER_DRAWS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PopulationError {
    #[error("invalid population spec: {0}")]
    InvalidSpec(String),
    #[error("cluster disk of radius {0} m does not fit in the area after {1} draws")]
    ClusterDoesNotFit(f64, usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpec {
    pub area: ConvexPolygon,
    pub n_clusters: usize,
    /// R_c, metres.
    pub cluster_radius: f64,
    /// λ_c, users per square metre inside a cluster disk.
    pub clustered_density: f64,
    /// λ_nc, users per square metre over the whole area.
    pub background_density: f64,
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<(), PopulationError> {
        let bad = |what: &str, v: f64| {
            Err(PopulationError::InvalidSpec(format!(
                "{what} must be finite and non-negative, got {v}"
            )))
        };
        if !(self.cluster_radius.is_finite() && self.cluster_radius > 0.0) {
            return Err(PopulationError::InvalidSpec(format!(
                "cluster radius must be positive, got {}",
                self.cluster_radius
            )));
        }
        if !(self.clustered_density.is_finite() && self.clustered_density >= 0.0) {
            return bad("clustered density", self.clustered_density);
        }
        if !(self.background_density.is_finite() && self.background_density >= 0.0) {
            return bad("background density", self.background_density);
        }
        Ok(())
    }

    /// Expected number of users per cluster, λ_c π R_c².
    pub fn mean_cluster_size(&self) -> f64 {
        self.clustered_density * PI * self.cluster_radius * self.cluster_radius
    }

    /// Expected number of background users, λ_nc A_p.
    pub fn mean_background(&self) -> f64 {
        self.background_density * self.area.area()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct User {
    pub position: Point2,
    pub cluster: Option<u32>,
}

/// Uniform grid over a bounding box with users bucketed per cell in
/// row-major order, so a run of cells in one row is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
struct GridIndex {
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    /// `starts[c]..starts[c + 1]` indexes `xs`/`ys`/`ids` for cell `c`.
    starts: Vec<u32>,
    xs: Vec<f64>,
    ys: Vec<f64>,
    ids: Vec<u32>,
}

impl GridIndex {
    fn build(users: &[User], area: &ConvexPolygon, cell: f64) -> Self {
        let bb = area.bounding_box();
        let nx = ((bb.width() / cell).ceil() as usize).max(1);
        let ny = ((bb.height() / cell).ceil() as usize).max(1);
        let mut index = GridIndex {
            x0: bb.min.x,
            y0: bb.min.y,
            cell,
            nx,
            ny,
            starts: vec![0; nx * ny + 1],
            xs: vec![0.0; users.len()],
            ys: vec![0.0; users.len()],
            ids: vec![0; users.len()],
        };
        let cells: Vec<usize> = users
            .iter()
            .map(|u| index.cell_of(u.position))
            .collect();
        for &c in &cells {
            index.starts[c + 1] += 1;
        }
        for c in 0..nx * ny {
            index.starts[c + 1] += index.starts[c];
        }
        let mut fill = index.starts.clone();
        for (i, (u, &c)) in users.iter().zip(&cells).enumerate() {
            let slot = fill[c] as usize;
            fill[c] += 1;
            index.xs[slot] = u.position.x;
            index.ys[slot] = u.position.y;
            index.ids[slot] = i as u32;
        }
        index
    }

    fn col(&self, x: f64) -> usize {
        (((x - self.x0) / self.cell).floor().max(0.0) as usize).min(self.nx - 1)
    }

    fn row(&self, y: f64) -> usize {
        (((y - self.y0) / self.cell).floor().max(0.0) as usize).min(self.ny - 1)
    }

    fn cell_of(&self, p: Point2) -> usize {
        self.row(p.y) * self.nx + self.col(p.x)
    }

    /// Calls `emit(slot_range, fully_inside)` for every row run of cells
    /// that can intersect the disk.
    fn visit_disk(&self, disk: &Disk, mut emit: impl FnMut(std::ops::Range<usize>, bool)) {
        let c = disk.center;
        let r = disk.radius;
        if self.xs.is_empty() {
            return;
        }
        let r_in = r * (1.0 - 1e-12);
        let r_in_sq = r_in * r_in;
        let row_lo = self.row(c.y - r);
        let row_hi = self.row(c.y + r);
        let col_lo = self.col(c.x - r);
        let col_hi = self.col(c.x + r);
        for row in row_lo..=row_hi {
            let y_lo = self.y0 + row as f64 * self.cell;
            let y_hi = y_lo + self.cell;
            // the farthest y of this row from the centre bounds the fully
            // inside columns
            let dy_far = (c.y - y_lo).abs().max((y_hi - c.y).abs());
            let base = row * self.nx;
            let (in_lo, in_hi) = if dy_far < r_in {
                let half = (r_in_sq - dy_far * dy_far).sqrt();
                let first = ((c.x - half - self.x0) / self.cell).ceil();
                let last = ((c.x + half - self.x0) / self.cell).floor() - 1.0;
                (first, last)
            } else {
                (1.0, 0.0)
            };
            let in_lo = in_lo.max(col_lo as f64);
            let in_hi = in_hi.min(col_hi as f64);
            if in_lo <= in_hi {
                let a = in_lo as usize;
                let b = in_hi as usize;
                if col_lo < a {
                    emit(self.slots(base + col_lo, base + a), false);
                }
                emit(self.slots(base + a, base + b + 1), true);
                if b < col_hi {
                    emit(self.slots(base + b + 1, base + col_hi + 1), false);
                }
            } else {
                emit(self.slots(base + col_lo, base + col_hi + 1), false);
            }
        }
    }

    fn slots(&self, cell_from: usize, cell_to: usize) -> std::ops::Range<usize> {
        self.starts[cell_from] as usize..self.starts[cell_to] as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserPopulation {
    users: Vec<User>,
    cluster_centers: Vec<Point2>,
    cluster_radius: f64,
    area: ConvexPolygon,
    index: GridIndex,
}

impl UserPopulation {
    /// Default grid cell: fine enough that most cells straddling a coverage
    /// disk are either fully in or fully out.
    pub fn default_cell_size(area: &ConvexPolygon) -> f64 {
        (area.scale() / 400.0).max(1e-6)
    }

    pub fn from_users(
        users: Vec<User>,
        cluster_centers: Vec<Point2>,
        cluster_radius: f64,
        area: ConvexPolygon,
    ) -> Self {
        let index = GridIndex::build(&users, &area, Self::default_cell_size(&area));
        UserPopulation {
            users,
            cluster_centers,
            cluster_radius,
            area,
            index,
        }
    }

    /// Rebuild the spatial index with a different cell size.
    pub fn with_cell_size(mut self, cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite());
        self.index = GridIndex::build(&self.users, &self.area, cell);
        self
    }

    pub fn generate(spec: &PopulationSpec, seed: u64) -> Result<Self, PopulationError> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let area = &spec.area;
        let bb = area.bounding_box();
        let rc = spec.cluster_radius;

        let mut centers = Vec::with_capacity(spec.n_clusters);
        for _ in 0..spec.n_clusters {
            let mut found = None;
            for _ in 0..MAX_CENTER_DRAWS {
                let p = uniform_in_box(&mut rng, bb.min, bb.max);
                if area.signed_boundary_distance(p) >= rc {
                    found = Some(p);
                    break;
                }
            }
            centers.push(found.ok_or(PopulationError::ClusterDoesNotFit(rc, MAX_CENTER_DRAWS))?);
        }

        let mut users = Vec::new();
        let cluster_mean = spec.mean_cluster_size();
        for (i, &c) in centers.iter().enumerate() {
            let n = poisson(&mut rng, cluster_mean);
            users.reserve(n);
            for _ in 0..n {
                let r = rc * rng.random::<f64>().sqrt();
                let t = rng.random_range(0.0..2.0 * PI);
                let (s, co) = t.sin_cos();
                users.push(User {
                    position: Point2::new(c.x + r * co, c.y + r * s),
                    cluster: Some(i as u32),
                });
            }
        }
        let n_bg = poisson(&mut rng, spec.mean_background());
        for _ in 0..n_bg {
            let p = loop {
                let p = uniform_in_box(&mut rng, bb.min, bb.max);
                if area.contains(p) {
                    break p;
                }
            };
            users.push(User {
                position: p,
                cluster: None,
            });
        }
        Ok(Self::from_users(users, centers, rc, area.clone()))
    }

    pub fn users(&self) -> &[User] {
        &self.users
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn cluster_centers(&self) -> &[Point2] {
        &self.cluster_centers
    }

    pub fn cluster_radius(&self) -> f64 {
        self.cluster_radius
    }

    pub fn area(&self) -> &ConvexPolygon {
        &self.area
    }

    /// Indices of the members of cluster `id`.
    pub fn cluster_members(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.users
            .iter()
            .enumerate()
            .filter(move |(_, u)| u.cluster == Some(id as u32))
            .map(|(i, _)| i)
    }

    /// Number of users at distance ≤ radius from the centre.
    pub fn count_in_disk(&self, disk: &Disk) -> usize {
        let ix = &self.index;
        let (cx, cy) = (disk.center.x, disk.center.y);
        let r2 = disk.radius * disk.radius;
        let mut total = 0;
        ix.visit_disk(disk, |range, inside| {
            if inside {
                total += range.len();
            } else {
                total += ix.xs[range.clone()]
                    .iter()
                    .zip(&ix.ys[range])
                    .filter(|(x, y)| {
                        let dx = *x - cx;
                        let dy = *y - cy;
                        dx * dx + dy * dy <= r2
                    })
                    .count();
            }
        });
        total
    }

    /// Number of users in `disk` that lie in none of `excluded`.
    pub fn count_in_disk_excluding(&self, disk: &Disk, excluded: &[Disk]) -> usize {
        let relevant: Vec<&Disk> = excluded.iter().filter(|e| e.intersects(disk)).collect();
        if relevant.is_empty() {
            return self.count_in_disk(disk);
        }
        let mut n = 0;
        self.for_each_in_disk(disk, |i| {
            let p = self.users[i].position;
            if !relevant.iter().any(|e| e.contains(p)) {
                n += 1;
            }
        });
        n
    }

    /// Calls `f` with the index of every user in the disk.
    pub fn for_each_in_disk(&self, disk: &Disk, mut f: impl FnMut(usize)) {
        let ix = &self.index;
        let (cx, cy) = (disk.center.x, disk.center.y);
        let r2 = disk.radius * disk.radius;
        ix.visit_disk(disk, |range, inside| {
            for slot in range {
                if inside || {
                    let dx = ix.xs[slot] - cx;
                    let dy = ix.ys[slot] - cy;
                    dx * dx + dy * dy <= r2
                } {
                    f(ix.ids[slot] as usize);
                }
            }
        });
    }

    /// Number of distinct users inside the union of the disks.
    pub fn count_in_union(&self, disks: &[Disk]) -> usize {
        let mut n = 0;
        for (k, d) in disks.iter().enumerate() {
            let earlier: Vec<&Disk> = disks[..k].iter().filter(|e| e.intersects(d)).collect();
            if earlier.is_empty() {
                n += self.count_in_disk(d);
            } else {
                self.for_each_in_disk(d, |i| {
                    let p = self.users[i].position;
                    if !earlier.iter().any(|e| e.contains(p)) {
                        n += 1;
                    }
                });
            }
        }
        n
    }

    /// `x_m,y_m,cluster_id` rows; background users have an empty id.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_m,y_m,cluster_id\n");
        for u in &self.users {
            match u.cluster {
                Some(c) => writeln!(out, "{},{},{}", u.position.x, u.position.y, c),
                None => writeln!(out, "{},{},", u.position.x, u.position.y),
            }
            .expect("writing to a String cannot fail");
        }
        out
    }

    /// Parse the output of [`UserPopulation::to_csv`]. Cluster centres are
    /// not part of the format and come back empty.
    pub fn from_csv(
        text: &str,
        cluster_radius: f64,
        area: ConvexPolygon,
    ) -> Result<Self, PopulationError> {
        let mut users = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("x_m")) {
                continue;
            }
            let err = |message: String| PopulationError::Parse {
                line: line_no,
                message,
            };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(err(format!("expected 3 fields, found {}", fields.len())));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(format!("bad coordinate {s:?}")))
            };
            let x = num(fields[0])?;
            let y = num(fields[1])?;
            let cluster = match fields[2].trim() {
                "" => None,
                s => Some(
                    s.parse::<u32>()
                        .map_err(|_| err(format!("bad cluster id {s:?}")))?,
                ),
            };
            users.push(User {
                position: Point2::new(x, y),
                cluster,
            });
        }
        Ok(Self::from_users(users, Vec::new(), cluster_radius, area))
    }
}

fn uniform_in_box<R: Rng + ?Sized>(rng: &mut R, min: Point2, max: Point2) -> Point2 {
    Point2::new(
        rng.random_range(min.x..=max.x),
        rng.random_range(min.y..=max.y),
    )
}

fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{level} [{}]: {}", self.code, self.message)
    }
}

/// Check the scenario against the operating regime the search relies on.
pub fn validate_scenario(
    spec: &PopulationSpec,
    n_drones: usize,
    coverage_radius: f64,
) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if 2.0 * spec.cluster_radius > coverage_radius {
        out.push(Diagnostic {
            severity: Severity::Error,
            code: "cluster-too-wide",
            message: format!(
                "cluster diameter {} m exceeds the coverage radius {} m, so one drone may not cover a whole cluster",
                2.0 * spec.cluster_radius,
                coverage_radius
            ),
        });
    }
    let area = spec.area.area();
    let covered = n_drones as f64 * PI * coverage_radius * coverage_radius;
    if area < 10.0 * covered {
        out.push(Diagnostic {
            severity: Severity::Warning,
            code: "area-too-small",
            message: format!(
                "area {area:.0} m² is only {:.2} times the combined coverage of {n_drones} drones",
                area / covered
            ),
        });
    }
    let clustered = spec.n_clusters as f64 * spec.mean_cluster_size();
    let background = spec.mean_background();
    if background > 0.2 * clustered {
        out.push(Diagnostic {
            severity: Severity::Warning,
            code: "background-dominates",
            message: format!(
                "expected background users {background:.0} exceed 20% of expected clustered users {clustered:.0}"
            ),
        });
    }
    out
}

pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(|d| d.severity == Severity::Error)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_spec(side: f64) -> PopulationSpec {
        PopulationSpec {
            area: ConvexPolygon::rectangle(0.0, 0.0, side, side).unwrap(),
            n_clusters: 2,
            cluster_radius: 250.0,
            clustered_density: 0.02,
            background_density: 3e-6,
        }
    }

    fn brute(pop: &UserPopulation, disk: &Disk) -> usize {
        pop.users()
            .iter()
            .filter(|u| {
                let dx = u.position.x - disk.center.x;
                let dy = u.position.y - disk.center.y;
                dx * dx + dy * dy <= disk.radius * disk.radius
            })
            .count()
    }

    #[test]
    fn empty_population() {
        let mut spec = square_spec(1000.0);
        spec.n_clusters = 0;
        spec.background_density = 0.0;
        let pop = UserPopulation::generate(&spec, 1).unwrap();
        assert!(pop.is_empty());
        let d = Disk::new(Point2::new(500.0, 500.0), 400.0).unwrap();
        assert_eq!(pop.count_in_disk(&d), 0);
    }

    #[test]
    fn single_user_at_centre() {
        let area = ConvexPolygon::rectangle(0.0, 0.0, 100.0, 100.0).unwrap();
        let pop = UserPopulation::from_users(
            vec![User {
                position: Point2::new(40.0, 60.0),
                cluster: None,
            }],
            vec![],
            1.0,
            area,
        );
        let d = Disk::new(Point2::new(40.0, 60.0), 5.0).unwrap();
        assert_eq!(pop.count_in_disk(&d), 1);
    }

    #[test]
    fn boundary_user_counts() {
        let area = ConvexPolygon::rectangle(0.0, 0.0, 100.0, 100.0).unwrap();
        let pop = UserPopulation::from_users(
            vec![User {
                position: Point2::new(30.0, 50.0),
                cluster: None,
            }],
            vec![],
            1.0,
            area,
        );
        let d = Disk::new(Point2::new(50.0, 50.0), 20.0).unwrap();
        assert_eq!(pop.count_in_disk(&d), 1);
    }

    #[test]
    fn grid_matches_brute_force() {
        let spec = square_spec(10_000.0);
        let pop = UserPopulation::generate(&spec, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for (k, c) in pop.cluster_centers().iter().enumerate() {
            for _ in 0..50 {
                let center = Point2::new(
                    c.x + rng.random_range(-900.0..900.0),
                    c.y + rng.random_range(-900.0..900.0),
                );
                let d = Disk::new(center, rng.random_range(10.0..1200.0)).unwrap();
                assert_eq!(pop.count_in_disk(&d), brute(&pop, &d), "cluster {k}");
                let mut seen = 0;
                pop.for_each_in_disk(&d, |_| seen += 1);
                assert_eq!(seen, brute(&pop, &d));
            }
        }
    }

    #[test]
    fn members_stay_in_their_disk() {
        let spec = square_spec(10_000.0);
        let pop = UserPopulation::generate(&spec, 3).unwrap();
        for u in pop.users() {
            assert!(spec.area.contains(u.position));
            if let Some(c) = u.cluster {
                let center = pop.cluster_centers()[c as usize];
                assert!(center.distance(u.position) <= 250.0 + 1e-9);
            }
        }
        for c in pop.cluster_centers() {
            assert!(spec.area.signed_boundary_distance(*c) >= 250.0);
        }
    }

    #[test]
    fn same_seed_same_population() {
        let spec = square_spec(10_000.0);
        let a = UserPopulation::generate(&spec, 11).unwrap();
        let b = UserPopulation::generate(&spec, 11).unwrap();
        assert_eq!(a, b);
        let c = UserPopulation::generate(&spec, 12).unwrap();
        assert_ne!(a.users(), c.users());
    }

    #[test]
    fn cluster_cannot_fit() {
        let mut spec = square_spec(400.0);
        spec.n_clusters = 1;
        assert_eq!(
            UserPopulation::generate(&spec, 1),
            Err(PopulationError::ClusterDoesNotFit(250.0, MAX_CENTER_DRAWS))
        );
    }

    #[test]
    fn union_count_deduplicates() {
        let area = ConvexPolygon::rectangle(0.0, 0.0, 100.0, 100.0).unwrap();
        let users: Vec<User> = (0..30)
            .map(|i| User {
                position: Point2::new(20.0 + i as f64, 50.0),
                cluster: None,
            })
            .collect();
        let pop = UserPopulation::from_users(users, vec![], 1.0, area);
        let a = Disk::new(Point2::new(20.0, 50.0), 14.5).unwrap();
        let b = Disk::new(Point2::new(44.0, 50.0), 14.5).unwrap();
        // a holds x = 20..=34, b holds x = 30..=49: 15 + 20 users, 5 shared
        assert_eq!(pop.count_in_disk(&a), 15);
        assert_eq!(pop.count_in_disk(&b), 20);
        assert_eq!(pop.count_in_union(&[a, b]), 30);
        assert_eq!(pop.count_in_disk_excluding(&b, &[a]), 15);
    }

    #[test]
    fn csv_round_trip() {
        let spec = square_spec(5000.0);
        let pop = UserPopulation::generate(&spec, 5).unwrap();
        let text = pop.to_csv();
        let back = UserPopulation::from_csv(&text, 250.0, spec.area.clone()).unwrap();
        assert_eq!(back.users(), pop.users());
        let bad = "x_m,y_m,cluster_id\n1,2,\n3,oops,1\n";
        assert_eq!(
            UserPopulation::from_csv(bad, 250.0, spec.area.clone()).unwrap_err(),
            PopulationError::Parse {
                line: 3,
                message: "bad coordinate \"oops\"".into()
            }
        );
    }

    #[test]
    fn validator() {
        let spec = square_spec(10_000.0);
        assert!(validate_scenario(&spec, 5, 500.0).is_empty());

        let mut wide = spec.clone();
        wide.cluster_radius = 300.0;
        let d = validate_scenario(&wide, 5, 500.0);
        assert!(has_errors(&d));
        assert_eq!(d[0].code, "cluster-too-wide");

        let small = square_spec(1000.0);
        let d = validate_scenario(&small, 5, 500.0);
        assert!(d.iter().any(|x| x.code == "area-too-small"));
        assert!(!has_errors(&d));

        let mut noisy = spec.clone();
        noisy.background_density = 1e-4;
        let d = validate_scenario(&noisy, 5, 500.0);
        assert!(d.iter().any(|x| x.code == "background-dominates"));
    }
}
