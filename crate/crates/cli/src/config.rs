//! Scenario configuration files.
//!
//! A config is a flat TOML document whose keys carry their unit as a suffix.
//! Unknown keys are rejected. Polygon geometry lives in a separate polygon
//! text file named by `area_file`, resolved relative to the config file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use sweepsearch::avoid::AvoidanceParams;
use sweepsearch::controllers::{AttractiveParams, SearchParams, SuppressionRule};
use sweepsearch::engine::{Algorithm, FailureEvent, Scenario};
use sweepsearch::geom::{parse_polygon_text, ConvexPolygon, Disk, Point2};
use sweepsearch::users::PopulationSpec;

use crate::Invalid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub area_file: PathBuf,
    pub n_drones: usize,
    pub n_clusters: usize,
    pub r_c_m: f64,
    pub r_d_m: f64,
    pub lambda_c: f64,
    pub lambda_nc: f64,
    pub eps_th: f64,
    pub v_mps: f64,
    pub t_s_s: f64,
    pub d_safe_m: f64,
    pub r_s_m: f64,
    pub margin_m: f64,
    pub u_max_m: f64,
    pub algorithm: String,
    pub duration_s: f64,
    pub seed: u64,
    pub runs: usize,

    #[serde(default = "default_horizon")]
    pub horizon_s: f64,
    #[serde(default)]
    pub overlap: f64,
    /// Empty means uniform.
    #[serde(default)]
    pub proportions: Vec<f64>,
    #[serde(default = "default_suppression")]
    pub suppression: String,
    #[serde(default = "default_w")]
    pub attractive_w: f64,
    #[serde(default = "default_c1")]
    pub attractive_c1: f64,
    #[serde(default)]
    pub position_noise: bool,
    /// Count a user once per covering drone rather than once.
    #[serde(default)]
    pub double_count: bool,
    #[serde(default)]
    pub failures: Vec<FailureEntry>,
    #[serde(default)]
    pub surviving_bs: Vec<StationEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureEntry {
    pub drone_id: usize,
    pub time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationEntry {
    pub x_m: f64,
    pub y_m: f64,
    pub radius_m: f64,
}

fn default_horizon() -> f64 {
    AvoidanceParams::default().horizon
}

fn default_suppression() -> String {
    suppression_label(SuppressionRule::default()).to_string()
}

fn default_w() -> f64 {
    AttractiveParams::default().inertia
}

fn default_c1() -> f64 {
    AttractiveParams::default().attraction
}

fn suppression_label(rule: SuppressionRule) -> &'static str {
    match rule {
        SuppressionRule::ExcludeDetected => "exclude_detected",
        SuppressionRule::DiskIntersection => "disk_intersection",
    }
}

fn parse_suppression(s: &str) -> Option<SuppressionRule> {
    match s {
        "exclude_detected" => Some(SuppressionRule::ExcludeDetected),
        "disk_intersection" => Some(SuppressionRule::DiskIntersection),
        _ => None,
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Invalid(format!("config: {e}")).into())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Reads a config and the polygon it names.
    pub fn load(path: &Path) -> Result<(Self, ConvexPolygon)> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let cfg = Self::parse(&text)
            .with_context(|| format!("in {}", path.display()))?;
        let area_path = match path.parent() {
            Some(dir) if cfg.area_file.is_relative() => dir.join(&cfg.area_file),
            _ => cfg.area_file.clone(),
        };
        let area = read_polygon(&area_path)?;
        Ok((cfg, area))
    }

    pub fn to_scenario(&self, area: ConvexPolygon) -> Result<Scenario> {
        let Some(algorithm) = Algorithm::from_label(&self.algorithm) else {
            bail!(Invalid(format!(
                "unknown algorithm {:?}; expected one of sweep_search, random_search, attractive_search",
                self.algorithm
            )));
        };
        let Some(suppression) = parse_suppression(&self.suppression) else {
            bail!(Invalid(format!(
                "unknown suppression {:?}; expected exclude_detected or disk_intersection",
                self.suppression
            )));
        };
        if self.runs == 0 {
            bail!(Invalid("runs must be at least 1".into()));
        }
        let surviving_bs = self
            .surviving_bs
            .iter()
            .map(|s| {
                Disk::new(Point2::new(s.x_m, s.y_m), s.radius_m)
                    .map_err(|e| Invalid(format!("surviving_bs: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Scenario {
            population_spec: PopulationSpec {
                area,
                n_clusters: self.n_clusters,
                cluster_radius: self.r_c_m,
                clustered_density: self.lambda_c,
                background_density: self.lambda_nc,
            },
            n_drones: self.n_drones,
            params: SearchParams {
                epsilon_threshold: self.eps_th,
                sample_time: self.t_s_s,
                speed: self.v_mps,
                coverage_radius: self.r_d_m,
                suppression,
            },
            avoidance: AvoidanceParams {
                shared_location_radius: self.r_s_m,
                safe_distance: self.d_safe_m,
                target_margin: self.margin_m,
                max_correction: self.u_max_m,
                horizon: self.horizon_s,
            },
            surviving_bs,
            algorithm,
            duration: self.duration_s,
            seed: self.seed,
            proportions: (!self.proportions.is_empty()).then(|| self.proportions.clone()),
            overlap: self.overlap,
            attractive: AttractiveParams {
                inertia: self.attractive_w,
                attraction: self.attractive_c1,
            },
            failures: self
                .failures
                .iter()
                .map(|f| FailureEvent {
                    drone_id: f.drone_id,
                    time: f.time_s,
                })
                .collect(),
            position_noise: self.position_noise,
            distinct_served: !self.double_count,
        })
    }

    /// The config that describes `scenario`. The area itself is not part of
    /// the config, so the caller names the file holding it.
    pub fn from_scenario(scenario: &Scenario, area_file: PathBuf, runs: usize) -> Self {
        let s = scenario;
        ConfigFile {
            area_file,
            n_drones: s.n_drones,
            n_clusters: s.population_spec.n_clusters,
            r_c_m: s.population_spec.cluster_radius,
            r_d_m: s.params.coverage_radius,
            lambda_c: s.population_spec.clustered_density,
            lambda_nc: s.population_spec.background_density,
            eps_th: s.params.epsilon_threshold,
            v_mps: s.params.speed,
            t_s_s: s.params.sample_time,
            d_safe_m: s.avoidance.safe_distance,
            r_s_m: s.avoidance.shared_location_radius,
            margin_m: s.avoidance.target_margin,
            u_max_m: s.avoidance.max_correction,
            algorithm: s.algorithm.label().to_string(),
            duration_s: s.duration,
            seed: s.seed,
            runs,
            horizon_s: s.avoidance.horizon,
            overlap: s.overlap,
            proportions: s.proportions.clone().unwrap_or_default(),
            suppression: suppression_label(s.params.suppression).to_string(),
            attractive_w: s.attractive.inertia,
            attractive_c1: s.attractive.attraction,
            position_noise: s.position_noise,
            double_count: !s.distinct_served,
            failures: s
                .failures
                .iter()
                .map(|f| FailureEntry {
                    drone_id: f.drone_id,
                    time_s: f.time,
                })
                .collect(),
            surviving_bs: s
                .surviving_bs
                .iter()
                .map(|d| StationEntry {
                    x_m: d.center.x,
                    y_m: d.center.y,
                    radius_m: d.radius,
                })
                .collect(),
        }
    }
}

pub fn read_polygon(path: &Path) -> Result<ConvexPolygon> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    parse_polygon_text(&text).map_err(|e| Invalid(format!("{}: {e}", path.display())).into())
}
