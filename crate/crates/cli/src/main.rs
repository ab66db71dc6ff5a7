use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sweepsearch::channel::{coverage_radius, optimal_altitude, ChannelConfig, Environment};
use sweepsearch::decomp::{decompose, uniform_proportions};
use sweepsearch::engine::{aggregate_csv, compare, ensemble, runs_csv, EngineError, ExecMode, Scenario};
use sweepsearch::sweeppath::{generate_zigzag, ZigzagPath};
use sweepsearch::users::{has_errors, Severity};

mod config;
mod svg;

use config::{read_polygon, ConfigFile};

/// Bad input: exits with status 2 rather than 1.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

#[derive(Parser)]
#[command(name = "sweepsearch", version, about = "Drone base-station sweep-and-search simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a convex area into per-drone sub-areas.
    Decompose(DecomposeArgs),
    /// Coverage radius against altitude, and the best altitude.
    Channel(ChannelArgs),
    /// Run an ensemble of one algorithm.
    Simulate(SimArgs),
    /// Run all three algorithms on the same seeds.
    Compare(SimArgs),
}

#[derive(Args)]
struct DecomposeArgs {
    /// Polygon text file: one "x y" vertex per line, counter-clockwise.
    polygon: PathBuf,
    /// Comma-separated area proportions, summing to 1.
    #[arg(long, value_delimiter = ',', conflicts_with = "drones")]
    proportions: Option<Vec<f64>>,
    /// Equal shares for this many drones.
    #[arg(long)]
    drones: Option<usize>,
    /// Plan CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Drawing of the sub-areas and paths.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Zigzag waypoints per sub-area as CSV.
    #[arg(long)]
    paths: Option<PathBuf>,
    /// Coverage radius for the paths, metres.
    #[arg(long, default_value_t = 500.0)]
    radius: f64,
    /// Fractional overlap between neighbouring laps.
    #[arg(long, default_value_t = 0.0)]
    overlap: f64,
}

#[derive(Args)]
struct ChannelArgs {
    /// Preset environment: urban or suburban.
    #[arg(long, default_value = "urban")]
    env: String,
    /// Override the preset's a, b, eta_los and eta_nlos (all four together).
    #[arg(long, num_args = 4, value_names = ["A", "B", "ETA_LOS", "ETA_NLOS"])]
    env_params: Option<Vec<f64>>,
    /// Carrier frequency, Hz.
    #[arg(long, default_value_t = 2.0e9)]
    fc: f64,
    /// Path loss threshold, dB.
    #[arg(long, default_value_t = 100.0)]
    lth: f64,
    #[arg(long, default_value_t = 10.0)]
    h_min: f64,
    #[arg(long, default_value_t = 3000.0)]
    h_max: f64,
    #[arg(long, default_value_t = 10.0)]
    h_step: f64,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    /// TOML scenario config.
    config: PathBuf,
    /// Directory for runs.csv, aggregate.csv and config.toml.
    #[arg(long)]
    out_dir: PathBuf,
    /// Also write each run's user population as CSV.
    #[arg(long)]
    populations: bool,
    /// Run the ensemble on one thread.
    #[arg(long)]
    sequential: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Decompose(a) => cmd_decompose(&a),
        Command::Channel(a) => cmd_channel(&a),
        Command::Simulate(a) => cmd_simulate(&a, false),
        Command::Compare(a) => cmd_simulate(&a, true),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_invalid(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn is_invalid(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<Invalid>()
            || matches!(
                c.downcast_ref::<EngineError>(),
                Some(EngineError::Validation(_) | EngineError::Decomposition(_))
            )
    })
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_decompose(a: &DecomposeArgs) -> Result<()> {
    let area = read_polygon(&a.polygon)?;
    let proportions = match (&a.proportions, a.drones) {
        (Some(p), _) => p.clone(),
        (None, Some(0)) => bail!(Invalid("--drones must be at least 1".into())),
        (None, Some(n)) => uniform_proportions(n),
        (None, None) => bail!(Invalid("give --proportions or --drones".into())),
    };
    let plan = decompose(&area, &proportions).map_err(|e| Invalid(e.to_string()))?;
    write_out(a.out.as_deref(), &plan.to_csv())?;

    let mut paths = Vec::new();
    if a.paths.is_some() || a.svg.is_some() {
        if !(a.radius > 0.0 && a.radius.is_finite()) {
            bail!(Invalid(format!("--radius must be positive, got {}", a.radius)));
        }
        if !(0.0..1.0).contains(&a.overlap) {
            bail!(Invalid(format!("--overlap must be in [0, 1), got {}", a.overlap)));
        }
        paths = plan
            .sub_areas
            .iter()
            .map(|s| generate_zigzag(&s.polygon, plan.sweep_direction, a.radius, a.overlap))
            .collect();
    }
    if let Some(p) = &a.paths {
        std::fs::write(p, paths_csv(&plan.sub_areas.iter().map(|s| s.drone_id).collect::<Vec<_>>(), &paths))
            .with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &a.svg {
        let shown = if a.paths.is_some() { &paths[..] } else { &[] };
        std::fs::write(p, svg::render_plan(&area, &plan, shown))
            .with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn paths_csv(drone_ids: &[usize], paths: &[ZigzagPath]) -> String {
    let mut out = String::from("sub_area,drone_id,waypoint,x_m,y_m\n");
    for (k, (id, path)) in drone_ids.iter().zip(paths).enumerate() {
        for (i, p) in path.waypoints.iter().enumerate() {
            let _ = writeln!(out, "{k},{id},{i},{},{}", p.x, p.y);
        }
    }
    out
}

fn cmd_channel(a: &ChannelArgs) -> Result<()> {
    let env = match &a.env_params {
        Some(v) => Environment::new("custom", v[0], v[1], v[2], v[3])
            .map_err(|e| Invalid(e.to_string()))?,
        None => Environment::preset(&a.env).ok_or_else(|| {
            Invalid(format!("unknown environment {:?}; expected urban or suburban", a.env))
        })?,
    };
    let cfg = ChannelConfig::new(a.fc, a.lth).map_err(|e| Invalid(e.to_string()))?;
    if !(a.h_min > 0.0 && a.h_max > a.h_min && a.h_step > 0.0) {
        bail!(Invalid(format!(
            "need 0 < h-min < h-max and h-step > 0, got {} {} {}",
            a.h_min, a.h_max, a.h_step
        )));
    }

    let mut out = String::from("kind,h_m,radius_m\n");
    let n = ((a.h_max - a.h_min) / a.h_step + 1e-9).floor() as usize;
    for i in 0..=n {
        let h = a.h_min + i as f64 * a.h_step;
        let c = coverage_radius(h, &env, &cfg)?;
        let _ = writeln!(out, "grid,{h},{:.3}", c.radius);
    }
    let (h_star, r_star) = optimal_altitude(&env, &cfg, (a.h_min, a.h_max))?;
    let _ = writeln!(out, "optimum,{h_star:.3},{r_star:.3}");
    write_out(a.out.as_deref(), &out)
}

fn cmd_simulate(a: &SimArgs, all: bool) -> Result<()> {
    let (cfg, area) = ConfigFile::load(&a.config)?;
    let scenario = cfg.to_scenario(area)?;
    check(&scenario)?;

    let mode = if a.sequential {
        ExecMode::Sequential
    } else {
        ExecMode::Parallel
    };
    let ensembles = if all {
        compare(&scenario, cfg.runs, cfg.seed, mode)?
    } else {
        vec![ensemble(&scenario, cfg.runs, cfg.seed, mode)?]
    };

    let dir = &a.out_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let put = |name: &str, text: &str| {
        let p = dir.join(name);
        std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    };
    put("runs.csv", &runs_csv(&ensembles))?;
    put("aggregate.csv", &aggregate_csv(&ensembles))?;
    let echo = ConfigFile::from_scenario(&scenario, cfg.area_file.clone(), cfg.runs);
    put("config.toml", &echo.to_toml())?;
    if a.populations {
        for i in 0..cfg.runs {
            let seed = cfg.seed.wrapping_add(i as u64);
            let pop = scenario.with_seed(seed).population()?;
            put(&format!("population_{seed}.csv"), &pop.to_csv())?;
        }
    }
    for e in &ensembles {
        eprintln!(
            "{}: {} runs, mean served users at end {:.1}",
            e.algorithm.label(),
            e.runs.len(),
            e.mean_final()
        );
    }
    Ok(())
}

fn check(scenario: &Scenario) -> Result<()> {
    let diagnostics = scenario.diagnostics();
    for d in diagnostics.iter().filter(|d| d.severity == Severity::Warning) {
        eprintln!("{d}");
    }
    if has_errors(&diagnostics) {
        let listed: Vec<String> = diagnostics
            .iter()
            .filter(|d| d.severity == Severity::Error)
            .map(|d| d.to_string())
            .collect();
        bail!(Invalid(format!("scenario is invalid:\n  {}", listed.join("\n  "))));
    }
    Ok(())
}
