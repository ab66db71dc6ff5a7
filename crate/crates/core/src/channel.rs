//! Air-to-ground mean path loss and the altitude that maximises the
//! coverage radius for a given loss threshold.
//!
//! The line-of-sight probability is a sigmoid in the elevation angle (in
//! degrees); the mean loss is free-space loss plus the LoS/NLoS-weighted
//! excess losses of the environment.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light used by the free-space term, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("altitude must be positive, got {0} m")]
    NonPositiveAltitude(f64),
    #[error("horizontal distance must be non-negative, got {0} m")]
    NegativeDistance(f64),
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),
    #[error("invalid channel configuration: {0}")]
    InvalidConfig(String),
    #[error("no altitude in [{0}, {1}] m gives any coverage")]
    NoCoverage(f64, f64),
}

/// Propagation environment constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub name: String,
    pub a: f64,
    pub b: f64,
    /// Mean excess loss for line-of-sight links, dB.
    pub eta_los: f64,
    /// Mean excess loss for non-line-of-sight links, dB.
    pub eta_nlos: f64,
}

impl Environment {
    pub fn new(
        name: impl Into<String>,
        a: f64,
        b: f64,
        eta_los: f64,
        eta_nlos: f64,
    ) -> Result<Self, ChannelError> {
        let env = Self {
            name: name.into(),
            a,
            b,
            eta_los,
            eta_nlos,
        };
        env.validate()?;
        Ok(env)
    }

    fn validate(&self) -> Result<(), ChannelError> {
        let finite = [self.a, self.b, self.eta_los, self.eta_nlos]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.a <= 0.0 || self.b <= 0.0 {
            return Err(ChannelError::InvalidEnvironment(format!(
                "{}: a and b must be positive",
                self.name
            )));
        }
        if !(self.eta_nlos >= self.eta_los && self.eta_los >= 0.0) {
            return Err(ChannelError::InvalidEnvironment(format!(
                "{}: need eta_nlos >= eta_los >= 0",
                self.name
            )));
        }
        Ok(())
    }

    /// Urban preset of the Al-Hourani, Kandeepan & Lardner (2014) LAP model.
    pub fn urban() -> Self {
        Self {
            name: "urban".into(),
            a: 9.61,
            b: 0.16,
            eta_los: 1.0,
            eta_nlos: 20.0,
        }
    }

    /// Suburban preset of the same model.
    pub fn suburban() -> Self {
        Self {
            name: "suburban".into(),
            a: 4.88,
            b: 0.43,
            eta_los: 0.1,
            eta_nlos: 21.0,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "urban" => Some(Self::urban()),
            "suburban" => Some(Self::suburban()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// Carrier frequency, Hz.
    pub carrier_frequency: f64,
    /// Maximum acceptable path loss at the coverage edge, dB.
    pub loss_threshold: f64,
    pub speed_of_light: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            carrier_frequency: 2.0e9,
            loss_threshold: 100.0,
            speed_of_light: SPEED_OF_LIGHT,
        }
    }
}

impl ChannelConfig {
    pub fn new(carrier_frequency: f64, loss_threshold: f64) -> Result<Self, ChannelError> {
        if !(carrier_frequency > 0.0 && carrier_frequency.is_finite()) {
            return Err(ChannelError::InvalidConfig(format!(
                "carrier frequency must be positive, got {carrier_frequency}"
            )));
        }
        if !(loss_threshold > 0.0 && loss_threshold.is_finite()) {
            return Err(ChannelError::InvalidConfig(format!(
                "loss threshold must be positive, got {loss_threshold}"
            )));
        }
        Ok(Self {
            carrier_frequency,
            loss_threshold,
            speed_of_light: SPEED_OF_LIGHT,
        })
    }
}

fn check_geometry(h: f64, r: f64) -> Result<(), ChannelError> {
    if !(h > 0.0) {
        return Err(ChannelError::NonPositiveAltitude(h));
    }
    if !(r >= 0.0) {
        return Err(ChannelError::NegativeDistance(r));
    }
    Ok(())
}

/// Probability of a line-of-sight link at altitude `h` and horizontal
/// distance `r`.
pub fn p_los(h: f64, r: f64, env: &Environment) -> Result<f64, ChannelError> {
    check_geometry(h, r)?;
    let elevation_deg = if r == 0.0 {
        90.0
    } else {
        (h / r).atan().to_degrees()
    };
    Ok(1.0 / (1.0 + env.a * (-env.b * (elevation_deg - env.a)).exp()))
}

/// Free-space loss in dB at slant range `distance`.
pub fn free_space_loss(distance: f64, cfg: &ChannelConfig) -> f64 {
    20.0 * (4.0 * PI * cfg.carrier_frequency * distance / cfg.speed_of_light).log10()
}

/// Mean air-to-ground path loss, dB.
pub fn path_loss(
    h: f64,
    r: f64,
    env: &Environment,
    cfg: &ChannelConfig,
) -> Result<f64, ChannelError> {
    let los = p_los(h, r, env)?;
    let slant = h.hypot(r);
    Ok(free_space_loss(slant, cfg) + los * env.eta_los + (1.0 - los) * env.eta_nlos)
}

/// Ground coverage radius at one altitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub radius: f64,
    /// False when even the point directly below exceeds the loss threshold.
    pub has_coverage: bool,
}

/// Horizontal distance at which the mean path loss reaches the threshold.
///
/// Path loss is strictly increasing in `r` at fixed `h`, so the root is
/// unique and bisection converges to it.
pub fn coverage_radius(
    h: f64,
    env: &Environment,
    cfg: &ChannelConfig,
) -> Result<Coverage, ChannelError> {
    let below = path_loss(h, 0.0, env, cfg)?;
    if below >= cfg.loss_threshold {
        return Ok(Coverage {
            radius: 0.0,
            has_coverage: false,
        });
    }
    let loss = |r: f64| path_loss(h, r, env, cfg).map(|l| l - cfg.loss_threshold);
    let mut lo = 0.0;
    let mut hi = h.max(1.0);
    while loss(hi)? <= 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if loss(mid)? <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Coverage {
        radius: 0.5 * (lo + hi),
        has_coverage: true,
    })
}

/// Default altitude search bracket, metres.
pub const DEFAULT_ALTITUDE_BRACKET: (f64, f64) = (10.0, 10_000.0);

/// Altitude that maximises the coverage radius, found by golden-section
/// search on `[h_min, h_max]`. Returns `(h_star, r_star)`.
///
/// The radius curve is unimodal with a zero plateau above the altitude at
/// which no ground point is covered; ties move the bracket down, towards
/// the covered region.
pub fn optimal_altitude(
    env: &Environment,
    cfg: &ChannelConfig,
    bracket: (f64, f64),
) -> Result<(f64, f64), ChannelError> {
    let (mut a, mut b) = bracket;
    if !(a > 0.0 && b > a) {
        return Err(ChannelError::InvalidConfig(format!(
            "bad altitude bracket [{a}, {b}]"
        )));
    }
    let radius = |h: f64| coverage_radius(h, env, cfg).map(|c| c.radius);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = radius(c)?;
    let mut fd = radius(d)?;
    while b - a > 1e-3 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = radius(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = radius(d)?;
        }
    }
    let h_star = 0.5 * (a + b);
    let r_star = radius(h_star)?;
    if r_star <= 0.0 {
        return Err(ChannelError::NoCoverage(bracket.0, bracket.1));
    }
    Ok((h_star, r_star))
}
