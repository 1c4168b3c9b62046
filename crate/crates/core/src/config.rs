//! Run configuration file.
//!
//! TOML, with units in key names. Every section is optional and falls back
//! to the defaults below; only `schema_version` is required.
//!
//! ```toml
//! schema_version = 1
//! shape = "O"
//!
//! [geometry]
//! wheel_radius_m = 0.03
//! wheel_offset_m = 0.05
//! module_length_m = 0.25
//!
//! [controller]
//! r_max_m = 10.0
//! phi_max_rad_s = 20.0
//! beta_dot_max_rad_s = 6.283185307179586
//! cruise_speed_m_s = 0.2
//! heading_pid = { kp = 1.0 }
//! steering_pid = { kp = 8.0 }
//!
//! [sim]
//! dt_s = 0.01
//! max_time_s = 120.0
//! seed = 0
//! noise = { sigma_pos_m = 0.0, sigma_theta_rad = 0.0 }
//! disturbances = [{ time_s = 4.0, dx_m = 0.2 }]
//!
//! [[waypoints]]
//! x_m = 0.0
//! y_m = 1.2
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{ControllerConfig, Mode};
use crate::geometry::{GeometricParams, GeometryError, Shape};
use crate::icr::HeadingGains;
use crate::pid::PidGains;
use crate::simulator::{zigzag_course, Disturbance, NoiseConfig, SimConfig, Waypoint};
use crate::steering::SteeringGains;
use crate::velocity::DriveLimits;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid waypoint file: {0}")]
    Waypoints(#[from] csv::Error),
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    Version(u32),
    #[error("invalid geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("invalid value: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub wheel_radius_m: f64,
    pub wheel_offset_m: f64,
    pub module_length_m: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        let p = GeometricParams::default();
        Self {
            wheel_radius_m: p.wheel_radius,
            wheel_offset_m: p.wheel_offset,
            module_length_m: p.module_length,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub r_max_m: f64,
    pub phi_max_rad_s: f64,
    pub beta_dot_max_rad_s: f64,
    pub beta_dot_min_rad_s: f64,
    pub arrive_tol_rad: f64,
    pub cruise_speed_m_s: f64,
    pub approach_gain_per_s: f64,
    pub lookahead_m: f64,
    pub heading_pid: PidGains,
    pub steering_pid: PidGains,
}

impl Default for ControllerSection {
    fn default() -> Self {
        let heading = HeadingGains::default();
        let steering = SteeringGains::default();
        let sim = SimConfig::default();
        Self {
            r_max_m: heading.r_max,
            phi_max_rad_s: DriveLimits::default().phi_max,
            beta_dot_max_rad_s: steering.max_rate,
            beta_dot_min_rad_s: steering.min_rate,
            arrive_tol_rad: steering.arrive_tol,
            cruise_speed_m_s: sim.cruise_speed,
            approach_gain_per_s: sim.approach_gain,
            lookahead_m: sim.lookahead,
            heading_pid: PidGains::p(heading.kp),
            steering_pid: steering.pid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub sigma_pos_m: f64,
    pub sigma_theta_rad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceEntry {
    pub time_s: f64,
    #[serde(default)]
    pub dx_m: f64,
    #[serde(default)]
    pub dy_m: f64,
    #[serde(default)]
    pub dtheta_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub dt_s: f64,
    pub max_time_s: f64,
    pub seed: u64,
    pub noise: NoiseSection,
    pub disturbances: Vec<DisturbanceEntry>,
    pub mode: Mode,
}

impl Default for SimSection {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            dt_s: sim.dt,
            max_time_s: sim.max_time,
            seed: sim.seed,
            noise: NoiseSection::default(),
            disturbances: Vec::new(),
            mode: Mode::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointEntry {
    pub x_m: f64,
    pub y_m: f64,
    #[serde(default)]
    pub theta_rad: f64,
    pub tol_pos_m: Option<f64>,
    pub tol_theta_rad: Option<f64>,
}

impl From<WaypointEntry> for Waypoint {
    fn from(e: WaypointEntry) -> Self {
        let mut w = Waypoint::new(e.x_m, e.y_m, e.theta_rad);
        if let Some(tol) = e.tol_pos_m {
            w.tol_pos = tol;
        }
        if let Some(tol) = e.tol_theta_rad {
            w.tol_theta = tol;
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Shape letter, or `all`.
    #[serde(default)]
    pub shape: Option<String>,
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub sim: SimSection,
    /// Defaults to the zig-zag course when empty.
    #[serde(default)]
    pub waypoints: Vec<WaypointEntry>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            shape: None,
            geometry: GeometrySection::default(),
            controller: ControllerSection::default(),
            sim: SimSection::default(),
            waypoints: Vec::new(),
        }
    }
}

fn positive(name: &str, value: f64) -> Result<(), ConfigError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{name} must be positive, got {value}")))
    }
}

fn non_negative(name: &str, value: f64) -> Result<(), ConfigError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{name} must be non-negative, got {value}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Version(self.schema_version));
        }
        self.params().validate()?;
        let c = &self.controller;
        positive("controller.r_max_m", c.r_max_m)?;
        positive("controller.phi_max_rad_s", c.phi_max_rad_s)?;
        positive("controller.beta_dot_max_rad_s", c.beta_dot_max_rad_s)?;
        non_negative("controller.beta_dot_min_rad_s", c.beta_dot_min_rad_s)?;
        if c.beta_dot_min_rad_s > c.beta_dot_max_rad_s {
            return Err(ConfigError::Invalid(
                "controller.beta_dot_min_rad_s exceeds beta_dot_max_rad_s".into(),
            ));
        }
        non_negative("controller.arrive_tol_rad", c.arrive_tol_rad)?;
        positive("controller.cruise_speed_m_s", c.cruise_speed_m_s)?;
        positive("controller.approach_gain_per_s", c.approach_gain_per_s)?;
        non_negative("controller.lookahead_m", c.lookahead_m)?;
        for (name, g) in [("heading_pid", c.heading_pid), ("steering_pid", c.steering_pid)] {
            positive(&format!("controller.{name}.kp"), g.kp)?;
            non_negative(&format!("controller.{name}.ki"), g.ki)?;
            non_negative(&format!("controller.{name}.kd"), g.kd)?;
        }
        let s = &self.sim;
        positive("sim.dt_s", s.dt_s)?;
        positive("sim.max_time_s", s.max_time_s)?;
        non_negative("sim.noise.sigma_pos_m", s.noise.sigma_pos_m)?;
        non_negative("sim.noise.sigma_theta_rad", s.noise.sigma_theta_rad)?;
        for d in &s.disturbances {
            non_negative("sim.disturbances.time_s", d.time_s)?;
        }
        for w in &self.waypoints {
            let w = Waypoint::from(*w);
            if !(w.x.is_finite() && w.y.is_finite() && w.theta.is_finite()) {
                return Err(ConfigError::Invalid("waypoint coordinates must be finite".into()));
            }
            positive("waypoints.tol_pos_m", w.tol_pos)?;
            positive("waypoints.tol_theta_rad", w.tol_theta)?;
        }
        self.shapes()?;
        Ok(())
    }

    pub fn params(&self) -> GeometricParams {
        GeometricParams {
            wheel_radius: self.geometry.wheel_radius_m,
            wheel_offset: self.geometry.wheel_offset_m,
            module_length: self.geometry.module_length_m,
        }
    }

    /// Shapes selected by the `shape` key (`O` when absent).
    pub fn shapes(&self) -> Result<Vec<Shape>, ConfigError> {
        parse_shapes(self.shape.as_deref().unwrap_or("O"))
    }

    pub fn waypoints(&self) -> Vec<Waypoint> {
        if self.waypoints.is_empty() {
            zigzag_course()
        } else {
            self.waypoints.iter().map(|&w| w.into()).collect()
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        let c = &self.controller;
        let s = &self.sim;
        SimConfig {
            dt: s.dt_s,
            max_time: s.max_time_s,
            noise: NoiseConfig {
                sigma_pos: s.noise.sigma_pos_m,
                sigma_theta: s.noise.sigma_theta_rad,
            },
            seed: s.seed,
            disturbances: s
                .disturbances
                .iter()
                .map(|d| Disturbance {
                    time: d.time_s,
                    dx: d.dx_m,
                    dy: d.dy_m,
                    dtheta: d.dtheta_rad,
                })
                .collect(),
            controller: ControllerConfig {
                heading: HeadingGains {
                    kp: c.heading_pid.kp,
                    ki: c.heading_pid.ki,
                    kd: c.heading_pid.kd,
                    r_max: c.r_max_m,
                },
                steering: SteeringGains {
                    pid: c.steering_pid,
                    max_rate: c.beta_dot_max_rad_s,
                    min_rate: c.beta_dot_min_rad_s,
                    arrive_tol: c.arrive_tol_rad,
                },
                limits: DriveLimits {
                    phi_max: c.phi_max_rad_s,
                    kp: c.heading_pid.kp,
                },
            },
            mode: s.mode,
            cruise_speed: c.cruise_speed_m_s,
            approach_gain: c.approach_gain_per_s,
            lookahead: c.lookahead_m,
            ..SimConfig::default()
        }
    }
}

/// Parses a shape letter or `all`.
pub fn parse_shapes(text: &str) -> Result<Vec<Shape>, ConfigError> {
    if text.eq_ignore_ascii_case("all") {
        return Ok(Shape::ALL.to_vec());
    }
    text.parse::<Shape>()
        .map(|s| vec![s])
        .map_err(|e| ConfigError::Invalid(e.to_string()))
}

#[derive(Debug, Deserialize)]
struct WaypointRow {
    x: f64,
    y: f64,
    #[serde(default)]
    theta: f64,
}

/// Reads waypoints from a CSV file with columns `x,y[,theta]`.
pub fn load_waypoints_csv(path: &Path) -> Result<Vec<Waypoint>, ConfigError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let mut out = Vec::new();
    for row in reader.deserialize() {
        let row: WaypointRow = row?;
        out.push(Waypoint::new(row.x, row.y, row.theta));
    }
    if out.is_empty() {
        return Err(ConfigError::Invalid(format!("{} has no waypoints", path.display())));
    }
    Ok(out)
}
