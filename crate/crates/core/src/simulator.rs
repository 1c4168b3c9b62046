//! Closed-loop simulation on an ideal no-slip plant.

use std::io::Write;
use std::path::Path;

use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::angle;
use crate::controller::{Controller, ControllerConfig, Mode};
use crate::geometry::{Morphology, Shape, MODULES};
use crate::icr::body_error;
use crate::kinematics::{body_twist, Frame, Pose, WheelRates};
use crate::steering::Regime;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub theta: f64,
    #[serde(default = "default_tol_pos")]
    pub tol_pos: f64,
    #[serde(default = "default_tol_theta")]
    pub tol_theta: f64,
}

fn default_tol_pos() -> f64 {
    0.05
}

fn default_tol_theta() -> f64 {
    0.05
}

impl Waypoint {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta,
            tol_pos: default_tol_pos(),
            tol_theta: default_tol_theta(),
        }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn reached(&self, pose: &Pose) -> bool {
        (pose.position() - self.position()).norm() < self.tol_pos
            && angle::wrap(self.theta - pose.theta).abs() < self.tol_theta
    }
}

/// Five-waypoint zig-zag course.
pub fn zigzag_course() -> Vec<Waypoint> {
    [(0.0, 1.2), (0.5, 1.2), (0.8, 2.5), (0.3, 2.5), (0.0, 5.0)]
        .iter()
        .map(|&(x, y)| Waypoint::new(x, y, 0.0))
        .collect()
}

/// Instantaneous pose jump applied to the true pose at `time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    pub time: f64,
    #[serde(default)]
    pub dx: f64,
    #[serde(default)]
    pub dy: f64,
    #[serde(default)]
    pub dtheta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma_pos: f64,
    pub sigma_theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub max_time: f64,
    pub noise: NoiseConfig,
    pub seed: u64,
    pub disturbances: Vec<Disturbance>,
    pub controller: ControllerConfig,
    pub mode: Mode,
    /// Speed along segments (m/s).
    pub cruise_speed: f64,
    /// Speed per meter of remaining distance near a waypoint (1/s).
    pub approach_gain: f64,
    /// Carrot distance ahead of the projection on the segment (m).
    pub lookahead: f64,
    pub initial_pose: Pose,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            max_time: 120.0,
            noise: NoiseConfig::default(),
            seed: 0,
            disturbances: Vec::new(),
            controller: ControllerConfig::default(),
            mode: Mode::Full,
            cruise_speed: 0.2,
            approach_gain: 1.0,
            lookahead: 0.2,
            initial_pose: Pose::default(),
        }
    }
}

/// One control step of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub pose: Pose,
    pub observed: Pose,
    pub desired: Pose,
    pub gamma_d: f64,
    pub radius_d: f64,
    pub steer: [f64; MODULES],
    pub steer_d: [f64; MODULES],
    pub steer_rate: [f64; MODULES],
    pub speed: [f64; MODULES],
    pub wheels: WheelRates,
    pub residual: f64,
    pub regime: Regime,
    pub reference: usize,
    pub lambda: f64,
    pub saturated: bool,
    pub speed_scale: f64,
    /// Index of the waypoint being tracked.
    pub target: usize,
    /// Distance of the true position from the active segment (m).
    pub cross_track: f64,
}

impl Sample {
    pub fn moving(&self) -> bool {
        self.speed.iter().any(|v| *v != 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub shape: Shape,
    pub waypoints: Vec<Waypoint>,
    pub samples: Vec<Sample>,
    /// Arrival time of every reached waypoint, in order.
    pub arrivals: Vec<f64>,
    pub completed: bool,
    pub final_pose: Pose,
}

/// Gaussian pose-measurement noise from a seeded generator.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: ChaCha8Rng,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// `pose` plus independent zero-mean Gaussian noise.
    pub fn observe(&mut self, pose: &Pose, cfg: &NoiseConfig) -> Pose {
        let (nx, ny, nt) = (self.normal(), self.normal(), self.normal());
        if cfg.sigma_pos == 0.0 && cfg.sigma_theta == 0.0 {
            return *pose;
        }
        Pose::new(
            pose.x + cfg.sigma_pos * nx,
            pose.y + cfg.sigma_pos * ny,
            pose.theta + cfg.sigma_theta * nt,
        )
    }
}

/// Pose noise for a single measurement with its own generator.
pub fn inject_noise(pose: &Pose, sigma_pos: f64, sigma_theta: f64, seed: u64) -> Pose {
    NoiseSource::new(seed).observe(
        pose,
        &NoiseConfig {
            sigma_pos,
            sigma_theta,
        },
    )
}

fn pose_rate(morph: &Morphology, speed: &[f64; MODULES], steer: &[f64; MODULES], theta: f64) -> Vector3<f64> {
    body_twist(morph, speed, steer)
        .in_frame(Frame::World, theta)
        .as_vector()
}

/// Advances the true pose and steering angles by `dt` under constant
/// wheel rates, with fixed-step RK4. Steering angles change linearly
/// over the step.
pub fn step_plant(
    pose: &Pose,
    steer: &[f64; MODULES],
    wheels: &WheelRates,
    morph: &Morphology,
    dt: f64,
) -> (Pose, [f64; MODULES]) {
    let (speed, rate) = wheels.to_modules(&morph.params);
    let steer_at = |s: f64| -> [f64; MODULES] { std::array::from_fn(|i| steer[i] + rate[i] * s) };
    let x = Vector3::new(pose.x, pose.y, pose.theta);
    let f = |s: f64, x: &Vector3<f64>| pose_rate(morph, &speed, &steer_at(s), x.z);
    let k1 = f(0.0, &x);
    let k2 = f(0.5 * dt, &(x + 0.5 * dt * k1));
    let k3 = f(0.5 * dt, &(x + 0.5 * dt * k2));
    let k4 = f(dt, &(x + dt * k3));
    let next = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    (Pose::new(next.x, next.y, next.z), steer_at(dt))
}

/// Closest point to `p` on segment `a`-`b` and its parameter along it.
fn project(a: &Vector2<f64>, b: &Vector2<f64>, p: &Vector2<f64>) -> (Vector2<f64>, f64) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (*a, 0.0);
    }
    let s = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (a + s * ab, s * len2.sqrt())
}

/// Runs the waypoint course and records every control step.
///
/// A waypoint is issued only once the previous one has been reached
/// (judged on the observed pose). Between waypoints the robot tracks a
/// carrot point on the straight segment while turning to the waypoint's
/// orientation.
pub fn run_waypoints(morph: &Morphology, waypoints: &[Waypoint], cfg: &SimConfig) -> TrajectoryLog {
    let mut controller = Controller::new(morph.clone(), cfg.controller, cfg.mode);
    let mut noise = NoiseSource::new(cfg.seed);
    let mut pose = cfg.initial_pose;
    // Straight-ahead parallel set.
    let mut steer: [f64; MODULES] = std::array::from_fn(|i| morph.steer_for_heading(i, 0.0));
    let mut log = TrajectoryLog {
        shape: morph.shape,
        waypoints: waypoints.to_vec(),
        samples: Vec::new(),
        arrivals: Vec::new(),
        completed: waypoints.is_empty(),
        final_pose: pose,
    };
    let mut start = pose.position();
    let mut target = 0;
    let mut pending = cfg.disturbances.clone();
    pending.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut pending = pending.into_iter().peekable();
    let steps = (cfg.max_time / cfg.dt).ceil() as usize;

    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        while let Some(d) = pending.next_if(|d| d.time <= t) {
            pose = Pose::new(pose.x + d.dx, pose.y + d.dy, pose.theta + d.dtheta);
        }
        let observed = noise.observe(&pose, &cfg.noise);
        while target < waypoints.len() && waypoints[target].reached(&observed) {
            log.arrivals.push(t);
            start = waypoints[target].position();
            target += 1;
        }
        if target == waypoints.len() {
            log.completed = true;
            break;
        }
        if k == steps {
            break;
        }
        let wp = waypoints[target];
        let goal = wp.position();
        let (_, along) = project(&start, &goal, &observed.position());
        let length = (goal - start).norm();
        let carrot = if length > 0.0 {
            start + (goal - start) * ((along + cfg.lookahead).min(length) / length)
        } else {
            goal
        };
        let desired = Pose::new(carrot.x, carrot.y, wp.theta);
        let remaining = (goal - observed.position()).norm();
        let speed = cfg.cruise_speed.min(cfg.approach_gain * remaining);
        let err = body_error(&observed, &desired);
        let cmd = controller.step(&err, speed, &steer, cfg.dt);

        let cross_track = (project(&start, &goal, &pose.position()).0 - pose.position()).norm();
        log.samples.push(Sample {
            t,
            pose,
            observed,
            desired,
            gamma_d: cmd.motion.icr.gamma,
            radius_d: cmd.motion.icr.radius,
            steer: cmd.next_steer,
            steer_d: cmd.state.desired,
            steer_rate: cmd.wheels.steer_rate,
            speed: cmd.wheels.speed,
            wheels: cmd.wheels.rates,
            residual: cmd.residual,
            regime: cmd.plan.regime,
            reference: cmd.plan.reference,
            lambda: cmd.plan.lambda,
            saturated: cmd.wheels.saturated(),
            speed_scale: cmd.wheels.speed_scale,
            target,
            cross_track,
        });
        (pose, steer) = step_plant(&pose, &steer, &cmd.wheels.rates, morph, cfg.dt);
    }
    log.final_pose = pose;
    log
}

/// Aggregate figures of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub shape: String,
    pub completed: bool,
    pub waypoints: usize,
    pub arrivals: Vec<f64>,
    pub duration: f64,
    pub rmse_cross_track: f64,
    pub rmse_x: f64,
    pub rmse_y: f64,
    pub rmse_theta: f64,
    /// Largest residual over steps with any module moving.
    pub max_residual: f64,
    pub max_wheel_rate: f64,
    pub saturation_count: usize,
}

impl TrajectoryLog {
    pub fn max_moving_residual(&self) -> f64 {
        self.samples
            .iter()
            .filter(|s| s.moving())
            .fold(0.0, |m, s| m.max(s.residual))
    }

    pub fn max_wheel_rate(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.wheels.max_abs()))
    }

    pub fn rmse_cross_track(&self) -> f64 {
        rms(self.samples.iter().map(|s| s.cross_track))
    }

    pub fn summary(&self) -> RunSummary {
        let (mut ex, mut ey) = (Vec::new(), Vec::new());
        let mut start = self.samples.first().map_or(Vector2::zeros(), |s| s.pose.position());
        let mut current = 0;
        for s in &self.samples {
            while current < s.target {
                start = self.waypoints[current].position();
                current += 1;
            }
            let goal = self.waypoints[s.target].position();
            let foot = project(&start, &goal, &s.pose.position()).0;
            ex.push(s.pose.x - foot.x);
            ey.push(s.pose.y - foot.y);
        }
        RunSummary {
            shape: self.shape.to_string(),
            completed: self.completed,
            waypoints: self.waypoints.len(),
            arrivals: self.arrivals.clone(),
            duration: self.samples.last().map_or(0.0, |s| s.t),
            rmse_cross_track: self.rmse_cross_track(),
            rmse_x: rms(ex.into_iter()),
            rmse_y: rms(ey.into_iter()),
            rmse_theta: rms(
                self.samples
                    .iter()
                    .map(|s| angle::wrap(s.desired.theta - s.pose.theta)),
            ),
            max_residual: self.max_moving_residual(),
            max_wheel_rate: self.max_wheel_rate(),
            saturation_count: self.samples.iter().filter(|s| s.saturated).count(),
        }
    }

    /// Writes the trajectory CSV.
    pub fn write_csv(&self, path: &Path) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = [
            "t", "x", "y", "theta", "x_d", "y_d", "theta_d", "gamma_d", "R_d",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for prefix in ["beta", "beta_d", "v", "phiL", "phiR"] {
            header.extend((1..=MODULES).map(|i| format!("{prefix}_{i}")));
        }
        header.extend(["residual", "regime", "sat_flag"].map(String::from));
        w.write_record(&header)?;
        for s in &self.samples {
            let mut row: Vec<String> = [
                s.t,
                s.pose.x,
                s.pose.y,
                s.pose.theta,
                s.desired.x,
                s.desired.y,
                s.desired.theta,
                s.gamma_d,
                s.radius_d,
            ]
            .iter()
            .map(f64::to_string)
            .collect();
            for values in [&s.steer, &s.steer_d, &s.speed, &s.wheels.left, &s.wheels.right] {
                row.extend(values.iter().map(f64::to_string));
            }
            row.push(s.residual.to_string());
            row.push(s.regime.as_str().to_string());
            row.push(u8::from(s.saturated).to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes per-step steering diagnostics.
    pub fn write_steering_csv(&self, path: &Path) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["t".to_string(), "regime".into(), "reference".into(), "lambda".into()];
        header.extend((1..=MODULES).map(|i| format!("beta_dot_{i}")));
        header.push("residual".into());
        w.write_record(&header)?;
        for s in &self.samples {
            let mut row = vec![
                s.t.to_string(),
                s.regime.as_str().to_string(),
                (s.reference + 1).to_string(),
                s.lambda.to_string(),
            ];
            row.extend(s.steer_rate.iter().map(f64::to_string));
            row.push(s.residual.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `t,scale` for every step where the wheel limit was active.
    pub fn write_saturation_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "t,scale")?;
        for s in self.samples.iter().filter(|s| s.saturated) {
            writeln!(f, "{},{}", s.t, s.speed_scale)?;
        }
        f.flush()
    }
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_morphology, GeometricParams};
    use crate::kinematics::{inverse_kinematics, module_to_wheels, Twist};
    use approx::assert_abs_diff_eq;

    fn morph(shape: Shape) -> Morphology {
        build_morphology(shape, GeometricParams::default())
    }

    fn wheels_for(m: &Morphology, twist: &Twist) -> (WheelRates, [f64; 4]) {
        let mv = inverse_kinematics(m, twist, None);
        let mut w = WheelRates::default();
        for i in 0..4 {
            (w.left[i], w.right[i]) = module_to_wheels(mv.speed[i], 0.0, &m.params);
        }
        (w, mv.steer)
    }

    #[test]
    fn zero_wheels_hold_pose() {
        let m = morph(Shape::T);
        let p = Pose::new(0.4, -1.0, 0.3);
        let (next, steer) = step_plant(&p, &[0.1; 4], &WheelRates::default(), &m, 0.01);
        assert_eq!(next, p);
        assert_eq!(steer, [0.1; 4]);
    }

    #[test]
    fn straight_line_for_one_second() {
        let m = morph(Shape::L);
        let (w, mut steer) = wheels_for(&m, &Twist::body(0.1, 0.0, 0.0));
        let mut p = Pose::new(0.0, 0.0, 0.5);
        for _ in 0..100 {
            (p, steer) = step_plant(&p, &steer, &w, &m, 0.01);
        }
        assert_abs_diff_eq!(p.x, 0.1 * 0.5f64.cos(), epsilon = 1e-9);
        assert_abs_diff_eq!(p.y, 0.1 * 0.5f64.sin(), epsilon = 1e-9);
        assert_abs_diff_eq!(p.theta, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn noise_is_seeded() {
        let p = Pose::new(1.0, 2.0, 0.3);
        assert_eq!(inject_noise(&p, 0.0, 0.0, 5), p);
        assert_eq!(inject_noise(&p, 0.02, 0.01, 5), inject_noise(&p, 0.02, 0.01, 5));
        assert_ne!(inject_noise(&p, 0.02, 0.01, 5), inject_noise(&p, 0.02, 0.01, 6));
    }

    #[test]
    fn waypoint_at_start_is_immediate() {
        let m = morph(Shape::O);
        let log = run_waypoints(&m, &[Waypoint::new(0.0, 0.0, 0.0)], &SimConfig::default());
        assert!(log.completed);
        assert_eq!(log.arrivals, vec![0.0]);
        assert!(log.samples.is_empty());
    }

    #[test]
    fn single_segment_is_reached() {
        let m = morph(Shape::Z);
        let log = run_waypoints(&m, &[Waypoint::new(0.3, 0.8, 0.0)], &SimConfig::default());
        assert!(log.completed);
        assert!(log.max_moving_residual() < 1e-6);
    }
}
