//! The three layers wired into one per-step controller.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::angle;
use crate::geometry::{Morphology, MODULES};
use crate::icr::{HeadingGains, IcrPlanner, MotionTarget, TrackingError};
use crate::kinematics::{headings, inverse_kinematics, pseudo_inverse_speeds, rigid_velocity, Twist};
use crate::steering::{
    concurrency_residual, Regime, SteeringController, SteeringGains, SteeringPlan, SteeringState,
};
use crate::velocity::{wheel_commands, DriveLimits, WheelCommand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// ICR planning, concurrency-preserving steering and rate regulation.
    #[default]
    Full,
    /// Modules steer independently towards the inverse-kinematics angles and
    /// drive with pseudo-inverse speeds.
    PseudoInverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerConfig {
    pub heading: HeadingGains,
    pub steering: SteeringGains,
    pub limits: DriveLimits,
}

/// Everything the controller decided in one step.
#[derive(Debug, Clone, Copy)]
pub struct Command {
    pub motion: MotionTarget,
    pub state: SteeringState,
    pub plan: SteeringPlan,
    pub wheels: WheelCommand,
    /// Steering angles at the end of the step.
    pub next_steer: [f64; MODULES],
    /// Concurrency residual of `next_steer`.
    pub residual: f64,
}

impl Command {
    pub fn moving(&self) -> bool {
        self.wheels.speed.iter().any(|v| *v != 0.0)
    }
}

/// Velocity of every module for the rigid motion about homogeneous point
/// `icr` closest to `desired` (inertia-weighted), projected on the module
/// headings.
pub fn speeds_about(
    morph: &Morphology,
    icr: &Vector3<f64>,
    steer: &[f64; MODULES],
    desired: &Twist,
) -> [f64; MODULES] {
    let unit = Vector3::new(icr.y, -icr.x, icr.z);
    let weight = Vector3::new(MODULES as f64, MODULES as f64, morph.polar_inertia());
    let norm = unit.component_mul(&weight).dot(&unit);
    if norm == 0.0 {
        return [0.0; MODULES];
    }
    let k = unit.component_mul(&weight).dot(&desired.as_vector()) / norm;
    let twist = Twist::body(k * unit.x, k * unit.y, k * unit.z);
    let h = headings(morph, steer);
    std::array::from_fn(|i| {
        let u = rigid_velocity(&twist, &morph.centers[i]);
        u.dot(&Vector2::new(h[i].cos(), h[i].sin()))
    })
}

#[derive(Debug, Clone)]
pub struct Controller {
    pub morph: Morphology,
    pub config: ControllerConfig,
    pub mode: Mode,
    planner: IcrPlanner,
    steering: SteeringController,
}

impl Controller {
    pub fn new(morph: Morphology, config: ControllerConfig, mode: Mode) -> Self {
        Self {
            planner: IcrPlanner::new(config.heading),
            steering: SteeringController::new(config.steering),
            morph,
            config,
            mode,
        }
    }

    /// One control step for body-frame error `err`, centroid `speed` and
    /// current steering angles `steer`.
    pub fn step(&mut self, err: &TrackingError, speed: f64, steer: &[f64; MODULES], dt: f64) -> Command {
        let motion = self.planner.plan(err, speed, dt);
        match self.mode {
            Mode::Full => self.full_step(motion, steer, dt),
            Mode::PseudoInverse => self.pinv_step(motion, steer, dt),
        }
    }

    fn full_step(&mut self, motion: MotionTarget, steer: &[f64; MODULES], dt: f64) -> Command {
        let (state, plan) = self.steering.step(&self.morph, steer, &motion.icr, dt);
        let next_steer: [f64; MODULES] = std::array::from_fn(|i| steer[i] + plan.rates[i] * dt);
        let speed = speeds_about(&self.morph, &plan.icr, &next_steer, &motion.twist);
        self.finish(motion, state, plan, speed, next_steer)
    }

    fn pinv_step(&mut self, motion: MotionTarget, steer: &[f64; MODULES], dt: f64) -> Command {
        let ik = inverse_kinematics(&self.morph, &motion.twist, Some(steer));
        let gains = self.config.steering;
        let mut rates = [0.0; MODULES];
        for i in 0..MODULES {
            let err = angle::wrap_half(ik.steer[i] - steer[i]);
            let rate = (gains.pid.kp * err).clamp(-gains.max_rate, gains.max_rate);
            rates[i] = if (rate * dt).abs() > err.abs() { err / dt } else { rate };
        }
        let next_steer: [f64; MODULES] = std::array::from_fn(|i| steer[i] + rates[i] * dt);
        let speed = pseudo_inverse_speeds(&self.morph, &motion.twist, &next_steer);
        let state = crate::steering::desired_steering(&self.morph, &motion.icr, steer);
        let plan = SteeringPlan {
            regime: Regime::Concurrent,
            reference: 0,
            lambda: f64::NAN,
            rates,
            icr: concurrency_residual(&self.morph, &next_steer).point,
            arrived: false,
        };
        self.finish(motion, state, plan, speed, next_steer)
    }

    fn finish(
        &self,
        motion: MotionTarget,
        state: SteeringState,
        plan: SteeringPlan,
        speed: [f64; MODULES],
        next_steer: [f64; MODULES],
    ) -> Command {
        let wheels = wheel_commands(&speed, &plan.rates, &self.morph.params, &self.config.limits);
        Command {
            motion,
            state,
            plan,
            wheels,
            next_steer,
            residual: concurrency_residual(&self.morph, &next_steer).residual,
        }
    }
}
