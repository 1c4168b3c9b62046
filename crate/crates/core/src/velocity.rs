//! Third control layer: module speeds and motor-limited wheel rates.

use serde::{Deserialize, Serialize};

use crate::geometry::{GeometricParams, MODULES};
use crate::kinematics::{module_to_wheels, WheelRates};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveLimits {
    /// Largest allowed wheel rate (rad/s).
    pub phi_max: f64,
    /// Nominal heading gain, reported scaled alongside the wheel rates.
    pub kp: f64,
}

impl Default for DriveLimits {
    fn default() -> Self {
        Self {
            phi_max: 20.0,
            kp: 1.0,
        }
    }
}

/// Module speeds for individual radii `radii` about an ICR of radius
/// `radius`.
///
/// Uses `r_i / R * speed` when `R` is non-zero and `r_i * yaw_rate`
/// otherwise. `speed` is the signed centroid speed.
pub fn module_speeds(
    radii: &[f64; MODULES],
    radius: f64,
    speed: f64,
    yaw_rate: f64,
) -> [f64; MODULES] {
    if radius != 0.0 {
        radii.map(|r| r / radius * speed)
    } else {
        radii.map(|r| r * yaw_rate)
    }
}

/// Regulated wheel commands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelCommand {
    pub rates: WheelRates,
    /// Module speeds after scaling.
    pub speed: [f64; MODULES],
    /// Steering rates after scaling.
    pub steer_rate: [f64; MODULES],
    /// Factor applied to the module speeds, in `[0, 1]`.
    pub speed_scale: f64,
    /// Factor applied to the steering rates, in `[0, 1]`.
    pub steer_scale: f64,
    /// Heading gain after scaling.
    pub effective_kp: f64,
    /// Set when the steering rates alone exceeded the wheel limit.
    pub steering_saturated: bool,
}

impl WheelCommand {
    /// Whether any scaling took place.
    pub fn saturated(&self) -> bool {
        self.speed_scale < 1.0 || self.steer_scale < 1.0
    }
}

fn rates(speed: &[f64; MODULES], steer_rate: &[f64; MODULES], params: &GeometricParams) -> WheelRates {
    let mut out = WheelRates::default();
    for i in 0..MODULES {
        (out.left[i], out.right[i]) = module_to_wheels(speed[i], steer_rate[i], params);
    }
    out
}

/// Wheel rates for module speeds and steering rates, scaled so that no
/// motor exceeds `limits.phi_max`.
///
/// Steering rates have priority: the module speeds are scaled uniformly
/// first, which keeps their ratios and hence the ICR. Only when the
/// steering rates alone exceed the limit are they scaled too (uniformly)
/// and the speeds set to zero.
pub fn wheel_commands(
    speed: &[f64; MODULES],
    steer_rate: &[f64; MODULES],
    params: &GeometricParams,
    limits: &DriveLimits,
) -> WheelCommand {
    let raw = rates(speed, steer_rate, params);
    let mut cmd = WheelCommand {
        rates: raw,
        speed: *speed,
        steer_rate: *steer_rate,
        speed_scale: 1.0,
        steer_scale: 1.0,
        effective_kp: limits.kp,
        steering_saturated: false,
    };
    if raw.max_abs() <= limits.phi_max {
        return cmd;
    }

    let budget = limits.phi_max * params.wheel_radius;
    let turn = |i: usize| params.wheel_offset * steer_rate[i].abs();
    let max_turn = (0..MODULES).map(turn).fold(0.0, f64::max);
    if max_turn > budget {
        let k = budget / max_turn;
        cmd.steer_rate = steer_rate.map(|b| b * k);
        cmd.speed = [0.0; MODULES];
        cmd.steer_scale = k;
        cmd.speed_scale = 0.0;
        cmd.steering_saturated = true;
    } else {
        // |v_i| k + d |b_i| <= r_w phi_max for every module.
        let k = (0..MODULES)
            .filter(|&i| speed[i] != 0.0)
            .map(|i| (budget - turn(i)) / speed[i].abs())
            .fold(1.0, f64::min)
            .clamp(0.0, 1.0);
        cmd.speed = speed.map(|v| v * k);
        cmd.speed_scale = k;
    }
    cmd.effective_kp = limits.kp * cmd.speed_scale;
    cmd.rates = rates(&cmd.speed, &cmd.steer_rate, params);
    // Rounding in the budget division can leave the largest rate a few ulps
    // above the limit.
    for r in cmd.rates.left.iter_mut().chain(cmd.rates.right.iter_mut()) {
        *r = r.clamp(-limits.phi_max, limits.phi_max);
    }
    cmd
}
