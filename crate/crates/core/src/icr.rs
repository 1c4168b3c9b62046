//! First control layer: from pose error to a desired instantaneous center
//! of rotation.
//!
//! The ICR is described in body-frame polar form by the driving angle
//! `gamma` (folded into `[-PI/2, PI/2]`), a drive sign extending it to the
//! whole circle, and a signed radius `R`. The ICR itself sits at
//! `R * (-sin gamma, cos gamma)`, i.e. on the left of the driving direction
//! for positive `R`, and the centroid then moves along
//! `drive_sign * (cos gamma, sin gamma)`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::angle;
use crate::kinematics::{Pose, Twist};
use crate::pid::{Pid, PidGains};

/// Fraction of `R_max` above which the ICR is treated as being at infinity.
pub const SATURATION_FRACTION: f64 = 0.99;

/// Pose error expressed in the robot frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrackingError {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadingGains {
    pub kp: f64,
    #[serde(default)]
    pub ki: f64,
    #[serde(default)]
    pub kd: f64,
    /// Radius saturation `R_max` (m).
    pub r_max: f64,
}

impl Default for HeadingGains {
    fn default() -> Self {
        Self {
            kp: 1.0,
            ki: 0.0,
            kd: 0.0,
            r_max: 10.0,
        }
    }
}

/// Desired ICR in body-frame polar coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcrTarget {
    pub gamma: f64,
    pub radius: f64,
    pub drive_sign: f64,
    pub r_max: f64,
}

impl IcrTarget {
    pub fn new(gamma: f64, radius: f64, drive_sign: f64, r_max: f64) -> Self {
        Self {
            gamma,
            radius,
            drive_sign,
            r_max,
        }
    }

    /// Whether the radius is close enough to `R_max` to be treated as a
    /// straight line.
    pub fn is_saturated(&self) -> bool {
        self.radius.abs() >= SATURATION_FRACTION * self.r_max
    }

    /// Homogeneous body-frame ICR; the third component is zero when the
    /// ICR is at infinity.
    pub fn point(&self) -> Vector3<f64> {
        let (s, c) = self.gamma.sin_cos();
        if self.is_saturated() {
            Vector3::new(-s, c, 0.0)
        } else {
            Vector3::new(-self.radius * s, self.radius * c, 1.0)
        }
    }

    /// Body-frame twist moving the centroid at `speed` about this ICR.
    ///
    /// `yaw_rate` is only used when the ICR coincides with the centroid.
    pub fn twist(&self, speed: f64, yaw_rate: f64) -> Twist {
        let (s, c) = self.gamma.sin_cos();
        let v = self.drive_sign * speed;
        let omega = if self.is_saturated() {
            0.0
        } else if self.radius != 0.0 {
            v / self.radius
        } else {
            yaw_rate
        };
        Twist::body(v * c, v * s, omega)
    }
}

/// Error between `current` and `desired` expressed in the robot frame.
pub fn body_error(current: &Pose, desired: &Pose) -> TrackingError {
    let (s, c) = current.theta.sin_cos();
    let dx = desired.x - current.x;
    let dy = desired.y - current.y;
    TrackingError {
        x: c * dx + s * dy,
        y: -s * dx + c * dy,
        theta: angle::wrap(desired.theta - current.theta),
    }
}

/// Driving angle folded into `[-PI/2, PI/2]` and the drive sign.
///
/// Returns `None` when the position error is exactly zero.
pub fn driving_angle(err: &TrackingError) -> Option<(f64, f64)> {
    if err.x == 0.0 && err.y == 0.0 {
        return None;
    }
    let direction = err.y.atan2(err.x);
    Some(if direction > FRAC_PI_2 {
        (direction - std::f64::consts::PI, -1.0)
    } else if direction < -FRAC_PI_2 {
        (direction + std::f64::consts::PI, -1.0)
    } else {
        (direction, 1.0)
    })
}

/// `R_max * tanh(speed / (yaw_rate * R_max))`, with the zero yaw-rate limit
/// resolved to `R_max` (straight line).
pub fn desired_radius(speed: f64, yaw_rate: f64, r_max: f64) -> f64 {
    if yaw_rate == 0.0 {
        return if speed < 0.0 { -r_max } else { r_max };
    }
    r_max * (speed / (yaw_rate * r_max)).tanh()
}

/// Proportional heading law.
pub fn heading_rate(theta_error: f64, gains: &HeadingGains) -> f64 {
    gains.kp * theta_error
}

/// Wheel speeds `(left, right)` of the equivalent differential drive with
/// half track `track`.
pub fn equivalent_diff_drive(signed_speed: f64, yaw_rate: f64, track: f64) -> (f64, f64) {
    (signed_speed + track * yaw_rate, signed_speed - track * yaw_rate)
}

/// Output of the first layer for one control step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionTarget {
    pub icr: IcrTarget,
    /// Unsigned centroid speed (m/s).
    pub speed: f64,
    /// Desired heading rate (rad/s).
    pub yaw_rate: f64,
    /// Body-frame twist consistent with the ICR.
    pub twist: Twist,
}

/// Stateful first layer. Holds the last driving direction for the
/// zero-error case.
#[derive(Debug, Clone)]
pub struct IcrPlanner {
    pub gains: HeadingGains,
    heading_pid: Pid,
    held: (f64, f64),
}

impl IcrPlanner {
    pub fn new(gains: HeadingGains) -> Self {
        let pid = PidGains {
            kp: gains.kp,
            ki: gains.ki,
            kd: gains.kd,
        };
        Self {
            gains,
            heading_pid: Pid::new(pid, f64::INFINITY),
            held: (0.0, 1.0),
        }
    }

    /// Held `(gamma, drive_sign)` register.
    pub fn held(&self) -> (f64, f64) {
        self.held
    }

    /// Desired ICR towards the body-frame error `err` at centroid `speed`.
    pub fn plan(&mut self, err: &TrackingError, speed: f64, dt: f64) -> MotionTarget {
        if let Some(held) = driving_angle(err) {
            self.held = held;
        }
        let (gamma, sign) = self.held;
        let yaw_rate = if self.gains.ki == 0.0 && self.gains.kd == 0.0 {
            heading_rate(err.theta, &self.gains)
        } else {
            self.heading_pid.update(err.theta, dt)
        };
        let radius = sign * desired_radius(speed, yaw_rate, self.gains.r_max);
        let icr = IcrTarget::new(gamma, radius, sign, self.gains.r_max);
        MotionTarget {
            icr,
            speed,
            yaw_rate,
            twist: icr.twist(speed, yaw_rate),
        }
    }
}
