//! Forward and inverse kinematics of the four-module platform and the
//! per-module differential-drive relations.

use nalgebra::{Matrix3x4, Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::angle;
use crate::geometry::{GeometricParams, Morphology, MODULES};

/// Planar pose of the centroid in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Orientation, wrapped to `(-PI, PI]`.
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: angle::wrap(theta),
        }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    World,
    Body,
}

/// Planar velocity `(vx, vy, omega)` tagged with the frame it is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Twist {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
    pub frame: Frame,
}

impl Twist {
    pub fn body(vx: f64, vy: f64, omega: f64) -> Self {
        Self {
            vx,
            vy,
            omega,
            frame: Frame::Body,
        }
    }

    pub fn world(vx: f64, vy: f64, omega: f64) -> Self {
        Self {
            vx,
            vy,
            omega,
            frame: Frame::World,
        }
    }

    pub fn zero(frame: Frame) -> Self {
        Self {
            vx: 0.0,
            vy: 0.0,
            omega: 0.0,
            frame,
        }
    }

    /// Re-expresses the twist in `frame`, given the body orientation `theta`.
    pub fn in_frame(&self, frame: Frame, theta: f64) -> Twist {
        let rot = match (self.frame, frame) {
            (a, b) if a == b => return *self,
            (Frame::Body, Frame::World) => theta,
            _ => -theta,
        };
        let (s, c) = rot.sin_cos();
        Twist {
            vx: c * self.vx - s * self.vy,
            vy: s * self.vx + c * self.vy,
            omega: self.omega,
            frame,
        }
    }

    pub fn linear(&self) -> Vector2<f64> {
        Vector2::new(self.vx, self.vy)
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.vx, self.vy, self.omega)
    }

    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.omega.is_finite()
    }
}

/// Per-module linear speeds, steering angles and steering rates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModuleVelocities {
    pub speed: [f64; MODULES],
    pub steer: [f64; MODULES],
    pub steer_rate: [f64; MODULES],
}

/// Left and right wheel rates of every module (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WheelRates {
    pub left: [f64; MODULES],
    pub right: [f64; MODULES],
}

impl WheelRates {
    /// Largest absolute rate over all eight motors.
    pub fn max_abs(&self) -> f64 {
        self.left
            .iter()
            .chain(self.right.iter())
            .fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn to_modules(&self, params: &GeometricParams) -> ([f64; MODULES], [f64; MODULES]) {
        let mut speed = [0.0; MODULES];
        let mut rate = [0.0; MODULES];
        for i in 0..MODULES {
            (speed[i], rate[i]) = wheels_to_module(self.left[i], self.right[i], params);
        }
        (speed, rate)
    }
}

/// Velocity of the rigid body field `twist` at body-frame point `p`.
pub fn rigid_velocity(twist: &Twist, p: &Vector2<f64>) -> Vector2<f64> {
    Vector2::new(twist.vx - twist.omega * p.y, twist.vy + twist.omega * p.x)
}

/// Body-frame map from module speeds to centroid twist at the given module
/// headings.
///
/// The translational rows average the module velocity vectors. The
/// rotational row projects each module velocity on the perpendicular of its
/// radius vector and normalizes by the polar inertia of the layout, which
/// makes the map a least-squares fit of a rigid motion to the four module
/// velocities.
pub fn g_matrix(morph: &Morphology, headings: &[f64; MODULES]) -> Matrix3x4<f64> {
    let inertia = morph.polar_inertia();
    let quarter = 1.0 / MODULES as f64;
    let mut g = Matrix3x4::zeros();
    for (i, heading) in headings.iter().enumerate() {
        let (s, c) = heading.sin_cos();
        let r = morph.centers[i];
        g[(0, i)] = c * quarter;
        g[(1, i)] = s * quarter;
        g[(2, i)] = (-r.y * c + r.x * s) / inertia;
    }
    g
}

pub fn headings(morph: &Morphology, steer: &[f64; MODULES]) -> [f64; MODULES] {
    std::array::from_fn(|i| morph.heading(i, steer[i]))
}

/// Body-frame twist produced by module speeds at steering angles `steer`.
pub fn body_twist(morph: &Morphology, speed: &[f64; MODULES], steer: &[f64; MODULES]) -> Twist {
    let t = g_matrix(morph, &headings(morph, steer)) * Vector4::from_column_slice(speed);
    Twist::body(t.x, t.y, t.z)
}

/// World-frame centroid twist for robot orientation `theta`.
pub fn forward_kinematics(morph: &Morphology, mv: &ModuleVelocities, theta: f64) -> Twist {
    body_twist(morph, &mv.speed, &mv.steer).in_frame(Frame::World, theta)
}

/// Module speeds and steering angles realizing a body-frame twist.
///
/// Each module follows the rigid-body velocity field at its steering axis,
/// which is the unique constraint-consistent solution. Modules with zero
/// velocity keep the steering angle from `hint` (zero if absent).
pub fn inverse_kinematics(
    morph: &Morphology,
    twist: &Twist,
    hint: Option<&[f64; MODULES]>,
) -> ModuleVelocities {
    debug_assert_eq!(twist.frame, Frame::Body);
    let mut mv = ModuleVelocities::default();
    for i in 0..MODULES {
        let u = rigid_velocity(twist, &morph.centers[i]);
        let speed = u.norm();
        if speed == 0.0 {
            mv.steer[i] = hint.map_or(0.0, |h| h[i]);
            mv.speed[i] = 0.0;
        } else {
            mv.steer[i] = morph.steer_for_heading(i, u.y.atan2(u.x));
            mv.speed[i] = speed;
        }
    }
    mv
}

/// Module speeds from the Moore-Penrose pseudo-inverse of the forward map
/// at fixed steering angles.
///
/// The steering angles are not changed, so unless they already satisfy the
/// concurrency constraint the resulting motion skids.
pub fn pseudo_inverse_speeds(
    morph: &Morphology,
    twist: &Twist,
    steer: &[f64; MODULES],
) -> [f64; MODULES] {
    debug_assert_eq!(twist.frame, Frame::Body);
    let g = g_matrix(morph, &headings(morph, steer));
    let v = match g.pseudo_inverse(1e-12) {
        Ok(pinv) => pinv * twist.as_vector(),
        Err(_) => Vector4::zeros(),
    };
    [v[0], v[1], v[2], v[3]]
}

/// Wheel rates `(left, right)` of a differential module driving at `speed`
/// while steering at `steer_rate` about its steering axis.
///
/// The left wheel is the one that speeds up for a positive steering rate.
pub fn module_to_wheels(speed: f64, steer_rate: f64, params: &GeometricParams) -> (f64, f64) {
    let turn = params.wheel_offset * steer_rate;
    (
        (speed + turn) / params.wheel_radius,
        (speed - turn) / params.wheel_radius,
    )
}

/// Inverse of [`module_to_wheels`].
pub fn wheels_to_module(left: f64, right: f64, params: &GeometricParams) -> (f64, f64) {
    let r = params.wheel_radius;
    (
        r * (left + right) / 2.0,
        r * (left - right) / (2.0 * params.wheel_offset),
    )
}
