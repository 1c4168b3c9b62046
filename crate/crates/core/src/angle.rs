//! Angle helpers.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

/// Wraps an angle into `(-PI, PI]`.
pub fn wrap(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Wraps an angle into `(-PI/2, PI/2]`.
///
/// Used for quantities defined modulo `PI`, such as the direction of a
/// wheel axis line.
pub fn wrap_half(angle: f64) -> f64 {
    let r = angle.rem_euclid(PI);
    if r > FRAC_PI_2 {
        r - PI
    } else {
        r
    }
}

/// Sign function with `sign(0) = 1`.
pub fn sign_nonneg(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}
