//! Second control layer: module steering.
//!
//! Every module's wheel axis line passes through its steering axis and is
//! perpendicular to the wheel plane. The platform moves without skidding
//! only while the four lines meet in one point (the ICR) or are all
//! parallel (ICR at infinity). This module computes desired steering angles
//! for a target ICR, measures how far a steering set is from concurrency,
//! and generates steering rates that keep the set concurrent while moving
//! from the current ICR to the target one.
//!
//! The transient works in the projective plane. With `P0` the current ICR
//! and `P1` the target, the ICR is slid along the line through `P0` and
//! `P1`. The module with the largest steering error is the reference: its
//! next angle comes from a PID step, its new axis line cuts the guide line
//! in the next ICR, and every other module is steered so that its axis
//! passes through that point. All modules reach their targets on the same
//! step, when the reference does.

use std::cmp::Ordering;

use nalgebra::{Matrix4x2, Matrix4x3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::angle;
use crate::geometry::{wheel_axis_line, Morphology, MODULES};
use crate::icr::{IcrTarget, SATURATION_FRACTION};
use crate::pid::{Pid, PidGains};

/// Singular value below which the wheel headings count as parallel.
pub const PARALLEL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Parallel,
    Concurrent,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Parallel => "parallel",
            Regime::Concurrent => "concurrent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteeringGains {
    pub pid: PidGains,
    /// Steering rate clamp (rad/s).
    pub max_rate: f64,
    /// Smallest commanded rate of the reference module while it is still
    /// away from its target (rad/s). Makes the transient finish in finite
    /// time.
    pub min_rate: f64,
    /// Remaining error below which the reference module snaps onto its
    /// target (rad).
    pub arrive_tol: f64,
}

impl Default for SteeringGains {
    fn default() -> Self {
        Self {
            pid: PidGains::p(8.0),
            max_rate: std::f64::consts::TAU,
            min_rate: 0.05,
            arrive_tol: 1e-4,
        }
    }
}

/// Current and desired steering of all modules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringState {
    pub steer: [f64; MODULES],
    /// Desired angles, chosen among the two equivalent wheel directions as
    /// the one closest to `steer`.
    pub desired: [f64; MODULES],
    /// Signed individual radii along the forward direction of travel.
    pub radii: [f64; MODULES],
    /// `-1` where the desired angle is the reversed wheel direction.
    pub direction: [f64; MODULES],
    /// `false` for a module sitting on the target ICR (any angle works).
    pub defined: [bool; MODULES],
    /// Homogeneous target ICR.
    pub target: Vector3<f64>,
}

impl SteeringState {
    pub fn errors(&self) -> [f64; MODULES] {
        std::array::from_fn(|i| angle::wrap(self.desired[i] - self.steer[i]))
    }

    pub fn max_error(&self) -> f64 {
        self.errors().iter().fold(0.0, |m, e| m.max(e.abs()))
    }
}

/// Result of one steering-controller step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringPlan {
    pub regime: Regime,
    /// Reference module (zero based).
    pub reference: usize,
    /// Ratio `tan(psi_m + dpsi_m) / tan(psi_m)` of the reference module.
    pub lambda: f64,
    pub rates: [f64; MODULES],
    /// Homogeneous ICR after applying `rates` for one step.
    pub icr: Vector3<f64>,
    /// Whether the step lands every module on its target.
    pub arrived: bool,
}

impl SteeringPlan {
    fn idle(regime: Regime, icr: Vector3<f64>) -> Self {
        Self {
            regime,
            reference: 0,
            lambda: 1.0,
            rates: [0.0; MODULES],
            icr,
            arrived: true,
        }
    }

    pub fn increments(&self, dt: f64) -> [f64; MODULES] {
        self.rates.map(|r| r * dt)
    }
}

/// Concurrency diagnostics of a steering set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcurrencyCheck {
    /// Stacked homogeneous axis lines, one per row.
    pub lines: Matrix4x3<f64>,
    /// Smallest singular value of `lines`.
    pub residual: f64,
    /// Least-squares homogeneous intersection (unit norm).
    pub point: Vector3<f64>,
    /// Whether all wheel headings are parallel.
    pub parallel: bool,
}

impl ConcurrencyCheck {
    /// Finite least-squares intersection, if the lines are not parallel.
    pub fn icr_estimate(&self) -> Option<Vector2<f64>> {
        (!self.parallel && self.point.z.abs() > 1e-12)
            .then(|| Vector2::new(self.point.x / self.point.z, self.point.y / self.point.z))
    }
}

/// Signed individual radii for `icr`.
///
/// Positive radii share the sign of the ICR radius; a module sitting on
/// the ICR gets zero. For a saturated (straight-line) target every module
/// gets the ICR radius itself.
pub fn individual_radii(morph: &Morphology, icr: &IcrTarget) -> [f64; MODULES] {
    if icr.is_saturated() {
        return [icr.radius; MODULES];
    }
    let q = icr.point();
    let sign = angle::sign_nonneg(icr.radius);
    std::array::from_fn(|i| sign * (morph.centers[i] - Vector2::new(q.x, q.y)).norm())
}

/// Body-frame direction of travel of module `i` for a positive centroid
/// speed about `icr`, or `None` when the module sits on the ICR.
fn forward_heading(morph: &Morphology, icr: &IcrTarget, i: usize) -> Option<f64> {
    if icr.is_saturated() {
        return Some(icr.gamma);
    }
    let q = icr.point();
    let d = morph.centers[i] - Vector2::new(q.x, q.y);
    if d.norm() <= 1e-12 * morph.params.module_length {
        return None;
    }
    let sign = angle::sign_nonneg(icr.radius);
    Some((sign * d.x).atan2(-sign * d.y))
}

/// Desired steering for `icr`, with each angle chosen closest to `current`.
pub fn desired_steering(
    morph: &Morphology,
    icr: &IcrTarget,
    current: &[f64; MODULES],
) -> SteeringState {
    let radii = individual_radii(morph, icr);
    let mut state = SteeringState {
        steer: *current,
        desired: *current,
        radii,
        direction: [1.0; MODULES],
        defined: [true; MODULES],
        target: icr.point(),
    };
    for i in 0..MODULES {
        match forward_heading(morph, icr, i) {
            Some(heading) => {
                let forward = morph.steer_for_heading(i, heading);
                let err = angle::wrap(forward - current[i]);
                if err.abs() > std::f64::consts::FRAC_PI_2 {
                    state.desired[i] = angle::wrap(forward + std::f64::consts::PI);
                    state.direction[i] = -1.0;
                } else {
                    state.desired[i] = forward;
                }
            }
            None => {
                state.defined[i] = false;
                state.radii[i] = 0.0;
            }
        }
    }
    state
}

fn axis_lines(morph: &Morphology, steer: &[f64; MODULES]) -> Matrix4x3<f64> {
    let mut lines = Matrix4x3::zeros();
    for i in 0..MODULES {
        let h = wheel_axis_line(morph, i, steer[i]).homogeneous();
        lines.set_row(i, &h.transpose());
    }
    lines
}

fn headings_parallel(lines: &Matrix4x3<f64>) -> bool {
    let normals: Matrix4x2<f64> = lines.fixed_columns::<2>(0).into_owned();
    let sv = normals.singular_values();
    sv.min() < PARALLEL_TOL
}

/// Concurrency residual and least-squares ICR of a steering set.
pub fn concurrency_residual(morph: &Morphology, steer: &[f64; MODULES]) -> ConcurrencyCheck {
    let lines = axis_lines(morph, steer);
    let svd = lines.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let (k, residual) = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
        .expect("three singular values");
    ConcurrencyCheck {
        lines,
        residual,
        point: v_t.row(k).transpose(),
        parallel: headings_parallel(&lines),
    }
}

/// Homogeneous ICR of the (assumed concurrent) steering set.
///
/// When the four axis lines coincide the ICR can be anywhere on that line;
/// the point of the line closest to `hint` is returned.
pub fn current_icr(morph: &Morphology, steer: &[f64; MODULES], hint: &Vector3<f64>) -> Vector3<f64> {
    let lines = axis_lines(morph, steer);
    let svd = lines.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        svd.singular_values[a]
            .partial_cmp(&svd.singular_values[b])
            .unwrap_or(Ordering::Equal)
    });
    let smallest = v_t.row(order[0]).transpose();
    let second = v_t.row(order[1]).transpose();
    let scale = svd.singular_values[order[2]].max(1e-300);
    if svd.singular_values[order[1]] / scale < 1e-9 {
        let h = hint.normalize();
        let p = smallest * smallest.dot(&h) + second * second.dot(&h);
        if p.norm() > 1e-12 {
            return p.normalize();
        }
    }
    smallest
}

/// Parallel when the target is saturated and the current headings are
/// already parallel; concurrent otherwise.
pub fn classify_regime(morph: &Morphology, steer: &[f64; MODULES], icr: &IcrTarget) -> Regime {
    let saturated = icr.radius.abs() >= SATURATION_FRACTION * icr.r_max;
    if saturated && headings_parallel(&axis_lines(morph, steer)) {
        Regime::Parallel
    } else {
        Regime::Concurrent
    }
}

/// Reference-module step for error `err`: PID output clamped between the
/// minimum and maximum rates, never overshooting, and snapping onto the
/// target below `arrive_tol`. Returns the angle increment.
fn reference_step(err: f64, pid: &mut Pid, gains: &SteeringGains, dt: f64) -> f64 {
    if err.abs() <= gains.arrive_tol {
        pid.update(err, dt);
        return err;
    }
    let rate = pid.update(err, dt);
    let magnitude = rate.abs().clamp(gains.min_rate, gains.max_rate);
    let step = err.signum() * magnitude * dt;
    if step.abs() >= err.abs() {
        err
    } else {
        step
    }
}

/// Shared steering rate for the parallel regime, given the error between
/// the desired and current driving angles.
pub fn parallel_rates(gamma_error: f64, pid: &mut Pid, gains: &SteeringGains, dt: f64) -> f64 {
    reference_step(gamma_error, pid, gains, dt) / dt
}

fn lambda_ratio(heading: f64, increment: f64) -> f64 {
    if increment == 0.0 {
        1.0
    } else {
        (heading + increment).tan() / heading.tan()
    }
}

/// Signed angle from `a` to `b` in `(-PI, PI]`.
fn signed_angle(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    (a.x * b.y - a.y * b.x).atan2(a.dot(b))
}

/// Heading change of every module while the ICR slides from `p0` to `p1`.
///
/// The two points split the projective line into two arcs; the arc is
/// chosen that needs the smaller largest rotation. Modules whose center
/// coincides with either end point keep their own error from `fallback`.
fn route_errors(
    morph: &Morphology,
    p0: &Vector3<f64>,
    p1: &Vector3<f64>,
    fallback: &[f64; MODULES],
) -> [f64; MODULES] {
    let normal = |i: usize, p: &Vector3<f64>| {
        let l = morph.center_h(i).cross(p);
        Vector2::new(l.x, l.y)
    };
    let tol = 1e-12 * morph.params.module_length;
    let along = |sign: f64| -> [Option<f64>; MODULES] {
        std::array::from_fn(|i| {
            let n0 = normal(i, p0);
            let n1 = sign * normal(i, p1);
            (n0.norm() > tol && n1.norm() > tol).then(|| signed_angle(&n0, &n1))
        })
    };
    let cost = |route: &[Option<f64>; MODULES]| route.iter().flatten().fold(0.0, |m: f64, d| m.max(d.abs()));
    let (plus, minus) = (along(1.0), along(-1.0));
    let route = if cost(&minus) < cost(&plus) { minus } else { plus };
    std::array::from_fn(|i| route[i].unwrap_or(fallback[i]))
}

/// Steering rates that move `state` towards its target while keeping the
/// axis lines concurrent.
///
/// Errors are measured along the route of the ICR rather than to the
/// nearest wheel direction, so a module may turn by more than a quarter
/// turn when that keeps every module on the same path.
pub fn concurrent_rates(
    state: &SteeringState,
    morph: &Morphology,
    gains: &SteeringGains,
    pid: &mut Pid,
    dt: f64,
) -> SteeringPlan {
    let p1 = state.target.normalize();
    let p0 = current_icr(morph, &state.steer, &p1);
    let p1 = if p0.dot(&p1) < 0.0 { -p1 } else { p1 };
    if state.errors().iter().all(|e| *e == 0.0) {
        return SteeringPlan::idle(Regime::Concurrent, p0);
    }
    let errors = route_errors(morph, &p0, &p1, &state.errors());

    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &b| {
        errors[b]
            .abs()
            .partial_cmp(&errors[a].abs())
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });

    let guide = p0.cross(&p1);
    let guide_ok = guide.norm() > 1e-12;
    let reference = order.iter().copied().find(|&i| {
        let c = morph.center_h(i);
        guide_ok && errors[i] != 0.0 && guide.dot(&c).abs() > 1e-9 * guide.norm() * c.norm()
    });

    let Some(m) = reference else {
        return proportional_rates(state, &errors, morph, gains, pid, dt, order[0]);
    };

    let step = reference_step(errors[m], pid, gains, dt);
    let headings: [f64; MODULES] = std::array::from_fn(|i| morph.heading(i, state.steer[i]));
    let arriving = step == errors[m];

    let follow = |fraction: f64| -> ([f64; MODULES], Vector3<f64>) {
        let heading_m = headings[m] + fraction * step;
        let line_m = wheel_axis_line(morph, m, state.steer[m] + fraction * step).homogeneous();
        let p = line_m.cross(&guide);
        let p = if p.norm() > 0.0 { p.normalize() } else { p0 };
        let mut inc = [0.0; MODULES];
        inc[m] = heading_m - headings[m];
        for i in (0..MODULES).filter(|&i| i != m) {
            let line = morph.center_h(i).cross(&p);
            let normal = Vector2::new(line.x, line.y);
            if normal.norm() <= 1e-12 {
                continue;
            }
            inc[i] = angle::wrap_half(normal.y.atan2(normal.x) - headings[i]);
        }
        (inc, p)
    };

    let limit = gains.max_rate * dt * (1.0 + 1e-9);
    let feasible = |inc: &[f64; MODULES]| inc.iter().all(|d| d.abs() <= limit);
    let (mut inc, mut icr) = follow(1.0);
    let mut fraction = 1.0;
    if !feasible(&inc) {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if feasible(&follow(mid).0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        fraction = lo;
        (inc, icr) = follow(lo);
        if !feasible(&inc) {
            // Starting set was not concurrent; converge over several steps.
            for d in inc.iter_mut() {
                *d = d.clamp(-limit, limit);
            }
        }
    }

    let arrived = arriving && fraction == 1.0;
    if arrived {
        for i in 0..MODULES {
            if state.defined[i] && (inc[i] - errors[i]).abs() < 1e-9 {
                inc[i] = errors[i];
            }
        }
    }

    SteeringPlan {
        regime: Regime::Concurrent,
        reference: m,
        lambda: lambda_ratio(headings[m], inc[m]),
        rates: inc.map(|d| d / dt),
        icr,
        arrived,
    }
}

/// Fallback when the guide line is degenerate: every module covers the
/// same fraction of its error as the reference module.
fn proportional_rates(
    state: &SteeringState,
    errors: &[f64; MODULES],
    morph: &Morphology,
    gains: &SteeringGains,
    pid: &mut Pid,
    dt: f64,
    m: usize,
) -> SteeringPlan {
    let step = reference_step(errors[m], pid, gains, dt);
    let ratio = if errors[m] == 0.0 { 0.0 } else { step / errors[m] };
    let inc: [f64; MODULES] = errors.map(|e| e * ratio);
    let next: [f64; MODULES] = std::array::from_fn(|i| state.steer[i] + inc[i]);
    SteeringPlan {
        regime: Regime::Concurrent,
        reference: m,
        lambda: lambda_ratio(morph.heading(m, state.steer[m]), inc[m]),
        rates: inc.map(|d| d / dt),
        icr: current_icr(morph, &next, &state.target),
        arrived: ratio == 1.0,
    }
}

/// Follower increments from scaling every heading tangent by the same
/// factor as the reference module.
///
/// This keeps the set concurrent only for special layouts (for example
/// modules on one line); it is kept for comparison with
/// [`concurrent_rates`].
pub fn tangent_scaled_increments(
    morph: &Morphology,
    steer: &[f64; MODULES],
    reference: usize,
    increment: f64,
) -> [f64; MODULES] {
    let headings: [f64; MODULES] = std::array::from_fn(|i| morph.heading(i, steer[i]));
    let lambda = lambda_ratio(headings[reference], increment);
    std::array::from_fn(|i| {
        if i == reference {
            increment
        } else {
            let next = (lambda * headings[i].tan()).atan();
            angle::wrap_half(next - headings[i])
        }
    })
}

/// Coefficients `k` of a linear relation `sum_i k_i cot(psi_i) = 0` that
/// holds for every concurrent heading set `psi` of the layout.
///
/// Such a relation exists only when at least three module centers share
/// the same x coordinate. When all four do, the relation not involving
/// module 3 is returned. Coefficients are normalized so that the first
/// non-zero one is 1.
pub fn cot_relation(morph: &Morphology) -> Option<[f64; MODULES]> {
    let tol = 1e-12 * morph.params.module_length;
    for a in 0..MODULES {
        let group: Vec<usize> = (0..MODULES)
            .filter(|&i| (morph.centers[i].x - morph.centers[a].x).abs() <= tol)
            .collect();
        if group.len() < 3 {
            continue;
        }
        let trio = if group.len() == MODULES {
            [0, 1, 3]
        } else {
            [group[0], group[1], group[2]]
        };
        let y = trio.map(|i| morph.centers[i].y);
        let raw = [y[1] - y[2], y[2] - y[0], y[0] - y[1]];
        let mut coeffs = [0.0; MODULES];
        for (slot, value) in trio.iter().zip(raw) {
            coeffs[*slot] = value / raw[0];
        }
        return Some(coeffs);
    }
    None
}

/// Residual of [`cot_relation`] coefficients on a steering set.
///
/// The relation is evaluated multiplied through by the sines of the
/// participating headings, `sum_i k_i cos(psi_i) prod_{j != i} sin(psi_j)`,
/// which stays finite when a heading is a multiple of pi. The result is
/// normalized by `sum |k_i|`.
pub fn cot_relation_residual(
    morph: &Morphology,
    coeffs: &[f64; MODULES],
    steer: &[f64; MODULES],
) -> f64 {
    let psi: [f64; MODULES] = std::array::from_fn(|i| morph.heading(i, steer[i]));
    let active: Vec<usize> = (0..MODULES).filter(|&i| coeffs[i] != 0.0).collect();
    let sum: f64 = active
        .iter()
        .map(|&i| {
            let others: f64 = active.iter().filter(|&&j| j != i).map(|&j| psi[j].sin()).product();
            coeffs[i] * psi[i].cos() * others
        })
        .sum();
    let scale: f64 = coeffs.iter().map(|k| k.abs()).sum();
    sum.abs() / scale
}

/// Stateful steering controller.
#[derive(Debug, Clone)]
pub struct SteeringController {
    pub gains: SteeringGains,
    reference_pid: Pid,
    parallel_pid: Pid,
    last_regime: Regime,
}

impl SteeringController {
    pub fn new(gains: SteeringGains) -> Self {
        Self {
            gains,
            reference_pid: Pid::new(gains.pid, gains.max_rate),
            parallel_pid: Pid::new(gains.pid, gains.max_rate),
            last_regime: Regime::Parallel,
        }
    }

    pub fn step(
        &mut self,
        morph: &Morphology,
        steer: &[f64; MODULES],
        icr: &IcrTarget,
        dt: f64,
    ) -> (SteeringState, SteeringPlan) {
        let state = desired_steering(morph, icr, steer);
        let regime = classify_regime(morph, steer, icr);
        if regime != self.last_regime {
            self.reference_pid.reset();
            self.parallel_pid.reset();
            self.last_regime = regime;
        }
        let plan = match regime {
            Regime::Parallel => {
                let heading = morph.heading(0, steer[0]);
                let gamma_error = angle::wrap_half(icr.gamma - heading);
                let rate = parallel_rates(gamma_error, &mut self.parallel_pid, &self.gains, dt);
                let next = heading + rate * dt;
                SteeringPlan {
                    regime,
                    reference: 0,
                    lambda: lambda_ratio(heading, rate * dt),
                    rates: [rate; MODULES],
                    icr: Vector3::new(-next.sin(), next.cos(), 0.0),
                    arrived: rate * dt == gamma_error,
                }
            }
            Regime::Concurrent => {
                concurrent_rates(&state, morph, &self.gains, &mut self.reference_pid, dt)
            }
        };
        (state, plan)
    }
}
