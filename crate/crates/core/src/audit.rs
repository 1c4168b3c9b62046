//! Randomized invariant audit with replayable samples.
//!
//! Each sample is drawn from a generator seeded by `(seed, shape,
//! iteration)`, so a failing sample is reproduced exactly from those three
//! values.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{build_morphology, placement_residual, GeometricParams, Morphology, Shape, MODULES};
use crate::icr::IcrTarget;
use crate::kinematics::{body_twist, inverse_kinematics, Twist};
use crate::steering::{
    concurrency_residual, cot_relation, cot_relation_residual, desired_steering, SteeringController,
    SteeringGains,
};

pub const ROUND_TRIP_TOL: f64 = 1e-9;
pub const CONVERGED_TOL: f64 = 1e-9;
pub const TRANSIENT_TOL: f64 = 1e-6;
pub const COT_TOL: f64 = 1e-9;
pub const PLACEMENT_TOL: f64 = 1e-12;
pub const ARRIVAL_TOL: f64 = 1e-4;

/// Random ICR target in polar form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcrSample {
    pub gamma: f64,
    pub radius: f64,
    pub drive_sign: f64,
}

impl IcrSample {
    pub fn target(&self, r_max: f64) -> IcrTarget {
        IcrTarget::new(self.gamma, self.radius, self.drive_sign, r_max)
    }

    /// Draws a target; roughly one in eight is saturated and one in
    /// sixteen is a spin about the centroid.
    pub fn random(rng: &mut impl Rng, r_max: f64) -> Self {
        let drive_sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let gamma = rng.gen_range(-FRAC_PI_2..=FRAC_PI_2);
        let pick: f64 = rng.gen();
        let magnitude = if pick < 0.125 {
            r_max
        } else if pick < 0.1875 {
            0.0
        } else {
            r_max * (rng.gen_range(0.0..3.0f64)).tanh() * 0.99
        };
        Self {
            gamma,
            radius: drive_sign * magnitude,
            drive_sign,
        }
    }
}

/// Everything drawn for one audit iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditSample {
    pub shape: Shape,
    pub seed: u64,
    pub iteration: u64,
    pub twist: [f64; 3],
    pub start: IcrSample,
    pub target: IcrSample,
    /// Angle added to module 1's converged steering before the
    /// concurrency check (rad).
    pub perturb: f64,
}

impl AuditSample {
    pub fn generate(shape: Shape, seed: u64, iteration: u64, perturb: f64, r_max: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape_index = Shape::ALL.iter().position(|s| *s == shape).unwrap_or(0) as u64;
        rng.set_stream(iteration * Shape::ALL.len() as u64 + shape_index);
        Self {
            shape,
            seed,
            iteration,
            twist: [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-3.0..3.0),
            ],
            start: IcrSample::random(&mut rng, r_max),
            target: IcrSample::random(&mut rng, r_max),
            perturb,
        }
    }
}

/// Outcome of one steering transient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransientReport {
    pub steps: usize,
    pub max_residual: f64,
    pub arrived: bool,
    /// Largest remaining steering error at the end (rad).
    pub final_error: f64,
    /// Last step on which each module moved.
    pub last_move: [usize; MODULES],
}

impl TransientReport {
    /// All modules stopped within one step of each other.
    pub fn simultaneous(&self) -> bool {
        let lo = self.last_move.iter().min().copied().unwrap_or(0);
        let hi = self.last_move.iter().max().copied().unwrap_or(0);
        hi - lo <= 1
    }
}

/// Steers from the converged set of `start` to `target` and records the
/// concurrency residual at every step.
pub fn steering_transient(
    morph: &Morphology,
    start: &IcrTarget,
    target: &IcrTarget,
    gains: SteeringGains,
    dt: f64,
    max_steps: usize,
) -> TransientReport {
    let mut steer = desired_steering(morph, start, &[0.0; MODULES]).desired;
    let mut ctl = SteeringController::new(gains);
    let mut report = TransientReport {
        steps: 0,
        max_residual: concurrency_residual(morph, &steer).residual,
        arrived: false,
        final_error: 0.0,
        last_move: [0; MODULES],
    };
    for step in 1..=max_steps {
        let (state, plan) = ctl.step(morph, &steer, target, dt);
        if state.max_error() == 0.0 {
            report.arrived = true;
            break;
        }
        for i in 0..MODULES {
            let inc = plan.rates[i] * dt;
            if inc != 0.0 {
                report.last_move[i] = step;
            }
            steer[i] += inc;
        }
        report.steps = step;
        report.max_residual = report.max_residual.max(concurrency_residual(morph, &steer).residual);
        if plan.arrived {
            report.arrived = true;
            break;
        }
    }
    let state = desired_steering(morph, target, &steer);
    report.final_error = state.max_error();
    report.arrived &= report.final_error < ARRIVAL_TOL;
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    RoundTrip,
    Concurrency,
    Placement,
    CotRelation,
    Transient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub check: Check,
    pub value: f64,
    pub tolerance: f64,
    pub sample: AuditSample,
}

/// Per-shape audit tallies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeAudit {
    pub shape: Shape,
    pub iterations: u64,
    pub max_round_trip: f64,
    pub max_converged_residual: f64,
    pub placement_residual: f64,
    /// `None` when the layout admits no constant cotangent relation.
    pub max_cot_residual: Option<f64>,
    pub max_transient_residual: f64,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditOptions {
    pub seed: u64,
    pub iterations: u64,
    pub perturb: f64,
    pub params: GeometricParams,
    pub gains: SteeringGains,
    pub r_max: f64,
    pub dt: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            iterations: 1000,
            perturb: 0.0,
            params: GeometricParams::default(),
            gains: SteeringGains::default(),
            r_max: 10.0,
            dt: 0.01,
        }
    }
}

/// Runs every check on one sample, returning the failures.
pub fn check_sample(sample: &AuditSample, opts: &AuditOptions) -> (SampleValues, Vec<Failure>) {
    let morph = build_morphology(sample.shape, opts.params);
    let mut failures = Vec::new();
    let mut fail = |check, value: f64, tolerance| {
        if !(value < tolerance) {
            failures.push(Failure {
                check,
                value,
                tolerance,
                sample: *sample,
            });
        }
    };

    let [vx, vy, omega] = sample.twist;
    let twist = Twist::body(vx, vy, omega);
    let mv = inverse_kinematics(&morph, &twist, None);
    let back = body_twist(&morph, &mv.speed, &mv.steer);
    let round_trip = (back.as_vector() - twist.as_vector()).amax();
    fail(Check::RoundTrip, round_trip, ROUND_TRIP_TOL);

    let target = sample.target.target(opts.r_max);
    let mut converged = desired_steering(&morph, &target, &[0.0; MODULES]).desired;
    converged[0] += sample.perturb;
    let residual = concurrency_residual(&morph, &converged).residual;
    fail(Check::Concurrency, residual, CONVERGED_TOL);

    let cot = cot_relation(&morph).map(|k| cot_relation_residual(&morph, &k, &converged));
    if let Some(value) = cot {
        fail(Check::CotRelation, value, COT_TOL);
    }

    let start = sample.start.target(opts.r_max);
    let transient = steering_transient(&morph, &start, &target, opts.gains, opts.dt, 5000);
    let transient_value = if transient.arrived && transient.simultaneous() {
        transient.max_residual
    } else {
        f64::INFINITY
    };
    fail(Check::Transient, transient_value, TRANSIENT_TOL);

    (
        SampleValues {
            round_trip,
            residual,
            cot,
            transient: transient_value,
        },
        failures,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleValues {
    pub round_trip: f64,
    pub residual: f64,
    pub cot: Option<f64>,
    pub transient: f64,
}

pub fn audit_shape(shape: Shape, opts: &AuditOptions) -> ShapeAudit {
    let morph = build_morphology(shape, opts.params);
    let placement = placement_residual(&morph);
    let mut out = ShapeAudit {
        shape,
        iterations: opts.iterations,
        max_round_trip: 0.0,
        max_converged_residual: 0.0,
        placement_residual: placement,
        max_cot_residual: cot_relation(&morph).map(|_| 0.0),
        max_transient_residual: 0.0,
        failures: Vec::new(),
    };
    if !(placement < PLACEMENT_TOL) {
        out.failures.push(Failure {
            check: Check::Placement,
            value: placement,
            tolerance: PLACEMENT_TOL,
            sample: AuditSample::generate(shape, opts.seed, 0, opts.perturb, opts.r_max),
        });
    }
    for iteration in 0..opts.iterations {
        let sample = AuditSample::generate(shape, opts.seed, iteration, opts.perturb, opts.r_max);
        let (values, failures) = check_sample(&sample, opts);
        out.max_round_trip = out.max_round_trip.max(values.round_trip);
        out.max_converged_residual = out.max_converged_residual.max(values.residual);
        if let (Some(max), Some(v)) = (out.max_cot_residual.as_mut(), values.cot) {
            *max = max.max(v);
        }
        out.max_transient_residual = out.max_transient_residual.max(values.transient);
        out.failures.extend(failures);
    }
    out
}

/// Replays a serialized sample.
pub fn replay(sample: &AuditSample, opts: &AuditOptions) -> Vec<Failure> {
    let regenerated =
        AuditSample::generate(sample.shape, sample.seed, sample.iteration, sample.perturb, opts.r_max);
    check_sample(&regenerated, opts).1
}
