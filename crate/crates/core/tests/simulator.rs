use std::f64::consts::TAU;

use approx::assert_abs_diff_eq;

use htetro::geometry::{build_morphology, GeometricParams, Shape};
use htetro::icr::IcrTarget;
use htetro::kinematics::{inverse_kinematics, module_to_wheels, WheelRates};
use htetro::simulator::{
    zigzag_course, run_waypoints, step_plant, Disturbance, NoiseConfig, NoiseSource, SimConfig, Waypoint,
};
use htetro::Pose;

/// Constant wheel rates about a fixed ICR trace the circle
/// `c + R(w t) (p0 - c)` exactly.
#[test]
fn constant_icr_traces_analytic_circle() {
    let m = build_morphology(Shape::L, GeometricParams::default());
    let icr = IcrTarget::new(-0.5, 0.6, 1.0, 10.0);
    let twist = icr.twist(0.15, 0.0);
    let mv = inverse_kinematics(&m, &twist, None);
    let mut wheels = WheelRates::default();
    for i in 0..4 {
        (wheels.left[i], wheels.right[i]) = module_to_wheels(mv.speed[i], 0.0, &m.params);
    }
    let q = icr.point();
    let dt = 0.01;
    let steps = (TAU / twist.omega.abs() / dt).round() as usize;
    let mut pose = Pose::default();
    let mut steer = mv.steer;
    for _ in 0..steps {
        (pose, steer) = step_plant(&pose, &steer, &wheels, &m, dt);
    }
    let phi = twist.omega * steps as f64 * dt;
    let (s, c) = phi.sin_cos();
    let (ex, ey) = (q.x + c * -q.x - s * -q.y, q.y + s * -q.x + c * -q.y);
    assert_abs_diff_eq!(pose.x, ex, epsilon = 1e-6);
    assert_abs_diff_eq!(pose.y, ey, epsilon = 1e-6);
    assert_eq!(steer, mv.steer);
}

#[test]
fn noise_has_requested_spread() {
    let cfg = NoiseConfig {
        sigma_pos: 0.02,
        sigma_theta: 0.01,
    };
    let mut src = NoiseSource::new(3);
    let n = 10_000;
    let (mut sx, mut sxx, mut stt) = (0.0, 0.0, 0.0);
    for _ in 0..n {
        let p = src.observe(&Pose::default(), &cfg);
        sx += p.x;
        sxx += p.x * p.x;
        stt += p.theta * p.theta;
    }
    let mean = sx / n as f64;
    let std = (sxx / n as f64 - mean * mean).sqrt();
    assert!((std / 0.02 - 1.0).abs() < 0.1, "{std}");
    assert!(((stt / n as f64).sqrt() / 0.01 - 1.0).abs() < 0.1);
    assert!(mean.abs() < 0.02 * 0.05);
}

#[test]
fn runs_are_deterministic_per_seed() {
    let m = build_morphology(Shape::S, GeometricParams::default());
    let cfg = SimConfig {
        noise: NoiseConfig {
            sigma_pos: 0.01,
            sigma_theta: 0.005,
        },
        seed: 9,
        ..SimConfig::default()
    };
    let a = run_waypoints(&m, &zigzag_course(), &cfg);
    let b = run_waypoints(&m, &zigzag_course(), &cfg);
    assert_eq!(a, b);
    let c = run_waypoints(&m, &zigzag_course(), &SimConfig { seed: 10, ..cfg });
    assert_ne!(a.samples, c.samples);
}

#[test]
fn every_shape_completes_course() {
    for s in Shape::ALL {
        let log = run_waypoints(&build_morphology(s, GeometricParams::default()), &zigzag_course(), &SimConfig::default());
        assert!(log.completed, "{s}");
        assert!(log.max_moving_residual() < 1e-6, "{s}");
        assert!(log.max_wheel_rate() <= 20.0 + 1e-12);
    }
}

#[test]
fn disturbance_is_rejected() {
    let m = build_morphology(Shape::Z, GeometricParams::default());
    let cfg = SimConfig {
        disturbances: vec![Disturbance {
            time: 2.0,
            dx: 0.0,
            dy: -0.1,
            dtheta: 0.3,
        }],
        ..SimConfig::default()
    };
    let log = run_waypoints(&m, &zigzag_course(), &cfg);
    assert!(log.completed);
    let after = log.samples.iter().find(|s| s.t >= 2.0).unwrap();
    assert_abs_diff_eq!(after.pose.theta.abs(), 0.3, epsilon = 0.05);
    assert!(log.max_moving_residual() < 1e-6);
}

#[test]
fn unreachable_course_times_out() {
    let m = build_morphology(Shape::I, GeometricParams::default());
    let cfg = SimConfig {
        max_time: 1.0,
        ..SimConfig::default()
    };
    let log = run_waypoints(&m, &[Waypoint::new(5.0, 5.0, 0.0)], &cfg);
    assert!(!log.completed);
    assert!(log.arrivals.is_empty());
}
