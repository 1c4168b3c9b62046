//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines are always printed; the
//! process exits non-zero when any criterion fails.

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use htetro::audit::{steering_transient, IcrSample};
use htetro::geometry::{build_morphology, GeometricParams, Morphology, Shape};
use htetro::icr::{desired_radius, IcrTarget};
use htetro::kinematics::{body_twist, inverse_kinematics, module_to_wheels, Twist, WheelRates};
use htetro::simulator::{
    zigzag_course, run_waypoints, step_plant, Disturbance, NoiseConfig, SimConfig, TrajectoryLog,
    Waypoint,
};
use htetro::steering::{cot_relation, cot_relation_residual, desired_steering, SteeringGains};
use htetro::velocity::{wheel_commands, DriveLimits};
use htetro::Pose;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn morph(shape: Shape) -> Morphology {
    build_morphology(shape, GeometricParams::default())
}

fn kinematic_round_trip() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for shape in Shape::ALL {
        let m = morph(shape);
        for _ in 0..1000 {
            let t = Twist::body(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-3.0..3.0));
            let mv = inverse_kinematics(&m, &t, None);
            let back = body_twist(&m, &mv.speed, &mv.steer);
            worst = worst.max((back.as_vector() - t.as_vector()).amax());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-9 && elapsed < Duration::from_secs(1),
        format!("max error {worst:.2e}, {:.3} s", elapsed.as_secs_f64()),
    )
}

fn concurrency_preservation() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let gains = SteeringGains::default();
    let (mut worst, mut failures, mut steps) = (0.0f64, 0usize, 0usize);
    for shape in Shape::ALL {
        let m = morph(shape);
        for _ in 0..500 {
            let a = IcrSample::random(&mut rng, 10.0).target(10.0);
            let b = IcrSample::random(&mut rng, 10.0).target(10.0);
            let r = steering_transient(&m, &a, &b, gains, 0.01, 5000);
            worst = worst.max(r.max_residual);
            steps = steps.max(r.steps);
            if !(r.arrived && r.simultaneous() && r.max_residual < 1e-6) {
                failures += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && elapsed < Duration::from_secs(30),
        format!(
            "3500 transients, max residual {worst:.2e}, longest {steps} steps, {failures} failures, {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn cot_relation_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut parts = Vec::new();
    let mut pass = true;
    for shape in Shape::ALL {
        let m = morph(shape);
        let Some(k) = cot_relation(&m) else {
            pass = false;
            parts.push(format!("{shape}: no constant relation"));
            continue;
        };
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let icr = IcrSample::random(&mut rng, 10.0).target(10.0);
            let steer = desired_steering(&m, &icr, &[0.0; 4]).desired;
            let r = cot_relation_residual(&m, &k, &steer);
            worst = if r.is_finite() { worst.max(r) } else { f64::INFINITY };
        }
        pass &= worst < 1e-9;
        parts.push(format!("{shape}: {worst:.1e}"));
    }
    outcome(pass, parts.join(", "))
}

fn radius_saturation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let r_max = 10.0;
    let (mut bound_ok, mut worst_rel) = (true, 0.0f64);
    for _ in 0..100_000 {
        let v = rng.gen_range(0.0..1.0) * 10f64.powf(rng.gen_range(-6.0..2.0));
        let w = rng.gen_range(-1.0..1.0) * 10f64.powf(rng.gen_range(-8.0..2.0));
        let r = desired_radius(v, w, r_max);
        bound_ok &= r.abs() <= r_max;
        if (v / (w * r_max)).abs() < 0.1 {
            worst_rel = worst_rel.max((r - v / w).abs() / (v / w).abs());
        }
    }
    outcome(
        bound_ok && worst_rel < 0.0034,
        format!("bound holds: {bound_ok}, worst unsaturated deviation {:.4}%", worst_rel * 100.0),
    )
}

fn turning_course() -> Vec<Waypoint> {
    vec![
        Waypoint::new(0.5, 0.5, 1.0),
        Waypoint::new(1.0, 0.0, -1.5),
        Waypoint::new(0.0, 0.0, 3.0),
    ]
}

fn wheel_limit(runs: &[TrajectoryLog]) -> Outcome {
    let limits = DriveLimits::default();
    let max_rate = runs.iter().map(|l| l.max_wheel_rate()).fold(0.0, f64::max);
    let saturated: usize = runs.iter().map(|l| l.summary().saturation_count).sum();

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = GeometricParams::default();
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..10_000 {
        let v: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
        let b: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-6.0..6.0));
        let cmd = wheel_commands(&v, &b, &params, &limits);
        for i in 0..4 {
            for j in 0..4 {
                if v[j] != 0.0 && cmd.speed[j] != 0.0 {
                    let before = v[i] / v[j];
                    let after = cmd.speed[i] / cmd.speed[j];
                    worst_ratio = worst_ratio.max((after - before).abs() / before.abs().max(1.0));
                }
            }
        }
    }
    outcome(
        max_rate <= limits.phi_max + 1e-12 && worst_ratio <= 1e-12,
        format!(
            "max wheel rate {max_rate:.6} over {} runs ({saturated} saturated steps), worst ratio drift {worst_ratio:.1e}",
            runs.len()
        ),
    )
}

fn course_replay(runs: &mut Vec<TrajectoryLog>) -> Outcome {
    let course = zigzag_course();
    let mut pass = true;
    let mut slowest: f64 = 0.0;
    let mut noisy_worst: f64 = 0.0;
    let mut finished = 0;
    for shape in Shape::ALL {
        let m = morph(shape);
        let start = Instant::now();
        let log = run_waypoints(&m, &course, &SimConfig::default());
        let elapsed = start.elapsed().as_secs_f64();
        slowest = slowest.max(elapsed);
        pass &= log.completed && log.arrivals.len() == course.len() && elapsed < 10.0;
        let arrived_within = course.last().is_some_and(|w| w.reached(&log.final_pose));
        pass &= arrived_within && log.max_moving_residual() < 1e-6;
        finished += usize::from(log.completed && arrived_within);
        runs.push(log);

        let noisy = SimConfig {
            noise: NoiseConfig {
                sigma_pos: 0.02,
                sigma_theta: 0.0,
            },
            seed: 11,
            ..SimConfig::default()
        };
        let log = run_waypoints(&m, &course, &noisy);
        noisy_worst = noisy_worst.max(log.rmse_cross_track());
        runs.push(log);
    }
    pass &= noisy_worst < 0.16;
    outcome(
        pass,
        format!("{finished}/7 shapes completed the course, slowest run {slowest:.3} s, noisy cross-track RMSE worst {noisy_worst:.4} m"),
    )
}

fn disturbance_recovery(runs: &mut Vec<TrajectoryLog>) -> Outcome {
    let course = zigzag_course();
    let jump_time = 3.0;
    let mut worst_recovery: f64 = 0.0;
    let mut pass = true;
    for shape in Shape::ALL {
        let cfg = SimConfig {
            disturbances: vec![Disturbance {
                time: jump_time,
                dx: 0.2,
                dy: 0.0,
                dtheta: 0.0,
            }],
            ..SimConfig::default()
        };
        let log = run_waypoints(&morph(shape), &course, &cfg);
        let jumped = log
            .samples
            .iter()
            .find(|s| s.t >= jump_time)
            .map_or(0.0, |s| s.cross_track);
        let recovered = log
            .samples
            .iter()
            .filter(|s| s.t >= jump_time)
            .find(|s| s.cross_track < 0.05)
            .map(|s| s.t - jump_time);
        pass &= jumped > 0.19 && log.completed && log.max_moving_residual() < 1e-6;
        match recovered {
            Some(t) if t <= 5.0 => worst_recovery = worst_recovery.max(t),
            _ => pass = false,
        }
        runs.push(log);
    }
    outcome(pass, format!("0.2 m jump recovered within {worst_recovery:.2} s (limit 5 s)"))
}

fn plant_arc() -> Outcome {
    let mut worst: f64 = 0.0;
    let dt = 0.01;
    for shape in Shape::ALL {
        let m = morph(shape);
        let icr = IcrTarget::new(0.4, 0.8, 1.0, 10.0);
        let twist = icr.twist(0.2, 0.0);
        let mv = inverse_kinematics(&m, &twist, None);
        let mut wheels = WheelRates::default();
        for i in 0..4 {
            (wheels.left[i], wheels.right[i]) = module_to_wheels(mv.speed[i], 0.0, &m.params);
        }
        let start = Pose::new(0.3, -0.2, 0.7);
        // World-frame center of the circle.
        let q = icr.point();
        let (s, c) = start.theta.sin_cos();
        let (cx, cy) = (start.x + c * q.x - s * q.y, start.y + s * q.x + c * q.y);
        let omega = twist.omega;
        let steps = (TAU / omega.abs() / dt).ceil() as usize;
        let mut pose = start;
        let mut steer = mv.steer;
        for k in 1..=steps {
            (pose, steer) = step_plant(&pose, &steer, &wheels, &m, dt);
            let phi = omega * k as f64 * dt;
            let (sp, cp) = phi.sin_cos();
            let (dx, dy) = (start.x - cx, start.y - cy);
            let ex = cx + cp * dx - sp * dy;
            let ey = cy + sp * dx + cp * dy;
            worst = worst.max(((pose.x - ex).powi(2) + (pose.y - ey).powi(2)).sqrt());
        }
    }
    outcome(worst < 1e-6, format!("max deviation from analytic circle {worst:.2e} m over one revolution"))
}

fn main() {
    let mut runs = Vec::new();
    let mut results: Vec<(&str, Outcome)> = vec![
        ("1 kinematic round-trip", kinematic_round_trip()),
        ("2 concurrency preservation", concurrency_preservation()),
        ("3 cotangent shape relation", cot_relation_check()),
        ("4 radius saturation", radius_saturation()),
    ];
    let replay = course_replay(&mut runs);
    let disturbance = disturbance_recovery(&mut runs);
    for shape in Shape::ALL {
        runs.push(run_waypoints(&morph(shape), &turning_course(), &SimConfig::default()));
    }
    results.push(("5 wheel limit", wheel_limit(&runs)));
    results.push(("6 waypoint course replay", replay));
    results.push(("7 disturbance recovery", disturbance));
    results.push(("8 plant integrator arc", plant_arc()));

    let mut failed = 0;
    for (name, o) in &results {
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
