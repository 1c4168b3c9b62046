use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector2;
use proptest::prelude::*;

use htetro::audit::{steering_transient, IcrSample};
use htetro::geometry::{build_morphology, wheel_axis_line, GeometricParams, Morphology, Shape};
use htetro::icr::{desired_radius, IcrTarget};
use htetro::steering::{
    concurrency_residual, cot_relation, cot_relation_residual, desired_steering, SteeringController,
    SteeringGains,
};

fn shape() -> impl Strategy<Value = Shape> {
    prop::sample::select(Shape::ALL.to_vec())
}

fn target() -> impl Strategy<Value = IcrTarget> {
    (-FRAC_PI_2..FRAC_PI_2, 0.0..9.8f64, any::<bool>()).prop_map(|(g, r, neg)| {
        let s = if neg { -1.0 } else { 1.0 };
        IcrTarget::new(g, s * r, s, 10.0)
    })
}

fn morph(s: Shape) -> Morphology {
    build_morphology(s, GeometricParams::default())
}

proptest! {
    #[test]
    fn desired_set_is_concurrent(s in shape(), icr in target()) {
        let m = morph(s);
        let steer = desired_steering(&m, &icr, &[0.0; 4]).desired;
        prop_assert!(concurrency_residual(&m, &steer).residual < 1e-9);
    }

    /// Every wheel axis passes through the ICR, and every heading is
    /// perpendicular to the module's radius vector.
    #[test]
    fn desired_set_is_tangent(s in shape(), icr in target()) {
        prop_assume!(!icr.is_saturated());
        let m = morph(s);
        let state = desired_steering(&m, &icr, &[0.0; 4]);
        let q = icr.point();
        let q = Vector2::new(q.x, q.y);
        for i in 0..4 {
            let line = wheel_axis_line(&m, i, state.desired[i]);
            prop_assert!(line.distance(&q).abs() < 1e-9);
            let h = m.heading(i, state.desired[i]);
            let radial = m.centers[i] - q;
            prop_assert!((h.cos() * radial.x + h.sin() * radial.y).abs() < 1e-9);
            prop_assert!((state.radii[i].abs() - radial.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn transient_keeps_concurrency(s in shape(), seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = IcrSample::random(&mut rng, 10.0).target(10.0);
        let b = IcrSample::random(&mut rng, 10.0).target(10.0);
        let r = steering_transient(&morph(s), &a, &b, SteeringGains::default(), 0.01, 5000);
        prop_assert!(r.arrived, "{r:?}");
        prop_assert!(r.simultaneous(), "{r:?}");
        prop_assert!(r.max_residual < 1e-6, "{r:?}");
    }

    #[test]
    fn radius_never_exceeds_limit(v in -5.0..5.0f64, w in -5.0..5.0f64) {
        prop_assert!(desired_radius(v, w, 10.0).abs() <= 10.0);
    }
}

/// Shrinking the step 100x keeps the transient concurrent, so the small
/// residual is not an artifact of the coarse step.
#[test]
fn transient_matches_fine_step_oracle() {
    for s in [Shape::L, Shape::S, Shape::O] {
        let m = morph(s);
        let a = IcrTarget::new(0.3, 1.5, 1.0, 10.0);
        let b = IcrTarget::new(-0.8, -0.6, -1.0, 10.0);
        let coarse = steering_transient(&m, &a, &b, SteeringGains::default(), 0.01, 5000);
        let fine = steering_transient(&m, &a, &b, SteeringGains::default(), 1e-4, 500_000);
        assert!(coarse.arrived && fine.arrived);
        assert!(fine.max_residual < 1e-6 && coarse.max_residual < 1e-6);
    }
}

#[test]
fn lambda_is_one_at_rest() {
    let m = morph(Shape::T);
    let icr = IcrTarget::new(0.2, 2.0, 1.0, 10.0);
    let steer = desired_steering(&m, &icr, &[0.0; 4]).desired;
    let mut ctl = SteeringController::new(SteeringGains::default());
    let (_, plan) = ctl.step(&m, &steer, &icr, 0.01);
    assert_eq!(plan.lambda, 1.0);
    assert_eq!(plan.rates, [0.0; 4]);
}

/// For I the modules sit at y = 1.5, 0.5, -0.5, -1.5 quarter-lengths on one
/// line, so cot psi is affine in y: cot1 - 1.5 cot2 + 0.5 cot4 = 0.
#[test]
fn i_shape_relation_matches_hand_derivation() {
    let m = morph(Shape::I);
    let k = cot_relation(&m).expect("collinear layout");
    let expected = [1.0, -1.5, 0.0, 0.5];
    for i in 0..4 {
        assert!((k[i] - expected[i]).abs() < 1e-12, "{k:?}");
    }
    let icr = IcrTarget::new(0.7, 1.3, 1.0, 10.0);
    let steer = desired_steering(&m, &icr, &[0.0; 4]).desired;
    assert!(cot_relation_residual(&m, &k, &steer) < 1e-9);
}

#[test]
fn square_has_no_constant_relation() {
    assert!(cot_relation(&morph(Shape::O)).is_none());
}
