use proptest::prelude::*;

use htetro::geometry::GeometricParams;
use htetro::kinematics::wheels_to_module;
use htetro::velocity::{module_speeds, wheel_commands, DriveLimits};

fn quad(range: f64) -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-range..range)
}

proptest! {
    #[test]
    fn rates_respect_limit(v in quad(3.0), b in quad(8.0)) {
        let limits = DriveLimits::default();
        let cmd = wheel_commands(&v, &b, &GeometricParams::default(), &limits);
        prop_assert!(cmd.rates.max_abs() <= limits.phi_max + 1e-12);
    }

    #[test]
    fn speed_ratios_survive_scaling(v in quad(3.0), b in quad(2.0)) {
        let cmd = wheel_commands(&v, &b, &GeometricParams::default(), &DriveLimits::default());
        prop_assume!(!cmd.steering_saturated);
        for i in 0..4 {
            prop_assert!((cmd.speed[i] - cmd.speed_scale * v[i]).abs() <= 1e-12 * v[i].abs().max(1.0));
        }
        prop_assert_eq!(cmd.steer_rate, b);
    }

    /// The wheel rates decode back to the scaled module commands.
    #[test]
    fn rates_are_consistent(v in quad(3.0), b in quad(8.0)) {
        let p = GeometricParams::default();
        let cmd = wheel_commands(&v, &b, &p, &DriveLimits::default());
        for i in 0..4 {
            let (speed, rate) = wheels_to_module(cmd.rates.left[i], cmd.rates.right[i], &p);
            prop_assert!((speed - cmd.speed[i]).abs() < 1e-9);
            prop_assert!((rate - cmd.steer_rate[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn module_speeds_scale_with_radius(r in prop::array::uniform4(0.0..5.0f64), big in 0.5..9.0f64, v in -1.0..1.0f64) {
        let out = module_speeds(&r, big, v, 0.0);
        for i in 0..4 {
            prop_assert!((out[i] * big - r[i] * v).abs() < 1e-12);
        }
    }
}
