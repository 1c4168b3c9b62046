use serde::{Deserialize, Serialize};

/// PID gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    #[serde(default)]
    pub ki: f64,
    #[serde(default)]
    pub kd: f64,
}

impl PidGains {
    pub fn p(kp: f64) -> Self {
        Self {
            kp,
            ki: 0.0,
            kd: 0.0,
        }
    }
}

/// PID controller with symmetric output clamp and conditional-integration
/// anti-windup.
#[derive(Debug, Clone, PartialEq)]
pub struct Pid {
    pub gains: PidGains,
    pub limit: f64,
    integral: f64,
    prev_error: Option<f64>,
}

impl Pid {
    pub fn new(gains: PidGains, limit: f64) -> Self {
        Self {
            gains,
            limit,
            integral: 0.0,
            prev_error: None,
        }
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_error = None;
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    /// Returns the clamped output for `error`.
    pub fn update(&mut self, error: f64, dt: f64) -> f64 {
        let derivative = match self.prev_error {
            Some(prev) if dt > 0.0 => (error - prev) / dt,
            _ => 0.0,
        };
        self.prev_error = Some(error);

        let candidate = self.integral + error * dt;
        let raw = self.gains.kp * error + self.gains.ki * candidate + self.gains.kd * derivative;
        let out = raw.clamp(-self.limit, self.limit);
        // Integrate only while unsaturated, or when the error drives the
        // output back inside the limit.
        if out == raw || raw.signum() != error.signum() {
            self.integral = candidate;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proportional() {
        let mut pid = Pid::new(PidGains::p(1.0), 10.0);
        assert_eq!(pid.update(0.2, 0.01), 0.2);
        assert_eq!(pid.update(0.0, 0.01), 0.0);
    }

    #[test]
    fn clamps_output() {
        let mut pid = Pid::new(PidGains::p(100.0), 2.0);
        assert_eq!(pid.update(1.0, 0.01), 2.0);
        assert_eq!(pid.update(-1.0, 0.01), -2.0);
    }

    #[test]
    fn integrator_does_not_wind_up_in_saturation() {
        let gains = PidGains {
            kp: 1.0,
            ki: 5.0,
            kd: 0.0,
        };
        let mut pid = Pid::new(gains, 1.0);
        for _ in 0..1000 {
            assert_eq!(pid.update(5.0, 0.01), 1.0);
        }
        assert_eq!(pid.integral(), 0.0);
        // Leaves saturation as soon as the error falls below the limit.
        let out = pid.update(0.5, 0.01);
        assert!(out < 1.0);

        let mut free = Pid::new(gains, f64::INFINITY);
        for _ in 0..100 {
            free.update(0.1, 0.01);
        }
        assert!((free.integral() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn derivative_on_error_change() {
        let gains = PidGains {
            kp: 0.0,
            ki: 0.0,
            kd: 0.5,
        };
        let mut pid = Pid::new(gains, 100.0);
        assert_eq!(pid.update(1.0, 0.1), 0.0);
        assert!((pid.update(2.0, 0.1) - 5.0).abs() < 1e-12);
    }
}
