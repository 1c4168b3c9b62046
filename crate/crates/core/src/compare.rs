//! Full controller versus independent pseudo-inverse steering on the same
//! course.

use serde::Serialize;

use crate::controller::Mode;
use crate::geometry::Morphology;
use crate::simulator::{run_waypoints, RunSummary, SimConfig, TrajectoryLog, Waypoint};

/// Decades of the residual histogram: `<= 1e-15`, then one bin per decade
/// up to `>= 1e0`.
pub const HISTOGRAM_DECADES: std::ops::RangeInclusive<i32> = -15..=0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualHistogram {
    /// Upper edge exponent of each bin.
    pub decades: Vec<i32>,
    pub counts: Vec<usize>,
    pub max: f64,
    pub samples: usize,
}

/// Histogram of the residual over steps with any module moving.
pub fn residual_histogram(log: &TrajectoryLog) -> ResidualHistogram {
    let decades: Vec<i32> = HISTOGRAM_DECADES.collect();
    let mut counts = vec![0; decades.len()];
    let mut max: f64 = 0.0;
    let mut samples = 0;
    for s in log.samples.iter().filter(|s| s.moving()) {
        samples += 1;
        max = max.max(s.residual);
        let exp = if s.residual > 0.0 {
            s.residual.log10().ceil() as i32
        } else {
            i32::MIN
        };
        let idx = decades.iter().position(|d| exp <= *d).unwrap_or(decades.len() - 1);
        counts[idx] += 1;
    }
    ResidualHistogram {
        decades,
        counts,
        max,
        samples,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub full: RunSummary,
    pub pinv: RunSummary,
    pub full_histogram: ResidualHistogram,
    pub pinv_histogram: ResidualHistogram,
}

pub fn compare_pinv(morph: &Morphology, waypoints: &[Waypoint], cfg: &SimConfig) -> Comparison {
    let run = |mode| {
        let cfg = SimConfig {
            mode,
            ..cfg.clone()
        };
        run_waypoints(morph, waypoints, &cfg)
    };
    let full = run(Mode::Full);
    let pinv = run(Mode::PseudoInverse);
    Comparison {
        full: full.summary(),
        pinv: pinv.summary(),
        full_histogram: residual_histogram(&full),
        pinv_histogram: residual_histogram(&pinv),
    }
}
