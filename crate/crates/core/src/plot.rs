//! Minimal static SVG line charts for run logs.

use std::fmt::Write;

use crate::simulator::TrajectoryLog;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Drawn as circles.
    pub markers: Vec<(f64, f64)>,
    /// Same scale on both axes.
    pub equal_aspect: bool,
}

fn bounds(chart: &Chart) -> (f64, f64, f64, f64) {
    let all = chart
        .series
        .iter()
        .flat_map(|s| s.points.iter())
        .chain(chart.markers.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    let pad = |lo: f64, hi: f64| {
        let span = (hi - lo).max(1e-9);
        (lo - 0.05 * span, hi + 0.05 * span)
    };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    if !chart.equal_aspect {
        return (x0, x1, y0, y1);
    }
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let scale = ((x1 - x0) / plot_w).max((y1 - y0) / plot_h);
    let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    (
        cx - scale * plot_w / 2.0,
        cx + scale * plot_w / 2.0,
        cy - scale * plot_h / 2.0,
        cy + scale * plot_h / 2.0,
    )
}

impl Chart {
    pub fn to_svg(&self) -> String {
        let (x0, x1, y0, y1) = bounds(self);
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            WIDTH - 2.0 * MARGIN,
            HEIGHT - 2.0 * MARGIN
        );
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                sx(fx),
                HEIGHT - MARGIN + 16.0,
                tick(fx)
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                MARGIN - 4.0,
                sy(fy) + 4.0,
                tick(fy)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );
        for (k, s) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
            let ly = MARGIN + 14.0 + 16.0 * k as f64;
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{ly:.1}" fill="{color}">{}</text>"#,
                WIDTH - MARGIN - 110.0,
                escape(&s.label)
            );
        }
        for &(x, y) in &self.markers {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="none" stroke="black"/>"#,
                sx(x),
                sy(y)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn xy_path(log: &TrajectoryLog) -> Chart {
    Chart {
        title: format!("Path, shape {}", log.shape),
        x_label: "x (m)".into(),
        y_label: "y (m)".into(),
        series: vec![Series {
            label: "centroid".into(),
            points: log.samples.iter().map(|s| (s.pose.x, s.pose.y)).collect(),
        }],
        markers: log.waypoints.iter().map(|w| (w.x, w.y)).collect(),
        equal_aspect: true,
    }
}

pub fn steering_traces(log: &TrajectoryLog) -> Chart {
    Chart {
        title: format!("Steering angles, shape {}", log.shape),
        x_label: "t (s)".into(),
        y_label: "beta (rad)".into(),
        series: (0..4)
            .map(|i| Series {
                label: format!("beta_{}", i + 1),
                points: log.samples.iter().map(|s| (s.t, s.steer[i])).collect(),
            })
            .collect(),
        markers: Vec::new(),
        equal_aspect: false,
    }
}

/// Residual on a log scale, floored at 1e-18.
pub fn residual_trace(log: &TrajectoryLog) -> Chart {
    Chart {
        title: format!("Concurrency residual, shape {}", log.shape),
        x_label: "t (s)".into(),
        y_label: "log10 residual".into(),
        series: vec![Series {
            label: "residual".into(),
            points: log
                .samples
                .iter()
                .map(|s| (s.t, s.residual.max(1e-18).log10()))
                .collect(),
        }],
        markers: Vec::new(),
        equal_aspect: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_is_well_formed_enough() {
        let chart = Chart {
            title: "a < b".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![Series {
                label: "s".into(),
                points: vec![(0.0, 0.0), (1.0, 2.0), (f64::NAN, 1.0)],
            }],
            markers: vec![(0.5, 0.5)],
            equal_aspect: true,
        };
        let svg = chart.to_svg();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(!svg.contains("NaN"));
    }
}
