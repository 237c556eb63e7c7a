//! Minimal hand-rolled SVG plots: the closed-loop trajectory among the
//! obstacles, and the guidance-field quiver.

use crate::output::FieldRow;
use cida_core::{RunMetrics, SafeSetSpec};
use std::fmt::Write as _;

const SIDE: f64 = 640.0;

/// Maps a square world window onto the SVG viewport (y axis flipped).
struct Canvas {
    cx: f64,
    cy: f64,
    half: f64,
}

impl Canvas {
    /// Square window centered on the bounding box of all `points`, padded by
    /// `pad` world units.
    fn fit(points: impl Iterator<Item = [f64; 2]>, pad: f64) -> Self {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for p in points {
            for d in 0..2 {
                min[d] = min[d].min(p[d]);
                max[d] = max[d].max(p[d]);
            }
        }
        if min[0] > max[0] {
            (min, max) = ([-1.0, -1.0], [1.0, 1.0]);
        }
        let half = 0.5 * (max[0] - min[0]).max(max[1] - min[1]) + pad;
        Self { cx: 0.5 * (min[0] + max[0]), cy: 0.5 * (min[1] + max[1]), half: half.max(1e-9) }
    }

    fn x(&self, wx: f64) -> f64 {
        (wx - self.cx + self.half) * SIDE / (2.0 * self.half)
    }

    fn y(&self, wy: f64) -> f64 {
        SIDE - (wy - self.cy + self.half) * SIDE / (2.0 * self.half)
    }

    fn scale(&self, len: f64) -> f64 {
        len * SIDE / (2.0 * self.half)
    }
}

fn open_svg(out: &mut String) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIDE}\" height=\"{SIDE}\" \
         viewBox=\"0 0 {SIDE} {SIDE}\">"
    );
    let _ = writeln!(out, "<rect width=\"{SIDE}\" height=\"{SIDE}\" fill=\"white\"/>");
}

fn draw_scene(out: &mut String, canvas: &Canvas, safe_set: &SafeSetSpec, orbit_radius: f64) {
    let _ = writeln!(
        out,
        "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{:.2}\" fill=\"none\" stroke=\"#999999\" \
         stroke-dasharray=\"6 4\"/>",
        canvas.x(0.0),
        canvas.y(0.0),
        canvas.scale(orbit_radius)
    );
    for b in safe_set.barriers() {
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{:.2}\" fill=\"#e8706a\" \
             fill-opacity=\"0.35\" stroke=\"#b3362f\"/>",
            canvas.x(b.center[0]),
            canvas.y(b.center[1]),
            canvas.scale(b.radius)
        );
    }
}

/// Renders the logged trajectory over the orbit and obstacles; violating
/// steps get red markers and the start a green one.
pub fn trajectory_svg(metrics: &RunMetrics, safe_set: &SafeSetSpec, orbit_radius: f64) -> String {
    let scene = safe_set
        .barriers()
        .iter()
        .flat_map(|b| {
            let r = b.radius;
            [
                [b.center[0] - r, b.center[1] - r],
                [b.center[0] + r, b.center[1] + r],
            ]
        })
        .chain([[-orbit_radius, -orbit_radius], [orbit_radius, orbit_radius]]);
    let traj = metrics.trajectory.iter().map(|row| row.state.position());
    let canvas = Canvas::fit(scene.chain(traj.clone()), 2.0);

    let mut out = String::new();
    open_svg(&mut out);
    draw_scene(&mut out, &canvas, safe_set, orbit_radius);

    let mut points = String::new();
    for p in traj.clone() {
        let _ = write!(points, "{:.2},{:.2} ", canvas.x(p[0]), canvas.y(p[1]));
    }
    let _ = writeln!(
        out,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f6fb4\" stroke-width=\"1.5\"/>",
        points.trim_end()
    );
    for row in &metrics.trajectory {
        if row.violated {
            let p = row.state.position();
            let _ = writeln!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"#d22222\"/>",
                canvas.x(p[0]),
                canvas.y(p[1])
            );
        }
    }
    if let Some(first) = metrics.trajectory.first() {
        let p = first.state.position();
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"#2a8f3c\"/>",
            canvas.x(p[0]),
            canvas.y(p[1])
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Renders the heading field as a quiver: light arrows for the raw guidance
/// heading, dark arrows for the safety-filtered one. Rows without a defined
/// heading (origin, obstacle interiors) are skipped.
pub fn field_svg(
    rows: &[FieldRow],
    safe_set: &SafeSetSpec,
    orbit_radius: f64,
    arrow_len: f64,
) -> String {
    let canvas = Canvas::fit(rows.iter().map(|r| [r.x, r.y]), 1.5);
    let mut out = String::new();
    open_svg(&mut out);
    draw_scene(&mut out, &canvas, safe_set, orbit_radius);
    for (theta, color) in [("theta_d", "#bbbbbb"), ("theta_star", "#333333")] {
        for r in rows {
            let angle = if theta == "theta_d" { r.theta_d } else { r.theta_star };
            if !angle.is_finite() {
                continue;
            }
            let tip = [r.x + arrow_len * angle.cos(), r.y + arrow_len * angle.sin()];
            let _ = writeln!(
                out,
                "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{}\"/>",
                canvas.x(r.x),
                canvas.y(r.y),
                canvas.x(tip[0]),
                canvas.y(tip[1]),
                color
            );
        }
    }
    for r in rows {
        if r.theta_star.is_finite() {
            let _ = writeln!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1\" fill=\"#333333\"/>",
                canvas.x(r.x),
                canvas.y(r.y)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use cida_core::{ControllerKind, SimulationConfig};

    #[test]
    fn canvas_maps_world_up_to_svg_up() {
        let canvas = Canvas::fit([[-10.0, -10.0], [10.0, 10.0]].into_iter(), 0.0);
        assert!(canvas.y(10.0) < canvas.y(-10.0), "larger world y must sit higher");
        assert!(canvas.x(10.0) > canvas.x(-10.0));
        assert!((canvas.x(0.0) - SIDE / 2.0).abs() < 1e-9);
        assert!((canvas.scale(20.0) - SIDE).abs() < 1e-9);
    }

    #[test]
    fn trajectory_svg_is_wellformed() {
        let mut cfg = SimulationConfig::benchmark(3, ControllerKind::CertaintyEquivalence);
        cfg.particles = 15;
        cfg.steps = 5;
        let metrics = cida_core::run_closed_loop(&cfg).unwrap();
        let svg = trajectory_svg(&metrics, &cfg.safe_set, cfg.field.radius);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("<polyline"));
        assert_eq!(svg.matches("stroke-dasharray").count(), 1, "one orbit circle");
        assert_eq!(svg.matches("fill-opacity").count(), 3, "three obstacles");
    }

    #[test]
    fn field_svg_draws_arrows_only_where_defined() {
        let cfg = SimulationConfig::benchmark(0, ControllerKind::CertaintyEquivalence);
        let rows = vec![
            FieldRow { x: 12.0, y: 0.0, theta_d: 1.0, theta_star: 1.1, note: String::new() },
            FieldRow {
                x: 0.0,
                y: 0.0,
                theta_d: f64::NAN,
                theta_star: f64::NAN,
                note: "origin".into(),
            },
        ];
        let svg = field_svg(&rows, &cfg.safe_set, cfg.field.radius, 0.5);
        assert_eq!(svg.matches("<line").count(), 2, "one theta_d and one theta_star arrow");
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
