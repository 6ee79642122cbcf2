//! Standalone SVG of a chord in the rotating frame.
//!
//! Output is a pure function of its inputs: fixed iteration orders and fixed
//! decimal formatting, so identical inputs give identical bytes.

use std::fmt::Write;

use nalgebra::Vector2;
use reebchord::dynamics::{effective_potential, primary_e, SystemParams};
use reebchord::shooting::Chord;

type Vec2 = Vector2<f64>;

const WIDTH: f64 = 800.0;
const CONTOUR_CELLS: usize = 240;
const MARGIN: f64 = 0.08;

struct Frame {
    x0: f64,
    y1: f64,
    scale: f64,
    height: f64,
}

impl Frame {
    fn px(&self, p: Vec2) -> (f64, f64) {
        ((p.x - self.x0) * self.scale, (self.y1 - p.y) * self.scale)
    }
}

fn fmt_xy(f: &Frame, p: Vec2) -> String {
    let (x, y) = f.px(p);
    format!("{x:.3},{y:.3}")
}

/// Segments of the level set `U = c` by marching squares over the box.
fn zero_velocity_segments(params: &SystemParams, c: f64, lo: Vec2, hi: Vec2) -> Vec<(Vec2, Vec2)> {
    let n = CONTOUR_CELLS;
    let at = |i: usize, j: usize| {
        Vec2::new(
            lo.x + (hi.x - lo.x) * i as f64 / n as f64,
            lo.y + (hi.y - lo.y) * j as f64 / n as f64,
        )
    };
    let val = |p: Vec2| {
        effective_potential(&p, params)
            .map(|u| u - c)
            .unwrap_or(f64::NEG_INFINITY)
    };
    let grid: Vec<Vec<f64>> = (0..=n).map(|i| (0..=n).map(|j| val(at(i, j))).collect()).collect();
    let lerp = |p: Vec2, q: Vec2, a: f64, b: f64| {
        let t = if a.is_finite() && b.is_finite() {
            a / (a - b)
        } else {
            0.5
        };
        p + t * (q - p)
    };
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let corners = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
            let vals = [grid[i][j], grid[i + 1][j], grid[i + 1][j + 1], grid[i][j + 1]];
            let mut pts = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (vals[e], vals[(e + 1) % 4]);
                if (a > 0.0) != (b > 0.0) {
                    pts.push(lerp(corners[e], corners[(e + 1) % 4], a, b));
                }
            }
            match pts.len() {
                2 => out.push((pts[0], pts[1])),
                4 => {
                    out.push((pts[0], pts[1]));
                    out.push((pts[2], pts[3]));
                }
                _ => {}
            }
        }
    }
    out
}

/// Renders the chord, the zero-velocity curve, the primaries and the
/// collision points. `metadata` is embedded verbatim.
pub fn render(chord: &Chord, samples_per_half: usize, metadata: &str) -> String {
    let params = chord.spec.level.params;
    let c = chord.jacobi();
    let path = chord.positions(samples_per_half);

    let (mut lo, mut hi) = (Vec2::new(-0.05, -0.05), Vec2::new(0.05, 0.05));
    if let Ok(Some(hill)) = reebchord::shooting::hill_interval_if_bounded(&chord.spec.level) {
        lo.x = lo.x.min(hill.s_min);
        hi.x = hi.x.max(hill.s_max);
    }
    for p in &path {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    let pad = MARGIN * (hi.x - lo.x).max(hi.y - lo.y);
    lo.x -= pad;
    lo.y -= pad;
    hi.x += pad;
    hi.y += pad;
    let scale = WIDTH / (hi.x - lo.x);
    let frame = Frame {
        x0: lo.x,
        y1: hi.y,
        scale,
        height: (hi.y - lo.y) * scale,
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.3} {h:.3}">"#,
        w = WIDTH,
        h = frame.height
    );
    let _ = writeln!(s, "<metadata><![CDATA[{metadata}]]></metadata>");
    let _ = writeln!(
        s,
        "<title>chord mu={:.16e} jacobi={:.16e} s0={:.16e} k={}</title>",
        params.mu(),
        c,
        chord.spec.s,
        chord.pericenter_index
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);

    let segs = zero_velocity_segments(&params, c, lo, hi);
    let mut d = String::new();
    for (a, b) in &segs {
        let _ = write!(d, "M{}L{}", fmt_xy(&frame, *a), fmt_xy(&frame, *b));
    }
    let _ = writeln!(
        s,
        r##"<path class="zero-velocity" d="{d}" fill="none" stroke="#888888" stroke-width="1"/>"##
    );

    let pts: Vec<String> = path.iter().map(|p| fmt_xy(&frame, *p)).collect();
    let _ = writeln!(
        s,
        r##"<polyline class="orbit" points="{}" fill="none" stroke="#1f4e9a" stroke-width="1.5"/>"##,
        pts.join(" ")
    );

    let (ox, oy) = frame.px(Vec2::zeros());
    let _ = writeln!(
        s,
        r##"<circle class="primary" id="O" cx="{ox:.3}" cy="{oy:.3}" r="5" fill="#d08000"/>"##
    );
    if params.mu() > 0.0 {
        let (ex, ey) = frame.px(primary_e());
        let _ = writeln!(
            s,
            r##"<circle class="primary" id="E" cx="{ex:.3}" cy="{ey:.3}" r="4" fill="#2d8a2d"/>"##
        );
    }
    for which in ["start", "end"] {
        let _ = writeln!(
            s,
            r##"<circle class="collision" data-endpoint="{which}" cx="{ox:.3}" cy="{oy:.3}" r="8" fill="none" stroke="#c00000" stroke-width="1.5"/>"##
        );
    }
    let _ = writeln!(s, "</svg>");
    s
}
