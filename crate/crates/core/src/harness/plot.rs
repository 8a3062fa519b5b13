//! Minimal SVG rendering of trajectories and actuator time series.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::env::{Goal, TrajectoryRow};

/// Context a trajectory CSV does not carry: scale, goal and actuator limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotMeta {
    pub length: f64,
    pub goal: Goal,
    pub delta_max: f64,
    pub n_min: f64,
    pub n_max: f64,
}

/// A ship glyph is drawn every this many seconds.
const GLYPH_INTERVAL: f64 = 50.0;

/// Axis range with a little margin; a flat channel gets ±1 around its value.
fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Tick positions at a 1-2-5 step covering `[lo, hi]` with at most ~8 marks.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 8.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut out = Vec::new();
    let mut t = (lo / step).ceil() * step;
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.xr.0) / (self.xr.1 - self.xr.0) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.yr.0) / (self.yr.1 - self.yr.0) * self.h
    }

    fn axes(&self, svg: &mut String, x_label: &str, y_label: &str) {
        let _ = writeln!(
            svg,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
            self.x0, self.y0, self.w, self.h
        );
        for t in ticks(self.xr.0, self.xr.1) {
            let x = self.px(t);
            let _ = writeln!(
                svg,
                r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text>"##,
                self.y0,
                self.y0 + self.h,
                self.y0 + self.h + 12.0,
                fmt_tick(t)
            );
        }
        for t in ticks(self.yr.0, self.yr.1) {
            let y = self.py(t);
            let _ = writeln!(
                svg,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{}</text>"##,
                self.x0,
                self.x0 + self.w,
                self.x0 - 4.0,
                y + 3.0,
                fmt_tick(t)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{x_label}</text>"#,
            self.x0 + 0.5 * self.w,
            self.y0 + self.h + 28.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{y_label}</text>"#,
            self.x0 - 38.0,
            self.y0 + 0.5 * self.h,
            self.x0 - 38.0,
            self.y0 + 0.5 * self.h
        );
    }

    fn polyline(&self, svg: &mut String, pts: impl Iterator<Item = (f64, f64)>, color: &str) {
        let mut d = String::new();
        for (x, y) in pts {
            let _ = write!(d, "{:.2},{:.2} ", self.px(x), self.py(y));
        }
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            d.trim_end()
        );
    }
}

fn header(svg: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
}

/// Top-down track in ship lengths with the goal circle and a hull outline
/// every 50 s. North (`+ξ`) is up.
pub fn trajectory_svg(rows: &[TrajectoryRow], meta: &PlotMeta) -> String {
    let l = meta.length;
    let g = &meta.goal;
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.x / l, r.y / l)).collect();
    let xs = pts.iter().map(|p| p.0).chain([g.g_x - g.tolerance, g.g_x + g.tolerance]);
    let ys = pts.iter().map(|p| p.1).chain([g.g_y - g.tolerance, g.g_y + g.tolerance]);
    let (mut xr, mut yr) = (range(xs), range(ys));
    // Equal scale on both axes.
    let span = (xr.1 - xr.0).max(yr.1 - yr.0) + 1.0;
    let (cx, cy) = (0.5 * (xr.0 + xr.1), 0.5 * (yr.0 + yr.1));
    xr = (cx - 0.5 * span, cx + 0.5 * span);
    yr = (cy - 0.5 * span, cy + 0.5 * span);
    let frame = Frame {
        x0: 60.0,
        y0: 30.0,
        w: 500.0,
        h: 500.0,
        xr,
        yr,
    };
    let mut svg = String::new();
    header(&mut svg, 600.0, 580.0);
    let _ = writeln!(
        svg,
        r#"<text x="300" y="18" font-size="13" text-anchor="middle">trajectory (ship glyph every {GLYPH_INTERVAL} s)</text>"#
    );
    frame.axes(&mut svg, "eta = x / L", "xi = y / L");
    let r_px = g.tolerance / span * frame.w;
    let _ = writeln!(
        svg,
        r##"<circle cx="{:.2}" cy="{:.2}" r="{r_px:.2}" fill="#cfe8cf" stroke="#2a7a2a"/>"##,
        frame.px(g.g_x),
        frame.py(g.g_y)
    );
    let _ = writeln!(
        svg,
        r##"<circle cx="{:.2}" cy="{:.2}" r="2" fill="#2a7a2a"/>"##,
        frame.px(g.g_x),
        frame.py(g.g_y)
    );
    frame.polyline(&mut svg, pts.iter().copied(), "#1f4e9a");

    // Hull outline in body coordinates (along, across), in ship lengths.
    let hull = [(0.5, 0.0), (0.3, 0.085), (-0.5, 0.085), (-0.5, -0.085), (0.3, -0.085)];
    let mut next_mark = rows.first().map_or(0.0, |r| r.t);
    for r in rows {
        if r.t + 1e-9 < next_mark {
            continue;
        }
        while next_mark <= r.t + 1e-9 {
            next_mark += GLYPH_INTERVAL;
        }
        let (s, c) = r.psi_deg.to_radians().sin_cos();
        let (x0, y0) = (r.x / l, r.y / l);
        let mut d = String::new();
        for (a, b) in hull {
            let _ = write!(
                d,
                "{:.2},{:.2} ",
                frame.px(x0 + a * s + b * c),
                frame.py(y0 + a * c - b * s)
            );
        }
        let _ = writeln!(
            svg,
            r##"<polygon points="{}" fill="#f3c36b" stroke="#7a5200" stroke-width="0.8"/>"##,
            d.trim_end()
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Four stacked panels against time: n, δ, u and reward.
pub fn time_series_svg(rows: &[TrajectoryRow], meta: &PlotMeta) -> String {
    let t_range = range(rows.iter().map(|r| r.t));
    let t_range = if rows.len() > 1 { (rows[0].t, rows[rows.len() - 1].t) } else { t_range };
    let delta_lim = rows.iter().map(|r| r.delta_deg.abs()).fold(meta.delta_max, f64::max);
    type Channel<'a> = (&'a str, fn(&TrajectoryRow) -> f64, Option<(f64, f64)>);
    let channels: [Channel; 4] = [
        ("n [rps]", |r| r.n, None),
        ("delta [deg]", |r| r.delta_deg, Some((-delta_lim, delta_lim))),
        ("u [m/s]", |r| r.u, None),
        ("reward", |r| r.reward, None),
    ];
    let panel_h = 130.0;
    let gap = 45.0;
    let mut svg = String::new();
    header(&mut svg, 700.0, 30.0 + 4.0 * (panel_h + gap));
    let _ = writeln!(
        svg,
        r#"<text x="350" y="18" font-size="13" text-anchor="middle">time series of n, delta, u and reward</text>"#
    );
    for (k, (label, get, fixed)) in channels.iter().enumerate() {
        let yr = fixed.unwrap_or_else(|| range(rows.iter().map(get)));
        let frame = Frame {
            x0: 70.0,
            y0: 30.0 + k as f64 * (panel_h + gap),
            w: 600.0,
            h: panel_h,
            xr: if t_range.1 > t_range.0 { t_range } else { (t_range.0, t_range.0 + 1.0) },
            yr,
        };
        frame.axes(&mut svg, "t [s]", label);
        frame.polyline(&mut svg, rows.iter().map(|r| (r.t, get(r))), "#1f4e9a");
    }
    svg.push_str("</svg>\n");
    svg
}
