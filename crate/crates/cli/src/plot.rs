//! Static SVG of a simulation: state norm, held input and inter-event times.

use std::fmt::Write;

use triggerkit::SimulationTrace;

const WIDTH: f64 = 760.0;
const PANEL: f64 = 210.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const GAP: f64 = 45.0;
/// Columns per panel when thinning long traces; each keeps its min and max.
const BUCKETS: usize = 1500;

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    top: f64,
}

impl Axes {
    fn new(x0: f64, x1: f64, mut y0: f64, mut y1: f64, top: f64) -> Self {
        if y1.is_nan() || y0.is_nan() || y1 <= y0 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let pad = 0.05 * (y1 - y0);
        Self {
            x0,
            x1: if x1 > x0 { x1 } else { x0 + 1.0 },
            y0: if y0 == 0.0 { 0.0 } else { y0 - pad },
            y1: y1 + pad,
            top,
        }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        self.top + PANEL - (y - self.y0) / (self.y1 - self.y0) * PANEL
    }

    fn frame(&self, out: &mut String, title: &str) {
        let w = WIDTH - LEFT - RIGHT;
        let _ = writeln!(
            out,
            r##"<rect x="{LEFT}" y="{}" width="{w}" height="{PANEL}" fill="none" stroke="#444"/>"##,
            self.top
        );
        let _ = writeln!(
            out,
            r#"<text x="{LEFT}" y="{:.1}" font-size="13">{title}</text>"#,
            self.top - 8.0
        );
        for i in 0..=4 {
            let fx = self.x0 + (self.x1 - self.x0) * i as f64 / 4.0;
            let fy = self.y0 + (self.y1 - self.y0) * i as f64 / 4.0;
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"#,
                self.px(fx),
                self.top + PANEL + 14.0,
                tick(fx)
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"#,
                LEFT - 5.0,
                self.py(fy) + 3.0,
                tick(fy)
            );
        }
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

/// Min/max thinning that keeps the first and last sample.
fn thin(xs: &[f64], ys: &[f64]) -> Vec<(f64, f64)> {
    if xs.len() <= 2 * BUCKETS {
        return xs.iter().copied().zip(ys.iter().copied()).collect();
    }
    let per = xs.len().div_ceil(BUCKETS);
    let mut out = Vec::with_capacity(2 * BUCKETS + 2);
    for start in (0..xs.len()).step_by(per) {
        let end = (start + per).min(xs.len());
        let (mut lo, mut hi) = (start, start);
        for i in start..end {
            if ys[i] < ys[lo] {
                lo = i;
            }
            if ys[i] > ys[hi] {
                hi = i;
            }
        }
        let (a, b) = if lo < hi { (lo, hi) } else { (hi, lo) };
        out.push((xs[a], ys[a]));
        if b != a {
            out.push((xs[b], ys[b]));
        }
    }
    let last = xs.len() - 1;
    if out.last().map(|p| p.0) != Some(xs[last]) {
        out.push((xs[last], ys[last]));
    }
    out
}

fn polyline(out: &mut String, ax: &Axes, pts: &[(f64, f64)], color: &str) {
    let mut d = String::new();
    for (x, y) in pts {
        let _ = write!(d, "{:.2},{:.2} ", ax.px(*x), ax.py(*y));
    }
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
        d.trim_end()
    );
}

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub fn trace_svg(trace: &SimulationTrace) -> String {
    let t = &trace.sample_times;
    let (t0, t1) = (t.first().copied().unwrap_or(0.0), t.last().copied().unwrap_or(1.0));
    let height = TOP + 3.0 * PANEL + 2.0 * GAP + 30.0;
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{height}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let max_norm = trace.state_norms.iter().copied().fold(0.0, f64::max);
    let ax = Axes::new(t0, t1, 0.0, max_norm, TOP);
    ax.frame(&mut out, "state norm ‖x(t)‖");
    polyline(&mut out, &ax, &thin(t, &trace.state_norms), COLORS[0]);

    let m = trace.inputs.first().map_or(0, |u| u.len());
    let (lo, hi) = trace
        .inputs
        .iter()
        .flat_map(|u| u.iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let ax = Axes::new(t0, t1, lo.min(0.0), hi.max(0.0), TOP + PANEL + GAP);
    ax.frame(&mut out, "held input u(t)");
    for j in 0..m {
        // Staircase through the transmissions only.
        let mut pts = vec![];
        let mut current = None;
        for ((&ti, u), _) in t.iter().zip(&trace.inputs).zip(&trace.is_event).filter(|(_, &e)| e) {
            if let Some(prev) = current {
                pts.push((ti, prev));
            }
            current = Some(u[j]);
            pts.push((ti, u[j]));
        }
        if let (Some(v), Some(&te)) = (current, t.last()) {
            pts.push((te, v));
        }
        polyline(&mut out, &ax, &pts, COLORS[j % COLORS.len()]);
    }

    let gaps = &trace.inter_event_times;
    let top = gaps.iter().copied().fold(0.0, f64::max);
    let ax = Axes::new(t0, t1, 0.0, top, TOP + 2.0 * (PANEL + GAP));
    ax.frame(&mut out, "inter-event time t_{k+1} − t_k");
    for (k, &g) in gaps.iter().enumerate() {
        let x = ax.px(trace.event_times[k + 1]);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#555" stroke-width="0.8"/><circle cx="{x:.2}" cy="{:.2}" r="1.8" fill="{}"/>"##,
            ax.py(0.0),
            ax.py(g),
            ax.py(g),
            COLORS[0]
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">t</text>"#,
        LEFT + 0.5 * (WIDTH - LEFT - RIGHT),
        height - 6.0
    );
    out.push_str("</svg>\n");
    out
}
