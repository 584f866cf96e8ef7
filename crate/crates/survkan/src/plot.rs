//! SVG panels of single edges: the learned spline over the training
//! (pre, post) scatter, with the fitted closed form overlaid when present.

use std::fmt::Write as _;

use survkan_core::{Activation, ForwardCache, Network};

pub const WIDTH: f64 = 640.0;
pub const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const CURVE_POINTS: usize = 200;
const MAX_SCATTER: usize = 600;

/// Tick step of 1, 2 or 5 times a power of ten giving about five ticks.
fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

/// Ticks covering `[lo, hi]`, which is widened to whole steps.
fn ticks(lo: f64, hi: f64) -> (f64, f64, Vec<f64>) {
    let (lo, hi) = if hi - lo < 1e-12 { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
    let step = nice_step(hi - lo);
    let start = (lo / step).floor();
    let end = (hi / step).ceil();
    let ticks = (0..=(end - start) as usize).map(|k| (start + k as f64) * step).collect();
    (start * step, end * step, ticks)
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let s = format!("{v:.decimals$}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        "0".into()
    } else {
        s
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn polyline(frame: &Frame, pts: &[(f64, f64)], style: &str) -> String {
    let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y))).collect();
    format!("<polyline fill=\"none\" {style} points=\"{}\"/>\n", coords.join(" "))
}

/// One edge panel. `xs`/`ys` are the cached samples; `overlay` is the fitted
/// closed form, evaluated like the spline.
pub fn edge_svg(title: &str, spline: &Activation, xs: &[f64], ys: &[f64], overlay: Option<(&str, &Activation)>) -> String {
    let (mut lo, mut hi) = (spline.knots.lo(), spline.knots.hi());
    for &x in xs {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    let grid: Vec<f64> = (0..CURVE_POINTS).map(|k| lo + (hi - lo) * k as f64 / (CURVE_POINTS - 1) as f64).collect();
    let curve: Vec<(f64, f64)> = grid.iter().map(|&x| (x, spline.value(x))).collect();
    let fitted: Option<Vec<(f64, f64)>> = overlay.map(|(_, a)| grid.iter().map(|&x| (x, a.output(x))).collect());
    let ys_all = ys.iter().copied().chain(curve.iter().map(|p| p.1)).chain(fitted.iter().flatten().map(|p| p.1));
    let (ylo, yhi) = ys_all.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (ylo, yhi) = if ylo.is_finite() { (ylo, yhi) } else { (-1.0, 1.0) };
    let (x0, x1, xt) = ticks(lo, hi);
    let (y0, y1, yt) = ticks(ylo, yhi);
    let frame = Frame { x0, x1, y0, y1 };

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(s, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(s, "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>", WIDTH / 2.0, escape(title));
    let (bx, by) = (frame.px(x0), frame.py(y0));
    let _ = writeln!(
        s,
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        WIDTH - LEFT - RIGHT,
        HEIGHT - TOP - BOTTOM
    );
    let xstep = xt.get(1).map(|t| t - xt[0]).unwrap_or(1.0);
    for &t in &xt {
        let x = frame.px(t);
        let _ = writeln!(s, "<line x1=\"{x:.2}\" y1=\"{by:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>", by + 5.0);
        let _ = writeln!(s, "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>", by + 19.0, tick_label(t, xstep));
    }
    let ystep = yt.get(1).map(|t| t - yt[0]).unwrap_or(1.0);
    for &t in &yt {
        let y = frame.py(t);
        let _ = writeln!(s, "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{bx:.2}\" y2=\"{y:.2}\" stroke=\"black\"/>", bx - 5.0);
        let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>", bx - 8.0, y + 4.0, tick_label(t, ystep));
    }
    let stride = xs.len().div_ceil(MAX_SCATTER).max(1);
    for (x, y) in xs.iter().zip(ys).step_by(stride) {
        let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"#1f77b4\" fill-opacity=\"0.35\"/>", frame.px(*x), frame.py(*y));
    }
    s.push_str(&polyline(&frame, &curve, "stroke=\"black\" stroke-width=\"2\""));
    if let (Some(pts), Some((label, _))) = (&fitted, overlay) {
        s.push_str(&polyline(&frame, pts, "stroke=\"#d62728\" stroke-width=\"2\" stroke-dasharray=\"6,4\""));
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" fill=\"#d62728\">{}</text>",
            WIDTH - RIGHT - 8.0,
            TOP + 16.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Panels for every active edge of `net` as `(file stem, svg)`, with the
/// matching edges of `symbolic` overlaid when given.
pub fn network_panels(net: &Network, cache: &ForwardCache, symbolic: Option<&Network>, names: &[String]) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for (l, layer) in net.layers().iter().enumerate() {
        for j in 0..layer.n_out {
            for i in 0..layer.n_in {
                let e = j * layer.n_in + i;
                let act = &layer.edges[e];
                if !act.active {
                    continue;
                }
                let input = if l == 0 { names.get(i).cloned().unwrap_or(format!("x{}", i + 1)) } else { format!("h{l}.{i}") };
                let title = format!("layer {l}: {input} to node {j}");
                let overlay = symbolic.map(|s| &s.layers()[l].edges[e]).filter(|a| a.active && a.symbolic.is_some());
                let label = overlay.and_then(|a| a.symbolic.as_ref()).map(|s| format!("{} (R² {:.4})", s.operator_name(), s.r2));
                let svg = edge_svg(&title, act, &cache.nodes[l][i], &cache.post[l][e], label.as_deref().zip(overlay));
                out.push((crate::export::edge_file_stem(l, i, j), svg));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_cover_the_range_with_round_steps() {
        let (lo, hi, t) = ticks(-0.93, 1.07);
        // span 2 gives a raw step of 0.4, rounded to 0.5
        assert_eq!((lo, hi), (-1.0, 1.5));
        assert_eq!(t.len(), 6);
        assert!((t[1] - t[0] - 0.5).abs() < 1e-12);
        assert_eq!(nice_step(47.0), 10.0);
    }

    #[test]
    fn flat_ranges_are_widened() {
        let (lo, hi, _) = ticks(2.0, 2.0);
        assert!(lo < 2.0 && hi > 2.0);
    }

    #[test]
    fn labels_drop_negative_zero() {
        assert_eq!(tick_label(-0.0000001, 0.2), "0");
        assert_eq!(tick_label(0.4, 0.2), "0.4");
        assert_eq!(tick_label(20.0, 10.0), "20");
    }
}
