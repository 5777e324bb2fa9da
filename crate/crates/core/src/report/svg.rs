//! Static SVG charts. Output is plain text built from fixed-precision
//! coordinates, so identical inputs give identical bytes.

use std::fmt::Write as _;

use crate::rsp::ChartResult;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Frame {
        let pad = |(lo, hi): (f64, f64)| {
            if !(lo.is_finite() && hi.is_finite()) {
                (0.0, 1.0)
            } else if hi - lo <= 0.0 {
                (lo - 0.5, hi + 0.5)
            } else {
                let m = 0.05 * (hi - lo);
                (lo - m, hi + m)
            }
        };
        let (x0, x1) = pad(x);
        let (y0, y1) = pad(y);
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (l, r, t, b) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(out, r#"<g class="axes" stroke="black" fill="none">"#);
    let _ = writeln!(out, r#"<line x1="{l:.2}" y1="{b:.2}" x2="{r:.2}" y2="{b:.2}"/>"#);
    let _ = writeln!(out, r#"<line x1="{l:.2}" y1="{t:.2}" x2="{l:.2}" y2="{b:.2}"/>"#);
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r#"<g class="ticks" fill="black">"#);
    for i in 0..=5 {
        let s = i as f64 / 5.0;
        let xv = f.x0 + s * (f.x1 - f.x0);
        let yv = f.y0 + s * (f.y1 - f.y0);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            f.px(xv),
            b + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            l - 6.0,
            f.py(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (l + r) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.to_string() }
    }
}

fn notice(out: &mut String, text: &str) {
    let _ = writeln!(
        out,
        r#"<text class="notice" x="{:.2}" y="{:.2}" text-anchor="middle" fill="gray">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT / 2.0,
        escape(text)
    );
}

fn range(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Subgroup means with the stage-`k*` segment means and numbered change-point markers.
pub fn control_chart_svg(chart: Option<&ChartResult>) -> String {
    let mut out = String::new();
    let Some(chart) = chart.filter(|c| c.m > 0) else {
        header(&mut out, "Subgroup means");
        axes(&mut out, &Frame::new((0.0, 1.0), (0.0, 1.0)), "subgroup", "mean residual");
        notice(&mut out, "no chart data");
        out.push_str("</svg>\n");
        return out;
    };
    let title = format!(
        "Subgroup means (n = {}, W = {:.3}, p = {:.4}, stage {})",
        chart.n, chart.w, chart.p_value, chart.k_star
    );
    header(&mut out, &title);
    let y = range(
        chart
            .subgroup_means
            .iter()
            .copied()
            .chain(chart.segments.iter().map(|s| s.2))
            .chain(std::iter::once(chart.grand_mean)),
    );
    let f = Frame::new((0.0, chart.m as f64), y);
    axes(&mut out, &f, "subgroup", "mean residual");

    let _ = writeln!(
        out,
        r#"<line class="grand-mean" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="4 3"/>"#,
        f.px(0.0),
        f.py(chart.grand_mean),
        f.px(chart.m as f64),
        f.py(chart.grand_mean)
    );

    let mut pts = String::new();
    for (i, v) in chart.subgroup_means.iter().enumerate() {
        let _ = write!(pts, "{:.2},{:.2} ", f.px(i as f64 + 0.5), f.py(*v));
    }
    let _ = writeln!(
        out,
        r##"<polyline class="means" points="{}" fill="none" stroke="#1f4e8c" stroke-width="1"/>"##,
        pts.trim_end()
    );

    let _ = writeln!(out, r##"<g class="segment-means" stroke="#c0392b" stroke-width="2">"##);
    for &(a, b, mean) in &chart.segments {
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
            f.px(a as f64),
            f.py(mean),
            f.px(b as f64),
            f.py(mean)
        );
    }
    let _ = writeln!(out, "</g>");

    if let Some(rm) = &chart.removed {
        let _ = writeln!(
            out,
            r##"<rect class="removed" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#f1c40f" fill-opacity="0.25"/>"##,
            f.px(rm.start_subgroup as f64),
            TOP,
            f.px(rm.end_subgroup as f64) - f.px(rm.start_subgroup as f64),
            HEIGHT - TOP - BOTTOM
        );
    }

    for (j, &cp) in chart.change_points.iter().enumerate() {
        let x = f.px(cp as f64);
        let _ = writeln!(
            out,
            r#"<g class="cp-marker"><line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black" stroke-dasharray="2 2"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text></g>"#,
            TOP,
            HEIGHT - BOTTOM,
            TOP - 4.0,
            j + 1
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Power against wind speed; `oc` marks points flagged out of control.
pub fn power_scatter_svg(wind_speed: &[f64], power: &[f64], oc: &[bool]) -> String {
    let mut out = String::new();
    header(&mut out, "Power against wind speed");
    if wind_speed.is_empty() {
        axes(&mut out, &Frame::new((0.0, 1.0), (0.0, 1.0)), "wind speed (m/s)", "power (kW)");
        notice(&mut out, "no records");
        out.push_str("</svg>\n");
        return out;
    }
    let f = Frame::new(range(wind_speed.iter().copied()), range(power.iter().copied()));
    axes(&mut out, &f, "wind speed (m/s)", "power (kW)");
    let _ = writeln!(out, r##"<g class="in-control" fill="#7f8c8d" fill-opacity="0.5">"##);
    for i in (0..wind_speed.len()).filter(|&i| !oc[i]) {
        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="1.5"/>"#, f.px(wind_speed[i]), f.py(power[i]));
    }
    let _ = writeln!(out, "</g>");
    if oc.iter().any(|&b| b) {
        let _ = writeln!(out, r##"<g id="oc-overlay" class="oc-overlay" fill="#c0392b">"##);
        for i in (0..wind_speed.len()).filter(|&i| oc[i]) {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2"/>"#, f.px(wind_speed[i]), f.py(power[i]));
        }
        let _ = writeln!(out, "</g>");
    }
    out.push_str("</svg>\n");
    out
}
