//! Static SVG rendering of UCC plots.
//!
//! Output depends only on the curves and options: coordinates are written
//! with fixed precision and nothing time-dependent is embedded.

use std::fmt::Write;

use crate::curve::{optimal_operating_point, UccCurve, XMetric, YMetric};
use crate::data::Normalization;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const REFERENCE_COLOR: &str = "#7f7f7f";

#[derive(Debug, Clone, Default)]
pub struct PlotOptions {
    pub title: Option<String>,
    /// Draws the isocost line and the optimum of the first model.
    pub cost_c: Option<f64>,
}

struct Frame {
    x_max: f64,
    y_max: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + x / self.x_max * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - y / self.y_max * (HEIGHT - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn units(norm: Normalization) -> &'static str {
    match norm {
        Normalization::None => "units of y",
        Normalization::StdUnits { .. } => "std. dev. of y",
    }
}

fn x_label(curve: &UccCurve) -> String {
    let name = match curve.axes.x() {
        XMetric::Bandwidth => "bandwidth",
        XMetric::Excess => "excess",
    };
    format!("{name} ({})", units(curve.normalization))
}

fn y_label(curve: &UccCurve) -> String {
    match curve.axes.y() {
        YMetric::MissRate => "miss rate (fraction)".to_string(),
        YMetric::Deficit => format!("deficit ({})", units(curve.normalization)),
    }
}

fn path_data(curve: &UccCurve, f: &Frame) -> String {
    let mut d = String::new();
    let step = curve.axes.y() == YMetric::MissRate;
    for (i, p) in curve.points.iter().enumerate() {
        if i == 0 {
            write!(d, "M{:.3},{:.3}", f.px(p.x), f.py(p.y)).unwrap();
        } else if step {
            write!(d, " H{:.3} V{:.3}", f.px(p.x), f.py(p.y)).unwrap();
        } else {
            write!(d, " L{:.3},{:.3}", f.px(p.x), f.py(p.y)).unwrap();
        }
    }
    d
}

/// Renders model curves and an optional constant-band reference curve.
pub fn render(models: &[UccCurve], reference: Option<&UccCurve>, opts: &PlotOptions) -> String {
    let all = models.iter().chain(reference);
    let (mut x_max, mut y_max) = (0.0f64, 0.0f64);
    for c in all {
        for p in &c.points {
            x_max = x_max.max(p.x);
            y_max = y_max.max(p.y);
        }
    }
    let f = Frame {
        x_max: if x_max > 0.0 { x_max } else { 1.0 },
        y_max: if y_max > 0.0 { y_max } else { 1.0 },
    };

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(
        s,
        r#"<defs><clipPath id="plot-area"><rect x="{LEFT}" y="{TOP}" width="{:.3}" height="{:.3}"/></clipPath></defs>"#,
        WIDTH - LEFT - RIGHT,
        HEIGHT - TOP - BOTTOM
    )
    .unwrap();
    writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    if let Some(t) = &opts.title {
        writeln!(s, r#"<text x="{:.3}" y="18" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(t)).unwrap();
    }

    // axes and ticks
    let (x0, y0) = (f.px(0.0), f.py(0.0));
    writeln!(
        s,
        r#"<g stroke="black" fill="none"><path d="M{x0:.3},{:.3} V{y0:.3} H{:.3}"/></g>"#,
        TOP,
        WIDTH - RIGHT
    )
    .unwrap();
    for i in 0..=5 {
        let xv = f.x_max * i as f64 / 5.0;
        let yv = f.y_max * i as f64 / 5.0;
        let (tx, ty) = (f.px(xv), f.py(yv));
        writeln!(
            s,
            r#"<line x1="{tx:.3}" y1="{y0:.3}" x2="{tx:.3}" y2="{:.3}" stroke="black"/><text x="{tx:.3}" y="{:.3}" text-anchor="middle">{xv:.3}</text>"#,
            y0 + 5.0,
            y0 + 18.0
        )
        .unwrap();
        writeln!(
            s,
            r#"<line x1="{:.3}" y1="{ty:.3}" x2="{x0:.3}" y2="{ty:.3}" stroke="black"/><text x="{:.3}" y="{:.3}" text-anchor="end">{yv:.3}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            ty + 4.0
        )
        .unwrap();
    }
    if let Some(first) = models.first().or(reference) {
        let mid_x = (LEFT + WIDTH - RIGHT) / 2.0;
        let mid_y = (TOP + HEIGHT - BOTTOM) / 2.0;
        writeln!(
            s,
            r#"<text x="{mid_x:.3}" y="{:.3}" text-anchor="middle">{}</text>"#,
            HEIGHT - 15.0,
            escape(&x_label(first))
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="18" y="{mid_y:.3}" text-anchor="middle" transform="rotate(-90 18 {mid_y:.3})">{}</text>"#,
            escape(&y_label(first))
        )
        .unwrap();
    }

    // curves
    let mut legend: Vec<(String, &str, bool)> = Vec::new();
    writeln!(s, r#"<g clip-path="url(#plot-area)" fill="none" stroke-width="2">"#).unwrap();
    if let Some(r) = reference {
        writeln!(
            s,
            r#"<path d="{}" stroke="{REFERENCE_COLOR}" stroke-dasharray="6 4"/>"#,
            path_data(r, &f)
        )
        .unwrap();
        legend.push(("constant reference".to_string(), REFERENCE_COLOR, true));
    }
    for (i, c) in models.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        writeln!(s, r#"<path d="{}" stroke="{color}"/>"#, path_data(c, &f)).unwrap();
        legend.push((c.label.clone(), color, false));
    }

    // isocost line through the optimum: c x + (1 - c) y = C
    if let (Some(c), Some(first)) = (opts.cost_c, models.first()) {
        let (op, total) = optimal_operating_point(first, c);
        let d = if c < 1.0 {
            let y_at = |x: f64| (total - c * x) / (1.0 - c);
            format!(
                "M{:.3},{:.3} L{:.3},{:.3}",
                f.px(0.0),
                f.py(y_at(0.0)),
                f.px(f.x_max),
                f.py(y_at(f.x_max))
            )
        } else {
            format!("M{:.3},{:.3} V{:.3}", f.px(op.x), f.py(0.0), f.py(f.y_max))
        };
        writeln!(s, r#"<path d="{d}" stroke="black" stroke-width="1" stroke-dasharray="2 3"/>"#).unwrap();
        writeln!(
            s,
            r#"<circle cx="{:.3}" cy="{:.3}" r="5" stroke="black" stroke-width="1.5" fill="none"/>"#,
            f.px(op.x),
            f.py(op.y)
        )
        .unwrap();
    }
    writeln!(s, "</g>").unwrap();

    // legend
    let lx = WIDTH - RIGHT + 10.0;
    for (i, (label, color, dashed)) in legend.iter().enumerate() {
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
        writeln!(
            s,
            r#"<line x1="{lx:.3}" y1="{ly:.3}" x2="{:.3}" y2="{ly:.3}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.3}" y="{:.3}">{}</text>"#,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0,
            escape(label)
        )
        .unwrap();
    }
    if let Some(c) = opts.cost_c {
        let ly = TOP + 10.0 + 18.0 * legend.len() as f64;
        writeln!(s, r#"<text x="{lx:.3}" y="{:.3}">isocost c={c:.3}</text>"#, ly + 4.0).unwrap();
    }
    s.push_str("</svg>\n");
    s
}
