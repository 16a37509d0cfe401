//! Static SVG plots: one region plot per stratum and a bar chart of average
//! losses. Every plot uses the same fixed 600x600 viewport.

use std::fmt::Write;

use stratdesign::regions::{Ellipse, Point};

use crate::io::{BenchmarkCsvRow, RectangleRow, RegionRecord};

const LEFT: f64 = 80.0;
const RIGHT: f64 = 570.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 530.0;
const ELLIPSE_SEGMENTS: usize = 256;
const DESIGN_ORDER: [&str; 4] = ["Equal", "Weighted", "Naive", "RegretMin"];
const PALETTE: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&apos;")
}

/// File-name-safe version of a stratum id.
pub fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Affine map from the data window `[x0, x1] x [y0, y1]` onto the plot
/// area, y up.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Frame {
    /// Smallest padded window around `points`, kept inside `[0, limit]`.
    pub fn around(points: impl IntoIterator<Item = Point>, limit: f64) -> Frame {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in points {
            x0 = x0.min(p[0]);
            x1 = x1.max(p[0]);
            y0 = y0.min(p[1]);
            y1 = y1.max(p[1]);
        }
        if !(x0 <= x1 && y0 <= y1) {
            return Frame { x0: 0.0, x1: limit, y0: 0.0, y1: limit };
        }
        let pad = |a: f64, b: f64| {
            let half = ((b - a) * 0.6).max(0.005);
            let mid = (a + b) / 2.0;
            ((mid - half).max(0.0), (mid + half).min(limit))
        };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        Frame { x0, x1, y0, y1 }
    }

    pub fn x(&self, v: f64) -> f64 {
        LEFT + (v - self.x0) / (self.x1 - self.x0) * (RIGHT - LEFT)
    }

    pub fn y(&self, v: f64) -> f64 {
        BOTTOM - (v - self.y0) / (self.y1 - self.y0) * (BOTTOM - TOP)
    }
}

fn num(v: f64) -> String {
    format!("{v:.2}")
}

pub fn ellipse_polygon(e: &Ellipse, segments: usize) -> Vec<Point> {
    (0..segments)
        .map(|i| e.boundary_point(i as f64 / segments as f64 * std::f64::consts::TAU))
        .collect()
}

/// Sutherland-Hodgman clipping of a polygon to `[lo, hi]^2`.
pub fn clip_to_box(poly: &[Point], lo: f64, hi: f64) -> Vec<Point> {
    // (axis, bound, keep-above)
    let edges = [(0, lo, true), (0, hi, false), (1, lo, true), (1, hi, false)];
    let mut out = poly.to_vec();
    for (axis, bound, above) in edges {
        let inside = |p: &Point| if above { p[axis] >= bound } else { p[axis] <= bound };
        let input = std::mem::take(&mut out);
        for (i, cur) in input.iter().enumerate() {
            let prev = &input[(i + input.len() - 1) % input.len()];
            let cross = || {
                let t = (bound - prev[axis]) / (cur[axis] - prev[axis]);
                let mut p = [prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])];
                p[axis] = bound;
                p
            };
            match (inside(prev), inside(cur)) {
                (true, true) => out.push(*cur),
                (true, false) => out.push(cross()),
                (false, true) => {
                    out.push(cross());
                    out.push(*cur);
                }
                (false, false) => {}
            }
        }
        if out.is_empty() {
            break;
        }
    }
    out
}

fn path_data(frame: &Frame, poly: &[Point]) -> String {
    let mut d = String::new();
    for (i, p) in poly.iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        let _ = write!(d, "{cmd}{},{} ", num(frame.x(p[0])), num(frame.y(p[1])));
    }
    d.push('Z');
    d
}

fn header(svg: &mut String, title: &str) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="600" height="600" viewBox="0 0 600 600" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="600" height="600" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="28" text-anchor="middle" font-size="16">{}</text>"#,
        num((LEFT + RIGHT) / 2.0),
        escape(title)
    );
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step - 1e-9).ceil() as i64;
    (first..)
        .map(|i| i as f64 * step)
        .take_while(|v| *v <= hi + step * 1e-9)
        .collect()
}

/// Region plot of one stratum: bootstrap rectangles, the ellipse clipped to
/// the box, the box edges and the plug-in point estimate.
pub fn stratum_svg(region: &RegionRecord, rectangles: &[RectangleRow]) -> String {
    let (lo, hi) = (region.box_lo, region.box_hi);
    let outline = Ellipse::new(region.ellipse_center, region.ellipse_shape)
        .map(|e| clip_to_box(&ellipse_polygon(&e, ELLIPSE_SEGMENTS), lo, hi))
        .unwrap_or_default();
    let corners = rectangles
        .iter()
        .flat_map(|r| [[r.s0_lo, r.s1_lo], [r.s0_hi, r.s1_hi]]);
    let frame = Frame::around(
        outline.iter().copied().chain(corners).chain(region.point_estimate),
        hi * 1.04,
    );
    let mut svg = String::new();
    header(&mut svg, &format!("Stratum {}", region.stratum));
    let _ = writeln!(
        svg,
        r#"<clipPath id="plot"><rect x="{}" y="{}" width="{}" height="{}"/></clipPath>"#,
        num(LEFT),
        num(TOP),
        num(RIGHT - LEFT),
        num(BOTTOM - TOP)
    );
    let _ = writeln!(
        svg,
        r##"<path d="M{l},{t} L{l},{b} L{r},{b}" stroke="#888" fill="none"/>"##,
        l = num(LEFT),
        t = num(TOP),
        b = num(BOTTOM),
        r = num(RIGHT)
    );
    for v in ticks(frame.x0, frame.x1) {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{v:.3}</text>"#,
            num(frame.x(v)),
            num(BOTTOM + 18.0)
        );
    }
    for v in ticks(frame.y0, frame.y1) {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{v:.3}</text>"#,
            num(LEFT - 8.0),
            num(frame.y(v) + 4.0)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">σ²(0), control</text>"#,
        num((LEFT + RIGHT) / 2.0),
        num(BOTTOM + 44.0)
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{y}" text-anchor="middle" transform="rotate(-90 20 {y})">σ²(1), treated</text>"#,
        y = num((TOP + BOTTOM) / 2.0)
    );

    let _ = writeln!(svg, r#"<g clip-path="url(#plot)">"#);
    let _ = writeln!(svg, r##"<g class="rectangles" fill="#4c72b0" fill-opacity="0.04" stroke="#4c72b0" stroke-opacity="0.25" stroke-width="0.5">"##);
    for r in rectangles {
        let (x0, x1) = (frame.x(r.s0_lo), frame.x(r.s0_hi));
        let (y0, y1) = (frame.y(r.s1_hi), frame.y(r.s1_lo));
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="{}" height="{}"/>"#,
            num(x0),
            num(y0),
            num((x1 - x0).max(0.5)),
            num((y1 - y0).max(0.5))
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(
        svg,
        r##"<rect class="box" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#555" stroke-dasharray="6 4"/>"##,
        num(frame.x(lo)),
        num(frame.y(hi)),
        num(frame.x(hi) - frame.x(lo)),
        num(frame.y(lo) - frame.y(hi))
    );
    if !outline.is_empty() {
        let _ = writeln!(
            svg,
            r##"<path class="region" d="{}" fill="#c44e52" fill-opacity="0.12" stroke="#c44e52" stroke-width="2"/>"##,
            path_data(&frame, &outline)
        );
    }
    if let Some(p) = region.point_estimate {
        let _ = writeln!(
            svg,
            r#"<circle class="estimate" cx="{}" cy="{}" r="4" fill="black"/>"#,
            num(frame.x(p[0])),
            num(frame.y(p[1]))
        );
    }
    svg.push_str("</g>\n</svg>\n");
    svg
}

/// Grouped bars of average loss: one group per Γ, one bar per design.
pub fn loss_chart_svg(rows: &[BenchmarkCsvRow]) -> String {
    let mut gammas: Vec<f64> = Vec::new();
    for r in rows {
        if !gammas.contains(&r.gamma) {
            gammas.push(r.gamma);
        }
    }
    gammas.sort_by(f64::total_cmp);
    let mut designs: Vec<&str> = DESIGN_ORDER
        .iter()
        .copied()
        .filter(|d| rows.iter().any(|r| r.design == *d))
        .collect();
    for r in rows {
        if !designs.contains(&r.design.as_str()) {
            designs.push(&r.design);
        }
    }
    let top = rows.iter().map(|r| r.avg_loss).fold(0.0, f64::max);
    let top = if top > 0.0 { top * 1.1 } else { 1.0 };
    let y = |v: f64| BOTTOM - v / top * (BOTTOM - TOP - 30.0);

    let mut svg = String::new();
    header(&mut svg, "Average loss by design");
    let _ = writeln!(
        svg,
        r##"<path d="M{l},{t} L{l},{b} L{r},{b}" stroke="#888" fill="none"/>"##,
        l = num(LEFT),
        t = num(TOP + 30.0),
        b = num(BOTTOM),
        r = num(RIGHT)
    );
    for v in ticks(0.0, top) {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{v:.2e}</text>"#,
            num(LEFT - 6.0),
            num(y(v) + 4.0)
        );
    }
    let group = (RIGHT - LEFT) / gammas.len().max(1) as f64;
    let bar = group * 0.8 / designs.len().max(1) as f64;
    for (gi, g) in gammas.iter().enumerate() {
        let x0 = LEFT + gi as f64 * group + group * 0.1;
        for (di, d) in designs.iter().enumerate() {
            let Some(r) = rows.iter().find(|r| r.gamma == *g && r.design == *d) else {
                continue;
            };
            let _ = writeln!(
                svg,
                r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"><title>{} Γ={}: {:e}</title></rect>"#,
                num(x0 + di as f64 * bar),
                num(y(r.avg_loss)),
                num(bar * 0.9),
                num(BOTTOM - y(r.avg_loss)),
                PALETTE[di % PALETTE.len()],
                escape(d),
                g,
                r.avg_loss
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">Γ = {g}</text>"#,
            num(x0 + group * 0.4),
            num(BOTTOM + 18.0)
        );
    }
    for (di, d) in designs.iter().enumerate() {
        let lx = LEFT + 10.0 + di as f64 * 120.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="12" height="12" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            num(lx),
            num(TOP),
            PALETTE[di % PALETTE.len()],
            num(lx + 16.0),
            num(TOP + 10.0),
            escape(d)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// HTML page embedding every plot.
pub fn index_html(plots: &[(String, String)]) -> String {
    let mut html = String::from(
        "<!DOCTYPE html>\n<html>\n<head><meta charset=\"utf-8\"><title>stratdesign report</title></head>\n<body>\n",
    );
    for (title, file) in plots {
        let _ = writeln!(
            html,
            "<figure><img src=\"{}\" width=\"600\" height=\"600\" alt=\"{t}\"><figcaption>{t}</figcaption></figure>",
            escape(file),
            t = escape(title)
        );
    }
    html.push_str("</body>\n</html>\n");
    html
}
