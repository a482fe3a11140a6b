//! SVG and CSV emitters for sample point lists.

use std::fmt::Write as _;

use multizip::geometry::Vector;

/// Addressed points; `connected` draws a polyline, otherwise dots.
pub struct Drawing<'a> {
    pub points: &'a [Vector],
    pub addresses: &'a [String],
    pub connected: bool,
}

pub fn csv(drawing: &Drawing) -> String {
    let d = drawing.points.first().map_or(0, |p| p.len());
    let mut out = String::from("address");
    for i in 1..=d {
        write!(out, ",x{i}").unwrap();
    }
    out.push('\n');
    for (p, a) in drawing.points.iter().zip(drawing.addresses) {
        out.push_str(a);
        for c in p.iter() {
            write!(out, ",{c}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Planar points with y pointing up, in a viewBox padded by 5% of the
/// larger bounding-box side.
pub fn svg(drawing: &Drawing) -> String {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in drawing.points {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(flip(p[1]));
        y1 = y1.max(flip(p[1]));
    }
    let side = (x1 - x0).max(y1 - y0);
    let side = if side > 0.0 { side } else { 1.0 };
    let pad = 0.05 * side;
    let (w, h) = (x1 - x0 + 2.0 * pad, y1 - y0 + 2.0 * pad);
    let stroke = side / 500.0;

    let mut out = String::new();
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {w} {h}">"#, x0 - pad, y0 - pad).unwrap();
    if drawing.connected {
        let coords: Vec<String> = drawing.points.iter().map(|p| format!("{},{}", p[0], flip(p[1]))).collect();
        writeln!(
            out,
            r#"<polyline fill="none" stroke="black" stroke-width="{stroke}" stroke-linejoin="round" points="{}"/>"#,
            coords.join(" ")
        )
        .unwrap();
    } else {
        for p in drawing.points {
            writeln!(out, r#"<circle cx="{}" cy="{}" r="{stroke}"/>"#, p[0], flip(p[1])).unwrap();
        }
    }
    out.push_str("</svg>\n");
    out
}

/// SVG y grows downwards; subtracting from zero avoids printing `-0`.
fn flip(y: f64) -> f64 {
    0.0 - y
}
