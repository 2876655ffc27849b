//! Minimal SVG writers for planar clouds and visibility curves.

use std::fmt::Write;

use dfl_core::forest_gen::PointCloud;
use dfl_core::lattice_core::Window;
use dfl_core::visibility::VisibilityReport;

use crate::{CliError, CliResult};

const SIZE: f64 = 600.0;

/// One filled circle per point; the view box is the window's square.
pub fn scatter_svg(p: &PointCloud, w: &Window) -> CliResult<String> {
    if w.dim() != 2 || (!p.is_empty() && p.dim != 2) {
        return Err(CliError::Malformed(format!("scatter plots need d = 2, got {}", p.dim.max(w.dim()))));
    }
    let (cx, cy, r) = (w.center[0], w.center[1], w.radius);
    let dot = (r / 150.0).max(1e-3);
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="{} {} {} {}">"#,
        cx - r,
        -(cy + r),
        2.0 * r,
        2.0 * r
    )
    .unwrap();
    writeln!(s, r#"<rect x="{}" y="{}" width="{}" height="{}" fill="white"/>"#, cx - r, -(cy + r), 2.0 * r, 2.0 * r).unwrap();
    s.push_str("<g fill=\"black\">\n");
    for q in p.iter() {
        // flip y so the picture has the usual orientation
        writeln!(s, r#"<circle cx="{:.6}" cy="{:.6}" r="{dot:.6}"/>"#, q[0], -q[1]).unwrap();
    }
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}

/// Log-log plot of max empty length against `1/eps`.
pub fn curve_svg(rep: &VisibilityReport) -> String {
    let pts: Vec<(f64, f64)> =
        rep.records.iter().map(|r| ((1.0 / r.epsilon).ln(), r.max_empty_length.max(1e-300).ln())).collect();
    let (x0, x1) = span(pts.iter().map(|p| p.0));
    let (y0, y1) = span(pts.iter().map(|p| p.1));
    let pad = 50.0;
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (SIZE - 2.0 * pad);
    let sy = |y: f64| SIZE - pad - (y - y0) / (y1 - y0) * (SIZE - 2.0 * pad);
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#)
        .unwrap();
    writeln!(s, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<path d="M{pad} {pad} V{b} H{r}" fill="none" stroke="gray"/>"#,
        b = SIZE - pad,
        r = SIZE - pad
    )
    .unwrap();
    let line: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.3},{:.3}", sx(x), sy(y))).collect();
    writeln!(s, r#"<polyline points="{}" fill="none" stroke="black"/>"#, line.join(" ")).unwrap();
    for (&(x, y), r) in pts.iter().zip(&rep.records) {
        writeln!(s, r#"<circle cx="{:.3}" cy="{:.3}" r="4"/>"#, sx(x), sy(y)).unwrap();
        writeln!(
            s,
            r#"<text x="{:.3}" y="{:.3}" font-size="12">eps={} L={:.3}</text>"#,
            sx(x) + 6.0,
            sy(y) - 6.0,
            r.epsilon,
            r.max_empty_length
        )
        .unwrap();
    }
    let label = match rep.slope {
        Some(k) => format!("slope {k:.3}"),
        None => "not a forest".to_string(),
    };
    writeln!(s, r#"<text x="{pad}" y="{:.0}" font-size="14">log L vs log 1/eps, {label}</text>"#, pad * 0.6).unwrap();
    s.push_str("</svg>\n");
    s
}

fn span(it: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if hi - lo < 1e-12 {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    }
}
