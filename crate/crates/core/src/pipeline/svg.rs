//! Static scatter plot of a 2-D feature space.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::FeatureRow;
use crate::synth::DefectKind;

/// Marker colour per class, in legend order.
pub const PALETTE: [(DefectKind, &str); 4] = [
    (DefectKind::Ok, "#1f77b4"),
    (DefectKind::NotComplete, "#ff7f0e"),
    (DefectKind::StrangeObject, "#2ca02c"),
    (DefectKind::ColorDefect, "#d62728"),
];

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const PLOT_X: f64 = 70.0;
const PLOT_Y: f64 = 40.0;
const PLOT_W: f64 = 500.0;
const PLOT_H: f64 = 380.0;

fn colour(kind: DefectKind) -> &'static str {
    PALETTE.iter().find(|(k, _)| *k == kind).map(|(_, c)| *c).unwrap_or("#000000")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Axis range with 5% padding on each side.
fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    (lo - 0.05 * span, hi + 0.05 * span)
}

/// One `<circle>` per row at `(f1, f2)`; `f2 = 0` for 1-D rows. Axes are
/// labelled with `x_label` / `y_label`.
pub fn scatter_svg(rows: &[FeatureRow], title: &str, x_label: &str, y_label: &str) -> String {
    let xy: Vec<(f64, f64)> = rows.iter().map(|r| (r.values.first().copied().unwrap_or(0.0), r.values.get(1).copied().unwrap_or(0.0))).collect();
    let (x0, x1) = padded_range(xy.iter().map(|p| p.0));
    let (y0, y1) = padded_range(xy.iter().map(|p| p.1));
    let sx = |x: f64| PLOT_X + (x - x0) / (x1 - x0) * PLOT_W;
    let sy = |y: f64| PLOT_Y + PLOT_H - (y - y0) / (y1 - y0) * PLOT_H;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, PLOT_X + PLOT_W / 2.0, escape(title));
    let _ = writeln!(s, r##"<rect x="{PLOT_X}" y="{PLOT_Y}" width="{PLOT_W}" height="{PLOT_H}" fill="none" stroke="#444444"/>"##);
    let bottom = PLOT_Y + PLOT_H;
    let _ = writeln!(s, r#"<text x="{PLOT_X}" y="{}" text-anchor="start">{x0:.4}</text>"#, bottom + 16.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{x1:.4}</text>"#, PLOT_X + PLOT_W, bottom + 16.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, PLOT_X + PLOT_W / 2.0, bottom + 32.0, escape(x_label));
    let _ = writeln!(s, r#"<text x="{}" y="{bottom}" text-anchor="end">{y0:.4}</text>"#, PLOT_X - 4.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{y1:.4}</text>"#, PLOT_X - 4.0, PLOT_Y + 10.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{cy}" text-anchor="middle" transform="rotate(-90 16 {cy})">{}</text>"#,
        escape(y_label),
        cy = PLOT_Y + PLOT_H / 2.0
    );
    let _ = writeln!(s, r#"<g id="legend">"#);
    for (i, (kind, c)) in PALETTE.iter().enumerate() {
        let y = PLOT_Y + 10.0 + 20.0 * i as f64;
        let _ = writeln!(s, r#"<rect x="590" y="{}" width="10" height="10" fill="{c}"/>"#, y - 9.0);
        let _ = writeln!(s, r#"<text x="606" y="{y}">{} {c}</text>"#, kind.as_str());
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g id="points">"#);
    for (r, &(x, y)) in rows.iter().zip(&xy) {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}" data-id="{}"/>"#, sx(x), sy(y), colour(r.label), escape(&r.sample_id));
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

pub fn write_scatter_svg(rows: &[FeatureRow], title: &str, x_label: &str, y_label: &str, path: &Path) -> std::io::Result<()> {
    if rows.is_empty() {
        return Err(std::io::Error::new(std::io::ErrorKind::InvalidInput, "no points to plot"));
    }
    fs::write(path, scatter_svg(rows, title, x_label, y_label))
}
