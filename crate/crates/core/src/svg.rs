//! Scatter plots of embeddings as standalone SVG.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::numerics::Matrix;

/// Class colors, cycled for more than twelve classes.
pub const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#b5cf6b",
];

/// Color for unlabeled points.
pub const UNLABELED: &str = "#000000";

const SIZE: f64 = 480.0;
const MARGIN: f64 = 20.0;
const LEGEND_W: f64 = 120.0;

pub fn class_color(class: usize) -> &'static str {
    PALETTE[class % PALETTE.len()]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// One `<circle>` per row of `z`, using its first two coordinates (a single
/// coordinate is drawn on a horizontal line).
pub fn scatter_svg(
    z: &Matrix,
    labels: &[Option<usize>],
    title: &str,
    names: &BTreeMap<usize, String>,
) -> String {
    let coord = |row: &[f64], k: usize| row.get(k).copied().unwrap_or(0.0);
    let range = |k: usize| {
        let (lo, hi) = z.row_iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(coord(r, k)), hi.max(coord(r, k)))
        });
        if lo.is_finite() && hi > lo { (lo, hi - lo) } else { (lo.min(0.0) - 0.5, 1.0) }
    };
    let (x0, xs) = range(0);
    let (y0, ys) = range(1);
    let span = SIZE - 2.0 * MARGIN;
    let width = SIZE + LEGEND_W;

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{SIZE}" viewBox="0 0 {width} {SIZE}">"#
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{width}" height="{SIZE}" fill="white"/>"#);
    let _ = writeln!(out, r#"<g id="points">"#);
    for (row, label) in z.row_iter().zip(labels) {
        let px = MARGIN + span * (coord(row, 0) - x0) / xs;
        let py = SIZE - MARGIN - span * (coord(row, 1) - y0) / ys;
        let color = label.map_or(UNLABELED, class_color);
        let _ = writeln!(
            out,
            r#"<circle cx="{px:.3}" cy="{py:.3}" r="3" fill="{color}" fill-opacity="0.8"/>"#
        );
    }
    let _ = writeln!(out, "</g>");

    let mut classes: Vec<usize> = labels.iter().flatten().copied().collect();
    classes.sort_unstable();
    classes.dedup();
    let _ = writeln!(out, r#"<g id="legend" font-family="sans-serif" font-size="12">"#);
    for (i, c) in classes.iter().enumerate() {
        let y = MARGIN + 18.0 * i as f64;
        let name = names.get(c).cloned().unwrap_or_else(|| format!("class {c}"));
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{y:.1}" width="10" height="10" fill="{}"/>"#,
            SIZE + 4.0,
            class_color(*c)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            SIZE + 20.0,
            y + 9.0,
            escape(&name)
        );
    }
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    out
}
