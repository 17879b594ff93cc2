//! Standalone SVG scatter plots and heatmaps. Output is a pure function of
//! the input, with fixed numeric precision.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Scatter of 2-D points colored by class, with a legend.
pub fn scatter_svg(points: &[[f64; 2]], labels: &[usize], class_names: &[String], title: &str) -> String {
    const SIZE: f64 = 600.0;
    const MARGIN: f64 = 40.0;
    const LEGEND: f64 = 140.0;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let span = |lo: f64, hi: f64| if hi > lo { hi - lo } else { 1.0 };
    let (sx, sy) = (span(x0, x1), span(y0, y1));
    let inner = SIZE - 2.0 * MARGIN;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = SIZE + LEGEND,
        h = SIZE
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        SIZE / 2.0,
        escape(title)
    );
    for (p, &l) in points.iter().zip(labels) {
        let cx = MARGIN + (p[0] - x0) / sx * inner;
        let cy = SIZE - MARGIN - (p[1] - y0) / sy * inner;
        let _ = writeln!(
            s,
            r#"<circle class="point" cx="{cx:.2}" cy="{cy:.2}" r="3" fill="{}" fill-opacity="0.7"/>"#,
            PALETTE[l % PALETTE.len()]
        );
    }
    for (i, name) in class_names.iter().enumerate() {
        let y = MARGIN + 20.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{y:.2}" r="5" fill="{}"/><text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{}</text>"#,
            SIZE + 10.0,
            PALETTE[i % PALETTE.len()],
            SIZE + 20.0,
            y + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Heatmap of a square fraction matrix: rows are gold classes, columns
/// predicted classes, each cell annotated with its value.
pub fn heatmap_svg(values: &[Vec<f64>], class_names: &[String], title: &str) -> String {
    const CELL: f64 = 80.0;
    const LEFT: f64 = 100.0;
    const TOP: f64 = 70.0;
    let n = values.len();
    let width = LEFT + CELL * n as f64 + 20.0;
    let height = TOP + CELL * n as f64 + 40.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="22" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    for (j, name) in class_names.iter().enumerate().take(n) {
        let _ = writeln!(
            s,
            r#"<text class="col-label" x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
            LEFT + CELL * (j as f64 + 0.5),
            TOP - 8.0,
            escape(name)
        );
    }
    for (i, row) in values.iter().enumerate() {
        let y = TOP + CELL * i as f64;
        let _ = writeln!(
            s,
            r#"<text class="row-label" x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="end">{}</text>"#,
            LEFT - 8.0,
            y + CELL / 2.0 + 4.0,
            escape(class_names.get(i).map(String::as_str).unwrap_or(""))
        );
        for (j, &v) in row.iter().enumerate() {
            let x = LEFT + CELL * j as f64;
            let shade = (255.0 * (1.0 - v.clamp(0.0, 1.0))).round() as u8;
            let ink = if v > 0.5 { "white" } else { "black" };
            let _ = writeln!(
                s,
                r##"<rect class="cell" x="{x:.2}" y="{y:.2}" width="{CELL}" height="{CELL}" fill="#{shade:02x}{shade:02x}ff" stroke="#888888"/><text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="14" text-anchor="middle" fill="{ink}">{v:.2}</text>"##,
                x + CELL / 2.0,
                y + CELL / 2.0 + 5.0
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">predicted</text>"#,
        LEFT + CELL * n as f64 / 2.0,
        height - 12.0
    );
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(path: &Path, svg: &str) -> Result<()> {
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}
