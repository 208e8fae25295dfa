//! Deterministic SVG figures: region-by-band heat maps and predicted
//! versus true scatter plots.

use std::fmt::Write as _;

use ndarray::Array2;

use crate::eeg::features::{BandSet, RoiMap};
use crate::error::{Error, Result};
use crate::stats::significance_stars;

/// Region rows by band columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub values: Array2<f64>,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
}

impl Heatmap {
    /// Row-major reshape of a feature-ordered vector.
    pub fn from_features(values: &[f64], bands: &BandSet, rois: &RoiMap) -> Result<Self> {
        let (r, c) = (rois.rois().len(), bands.bands().len());
        if values.len() != r * c {
            return Err(Error::arg(format!("{} values for a {r}x{c} map", values.len())));
        }
        Ok(Self {
            values: Array2::from_shape_vec((r, c), values.to_vec()).expect("length checked"),
            row_labels: rois.rois().iter().map(|x| x.label.clone()).collect(),
            col_labels: bands.bands().iter().map(|b| b.name.clone()).collect(),
        })
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.values.iter().copied().collect()
    }
}

/// Averaged network weights laid out as regions by bands.
pub fn weight_heatmap(map: &crate::nn::WeightMap, bands: &BandSet, rois: &RoiMap) -> Result<Heatmap> {
    Heatmap::from_features(&map.values, bands, rois)
}

const NEGATIVE: [f64; 3] = [24.0, 42.0, 120.0];
const MIDDLE: [f64; 3] = [150.0, 150.0, 150.0];
const POSITIVE: [f64; 3] = [252.0, 246.0, 190.0];

/// Dark blue at -1, gray at 0, light yellow at +1; inputs are clamped.
pub fn diverging_color(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    let (end, w) = if t < 0.0 { (NEGATIVE, -t) } else { (POSITIVE, t) };
    let c: Vec<u8> = (0..3).map(|k| (MIDDLE[k] + (end[k] - MIDDLE[k]) * w).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const CELL_W: usize = 44;
const CELL_H: usize = 24;
const LEFT: usize = 56;
const TOP: usize = 36;

/// Colours are scaled by the largest magnitude so zero is always the
/// middle of the palette.
pub fn render_heatmap(map: &Heatmap, title: &str) -> Result<String> {
    let (rows, cols) = map.values.dim();
    if map.row_labels.len() != rows || map.col_labels.len() != cols {
        return Err(Error::arg("one label per heat-map row and column is required"));
    }
    if map.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("heat map contains non-finite values".into()));
    }
    let scale = map.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let width = LEFT + cols * CELL_W + 20;
    let height = TOP + rows * CELL_H + 70;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, width / 2, escape(title));
    for (i, label) in map.row_labels.iter().enumerate() {
        let y = TOP + i * CELL_H + CELL_H / 2 + 4;
        let _ = writeln!(out, r#"<text x="{}" y="{y}" text-anchor="end">{}</text>"#, LEFT - 6, escape(label));
    }
    for (j, label) in map.col_labels.iter().enumerate() {
        let x = LEFT + j * CELL_W + CELL_W / 2;
        let y = TOP + rows * CELL_H + 12;
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{y}" text-anchor="end" transform="rotate(-45 {x} {y})">{}</text>"#,
            escape(label)
        );
    }
    for ((i, j), v) in map.values.indexed_iter() {
        let t = if scale > 0.0 { v / scale } else { 0.0 };
        let _ = writeln!(
            out,
            r#"<rect class="cell" data-row="{i}" data-col="{j}" x="{}" y="{}" width="{CELL_W}" height="{CELL_H}" fill="{}"><title>{} {} {v:.6e}</title></rect>"#,
            LEFT + j * CELL_W,
            TOP + i * CELL_H,
            diverging_color(t),
            escape(&map.row_labels[i]),
            escape(&map.col_labels[j]),
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{LEFT}" y="{}">scale: ±{scale:.4e}</text>"#,
        height - 8
    );
    out.push_str("</svg>\n");
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterStats {
    pub r: f64,
    pub p: f64,
}

const PLOT: f64 = 320.0;
const MARGIN: f64 = 50.0;

/// Predicted against true values with the identity line and an `r`
/// annotation carrying significance stars.
pub fn render_scatter(truth: &[f64], predicted: &[f64], stats: ScatterStats, title: &str) -> Result<String> {
    if truth.len() != predicted.len() || truth.is_empty() {
        return Err(Error::arg("true and predicted values must be nonempty and of equal length"));
    }
    if truth.iter().chain(predicted).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("scatter values must be finite".into()));
    }
    let lo = truth.iter().chain(predicted).copied().fold(f64::INFINITY, f64::min);
    let hi = truth.iter().chain(predicted).copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5f64.max(lo.abs() * 0.05) };
    let (lo, hi) = (lo - pad, hi + pad);
    let px = |v: f64| MARGIN + (v - lo) / (hi - lo) * PLOT;
    let py = |v: f64| MARGIN + PLOT - (v - lo) / (hi - lo) * PLOT;
    let size = PLOT + 2.0 * MARGIN;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, size / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{PLOT}" height="{PLOT}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<line class="identity" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="gray" stroke-dasharray="4 3"/>"#,
        px(lo),
        py(lo),
        px(hi),
        py(hi)
    );
    for (t, p) in truth.iter().zip(predicted) {
        let _ = writeln!(
            out,
            r#"<circle class="point" cx="{:.3}" cy="{:.3}" r="3.5" fill="black"/>"#,
            px(*t),
            py(*p)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}">r = {:.3}{}</text>"#,
        MARGIN + 8.0,
        MARGIN + 16.0,
        stats.r,
        significance_stars(stats.p)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">true ({lo:.4} to {hi:.4})</text>"#,
        size / 2.0,
        size - 12.0
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">predicted</text>"#,
        size / 2.0,
        size / 2.0
    );
    out.push_str("</svg>\n");
    Ok(out)
}
