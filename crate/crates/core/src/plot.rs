// SPDX-License-Identifier: MIT OR Apache-2.0

//! Plot data for a detection run and a dependency-free SVG renderer:
//! stacked series panels with break markers, then one coefficient heatmap
//! per final segment.

use crate::error::{Result, VarsegError};
use crate::model::{matrix_to_rows, TimeSeries};
use crate::pipeline::DetectionResult;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

const WIDTH: f64 = 900.0;
const PANEL_HEIGHT: f64 = 60.0;
const MARGIN: f64 = 40.0;
const CELL: f64 = 10.0;
const MAX_PANELS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotBundle {
    #[serde(rename = "T")]
    pub len: usize,
    pub p: usize,
    pub d: usize,
    /// Row-major `T x p` values.
    pub series: Vec<Vec<f64>>,
    pub candidate_markers: Vec<usize>,
    pub final_markers: Vec<usize>,
    /// Known true breaks, when the data were simulated.
    pub true_markers: Vec<usize>,
    /// One `p x pd` matrix per final segment.
    pub heatmaps: Vec<Vec<Vec<f64>>>,
}

impl PlotBundle {
    pub fn from_detection(data: &TimeSeries, result: &DetectionResult) -> Self {
        Self {
            len: data.len(),
            p: data.dim(),
            d: result.d,
            series: data.rows().map(<[f64]>::to_vec).collect(),
            candidate_markers: result.stage1.times.clone(),
            final_markers: result.final_breaks.clone(),
            true_markers: Vec::new(),
            heatmaps: result.final_models.iter().map(matrix_to_rows).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.series.len() != self.len || self.series.iter().any(|r| r.len() != self.p) {
            return Err(VarsegError::dimension("series panel does not match T x p"));
        }
        let markers = self
            .candidate_markers
            .iter()
            .chain(&self.final_markers)
            .chain(&self.true_markers);
        if let Some(bad) = markers.into_iter().find(|&&m| m < 1 || m > self.len) {
            return Err(VarsegError::invalid(format!("marker {bad} outside [1, {}]", self.len)));
        }
        for h in &self.heatmaps {
            if h.len() != self.p || h.iter().any(|r| r.len() != self.p * self.d) {
                return Err(VarsegError::dimension("heatmap is not p x pd"));
            }
        }
        Ok(())
    }

    /// `kind,t` rows for every marker.
    pub fn markers_csv(&self) -> String {
        let mut out = String::from("kind,t\n");
        for (kind, list) in [
            ("candidate", &self.candidate_markers),
            ("final", &self.final_markers),
            ("true", &self.true_markers),
        ] {
            for t in list {
                let _ = writeln!(out, "{kind},{t}");
            }
        }
        out
    }
}

fn heat_color(v: f64, scale: f64) -> String {
    let x = if scale > 0.0 { (v / scale).clamp(-1.0, 1.0) } else { 0.0 };
    let fade = |c: f64| (255.0 * (1.0 - c.abs())).round() as u8;
    if x >= 0.0 {
        format!("rgb(255,{},{})", fade(x), fade(x))
    } else {
        format!("rgb({},{},255)", fade(x), fade(x))
    }
}

/// Renders the bundle as a standalone SVG document.
pub fn render_svg(bundle: &PlotBundle) -> Result<String> {
    bundle.validate()?;
    let panels = bundle.p.min(MAX_PANELS);
    let series_height = panels as f64 * PANEL_HEIGHT;
    let heat_w = bundle.p as f64 * bundle.d as f64 * CELL;
    let heat_h = bundle.p as f64 * CELL;
    let heat_top = MARGIN + series_height + MARGIN;
    let height = heat_top + if bundle.heatmaps.is_empty() { 0.0 } else { heat_h + MARGIN };
    let width = WIDTH.max(MARGIN + bundle.heatmaps.len() as f64 * (heat_w + MARGIN));
    let plot_w = width - 2.0 * MARGIN;
    let x_of = |t: f64| MARGIN + if bundle.len > 1 { (t - 1.0) / (bundle.len - 1) as f64 * plot_w } else { 0.0 };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    for var in 0..panels {
        let top = MARGIN + var as f64 * PANEL_HEIGHT;
        let column: Vec<f64> = bundle.series.iter().map(|r| r[var]).collect();
        let lo = column.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let mut path = String::new();
        for (t, v) in column.iter().enumerate() {
            let x = x_of((t + 1) as f64);
            let y = top + PANEL_HEIGHT - 4.0 - (v - lo) / span * (PANEL_HEIGHT - 8.0);
            let _ = write!(path, "{}{x:.2},{y:.2}", if t == 0 { "M" } else { " L" });
        }
        let _ = writeln!(svg, r##"<path d="{path}" fill="none" stroke="#333" stroke-width="0.6"/>"##);
        let _ = writeln!(
            svg,
            r##"<text x="4" y="{:.1}" font-size="9" fill="#555">y{}</text>"##,
            top + PANEL_HEIGHT / 2.0,
            var + 1
        );
    }

    let bottom = MARGIN + series_height;
    for (list, color, dash, stroke) in [
        (&bundle.true_markers, "#2a9d2a", "", 2.0),
        (&bundle.candidate_markers, "#999", r#" stroke-dasharray="3,3""#, 0.8),
        (&bundle.final_markers, "#d62728", "", 1.5),
    ] {
        for &t in list.iter() {
            let x = x_of(t as f64);
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.2}" y1="{MARGIN:.1}" x2="{x:.2}" y2="{bottom:.1}" stroke="{color}" stroke-width="{stroke}"{dash}/>"#
            );
        }
    }

    let scale = bundle
        .heatmaps
        .iter()
        .flatten()
        .flatten()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    for (s, heat) in bundle.heatmaps.iter().enumerate() {
        let left = MARGIN + s as f64 * (heat_w + MARGIN);
        let _ = writeln!(
            svg,
            r##"<text x="{left:.1}" y="{:.1}" font-size="10" fill="#333">segment {}</text>"##,
            heat_top - 6.0,
            s + 1
        );
        for (i, row) in heat.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let _ = writeln!(
                    svg,
                    r#"<rect x="{:.1}" y="{:.1}" width="{CELL}" height="{CELL}" fill="{}"/>"#,
                    left + j as f64 * CELL,
                    heat_top + i as f64 * CELL,
                    heat_color(v, scale)
                );
            }
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
