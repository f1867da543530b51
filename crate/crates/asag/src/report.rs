//! Explanation artifacts: shape-function curves with data-density shading
//! and feature-importance charts, exported as CSV and standalone SVG.
//!
//! Rendering applies no smoothing; the plotted curve at any grid point is
//! the shape-function value exactly, and equal inputs produce identical
//! output bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::featurize::FeatureMatrix;
use crate::nam::NamModel;
use crate::{Error, Result};

pub const DEFAULT_GRID_SIZE: usize = 100;
pub const DEFAULT_BINS: usize = 20;
pub const DEFAULT_TOP_N: usize = 40;

/// One feature's shape-function curve plus the training-data density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeExport {
    pub feature_name: String,
    pub grid: Vec<f64>,
    /// values[g][c]: centered contribution at grid point g for class c.
    pub values: Vec<Vec<f64>>,
    /// Histogram bins of the training column: (left edge, right edge, count).
    pub density: Vec<(f64, f64, usize)>,
}

/// Feature importances in descending order, names tie-broken
/// lexicographically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceExport {
    pub entries: Vec<(String, f64)>,
}

impl ImportanceExport {
    pub fn from_model(model: &NamModel, features: &FeatureMatrix) -> Result<Self> {
        let importances = model.feature_importance(features)?;
        let mut entries: Vec<(String, f64)> = features
            .feature_names
            .iter()
            .cloned()
            .zip(importances)
            .collect();
        entries.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        Ok(ImportanceExport { entries })
    }
}

/// Shape curves over the observed range of every feature, with a histogram
/// of the training values. Constant columns get their range padded by 0.5
/// on each side and a single density bin.
pub fn export_shapes(
    model: &NamModel,
    features: &FeatureMatrix,
    grid_size: usize,
    bins: usize,
) -> Result<Vec<ShapeExport>> {
    if grid_size < 2 {
        return Err(Error::InvalidConfig("grid_size must be >= 2".into()));
    }
    if bins < 1 {
        return Err(Error::InvalidConfig("bins must be >= 1".into()));
    }
    if features.rows() == 0 {
        return Err(Error::EmptyCorpus);
    }
    if features.cols() != model.num_features() {
        return Err(Error::DimMismatch {
            expected: model.num_features(),
            actual: features.cols(),
        });
    }

    let mut exports = Vec::with_capacity(features.cols());
    for j in 0..features.cols() {
        let (lo, hi) = features.column_range(j);
        let degenerate = hi <= lo;
        let (lo, hi) = if degenerate { (lo - 0.5, lo + 0.5) } else { (lo, hi) };
        let bins = if degenerate { 1 } else { bins };

        let grid: Vec<f64> = (0..grid_size)
            .map(|g| lo + (hi - lo) * g as f64 / (grid_size - 1) as f64)
            .collect();
        let values = model.shape_function(j, &grid)?;

        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for row in &features.values {
            let b = (((row[j] - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let density = counts
            .into_iter()
            .enumerate()
            .map(|(b, count)| (lo + b as f64 * width, lo + (b + 1) as f64 * width, count))
            .collect();

        exports.push(ShapeExport {
            feature_name: features.feature_names[j].clone(),
            grid,
            values,
            density,
        });
    }
    Ok(exports)
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

const CLASS_COLORS: [&str; 8] = [
    "#d62728", "#2ca02c", "#1f77b4", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

const PLOT_WIDTH: f64 = 640.0;
const PLOT_HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;

/// One polyline per selected class over the density histogram drawn as pink
/// background bars whose opacity tracks the bin counts. Pass `y_range` to
/// share an axis scale across features; `None` fits each plot to its data.
pub fn render_shape_svg(
    export: &ShapeExport,
    classes_to_draw: &[usize],
    num_classes: usize,
    y_range: Option<(f64, f64)>,
) -> Result<String> {
    if classes_to_draw.is_empty() {
        return Err(Error::InvalidConfig("empty class subset".into()));
    }
    for &c in classes_to_draw {
        if c >= num_classes {
            return Err(Error::InvalidConfig(format!(
                "class {c} out of range for {num_classes} classes"
            )));
        }
    }

    let x_lo = export.grid[0];
    let x_hi = *export.grid.last().unwrap();
    let (mut y_lo, mut y_hi) = y_range.unwrap_or_else(|| {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in &export.values {
            for &c in classes_to_draw {
                lo = lo.min(row[c]);
                hi = hi.max(row[c]);
            }
        }
        (lo, hi)
    });
    if y_hi <= y_lo {
        y_lo -= 0.5;
        y_hi += 0.5;
    }

    let inner_w = PLOT_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let inner_h = PLOT_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * inner_w;
    let sy = |y: f64| MARGIN_TOP + (y_hi - y) / (y_hi - y_lo) * inner_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{PLOT_WIDTH}\" height=\"{PLOT_HEIGHT}\" viewBox=\"0 0 {PLOT_WIDTH} {PLOT_HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // Density background bars.
    let max_count = export.density.iter().map(|d| d.2).max().unwrap_or(0);
    if max_count > 0 {
        for &(left, right, count) in &export.density {
            if count == 0 {
                continue;
            }
            let opacity = 0.08 + 0.55 * count as f64 / max_count as f64;
            svg.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#ff9ecb\" opacity=\"{}\"/>\n",
                fmt(sx(left)),
                fmt(MARGIN_TOP),
                fmt(sx(right) - sx(left)),
                fmt(inner_h),
                fmt(opacity),
            ));
        }
    }

    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(MARGIN_LEFT),
        fmt(MARGIN_TOP + inner_h),
        fmt(MARGIN_LEFT + inner_w),
        fmt(MARGIN_TOP + inner_h),
    ));
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(MARGIN_LEFT),
        fmt(MARGIN_TOP),
        fmt(MARGIN_LEFT),
        fmt(MARGIN_TOP + inner_h),
    ));
    // Zero line when visible.
    if y_lo < 0.0 && y_hi > 0.0 {
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 3\"/>\n",
            fmt(MARGIN_LEFT),
            fmt(sy(0.0)),
            fmt(MARGIN_LEFT + inner_w),
            fmt(sy(0.0)),
        ));
    }

    // Curves: no smoothing, straight segments between grid points.
    for &c in classes_to_draw {
        let points: Vec<String> = export
            .grid
            .iter()
            .zip(&export.values)
            .map(|(&x, row)| format!("{},{}", fmt(sx(x)), fmt(sy(row[c]))))
            .collect();
        let color = CLASS_COLORS[c % CLASS_COLORS.len()];
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            color,
            points.join(" ")
        ));
    }

    // Tick labels for the axis ranges and titles.
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"start\">{}</text>\n",
        fmt(MARGIN_LEFT),
        fmt(PLOT_HEIGHT - 22.0),
        fmt(x_lo)
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
        fmt(MARGIN_LEFT + inner_w),
        fmt(PLOT_HEIGHT - 22.0),
        fmt(x_hi)
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
        fmt(MARGIN_LEFT - 5.0),
        fmt(MARGIN_TOP + 4.0),
        fmt(y_hi)
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
        fmt(MARGIN_LEFT - 5.0),
        fmt(MARGIN_TOP + inner_h + 4.0),
        fmt(y_lo)
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        fmt(MARGIN_LEFT + inner_w / 2.0),
        fmt(PLOT_HEIGHT - 6.0),
        xml_escape(&export.feature_name)
    ));
    svg.push_str(&format!(
        "<text x=\"14\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">log odds</text>\n",
        fmt(MARGIN_TOP + inner_h / 2.0),
        fmt(MARGIN_TOP + inner_h / 2.0),
    ));
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Horizontal bar chart of the `min(top_n, D)` most important features,
/// ascending top-to-bottom.
pub fn render_importance_svg(export: &ImportanceExport, top_n: usize) -> Result<String> {
    if top_n < 1 {
        return Err(Error::InvalidConfig("top_n must be >= 1".into()));
    }
    if export.entries.is_empty() {
        return Err(Error::Data("importance export is empty".into()));
    }
    let mut shown: Vec<(String, f64)> = export
        .entries
        .iter()
        .take(top_n.min(export.entries.len()))
        .cloned()
        .collect();
    // entries are descending; re-sort so the chart ascends top-to-bottom,
    // keeping ties in lexicographic name order.
    shown.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });

    let bar_height = 16.0;
    let gap = 4.0;
    let label_width = 220.0;
    let chart_width = 380.0;
    let margin = 20.0;
    let height = margin * 2.0 + shown.len() as f64 * (bar_height + gap);
    let width = label_width + chart_width + margin * 2.0;
    let max_importance = shown
        .iter()
        .map(|e| e.1)
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
        fmt(width),
        fmt(height),
        fmt(width),
        fmt(height)
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (i, (name, importance)) in shown.iter().enumerate() {
        let y = margin + i as f64 * (bar_height + gap);
        let w = chart_width * importance / max_importance;
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            fmt(margin + label_width - 6.0),
            fmt(y + bar_height - 4.0),
            xml_escape(name)
        ));
        svg.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#4c72b0\"/>\n",
            fmt(margin + label_width),
            fmt(y),
            fmt(w),
            fmt(bar_height)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"start\">{}</text>\n",
            fmt(margin + label_width + w + 4.0),
            fmt(y + bar_height - 4.0),
            fmt(*importance)
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Shape CSV: `feature,x,class,contribution`.
pub fn save_shape_csv(exports: &[ShapeExport], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer
        .write_record(["feature", "x", "class", "contribution"])
        .map_err(|e| Error::Data(e.to_string()))?;
    for export in exports {
        for (x, row) in export.grid.iter().zip(&export.values) {
            for (c, v) in row.iter().enumerate() {
                writer
                    .write_record([
                        export.feature_name.as_str(),
                        &format!("{x}"),
                        &c.to_string(),
                        &format!("{v}"),
                    ])
                    .map_err(|e| Error::Data(e.to_string()))?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}

/// Density CSV: `feature,bin_left,bin_right,count`.
pub fn save_density_csv(exports: &[ShapeExport], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer
        .write_record(["feature", "bin_left", "bin_right", "count"])
        .map_err(|e| Error::Data(e.to_string()))?;
    for export in exports {
        for &(left, right, count) in &export.density {
            writer
                .write_record([
                    export.feature_name.as_str(),
                    &format!("{left}"),
                    &format!("{right}"),
                    &count.to_string(),
                ])
                .map_err(|e| Error::Data(e.to_string()))?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Importance CSV: `feature,importance`, descending.
pub fn save_importance_csv(export: &ImportanceExport, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer
        .write_record(["feature", "importance"])
        .map_err(|e| Error::Data(e.to_string()))?;
    for (name, importance) in &export.entries {
        writer
            .write_record([name.as_str(), &format!("{importance}")])
            .map_err(|e| Error::Data(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}
