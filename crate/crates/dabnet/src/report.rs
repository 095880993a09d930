//! Plain-text and CSV rendering of analysis and evaluation results.
//!
//! Text tables right-align numeric columns and end with a totals line.
//! CSV output is a header row followed by one row per layer (or class);
//! totals are left out so the rows can be summed directly.

use std::fmt::Write as _;

use dabnet_core::analysis::NetworkReport;
use dabnet_core::metrics::ConfusionMatrix;

use crate::Result;

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Lines printed under the text table only.
    pub summary: Vec<String>,
}

impl Table {
    fn new(headers: &[&str]) -> Self {
        Self {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn to_text(&self) -> String {
        let mut widths: Vec<usize> = self.headers.iter().map(String::len).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let mut line = |cells: &[String]| {
            let mut text = String::new();
            for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
                if i > 0 {
                    text.push_str("  ");
                }
                // first column (name) left-aligned, the rest right-aligned
                if i == 0 {
                    let _ = write!(text, "{cell:<w$}");
                } else {
                    let _ = write!(text, "{cell:>w$}");
                }
            }
            out.push_str(text.trim_end());
            out.push('\n');
        };
        line(&self.headers);
        for row in &self.rows {
            line(row);
        }
        for s in &self.summary {
            out.push_str(s);
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.headers.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn render(&self, csv: bool) -> String {
        if csv {
            self.to_csv()
        } else {
            self.to_text()
        }
    }
}

fn shape_cell(s: dabnet_core::Shape) -> String {
    format!("{}x{}x{}", s.c, s.h, s.w)
}

/// Per-layer learnable parameters.
pub fn params_table(report: &NetworkReport) -> Table {
    let mut t = Table::new(&["name", "kind", "output", "params"]);
    for l in &report.layers {
        t.rows.push(vec![
            l.name.clone(),
            l.kind.as_str().into(),
            shape_cell(l.output),
            l.params.to_string(),
        ]);
    }
    let total = report.total_params();
    t.summary.push(format!(
        "total params: {total} ({:.3} M)",
        total as f64 / 1e6
    ));
    t
}

/// Per-layer multiply-accumulates at the report's input resolution.
pub fn macs_table(report: &NetworkReport) -> Table {
    let mut t = Table::new(&["name", "kind", "output", "macs"]);
    for l in &report.layers {
        t.rows.push(vec![
            l.name.clone(),
            l.kind.as_str().into(),
            shape_cell(l.output),
            l.macs.to_string(),
        ]);
    }
    let total = report.total_macs();
    t.summary.push(format!(
        "input {}x{}: total MACs {total} ({:.3} GMACs, FLOPs = 2 x MACs)",
        report.input.h,
        report.input.w,
        total as f64 / 1e9
    ));
    t
}

/// Receptive field and jump (input pixels) after each layer.
pub fn rf_table(report: &NetworkReport) -> Table {
    let mut t = Table::new(&["name", "kind", "rf_h", "rf_w", "jump_h", "jump_w"]);
    for l in &report.layers {
        t.rows.push(vec![
            l.name.clone(),
            l.kind.as_str().into(),
            l.rf.0.to_string(),
            l.rf.1.to_string(),
            l.jump.0.to_string(),
            l.jump.1.to_string(),
        ]);
    }
    if let Some(last) = report.layers.last() {
        t.summary.push(format!("final receptive field: {}", last.receptive_field()));
    }
    t
}

/// Per-class IoU (percent) with the mean over classes present in either
/// ground truth or prediction.
pub fn iou_table(cm: &ConfusionMatrix) -> Result<Table> {
    let mut t = Table::new(&["class", "iou"]);
    for (c, iou) in cm.iou_per_class().into_iter().enumerate() {
        let cell = iou.map_or_else(|| "absent".to_string(), |v| format!("{:.2}", v * 100.0));
        t.rows.push(vec![c.to_string(), cell]);
    }
    let miou = cm.mean_iou()?;
    t.summary.push(format!("mIoU: {:.1}", miou * 100.0));
    Ok(t)
}
