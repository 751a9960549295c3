use std::fmt;

use serde::{Deserialize, Serialize};

use super::{bleu, detection_f1, logical_accuracy, match_tables, relation_counts, teds, Prf};
use crate::error::Result;
use crate::table::{markup_tokens, to_markup, Table};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// Dataset-level scores. Count-based metrics are pooled over all tables;
/// TEDS and BLEU are per-table means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub detection_p: f64,
    pub detection_r: f64,
    pub detection_f1: f64,
    pub adjacency_p: f64,
    pub adjacency_r: f64,
    pub adjacency_f1: f64,
    pub logical_accuracy: f64,
    pub logical_accuracy_spanning: f64,
    /// Ground-truth spanning cells behind `logical_accuracy_spanning`.
    pub spanning_count: usize,
    pub teds: f64,
    pub bleu: f64,
    pub tables: usize,
}

impl MetricsReport {
    pub const FIELDS: [&'static str; 10] = [
        "detection_p",
        "detection_r",
        "detection_f1",
        "adjacency_p",
        "adjacency_r",
        "adjacency_f1",
        "logical_accuracy",
        "logical_accuracy_spanning",
        "teds",
        "bleu",
    ];
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "tables            {}", self.tables)?;
        writeln!(f, "detection  P/R/F1 {:.4} {:.4} {:.4}", self.detection_p, self.detection_r, self.detection_f1)?;
        writeln!(f, "adjacency  P/R/F1 {:.4} {:.4} {:.4}", self.adjacency_p, self.adjacency_r, self.adjacency_f1)?;
        writeln!(f, "logical accuracy  {:.4}", self.logical_accuracy)?;
        writeln!(f, "  spanning        {:.4} ({} cells)", self.logical_accuracy_spanning, self.spanning_count)?;
        writeln!(f, "TEDS              {:.4}", self.teds)?;
        write!(f, "BLEU              {:.4}", self.bleu)
    }
}

/// Running totals for [`MetricsReport`].
#[derive(Debug, Clone, Default)]
pub struct MetricsAccumulator {
    det_tp: usize,
    det_pred: usize,
    det_gt: usize,
    rel_tp: usize,
    rel_pred: usize,
    rel_gt: usize,
    correct: usize,
    cells: usize,
    span_correct: usize,
    spans: usize,
    teds_sum: f64,
    bleu_sum: f64,
    tables: usize,
}

impl MetricsAccumulator {
    pub fn add(&mut self, pred: &Table, gt: &Table, iou_threshold: f64) -> Result<()> {
        let m = match_tables(pred, gt, iou_threshold);
        self.det_tp += m.pairs.len();
        self.det_pred += m.n_pred();
        self.det_gt += m.n_gt();
        let rel = relation_counts(pred, gt, &m);
        self.rel_tp += rel.tp;
        self.rel_pred += rel.n_pred;
        self.rel_gt += rel.n_gt;
        let acc = logical_accuracy(pred, gt, &m);
        self.correct += acc.correct;
        self.cells += acc.total;
        self.span_correct += (acc.spanning * acc.spanning_count as f64).round() as usize;
        self.spans += acc.spanning_count;
        let (pm, gm) = (to_markup(pred), to_markup(gt));
        self.teds_sum += teds(&pm, &gm, false)?;
        self.bleu_sum += bleu(&markup_tokens(&pm), &markup_tokens(&gm));
        self.tables += 1;
        Ok(())
    }

    pub fn report(&self) -> MetricsReport {
        let det = Prf::from_counts(self.det_tp, self.det_pred, self.det_gt);
        let rel = Prf::agreement(self.rel_tp, self.rel_pred, self.rel_gt);
        let ratio = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
        let mean = |s: f64| if self.tables == 0 { 0.0 } else { s / self.tables as f64 };
        MetricsReport {
            detection_p: det.p,
            detection_r: det.r,
            detection_f1: det.f1,
            adjacency_p: rel.p,
            adjacency_r: rel.r,
            adjacency_f1: rel.f1,
            logical_accuracy: ratio(self.correct, self.cells),
            logical_accuracy_spanning: ratio(self.span_correct, self.spans),
            spanning_count: self.spans,
            teds: mean(self.teds_sum),
            bleu: mean(self.bleu_sum),
            tables: self.tables,
        }
    }
}

pub fn evaluate_tables(pred: &Table, gt: &Table, iou_threshold: f64) -> Result<MetricsReport> {
    let mut acc = MetricsAccumulator::default();
    acc.add(pred, gt, iou_threshold)?;
    Ok(acc.report())
}

/// Evaluates aligned lists of predicted and ground-truth tables.
pub fn evaluate_dataset<'a>(
    pairs: impl IntoIterator<Item = (&'a Table, &'a Table)>,
    iou_threshold: f64,
) -> Result<MetricsReport> {
    let mut acc = MetricsAccumulator::default();
    for (p, g) in pairs {
        acc.add(p, g, iou_threshold)?;
    }
    Ok(acc.report())
}

/// Detection scores for a single table, exposed for symmetry with the other
/// per-table helpers.
pub fn detection_scores(pred: &Table, gt: &Table, iou_threshold: f64) -> Prf {
    detection_f1(&match_tables(pred, gt, iou_threshold))
}
