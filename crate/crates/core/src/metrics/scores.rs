use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::MatchResult;
use crate::table::{adjacency_triplets, Axis, Table};

/// Precision, recall and their harmonic mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Prf {
    pub p: f64,
    pub r: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(tp: usize, n_pred: usize, n_gt: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let (p, r) = (ratio(tp, n_pred), ratio(tp, n_gt));
        let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        Self { p, r, f1 }
    }

    /// Like [`Prf::from_counts`], but two empty sets agree perfectly.
    pub fn agreement(tp: usize, n_pred: usize, n_gt: usize) -> Self {
        if n_pred == 0 && n_gt == 0 {
            Self { p: 1.0, r: 1.0, f1: 1.0 }
        } else {
            Self::from_counts(tp, n_pred, n_gt)
        }
    }
}

pub fn detection_f1(m: &MatchResult) -> Prf {
    Prf::from_counts(m.pairs.len(), m.n_pred(), m.n_gt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogicalAccuracy {
    pub all: f64,
    /// 1.0 when the ground truth has no spanning cells.
    pub spanning: f64,
    pub spanning_count: usize,
    pub correct: usize,
    pub total: usize,
}

/// Fraction of ground-truth cells whose matched prediction has all four
/// indices right, overall and over spanning cells.
pub fn logical_accuracy(pred: &Table, gt: &Table, m: &MatchResult) -> LogicalAccuracy {
    let pred_loc: BTreeMap<usize, _> = pred.cells.iter().map(|c| (c.id, c.logical)).collect();
    let matched: BTreeMap<usize, usize> = m.pairs.iter().map(|p| (p.gt, p.pred)).collect();
    let (mut correct, mut span_correct, mut span_total) = (0, 0, 0);
    for cell in &gt.cells {
        let ok = matched.get(&cell.id).and_then(|p| pred_loc.get(p)).is_some_and(|l| *l == cell.logical);
        correct += ok as usize;
        if cell.logical.is_spanning() {
            span_total += 1;
            span_correct += ok as usize;
        }
    }
    let ratio = |a: usize, b: usize, empty: f64| if b == 0 { empty } else { a as f64 / b as f64 };
    LogicalAccuracy {
        all: ratio(correct, gt.len(), 1.0),
        spanning: ratio(span_correct, span_total, 1.0),
        spanning_count: span_total,
        correct,
        total: gt.len(),
    }
}

/// Counts for adjacency relations after mapping predictions into the
/// ground-truth id space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RelationCounts {
    pub tp: usize,
    pub n_pred: usize,
    pub n_gt: usize,
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
enum End {
    Gt(usize),
    Unmatched(usize),
}

pub fn relation_counts(pred: &Table, gt: &Table, m: &MatchResult) -> RelationCounts {
    let map: BTreeMap<usize, usize> = m.pairs.iter().map(|p| (p.pred, p.gt)).collect();
    let end = |id: usize| map.get(&id).map_or(End::Unmatched(id), |g| End::Gt(*g));
    let axis_key = |a: Axis| a == Axis::Horizontal;
    let gt_set: BTreeSet<(usize, usize, bool)> =
        adjacency_triplets(gt).into_iter().map(|t| (t.a.min(t.b), t.a.max(t.b), axis_key(t.axis))).collect();
    let pred_set: BTreeSet<(End, End, bool)> = adjacency_triplets(pred)
        .into_iter()
        .map(|t| {
            let (a, b) = (end(t.a), end(t.b));
            if a <= b {
                (a, b, axis_key(t.axis))
            } else {
                (b, a, axis_key(t.axis))
            }
        })
        .collect();
    let tp = pred_set
        .iter()
        .filter(|(a, b, h)| match (a, b) {
            (End::Gt(a), End::Gt(b)) => gt_set.contains(&(*a, *b, *h)),
            _ => false,
        })
        .count();
    RelationCounts { tp, n_pred: pred_set.len(), n_gt: gt_set.len() }
}

pub fn adjacency_f1(pred: &Table, gt: &Table, m: &MatchResult) -> Prf {
    let c = relation_counts(pred, gt, m);
    Prf::agreement(c.tp, c.n_pred, c.n_gt)
}

/// BLEU-4 against a single reference, with brevity penalty and without
/// smoothing.
pub fn bleu(candidate: &[String], reference: &[String]) -> f64 {
    if candidate.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        if candidate.len() < n {
            return 0.0;
        }
        let mut ref_counts: BTreeMap<&[String], usize> = BTreeMap::new();
        for g in reference.windows(n) {
            *ref_counts.entry(g).or_default() += 1;
        }
        let mut cand_counts: BTreeMap<&[String], usize> = BTreeMap::new();
        for g in candidate.windows(n) {
            *cand_counts.entry(g).or_default() += 1;
        }
        let clipped: usize = cand_counts.iter().map(|(g, c)| (*c).min(ref_counts.get(g).copied().unwrap_or(0))).sum();
        if clipped == 0 {
            return 0.0;
        }
        log_sum += (clipped as f64 / (candidate.len() - n + 1) as f64).ln();
    }
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    bp * (log_sum / 4.0).exp()
}
