use serde::{Deserialize, Serialize};

use crate::table::{Quad, Table};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub pred: usize,
    pub gt: usize,
    pub iou: f64,
}

/// One-to-one assignment between predicted and ground-truth cells.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchResult {
    pub pairs: Vec<MatchPair>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_gt: Vec<usize>,
}

impl MatchResult {
    pub fn n_pred(&self) -> usize {
        self.pairs.len() + self.unmatched_pred.len()
    }

    pub fn n_gt(&self) -> usize {
        self.pairs.len() + self.unmatched_gt.len()
    }

    /// The ground-truth id matched to `pred`, if any.
    pub fn gt_for(&self, pred: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.pred == pred).map(|p| p.gt)
    }
}

/// Greedy matching by descending bounding-box IoU, ties broken by
/// `(pred, gt)`. Only pairs with IoU strictly above `iou_threshold` match.
/// Ids are positions in the input slices.
pub fn match_cells(pred: &[Quad], gt: &[Quad], iou_threshold: f64) -> MatchResult {
    let pb: Vec<_> = pred.iter().map(Quad::bbox).collect();
    let gb: Vec<_> = gt.iter().map(Quad::bbox).collect();
    let mut cand = Vec::new();
    for (i, p) in pb.iter().enumerate() {
        for (j, g) in gb.iter().enumerate() {
            let iou = p.iou(g);
            if iou > iou_threshold {
                cand.push(MatchPair { pred: i, gt: j, iou });
            }
        }
    }
    cand.sort_by(|a, b| b.iou.total_cmp(&a.iou).then(a.pred.cmp(&b.pred)).then(a.gt.cmp(&b.gt)));
    let mut used_p = vec![false; pred.len()];
    let mut used_g = vec![false; gt.len()];
    let mut pairs = Vec::new();
    for c in cand {
        if !used_p[c.pred] && !used_g[c.gt] {
            used_p[c.pred] = true;
            used_g[c.gt] = true;
            pairs.push(c);
        }
    }
    pairs.sort_by_key(|p| p.pred);
    MatchResult {
        pairs,
        unmatched_pred: (0..pred.len()).filter(|&i| !used_p[i]).collect(),
        unmatched_gt: (0..gt.len()).filter(|&j| !used_g[j]).collect(),
    }
}

/// [`match_cells`] over two tables, reporting cell ids instead of positions.
pub fn match_tables(pred: &Table, gt: &Table, iou_threshold: f64) -> MatchResult {
    let m = match_cells(&pred.quads(), &gt.quads(), iou_threshold);
    let pid = |i: usize| pred.cells[i].id;
    let gid = |j: usize| gt.cells[j].id;
    MatchResult {
        pairs: m.pairs.iter().map(|p| MatchPair { pred: pid(p.pred), gt: gid(p.gt), iou: p.iou }).collect(),
        unmatched_pred: m.unmatched_pred.into_iter().map(pid).collect(),
        unmatched_gt: m.unmatched_gt.into_iter().map(gid).collect(),
    }
}
