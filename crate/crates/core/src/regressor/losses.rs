use super::config::InterVariant;
use super::model::locations_tensor;
use crate::error::Result;
use crate::table::{LogicalLocation, Table};
use crate::tensor::{Graph, Var};

const RS: usize = 0;
const RE: usize = 1;
const CS: usize = 2;
const CE: usize = 3;

/// Ordered adjacent pairs of cell positions. `(i, j)` in `horizontal` means
/// `i` sits immediately right of `j`; in `vertical`, immediately below.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AdjacentPairs {
    pub horizontal: Vec<(usize, usize)>,
    pub vertical: Vec<(usize, usize)>,
}

impl AdjacentPairs {
    pub fn is_empty(&self) -> bool {
        self.horizontal.is_empty() && self.vertical.is_empty()
    }
}

pub fn build_adjacent_pairs(gt: &Table) -> AdjacentPairs {
    adjacent_pairs_of(&gt.locations())
}

pub fn adjacent_pairs_of(locs: &[LogicalLocation]) -> AdjacentPairs {
    let mut pairs = AdjacentPairs::default();
    for (i, a) in locs.iter().enumerate() {
        for (j, b) in locs.iter().enumerate() {
            if a.rows_intersect(b) && a.start_col == b.end_col + 1 {
                pairs.horizontal.push((i, j));
            }
            if a.cols_intersect(b) && a.start_row == b.end_row + 1 {
                pairs.vertical.push((i, j));
            }
        }
    }
    pairs
}

/// Mutual-exclusivity hinge over adjacent pairs.
pub fn loss_inter(g: &mut Graph, l_stack: Var, pairs: &AdjacentPairs, variant: InterVariant) -> Result<Var> {
    let (h_axis, v_axis) = match variant {
        InterVariant::Ordered => ((CE, CS), (RE, RS)),
        InterVariant::Literal => ((RE, RS), (CE, CS)),
    };
    let mut earlier = Vec::new();
    let mut later = Vec::new();
    for (set, (end, start)) in [(&pairs.horizontal, h_axis), (&pairs.vertical, v_axis)] {
        for &(i, j) in set {
            earlier.push(j * 4 + end);
            later.push(i * 4 + start);
        }
    }
    if earlier.is_empty() {
        return Ok(g.constant(crate::tensor::Tensor::scalar(0.0)));
    }
    let e = g.gather(l_stack, &earlier)?;
    let s = g.gather(l_stack, &later)?;
    let diff = g.sub(e, s)?;
    let shifted = g.add_scalar(diff, 1.0);
    let hinge = g.max_with_zero(shifted);
    Ok(g.sum(hinge))
}

/// Span-consistency L1 over ground-truth spanning cells.
pub fn loss_intra(g: &mut Graph, l_stack: Var, gt: &[LogicalLocation]) -> Result<Var> {
    let mut ends = Vec::new();
    let mut starts = Vec::new();
    let mut spans = Vec::new();
    for (i, l) in gt.iter().enumerate() {
        if l.row_span() > 1 {
            ends.push(i * 4 + RE);
            starts.push(i * 4 + RS);
            spans.push((l.end_row - l.start_row) as f64);
        }
        if l.col_span() > 1 {
            ends.push(i * 4 + CE);
            starts.push(i * 4 + CS);
            spans.push((l.end_col - l.start_col) as f64);
        }
    }
    if ends.is_empty() {
        return Ok(g.constant(crate::tensor::Tensor::scalar(0.0)));
    }
    let e = g.gather(l_stack, &ends)?;
    let s = g.gather(l_stack, &starts)?;
    let pred = g.sub(e, s)?;
    let target = g.constant(crate::tensor::Tensor::vector(spans));
    let diff = g.sub(pred, target)?;
    Ok(g.abs_sum(diff))
}

/// Mean over cells of the L1 error of both regressors.
pub fn loss_log(g: &mut Graph, l_base: Var, l_stack: Var, gt: &[LogicalLocation]) -> Result<Var> {
    let target = g.constant(locations_tensor(gt));
    let db = g.sub(l_base, target)?;
    let ds = g.sub(l_stack, target)?;
    let a = g.abs_sum(db);
    let b = g.abs_sum(ds);
    let total = g.add(a, b)?;
    Ok(g.scalar_mul(total, 1.0 / gt.len().max(1) as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossToggles {
    pub inter: bool,
    pub intra: bool,
    pub variant: InterVariant,
}

#[derive(Debug, Clone, Copy)]
pub struct LossParts {
    pub total: Var,
    pub log: Var,
    pub inter: Option<Var>,
    pub intra: Option<Var>,
}

pub fn loss_total(
    g: &mut Graph,
    l_base: Var,
    l_stack: Var,
    gt: &[LogicalLocation],
    pairs: &AdjacentPairs,
    toggles: LossToggles,
) -> Result<LossParts> {
    let log = loss_log(g, l_base, l_stack, gt)?;
    let mut total = log;
    let inter = if toggles.inter { Some(loss_inter(g, l_stack, pairs, toggles.variant)?) } else { None };
    let intra = if toggles.intra { Some(loss_intra(g, l_stack, gt)?) } else { None };
    for term in [inter, intra].into_iter().flatten() {
        total = g.add(total, term)?;
    }
    Ok(LossParts { total, log, inter, intra })
}
