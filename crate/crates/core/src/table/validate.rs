use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `n_rows` or `n_cols` is zero.
    EmptyGrid,
    DuplicateId,
    /// start index after end index.
    InvertedSpan,
    /// Location outside `[0, n_rows) × [0, n_cols)`.
    OutOfRange,
    Overlap,
    NonFiniteQuad,
    SelfIntersectingQuad,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub cells: Vec<usize>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} (cells {:?})", self.rule, self.cells)
    }
}

/// Checks every table invariant. An empty result means the table is valid.
pub fn validate_table(t: &Table) -> Vec<Violation> {
    let mut out = Vec::new();
    if t.n_rows == 0 || t.n_cols == 0 {
        out.push(Violation { rule: Rule::EmptyGrid, cells: vec![] });
    }
    let mut seen: HashMap<usize, usize> = HashMap::new();
    for c in &t.cells {
        *seen.entry(c.id).or_default() += 1;
    }
    let mut dups: Vec<usize> = seen.into_iter().filter(|&(_, n)| n > 1).map(|(id, _)| id).collect();
    dups.sort_unstable();
    for id in dups {
        out.push(Violation { rule: Rule::DuplicateId, cells: vec![id] });
    }
    for c in &t.cells {
        let l = &c.logical;
        if !l.is_well_formed() {
            out.push(Violation { rule: Rule::InvertedSpan, cells: vec![c.id] });
        } else if l.end_row >= t.n_rows || l.end_col >= t.n_cols {
            out.push(Violation { rule: Rule::OutOfRange, cells: vec![c.id] });
        }
        if !c.quad.is_finite() {
            out.push(Violation { rule: Rule::NonFiniteQuad, cells: vec![c.id] });
        } else if !c.quad.is_simple() {
            out.push(Violation { rule: Rule::SelfIntersectingQuad, cells: vec![c.id] });
        }
    }
    for (i, a) in t.cells.iter().enumerate() {
        if !a.logical.is_well_formed() {
            continue;
        }
        for b in &t.cells[i + 1..] {
            if b.logical.is_well_formed() && a.logical.overlaps(&b.logical) {
                out.push(Violation { rule: Rule::Overlap, cells: vec![a.id, b.id] });
            }
        }
    }
    out
}
