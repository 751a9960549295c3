use serde::{Deserialize, Serialize};

use super::{LogicalLocation, Table};

/// Direction of an adjacency relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Same row band, consecutive columns.
    Horizontal,
    /// Same column band, consecutive rows.
    Vertical,
}

/// One unordered adjacent pair, `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    pub a: usize,
    pub b: usize,
    pub axis: Axis,
}

/// Classifies the adjacency between two cells.
///
/// Horizontal when the row intervals intersect and one cell starts in the
/// column right after the other ends; vertical symmetrically. The two cases
/// are mutually exclusive: consecutive columns imply disjoint column intervals.
pub fn adjacency_axis(a: &LogicalLocation, b: &LogicalLocation) -> Option<Axis> {
    let next_col =
        a.start_col == b.end_col + 1 || b.start_col == a.end_col + 1;
    if a.rows_intersect(b) && next_col {
        return Some(Axis::Horizontal);
    }
    let next_row =
        a.start_row == b.end_row + 1 || b.start_row == a.end_row + 1;
    if a.cols_intersect(b) && next_row {
        return Some(Axis::Vertical);
    }
    None
}

pub fn adjacency_relation(a: &LogicalLocation, b: &LogicalLocation) -> bool {
    adjacency_axis(a, b).is_some()
}

/// All adjacent pairs of a table, sorted by `(a, b)`.
pub fn adjacency_triplets(t: &Table) -> Vec<Triplet> {
    let mut out = Vec::new();
    for (i, ci) in t.cells.iter().enumerate() {
        for cj in &t.cells[i + 1..] {
            if let Some(axis) = adjacency_axis(&ci.logical, &cj.logical) {
                let (a, b) = if ci.id < cj.id { (ci.id, cj.id) } else { (cj.id, ci.id) };
                out.push(Triplet { a, b, axis });
            }
        }
    }
    out.sort();
    out
}
