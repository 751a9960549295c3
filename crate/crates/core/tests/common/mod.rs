//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tablelogic::metrics::TreeNode;
use tablelogic::table::{Axis, BBox, Cell, LogicalLocation, Table};

/// Random valid table on an `rows × cols` grid. Slots are visited row-major;
/// a span is attempted with `span_prob`, and every placed cell is dropped with
/// `hole_prob`, leaving empty slots behind.
pub fn random_table(seed: u64, rows: usize, cols: usize, span_prob: f64, hole_prob: f64) -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken = vec![vec![false; cols]; rows];
    let mut locs = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if taken[r][c] {
                continue;
            }
            let (mut h, mut w) = (1, 1);
            if rng.random_bool(span_prob) {
                h = rng.random_range(1..=3).min(rows - r);
                w = rng.random_range(1..=3).min(cols - c);
            }
            let free = (r..r + h).all(|i| (c..c + w).all(|j| !taken[i][j]));
            if !free {
                h = 1;
                w = 1;
            }
            for row in taken.iter_mut().skip(r).take(h) {
                for slot in row.iter_mut().skip(c).take(w) {
                    *slot = true;
                }
            }
            locs.push(LogicalLocation::new(r, r + h - 1, c, c + w - 1));
        }
    }
    let mut cells = Vec::new();
    for l in locs {
        if hole_prob > 0.0 && rng.random_bool(hole_prob) {
            continue;
        }
        let quad = BBox::new(
            l.start_col as f64 * 40.0 + 2.0,
            l.start_row as f64 * 20.0 + 2.0,
            (l.end_col + 1) as f64 * 40.0 - 2.0,
            (l.end_row + 1) as f64 * 20.0 - 2.0,
        )
        .to_quad();
        cells.push(Cell { id: cells.len(), quad, logical: l, text: None });
    }
    Table { image_size: [cols as f64 * 40.0, rows as f64 * 20.0], n_rows: rows, n_cols: cols, cells }
}

/// Paints cell ids onto the grid and reports every pair of distinct ids that
/// occupy horizontally or vertically touching slots.
pub fn raster_adjacency(t: &Table) -> BTreeSet<(usize, usize, Axis)> {
    let mut grid = vec![vec![None; t.n_cols]; t.n_rows];
    for cell in &t.cells {
        let l = cell.logical;
        for row in grid.iter_mut().take(l.end_row + 1).skip(l.start_row) {
            for slot in row.iter_mut().take(l.end_col + 1).skip(l.start_col) {
                *slot = Some(cell.id);
            }
        }
    }
    let mut out = BTreeSet::new();
    for r in 0..t.n_rows {
        for c in 0..t.n_cols {
            let Some(a) = grid[r][c] else { continue };
            if let Some(Some(b)) = grid[r].get(c + 1) {
                if *b != a {
                    out.insert((a.min(*b), a.max(*b), Axis::Horizontal));
                }
            }
            if let Some(Some(b)) = grid.get(r + 1).map(|row| row[c]) {
                if b != a {
                    out.insert((a.min(b), a.max(b), Axis::Vertical));
                }
            }
        }
    }
    out
}

/// Logical locations sorted by `(start_row, start_col)`, the order in which
/// markup lists them.
pub fn document_order(t: &Table) -> Vec<LogicalLocation> {
    let mut locs = t.locations();
    locs.sort_by_key(|l| (l.start_row, l.start_col));
    locs
}

/// Tree edit distance from the recursive forest definition, memoised on the
/// forests themselves. Exponential in the worst case; fine up to ~10 nodes.
pub fn oracle_ted<L: Clone + Eq + std::hash::Hash>(
    a: &TreeNode<L>,
    b: &TreeNode<L>,
    rename: &dyn Fn(&L, &L) -> f64,
) -> f64 {
    let mut memo = HashMap::new();
    forest_distance(&[a.clone()], &[b.clone()], rename, &mut memo)
}

type Forest<L> = Vec<TreeNode<L>>;

fn forest_distance<L: Clone + Eq + std::hash::Hash>(
    f: &[TreeNode<L>],
    g: &[TreeNode<L>],
    rename: &dyn Fn(&L, &L) -> f64,
    memo: &mut HashMap<(Forest<L>, Forest<L>), f64>,
) -> f64 {
    if f.is_empty() {
        return g.iter().map(TreeNode::size).sum::<usize>() as f64;
    }
    if g.is_empty() {
        return f.iter().map(TreeNode::size).sum::<usize>() as f64;
    }
    let key = (f.to_vec(), g.to_vec());
    if let Some(&d) = memo.get(&key) {
        return d;
    }
    let (v, f_rest) = f.split_last().unwrap();
    let (w, g_rest) = g.split_last().unwrap();
    let without_root = |rest: &[TreeNode<L>], t: &TreeNode<L>| {
        let mut out = rest.to_vec();
        out.extend(t.children.iter().cloned());
        out
    };
    let del = forest_distance(&without_root(f_rest, v), g, rename, memo) + 1.0;
    let ins = forest_distance(f, &without_root(g_rest, w), rename, memo) + 1.0;
    let sub = forest_distance(f_rest, g_rest, rename, memo)
        + forest_distance(&v.children, &w.children, rename, memo)
        + rename(&v.label, &w.label);
    let d = del.min(ins).min(sub);
    memo.insert(key, d);
    d
}

/// Random ordered tree with exactly `n` nodes over a small label alphabet.
pub fn random_tree(rng: &mut ChaCha8Rng, n: usize, alphabet: u8) -> TreeNode<u8> {
    let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..alphabet)).collect();
    let parents: Vec<usize> = (1..n).map(|i| rng.random_range(0..i)).collect();
    fn build(i: usize, labels: &[u8], parents: &[usize]) -> TreeNode<u8> {
        let kids = (1..labels.len()).filter(|&k| parents[k - 1] == i).map(|k| build(k, labels, parents)).collect();
        TreeNode::new(labels[i], kids)
    }
    build(0, &labels, &parents)
}

/// Random `<tr>/<td>` markup whose tree (root, rows, cells) has at most
/// `max_nodes` nodes. Spans are drawn from {1, 2}.
pub fn random_markup(rng: &mut ChaCha8Rng, max_nodes: usize) -> String {
    let mut budget = max_nodes - 1;
    let mut s = String::new();
    while budget >= 2 && (s.is_empty() || rng.random_bool(0.6)) {
        budget -= 1;
        s.push_str("<tr>");
        let tds = rng.random_range(1..=budget.min(4));
        for _ in 0..tds {
            s.push_str(&format!(
                "<td rowspan=\"{}\" colspan=\"{}\"></td>",
                rng.random_range(1..=2),
                rng.random_range(1..=2)
            ));
        }
        budget -= tds;
        s.push_str("</tr>");
    }
    s
}

/// Textbook BLEU-4: clipped n-gram precisions, geometric mean, brevity penalty.
pub fn reference_bleu(cand: &[&str], reference: &[&str]) -> f64 {
    if cand.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        if cand.len() < n {
            return 0.0;
        }
        let grams = |s: &[&str]| {
            let mut m: HashMap<Vec<String>, usize> = HashMap::new();
            for w in s.windows(n) {
                *m.entry(w.iter().map(|x| x.to_string()).collect()).or_default() += 1;
            }
            m
        };
        let (c, r) = (grams(cand), grams(reference));
        let clipped: usize = c.iter().map(|(g, k)| (*k).min(r.get(g).copied().unwrap_or(0))).sum();
        let total = cand.len() + 1 - n;
        if clipped == 0 {
            return 0.0;
        }
        log_sum += (clipped as f64 / total as f64).ln() / 4.0;
    }
    let (c, r) = (cand.len() as f64, reference.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    bp * log_sum.exp()
}

/// Best one-to-one assignment over pairs with IoU above the threshold:
/// maximum cardinality first, then maximum total IoU. Exhaustive search.
pub fn best_assignment(iou: &[Vec<f64>], threshold: f64) -> (usize, f64, Vec<(usize, usize)>) {
    fn go(
        i: usize,
        iou: &[Vec<f64>],
        thr: f64,
        used: &mut Vec<bool>,
        cur: &mut Vec<(usize, usize)>,
        acc: f64,
        best: &mut (usize, f64, Vec<(usize, usize)>),
    ) {
        if i == iou.len() {
            if cur.len() > best.0 || (cur.len() == best.0 && acc > best.1 + 1e-12) {
                *best = (cur.len(), acc, cur.clone());
            }
            return;
        }
        go(i + 1, iou, thr, used, cur, acc, best);
        for j in 0..used.len() {
            if !used[j] && iou[i][j] > thr {
                used[j] = true;
                cur.push((i, j));
                go(i + 1, iou, thr, used, cur, acc + iou[i][j], best);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let m = iou.first().map_or(0, Vec::len);
    let mut best = (0, 0.0, Vec::new());
    go(0, iou, threshold, &mut vec![false; m], &mut Vec::new(), 0.0, &mut best);
    best
}

/// A 6×4 grid of unit cells and a prediction with the same geometry in which
/// the lower four rows are pushed one column to the right, the way a missed
/// column boundary shifts a whole block of cells.
pub fn column_shift_case() -> (Table, Table) {
    let gt = random_table(0, 6, 4, 0.0, 0.0);
    let mut pred = gt.clone();
    for cell in &mut pred.cells {
        if cell.logical.start_row >= 2 {
            cell.logical.start_col += 1;
            cell.logical.end_col += 1;
        }
    }
    pred.n_cols = 5;
    (pred, gt)
}

/// Finite-difference check of the full cascade loss on one table.
pub fn model_gradcheck(
    cfg: &tablelogic::regressor::ModelConfig,
    table: &Table,
    seed: u64,
) -> tablelogic::Result<tablelogic::tensor::GradCheckReport> {
    use tablelogic::regressor::{adjacent_pairs_of, loss_total, CascadeRegressor, LossToggles};
    use tablelogic::tensor::{finite_diff_check, GradCheckOptions, ParamStore};

    let mut store = ParamStore::new();
    let model = CascadeRegressor::new(cfg, &mut store, seed)?;
    let quads = table.quads();
    let gt = table.locations();
    let pairs = adjacent_pairs_of(&gt);
    let toggles = LossToggles { inter: cfg.enable_inter, intra: cfg.enable_intra, variant: cfg.inter_variant };
    finite_diff_check(
        &mut store,
        |g, store| {
            let f = model.forward(g, store, &quads, table.image_size)?;
            Ok(loss_total(g, f.l_base, f.l_stack, &gt, &pairs, toggles)?.total)
        },
        GradCheckOptions { seed, ..GradCheckOptions::default() },
    )
}
