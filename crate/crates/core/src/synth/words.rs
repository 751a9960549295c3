use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{rng_for, GenConfig, Stream};
use crate::table::{BBox, Table};

/// A synthetic OCR word: its box plus the grid slot it is labelled with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordBox {
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub grid_row: usize,
    pub grid_col: usize,
    pub cell_id: usize,
}

/// Signed logical distance between two words: `grid(a) - grid(b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LdpPairLabel {
    pub a: usize,
    pub b: usize,
    pub row_dist: i64,
    pub col_dist: i64,
}

const TEXT_INSET: f64 = 3.0;
const MAX_TEXT_FRACTION: f64 = 0.6;

/// Lays out 1..k words in every cell, top-left aligned inside the cell's first
/// grid slot. Each word is labelled with the cell's start row/column.
pub fn generate_word_boxes(t: &Table, cfg: &GenConfig, seed: u64) -> Vec<WordBox> {
    let mut rng = rng_for(seed, 0, Stream::Words);
    let slot_h = |c: &crate::table::Cell| c.quad.bbox().height() / c.logical.row_span() as f64;
    let min_slot_h = t.cells.iter().map(slot_h).fold(f64::INFINITY, f64::min);
    let word_h = (0.4 * min_slot_h).clamp(4.0, 14.0);

    let mut words = Vec::new();
    for cell in &t.cells {
        let b = cell.quad.bbox();
        let slot_w = b.width() / cell.logical.col_span() as f64;
        let k = rng.random_range(cfg.words_per_cell_range.0..=cfg.words_per_cell_range.1);
        let gap = 0.3 * word_h;
        let mut widths: Vec<f64> = (0..k).map(|_| rng.random_range(1.5..4.0) * word_h).collect();
        let budget = (MAX_TEXT_FRACTION * slot_w - TEXT_INSET - gap * (k - 1) as f64).max(k as f64);
        let total: f64 = widths.iter().sum();
        if total > budget {
            widths.iter_mut().for_each(|w| *w *= budget / total);
        }
        let inset = (TEXT_INSET + rng.random_range(-1.0..1.0)).min(0.2 * slot_w);
        let y0 = b.y0 + (TEXT_INSET + rng.random_range(-1.0..1.0)).min(0.2 * b.height());
        let h = (word_h + rng.random_range(-0.5..0.5)).min(b.y1 - y0);
        let mut x = b.x0 + inset;
        for w in widths {
            let w = w.min(b.x1 - x).max(0.0);
            words.push(WordBox {
                bbox: BBox::new(x, y0, x + w, y0 + h),
                grid_row: cell.logical.start_row,
                grid_col: cell.logical.start_col,
                cell_id: cell.id,
            });
            x = (x + w + gap).min(b.x1);
        }
    }
    words
}

/// Samples up to `max_pairs` distinct ordered word pairs (identity pairs
/// included) and labels them with signed grid differences. Output is sorted
/// by `(a, b)`.
pub fn ldp_labels(words: &[WordBox], max_pairs: usize, seed: u64) -> Vec<LdpPairLabel> {
    let n = words.len();
    let total = n * n;
    let mut rng = rng_for(seed, 0, Stream::Pairs);
    let mut picked: Vec<usize> = if total <= max_pairs {
        (0..total).collect()
    } else {
        sample(&mut rng, total, max_pairs).into_vec()
    };
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|k| {
            let (a, b) = (k / n, k % n);
            LdpPairLabel {
                a,
                b,
                row_dist: words[a].grid_row as i64 - words[b].grid_row as i64,
                col_dist: words[a].grid_col as i64 - words[b].grid_col as i64,
            }
        })
        .collect()
}
