//! Seeded synthetic table corpus: ground-truth tables, detector-like noisy
//! quads, word boxes, grid clustering and pairwise logical-distance labels.
//!
//! All randomness is derived from `(seed, index)` through ChaCha stream
//! selection, so records can be produced in any order or in parallel and
//! still come out identical.

mod dataset;
mod grid;
mod words;

pub use dataset::{read_dataset, write_dataset, DatasetRecord};
pub use grid::{cluster_to_grid, recover_word_grid};
pub use words::{generate_word_boxes, ldp_labels, LdpPairLabel, WordBox};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{BBox, Cell, LogicalLocation, Point, Quad, Table};

/// Stream ids keep the different consumers of one `(seed, index)` apart.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum Stream {
    Table = 0,
    Jitter = 1,
    Words = 2,
    Pairs = 3,
}

/// Counter-based RNG: one independent ChaCha stream per `(seed, index, stream)`.
pub fn rng_for(seed: u64, index: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_mul(4).wrapping_add(stream as u64));
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub rows_range: (usize, usize),
    pub cols_range: (usize, usize),
    pub span_prob: f64,
    pub max_span: usize,
    pub jitter_sigma: f64,
    pub image_size: (f64, f64),
    pub cell_pad: f64,
    pub words_per_cell_range: (usize, usize),
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            rows_range: (2, 8),
            cols_range: (2, 8),
            span_prob: 0.1,
            max_span: 3,
            jitter_sigma: 2.0,
            image_size: (512.0, 512.0),
            cell_pad: 2.0,
            words_per_cell_range: (1, 3),
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.rows_range.0 == 0 || self.rows_range.0 > self.rows_range.1 {
            return bad(format!("rows range {:?} is empty", self.rows_range));
        }
        if self.cols_range.0 == 0 || self.cols_range.0 > self.cols_range.1 {
            return bad(format!("cols range {:?} is empty", self.cols_range));
        }
        if !(0.0..1.0).contains(&self.span_prob) {
            return bad(format!("span probability {} not in [0, 1)", self.span_prob));
        }
        if self.max_span == 0 {
            return bad("max span must be at least 1".into());
        }
        if !(self.jitter_sigma >= 0.0) {
            return bad(format!("jitter sigma {} is negative", self.jitter_sigma));
        }
        if !(self.image_size.0 > 0.0 && self.image_size.1 > 0.0) {
            return bad(format!("image size {:?} must be positive", self.image_size));
        }
        if !(self.cell_pad >= 0.0) {
            return bad("cell padding must be non-negative".into());
        }
        let (w0, w1) = self.words_per_cell_range;
        if w0 == 0 || w0 > w1 {
            return bad(format!("words per cell range {:?} is empty", self.words_per_cell_range));
        }
        Ok(())
    }
}

/// Relative widths are drawn from this interval before normalization.
const SIZE_JITTER: (f64, f64) = (0.6, 1.4);
/// Table margin as a fraction of the image side.
const MARGIN: (f64, f64) = (0.02, 0.08);

fn boundaries<R: Rng>(rng: &mut R, n: usize, extent: f64) -> Vec<f64> {
    let m0 = rng.random_range(MARGIN.0..MARGIN.1) * extent;
    let m1 = rng.random_range(MARGIN.0..MARGIN.1) * extent;
    let sizes: Vec<f64> = (0..n).map(|_| rng.random_range(SIZE_JITTER.0..SIZE_JITTER.1)).collect();
    let total: f64 = sizes.iter().sum();
    let span = extent - m0 - m1;
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = m0;
    out.push(acc);
    for s in sizes {
        acc += s / total * span;
        out.push(acc);
    }
    out
}

/// Generates record `index` of the corpus described by `cfg`.
///
/// The grid is filled in row-major order. At each uncovered slot a span is
/// attempted with probability `span_prob`; spans that would cover an already
/// occupied slot are rejected in favour of a 1×1 cell, so every slot ends up
/// covered exactly once. Spans that would leave a row or column with no cell
/// starting in it are split at that line.
pub fn generate_table(cfg: &GenConfig, index: u64) -> Table {
    let mut rng = rng_for(cfg.seed, index, Stream::Table);
    let n_rows = rng.random_range(cfg.rows_range.0..=cfg.rows_range.1);
    let n_cols = rng.random_range(cfg.cols_range.0..=cfg.cols_range.1);
    let xs = boundaries(&mut rng, n_cols, cfg.image_size.0);
    let ys = boundaries(&mut rng, n_rows, cfg.image_size.1);

    let mut covered = vec![false; n_rows * n_cols];
    let mut locs = Vec::new();
    for r in 0..n_rows {
        for c in 0..n_cols {
            if covered[r * n_cols + c] {
                continue;
            }
            let mut loc = LogicalLocation::unit(r, c);
            if cfg.max_span > 1 && rng.random_bool(cfg.span_prob) {
                let (rs, cs) = loop {
                    let rs = rng.random_range(1..=cfg.max_span);
                    let cs = rng.random_range(1..=cfg.max_span);
                    if rs > 1 || cs > 1 {
                        break (rs, cs);
                    }
                };
                let cand = LogicalLocation::new(
                    r,
                    (r + rs - 1).min(n_rows - 1),
                    c,
                    (c + cs - 1).min(n_cols - 1),
                );
                if cand.slots().all(|(sr, sc)| !covered[sr * n_cols + sc]) {
                    loc = cand;
                }
            }
            for (sr, sc) in loc.slots() {
                covered[sr * n_cols + sc] = true;
            }
            locs.push(loc);
        }
    }
    anchor_every_line(&mut locs, n_rows, n_cols);
    let pad = cfg.cell_pad;
    let cells = locs
        .into_iter()
        .enumerate()
        .map(|(id, loc)| {
            let bbox = BBox::new(
                xs[loc.start_col] + pad,
                ys[loc.start_row] + pad,
                xs[loc.end_col + 1] - pad,
                ys[loc.end_row + 1] - pad,
            );
            Cell { id, quad: bbox.to_quad(), logical: loc, text: None }
        })
        .collect();
    Table { image_size: [cfg.image_size.0, cfg.image_size.1], n_rows, n_cols, cells }
}

/// Splits spans so that every grid row and column has at least one cell
/// starting in it. A line without one carries no text of its own and cannot
/// be recovered from word positions. Output is sorted row-major.
fn anchor_every_line(locs: &mut Vec<LogicalLocation>, n_rows: usize, n_cols: usize) {
    for j in 1..n_cols {
        if locs.iter().any(|l| l.start_col == j) {
            continue;
        }
        if let Some(k) = locs.iter().position(|l| l.start_col < j && j <= l.end_col) {
            let right = LogicalLocation { start_col: j, ..locs[k] };
            locs[k].end_col = j - 1;
            locs.push(right);
        }
    }
    for i in 1..n_rows {
        if locs.iter().any(|l| l.start_row == i) {
            continue;
        }
        if let Some(k) = locs.iter().position(|l| l.start_row < i && i <= l.end_row) {
            let lower = LogicalLocation { start_row: i, ..locs[k] };
            locs[k].end_row = i - 1;
            locs.push(lower);
        }
    }
    locs.sort_by_key(|l| (l.start_row, l.start_col));
}

/// Adds independent `N(0, sigma²)` noise to every corner, clamped to the image.
pub fn perturb_quads(t: &Table, sigma: f64, seed: u64) -> Table {
    let mut out = t.clone();
    if sigma == 0.0 {
        return out;
    }
    let mut rng = rng_for(seed, 0, Stream::Jitter);
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    let [w, h] = t.image_size;
    for cell in &mut out.cells {
        for p in cell.quad.0.iter_mut() {
            *p = Point::new(
                (p.x + normal.sample(&mut rng)).clamp(0.0, w),
                (p.y + normal.sample(&mut rng)).clamp(0.0, h),
            );
        }
    }
    out
}

/// Noisy detections for record `index`, drawn from a stream separate from the
/// table layout.
pub fn detections_for(cfg: &GenConfig, index: u64, t: &Table) -> Vec<Quad> {
    let seed = rng_for(cfg.seed, index, Stream::Jitter).random::<u64>();
    perturb_quads(t, cfg.jitter_sigma, seed).quads()
}

/// Builds a full dataset record: table, detections, clustered word boxes and
/// LDP pair labels.
pub fn generate_record(cfg: &GenConfig, index: u64, max_pairs: usize) -> DatasetRecord {
    let table = generate_table(cfg, index);
    let detections = detections_for(cfg, index, &table);
    let word_seed = rng_for(cfg.seed, index, Stream::Words).random::<u64>();
    let mut words = generate_word_boxes(&table, cfg, word_seed);
    recover_word_grid(&mut words);
    let pair_seed = rng_for(cfg.seed, index, Stream::Pairs).random::<u64>();
    let ldp_pairs = ldp_labels(&words, max_pairs, pair_seed);
    DatasetRecord {
        id: Some(format!("synth-{}-{}", cfg.seed, index)),
        table,
        detections: Some(detections),
        words: Some(words),
        ldp_pairs: Some(ldp_pairs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::validate_table;

    #[test]
    fn no_spans_gives_full_grid() {
        let cfg = GenConfig { span_prob: 0.0, ..GenConfig::default() };
        for i in 0..20 {
            let t = generate_table(&cfg, i);
            assert_eq!(t.cells.len(), t.n_rows * t.n_cols);
            assert!(t.cells.iter().all(|c| !c.logical.is_spanning()));
        }
    }

    #[test]
    fn generated_tables_validate() {
        for span_prob in [0.0, 0.1, 0.3, 0.9] {
            let cfg = GenConfig { span_prob, seed: 11, ..GenConfig::default() };
            for i in 0..50 {
                let t = generate_table(&cfg, i);
                assert!(validate_table(&t).is_empty(), "{:?}", validate_table(&t));
                let slots: usize = t.cells.iter().map(|c| c.logical.row_span() * c.logical.col_span()).sum();
                assert_eq!(slots, t.n_rows * t.n_cols);
            }
        }
    }

    #[test]
    fn deterministic_bytes() {
        let cfg = GenConfig { seed: 7, ..GenConfig::default() };
        let a = serde_json::to_string(&generate_table(&cfg, 3)).unwrap();
        let b = serde_json::to_string(&generate_table(&cfg, 3)).unwrap();
        assert_eq!(a, b);
        let c = serde_json::to_string(&generate_table(&cfg, 4)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_sigma_is_identity() {
        let t = generate_table(&GenConfig::default(), 0);
        assert_eq!(perturb_quads(&t, 0.0, 5), t);
    }

    #[test]
    fn perturbation_statistics() {
        let cfg = GenConfig { rows_range: (8, 8), cols_range: (8, 8), span_prob: 0.0, ..GenConfig::default() };
        let t = generate_table(&cfg, 0);
        let p = perturb_quads(&t, 2.0, 99);
        let mut diffs = Vec::new();
        for (a, b) in t.cells.iter().zip(&p.cells) {
            for (pa, pb) in a.quad.0.iter().zip(&b.quad.0) {
                diffs.push(pb.x - pa.x);
                diffs.push(pb.y - pa.y);
            }
            assert_eq!(a.logical, b.logical);
        }
        let corners = diffs.len() / 2;
        assert!(corners >= 256);
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let std = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((1.7..=2.3).contains(&std), "std {std}");
    }

    #[test]
    fn perturbation_stays_in_image() {
        let cfg = GenConfig { span_prob: 0.0, ..GenConfig::default() };
        let t = generate_table(&cfg, 1);
        let p = perturb_quads(&t, 50.0, 3);
        for c in &p.cells {
            for q in c.quad.corners() {
                assert!((0.0..=512.0).contains(&q.x) && (0.0..=512.0).contains(&q.y));
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(GenConfig::default().validate().is_ok());
        assert!(GenConfig { span_prob: 1.5, ..GenConfig::default() }.validate().is_err());
        assert!(GenConfig { rows_range: (5, 2), ..GenConfig::default() }.validate().is_err());
        assert!(GenConfig { max_span: 0, ..GenConfig::default() }.validate().is_err());
        assert!(GenConfig { jitter_sigma: -1.0, ..GenConfig::default() }.validate().is_err());
    }
}
