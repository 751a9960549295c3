//! Scores a damaged prediction against its ground truth with every metric.
//!
//! The prediction shifts the lower rows one column to the right: cell
//! neighbourhoods mostly survive, logical coordinates do not.

use tablelogic::metrics::{evaluate_tables, teds};
use tablelogic::synth::{generate_table, perturb_quads, GenConfig};
use tablelogic::table::to_markup;

fn main() -> tablelogic::Result<()> {
    let cfg = GenConfig { seed: 21, span_prob: 0.0, rows_range: (6, 6), cols_range: (4, 4), ..GenConfig::default() };
    let gt = generate_table(&cfg, 0);

    let mut pred = perturb_quads(&gt, 1.0, 5);
    for cell in &mut pred.cells {
        if cell.logical.start_row >= 2 {
            cell.logical.start_col += 1;
            cell.logical.end_col += 1;
        }
    }
    pred.n_cols += 1;

    let report = evaluate_tables(&pred, &gt, 0.5)?;
    println!("{report}");
    println!("adjacency F1 minus logical accuracy: {:.3}", report.adjacency_f1 - report.logical_accuracy);
    println!("TEDS of ground truth with itself: {}", teds(&to_markup(&gt), &to_markup(&gt), false)?);
    Ok(())
}
