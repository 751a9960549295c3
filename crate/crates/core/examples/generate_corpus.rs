//! Writes a small synthetic corpus to NDJSON and prints a summary of what
//! the generator produced.
//!
//! ```text
//! cargo run --example generate_corpus -- [count] [seed] [path]
//! ```

use tablelogic::synth::{generate_record, read_dataset, write_dataset, GenConfig};
use tablelogic::table::validate_table;

fn main() -> tablelogic::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let count: u64 = args.first().and_then(|a| a.parse().ok()).unwrap_or(100);
    let seed: u64 = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(7);
    let path = args.get(2).cloned().unwrap_or_else(|| std::env::temp_dir().join("corpus.ndjson").display().to_string());

    let cfg = GenConfig { seed, span_prob: 0.2, ..GenConfig::default() };
    cfg.validate()?;
    let records: Vec<_> = (0..count).map(|i| generate_record(&cfg, i, 128)).collect();
    write_dataset(&path, &records)?;

    let back = read_dataset(&path)?;
    let cells: usize = back.iter().map(|r| r.table.len()).sum();
    let spanning: usize = back.iter().flat_map(|r| &r.table.cells).filter(|c| c.logical.is_spanning()).count();
    let words: usize = back.iter().map(|r| r.words.as_ref().map_or(0, Vec::len)).sum();
    let pairs: usize = back.iter().map(|r| r.ldp_pairs.as_ref().map_or(0, Vec::len)).sum();
    let invalid = back.iter().filter(|r| !validate_table(&r.table).is_empty()).count();

    println!("{} tables in {path}", back.len());
    println!("cells {cells} ({spanning} spanning), words {words}, distance pairs {pairs}, invalid {invalid}");
    if let Some(r) = back.first() {
        println!("first table: {}x{} grid, {} cells", r.table.n_rows, r.table.n_cols, r.table.len());
    }
    Ok(())
}
