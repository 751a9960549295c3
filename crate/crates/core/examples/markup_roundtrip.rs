//! Converts a table to markup and back, and lists its adjacency relations.

use tablelogic::synth::{generate_table, GenConfig};
use tablelogic::table::{adjacency_triplets, markup_tokens, parse_markup, to_markup, validate_table};

fn main() -> tablelogic::Result<()> {
    let cfg = GenConfig { seed: 3, span_prob: 0.3, rows_range: (3, 4), cols_range: (3, 4), ..GenConfig::default() };
    let table = generate_table(&cfg, 0);
    assert!(validate_table(&table).is_empty());

    let markup = to_markup(&table);
    println!("{markup}");
    println!("{} tokens", markup_tokens(&markup).len());

    let mut expected = table.locations();
    expected.sort_by_key(|l| (l.start_row, l.start_col));
    let parsed = parse_markup(&markup)?;
    println!("round trip exact: {}", parsed == expected);
    for l in &parsed {
        println!("  rows {}..={}  cols {}..={}", l.start_row, l.end_row, l.start_col, l.end_col);
    }

    for t in adjacency_triplets(&table) {
        println!("{} - {} {:?}", t.a, t.b, t.axis);
    }

    match parse_markup("<tr><td rowspan=\"2\"></td></tr></tr>") {
        Ok(_) => println!("unexpectedly parsed"),
        Err(e) => println!("malformed input: {e}"),
    }
    Ok(())
}
