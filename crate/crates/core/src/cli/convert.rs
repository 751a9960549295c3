use crate::error::Result;
use crate::table::{parse_markup, parse_markup_rows, BBox, Table};

/// Side length in pixels of one grid slot when geometry has to be invented
/// for markup input.
pub const SLOT_PX: f64 = 32.0;

/// Builds a table from markup, laying cells out on a regular grid of
/// [`SLOT_PX`] slots. Cell text is kept when present.
pub fn markup_to_table(markup: &str) -> Result<Table> {
    let locs = parse_markup(markup)?;
    let texts: Vec<String> = parse_markup_rows(markup)?.into_iter().flatten().map(|td| td.text).collect();
    let mut t = Table::from_locations(
        [0.0, 0.0],
        locs.iter().map(|l| {
            let b = BBox::new(
                l.start_col as f64 * SLOT_PX,
                l.start_row as f64 * SLOT_PX,
                (l.end_col + 1) as f64 * SLOT_PX,
                (l.end_row + 1) as f64 * SLOT_PX,
            );
            (b.to_quad(), *l)
        }),
    );
    for (cell, text) in t.cells.iter_mut().zip(texts) {
        if !text.is_empty() {
            cell.text = Some(text);
        }
    }
    if t.cells.is_empty() {
        t.n_rows = 0;
        t.n_cols = 0;
    }
    t.image_size = [t.n_cols.max(1) as f64 * SLOT_PX, t.n_rows.max(1) as f64 * SLOT_PX];
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::to_markup;

    #[test]
    fn markup_round_trip() {
        let m = "<tr><td rowspan=\"2\" colspan=\"1\"></td><td rowspan=\"1\" colspan=\"1\"></td></tr><tr><td rowspan=\"1\" colspan=\"1\"></td></tr>";
        let t = markup_to_table(m).unwrap();
        assert_eq!(to_markup(&t), m);
        assert_eq!(t.image_size, [64.0, 64.0]);
    }
}
