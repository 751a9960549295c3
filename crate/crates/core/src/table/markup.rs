//! `<tr>`/`<td rowspan colspan>` markup: emission from logical locations and
//! the grid-filling inverse.

use std::collections::HashSet;
use std::fmt::Write as _;

use thiserror::Error;

use super::{LogicalLocation, Table};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("markup error at byte {offset}: {kind}")]
pub struct MarkupError {
    pub offset: usize,
    pub kind: MarkupErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarkupErrorKind {
    #[error("expected {0}")]
    Expected(&'static str),
    #[error("unexpected end of input")]
    UnexpectedEof,
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("invalid attribute value `{0}`")]
    InvalidValue(String),
    #[error("rowspan < 1")]
    RowspanZero,
    #[error("colspan < 1")]
    ColspanZero,
    #[error("cell footprint overlaps an earlier cell at row {row}, col {col}")]
    Overlap { row: usize, col: usize },
}

/// One parsed `<td>` element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TdSpec {
    pub rowspan: usize,
    pub colspan: usize,
    pub text: String,
    /// Byte offset of the opening `<td`.
    pub offset: usize,
}

/// Emits structure-only markup: one `<tr>` per row set, one `<td>` per cell.
pub fn to_markup(t: &Table) -> String {
    emit(t, false)
}

/// Like [`to_markup`] but places each cell's text between its td tags.
pub fn to_markup_with_text(t: &Table) -> String {
    emit(t, true)
}

fn emit(t: &Table, with_text: bool) -> String {
    let mut out = String::new();
    if t.cells.is_empty() {
        return out;
    }
    let by_id: std::collections::HashMap<usize, &super::Cell> =
        t.cells.iter().map(|c| (c.id, c)).collect();
    for row in t.rows_partition() {
        out.push_str("<tr>");
        for id in row {
            let cell = by_id[&id];
            let l = cell.logical;
            write!(out, "<td rowspan=\"{}\" colspan=\"{}\">", l.row_span(), l.col_span()).unwrap();
            if with_text {
                if let Some(text) = &cell.text {
                    escape_into(&mut out, text);
                }
            }
            out.push_str("</td>");
        }
        out.push_str("</tr>");
    }
    out
}

fn escape_into(out: &mut String, text: &str) {
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            c => out.push(c),
        }
    }
}

fn unescape(text: &str) -> String {
    text.replace("&lt;", "<").replace("&gt;", ">").replace("&amp;", "&")
}

/// Splits markup into BLEU tokens: every tag is one token, text runs are
/// split on whitespace.
pub fn markup_tokens(s: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut rest = s;
    while !rest.is_empty() {
        if let Some(stripped) = rest.strip_prefix('<') {
            let end = stripped.find('>').map(|e| e + 2).unwrap_or(rest.len());
            tokens.push(rest[..end].to_string());
            rest = &rest[end..];
        } else {
            let end = rest.find('<').unwrap_or(rest.len());
            tokens.extend(rest[..end].split_whitespace().map(str::to_string));
            rest = &rest[end..];
        }
    }
    tokens
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, kind: MarkupErrorKind) -> MarkupError {
        MarkupError { offset: self.pos, kind }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, lit: &str) -> bool {
        if self.rest().starts_with(lit) {
            self.pos += lit.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, lit: &'static str) -> Result<(), MarkupError> {
        if self.eat(lit) {
            Ok(())
        } else if self.rest().is_empty() {
            Err(self.err(MarkupErrorKind::UnexpectedEof))
        } else {
            Err(self.err(MarkupErrorKind::Expected(lit)))
        }
    }

    fn ident(&mut self) -> &'a str {
        let rest = self.rest();
        let len = rest.find(|c: char| !c.is_ascii_alphanumeric()).unwrap_or(rest.len());
        self.pos += len;
        &rest[..len]
    }

    fn attr_value(&mut self) -> Result<&'a str, MarkupError> {
        let rest = self.rest();
        if let Some(q @ ('"' | '\'')) = rest.chars().next() {
            let body = &rest[1..];
            let end = body.find(q).ok_or_else(|| self.err(MarkupErrorKind::UnexpectedEof))?;
            self.pos += end + 2;
            Ok(&body[..end])
        } else {
            let len = rest
                .find(|c: char| c.is_whitespace() || c == '>')
                .unwrap_or(rest.len());
            self.pos += len;
            Ok(&rest[..len])
        }
    }
}

/// Syntactic parse into rows of td elements, without grid placement.
pub fn parse_markup_rows(s: &str) -> Result<Vec<Vec<TdSpec>>, MarkupError> {
    let mut cur = Cursor { src: s, pos: 0 };
    let mut rows = Vec::new();
    loop {
        cur.skip_ws();
        if cur.rest().is_empty() {
            break;
        }
        cur.expect("<tr>")?;
        let mut row = Vec::new();
        loop {
            cur.skip_ws();
            if cur.eat("</tr>") {
                break;
            }
            row.push(parse_td(&mut cur)?);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn parse_td(cur: &mut Cursor<'_>) -> Result<TdSpec, MarkupError> {
    let offset = cur.pos;
    cur.expect("<td")?;
    let mut rowspan = 1;
    let mut colspan = 1;
    loop {
        cur.skip_ws();
        if cur.eat(">") {
            break;
        }
        if cur.rest().is_empty() {
            return Err(cur.err(MarkupErrorKind::UnexpectedEof));
        }
        let name_at = cur.pos;
        let name = cur.ident();
        if name.is_empty() {
            return Err(cur.err(MarkupErrorKind::Expected("attribute or `>`")));
        }
        cur.skip_ws();
        cur.expect("=")?;
        cur.skip_ws();
        let value_at = cur.pos;
        let raw = cur.attr_value()?;
        let value: usize = raw.trim().parse().map_err(|_| MarkupError {
            offset: value_at,
            kind: MarkupErrorKind::InvalidValue(raw.to_string()),
        })?;
        match name {
            "rowspan" if value == 0 => {
                return Err(MarkupError { offset: value_at, kind: MarkupErrorKind::RowspanZero })
            }
            "colspan" if value == 0 => {
                return Err(MarkupError { offset: value_at, kind: MarkupErrorKind::ColspanZero })
            }
            "rowspan" => rowspan = value,
            "colspan" => colspan = value,
            other => {
                return Err(MarkupError {
                    offset: name_at,
                    kind: MarkupErrorKind::UnknownAttribute(other.to_string()),
                })
            }
        }
    }
    let text_end = cur
        .rest()
        .find("</td>")
        .ok_or_else(|| cur.err(MarkupErrorKind::Expected("</td>")))?;
    let raw_text = &cur.rest()[..text_end];
    if let Some(bad) = raw_text.find('<') {
        cur.pos += bad;
        return Err(cur.err(MarkupErrorKind::Expected("</td>")));
    }
    let text = unescape(raw_text);
    cur.pos += text_end + "</td>".len();
    Ok(TdSpec { rowspan, colspan, text, offset })
}

/// Parses markup and lays the cells out on a grid: within each row a cell takes
/// the leftmost column not already covered by an earlier cell's span.
/// Locations are returned in document order.
pub fn parse_markup(s: &str) -> Result<Vec<LogicalLocation>, MarkupError> {
    let rows = parse_markup_rows(s)?;
    let mut occupied: HashSet<(usize, usize)> = HashSet::new();
    let mut out = Vec::new();
    for (r, row) in rows.iter().enumerate() {
        let mut c = 0;
        for td in row {
            while occupied.contains(&(r, c)) {
                c += 1;
            }
            let loc = LogicalLocation::new(r, r + td.rowspan - 1, c, c + td.colspan - 1);
            for slot in loc.slots() {
                if !occupied.insert(slot) {
                    return Err(MarkupError {
                        offset: td.offset,
                        kind: MarkupErrorKind::Overlap { row: slot.0, col: slot.1 },
                    });
                }
            }
            out.push(loc);
            c += td.colspan;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{BBox, Cell, Table};

    fn three_cell() -> Table {
        let q = BBox::new(0.0, 0.0, 1.0, 1.0).to_quad();
        Table::from_locations(
            [10.0, 10.0],
            [[0, 0, 0, 1], [1, 1, 0, 0], [1, 1, 1, 1]].map(|a| (q, a.into())),
        )
    }

    const THREE_CELL: &str = "<tr><td rowspan=\"1\" colspan=\"2\"></td></tr><tr><td rowspan=\"1\" colspan=\"1\"></td><td rowspan=\"1\" colspan=\"1\"></td></tr>";

    #[test]
    fn emits_algorithm_markup() {
        assert_eq!(to_markup(&three_cell()), THREE_CELL);
    }

    #[test]
    fn empty_table_is_empty_string() {
        let t = Table { image_size: [1.0, 1.0], n_rows: 1, n_cols: 1, cells: vec![] };
        assert_eq!(to_markup(&t), "");
        assert!(parse_markup("").unwrap().is_empty());
    }

    #[test]
    fn parses_back() {
        assert_eq!(
            parse_markup(THREE_CELL).unwrap(),
            vec![[0, 0, 0, 1].into(), [1, 1, 0, 0].into(), [1, 1, 1, 1].into()]
        );
    }

    #[test]
    fn grid_filling_skips_spanned_slot() {
        let s = "<tr><td rowspan=\"2\" colspan=\"1\"></td><td rowspan=\"1\" colspan=\"1\"></td></tr><tr><td rowspan=\"1\" colspan=\"1\"></td></tr>";
        let locs: Vec<[usize; 4]> = parse_markup(s).unwrap().into_iter().map(Into::into).collect();
        assert_eq!(locs, vec![[0, 1, 0, 0], [0, 0, 1, 1], [1, 1, 1, 1]]);
    }

    #[test]
    fn zero_rowspan_rejected() {
        let err = parse_markup("<tr><td rowspan=\"0\" colspan=\"1\"></td></tr>").unwrap_err();
        assert_eq!(err.kind, MarkupErrorKind::RowspanZero);
        assert_eq!(err.offset, 16);
        assert!(err.to_string().contains("rowspan < 1"));
    }

    #[test]
    fn malformed_reports_offset() {
        let err = parse_markup("<tr><tx></tx></tr>").unwrap_err();
        assert_eq!(err.offset, 4);
        let err = parse_markup("<tr><td rowspan=\"1\"").unwrap_err();
        assert_eq!(err.kind, MarkupErrorKind::UnexpectedEof);
        let err = parse_markup("<tr><td rowspan=\"x\"></td></tr>").unwrap_err();
        assert!(matches!(err.kind, MarkupErrorKind::InvalidValue(_)));
    }

    #[test]
    fn lenient_spacing_and_defaults() {
        let s = "<tr> <td rowspan = 2 ></td>\n<td></td></tr>";
        let locs = parse_markup(s).unwrap();
        assert_eq!(locs[0], [0, 1, 0, 0].into());
        assert_eq!(locs[1], [0, 0, 1, 1].into());
    }

    #[test]
    fn overlapping_footprint_rejected() {
        // Row 1's colspan-2 cell runs into the rowspan hanging down at col 1.
        let s = "<tr><td></td><td rowspan=\"2\"></td></tr><tr><td colspan=\"2\"></td></tr>";
        let err = parse_markup(s).unwrap_err();
        assert!(matches!(err.kind, MarkupErrorKind::Overlap { row: 1, col: 1 }));
        assert_eq!(err.offset, 43);
    }

    #[test]
    fn text_mode_round_trip() {
        let mut t = three_cell();
        t.cells[0].text = Some("a < b & c".into());
        let s = to_markup_with_text(&t);
        assert!(s.contains("a &lt; b &amp; c"));
        let rows = parse_markup_rows(&s).unwrap();
        assert_eq!(rows[0][0].text, "a < b & c");
        let _: &Cell = &t.cells[0];
    }

    #[test]
    fn tokens() {
        let toks = markup_tokens("<tr><td rowspan=\"1\" colspan=\"1\">x y</td></tr>");
        assert_eq!(toks, vec!["<tr>", "<td rowspan=\"1\" colspan=\"1\">", "x", "y", "</td>", "</tr>"]);
    }
}
