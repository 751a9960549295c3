//! Logical-coordinate table model.
//!
//! A table is a set of cells, each carrying a pixel-space quadrilateral and a
//! logical location `(start_row, end_row, start_col, end_col)` on a 0-based
//! grid. Everything else in the crate (metrics, losses, markup) is derived from
//! these two coordinates.

mod adjacency;
mod markup;
mod validate;

pub use adjacency::{adjacency_axis, adjacency_relation, adjacency_triplets, Axis, Triplet};
pub use markup::{
    markup_tokens, parse_markup, parse_markup_rows, to_markup, to_markup_with_text, MarkupError,
    MarkupErrorKind, TdSpec,
};
pub use validate::{validate_table, Rule, Violation};

use serde::{Deserialize, Serialize};

/// Cell position on the table grid, inclusive on both ends.
///
/// Serialized as `[start_row, end_row, start_col, end_col]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 4]", into = "[usize; 4]")]
pub struct LogicalLocation {
    pub start_row: usize,
    pub end_row: usize,
    pub start_col: usize,
    pub end_col: usize,
}

impl LogicalLocation {
    pub const fn new(start_row: usize, end_row: usize, start_col: usize, end_col: usize) -> Self {
        Self { start_row, end_row, start_col, end_col }
    }

    /// A 1×1 cell at `(row, col)`.
    pub const fn unit(row: usize, col: usize) -> Self {
        Self::new(row, row, col, col)
    }

    pub fn is_well_formed(&self) -> bool {
        self.start_row <= self.end_row && self.start_col <= self.end_col
    }

    pub fn row_span(&self) -> usize {
        1 + self.end_row - self.start_row
    }

    pub fn col_span(&self) -> usize {
        1 + self.end_col - self.start_col
    }

    pub fn is_spanning(&self) -> bool {
        self.end_row > self.start_row || self.end_col > self.start_col
    }

    pub fn rows_intersect(&self, other: &Self) -> bool {
        self.start_row <= other.end_row && other.start_row <= self.end_row
    }

    pub fn cols_intersect(&self, other: &Self) -> bool {
        self.start_col <= other.end_col && other.start_col <= self.end_col
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        self.rows_intersect(other) && self.cols_intersect(other)
    }

    pub fn to_array(self) -> [usize; 4] {
        [self.start_row, self.end_row, self.start_col, self.end_col]
    }

    /// Grid slots covered by this cell, row-major.
    pub fn slots(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.start_row..=self.end_row)
            .flat_map(move |r| (self.start_col..=self.end_col).map(move |c| (r, c)))
    }
}

impl From<[usize; 4]> for LogicalLocation {
    fn from(a: [usize; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

impl From<LogicalLocation> for [usize; 4] {
    fn from(l: LogicalLocation) -> Self {
        l.to_array()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

impl From<[f64; 2]> for Point {
    fn from(a: [f64; 2]) -> Self {
        Self::new(a[0], a[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Axis-aligned rectangle `(x0, y0, x1, y1)` with `x0 <= x1`, `y0 <= y1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub const fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        (self.x1 - self.x0).max(0.0)
    }

    pub fn height(&self) -> f64 {
        (self.y1 - self.y0).max(0.0)
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn intersection_area(&self, other: &Self) -> f64 {
        let w = self.x1.min(other.x1) - self.x0.max(other.x0);
        let h = self.y1.min(other.y1) - self.y0.max(other.y0);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn iou(&self, other: &Self) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    pub fn contains(&self, other: &Self) -> bool {
        other.x0 >= self.x0 && other.y0 >= self.y0 && other.x1 <= self.x1 && other.y1 <= self.y1
    }

    pub fn to_quad(self) -> Quad {
        Quad([
            Point::new(self.x0, self.y0),
            Point::new(self.x1, self.y0),
            Point::new(self.x1, self.y1),
            Point::new(self.x0, self.y1),
        ])
    }
}

impl From<[f64; 4]> for BBox {
    fn from(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x0, b.y0, b.x1, b.y1]
    }
}

/// Four corners ordered top-left, top-right, bottom-right, bottom-left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Quad(pub [Point; 4]);

impl Quad {
    pub fn corners(&self) -> &[Point; 4] {
        &self.0
    }

    pub fn center(&self) -> Point {
        let (sx, sy) = self.0.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        Point::new(sx / 4.0, sy / 4.0)
    }

    pub fn bbox(&self) -> BBox {
        let mut b = BBox::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.0 {
            b.x0 = b.x0.min(p.x);
            b.y0 = b.y0.min(p.y);
            b.x1 = b.x1.max(p.x);
            b.y1 = b.y1.max(p.y);
        }
        b
    }

    /// Shoelace area (absolute).
    pub fn area(&self) -> f64 {
        let mut s = 0.0;
        for k in 0..4 {
            let a = self.0[k];
            let b = self.0[(k + 1) % 4];
            s += a.x * b.y - b.x * a.y;
        }
        0.5 * s.abs()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|p| p.x.is_finite() && p.y.is_finite())
    }

    /// True when no two non-adjacent edges cross.
    pub fn is_simple(&self) -> bool {
        let p = &self.0;
        !segments_cross(p[0], p[1], p[2], p[3]) && !segments_cross(p[1], p[2], p[3], p[0])
    }
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

// Proper crossing only; touching endpoints and collinear overlap are not counted.
fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: usize,
    pub quad: Quad,
    pub logical: LogicalLocation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

/// A table: cells on an `n_rows × n_cols` grid inside an image of
/// `image_size = [width, height]` pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub image_size: [f64; 2],
    pub n_rows: usize,
    pub n_cols: usize,
    pub cells: Vec<Cell>,
}

impl Table {
    /// Builds a table whose grid is the bounding extent of the given locations.
    /// Cell ids are assigned by position.
    pub fn from_locations(
        image_size: [f64; 2],
        cells: impl IntoIterator<Item = (Quad, LogicalLocation)>,
    ) -> Self {
        let cells: Vec<Cell> = cells
            .into_iter()
            .enumerate()
            .map(|(id, (quad, logical))| Cell { id, quad, logical, text: None })
            .collect();
        let n_rows = cells.iter().map(|c| c.logical.end_row + 1).max().unwrap_or(1);
        let n_cols = cells.iter().map(|c| c.logical.end_col + 1).max().unwrap_or(1);
        Self { image_size, n_rows, n_cols, cells }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn quads(&self) -> Vec<Quad> {
        self.cells.iter().map(|c| c.quad).collect()
    }

    pub fn locations(&self) -> Vec<LogicalLocation> {
        self.cells.iter().map(|c| c.logical).collect()
    }

    pub fn cell(&self, id: usize) -> Option<&Cell> {
        self.cells.iter().find(|c| c.id == id)
    }

    /// Row sets `C_0..C_{n_rows-1}`: the ids of the cells starting in each row,
    /// ordered by start column.
    pub fn rows_partition(&self) -> Vec<Vec<usize>> {
        let k = self
            .cells
            .iter()
            .map(|c| c.logical.start_row + 1)
            .max()
            .unwrap_or(0)
            .max(if self.cells.is_empty() { 0 } else { self.n_rows });
        let mut rows: Vec<Vec<&Cell>> = vec![Vec::new(); k];
        for cell in &self.cells {
            rows[cell.logical.start_row].push(cell);
        }
        rows.into_iter()
            .map(|mut row| {
                row.sort_by_key(|c| (c.logical.start_col, c.id));
                row.into_iter().map(|c| c.id).collect()
            })
            .collect()
    }
}

/// Free-function form of [`Table::rows_partition`].
pub fn rows_partition(t: &Table) -> Vec<Vec<usize>> {
    t.rows_partition()
}
