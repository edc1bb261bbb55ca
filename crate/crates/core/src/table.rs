//! Canonical table model with merged-cell spans.
//!
//! A [`Table`] is a logical `n_rows × n_cols` grid tiled by [`AnchorCell`]s.
//! Each anchor sits at the top-left of its span rectangle and carries the
//! content of the whole region. Indices are 1-based everywhere, matching the
//! `(row_id, column_id)` convention used in task answers.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Top-left cell of a (possibly merged) region.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnchorCell {
    pub row: usize,
    pub col: usize,
    #[serde(default = "one")]
    pub row_span: usize,
    #[serde(default = "one")]
    pub col_span: usize,
    #[serde(default)]
    pub content: String,
    #[serde(default)]
    pub is_header: bool,
}

fn one() -> usize {
    1
}

impl AnchorCell {
    /// A 1×1 data cell.
    pub fn new(row: usize, col: usize, content: impl Into<String>) -> Self {
        Self {
            row,
            col,
            row_span: 1,
            col_span: 1,
            content: content.into(),
            is_header: false,
        }
    }

    pub fn header(mut self) -> Self {
        self.is_header = true;
        self
    }

    pub fn span(mut self, row_span: usize, col_span: usize) -> Self {
        self.row_span = row_span;
        self.col_span = col_span;
        self
    }

    pub fn is_merged(&self) -> bool {
        self.row_span > 1 || self.col_span > 1
    }

    /// Bottom-right corner of the span rectangle.
    pub fn bottom_right(&self) -> CellRef {
        CellRef::new(self.row + self.row_span - 1, self.col + self.col_span - 1)
    }

    pub fn covers(&self, row: usize, col: usize) -> bool {
        row >= self.row
            && row < self.row + self.row_span
            && col >= self.col
            && col < self.col + self.col_span
    }
}

/// 1-based grid position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct CellRef {
    pub row_id: usize,
    pub col_id: usize,
}

impl CellRef {
    pub const fn new(row_id: usize, col_id: usize) -> Self {
        Self { row_id, col_id }
    }
}

impl From<(usize, usize)> for CellRef {
    fn from((row_id, col_id): (usize, usize)) -> Self {
        Self { row_id, col_id }
    }
}

impl From<CellRef> for (usize, usize) {
    fn from(c: CellRef) -> Self {
        (c.row_id, c.col_id)
    }
}

impl fmt::Display for CellRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row_id, self.col_id)
    }
}

/// A merged region as its top-left and bottom-right cells.
pub type Region = (CellRef, CellRef);

/// Canonical table. This is also the on-disk interchange form (one JSON
/// object per table).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub n_rows: usize,
    pub n_cols: usize,
    #[serde(default)]
    pub caption: Option<String>,
    pub anchors: Vec<AnchorCell>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub source_id: String,
}

/// First violated table invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("table must have at least one row and one column (got {n_rows}x{n_cols})")]
    EmptyGrid { n_rows: usize, n_cols: usize },
    #[error("anchor at {at} has a zero span")]
    ZeroSpan { at: CellRef },
    #[error("anchor span out of bounds at {at}")]
    OutOfBounds { at: CellRef },
    #[error("overlap at {at}")]
    Overlap { at: CellRef },
    #[error("gap at {at}")]
    Gap { at: CellRef },
}

impl Violation {
    /// Offending grid position, when there is one.
    pub fn position(&self) -> Option<CellRef> {
        match *self {
            Violation::EmptyGrid { .. } => None,
            Violation::ZeroSpan { at }
            | Violation::OutOfBounds { at }
            | Violation::Overlap { at }
            | Violation::Gap { at } => Some(at),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("invalid table: {0}")]
    InvalidTable(#[from] Violation),
}

impl Table {
    /// Builds a table with anchors sorted row-major. Does not validate.
    pub fn new(n_rows: usize, n_cols: usize, mut anchors: Vec<AnchorCell>) -> Self {
        anchors.sort_by_key(|a| (a.row, a.col));
        Self {
            n_rows,
            n_cols,
            caption: None,
            anchors,
            source_id: String::new(),
        }
    }

    /// Spanless table from row-major text; rows must have equal length.
    pub fn from_rows<S: AsRef<str>>(rows: &[Vec<S>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let anchors = rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| {
                row.iter()
                    .enumerate()
                    .map(move |(c, s)| AnchorCell::new(r + 1, c + 1, s.as_ref()))
            })
            .collect();
        Self::new(n_rows, n_cols, anchors)
    }

    pub fn with_caption(mut self, caption: impl Into<String>) -> Self {
        self.caption = Some(caption.into());
        self
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }

    /// Marks every anchor in row 1 as a header.
    pub fn with_header_row(mut self) -> Self {
        for a in self.anchors.iter_mut().filter(|a| a.row == 1) {
            a.is_header = true;
        }
        self
    }

    /// Checks dimensions, spans, bounds, then exactly-once coverage.
    pub fn validate(&self) -> Result<(), Violation> {
        if self.n_rows == 0 || self.n_cols == 0 {
            return Err(Violation::EmptyGrid {
                n_rows: self.n_rows,
                n_cols: self.n_cols,
            });
        }
        let mut covered = vec![false; self.n_rows * self.n_cols];
        for a in &self.anchors {
            let at = CellRef::new(a.row, a.col);
            if a.row_span == 0 || a.col_span == 0 {
                return Err(Violation::ZeroSpan { at });
            }
            if a.row == 0
                || a.col == 0
                || a.row + a.row_span - 1 > self.n_rows
                || a.col + a.col_span - 1 > self.n_cols
            {
                return Err(Violation::OutOfBounds { at });
            }
            for r in a.row..a.row + a.row_span {
                for c in a.col..a.col + a.col_span {
                    let slot = &mut covered[(r - 1) * self.n_cols + (c - 1)];
                    if *slot {
                        return Err(Violation::Overlap {
                            at: CellRef::new(r, c),
                        });
                    }
                    *slot = true;
                }
            }
        }
        if let Some(i) = covered.iter().position(|c| !c) {
            return Err(Violation::Gap {
                at: CellRef::new(i / self.n_cols + 1, i % self.n_cols + 1),
            });
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }

    /// Materializes the position → anchor matrix.
    pub fn expand_grid(&self) -> Result<Grid<'_>, TableError> {
        self.validate()?;
        let mut cells = vec![0; self.n_rows * self.n_cols];
        for (i, a) in self.anchors.iter().enumerate() {
            for r in a.row..a.row + a.row_span {
                for c in a.col..a.col + a.col_span {
                    cells[(r - 1) * self.n_cols + (c - 1)] = i;
                }
            }
        }
        Ok(Grid { table: self, cells })
    }

    /// One `(top_left, bottom_right)` pair per merged anchor, row-major.
    pub fn merged_regions(&self) -> Result<Vec<Region>, TableError> {
        self.validate()?;
        let mut regions: Vec<Region> = self
            .anchors
            .iter()
            .filter(|a| a.is_merged())
            .map(|a| (CellRef::new(a.row, a.col), a.bottom_right()))
            .collect();
        regions.sort();
        Ok(regions)
    }

    pub fn has_spans(&self) -> bool {
        self.anchors.iter().any(AnchorCell::is_merged)
    }

    pub fn anchor_at(&self, row: usize, col: usize) -> Option<&AnchorCell> {
        self.anchors.iter().find(|a| a.row == row && a.col == col)
    }
}

/// Row-major matrix of indices into the parent table's anchors.
#[derive(Debug, Clone)]
pub struct Grid<'a> {
    table: &'a Table,
    cells: Vec<usize>,
}

impl<'a> Grid<'a> {
    pub fn n_rows(&self) -> usize {
        self.table.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.table.n_cols
    }

    /// Covering anchor of a 1-based position. Panics when out of range.
    pub fn anchor(&self, row: usize, col: usize) -> &'a AnchorCell {
        self.get(row, col)
            .unwrap_or_else(|| panic!("position ({row},{col}) outside grid"))
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&'a AnchorCell> {
        if row == 0 || col == 0 || row > self.n_rows() || col > self.n_cols() {
            return None;
        }
        let i = self.cells[(row - 1) * self.n_cols() + (col - 1)];
        Some(&self.table.anchors[i])
    }

    pub fn content(&self, row: usize, col: usize) -> &'a str {
        &self.anchor(row, col).content
    }

    pub fn row_contents(&self, row: usize) -> Vec<&'a str> {
        (1..=self.n_cols()).map(|c| self.content(row, c)).collect()
    }

    pub fn col_contents(&self, col: usize) -> Vec<&'a str> {
        (1..=self.n_rows()).map(|r| self.content(r, col)).collect()
    }

    /// Index into `Table::anchors` at a position.
    pub fn anchor_index(&self, row: usize, col: usize) -> usize {
        self.cells[(row - 1) * self.n_cols() + (col - 1)]
    }
}
