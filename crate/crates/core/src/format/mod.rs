//! HTML, Markdown and LaTeX tabular parsing and serialization.
//!
//! Parsing comes in two modes. [`parse`] is strict: unbalanced structure,
//! rows wider than the header and spans that break tiling are errors.
//! [`parse_lenient`] recovers what it can (pads ragged rows, clips spans,
//! drops trailing junk) and is what [`convert`] uses on model output.
//! Short rows are padded with empty 1×1 cells on the right in both modes.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{AnchorCell, Table, TableError};

pub mod html;
pub mod latex;
pub mod markdown;

/// Markup used for textual tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Html,
    Markdown,
    Latex,
}

impl TableFormat {
    pub const ALL: [TableFormat; 3] = [TableFormat::Html, TableFormat::Markdown, TableFormat::Latex];

    /// Guess from a file extension (`html`/`htm`, `md`/`markdown`, `tex`/`latex`).
    pub fn from_extension(ext: &str) -> Option<Self> {
        match ext.to_ascii_lowercase().as_str() {
            "html" | "htm" => Some(Self::Html),
            "md" | "markdown" => Some(Self::Markdown),
            "tex" | "latex" => Some(Self::Latex),
            _ => None,
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        path.extension().and_then(|e| e.to_str()).and_then(Self::from_extension)
    }

    /// Human-facing name used in requests.
    pub fn display_name(self) -> &'static str {
        match self {
            Self::Html => "HTML",
            Self::Markdown => "Markdown",
            Self::Latex => "LaTeX",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Html => "html",
            Self::Markdown => "markdown",
            Self::Latex => "latex",
        }
    }
}

impl fmt::Display for TableFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "html" => Ok(Self::Html),
            "markdown" | "md" => Ok(Self::Markdown),
            "latex" | "tex" => Ok(Self::Latex),
            other => Err(format!("unknown table format `{other}`")),
        }
    }
}

/// 1-based line and column of a byte offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl Location {
    pub fn of(src: &str, offset: usize) -> Self {
        let offset = offset.min(src.len());
        let before = &src[..floor_char_boundary(src, offset)];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        Self { line, column }
    }
}

fn floor_char_boundary(s: &str, mut i: usize) -> usize {
    while i > 0 && !s.is_char_boundary(i) {
        i -= 1;
    }
    i
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    pub warnings: Vec<(Location, String)>,
    /// True when a table was produced.
    pub recovered: bool,
}

impl ParseDiagnostics {
    pub(crate) fn warn(&mut self, src: &str, offset: usize, msg: impl Into<String>) {
        self.warnings.push((Location::of(src, offset), msg.into()));
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("empty input")]
    EmptyInput,
    #[error("parse error at {location}: {reason}")]
    Parse { location: Location, reason: String },
    #[error("unsupported construct at {location}: {construct}")]
    UnsupportedConstruct { location: Location, construct: String },
    #[error("table cannot be written as {format}: {reason}")]
    UnrepresentableInFormat { format: TableFormat, reason: String },
    #[error(transparent)]
    Table(#[from] TableError),
}

impl FormatError {
    pub(crate) fn parse(src: &str, offset: usize, reason: impl Into<String>) -> Self {
        Self::Parse {
            location: Location::of(src, offset),
            reason: reason.into(),
        }
    }

    pub(crate) fn unsupported(src: &str, offset: usize, construct: impl Into<String>) -> Self {
        Self::UnsupportedConstruct {
            location: Location::of(src, offset),
            construct: construct.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mode {
    Strict,
    Lenient,
}

/// Strict parse into a validated table.
pub fn parse(src: &str, fmt: TableFormat) -> Result<(Table, ParseDiagnostics), FormatError> {
    if src.trim().is_empty() {
        return Err(FormatError::EmptyInput);
    }
    let mut diags = ParseDiagnostics::default();
    let table = parse_with(src, fmt, Mode::Strict, &mut diags)?;
    debug_assert!(table.is_valid());
    diags.recovered = true;
    Ok((table, diags))
}

/// Best-effort parse. Never fails; `None` comes with `recovered == false`
/// and a warning describing why.
pub fn parse_lenient(src: &str, fmt: TableFormat) -> (Option<Table>, ParseDiagnostics) {
    let mut diags = ParseDiagnostics::default();
    if src.trim().is_empty() {
        diags.warn(src, 0, "empty input");
        return (None, diags);
    }
    match parse_with(src, fmt, Mode::Lenient, &mut diags) {
        Ok(table) if table.is_valid() => {
            diags.recovered = true;
            (Some(table), diags)
        }
        Ok(table) => {
            let reason = table.validate().unwrap_err();
            diags.warn(src, 0, format!("unrecoverable table: {reason}"));
            (None, diags)
        }
        Err(e) => {
            diags.warn(src, 0, e.to_string());
            (None, diags)
        }
    }
}

fn parse_with(
    src: &str,
    fmt: TableFormat,
    mode: Mode,
    diags: &mut ParseDiagnostics,
) -> Result<Table, FormatError> {
    match fmt {
        TableFormat::Html => html::parse(src, mode, diags),
        TableFormat::Markdown => markdown::parse(src, mode, diags),
        TableFormat::Latex => latex::parse(src, mode, diags),
    }
}

/// Canonical text form of a table.
pub fn serialize(table: &Table, fmt: TableFormat) -> Result<String, FormatError> {
    table.validate().map_err(TableError::from)?;
    match fmt {
        TableFormat::Html => Ok(html::serialize(table)),
        TableFormat::Markdown => markdown::serialize(table),
        TableFormat::Latex => Ok(latex::serialize(table)),
    }
}

/// Empty-table sentinel returned by [`convert`] on unrecoverable input.
pub const EMPTY_HTML_TABLE: &str = "<table></table>";

/// Tolerant conversion of (possibly malformed) table text to canonical HTML.
pub fn convert(src: &str, from: TableFormat) -> (String, ParseDiagnostics) {
    let (table, diags) = parse_lenient(src, from);
    match table {
        Some(t) => (html::serialize(&t), diags),
        None => (EMPTY_HTML_TABLE.to_string(), diags),
    }
}

/// Trims and collapses internal whitespace runs to single spaces.
pub fn normalize_text(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Largest accepted column span; guards allocation on hostile input.
pub const MAX_SPAN: usize = 1000;

/// One cell as written in the source, before placement on the grid.
#[derive(Debug, Clone)]
pub(crate) struct RawCell {
    pub content: String,
    pub row_span: usize,
    pub col_span: usize,
    pub is_header: bool,
    pub offset: usize,
}

/// HTML-style slot filling: each cell takes the leftmost free slot of its
/// row, spans reserve slots in later rows, and leftover holes are padded.
pub(crate) fn place_rows(
    src: &str,
    rows: Vec<Vec<RawCell>>,
    mode: Mode,
    diags: &mut ParseDiagnostics,
) -> Result<Vec<AnchorCell>, FormatError> {
    let n_rows = rows.len();
    let mut occupied: Vec<Vec<bool>> = vec![Vec::new(); n_rows];
    let is_taken = |occ: &Vec<Vec<bool>>, r: usize, c: usize| occ[r].get(c).copied().unwrap_or(false);
    let mut anchors = Vec::new();
    for (r, row) in rows.into_iter().enumerate() {
        let mut c = 0;
        for cell in row {
            while is_taken(&occupied, r, c) {
                c += 1;
            }
            let mut rs = cell.row_span.max(1);
            let mut cs = cell.col_span.max(1);
            if cs > MAX_SPAN {
                if mode == Mode::Strict {
                    return Err(FormatError::parse(src, cell.offset, format!("column span {cs} exceeds {MAX_SPAN}")));
                }
                diags.warn(src, cell.offset, format!("column span {cs} clipped to {MAX_SPAN}"));
                cs = MAX_SPAN;
            }
            if r + rs > n_rows {
                if mode == Mode::Strict {
                    return Err(FormatError::parse(src, cell.offset, "row span extends past the last row"));
                }
                diags.warn(src, cell.offset, "row span clipped to the last row");
                rs = n_rows - r;
            }
            let clash = |rs: usize, cs: usize, occ: &Vec<Vec<bool>>| {
                (r..r + rs).any(|rr| (c..c + cs).any(|cc| is_taken(occ, rr, cc)))
            };
            if clash(rs, cs, &occupied) {
                if mode == Mode::Strict {
                    return Err(FormatError::parse(src, cell.offset, "cell span overlaps another cell"));
                }
                diags.warn(src, cell.offset, "overlapping span shrunk");
                while cs > 1 && clash(rs, cs, &occupied) {
                    cs -= 1;
                }
                while rs > 1 && clash(rs, cs, &occupied) {
                    rs -= 1;
                }
            }
            for occ_row in occupied.iter_mut().skip(r).take(rs) {
                if occ_row.len() < c + cs {
                    occ_row.resize(c + cs, false);
                }
                for slot in &mut occ_row[c..c + cs] {
                    *slot = true;
                }
            }
            anchors.push(AnchorCell {
                row: r + 1,
                col: c + 1,
                row_span: rs,
                col_span: cs,
                content: cell.content,
                is_header: cell.is_header,
            });
            c += cs;
        }
    }
    let n_cols = occupied.iter().map(Vec::len).max().unwrap_or(0);
    if n_rows == 0 || n_cols == 0 {
        return Err(FormatError::parse(src, src.len(), "table has no cells"));
    }
    for r in 0..n_rows {
        let holes: Vec<usize> = (0..n_cols).filter(|&c| !is_taken(&occupied, r, c)).collect();
        if !holes.is_empty() {
            diags.warn(src, 0, format!("row {} padded with {} empty cell(s)", r + 1, holes.len()));
        }
        for c in holes {
            anchors.push(AnchorCell::new(r + 1, c + 1, ""));
        }
    }
    anchors.sort_by_key(|a| (a.row, a.col));
    Ok(anchors)
}
