//! Pipe tables. Row 1 is the header; spans cannot be expressed.

use super::{normalize_text, FormatError, Mode, ParseDiagnostics, TableFormat};
use crate::table::{AnchorCell, Table};

fn split_row(line: &str) -> Vec<String> {
    let mut t = line.trim();
    if let Some(s) = t.strip_prefix('|') {
        t = s;
    }
    // a trailing pipe closes the row unless escaped
    if t.ends_with('|') && !t.ends_with("\\|") {
        t = &t[..t.len() - 1];
    }
    let mut cells = Vec::new();
    let mut cur = String::new();
    let mut chars = t.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some(n) if n.is_ascii_punctuation() => cur.push(n),
                Some(n) => {
                    cur.push('\\');
                    cur.push(n);
                }
                None => cur.push('\\'),
            },
            '|' => cells.push(std::mem::take(&mut cur)),
            c => cur.push(c),
        }
    }
    cells.push(cur);
    cells.iter().map(|c| normalize_text(c)).collect()
}

fn is_separator(line: &str) -> bool {
    let cells = split_row(line);
    !cells.is_empty()
        && cells.iter().all(|c| {
            let c = c.trim();
            let core = c.strip_prefix(':').unwrap_or(c);
            let core = core.strip_suffix(':').unwrap_or(core);
            !core.is_empty() && core.chars().all(|ch| ch == '-')
        })
}

pub(crate) fn parse(src: &str, mode: Mode, diags: &mut ParseDiagnostics) -> Result<Table, FormatError> {
    let mut offset = 0;
    let mut lines: Vec<(usize, &str)> = Vec::new();
    for line in src.split('\n') {
        lines.push((offset, line.trim_end_matches('\r')));
        offset += line.len() + 1;
    }
    let Some(first) = lines.iter().position(|(_, l)| l.contains('|')) else {
        return Err(FormatError::parse(src, 0, "no pipe table found"));
    };
    let len = lines[first..].iter().take_while(|(_, l)| l.contains('|')).count();
    let block = &lines[first..first + len];
    let outside = lines[..first]
        .iter()
        .chain(&lines[first + len..])
        .find(|(_, l)| !l.trim().is_empty());
    if let Some((off, _)) = outside {
        diags.warn(src, *off, "text outside the table ignored");
    }

    let (header_off, header_line) = block[0];
    let mut rows: Vec<(usize, Vec<String>)> = vec![(header_off, split_row(header_line))];
    let body = match block.get(1) {
        Some((_, l)) if is_separator(l) => {
            let sep_width = split_row(l).len();
            if sep_width != rows[0].1.len() {
                diags.warn(src, block[1].0, "separator width differs from header width");
            }
            &block[2..]
        }
        _ if mode == Mode::Strict => {
            let off = block.get(1).map_or(src.len(), |(o, _)| *o);
            return Err(FormatError::parse(src, off, "missing header separator line"));
        }
        _ => {
            diags.warn(src, header_off, "missing header separator line");
            &block[1..]
        }
    };
    rows.extend(body.iter().map(|(o, l)| (*o, split_row(l))));

    let n_cols = match mode {
        Mode::Strict => rows[0].1.len(),
        Mode::Lenient => rows.iter().map(|(_, r)| r.len()).max().unwrap_or(0),
    };
    let mut anchors = Vec::with_capacity(rows.len() * n_cols);
    for (r, (off, mut cells)) in rows.into_iter().enumerate() {
        if cells.len() > n_cols {
            return Err(FormatError::parse(
                src,
                off,
                format!("row {} has {} cells, expected {n_cols}", r + 1, cells.len()),
            ));
        }
        if cells.len() < n_cols {
            diags.warn(src, off, format!("row {} padded with {} empty cell(s)", r + 1, n_cols - cells.len()));
            cells.resize(n_cols, String::new());
        }
        for (c, content) in cells.into_iter().enumerate() {
            let mut a = AnchorCell::new(r + 1, c + 1, content);
            a.is_header = r == 0;
            anchors.push(a);
        }
    }
    let n_rows = anchors.last().map_or(0, |a| a.row);
    Ok(Table::new(n_rows, n_cols, anchors))
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('|', "\\|")
}

fn line(cells: impl Iterator<Item = String>) -> String {
    format!("| {} |", cells.collect::<Vec<_>>().join(" | "))
}

pub(crate) fn serialize(table: &Table) -> Result<String, FormatError> {
    if let Some(a) = table.anchors.iter().find(|a| a.is_merged()) {
        return Err(FormatError::UnrepresentableInFormat {
            format: TableFormat::Markdown,
            reason: format!("merged cell at ({},{})", a.row, a.col),
        });
    }
    let mut lines = Vec::with_capacity(table.n_rows + 1);
    for (r, row) in table.anchors.chunks(table.n_cols).enumerate() {
        lines.push(line(row.iter().map(|a| escape(&a.content))));
        if r == 0 {
            lines.push(line((0..table.n_cols).map(|_| "---".to_string())));
        }
    }
    Ok(lines.join("\n"))
}
