//! `tabular` environments with `&` / `\\` delimiters, `\multicolumn` and
//! `\multirow`. The column spec is read past but ignored: alignment is
//! presentation only. Rules (`\hline`, `\cline`, booktabs) are dropped.

use super::{normalize_text, FormatError, Mode, ParseDiagnostics, MAX_SPAN};
use crate::table::{AnchorCell, Table};

const BEGIN: &str = "\\begin{tabular}";
const END: &str = "\\end{tabular}";

/// Offset just past a balanced `{...}` group starting at `i` (after spaces).
fn brace_group(s: &str, i: usize) -> Option<(usize, usize, usize)> {
    let bytes = s.as_bytes();
    let mut j = i;
    while j < bytes.len() && bytes[j].is_ascii_whitespace() {
        j += 1;
    }
    if bytes.get(j) != Some(&b'{') {
        return None;
    }
    let mut depth = 0usize;
    let mut k = j;
    while k < bytes.len() {
        match bytes[k] {
            b'\\' => k += 1,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some((j + 1, k, k + 1));
                }
            }
            _ => {}
        }
        k += 1;
    }
    None
}

fn optional_arg(s: &str, i: usize) -> usize {
    let bytes = s.as_bytes();
    let mut j = i;
    while j < bytes.len() && bytes[j].is_ascii_whitespace() {
        j += 1;
    }
    if bytes.get(j) == Some(&b'[') {
        if let Some(e) = s[j..].find(']') {
            return j + e + 1;
        }
    }
    i
}

/// Splits on a top-level delimiter. `\x` pairs are skipped as a unit, so
/// `\&` never splits and `\\` is seen as one token.
fn split_top(s: &str, is_row: bool) -> Vec<(usize, &str)> {
    let bytes = s.as_bytes();
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    let mut k = 0;
    while k < bytes.len() {
        match bytes[k] {
            b'\\' if is_row && depth == 0 && bytes.get(k + 1) == Some(&b'\\') => {
                parts.push((start, &s[start..k]));
                k = optional_arg(s, k + 2);
                start = k;
                continue;
            }
            b'\\' => k += 1,
            b'{' => depth += 1,
            b'}' => depth -= 1,
            b'&' if !is_row && depth == 0 => {
                parts.push((start, &s[start..k]));
                start = k + 1;
            }
            _ => {}
        }
        k += 1;
    }
    parts.push((start, &s[start..]));
    parts
}

fn strip_comments(s: &str) -> String {
    s.split('\n')
        .map(|line| {
            let bytes = line.as_bytes();
            let mut k = 0;
            while k < bytes.len() {
                match bytes[k] {
                    b'\\' => k += 1,
                    b'%' => return &line[..k],
                    _ => {}
                }
                k += 1;
            }
            line
        })
        .collect::<Vec<_>>()
        .join("\n")
}

const RULES: &[&str] = &["\\hline", "\\toprule", "\\midrule", "\\bottomrule", "\\cline", "\\cmidrule"];

fn strip_rules(s: &str) -> String {
    let mut out = s.to_string();
    for rule in RULES {
        while let Some(p) = find_command(&out, rule) {
            let mut end = p + rule.len();
            if rule.ends_with("cmidrule") {
                let rest = &out[end..];
                if rest.trim_start().starts_with('(') {
                    if let Some(e) = rest.find(')') {
                        end += e + 1;
                    }
                }
            }
            if rule.ends_with("line") || rule.ends_with("cmidrule") {
                if let Some((_, _, after)) = brace_group(&out, end) {
                    if rule != &"\\hline" {
                        end = after;
                    }
                }
            }
            out.replace_range(p..end, " ");
        }
    }
    out
}

// A command occurrence not followed by more letters (`\hline` but not `\hlinex`).
fn find_command(s: &str, cmd: &str) -> Option<usize> {
    let mut from = 0;
    while let Some(p) = s[from..].find(cmd) {
        let at = from + p;
        let after = s[at + cmd.len()..].chars().next();
        let escaped = at > 0 && s.as_bytes()[at - 1] == b'\\';
        if !after.is_some_and(|c| c.is_ascii_alphabetic()) && !escaped {
            return Some(at);
        }
        from = at + cmd.len();
    }
    None
}

const STYLE_COMMANDS: &[&str] = &[
    "textbf", "textit", "emph", "underline", "textrm", "texttt", "textsf", "textsc", "mathrm", "mathbf", "text",
    "textnormal", "small", "footnotesize", "bf", "it",
];

/// LaTeX cell text to plain text.
fn unescape(s: &str, src: &str, offset: usize, diags: &mut ParseDiagnostics) -> String {
    let mut out = String::new();
    let mut chars = s.char_indices().peekable();
    while let Some((_, c)) = chars.next() {
        match c {
            '\\' => match chars.peek().map(|&(_, n)| n) {
                Some(n) if "&%$#_{}".contains(n) => {
                    out.push(n);
                    chars.next();
                }
                Some(' ') => {
                    out.push(' ');
                    chars.next();
                }
                Some(n) if n.is_ascii_alphabetic() => {
                    let mut name = String::new();
                    while let Some(&(_, n)) = chars.peek() {
                        if !n.is_ascii_alphabetic() {
                            break;
                        }
                        name.push(n);
                        chars.next();
                    }
                    let literal = match name.as_str() {
                        "textbackslash" => Some('\\'),
                        "textasciitilde" => Some('~'),
                        "textasciicircum" => Some('^'),
                        _ => None,
                    };
                    match literal {
                        Some(ch) => {
                            out.push(ch);
                            // swallow an empty `{}` terminator
                            let mut look = chars.clone();
                            if look.next().map(|(_, c)| c) == Some('{')
                                && look.next().map(|(_, c)| c) == Some('}')
                            {
                                chars.next();
                                chars.next();
                            }
                        }
                        None if STYLE_COMMANDS.contains(&name.as_str()) => {
                            diags.warn(src, offset, format!("formatting command \\{name} stripped"));
                        }
                        None => {
                            diags.warn(src, offset, format!("unsupported command \\{name} stripped"));
                        }
                    }
                }
                _ => {}
            },
            '{' | '}' | '$' => {}
            '~' => out.push(' '),
            c => out.push(c),
        }
    }
    normalize_text(&out)
}

struct Entry {
    content: String,
    row_span: usize,
    col_span: usize,
    offset: usize,
}

fn parse_entry(
    cell: &str,
    src: &str,
    offset: usize,
    mode: Mode,
    diags: &mut ParseDiagnostics,
) -> Result<Entry, FormatError> {
    let mut body = cell.trim();
    let mut col_span = 1;
    let mut row_span = 1;
    let span_arg = |arg: &str, what: &str, diags: &mut ParseDiagnostics| -> Result<usize, FormatError> {
        match arg.trim().parse::<i64>() {
            Ok(n) if n > MAX_SPAN as i64 && mode == Mode::Strict => {
                Err(FormatError::parse(src, offset, format!("{what} span {n} exceeds {MAX_SPAN}")))
            }
            Ok(n) if n >= 1 => Ok((n as usize).min(MAX_SPAN)),
            Ok(n) if n < 0 => Err(FormatError::unsupported(src, offset, format!("negative {what} span {n}"))),
            _ if mode == Mode::Strict => Err(FormatError::parse(src, offset, format!("invalid {what} span `{arg}`"))),
            _ => {
                diags.warn(src, offset, format!("invalid {what} span `{arg}` treated as 1"));
                Ok(1)
            }
        }
    };
    if let Some(rest) = body.strip_prefix("\\multicolumn") {
        let base = body.len() - rest.len();
        let groups = brace_group(body, base)
            .and_then(|(a, b, e1)| brace_group(body, e1).map(|g| ((a, b), g)))
            .and_then(|((a, b), (_, _, e2))| brace_group(body, e2).map(|g| ((a, b), g)));
        let Some(((na, nb), (ca, cb, end))) = groups else {
            return Err(FormatError::parse(src, offset, "malformed \\multicolumn"));
        };
        if !body[end..].trim().is_empty() {
            diags.warn(src, offset, "text after \\multicolumn ignored");
        }
        col_span = span_arg(&body[na..nb], "column", diags)?;
        body = body[ca..cb].trim();
    }
    if let Some(rest) = body.strip_prefix("\\multirow") {
        let mut i = optional_arg(body, body.len() - rest.len());
        let Some((na, nb, e1)) = brace_group(body, i) else {
            return Err(FormatError::parse(src, offset, "malformed \\multirow"));
        };
        i = optional_arg(body, e1);
        let Some((_, _, e2)) = brace_group(body, i) else {
            return Err(FormatError::parse(src, offset, "malformed \\multirow"));
        };
        i = optional_arg(body, e2);
        let Some((ca, cb, end)) = brace_group(body, i) else {
            return Err(FormatError::parse(src, offset, "malformed \\multirow"));
        };
        if !body[end..].trim().is_empty() {
            diags.warn(src, offset, "text after \\multirow ignored");
        }
        row_span = span_arg(&body[na..nb], "row", diags)?;
        body = body[ca..cb].trim();
    }
    if find_command(body, BEGIN).is_some() || body.contains("\\begin{tabular") {
        return Err(FormatError::unsupported(src, offset, "nested tabular"));
    }
    Ok(Entry {
        content: unescape(body, src, offset, diags),
        row_span,
        col_span,
        offset,
    })
}

pub(crate) fn parse(src: &str, mode: Mode, diags: &mut ParseDiagnostics) -> Result<Table, FormatError> {
    let clean = strip_comments(src);
    let Some(begin) = clean.find(BEGIN) else {
        return Err(FormatError::parse(src, 0, "no tabular environment found"));
    };
    let mut i = optional_arg(&clean, begin + BEGIN.len());
    match brace_group(&clean, i) {
        Some((_, _, end)) => i = end,
        None if mode == Mode::Strict => {
            return Err(FormatError::parse(src, i, "missing column specification"));
        }
        None => diags.warn(src, i, "missing column specification"),
    }
    let body_start = i;
    let body_end = match clean[body_start..].find(END) {
        Some(e) => {
            let trailing = &clean[body_start + e + END.len()..];
            if !trailing.trim().is_empty() {
                diags.warn(src, body_start + e, "content after \\end{tabular} ignored");
            }
            body_start + e
        }
        None if mode == Mode::Strict => {
            return Err(FormatError::parse(src, clean.len(), "missing \\end{tabular}"));
        }
        None => {
            diags.warn(src, clean.len(), "missing \\end{tabular}; closed at end of input");
            clean.len()
        }
    };
    if !clean[..begin].trim().is_empty() {
        diags.warn(src, 0, "text before \\begin{tabular} ignored");
    }
    let body = &clean[body_start..body_end];
    if body.contains(BEGIN) {
        let at = body_start + body.find(BEGIN).unwrap_or(0);
        return Err(FormatError::unsupported(src, at, "nested tabular"));
    }

    let mut raw_rows = split_top(body, true);
    if raw_rows.last().is_some_and(|(_, r)| strip_rules(r).trim().is_empty()) {
        raw_rows.pop();
    }
    let n_rows = raw_rows.len();
    if n_rows == 0 {
        return Err(FormatError::parse(src, body_start, "tabular has no rows"));
    }

    // occupied[r][c] holds true for positions covered by an earlier anchor
    let mut occupied: Vec<Vec<bool>> = vec![Vec::new(); n_rows];
    let taken = |occ: &Vec<Vec<bool>>, r: usize, c: usize| occ[r].get(c).copied().unwrap_or(false);
    let mut anchors = Vec::new();
    for (r, (row_off, row_text)) in raw_rows.into_iter().enumerate() {
        let row_text = strip_rules(row_text);
        let mut c = 0;
        for (cell_off, cell) in split_top(&row_text, false) {
            let offset = body_start + row_off + cell_off.min(row_text.len());
            let mut e = parse_entry(cell, src, offset.min(src.len()), mode, diags)?;
            if taken(&occupied, r, c) {
                // placeholder under a \multirow from above
                if !e.content.is_empty() || e.row_span > 1 {
                    if mode == Mode::Strict {
                        return Err(FormatError::parse(src, e.offset, "content in a cell covered by \\multirow"));
                    }
                    diags.warn(src, e.offset, "content in a cell covered by \\multirow dropped");
                }
                c += e.col_span;
                continue;
            }
            if r + e.row_span > n_rows {
                if mode == Mode::Strict {
                    return Err(FormatError::parse(src, e.offset, "row span extends past the last row"));
                }
                diags.warn(src, e.offset, "row span clipped to the last row");
                e.row_span = n_rows - r;
            }
            let clash = |rs: usize, cs: usize, occ: &Vec<Vec<bool>>| {
                (r..r + rs).any(|rr| (c..c + cs).any(|cc| taken(occ, rr, cc)))
            };
            if clash(e.row_span, e.col_span, &occupied) {
                if mode == Mode::Strict {
                    return Err(FormatError::parse(src, e.offset, "cell span overlaps another cell"));
                }
                diags.warn(src, e.offset, "overlapping span shrunk");
                while e.col_span > 1 && clash(e.row_span, e.col_span, &occupied) {
                    e.col_span -= 1;
                }
                while e.row_span > 1 && clash(e.row_span, e.col_span, &occupied) {
                    e.row_span -= 1;
                }
            }
            for occ_row in occupied.iter_mut().skip(r).take(e.row_span) {
                if occ_row.len() < c + e.col_span {
                    occ_row.resize(c + e.col_span, false);
                }
                occ_row[c..c + e.col_span].iter_mut().for_each(|s| *s = true);
            }
            anchors.push(AnchorCell::new(r + 1, c + 1, e.content).span(e.row_span, e.col_span));
            c += e.col_span;
        }
    }
    let n_cols = occupied.iter().map(Vec::len).max().unwrap_or(0);
    for r in 0..n_rows {
        let holes: Vec<usize> = (0..n_cols).filter(|&c| !taken(&occupied, r, c)).collect();
        if !holes.is_empty() {
            diags.warn(src, body_start, format!("row {} padded with {} empty cell(s)", r + 1, holes.len()));
        }
        anchors.extend(holes.into_iter().map(|c| AnchorCell::new(r + 1, c + 1, "")));
    }
    if n_cols == 0 {
        return Err(FormatError::parse(src, body_start, "tabular has no cells"));
    }
    Ok(Table::new(n_rows, n_cols, anchors))
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\textbackslash{}"),
            '~' => out.push_str("\\textasciitilde{}"),
            '^' => out.push_str("\\textasciicircum{}"),
            '&' | '%' | '$' | '#' | '_' | '{' | '}' => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
    out
}

/// Canonical tabular: one `c` per column, `\hline` at top and bottom and
/// under a header first row. Rows covered by a `\multirow` from above get an
/// empty placeholder (a `\multicolumn{n}{c}{}` when the region is wide).
pub(crate) fn serialize(table: &Table) -> String {
    let grid = table.expand_grid().expect("validated by caller");
    let mut out = format!("\\begin{{tabular}}{{{}}}\n\\hline\n", "c".repeat(table.n_cols));
    for r in 1..=table.n_rows {
        let mut entries = Vec::new();
        let mut c = 1;
        while c <= table.n_cols {
            let a = grid.anchor(r, c);
            let text = if a.row == r {
                let mut t = escape(&a.content);
                if a.row_span > 1 {
                    t = format!("\\multirow{{{}}}{{*}}{{{t}}}", a.row_span);
                }
                t
            } else {
                String::new()
            };
            entries.push(if a.col_span > 1 {
                format!("\\multicolumn{{{}}}{{c}}{{{text}}}", a.col_span)
            } else {
                text
            });
            c += a.col_span;
        }
        out.push_str(&entries.join(" & "));
        out.push_str(" \\\\\n");
        if r == 1 && table.n_rows > 1 && table.anchors.iter().any(|a| a.row == 1 && a.is_header) {
            out.push_str("\\hline\n");
        }
    }
    out.push_str("\\hline\n\\end{tabular}");
    out
}
