//! HTML table subset: `table`, `caption`, `thead`, `tbody`, `tfoot`, `tr`,
//! `td`, `th` with `colspan`/`rowspan`. Anything else is stripped with a
//! warning; nested tables are unsupported.

use super::{normalize_text, place_rows, FormatError, Mode, ParseDiagnostics, RawCell};
use crate::table::Table;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Token {
    Open {
        name: String,
        attrs: Vec<(String, String)>,
        offset: usize,
    },
    Close {
        name: String,
        offset: usize,
    },
    Text {
        text: String,
        offset: usize,
    },
}

/// Lossy tag/text tokenizer. Comments, doctypes and processing instructions
/// are dropped; a `<` that does not start a tag is text.
pub(crate) fn tokenize(src: &str) -> Vec<Token> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut text_start = 0;
    let flush = |out: &mut Vec<Token>, from: usize, to: usize| {
        if to > from {
            out.push(Token::Text {
                text: decode_entities(&src[from..to]),
                offset: from,
            });
        }
    };
    while i < bytes.len() {
        if bytes[i] != b'<' {
            i += 1;
            continue;
        }
        let rest = &src[i..];
        if rest.starts_with("<!--") {
            flush(&mut out, text_start, i);
            let end = rest.find("-->").map_or(src.len(), |e| i + e + 3);
            i = end;
            text_start = i;
            continue;
        }
        if rest.starts_with("<!") || rest.starts_with("<?") {
            flush(&mut out, text_start, i);
            let end = rest.find('>').map_or(src.len(), |e| i + e + 1);
            i = end;
            text_start = i;
            continue;
        }
        let closing = rest.starts_with("</");
        let name_start = i + if closing { 2 } else { 1 };
        if !bytes.get(name_start).is_some_and(u8::is_ascii_alphabetic) {
            i += 1;
            continue;
        }
        let Some(end) = find_tag_end(src, name_start) else {
            // unterminated tag: the rest is text
            break;
        };
        flush(&mut out, text_start, i);
        let inner = &src[name_start..end];
        let name_len = inner
            .find(|c: char| c.is_whitespace() || c == '/' || c == '>')
            .unwrap_or(inner.len());
        let name = inner[..name_len].to_ascii_lowercase();
        if closing {
            out.push(Token::Close { name, offset: i });
        } else {
            let attrs = parse_attrs(&inner[name_len..]);
            out.push(Token::Open {
                name,
                attrs,
                offset: i,
            });
        }
        i = end + 1;
        text_start = i;
    }
    flush(&mut out, text_start, src.len());
    out
}

// Position of the `>` closing a tag, skipping quoted attribute values.
fn find_tag_end(src: &str, from: usize) -> Option<usize> {
    let mut quote: Option<u8> = None;
    for (k, &b) in src.as_bytes()[from..].iter().enumerate() {
        match quote {
            Some(q) if b == q => quote = None,
            Some(_) => {}
            None if b == b'"' || b == b'\'' => quote = Some(b),
            None if b == b'>' => return Some(from + k),
            None if b == b'<' => return None,
            None => {}
        }
    }
    None
}

fn parse_attrs(s: &str) -> Vec<(String, String)> {
    let mut attrs = Vec::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        while i < chars.len() && (chars[i].is_whitespace() || chars[i] == '/') {
            i += 1;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() && chars[i] != '=' && chars[i] != '/' {
            i += 1;
        }
        if start == i {
            i += 1;
            continue;
        }
        let name: String = chars[start..i].iter().collect::<String>().to_ascii_lowercase();
        while i < chars.len() && chars[i].is_whitespace() {
            i += 1;
        }
        let mut value = String::new();
        if i < chars.len() && chars[i] == '=' {
            i += 1;
            while i < chars.len() && chars[i].is_whitespace() {
                i += 1;
            }
            if i < chars.len() && (chars[i] == '"' || chars[i] == '\'') {
                let q = chars[i];
                i += 1;
                while i < chars.len() && chars[i] != q {
                    value.push(chars[i]);
                    i += 1;
                }
                i += 1;
            } else {
                while i < chars.len() && !chars[i].is_whitespace() {
                    value.push(chars[i]);
                    i += 1;
                }
            }
        }
        attrs.push((name, decode_entities(&value)));
    }
    attrs
}

/// Decodes named (`amp lt gt quot apos nbsp`) and numeric entities; unknown
/// entities are left as written.
pub fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(p) = rest.find('&') {
        out.push_str(&rest[..p]);
        rest = &rest[p..];
        let semi = rest.char_indices().take(12).find(|&(_, c)| c == ';').map(|(i, _)| i);
        let decoded = semi.and_then(|e| {
            let name = &rest[1..e];
            let ch = match name {
                "amp" => Some('&'),
                "lt" => Some('<'),
                "gt" => Some('>'),
                "quot" => Some('"'),
                "apos" => Some('\''),
                "nbsp" => Some('\u{a0}'),
                _ if name.starts_with("#x") || name.starts_with("#X") => {
                    u32::from_str_radix(&name[2..], 16).ok().and_then(char::from_u32)
                }
                _ if name.starts_with('#') => name[1..].parse().ok().and_then(char::from_u32),
                _ => None,
            };
            ch.map(|c| (c, e + 1))
        });
        match decoded {
            Some((c, len)) => {
                out.push(c);
                rest = &rest[len..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

pub fn encode_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            c => out.push(c),
        }
    }
    out
}

fn span_attr(
    src: &str,
    attrs: &[(String, String)],
    key: &str,
    offset: usize,
    mode: Mode,
    diags: &mut ParseDiagnostics,
) -> Result<usize, FormatError> {
    let Some((_, v)) = attrs.iter().find(|(k, _)| k == key) else {
        return Ok(1);
    };
    match v.trim().parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ if mode == Mode::Strict => {
            Err(FormatError::parse(src, offset, format!("invalid {key} value `{v}`")))
        }
        _ => {
            diags.warn(src, offset, format!("invalid {key} value `{v}` treated as 1"));
            Ok(1)
        }
    }
}

struct OpenCell {
    text: String,
    row_span: usize,
    col_span: usize,
    is_header: bool,
    offset: usize,
}

impl OpenCell {
    fn finish(self) -> RawCell {
        RawCell {
            content: normalize_text(&self.text),
            row_span: self.row_span,
            col_span: self.col_span,
            is_header: self.is_header,
            offset: self.offset,
        }
    }
}

pub(crate) fn parse(src: &str, mode: Mode, diags: &mut ParseDiagnostics) -> Result<Table, FormatError> {
    let tokens = tokenize(src);
    let Some(start) = tokens
        .iter()
        .position(|t| matches!(t, Token::Open { name, .. } if name == "table"))
    else {
        return Err(FormatError::parse(src, 0, "no <table> element found"));
    };
    if let Token::Open { attrs, offset, .. } = &tokens[start] {
        if !attrs.is_empty() {
            diags.warn(src, *offset, "attributes on <table> stripped");
        }
    }

    let mut rows: Vec<Vec<RawCell>> = Vec::new();
    let mut row: Option<Vec<RawCell>> = None;
    let mut cell: Option<OpenCell> = None;
    let mut caption: Option<String> = None;
    let mut in_caption = false;
    let mut closed_at: Option<usize> = None;
    let mut skip_depth = 0usize;

    fn close_cell(cell: &mut Option<OpenCell>, row: &mut Option<Vec<RawCell>>) {
        if let Some(c) = cell.take() {
            row.get_or_insert_with(Vec::new).push(c.finish());
        }
    }
    fn close_row(cell: &mut Option<OpenCell>, row: &mut Option<Vec<RawCell>>, rows: &mut Vec<Vec<RawCell>>) {
        close_cell(cell, row);
        if let Some(r) = row.take() {
            rows.push(r);
        }
    }

    let mut k = start + 1;
    while k < tokens.len() {
        let tok = &tokens[k];
        k += 1;
        if skip_depth > 0 {
            match tok {
                Token::Open { name, .. } if name == "table" => skip_depth += 1,
                Token::Close { name, .. } if name == "table" => skip_depth -= 1,
                _ => {}
            }
            continue;
        }
        match tok {
            Token::Text { text, offset } => {
                if in_caption {
                    caption.get_or_insert_with(String::new).push_str(text);
                } else if let Some(c) = cell.as_mut() {
                    c.text.push_str(text);
                } else if !text.trim().is_empty() {
                    diags.warn(src, *offset, "stray text outside cells ignored");
                }
            }
            Token::Open { name, attrs, offset } => match name.as_str() {
                "table" => {
                    if mode == Mode::Strict {
                        return Err(FormatError::unsupported(src, *offset, "nested <table>"));
                    }
                    diags.warn(src, *offset, "nested <table> dropped");
                    skip_depth = 1;
                }
                "caption" => {
                    in_caption = true;
                    caption.get_or_insert_with(String::new);
                }
                "thead" | "tbody" | "tfoot" => {}
                "tr" => {
                    close_row(&mut cell, &mut row, &mut rows);
                    row = Some(Vec::new());
                }
                "td" | "th" => {
                    close_cell(&mut cell, &mut row);
                    if row.is_none() {
                        if mode == Mode::Strict {
                            return Err(FormatError::parse(src, *offset, format!("<{name}> outside <tr>")));
                        }
                        diags.warn(src, *offset, format!("<{name}> outside <tr>; row opened"));
                        row = Some(Vec::new());
                    }
                    for (key, _) in attrs.iter().filter(|(k, _)| k != "rowspan" && k != "colspan") {
                        diags.warn(src, *offset, format!("attribute `{key}` stripped"));
                    }
                    let row_span = span_attr(src, attrs, "rowspan", *offset, mode, diags)?;
                    let col_span = span_attr(src, attrs, "colspan", *offset, mode, diags)?;
                    cell = Some(OpenCell {
                        text: String::new(),
                        row_span,
                        col_span,
                        is_header: name == "th",
                        offset: *offset,
                    });
                }
                "br" => {
                    if let Some(c) = cell.as_mut() {
                        c.text.push(' ');
                    }
                }
                other => diags.warn(src, *offset, format!("tag <{other}> stripped")),
            },
            Token::Close { name, offset } => match name.as_str() {
                "table" => {
                    close_row(&mut cell, &mut row, &mut rows);
                    closed_at = Some(*offset);
                    break;
                }
                "caption" => in_caption = false,
                "thead" | "tbody" | "tfoot" => close_row(&mut cell, &mut row, &mut rows),
                "tr" => close_row(&mut cell, &mut row, &mut rows),
                "td" | "th" => {
                    if cell.is_none() {
                        diags.warn(src, *offset, format!("unmatched </{name}>"));
                    }
                    close_cell(&mut cell, &mut row);
                }
                _ => {}
            },
        }
    }

    match closed_at {
        None if mode == Mode::Strict => {
            return Err(FormatError::parse(src, src.len(), "unclosed <table>"));
        }
        None => {
            diags.warn(src, src.len(), "unclosed <table>; closed at end of input");
            close_row(&mut cell, &mut row, &mut rows);
        }
        Some(_) => {
            let trailing = tokens[k..].iter().any(|t| match t {
                Token::Text { text, .. } => !text.trim().is_empty(),
                _ => true,
            });
            if trailing {
                diags.warn(src, src.len(), "content after </table> ignored");
            }
        }
    }

    let anchors = place_rows(src, rows, mode, diags)?;
    let n_rows = anchors.iter().map(|a| a.row + a.row_span - 1).max().unwrap_or(0);
    let n_cols = anchors.iter().map(|a| a.col + a.col_span - 1).max().unwrap_or(0);
    let mut table = Table::new(n_rows, n_cols, anchors);
    table.caption = caption.map(|c| normalize_text(&c));
    Ok(table)
}

/// Canonical single-line HTML: `rowspan` before `colspan`, spans only when
/// greater than 1, `th` for header cells, no `thead`/`tbody`.
pub(crate) fn serialize(table: &Table) -> String {
    let mut out = String::from("<table>");
    if let Some(c) = &table.caption {
        out.push_str("<caption>");
        out.push_str(&encode_text(c));
        out.push_str("</caption>");
    }
    let mut anchors = table.anchors.iter().peekable();
    for r in 1..=table.n_rows {
        out.push_str("<tr>");
        while let Some(a) = anchors.next_if(|a| a.row == r) {
            let tag = if a.is_header { "th" } else { "td" };
            out.push('<');
            out.push_str(tag);
            if a.row_span > 1 {
                out.push_str(&format!(" rowspan=\"{}\"", a.row_span));
            }
            if a.col_span > 1 {
                out.push_str(&format!(" colspan=\"{}\"", a.col_span));
            }
            out.push('>');
            out.push_str(&encode_text(&a.content));
            out.push_str("</");
            out.push_str(tag);
            out.push('>');
        }
        out.push_str("</tr>");
    }
    out.push_str("</table>");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{parse as parse_fmt, parse_lenient, serialize as ser, TableFormat};
    use crate::table::{AnchorCell, Table};

    fn strict(src: &str) -> Result<Table, FormatError> {
        parse_fmt(src, TableFormat::Html).map(|(t, _)| t)
    }

    #[test]
    fn parses_simple_table() {
        let t = strict("<table><tr><td>a</td><td>b</td></tr></table>").unwrap();
        assert_eq!(t, Table::from_rows(&[vec!["a", "b"]]));
    }

    #[test]
    fn single_cell_canonical_form() {
        let t = Table::from_rows(&[vec!["x"]]);
        assert_eq!(ser(&t, TableFormat::Html).unwrap(), "<table><tr><td>x</td></tr></table>");
    }

    #[test]
    fn spans_headers_and_sections() {
        let src = r#"
            <table class="x">
              <caption> Sales  2020 </caption>
              <thead><tr><th rowspan=2>Region</th><th colspan="2">Q</th></tr>
                     <tr><th>1</th><th>2</th></tr></thead>
              <tbody><tr><td>N &amp; S</td><td>3</td><td>4</td></tr></tbody>
            </table>"#;
        let (t, diags) = parse_fmt(src, TableFormat::Html).unwrap();
        assert_eq!(t.n_rows, 3);
        assert_eq!(t.n_cols, 3);
        assert_eq!(t.caption.as_deref(), Some("Sales 2020"));
        assert_eq!(t.anchor_at(1, 1).unwrap(), &AnchorCell::new(1, 1, "Region").span(2, 1).header());
        assert_eq!(t.anchor_at(1, 2).unwrap().col_span, 2);
        assert_eq!(t.anchor_at(2, 2).unwrap().content, "1");
        assert_eq!(t.anchor_at(3, 1).unwrap().content, "N & S");
        assert!(diags.warnings.iter().any(|(_, m)| m.contains("<table>")));
        assert_eq!(
            ser(&t, TableFormat::Html).unwrap(),
            "<table><caption>Sales 2020</caption><tr><th rowspan=\"2\">Region</th><th colspan=\"2\">Q</th></tr>\
             <tr><th>1</th><th>2</th></tr><tr><td>N &amp; S</td><td>3</td><td>4</td></tr></table>"
        );
    }

    #[test]
    fn strips_inline_markup_with_warning() {
        let (t, d) = parse_fmt("<table><tr><td><b>bold</b><br>text</td></tr></table>", TableFormat::Html).unwrap();
        assert_eq!(t.anchors[0].content, "bold text");
        assert!(d.warnings.iter().any(|(_, m)| m.contains("<b>")));
    }

    #[test]
    fn strict_errors() {
        assert!(matches!(strict("<p>nothing</p>"), Err(FormatError::Parse { .. })));
        assert!(matches!(
            strict("<table><tr><td>a</td></tr>"),
            Err(FormatError::Parse { reason, .. }) if reason.contains("unclosed")
        ));
        assert!(matches!(
            strict("<table><tr><td><table><tr><td>x</td></tr></table></td></tr></table>"),
            Err(FormatError::UnsupportedConstruct { .. })
        ));
        assert!(matches!(
            strict("<table><tr><td rowspan=3>a</td></tr></table>"),
            Err(FormatError::Parse { reason, .. }) if reason.contains("row span")
        ));
        // colspan of row 2 runs into the rowspan from row 1
        assert!(matches!(
            strict("<table><tr><td>a</td><td rowspan=2>b</td></tr><tr><td colspan=2>c</td></tr></table>"),
            Err(FormatError::Parse { reason, .. }) if reason.contains("overlap")
        ));
        assert!(matches!(strict("<table></table>"), Err(FormatError::Parse { .. })));
        assert!(matches!(strict("<table><tr><td colspan=x>a</td></tr></table>"), Err(FormatError::Parse { .. })));
    }

    #[test]
    fn pads_short_rows() {
        let (t, d) = parse_fmt("<table><tr><td>a</td><td>b</td></tr><tr><td>c</td></tr></table>", TableFormat::Html).unwrap();
        assert_eq!(t.n_cols, 2);
        assert_eq!(t.anchor_at(2, 2).unwrap().content, "");
        assert!(!d.warnings.is_empty());
    }

    #[test]
    fn lenient_recovers_common_damage() {
        let (t, d) = parse_lenient("junk <table><tr><td>a<td>b<tr><td colspan=5>c", TableFormat::Html);
        let t = t.unwrap();
        assert!(d.recovered);
        assert_eq!((t.n_rows, t.n_cols), (2, 5));
        let (t, _) = parse_lenient("<table><tr><td rowspan=4>a</td></tr></table>", TableFormat::Html);
        assert_eq!(t.unwrap().anchors[0].row_span, 1);
    }

    #[test]
    fn entities() {
        assert_eq!(decode_entities("a &lt;b&gt; &amp;&#65;&#x42; &bogus; &"), "a <b> &AB &bogus; &");
        assert_eq!(encode_text("<a & b>"), "&lt;a &amp; b&gt;");
    }

    #[test]
    fn tokenizer_handles_comments_and_quotes() {
        let toks = tokenize("<!-- c --><td title='a>b' colspan=2>x</td>");
        assert_eq!(
            toks[0],
            Token::Open {
                name: "td".into(),
                attrs: vec![("title".into(), "a>b".into()), ("colspan".into(), "2".into())],
                offset: 10
            }
        );
        assert!(matches!(&toks[1], Token::Text { text, .. } if text == "x"));
    }
}
