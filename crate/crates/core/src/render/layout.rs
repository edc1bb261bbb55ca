use serde::{Deserialize, Serialize};

use super::style::{StyleFamily, StyleSpec};
use super::RenderError;
use crate::table::Table;

/// Average advances in em units. Real shaping is out of scope; the goal is
/// a deterministic, platform-independent width estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FontMetrics {
    pub monospace: bool,
    /// Multiplier on the generic proportional advance table.
    pub scale: f64,
}

impl FontMetrics {
    pub fn for_family(name: &str) -> Self {
        let lower = name.to_ascii_lowercase();
        let mono = ["mono", "courier", "consolas", "menlo", "monaco"];
        if mono.iter().any(|m| lower.contains(m)) {
            return Self { monospace: true, scale: 1.0 };
        }
        let scale = match lower.as_str() {
            "verdana" | "tahoma" => 1.12,
            "segoe ui" | "trebuchet ms" => 1.02,
            "georgia" => 1.04,
            "times new roman" | "cambria" => 0.92,
            "calibri" => 0.93,
            _ => 1.0,
        };
        Self { monospace: false, scale }
    }

    fn advance(&self, c: char) -> f64 {
        if self.monospace {
            return 0.6;
        }
        let base = match c {
            ' ' => 0.28,
            'i' | 'j' | 'l' | '.' | ',' | ':' | ';' | '\'' | '!' | '|' => 0.25,
            'f' | 't' | 'r' | '(' | ')' | '[' | ']' | '-' | '/' => 0.34,
            'm' | 'w' => 0.83,
            'M' | 'W' | '@' | '%' => 0.9,
            c if c.is_ascii_digit() => 0.556,
            c if c.is_ascii_uppercase() => 0.68,
            c if c.is_ascii_lowercase() => 0.52,
            c if c.is_ascii() => 0.55,
            // CJK and other wide scripts
            c if (c as u32) >= 0x1100 => 1.0,
            _ => 0.6,
        };
        base * self.scale
    }

    /// Estimated width in pixels at `font_px`.
    pub fn text_width(&self, text: &str, font_px: f64) -> f64 {
        text.chars().map(|c| self.advance(c)).sum::<f64>() * font_px
    }
}

/// Points to pixels at 96 dpi.
pub fn font_px(font_size_pt: f64) -> f64 {
    font_size_pt * 96.0 / 72.0
}

/// Pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl CellBox {
    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    /// True when the interiors intersect.
    pub fn overlaps(&self, other: &CellBox) -> bool {
        self.x < other.right() && other.x < self.right() && self.y < other.bottom() && other.y < self.bottom()
    }
}

/// Resolved geometry. `cell_boxes` and `lines` are indexed like
/// `Table::anchors`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutPlan {
    pub col_widths: Vec<u32>,
    pub row_heights: Vec<u32>,
    pub cell_boxes: Vec<CellBox>,
    pub lines: Vec<Vec<String>>,
    pub caption_lines: Vec<String>,
    pub caption_height: u32,
    pub line_height: u32,
    pub total_size: (u32, u32),
    /// Left edge of each column and top edge of each row.
    pub col_x: Vec<u32>,
    pub row_y: Vec<u32>,
}

fn wrap(text: &str, max_width: f64, metrics: &FontMetrics, px: f64) -> Vec<String> {
    let mut lines = Vec::new();
    let mut cur = String::new();
    for word in text.split_whitespace() {
        let candidate = if cur.is_empty() {
            word.to_string()
        } else {
            format!("{cur} {word}")
        };
        if metrics.text_width(&candidate, px) <= max_width {
            cur = candidate;
            continue;
        }
        if !cur.is_empty() {
            lines.push(std::mem::take(&mut cur));
        }
        if metrics.text_width(word, px) <= max_width {
            cur = word.to_string();
            continue;
        }
        // word longer than a whole line: break between characters
        for c in word.chars() {
            let mut next = cur.clone();
            next.push(c);
            if !cur.is_empty() && metrics.text_width(&next, px) > max_width {
                lines.push(std::mem::take(&mut cur));
                next = c.to_string();
            }
            cur = next;
        }
    }
    if !cur.is_empty() {
        lines.push(cur);
    }
    lines
}

pub fn layout(table: &Table, style: &StyleSpec) -> Result<LayoutPlan, RenderError> {
    table.validate().map_err(crate::table::TableError::from)?;
    style.validate()?;
    let metrics = FontMetrics::for_family(&style.font_family);
    let px = font_px(style.font_size);
    let line_height = (px * 1.3).ceil() as u32;
    let pad = style.cell_padding;
    let border = style.border_width;
    let max_w = style.max_col_width;
    let min_w = (2 * pad + px.ceil() as u32).min(max_w);
    let natural = |text: &str| metrics.text_width(text, px).ceil() as u32 + 2 * pad;

    let mut col_widths = vec![min_w; table.n_cols];
    for a in table.anchors.iter().filter(|a| a.col_span == 1) {
        let w = &mut col_widths[a.col - 1];
        *w = (*w).max(natural(&a.content).clamp(min_w, max_w));
    }
    let mut spanned: Vec<_> = table.anchors.iter().filter(|a| a.col_span > 1).collect();
    spanned.sort_by_key(|a| (a.col_span, a.row, a.col));
    for a in spanned {
        let cols = a.col - 1..a.col - 1 + a.col_span;
        let avail = |cw: &[u32]| cw[cols.clone()].iter().sum::<u32>() + (a.col_span as u32 - 1) * border;
        let cap = a.col_span as u32 * max_w + (a.col_span as u32 - 1) * border;
        let need = natural(&a.content).min(cap);
        let mut deficit = need.saturating_sub(avail(&col_widths));
        // spread the shortfall one pixel at a time over columns below the cap
        while deficit > 0 {
            let mut grew = false;
            for j in cols.clone() {
                if deficit > 0 && col_widths[j] < max_w {
                    col_widths[j] += 1;
                    deficit -= 1;
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
    }

    let mut col_x = Vec::with_capacity(table.n_cols);
    let mut x = border;
    for &w in &col_widths {
        col_x.push(x);
        x += w + border;
    }
    let grid_width = x;
    let box_width = |col: usize, span: usize| col_widths[col - 1..col - 1 + span].iter().sum::<u32>() + (span as u32 - 1) * border;

    let lines: Vec<Vec<String>> = table
        .anchors
        .iter()
        .map(|a| {
            let inner = box_width(a.col, a.col_span).saturating_sub(2 * pad) as f64;
            wrap(&a.content, inner, &metrics, px)
        })
        .collect();
    let needed_height = |n_lines: usize| n_lines.max(1) as u32 * line_height + 2 * pad;

    let mut row_heights = vec![needed_height(1); table.n_rows];
    for (a, l) in table.anchors.iter().zip(&lines) {
        if a.row_span == 1 {
            let h = &mut row_heights[a.row - 1];
            *h = (*h).max(needed_height(l.len()));
        }
    }
    for (a, l) in table.anchors.iter().zip(&lines) {
        if a.row_span > 1 {
            let rows = a.row - 1..a.row - 1 + a.row_span;
            let avail = row_heights[rows.clone()].iter().sum::<u32>() + (a.row_span as u32 - 1) * border;
            let need = needed_height(l.len());
            if need > avail {
                row_heights[rows.end - 1] += need - avail;
            }
        }
    }

    let (caption_lines, caption_height) = match (&table.caption, style.family) {
        (Some(c), StyleFamily::WebPage) if !c.trim().is_empty() => {
            let inner = grid_width.saturating_sub(2 * pad).max(1) as f64;
            let cl = wrap(c, inner, &metrics, px);
            let h = cl.len() as u32 * line_height + 2 * pad;
            (cl, h)
        }
        _ => (Vec::new(), 0),
    };

    let mut row_y = Vec::with_capacity(table.n_rows);
    let mut y = caption_height + border;
    for &h in &row_heights {
        row_y.push(y);
        y += h + border;
    }
    let total_size = (grid_width, y);

    let cell_boxes = table
        .anchors
        .iter()
        .map(|a| CellBox {
            x: col_x[a.col - 1],
            y: row_y[a.row - 1],
            w: box_width(a.col, a.col_span),
            h: row_heights[a.row - 1..a.row - 1 + a.row_span].iter().sum::<u32>() + (a.row_span as u32 - 1) * border,
        })
        .collect();

    Ok(LayoutPlan {
        col_widths,
        row_heights,
        cell_boxes,
        lines,
        caption_lines,
        caption_height,
        line_height,
        total_size,
        col_x,
        row_y,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{random_table, TableShape};
    use crate::render::StyleFamily;
    use crate::table::AnchorCell;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn style() -> StyleSpec {
        StyleSpec::plain(StyleFamily::Excel)
    }

    #[test]
    fn single_cell_geometry() {
        let t = Table::from_rows(&[vec!["x"]]);
        let s = style();
        let plan = layout(&t, &s).unwrap();
        let b = s.border_width;
        assert_eq!(plan.cell_boxes[0], CellBox { x: b, y: b, w: plan.col_widths[0], h: plan.row_heights[0] });
        assert_eq!(plan.total_size, (plan.col_widths[0] + 2 * b, plan.row_heights[0] + 2 * b));
    }

    #[test]
    fn spanned_box_covers_its_columns() {
        let mut s = style();
        s.border_width = 2;
        let t = Table::new(2, 2, vec![
            AnchorCell::new(1, 1, "wide header").span(1, 2),
            AnchorCell::new(2, 1, "left"),
            AnchorCell::new(2, 2, "right side"),
        ]);
        let plan = layout(&t, &s).unwrap();
        let (w1, w2) = (plan.col_widths[0], plan.col_widths[1]);
        assert_eq!(plan.cell_boxes[0].w, w1 + w2 + s.border_width);
        assert_eq!(plan.cell_boxes[0].x, plan.cell_boxes[1].x);
        assert_eq!(plan.cell_boxes[0].right(), plan.cell_boxes[2].right());
    }

    #[test]
    fn long_text_wraps() {
        let s = style();
        let short = layout(&Table::from_rows(&[vec!["short"]]), &s).unwrap();
        let long_text = "word ".repeat(60);
        let long = layout(&Table::from_rows(&[vec![long_text.as_str()]]), &s).unwrap();
        assert!(long.lines[0].len() > 1);
        assert!(long.row_heights[0] > short.row_heights[0]);
        assert_eq!(long.col_widths[0], s.max_col_width);
        let huge = layout(&Table::from_rows(&[vec!["x".repeat(500)]]), &s).unwrap();
        assert!(huge.lines[0].len() > 1);
    }

    #[test]
    fn widths_respect_clamp() {
        let s = style();
        let plan = layout(&Table::from_rows(&[vec!["", "a much longer piece of text than fits"]]), &s).unwrap();
        let px = font_px(s.font_size).ceil() as u32;
        assert_eq!(plan.col_widths[0], 2 * s.cell_padding + px);
        assert!(plan.col_widths[1] <= s.max_col_width);
    }

    #[test]
    fn monospace_is_fixed_advance() {
        let m = FontMetrics::for_family("Courier New");
        assert_eq!(m.text_width("iiii", 10.0), m.text_width("MMMM", 10.0));
        let p = FontMetrics::for_family("Arial");
        assert!(p.text_width("iiii", 10.0) < p.text_width("MMMM", 10.0));
    }

    #[test]
    fn caption_only_for_web_page() {
        let t = Table::from_rows(&[vec!["a"]]).with_caption("Caption");
        assert!(layout(&t, &StyleSpec::plain(StyleFamily::WebPage)).unwrap().caption_height > 0);
        assert_eq!(layout(&t, &StyleSpec::plain(StyleFamily::Excel)).unwrap().caption_height, 0);
    }

    proptest! {
        #[test]
        fn boxes_tile_like_the_grid(seed in any::<u64>(), fam in 0..3usize) {
            let shape = TableShape { span_prob: 0.3, ..TableShape::default() };
            let t = random_table(&mut ChaCha8Rng::seed_from_u64(seed), &shape);
            let mut s = StyleSpec::plain(StyleFamily::ALL[fam]);
            s.border_width = (seed % 3) as u32;
            let plan = layout(&t, &s).unwrap();
            let b = s.border_width;
            for (i, (a, bx)) in t.anchors.iter().zip(&plan.cell_boxes).enumerate() {
                prop_assert!(bx.right() + b <= plan.total_size.0 && bx.bottom() + b <= plan.total_size.1);
                let w: u32 = plan.col_widths[a.col - 1..a.col - 1 + a.col_span].iter().sum();
                prop_assert_eq!(bx.w, w + (a.col_span as u32 - 1) * b);
                for (other_a, other) in t.anchors.iter().zip(&plan.cell_boxes).skip(i + 1) {
                    prop_assert!(!bx.overlaps(other));
                    // horizontally adjacent in the grid ⇒ separated by exactly one border
                    if other_a.col == a.col + a.col_span && other_a.row < a.row + a.row_span && a.row < other_a.row + other_a.row_span {
                        prop_assert_eq!(other.x, bx.right() + b);
                    }
                    if other_a.row == a.row + a.row_span && other_a.col < a.col + a.col_span && a.col < other_a.col + other_a.col_span {
                        prop_assert_eq!(other.y, bx.bottom() + b);
                    }
                }
            }
        }
    }
}
