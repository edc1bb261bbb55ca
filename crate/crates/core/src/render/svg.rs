use std::fmt::Write as _;

use super::layout::{font_px, layout, LayoutPlan};
use super::style::{Rgb, StyleFamily, StyleSpec};
use super::RenderError;
use crate::table::Table;

const BODY_FILL: Rgb = Rgb::WHITE;

fn border_color(family: StyleFamily) -> Rgb {
    match family {
        StyleFamily::WebPage => Rgb(0x99, 0x99, 0x99),
        StyleFamily::Excel => Rgb(0xbf, 0xbf, 0xbf),
        StyleFamily::Markdown => Rgb(0xd0, 0xd7, 0xde),
    }
}

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            // XML 1.0 forbids most C0 controls
            c if (c as u32) < 0x20 && c != '\t' && c != '\n' && c != '\r' => out.push(' '),
            c => out.push(c),
        }
    }
    out
}

fn fmt_num(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Fill of one anchor under the family rules.
pub fn cell_fill(style: &StyleSpec, row: usize, is_header: bool) -> Rgb {
    if is_header {
        style.header_fill
    } else if row % 2 == 0 {
        style.zebra_fill.unwrap_or(BODY_FILL)
    } else {
        BODY_FILL
    }
}

/// Lays out and renders in one step.
pub fn render_svg(table: &Table, style: &StyleSpec) -> Result<String, RenderError> {
    let plan = layout(table, style)?;
    Ok(render_planned(table, style, &plan))
}

/// Deterministic SVG 1.1: per anchor (row-major) one `rect` followed by one
/// `text`; then the caption and, for Markdown, the horizontal rules.
pub fn render_planned(table: &Table, style: &StyleSpec, plan: &LayoutPlan) -> String {
    let (w, h) = plan.total_size;
    let px = font_px(style.font_size);
    let stroke = border_color(style.family);
    let full_borders = style.family != StyleFamily::Markdown && style.border_width > 0;
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" \
         font-family=\"{}\" font-size=\"{}\" style=\"background-color:#ffffff\">",
        escape_xml(&style.font_family),
        fmt_num(px)
    );
    let baseline = (plan.line_height as f64 * 0.78).round() as u32;
    for (i, a) in table.anchors.iter().enumerate() {
        let b = plan.cell_boxes[i];
        let fill = cell_fill(style, a.row, a.is_header);
        if full_borders {
            let _ = writeln!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\" stroke=\"{stroke}\" stroke-width=\"{}\"/>",
                b.x, b.y, b.w, b.h, style.border_width
            );
        } else {
            let _ = writeln!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\" stroke=\"none\"/>",
                b.x, b.y, b.w, b.h
            );
        }
        let text_color = if fill.luminance() < 0.5 { Rgb::WHITE } else { Rgb::BLACK };
        let lines = &plan.lines[i];
        let block = lines.len() as u32 * plan.line_height;
        let top = b.y + b.h.saturating_sub(block) / 2;
        let (anchor, tx) = if a.is_header {
            ("middle", b.x + b.w / 2)
        } else {
            ("start", b.x + style.cell_padding)
        };
        let weight = if a.is_header { " font-weight=\"bold\"" } else { "" };
        let _ = write!(
            out,
            "<text x=\"{tx}\" y=\"{}\" fill=\"{text_color}\" text-anchor=\"{anchor}\"{weight}>",
            top + baseline
        );
        for (k, line) in lines.iter().enumerate() {
            let dy = if k == 0 { 0 } else { plan.line_height };
            let _ = write!(out, "<tspan x=\"{tx}\" dy=\"{dy}\">{}</tspan>", escape_xml(line));
        }
        out.push_str("</text>\n");
    }
    if !plan.caption_lines.is_empty() {
        let _ = write!(
            out,
            "<text class=\"caption\" x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"#000000\">",
            w / 2,
            style.cell_padding + baseline
        );
        for (k, line) in plan.caption_lines.iter().enumerate() {
            let dy = if k == 0 { 0 } else { plan.line_height };
            let _ = write!(out, "<tspan x=\"{}\" dy=\"{dy}\">{}</tspan>", w / 2, escape_xml(line));
        }
        out.push_str("</text>\n");
    }
    if style.family == StyleFamily::Markdown && style.border_width > 0 {
        out.push_str("<g class=\"rules\">\n");
        let bw = style.border_width;
        let mut ys: Vec<u32> = plan.row_y.iter().map(|y| y - bw).collect();
        ys.push(h - bw);
        for y in ys {
            let yc = fmt_num(y as f64 + bw as f64 / 2.0);
            let _ = writeln!(
                out,
                "<line x1=\"0\" y1=\"{yc}\" x2=\"{w}\" y2=\"{yc}\" stroke=\"{stroke}\" stroke-width=\"{bw}\"/>"
            );
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}
