//! Serialize one table to HTML, Markdown and LaTeX and read each back.
//! Malformed text goes through the tolerant converter instead.
//!
//! cargo run --example format_roundtrip

use tablekit::format::{convert, parse, serialize, TableFormat};
use tablekit::table::Table;

fn main() {
    let t = Table::from_rows(&[vec!["City", "Pop. (M)"], vec!["Tokyo", "37.4"], vec!["Lima", "10.9"]]).with_header_row();
    for fmt in TableFormat::ALL {
        let text = serialize(&t, fmt).unwrap();
        let (back, diags) = parse(&text, fmt).unwrap();
        println!("--- {} ({} warnings)\n{text}", fmt.display_name(), diags.warnings.len());
        // LaTeX has no header cells and only HTML keeps captions, so
        // compare the cell text
        assert_eq!(back.anchors.iter().map(|a| &a.content).collect::<Vec<_>>(), t.anchors.iter().map(|a| &a.content).collect::<Vec<_>>());
    }

    let broken = "| a | b |\n| 1 | 2 | 3 |\nnot a row";
    let (html, diags) = convert(broken, TableFormat::Markdown);
    println!("--- lenient\n{html}");
    for (loc, msg) in &diags.warnings {
        println!("  line {} col {}: {msg}", loc.line, loc.column);
    }
}
