//! The canonical table: anchors, spans, the expanded grid and validation.
//!
//! cargo run --example table_model

use tablekit::table::{AnchorCell, Table};

fn main() {
    // a two-level header: "Sales" spans both quarter columns
    let t = Table::new(
        4,
        3,
        vec![
            AnchorCell::new(1, 1, "Region").span(2, 1).header(),
            AnchorCell::new(1, 2, "Sales").span(1, 2).header(),
            AnchorCell::new(2, 2, "Q1").header(),
            AnchorCell::new(2, 3, "Q2").header(),
            AnchorCell::new(3, 1, "North"),
            AnchorCell::new(3, 2, "120"),
            AnchorCell::new(3, 3, "135"),
            AnchorCell::new(4, 1, "South"),
            AnchorCell::new(4, 2, "98"),
            AnchorCell::new(4, 3, "110"),
        ],
    )
    .with_caption("Quarterly sales");
    t.validate().expect("valid table");

    let grid = t.expand_grid().unwrap();
    for r in 1..=grid.n_rows() {
        println!("row {r}: {:?}", grid.row_contents(r));
    }
    println!("column 2: {:?}", grid.col_contents(2));
    for (tl, br) in t.merged_regions().unwrap() {
        println!("merged {tl}..{br}");
    }

    // overlapping spans are rejected with the first violation found
    let bad = Table::new(2, 2, vec![AnchorCell::new(1, 1, "a").span(2, 2), AnchorCell::new(2, 2, "b")]);
    println!("invalid: {}", bad.validate().unwrap_err());

    println!("{}", serde_json::to_string_pretty(&t).unwrap());
}
