//! Render a table in each style family and write the SVGs (and a PNG
//! when built with the default `resvg` feature) to a directory.
//!
//! cargo run --example render_table -- [out_dir]

use tablekit::gen::{random_table, TableShape};
use tablekit::render::{layout, render_svg, sample_style, StyleFamily, StyleMix};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let out = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "render_out".into()));
    std::fs::create_dir_all(&out)?;
    let shape = TableShape { rows: (4, 7), cols: (3, 5), span_prob: 0.2, ..TableShape::default() };
    let table = random_table(&mut ChaCha8Rng::seed_from_u64(7), &shape).with_caption("Generated table");

    for (i, family) in StyleFamily::ALL.into_iter().enumerate() {
        let style = sample_style(&StyleMix::only(family), i as u64)?;
        let plan = layout(&table, &style)?;
        let svg = render_svg(&table, &style)?;
        let path = out.join(format!("{family}.svg"));
        std::fs::write(&path, &svg)?;
        println!(
            "{}: {}x{} px, font {} {:.1}pt, columns {:?}",
            path.display(),
            plan.total_size.0,
            plan.total_size.1,
            style.font_family,
            style.font_size,
            plan.col_widths
        );
        #[cfg(feature = "resvg")]
        if family == StyleFamily::WebPage {
            let png = tablekit::render::rasterize(&svg, 144, Some(&tablekit::render::ResvgRasterizer::default()))?;
            std::fs::write(out.join("WebPage@144dpi.png"), png)?;
        }
    }
    Ok(())
}
