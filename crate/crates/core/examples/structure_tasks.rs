//! One sample of each structure task for a small table with a merged
//! header, printed as request / gold response pairs.
//!
//! cargo run --example structure_tasks

use tablekit::format::TableFormat;
use tablekit::instruct::TemplatePool;
use tablekit::table::{AnchorCell, Table};
use tablekit::tasks::{synth_mcd, synth_rce, synth_tce, synth_tcl, synth_tr, synth_tsd, SynthContext};

fn main() -> anyhow::Result<()> {
    let t = Table::new(
        3,
        3,
        vec![
            AnchorCell::new(1, 1, "Team").header(),
            AnchorCell::new(1, 2, "Score").span(1, 2).header(),
            AnchorCell::new(2, 1, "Red"),
            AnchorCell::new(2, 2, "3"),
            AnchorCell::new(2, 3, "5"),
            AnchorCell::new(3, 1, "Blue"),
            AnchorCell::new(3, 2, "4"),
            AnchorCell::new(3, 3, "2"),
        ],
    );
    let ctx = SynthContext::new(TemplatePool::bundled(), "scores").with_seed(42);
    let samples = [
        synth_tsd(&t, &ctx)?,
        synth_tce(&t, 2, &ctx)?,
        synth_tcl(&t, 2, &ctx)?,
        synth_mcd(&t, &ctx)?,
        synth_rce(&t, &ctx)?,
        synth_tr(&t, TableFormat::Latex, &ctx)?,
    ];
    for s in &samples {
        println!("== {} ({})\n{}\n-> {}\n", s.task, s.sample_id, s.request, s.gold_response);
    }
    Ok(())
}
