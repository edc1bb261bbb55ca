//! Requests are a template plus an output-format hint, both picked by a
//! seeded draw. Custom pools load from TOML and are validated on load.
//!
//! cargo run --example request_building

use std::collections::BTreeMap;

use tablekit::instruct::{build_request, placeholders, FormatHint, Template, TemplatePool};
use tablekit::tasks::TaskKind;

fn main() -> anyhow::Result<()> {
    let pool = TemplatePool::bundled();
    for task in TaskKind::ALL {
        println!("{task}: {} templates, {} hints, placeholders {:?}", pool.templates(task).len(), pool.hints(task).len(), task.placeholders());
    }

    let inputs = BTreeMap::from([("cells".to_string(), "(1,2), (3,1)".to_string())]);
    for seed in 0..3 {
        println!("\nseed {seed}:\n{}", build_request(pool, TaskKind::Tce, &inputs, seed)?);
    }

    let body = &pool.templates(TaskKind::Tr)[0].body;
    println!("\nTR template {body:?} uses {:?}", placeholders(body));

    // a pool built in code; tasks it lacks use a built-in default
    let mut custom = TemplatePool::empty();
    custom.add_template(Template { id: "mine-tsd".into(), task: TaskKind::Tsd, body: "Count rows and columns. {format_hint}".into() })?;
    custom.add_hint(TaskKind::Tsd, FormatHint { id: "mine-tsd-h".into(), body: "Reply as {\"row_number\": R, \"column_number\": C}.".into() })?;
    println!("\ncustom: {}", build_request(&custom, TaskKind::Tsd, &BTreeMap::new(), 1)?);
    println!("fallback: {}", build_request(&custom, TaskKind::Mcd, &BTreeMap::new(), 1)?);

    // TOML pools must cover every task
    if let Err(e) = TemplatePool::from_toml_str("[tsd]\ntemplates = []\nhints = []\n") {
        println!("rejected: {e}");
    }
    Ok(())
}
