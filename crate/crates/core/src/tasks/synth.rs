use std::collections::{BTreeMap, HashMap};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::{QaMetric, Sample, SampleMeta, SynthContext, SynthError, TaskKind};
use crate::format::{normalize_text, serialize, TableFormat};
use crate::instruct::build_request;
use crate::table::{AnchorCell, Table, TableError};

fn rng_for(ctx: &SynthContext<'_>, task: TaskKind) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(ctx.seed(task))
}

fn assemble(
    table: &Table,
    ctx: &SynthContext<'_>,
    task: TaskKind,
    answer: Value,
    inputs: &[(&str, String)],
    rng: &mut ChaCha8Rng,
) -> Result<Sample, SynthError> {
    let inputs: BTreeMap<String, String> = inputs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
    let request = build_request(ctx.pool, task, &inputs, rng.gen())?;
    Ok(Sample {
        sample_id: ctx.sample_id(task),
        table_id: ctx.table_id.clone(),
        task,
        image_ref: ctx.image_ref.clone(),
        request,
        gold_response: answer.to_string(),
        gold_answer: answer,
        turns: None,
        meta: SampleMeta {
            split: ctx.split,
            n_rows: table.n_rows,
            n_cols: table.n_cols,
            style_family: ctx.style_family,
            ..SampleMeta::default()
        },
    })
}

fn position_list(cells: &[(usize, usize)]) -> String {
    cells.iter().map(|(r, c)| format!("({r},{c})")).collect::<Vec<_>>().join(", ")
}

/// Table size detection.
pub fn synth_tsd(table: &Table, ctx: &SynthContext<'_>) -> Result<Sample, SynthError> {
    table.validate().map_err(TableError::from)?;
    let mut rng = rng_for(ctx, TaskKind::Tsd);
    let answer = json!({ "row_number": table.n_rows, "column_number": table.n_cols });
    assemble(table, ctx, TaskKind::Tsd, answer, &[], &mut rng)
}

/// Cell extraction at `k` distinct positions, listed row-major.
pub fn synth_tce(table: &Table, k: usize, ctx: &SynthContext<'_>) -> Result<Sample, SynthError> {
    let grid = table.expand_grid()?;
    let cells = table.n_rows * table.n_cols;
    if k == 0 {
        return Err(SynthError::ZeroK);
    }
    if k > cells {
        return Err(SynthError::KTooLarge { k, cells });
    }
    let mut rng = rng_for(ctx, TaskKind::Tce);
    let mut picks: Vec<usize> = index::sample(&mut rng, cells, k).into_vec();
    picks.sort_unstable();
    let positions: Vec<(usize, usize)> = picks.iter().map(|i| (i / table.n_cols + 1, i % table.n_cols + 1)).collect();
    let answer = json!({
        "cells": positions
            .iter()
            .map(|&(r, c)| json!({ "position": [r, c], "value": grid.content(r, c) }))
            .collect::<Vec<_>>()
    });
    assemble(table, ctx, TaskKind::Tce, answer, &[("cells", position_list(&positions))], &mut rng)
}

fn uniqueness_key(s: &str) -> String {
    normalize_text(s).to_lowercase()
}

/// Anchors whose non-empty content appears nowhere else in the table
/// (compared after whitespace normalization and case folding).
pub fn unique_cells(table: &Table) -> Vec<&AnchorCell> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    for a in &table.anchors {
        *seen.entry(uniqueness_key(&a.content)).or_default() += 1;
    }
    table
        .anchors
        .iter()
        .filter(|a| {
            let key = uniqueness_key(&a.content);
            !key.is_empty() && seen[&key] == 1
        })
        .collect()
}

/// Cell locating for `k` anchors with unique content.
pub fn synth_tcl(table: &Table, k: usize, ctx: &SynthContext<'_>) -> Result<Sample, SynthError> {
    table.validate().map_err(TableError::from)?;
    if k == 0 {
        return Err(SynthError::ZeroK);
    }
    let candidates = unique_cells(table);
    if candidates.len() < k {
        return Err(SynthError::InsufficientUniqueCells { k, available: candidates.len() });
    }
    let mut rng = rng_for(ctx, TaskKind::Tcl);
    let mut picks = index::sample(&mut rng, candidates.len(), k).into_vec();
    picks.sort_unstable();
    let chosen: Vec<&AnchorCell> = picks.iter().map(|&i| candidates[i]).collect();
    let listed = chosen
        .iter()
        .map(|a| Value::String(a.content.clone()).to_string())
        .collect::<Vec<_>>()
        .join(", ");
    let answer = json!({
        "cells": chosen
            .iter()
            .map(|a| json!({ "value": a.content, "position": [a.row, a.col] }))
            .collect::<Vec<_>>()
    });
    assemble(table, ctx, TaskKind::Tcl, answer, &[("cells", listed)], &mut rng)
}

/// Merged cell detection.
pub fn synth_mcd(table: &Table, ctx: &SynthContext<'_>) -> Result<Sample, SynthError> {
    let regions = table.merged_regions()?;
    let mut rng = rng_for(ctx, TaskKind::Mcd);
    let answer = json!({ "has_merged": !regions.is_empty(), "regions": regions });
    assemble(table, ctx, TaskKind::Mcd, answer, &[], &mut rng)
}

fn id_phrase(noun: &str, ids: &[usize]) -> String {
    match ids {
        [one] => format!("{noun} {one}"),
        [init @ .., last] => {
            let init: Vec<String> = init.iter().map(usize::to_string).collect();
            format!("{noun}s {} and {last}", init.join(", "))
        }
        [] => String::new(),
    }
}

/// Row or column extraction. The axis is a fair coin; between one and
/// three lines of that axis are requested.
pub fn synth_rce(table: &Table, ctx: &SynthContext<'_>) -> Result<Sample, SynthError> {
    let grid = table.expand_grid()?;
    let mut rng = rng_for(ctx, TaskKind::Rce);
    let rows = rng.gen_bool(0.5);
    let n = if rows { table.n_rows } else { table.n_cols };
    let size = rng.gen_range(1..=n.min(3));
    let mut ids: Vec<usize> = index::sample(&mut rng, n, size).into_iter().map(|i| i + 1).collect();
    ids.sort_unstable();
    let lines: serde_json::Map<String, Value> = ids
        .iter()
        .map(|&i| {
            let cells = if rows { grid.row_contents(i) } else { grid.col_contents(i) };
            (i.to_string(), json!(cells))
        })
        .collect();
    let (key, noun) = if rows { ("rows", "row") } else { ("columns", "column") };
    let answer = json!({ key: lines });
    assemble(table, ctx, TaskKind::Rce, answer, &[("cells", id_phrase(noun, &ids))], &mut rng)
}

/// Table recognition into `fmt`.
pub fn synth_tr(table: &Table, fmt: TableFormat, ctx: &SynthContext<'_>) -> Result<Sample, SynthError> {
    let text = serialize(table, fmt)?;
    let mut rng = rng_for(ctx, TaskKind::Tr);
    let answer = json!({ "answer": text });
    let mut s = assemble(table, ctx, TaskKind::Tr, answer, &[("format_name", fmt.display_name().into())], &mut rng)?;
    s.meta.format = Some(fmt);
    Ok(s)
}

fn draw_weighted<R: Rng>(weights: &[(TableFormat, f64)], rng: &mut R) -> Option<TableFormat> {
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    if total <= 0.0 {
        return None;
    }
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for &(f, w) in weights {
        acc += w;
        if u < acc {
            return Some(f);
        }
    }
    weights.iter().rev().find(|(_, w)| *w > 0.0).map(|(f, _)| *f)
}

/// Draws a TR target. A spanned table that draws Markdown, which cannot
/// express spans, redraws among the other formats.
pub fn draw_tr_format<R: Rng>(weights: &BTreeMap<TableFormat, f64>, spanned: bool, rng: &mut R) -> TableFormat {
    let all: Vec<(TableFormat, f64)> = weights.iter().map(|(f, w)| (*f, *w)).collect();
    match draw_weighted(&all, rng) {
        Some(TableFormat::Markdown) if spanned => {
            let rest: Vec<_> = all.into_iter().filter(|(f, _)| *f != TableFormat::Markdown).collect();
            draw_weighted(&rest, rng).unwrap_or(TableFormat::Html)
        }
        Some(f) => f,
        None => TableFormat::Html,
    }
}

/// Wraps an externally supplied question/answer pair about `table`.
pub fn wrap_qa(table: &Table, task_input: &str, task_output: &str, ctx: &SynthContext<'_>) -> Result<Sample, SynthError> {
    if task_input.trim().is_empty() || task_output.trim().is_empty() {
        return Err(SynthError::EmptyQa);
    }
    let mut rng = rng_for(ctx, TaskKind::QaWrap);
    let answer = json!({ "answer": task_output });
    let mut s = assemble(table, ctx, TaskKind::QaWrap, answer, &[("question", task_input.to_string())], &mut rng)?;
    s.meta.metric = Some(QaMetric::Accuracy);
    Ok(s)
}

impl From<crate::table::Violation> for SynthError {
    fn from(v: crate::table::Violation) -> Self {
        SynthError::Table(TableError::from(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::FormatError;
    use crate::gen::{random_table, TableShape};
    use crate::instruct::TemplatePool;
    use crate::tasks::Split;

    fn ctx() -> SynthContext<'static> {
        SynthContext::new(TemplatePool::bundled(), "t1").with_seed(42)
    }

    fn grid(rows: &[&[&str]]) -> Table {
        let rows: Vec<Vec<&str>> = rows.iter().map(|r| r.to_vec()).collect();
        Table::from_rows(&rows)
    }

    #[test]
    fn tsd_answers() {
        let t = grid(&[&["a", "b", "c", "d"], &["e", "f", "g", "h"], &["i", "j", "k", "l"]]);
        assert_eq!(synth_tsd(&t, &ctx()).unwrap().gold_answer, json!({"row_number": 3, "column_number": 4}));
        let t = grid(&[&["x"]]);
        assert_eq!(synth_tsd(&t, &ctx()).unwrap().gold_answer, json!({"row_number": 1, "column_number": 1}));
        let t = Table::new(
            2,
            3,
            vec![
                AnchorCell::new(1, 1, "a").span(2, 1),
                AnchorCell::new(1, 2, "b"),
                AnchorCell::new(1, 3, "c"),
                AnchorCell::new(2, 2, "d"),
                AnchorCell::new(2, 3, "e"),
            ],
        );
        assert_eq!(synth_tsd(&t, &ctx()).unwrap().gold_answer, json!({"row_number": 2, "column_number": 3}));
    }

    #[test]
    fn tce_full_cover_and_errors() {
        let t = grid(&[&["a", "b"], &["c", "d"]]);
        let s = synth_tce(&t, 4, &ctx()).unwrap();
        assert_eq!(
            s.gold_answer["cells"],
            json!([
                {"position": [1, 1], "value": "a"},
                {"position": [1, 2], "value": "b"},
                {"position": [2, 1], "value": "c"},
                {"position": [2, 2], "value": "d"}
            ])
        );
        assert!(matches!(synth_tce(&t, 5, &ctx()), Err(SynthError::KTooLarge { k: 5, cells: 4 })));
        assert!(s.request.contains("(1,1), (1,2), (2,1), (2,2)"));
    }

    #[test]
    fn tce_inside_merged_region() {
        let t = Table::new(1, 2, vec![AnchorCell::new(1, 1, "wide").span(1, 2)]);
        let s = synth_tce(&t, 2, &ctx()).unwrap();
        assert_eq!(s.gold_answer["cells"][1], json!({"position": [1, 2], "value": "wide"}));
    }

    #[test]
    fn tcl_unique_only() {
        let t = grid(&[&["x", "x", "x"], &["x", "x", "zebra"]]);
        let s = synth_tcl(&t, 1, &ctx()).unwrap();
        assert_eq!(s.gold_answer, json!({"cells": [{"value": "zebra", "position": [2, 3]}]}));
        assert!(s.request.contains("\"zebra\""));
        let t = grid(&[&["x", "x"], &["x", "X "]]);
        assert!(matches!(synth_tcl(&t, 1, &ctx()), Err(SynthError::InsufficientUniqueCells { available: 0, .. })));
    }

    #[test]
    fn mcd_answers() {
        let t = grid(&[&["a", "b"]]);
        assert_eq!(synth_mcd(&t, &ctx()).unwrap().gold_answer, json!({"has_merged": false, "regions": []}));
        let t = Table::new(2, 2, vec![AnchorCell::new(1, 1, "a").span(1, 2), AnchorCell::new(2, 1, "b"), AnchorCell::new(2, 2, "c")]);
        assert_eq!(
            synth_mcd(&t, &ctx()).unwrap().gold_answer,
            json!({"has_merged": true, "regions": [[[1, 1], [1, 2]]]})
        );
    }

    #[test]
    fn rce_repeats_merged_content() {
        let t = Table::new(2, 2, vec![AnchorCell::new(1, 1, "x").span(2, 1), AnchorCell::new(1, 2, "b"), AnchorCell::new(2, 2, "d")]);
        for i in 0..40 {
            let s = synth_rce(&t, &ctx().with_index(Split::Train, i)).unwrap();
            if let Some(c1) = s.gold_answer.get("columns").and_then(|c| c.get("1")) {
                assert_eq!(c1, &json!(["x", "x"]));
            }
            if let Some(r2) = s.gold_answer.get("rows").and_then(|c| c.get("2")) {
                assert_eq!(r2, &json!(["x", "d"]));
            }
        }
    }

    #[test]
    fn rce_phrase() {
        assert_eq!(id_phrase("row", &[2]), "row 2");
        assert_eq!(id_phrase("column", &[1, 3]), "columns 1 and 3");
        assert_eq!(id_phrase("row", &[1, 2, 4]), "rows 1, 2 and 4");
    }

    #[test]
    fn tr_html_and_markdown_refusal() {
        let s = synth_tr(&grid(&[&["x"]]), TableFormat::Html, &ctx()).unwrap();
        assert_eq!(s.gold_answer, json!({"answer": "<table><tr><td>x</td></tr></table>"}));
        assert!(s.request.contains("HTML"));
        let spanned = Table::new(1, 2, vec![AnchorCell::new(1, 1, "w").span(1, 2)]);
        assert!(matches!(
            synth_tr(&spanned, TableFormat::Markdown, &ctx()),
            Err(SynthError::Format(FormatError::UnrepresentableInFormat { .. }))
        ));
    }

    #[test]
    fn spanned_tables_never_draw_markdown() {
        let w = crate::tasks::default_tr_weights();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            assert_ne!(draw_tr_format(&w, true, &mut rng), TableFormat::Markdown);
        }
        let only_md = BTreeMap::from([(TableFormat::Markdown, 1.0)]);
        assert_eq!(draw_tr_format(&only_md, true, &mut rng), TableFormat::Html);
        assert_eq!(draw_tr_format(&only_md, false, &mut rng), TableFormat::Markdown);
    }

    #[test]
    fn qa_envelope() {
        let s = wrap_qa(&grid(&[&["x"]]), "Is the claim supported?", "entailed", &ctx()).unwrap();
        assert!(s.gold_response.contains("{\"answer\":\"entailed\"}"));
        assert!(s.request.contains("Is the claim supported?"));
        assert!(matches!(wrap_qa(&grid(&[&["x"]]), " ", "a", &ctx()), Err(SynthError::EmptyQa)));
        let fallback = wrap_qa(&grid(&[&["x"]]), "Why?", "because", &SynthContext::new(&TemplatePool::empty(), "t")).unwrap();
        assert!(fallback.request.contains("Why?"));
    }

    #[test]
    fn deterministic_per_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = random_table(&mut rng, &TableShape::default());
        let a = synth_rce(&t, &ctx().with_index(Split::Eval, 3)).unwrap();
        let b = synth_rce(&t, &ctx().with_index(Split::Eval, 3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sample_id, "RCE-eval-000003");
    }

    #[test]
    fn requests_have_no_open_placeholders() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 0..100 {
            let t = random_table(&mut rng, &TableShape::default());
            let c = ctx().with_index(Split::Train, i);
            let mut samples = vec![synth_tsd(&t, &c).unwrap(), synth_mcd(&t, &c).unwrap(), synth_rce(&t, &c).unwrap()];
            samples.push(synth_tce(&t, 1, &c).unwrap());
            samples.push(synth_tr(&t, TableFormat::Latex, &c).unwrap());
            for s in samples {
                assert!(crate::instruct::placeholders(&s.request).is_empty(), "{}", s.request);
            }
        }
    }
}
