//! Score a handful of hand-made model responses: exact answers, answers
//! buried in chatter, partly wrong answers, TR in another markup, and
//! missing predictions.
//!
//! cargo run --example score_predictions

use std::collections::BTreeMap;

use tablekit::eval::{bleu, evaluate, extract_json_answer, teds, Prediction};
use tablekit::gen::{random_table, TableShape};
use tablekit::instruct::TemplatePool;
use tablekit::tasks::{synthesize, Sample, SynthConfig, TaskCounts, TaskKind};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let shape = TableShape { rows: (3, 5), cols: (3, 4), ..TableShape::default() };
    let tables: Vec<_> = (0..30).map(|i| random_table(&mut rng, &shape).with_source_id(format!("t{i:02}"))).collect();
    let cfg = SynthConfig {
        counts: TaskKind::STRUCTURE.into_iter().map(|t| (t, TaskCounts { train: 0, eval: 4 })).collect(),
        eval_table_fraction: 1.0,
        multiturn_fraction: 0.0,
        ..SynthConfig::default()
    };
    let out = synthesize(&tables, &[], &BTreeMap::new(), TemplatePool::bundled(), &cfg)?;
    let gold: Vec<Sample> = out.eval;

    let mut preds = Vec::new();
    for (i, s) in gold.iter().enumerate() {
        let response = match i % 4 {
            0 => s.gold_response.clone(),
            1 => format!("Looking at the image carefully.\nFinal answer: {}\nHope that helps!", s.gold_response),
            2 => s.gold_response.replacen('1', "2", 1),
            _ => continue,
        };
        preds.push(Prediction { sample_id: s.sample_id.clone(), response });
    }
    let report = evaluate(&preds, &gold);
    print!("{}", report.summary_table());

    let chatty = "Sure. {\"draft\": 1} Actually: {\"row_number\": 4, \"column_number\": 3}";
    println!("\nextracted {:?}", extract_json_answer(chatty, TaskKind::Tsd));

    let gold_html = "<table><tr><td>a</td><td>b</td></tr><tr><td>1</td><td>2</td></tr></table>";
    println!("TEDS one wrong cell: {:.4}", teds("<table><tr><td>a</td><td>b</td></tr><tr><td>1</td><td>3</td></tr></table>", gold_html));
    println!("TEDS missing row:    {:.4}", teds("<table><tr><td>a</td><td>b</td></tr></table>", gold_html));
    println!("BLEU: {:.2}", bleu(&["the total rose by 3%"], &["the total rose by 3.5%"])?);
    Ok(())
}
