use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::synth::{draw_tr_format, synth_mcd, synth_rce, synth_tce, synth_tcl, synth_tr, synth_tsd, unique_cells, wrap_qa};
use super::{compose_multiturn, derive_seed, QaMetric, Sample, Split, SynthConfig, SynthContext, SynthError, TaskCounts, TaskKind};
use crate::instruct::TemplatePool;
use crate::render::StyleFamily;
use crate::table::Table;

/// A question/answer pair about one table, supplied from outside.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub table_id: String,
    pub input: String,
    pub output: String,
    #[serde(default)]
    pub split: Option<Split>,
    #[serde(default)]
    pub metric: Option<QaMetric>,
}

/// Where a table's image lives and how it was styled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableImage {
    pub image_ref: String,
    pub style_family: Option<StyleFamily>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynthOutput {
    /// Single-turn samples not consumed by a conversation, then the
    /// conversations, sorted by sample id.
    pub train: Vec<Sample>,
    pub eval: Vec<Sample>,
    /// How many samples per task could not be produced for lack of
    /// eligible tables.
    pub shortfall: BTreeMap<TaskKind, TaskCounts>,
    /// QA pairs naming a table that is not in the corpus.
    pub skipped_qa: usize,
}

fn in_eval(master_seed: u64, table_id: &str, fraction: f64) -> bool {
    let h = derive_seed(master_seed, &["split", table_id]);
    (h as f64 / 18_446_744_073_709_551_616.0) < fraction
}

fn eligible(task: TaskKind, t: &Table, cfg: &SynthConfig) -> bool {
    match task {
        TaskKind::Tce => t.n_rows * t.n_cols >= cfg.tce_cells_per_sample,
        TaskKind::Tcl => unique_cells(t).len() >= cfg.tcl_cells_per_sample,
        _ => true,
    }
}

struct Job {
    task: TaskKind,
    split: Split,
    index: usize,
    table: usize,
}

/// Builds the whole sample set. Tables are split between train and eval
/// by a hash of their id; within a task and split, tables are drawn
/// without replacement, so each table contributes at most one sample per
/// task and split. Output depends only on the inputs and `cfg`, never on
/// thread count.
pub fn synthesize(
    tables: &[Table],
    qa: &[QaPair],
    images: &BTreeMap<String, TableImage>,
    pool: &TemplatePool,
    cfg: &SynthConfig,
) -> Result<SynthOutput, SynthError> {
    let mut order: Vec<usize> = (0..tables.len()).collect();
    order.sort_by(|&a, &b| tables[a].source_id.cmp(&tables[b].source_id));
    let mut by_id = BTreeMap::new();
    for &i in &order {
        if by_id.insert(tables[i].source_id.as_str(), i).is_some() {
            return Err(SynthError::DuplicateTableId(tables[i].source_id.clone()));
        }
    }
    // With no samples wanted on one side, every table goes to the other.
    let wants = |split| TaskKind::STRUCTURE.into_iter().any(|t| cfg.count(t, split) > 0);
    let fraction = match (wants(Split::Train), wants(Split::Eval)) {
        (_, false) => 0.0,
        (false, true) => 1.0,
        _ => cfg.eval_table_fraction,
    };
    let split_of = |i: usize| {
        if in_eval(cfg.master_seed, &tables[i].source_id, fraction) {
            Split::Eval
        } else {
            Split::Train
        }
    };

    let mut jobs = Vec::new();
    let mut out = SynthOutput::default();
    for task in TaskKind::STRUCTURE {
        for split in [Split::Train, Split::Eval] {
            let want = cfg.count(task, split);
            if want == 0 {
                continue;
            }
            let mut pool_idx: Vec<usize> =
                order.iter().copied().filter(|&i| split_of(i) == split && eligible(task, &tables[i], cfg)).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.master_seed, &["select", task.as_str(), split.as_str()]));
            pool_idx.shuffle(&mut rng);
            let got = want.min(pool_idx.len());
            if got < want {
                let s = out.shortfall.entry(task).or_default();
                match split {
                    Split::Train => s.train = want - got,
                    Split::Eval => s.eval = want - got,
                }
                log::warn!("{task} {}: only {got} of {want} samples, too few eligible tables", split.as_str());
            }
            jobs.extend(pool_idx[..got].iter().enumerate().map(|(index, &table)| Job { task, split, index, table }));
        }
    }

    let context = |table: &Table, split: Split, index: usize| {
        let mut ctx = SynthContext::new(pool, table.source_id.clone()).with_index(split, index).with_seed(cfg.master_seed);
        if let Some(img) = images.get(&table.source_id) {
            ctx.image_ref = img.image_ref.clone();
            ctx.style_family = img.style_family;
        }
        ctx
    };

    let mut samples: Vec<Sample> = jobs
        .par_iter()
        .map(|job| {
            let t = &tables[job.table];
            let ctx = context(t, job.split, job.index);
            match job.task {
                TaskKind::Tsd => synth_tsd(t, &ctx),
                TaskKind::Tce => synth_tce(t, cfg.tce_cells_per_sample, &ctx),
                TaskKind::Tcl => synth_tcl(t, cfg.tcl_cells_per_sample, &ctx),
                TaskKind::Mcd => synth_mcd(t, &ctx),
                TaskKind::Rce => synth_rce(t, &ctx),
                TaskKind::Tr => {
                    let seed = derive_seed(
                        cfg.master_seed,
                        &[&t.source_id, "TR-format", job.split.as_str(), &job.index.to_string()],
                    );
                    let fmt = draw_tr_format(&cfg.tr_format_weights, t.has_spans(), &mut ChaCha8Rng::seed_from_u64(seed));
                    synth_tr(t, fmt, &ctx)
                }
                TaskKind::QaWrap => unreachable!("QA pairs are wrapped separately"),
            }
        })
        .collect::<Result<_, _>>()?;

    let mut qa_index: BTreeMap<Split, usize> = BTreeMap::new();
    let mut qa_jobs = Vec::new();
    for pair in qa {
        let Some(&ti) = by_id.get(pair.table_id.as_str()) else {
            out.skipped_qa += 1;
            continue;
        };
        let split = pair.split.unwrap_or_else(|| split_of(ti));
        let n = qa_index.entry(split).or_default();
        qa_jobs.push((pair, ti, split, *n));
        *n += 1;
    }
    let wrapped: Vec<Sample> = qa_jobs
        .par_iter()
        .map(|&(pair, ti, split, index)| {
            let t = &tables[ti];
            let mut s = wrap_qa(t, &pair.input, &pair.output, &context(t, split, index))?;
            s.meta.metric = Some(pair.metric.unwrap_or_default());
            Ok(s)
        })
        .collect::<Result<_, SynthError>>()?;
    samples.extend(wrapped);

    let (mut train, mut eval): (Vec<Sample>, Vec<Sample>) = samples.into_iter().partition(|s| s.meta.split == Split::Train);
    let conversations = compose_multiturn(&train, cfg.multiturn_fraction, cfg.master_seed);
    let consumed: BTreeSet<&str> = conversations
        .iter()
        .flat_map(|c| c.turns.iter().flatten().map(|t| t.sample_id.as_str()))
        .collect();
    train.retain(|s| !consumed.contains(s.sample_id.as_str()));
    train.extend(conversations);
    train.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    eval.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    out.train = train;
    out.eval = eval;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{random_table, TableShape};

    fn corpus(n: usize, seed: u64) -> Vec<Table> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|i| random_table(&mut rng, &TableShape::default()).with_source_id(format!("t{i:04}"))).collect()
    }

    fn per_task(samples: &[Sample]) -> BTreeMap<TaskKind, usize> {
        let mut m = BTreeMap::new();
        for s in samples {
            for u in s.units() {
                *m.entry(u.task).or_default() += 1;
            }
        }
        m
    }

    #[test]
    fn exact_counts_with_enough_tables() {
        let tables = corpus(300, 1);
        let cfg = SynthConfig {
            counts: TaskKind::STRUCTURE.into_iter().map(|t| (t, TaskCounts { train: 20, eval: 5 })).collect(),
            ..SynthConfig::default()
        };
        let out = synthesize(&tables, &[], &BTreeMap::new(), TemplatePool::bundled(), &cfg).unwrap();
        assert!(out.shortfall.is_empty());
        for (_, n) in per_task(&out.train) {
            assert_eq!(n, 20);
        }
        for (_, n) in per_task(&out.eval) {
            assert_eq!(n, 5);
        }
        assert!(out.train.iter().any(|s| s.turns.is_some()));
    }

    #[test]
    fn shortfall_reported_not_padded() {
        let tables = corpus(10, 2);
        let cfg = SynthConfig {
            counts: BTreeMap::from([(TaskKind::Tsd, TaskCounts { train: 50, eval: 0 })]),
            eval_table_fraction: 0.0,
            multiturn_fraction: 0.0,
            ..SynthConfig::default()
        };
        let out = synthesize(&tables, &[], &BTreeMap::new(), TemplatePool::bundled(), &cfg).unwrap();
        assert_eq!(out.train.len(), 10);
        assert_eq!(out.shortfall[&TaskKind::Tsd], TaskCounts { train: 40, eval: 0 });
    }

    #[test]
    fn qa_pairs_wrapped_and_unknown_tables_skipped() {
        let tables = corpus(5, 3);
        let qa = vec![
            QaPair { table_id: "t0001".into(), input: "Q1".into(), output: "A1".into(), split: Some(Split::Eval), metric: None },
            QaPair { table_id: "nope".into(), input: "Q".into(), output: "A".into(), split: None, metric: None },
            QaPair {
                table_id: "t0002".into(),
                input: "Describe".into(),
                output: "a long text".into(),
                split: Some(Split::Eval),
                metric: Some(QaMetric::Bleu),
            },
        ];
        let cfg = SynthConfig { counts: BTreeMap::new(), ..SynthConfig::default() };
        let out = synthesize(&tables, &qa, &BTreeMap::new(), TemplatePool::bundled(), &cfg).unwrap();
        assert_eq!(out.skipped_qa, 1);
        assert_eq!(out.eval.len(), 2);
        assert_eq!(out.eval[1].meta.metric, Some(QaMetric::Bleu));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut tables = corpus(2, 4);
        tables[1].source_id = tables[0].source_id.clone();
        let r = synthesize(&tables, &[], &BTreeMap::new(), TemplatePool::bundled(), &SynthConfig::default());
        assert!(matches!(r, Err(SynthError::DuplicateTableId(_))));
    }

    #[test]
    fn independent_of_input_order_and_threads() {
        let tables = corpus(120, 5);
        let cfg = SynthConfig {
            counts: TaskKind::STRUCTURE.into_iter().map(|t| (t, TaskCounts { train: 15, eval: 3 })).collect(),
            ..SynthConfig::default()
        };
        let a = synthesize(&tables, &[], &BTreeMap::new(), TemplatePool::bundled(), &cfg).unwrap();
        let mut rev = tables.clone();
        rev.reverse();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = one.install(|| synthesize(&rev, &[], &BTreeMap::new(), TemplatePool::bundled(), &cfg).unwrap());
        assert_eq!(a, b);
    }
}
