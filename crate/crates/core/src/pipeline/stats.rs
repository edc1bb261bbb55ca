use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::read_jsonl;
use crate::format::TableFormat;
use crate::render::StyleFamily;
use crate::tasks::{Sample, Split, TaskCounts, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeBucket {
    pub rows: usize,
    pub cols: usize,
    pub tables: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskLengths {
    pub input: f64,
    pub output: f64,
}

/// Dataset summary. Counts are per single-turn unit, so each turn of a
/// conversation counts toward its own task.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub counts: BTreeMap<TaskKind, TaskCounts>,
    pub conversations: usize,
    /// Mean whitespace-token lengths of requests and gold responses.
    pub avg_length: BTreeMap<TaskKind, TaskLengths>,
    pub overall_length: TaskLengths,
    /// Share of distinct tables per style family.
    pub style_mix: BTreeMap<StyleFamily, f64>,
    /// Share of TR units per target format.
    pub format_mix: BTreeMap<TableFormat, f64>,
    pub table_sizes: Vec<SizeBucket>,
}

fn shares<K: Ord + Copy>(counts: &BTreeMap<K, usize>) -> BTreeMap<K, f64> {
    let total: usize = counts.values().sum();
    counts.iter().map(|(k, &n)| (*k, if total == 0 { 0.0 } else { n as f64 / total as f64 })).collect()
}

fn words(s: &str) -> usize {
    s.split_whitespace().count()
}

pub fn stats(samples: &[Sample]) -> StatsReport {
    let mut r = StatsReport::default();
    let mut sums: BTreeMap<TaskKind, (usize, usize, usize)> = BTreeMap::new();
    let mut tables: BTreeMap<&str, (usize, usize, Option<StyleFamily>)> = BTreeMap::new();
    let mut formats: BTreeMap<TableFormat, usize> = BTreeMap::new();
    for s in samples {
        if s.turns.is_some() {
            r.conversations += 1;
        }
        tables.entry(&s.table_id).or_insert((s.meta.n_rows, s.meta.n_cols, s.meta.style_family));
        for u in s.units() {
            let c = r.counts.entry(u.task).or_default();
            match u.meta.split {
                Split::Train => c.train += 1,
                Split::Eval => c.eval += 1,
            }
            let e = sums.entry(u.task).or_default();
            e.0 += 1;
            e.1 += words(&u.request);
            e.2 += words(&u.gold_response);
            if let (TaskKind::Tr, Some(f)) = (u.task, u.meta.format) {
                *formats.entry(f).or_default() += 1;
            }
        }
    }
    let (mut n, mut i, mut o) = (0, 0, 0);
    for (task, (cn, ci, co)) in &sums {
        r.avg_length.insert(*task, TaskLengths { input: *ci as f64 / *cn as f64, output: *co as f64 / *cn as f64 });
        n += cn;
        i += ci;
        o += co;
    }
    if n > 0 {
        r.overall_length = TaskLengths { input: i as f64 / n as f64, output: o as f64 / n as f64 };
    }
    let mut styles: BTreeMap<StyleFamily, usize> = BTreeMap::new();
    let mut sizes: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (rows, cols, family) in tables.values() {
        if let Some(f) = family {
            *styles.entry(*f).or_default() += 1;
        }
        *sizes.entry((*rows, *cols)).or_default() += 1;
    }
    r.style_mix = shares(&styles);
    r.format_mix = shares(&formats);
    r.table_sizes = sizes.into_iter().map(|((rows, cols), tables)| SizeBucket { rows, cols, tables }).collect();
    r
}

/// Reads a samples file, or `train.jsonl` and `eval.jsonl` from a
/// synthesis output directory.
pub fn cmd_stats(path: &Path) -> Result<StatsReport> {
    let mut samples: Vec<Sample> = Vec::new();
    if path.is_dir() {
        for name in ["train.jsonl", "eval.jsonl"] {
            let p = path.join(name);
            if p.exists() {
                samples.extend(read_jsonl::<Sample>(&p)?);
            }
        }
    } else {
        samples = read_jsonl(path)?;
    }
    Ok(stats(&samples))
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<8} {:>7} {:>7} {:>10} {:>10}", "task", "train", "eval", "avg_in", "avg_out")?;
        for (task, c) in &self.counts {
            let l = self.avg_length.get(task).cloned().unwrap_or_default();
            writeln!(f, "{:<8} {:>7} {:>7} {:>10.1} {:>10.1}", task.as_str(), c.train, c.eval, l.input, l.output)?;
        }
        writeln!(
            f,
            "overall avg length: input {:.1}, output {:.1}; conversations: {}",
            self.overall_length.input, self.overall_length.output, self.conversations
        )?;
        let pct = |m: Vec<(String, f64)>| m.into_iter().map(|(k, v)| format!("{k} {:.1}%", v * 100.0)).collect::<Vec<_>>().join(", ");
        writeln!(f, "style mix: {}", pct(self.style_mix.iter().map(|(k, v)| (k.to_string(), *v)).collect()))?;
        writeln!(f, "TR format mix: {}", pct(self.format_mix.iter().map(|(k, v)| (k.display_name().to_string(), *v)).collect()))?;
        let sizes: Vec<String> = self.table_sizes.iter().map(|b| format!("{}x{}:{}", b.rows, b.cols, b.tables)).collect();
        writeln!(f, "table sizes (rows x cols: tables): {}", sizes.join(" "))
    }
}
