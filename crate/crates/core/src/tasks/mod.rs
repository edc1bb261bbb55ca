//! Instruction samples for the six structure tasks plus wrapped QA pairs,
//! and multi-turn conversations built from them.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::format::{FormatError, TableFormat};
use crate::instruct::InstructError;
use crate::render::StyleFamily;
use crate::table::TableError;

mod multiturn;
mod plan;
mod synth;

pub use multiturn::compose_multiturn;
pub use plan::{synthesize, QaPair, SynthOutput, TableImage};
pub use synth::{draw_tr_format, synth_mcd, synth_rce, synth_tce, synth_tcl, synth_tr, synth_tsd, unique_cells, wrap_qa};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "TSD")]
    Tsd,
    #[serde(rename = "TCE")]
    Tce,
    #[serde(rename = "TCL")]
    Tcl,
    #[serde(rename = "MCD")]
    Mcd,
    #[serde(rename = "RCE")]
    Rce,
    #[serde(rename = "TR")]
    Tr,
    #[serde(rename = "QAWrap")]
    QaWrap,
}

impl TaskKind {
    pub const ALL: [TaskKind; 7] = [
        TaskKind::Tsd,
        TaskKind::Tce,
        TaskKind::Tcl,
        TaskKind::Mcd,
        TaskKind::Rce,
        TaskKind::Tr,
        TaskKind::QaWrap,
    ];
    /// Tasks whose ground truth comes from the table itself.
    pub const STRUCTURE: [TaskKind; 6] =
        [TaskKind::Tsd, TaskKind::Tce, TaskKind::Tcl, TaskKind::Mcd, TaskKind::Rce, TaskKind::Tr];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Tsd => "TSD",
            TaskKind::Tce => "TCE",
            TaskKind::Tcl => "TCL",
            TaskKind::Mcd => "MCD",
            TaskKind::Rce => "RCE",
            TaskKind::Tr => "TR",
            TaskKind::QaWrap => "QAWrap",
        }
    }

    /// Section name in template pool files.
    pub fn pool_key(self) -> &'static str {
        match self {
            TaskKind::QaWrap => "qa_wrap",
            TaskKind::Tsd => "tsd",
            TaskKind::Tce => "tce",
            TaskKind::Tcl => "tcl",
            TaskKind::Mcd => "mcd",
            TaskKind::Rce => "rce",
            TaskKind::Tr => "tr",
        }
    }

    pub fn from_pool_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.pool_key() == key)
    }

    /// Template placeholders this task fills (besides `{format_hint}`).
    pub fn placeholders(self) -> &'static [&'static str] {
        match self {
            TaskKind::Tsd | TaskKind::Mcd => &[],
            TaskKind::Tce | TaskKind::Tcl | TaskKind::Rce => &["cells"],
            TaskKind::Tr => &["format_name"],
            TaskKind::QaWrap => &["question"],
        }
    }

    /// Keys of the answer object; every format hint must mention them.
    pub fn answer_keys(self) -> &'static [&'static str] {
        match self {
            TaskKind::Tsd => &["row_number", "column_number"],
            TaskKind::Tce | TaskKind::Tcl => &["cells", "position", "value"],
            TaskKind::Mcd => &["has_merged", "regions"],
            TaskKind::Rce => &["rows", "columns"],
            TaskKind::Tr | TaskKind::QaWrap => &["answer"],
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(t) || k.pool_key().eq_ignore_ascii_case(t))
            .or_else(|| t.eq_ignore_ascii_case("qa").then_some(TaskKind::QaWrap))
            .ok_or_else(|| format!("unknown task `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Eval,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Eval => "eval",
        }
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "eval" | "test" => Ok(Split::Eval),
            _ => Err(format!("unknown split `{s}`")),
        }
    }
}

/// How a wrapped QA answer is scored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QaMetric {
    #[default]
    Accuracy,
    Bleu,
}

/// Bookkeeping carried alongside each sample for statistics and scoring.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub split: Split,
    pub n_rows: usize,
    pub n_cols: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style_family: Option<StyleFamily>,
    /// Target markup of a TR sample.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<TableFormat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<QaMetric>,
}

/// One turn of a conversation. The image belongs to the conversation and
/// is shown with the first turn only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub sample_id: String,
    pub task: TaskKind,
    pub request: String,
    pub gold_response: String,
    pub gold_answer: Value,
    #[serde(default)]
    pub meta: SampleMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub sample_id: String,
    pub table_id: String,
    pub task: TaskKind,
    pub image_ref: String,
    pub request: String,
    pub gold_response: String,
    pub gold_answer: Value,
    #[serde(default)]
    pub turns: Option<Vec<Turn>>,
    #[serde(default)]
    pub meta: SampleMeta,
}

impl Sample {
    /// The single-turn units of this sample: itself, or each turn of a
    /// conversation.
    pub fn units(&self) -> Vec<Turn> {
        match &self.turns {
            Some(turns) => turns.clone(),
            None => vec![Turn {
                sample_id: self.sample_id.clone(),
                task: self.task,
                request: self.request.clone(),
                gold_response: self.gold_response.clone(),
                gold_answer: self.gold_answer.clone(),
                meta: self.meta.clone(),
            }],
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("asked for {k} cells but the table has {cells}")]
    KTooLarge { k: usize, cells: usize },
    #[error("asked for {k} unique cells but the table has {available}")]
    InsufficientUniqueCells { k: usize, available: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("question and answer must be non-empty")]
    EmptyQa,
    #[error("table id `{0}` is used by more than one table")]
    DuplicateTableId(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Instruct(#[from] InstructError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskCounts {
    pub train: usize,
    pub eval: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Keyed by task name (`TSD`, `TCE`, ...). QA pairs are always wrapped
    /// in full and need no entry.
    pub counts: BTreeMap<TaskKind, TaskCounts>,
    pub tce_cells_per_sample: usize,
    pub tcl_cells_per_sample: usize,
    pub tr_format_weights: BTreeMap<TableFormat, f64>,
    pub multiturn_fraction: f64,
    /// Share of tables held out for evaluation samples.
    pub eval_table_fraction: f64,
    pub master_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            counts: TaskKind::STRUCTURE.into_iter().map(|t| (t, TaskCounts { train: 80, eval: 10 })).collect(),
            tce_cells_per_sample: 3,
            tcl_cells_per_sample: 3,
            tr_format_weights: default_tr_weights(),
            multiturn_fraction: 0.2,
            eval_table_fraction: 0.1,
            master_seed: 0,
        }
    }
}

/// HTML 96 : Markdown 27 : LaTeX 27.
pub fn default_tr_weights() -> BTreeMap<TableFormat, f64> {
    BTreeMap::from([
        (TableFormat::Html, 96.0 / 150.0),
        (TableFormat::Markdown, 27.0 / 150.0),
        (TableFormat::Latex, 27.0 / 150.0),
    ])
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), String> {
        let sum: f64 = self.tr_format_weights.values().sum();
        if (sum - 1.0).abs() > 1e-9 || self.tr_format_weights.values().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(format!("tr_format_weights must be non-negative and sum to 1 (got {sum})"));
        }
        if !(0.0..=1.0).contains(&self.multiturn_fraction) {
            return Err("multiturn_fraction must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.eval_table_fraction) {
            return Err("eval_table_fraction must lie in [0, 1]".into());
        }
        if self.tce_cells_per_sample == 0 || self.tcl_cells_per_sample == 0 {
            return Err("cells per sample must be at least 1".into());
        }
        if self.counts.contains_key(&TaskKind::QaWrap) {
            return Err("QAWrap has no count; every supplied pair is wrapped".into());
        }
        Ok(())
    }

    pub fn count(&self, task: TaskKind, split: Split) -> usize {
        let c = self.counts.get(&task).copied().unwrap_or_default();
        match split {
            Split::Train => c.train,
            Split::Eval => c.eval,
        }
    }
}

/// Seed derived from SHA-256 over the given parts, so each sample's draws
/// depend only on its identity and never on scheduling.
pub fn derive_seed(master_seed: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Per-sample seed from (master seed, table id, task, split, index).
pub fn sample_seed(master_seed: u64, table_id: &str, task: TaskKind, split: Split, index: usize) -> u64 {
    derive_seed(master_seed, &[table_id, task.as_str(), split.as_str(), &index.to_string()])
}

/// Everything a single synthesis call needs besides the table.
#[derive(Debug, Clone)]
pub struct SynthContext<'a> {
    pub pool: &'a crate::instruct::TemplatePool,
    pub table_id: String,
    pub image_ref: String,
    pub style_family: Option<StyleFamily>,
    pub split: Split,
    pub index: usize,
    pub master_seed: u64,
}

impl<'a> SynthContext<'a> {
    pub fn new(pool: &'a crate::instruct::TemplatePool, table_id: impl Into<String>) -> Self {
        let table_id = table_id.into();
        Self {
            pool,
            image_ref: format!("images/{table_id}.svg"),
            table_id,
            style_family: None,
            split: Split::Train,
            index: 0,
            master_seed: 0,
        }
    }

    pub fn with_index(mut self, split: Split, index: usize) -> Self {
        self.split = split;
        self.index = index;
        self
    }

    pub fn with_seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    pub fn seed(&self, task: TaskKind) -> u64 {
        sample_seed(self.master_seed, &self.table_id, task, self.split, self.index)
    }

    pub fn sample_id(&self, task: TaskKind) -> String {
        format!("{}-{}-{:06}", task, self.split.as_str(), self.index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_names_round_trip() {
        for t in TaskKind::ALL {
            assert_eq!(t.as_str().parse::<TaskKind>().unwrap(), t);
            assert_eq!(serde_json::to_string(&t).unwrap(), format!("\"{}\"", t.as_str()));
        }
        assert_eq!("qa".parse::<TaskKind>().unwrap(), TaskKind::QaWrap);
    }

    #[test]
    fn config_toml_round_trip() {
        let cfg = SynthConfig::default();
        let s = toml::to_string(&cfg).unwrap();
        let back: SynthConfig = toml::from_str(&s).unwrap();
        assert_eq!(back, cfg);
        let partial: SynthConfig = toml::from_str("[counts]\nTSD = { train = 5, eval = 1 }\n").unwrap();
        assert_eq!(partial.count(TaskKind::Tsd, Split::Eval), 1);
        assert_eq!(partial.count(TaskKind::Tce, Split::Train), 0);
    }

    #[test]
    fn seeds_are_distinct_per_identity() {
        let a = sample_seed(1, "t1", TaskKind::Tsd, Split::Train, 0);
        assert_eq!(a, sample_seed(1, "t1", TaskKind::Tsd, Split::Train, 0));
        assert_ne!(a, sample_seed(2, "t1", TaskKind::Tsd, Split::Train, 0));
        assert_ne!(a, sample_seed(1, "t1", TaskKind::Tce, Split::Train, 0));
        assert_ne!(a, sample_seed(1, "t1", TaskKind::Tsd, Split::Eval, 0));
        assert_ne!(a, sample_seed(1, "t1", TaskKind::Tsd, Split::Train, 1));
        // length prefixes keep ("ab","c") and ("a","bc") apart
        assert_ne!(derive_seed(0, &["ab", "c"]), derive_seed(0, &["a", "bc"]));
    }

    #[test]
    fn default_weights_sum_to_one() {
        assert!(SynthConfig::default().validate().is_ok());
    }
}
