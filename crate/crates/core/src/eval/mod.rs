//! Answer extraction from free-form model output and the per-task metrics.
//!
//! Structure tasks expect a JSON answer. A response from which no JSON
//! (and no key-pattern fallback) can be recovered scores zero on them;
//! only QA answers and TR tables are taken from raw text.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::format::{convert, normalize_text, TableFormat};
use crate::tasks::{QaMetric, Sample, TaskKind, Turn};

mod bleu;
mod teds;

pub use bleu::{bleu, bleu_from_stats, bleu_stats, tokenize as bleu_tokenize, BleuStats};
pub use teds::{
    html_to_tree, levenshtein, score_tr, substitution_cost, teds, teds_trees, tree_edit_distance, Tag, TableTree,
};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{path}:{line}: {reason}")]
    FileFormat { path: String, line: usize, reason: String },
    #[error("{predictions} predictions but {references} references")]
    LengthMismatch { predictions: usize, references: usize },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExtractionStatus {
    ParsedJson,
    RegexFallback,
    RawText,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub status: ExtractionStatus,
    /// An object for `ParsedJson`/`RegexFallback`, a string for
    /// `RawText`, null for `Failed`.
    pub payload: Value,
}

impl ExtractionResult {
    fn object(&self) -> Option<&Map<String, Value>> {
        match self.status {
            ExtractionStatus::ParsedJson | ExtractionStatus::RegexFallback => self.payload.as_object(),
            _ => None,
        }
    }
}

// Objects that parse as complete JSON, scanning left to right and
// skipping over each one found, so nested objects are not reported.
fn top_level_objects(s: &str) -> Vec<Value> {
    let mut out = Vec::new();
    let mut i = 0;
    while let Some(off) = s[i..].find('{') {
        let start = i + off;
        let mut stream = serde_json::Deserializer::from_str(&s[start..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(v @ Value::Object(_))) => {
                i = start + stream.byte_offset();
                out.push(v);
            }
            _ => i = start + 1,
        }
    }
    out
}

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).unwrap())
}

fn fallback(response: &str, task: TaskKind) -> Option<Map<String, Value>> {
    static ROW: OnceLock<Regex> = OnceLock::new();
    static COL: OnceLock<Regex> = OnceLock::new();
    static MERGED: OnceLock<Regex> = OnceLock::new();
    static ANSWER: OnceLock<Regex> = OnceLock::new();
    let mut m = Map::new();
    match task {
        TaskKind::Tsd => {
            for (cell, pat, key) in [
                (&ROW, r"(?i)row_number\W{0,8}?(\d+)", "row_number"),
                (&COL, r"(?i)column_number\W{0,8}?(\d+)", "column_number"),
            ] {
                if let Some(c) = re(cell, pat).captures(response) {
                    if let Ok(n) = c[1].parse::<u64>() {
                        m.insert(key.into(), n.into());
                    }
                }
            }
        }
        TaskKind::Mcd => {
            if let Some(c) = re(&MERGED, r"(?i)has_merged\W{0,8}?(true|false|yes|no)\b").captures(response) {
                let yes = matches!(c[1].to_ascii_lowercase().as_str(), "true" | "yes");
                m.insert("has_merged".into(), yes.into());
            }
        }
        TaskKind::Tr | TaskKind::QaWrap => {
            if let Some(c) = re(&ANSWER, r#"(?is)"?\banswer"?\s*[:=]\s*(.+)"#).captures(response) {
                let v = c[1].trim().trim_end_matches('}').trim().trim_matches('"').trim();
                if !v.is_empty() {
                    m.insert("answer".into(), v.into());
                }
            }
        }
        TaskKind::Tce | TaskKind::Tcl | TaskKind::Rce => {}
    }
    (!m.is_empty()).then_some(m)
}

/// Recovers the answer from a response: the last complete JSON object,
/// else a task-specific key pattern, else the trimmed text. Fails only on
/// blank input.
pub fn extract_json_answer(response: &str, task: TaskKind) -> ExtractionResult {
    let trimmed = response.trim();
    if trimmed.is_empty() {
        return ExtractionResult { status: ExtractionStatus::Failed, payload: Value::Null };
    }
    if let Some(v) = top_level_objects(trimmed).pop() {
        return ExtractionResult { status: ExtractionStatus::ParsedJson, payload: v };
    }
    if let Some(m) = fallback(trimmed, task) {
        return ExtractionResult { status: ExtractionStatus::RegexFallback, payload: Value::Object(m) };
    }
    ExtractionResult { status: ExtractionStatus::RawText, payload: Value::String(trimmed.to_string()) }
}

fn as_int(v: &Value) -> Option<i64> {
    match v {
        Value::Number(n) => n.as_i64().or_else(|| n.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64)),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn as_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// Trim, case-fold and collapse internal whitespace.
pub fn normalize_value(s: &str) -> String {
    normalize_text(s).to_lowercase()
}

/// Row and column correctness, judged independently.
pub fn score_tsd(pred: &ExtractionResult, gold: &Value) -> (bool, bool) {
    let Some(p) = pred.object() else { return (false, false) };
    let axis = |k: &str| match (p.get(k).and_then(as_int), gold.get(k).and_then(as_int)) {
        (Some(a), Some(b)) => a == b,
        _ => false,
    };
    (axis("row_number"), axis("column_number"))
}

/// One `{position, value}` entry of a TCE or TCL answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellEntry {
    pub position: Option<(i64, i64)>,
    pub value: Option<String>,
}

fn parse_position(v: &Value) -> Option<(i64, i64)> {
    match v {
        Value::Array(a) if a.len() == 2 => Some((as_int(&a[0])?, as_int(&a[1])?)),
        Value::String(s) => {
            let nums: Vec<i64> = s
                .split(|c: char| !c.is_ascii_digit())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse().ok())
                .collect::<Option<_>>()?;
            (nums.len() == 2).then(|| (nums[0], nums[1]))
        }
        Value::Object(o) => Some((
            as_int(o.get("row_id").or_else(|| o.get("row"))?)?,
            as_int(o.get("column_id").or_else(|| o.get("col"))?)?,
        )),
        _ => None,
    }
}

/// Reads the `cells` list of an answer object; malformed entries keep
/// whatever parts could be read.
pub fn cell_entries(answer: &Value) -> Vec<CellEntry> {
    answer
        .get("cells")
        .and_then(Value::as_array)
        .map(|cells| {
            cells
                .iter()
                .map(|c| CellEntry {
                    position: c.get("position").and_then(parse_position),
                    value: c.get("value").map(as_text),
                })
                .collect()
        })
        .unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyedBy {
    /// TCE: find the predicted entry at each gold position, compare values.
    Position,
    /// TCL: find the predicted entry with each gold value, compare positions.
    Value,
}

/// Number of gold entries answered correctly.
pub fn count_cell_matches(pred: &[CellEntry], gold: &[CellEntry], keyed_by: KeyedBy) -> usize {
    gold.iter()
        .filter(|g| match keyed_by {
            KeyedBy::Position => pred
                .iter()
                .find(|p| p.position.is_some() && p.position == g.position)
                .is_some_and(|p| match (&p.value, &g.value) {
                    (Some(a), Some(b)) => normalize_value(a) == normalize_value(b),
                    _ => false,
                }),
            KeyedBy::Value => {
                let key = g.value.as_deref().map(normalize_value);
                pred.iter()
                    .find(|p| p.value.as_deref().map(normalize_value) == key)
                    .is_some_and(|p| p.position.is_some() && p.position == g.position)
            }
        })
        .count()
}

/// Matched over gold entries; 1.0 when there is no gold entry.
pub fn score_cell_accuracy(pred: &[CellEntry], gold: &[CellEntry], keyed_by: KeyedBy) -> f64 {
    if gold.is_empty() {
        return 1.0;
    }
    count_cell_matches(pred, gold, keyed_by) as f64 / gold.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 of exact set membership. Two empty sets
/// agree perfectly.
pub fn score_set_f1<T: Eq + std::hash::Hash>(pred: &HashSet<T>, gold: &HashSet<T>) -> SetScore {
    if pred.is_empty() && gold.is_empty() {
        return SetScore { precision: 1.0, recall: 1.0, f1: 1.0 };
    }
    let hit = pred.intersection(gold).count() as f64;
    let precision = if pred.is_empty() { 0.0 } else { hit / pred.len() as f64 };
    let recall = if gold.is_empty() { 0.0 } else { hit / gold.len() as f64 };
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    SetScore { precision, recall, f1 }
}

type RegionKey = ((i64, i64), (i64, i64));

fn regions(answer: &Value) -> HashSet<RegionKey> {
    answer
        .get("regions")
        .and_then(Value::as_array)
        .map(|rs| {
            rs.iter()
                .filter_map(|r| match r.as_array().map(Vec::as_slice) {
                    Some([a, b]) => Some((parse_position(a)?, parse_position(b)?)),
                    _ => None,
                })
                .collect()
        })
        .unwrap_or_default()
}

/// Region-level set F1 for merged cell detection. A prediction that
/// claims merged cells without naming a readable region counts one false
/// positive; one that states neither `has_merged` nor `regions` scores 0.
pub fn score_mcd(pred: &ExtractionResult, gold: &Value) -> SetScore {
    let zero = SetScore { precision: 0.0, recall: 0.0, f1: 0.0 };
    let Some(p) = pred.object() else { return zero };
    if !p.get("has_merged").is_some_and(Value::is_boolean) && !p.get("regions").is_some_and(Value::is_array) {
        return zero;
    }
    let p = Value::Object(p.clone());
    let mut ps = regions(&p);
    if ps.is_empty() && p.get("has_merged").and_then(Value::as_bool) == Some(true) {
        ps.insert(((0, 0), (0, 0)));
    }
    score_set_f1(&ps, &regions(gold))
}

/// Per-line F1 of a row/column extraction: `(axis is rows, [f1 per line])`.
pub fn score_rce(pred: &ExtractionResult, gold: &Value) -> (bool, Vec<f64>) {
    let (rows, key) = if gold.get("rows").is_some() { (true, "rows") } else { (false, "columns") };
    let empty = Map::new();
    let gold_lines = gold.get(key).and_then(Value::as_object).unwrap_or(&empty);
    let pred_lines = pred.object().and_then(|o| o.get(key)).and_then(Value::as_object);
    let line_set = |v: Option<&Value>| -> HashSet<(usize, String)> {
        v.and_then(Value::as_array)
            .map(|a| a.iter().enumerate().map(|(i, x)| (i, normalize_value(&as_text(x)))).collect())
            .unwrap_or_default()
    };
    let f1s = gold_lines
        .iter()
        .map(|(id, g)| {
            if pred.object().is_none() {
                return 0.0;
            }
            let p = pred_lines.and_then(|m| m.get(id));
            score_set_f1(&line_set(p), &line_set(Some(g))).f1
        })
        .collect();
    (rows, f1s)
}

fn strip_number(s: &str) -> Option<f64> {
    let t: String = s.trim().chars().filter(|c| *c != ',' && *c != '%').collect();
    let t = t.trim().trim_start_matches('$');
    if t.is_empty() {
        return None;
    }
    t.parse::<f64>().ok().filter(|f| f.is_finite())
}

fn qa_item(s: &str) -> String {
    let n = normalize_value(s);
    n.trim_matches(|c: char| c == '"' || c == '\'').trim_end_matches('.').trim().to_string()
}

fn items_match(a: &str, b: &str) -> bool {
    match (strip_number(a), strip_number(b)) {
        (Some(x), Some(y)) => (x - y).abs() <= 1e-6,
        _ => qa_item(a) == qa_item(b),
    }
}

fn as_list(v: &Value) -> Vec<String> {
    match v {
        Value::Array(a) => a.iter().map(as_text).collect(),
        other => vec![as_text(other)],
    }
}

/// Exact answer match after normalization. Numbers compare within 1e-6
/// once `,` and `%` are removed; list answers compare as multisets.
pub fn qa_answers_match(pred: &Value, gold: &Value) -> bool {
    if pred.is_array() || gold.is_array() {
        let p = as_list(pred);
        let mut g = as_list(gold);
        if p.len() != g.len() {
            return false;
        }
        for item in &p {
            match g.iter().position(|x| items_match(item, x)) {
                Some(i) => {
                    g.swap_remove(i);
                }
                None => return false,
            }
        }
        return true;
    }
    items_match(&as_text(pred), &as_text(gold))
}

fn predicted_answer(pred: &ExtractionResult) -> Option<Value> {
    match pred.status {
        ExtractionStatus::Failed => None,
        ExtractionStatus::RawText => Some(pred.payload.clone()),
        _ => pred.payload.get("answer").cloned(),
    }
}

/// Score of one sample: the named components feed the task aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub sample_id: String,
    pub task: TaskKind,
    pub verdict: ExtractionStatus,
    pub components: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<TableFormat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bleu: Option<BleuStats>,
}

/// Scores one response against one gold unit.
pub fn score_sample(gold: &Turn, response: &str) -> SampleScore {
    let pred = extract_json_answer(response, gold.task);
    let mut c = BTreeMap::new();
    let mut out = SampleScore {
        sample_id: gold.sample_id.clone(),
        task: gold.task,
        verdict: pred.status,
        components: BTreeMap::new(),
        format: None,
        bleu: None,
    };
    let b = |x: bool| if x { 1.0 } else { 0.0 };
    match gold.task {
        TaskKind::Tsd => {
            let (r, col) = score_tsd(&pred, &gold.gold_answer);
            c.insert("row_correct".into(), b(r));
            c.insert("column_correct".into(), b(col));
        }
        TaskKind::Tce | TaskKind::Tcl => {
            let keyed = if gold.task == TaskKind::Tce { KeyedBy::Position } else { KeyedBy::Value };
            let g = cell_entries(&gold.gold_answer);
            let p = pred.object().map(|o| cell_entries(&Value::Object(o.clone()))).unwrap_or_default();
            c.insert("correct".into(), count_cell_matches(&p, &g, keyed) as f64);
            c.insert("total".into(), g.len() as f64);
        }
        TaskKind::Mcd => {
            let s = score_mcd(&pred, &gold.gold_answer);
            c.insert("precision".into(), s.precision);
            c.insert("recall".into(), s.recall);
            c.insert("f1".into(), s.f1);
        }
        TaskKind::Rce => {
            let (rows, f1s) = score_rce(&pred, &gold.gold_answer);
            let sum: f64 = f1s.iter().sum();
            let axis = if rows { "row" } else { "column" };
            c.insert(format!("{axis}_f1_sum"), sum);
            c.insert(format!("{axis}_lines"), f1s.len() as f64);
            c.insert("f1".into(), if f1s.is_empty() { 1.0 } else { sum / f1s.len() as f64 });
        }
        TaskKind::Tr => {
            let fmt = gold.meta.format.unwrap_or(TableFormat::Html);
            out.format = Some(fmt);
            let gold_text = gold.gold_answer.get("answer").map(as_text).unwrap_or_default();
            let (gold_html, _) = convert(&gold_text, fmt);
            let teds = match predicted_answer(&pred) {
                Some(v) => score_tr(&as_text(&v), fmt, &gold_html),
                None if pred.status == ExtractionStatus::Failed => 0.0,
                None => score_tr("", fmt, &gold_html),
            };
            c.insert("teds".into(), teds);
        }
        TaskKind::QaWrap => {
            let gold_answer = gold.gold_answer.get("answer").cloned().unwrap_or(Value::Null);
            let p = predicted_answer(&pred);
            match gold.meta.metric.unwrap_or_default() {
                QaMetric::Accuracy => {
                    c.insert("correct".into(), b(p.is_some_and(|p| qa_answers_match(&p, &gold_answer))));
                }
                QaMetric::Bleu => {
                    let text = p.as_ref().map(as_text).unwrap_or_default();
                    let stats = bleu_stats(&text, &as_text(&gold_answer));
                    out.bleu = Some(stats);
                    c.insert("bleu".into(), bleu_from_stats(&stats));
                }
            }
        }
    }
    out.components = c;
    out
}

/// Aggregate scores of one task.
pub type TaskScores = BTreeMap<String, f64>;

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Recomputes per-task aggregates from per-sample scores.
pub fn aggregate(per_sample: &[SampleScore]) -> BTreeMap<TaskKind, TaskScores> {
    let mut by_task: BTreeMap<TaskKind, Vec<&SampleScore>> = BTreeMap::new();
    for s in per_sample {
        by_task.entry(s.task).or_default().push(s);
    }
    let mut out = BTreeMap::new();
    for (task, ss) in by_task {
        let comp = |k: &'static str| ss.iter().filter_map(move |s| s.components.get(k).copied());
        let sum = |k: &'static str| comp(k).sum::<f64>();
        let mut m = TaskScores::new();
        m.insert("n".into(), ss.len() as f64);
        match task {
            TaskKind::Tsd => {
                m.extend(mean(comp("row_correct")).map(|v| ("row_accuracy".into(), v)));
                m.extend(mean(comp("column_correct")).map(|v| ("column_accuracy".into(), v)));
            }
            TaskKind::Tce | TaskKind::Tcl => {
                let total = sum("total");
                m.insert("cell_accuracy".into(), if total > 0.0 { sum("correct") / total } else { 1.0 });
            }
            TaskKind::Mcd => {
                for k in ["precision", "recall", "f1"] {
                    m.extend(mean(comp(k)).map(|v| (k.to_string(), v)));
                }
            }
            TaskKind::Rce => {
                for axis in ["row", "column"] {
                    let lines: f64 = ss.iter().filter_map(|s| s.components.get(&format!("{axis}_lines"))).sum();
                    let f1: f64 = ss.iter().filter_map(|s| s.components.get(&format!("{axis}_f1_sum"))).sum();
                    if lines > 0.0 {
                        m.insert(format!("{axis}_f1"), f1 / lines);
                    }
                }
                m.extend(mean(comp("f1")).map(|v| ("f1".into(), v)));
            }
            TaskKind::Tr => {
                m.extend(mean(comp("teds")).map(|v| ("teds".into(), v)));
                for f in TableFormat::ALL {
                    let v = mean(ss.iter().filter(|s| s.format == Some(f)).filter_map(|s| s.components.get("teds").copied()));
                    m.extend(v.map(|v| (format!("teds_{}", f.as_str()), v)));
                }
            }
            TaskKind::QaWrap => {
                m.extend(mean(comp("correct")).map(|v| ("accuracy".into(), v)));
                let mut total = BleuStats::default();
                let mut any = false;
                for s in ss.iter().filter_map(|s| s.bleu) {
                    total += s;
                    any = true;
                }
                if any {
                    m.insert("bleu".into(), bleu_from_stats(&total));
                }
            }
        }
        out.insert(task, m);
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    /// Gold samples scored, including those without a prediction.
    pub evaluated: usize,
    /// Scored samples whose response was blank or absent.
    pub extraction_failed: usize,
    /// Gold samples with no prediction.
    pub missing: usize,
    /// Predictions whose id is not in the gold set, or repeat an id.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_task: BTreeMap<TaskKind, TaskScores>,
    pub per_sample: Vec<SampleScore>,
    pub counts: EvalCounts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub sample_id: String,
    pub response: String,
}

/// Scores predictions against gold samples by `sample_id`. Conversations
/// are scored turn by turn. Gold samples without a prediction score zero.
pub fn evaluate(predictions: &[Prediction], gold: &[Sample]) -> MetricReport {
    let mut units: Vec<Turn> = gold.iter().flat_map(Sample::units).collect();
    units.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    units.dedup_by(|a, b| a.sample_id == b.sample_id);
    let known: BTreeSet<&str> = units.iter().map(|u| u.sample_id.as_str()).collect();
    let mut responses: HashMap<&str, &str> = HashMap::new();
    let mut counts = EvalCounts::default();
    for p in predictions {
        if !known.contains(p.sample_id.as_str()) || responses.contains_key(p.sample_id.as_str()) {
            counts.skipped += 1;
        } else {
            responses.insert(&p.sample_id, &p.response);
        }
    }
    let per_sample: Vec<SampleScore> = units
        .par_iter()
        .map(|u| score_sample(u, responses.get(u.sample_id.as_str()).copied().unwrap_or("")))
        .collect();
    counts.evaluated = per_sample.len();
    counts.missing = units.iter().filter(|u| !responses.contains_key(u.sample_id.as_str())).count();
    counts.extraction_failed = per_sample.iter().filter(|s| s.verdict == ExtractionStatus::Failed).count();
    MetricReport { per_task: aggregate(&per_sample), per_sample, counts }
}

impl MetricReport {
    /// Plain-text table of the aggregates.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<8} {:>6}  metrics", "task", "n");
        for (task, m) in &self.per_task {
            let n = m.get("n").copied().unwrap_or(0.0);
            let metrics: Vec<String> = m
                .iter()
                .filter(|(k, _)| k.as_str() != "n")
                .map(|(k, v)| if k == "bleu" { format!("{k}={v:.2}") } else { format!("{k}={v:.4}") })
                .collect();
            let _ = writeln!(out, "{:<8} {:>6}  {}", task.as_str(), n as usize, metrics.join("  "));
        }
        let c = self.counts;
        let _ = writeln!(
            out,
            "evaluated={} extraction_failed={} missing={} skipped={}",
            c.evaluated, c.extraction_failed, c.missing, c.skipped
        );
        out
    }
}

/// Reads a JSON-lines file of `T`, skipping blank lines.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io { path: path.display().to_string(), source: e })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EvalError::FileFormat {
                path: path.display().to_string(),
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

pub fn evaluate_files(predictions: &Path, gold: &Path) -> Result<MetricReport, EvalError> {
    let preds: Vec<Prediction> = read_jsonl(predictions)?;
    let gold: Vec<Sample> = read_jsonl(gold)?;
    Ok(evaluate(&preds, &gold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn ex(s: &str, t: TaskKind) -> ExtractionResult {
        extract_json_answer(s, t)
    }

    #[test]
    fn extraction_examples() {
        let r = ex("Sure! {\"answer\": \"Tokyo\"}", TaskKind::QaWrap);
        assert_eq!(r.status, ExtractionStatus::ParsedJson);
        assert_eq!(r.payload, json!({"answer": "Tokyo"}));
        let r = ex("row_number: 3, column_number: 4", TaskKind::Tsd);
        assert_eq!(r.status, ExtractionStatus::RegexFallback);
        assert_eq!(r.payload, json!({"row_number": 3, "column_number": 4}));
        assert_eq!(ex("", TaskKind::Tsd).status, ExtractionStatus::Failed);
        assert_eq!(ex("  \n", TaskKind::Tsd).payload, Value::Null);
        let r = ex("no idea", TaskKind::Tce);
        assert_eq!(r.status, ExtractionStatus::RawText);
    }

    #[test]
    fn last_object_wins_and_nesting_ignored() {
        let r = ex("first {\"answer\": 1} then {\"answer\": {\"x\": 2}} end", TaskKind::QaWrap);
        assert_eq!(r.payload, json!({"answer": {"x": 2}}));
        let r = ex("{ not json {\"answer\": \"}\"}", TaskKind::QaWrap);
        assert_eq!(r.payload, json!({"answer": "}"}));
    }

    #[test]
    fn tsd_scoring() {
        let gold = json!({"row_number": 3, "column_number": 4});
        assert_eq!(score_tsd(&ex("{\"row_number\": 3, \"column_number\": 5}", TaskKind::Tsd), &gold), (true, false));
        assert_eq!(score_tsd(&ex("{\"row_number\": \"3\", \"column_number\": 4}", TaskKind::Tsd), &gold), (true, true));
        assert_eq!(score_tsd(&ex("", TaskKind::Tsd), &gold), (false, false));
        assert_eq!(score_tsd(&ex("3 rows and 4 columns", TaskKind::Tsd), &gold), (false, false));
    }

    #[test]
    fn cell_accuracy() {
        let gold = cell_entries(&json!({"cells": [{"position": [1, 2], "value": "b"}, {"position": [2, 1], "value": "c"}]}));
        let same = gold.clone();
        assert_eq!(score_cell_accuracy(&same, &gold, KeyedBy::Position), 1.0);
        let half = cell_entries(&json!({"cells": [{"position": [1, 2], "value": " B "}, {"position": [2, 1], "value": "x"}]}));
        assert_eq!(score_cell_accuracy(&half, &gold, KeyedBy::Position), 0.5);
        let tcl = cell_entries(&json!({"cells": [{"value": "C", "position": "(2, 1)"}]}));
        assert_eq!(score_cell_accuracy(&tcl, &gold, KeyedBy::Value), 0.5);
    }

    #[test]
    fn set_f1_arithmetic() {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<HashSet<_>>();
        let r = score_set_f1(&s(&["A"]), &s(&["A", "B"]));
        assert_eq!((r.precision, r.recall), (1.0, 0.5));
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(score_set_f1(&s(&[]), &s(&[])).f1, 1.0);
        let r = score_set_f1(&s(&["A", "C"]), &s(&["A", "B"]));
        assert_eq!((r.precision, r.recall, r.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn mcd_claim_without_regions_is_wrong() {
        let gold = json!({"has_merged": false, "regions": []});
        assert_eq!(score_mcd(&ex("{\"has_merged\": false, \"regions\": []}", TaskKind::Mcd), &gold).f1, 1.0);
        assert_eq!(score_mcd(&ex("has_merged: true", TaskKind::Mcd), &gold).f1, 0.0);
        assert_eq!(score_mcd(&ex("nothing here", TaskKind::Mcd), &gold).f1, 0.0);
        assert_eq!(score_mcd(&ex("{}", TaskKind::Mcd), &gold).f1, 0.0);
        assert_eq!(score_mcd(&ex("{\"has_merged\": false}", TaskKind::Mcd), &gold).f1, 1.0);
    }

    #[test]
    fn rce_per_line() {
        let gold = json!({"rows": {"1": ["a", "b"], "2": ["c", "d"]}});
        let (rows, f) = score_rce(&ex("{\"rows\": {\"1\": [\"a\", \"b\"], \"2\": [\"c\", \"x\"]}}", TaskKind::Rce), &gold);
        assert!(rows);
        assert_eq!(f, vec![1.0, 0.5]);
    }

    #[test]
    fn qa_matching_rules() {
        assert!(qa_answers_match(&json!("1,234"), &json!("1234.0000001")));
        assert!(qa_answers_match(&json!("45%"), &json!(45)));
        assert!(qa_answers_match(&json!(["b", "a"]), &json!(["A", "B"])));
        assert!(!qa_answers_match(&json!(["a", "a"]), &json!(["a", "b"])));
        assert!(qa_answers_match(&json!(" Entailed. "), &json!("entailed")));
        assert!(!qa_answers_match(&json!("refuted"), &json!("entailed")));
    }

    fn unit(task: TaskKind, answer: Value) -> Turn {
        Turn {
            sample_id: format!("{task}-1"),
            task,
            request: String::new(),
            gold_response: answer.to_string(),
            gold_answer: answer,
            meta: Default::default(),
        }
    }

    #[test]
    fn gold_replay_is_perfect() {
        let mut tr = unit(TaskKind::Tr, json!({"answer": "| a | b |\n| --- | --- |\n| 1 | 2 |"}));
        tr.meta.format = Some(TableFormat::Markdown);
        let mut bleu_qa = unit(TaskKind::QaWrap, json!({"answer": "the table lists two rows."}));
        bleu_qa.meta.metric = Some(QaMetric::Bleu);
        for u in [
            unit(TaskKind::Tsd, json!({"row_number": 2, "column_number": 3})),
            unit(TaskKind::Tce, json!({"cells": [{"position": [1, 1], "value": "a"}]})),
            unit(TaskKind::Tcl, json!({"cells": [{"value": "a", "position": [1, 1]}]})),
            unit(TaskKind::Mcd, json!({"has_merged": true, "regions": [[[1, 1], [1, 2]]]})),
            unit(TaskKind::Rce, json!({"columns": {"2": ["x", "y"]}})),
            tr,
            unit(TaskKind::QaWrap, json!({"answer": "42"})),
            bleu_qa,
        ] {
            let s = score_sample(&u, &u.gold_response);
            for (k, v) in &s.components {
                if k.ends_with("_sum") || k.ends_with("_lines") || k == "total" || k == "correct" && u.task != TaskKind::QaWrap {
                    continue;
                }
                let want = if k == "bleu" { 100.0 } else { 1.0 };
                assert!((v - want).abs() < 1e-9, "{} {k}={v}", u.task);
            }
        }
    }

    #[test]
    fn missing_predictions_count_as_failed() {
        let gold: Vec<Sample> = (0..10)
            .map(|i| Sample {
                sample_id: format!("TSD-eval-{i}"),
                table_id: "t".into(),
                task: TaskKind::Tsd,
                image_ref: String::new(),
                request: String::new(),
                gold_response: "{\"row_number\":1,\"column_number\":1}".into(),
                gold_answer: json!({"row_number": 1, "column_number": 1}),
                turns: None,
                meta: Default::default(),
            })
            .collect();
        let r = evaluate(&[], &gold);
        assert_eq!(r.counts.evaluated, 10);
        assert_eq!(r.counts.extraction_failed, 10);
        assert_eq!(r.per_task[&TaskKind::Tsd]["row_accuracy"], 0.0);
        let preds: Vec<Prediction> = gold
            .iter()
            .map(|g| Prediction { sample_id: g.sample_id.clone(), response: g.gold_response.clone() })
            .chain([Prediction { sample_id: "other".into(), response: "x".into() }])
            .collect();
        let r = evaluate(&preds, &gold);
        assert_eq!(r.per_task[&TaskKind::Tsd]["row_accuracy"], 1.0);
        assert_eq!(r.counts.skipped, 1);
        let mut rev = preds.clone();
        rev.reverse();
        assert_eq!(evaluate(&rev, &gold), r);
    }
}
