//! End-to-end runs: corpus in, benchmark directory out, and the
//! evaluation and statistics passes over it.
//!
//! A synthesis run writes
//!
//! ```text
//! out/
//!   train.jsonl      single-turn samples and conversations
//!   eval.jsonl
//!   images/<table_id>.svg  (and .png when a rasterizer is configured)
//!   manifest.json
//! ```
//!
//! Every byte depends only on the corpus, the config and the seed.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{evaluate_files, read_jsonl, MetricReport};
use crate::format::{serialize, TableFormat};
use crate::table::Table;
use crate::instruct::{load_pool, TemplatePool};
use crate::render::{
    rasterize, render_svg, sample_style_with, CommandRasterizer, Rasterizer, StyleFamily, StyleMix, StyleRanges,
    StyleSpec,
};
use crate::tasks::{derive_seed, synthesize, QaPair, Sample, Split, SynthConfig, TableImage, TaskCounts, TaskKind};

mod ingest;
mod stats;

pub use ingest::{ingest, sanitize_id, CorpusFormat, Ingested, SkippedInput};
pub use stats::{cmd_stats, stats, SizeBucket, StatsReport, TaskLengths};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSource {
    pub path: PathBuf,
    /// Inferred from each file's extension when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<CorpusFormat>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RasterBackend {
    /// In-process renderer (needs the `resvg` feature).
    #[default]
    Resvg,
    /// External converter given by `command`.
    Command,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RasterConfig {
    #[serde(default)]
    pub backend: RasterBackend,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default = "default_dpi")]
    pub dpi: u32,
    /// Whether the external command may run several copies at once.
    #[serde(default)]
    pub concurrent_safe: bool,
}

fn default_dpi() -> u32 {
    96
}

impl RasterConfig {
    pub fn backend(&self) -> Result<Box<dyn Rasterizer>> {
        match self.backend {
            RasterBackend::Command => {
                let command = self
                    .command
                    .clone()
                    .ok_or_else(|| Error::Config("rasterizer backend `command` needs `command`".into()))?;
                Ok(Box::new(CommandRasterizer { command, concurrent_safe: self.concurrent_safe }))
            }
            #[cfg(feature = "resvg")]
            RasterBackend::Resvg => Ok(Box::new(crate::render::ResvgRasterizer::default())),
            #[cfg(not(feature = "resvg"))]
            RasterBackend::Resvg => Err(Error::Config("built without the `resvg` feature".into())),
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Pipeline config file (TOML). Relative paths are resolved against the
/// directory holding the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub corpus: Vec<CorpusSource>,
    /// JSON lines of `{table_id, input, output, split?, metric?}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qa_pairs: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_pool: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style_ranges: Option<PathBuf>,
    #[serde(default)]
    pub style_mix: StyleMix,
    /// `synth.master_seed` is ignored; the top-level seed is used.
    #[serde(default)]
    pub synth: SynthConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rasterizer: Option<RasterConfig>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn from_toml_str(src: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(src).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&src, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.corpus.is_empty() {
            return Err(Error::Config("no corpus sources given".into()));
        }
        let mut paths: Vec<&PathBuf> = self.corpus.iter().map(|c| &c.path).collect();
        paths.extend(self.qa_pairs.iter().chain(&self.template_pool).chain(&self.style_ranges));
        for p in paths {
            if !self.resolve(p).exists() {
                return Err(Error::Config(format!("{} does not exist", self.resolve(p).display())));
            }
        }
        self.style_mix.validate()?;
        self.synth.validate().map_err(Error::Config)?;
        if let Some(r) = &self.rasterizer {
            if r.dpi == 0 {
                return Err(Error::Config("rasterizer dpi must be positive".into()));
            }
            r.backend()?;
        }
        Ok(())
    }
}

/// Everything about a run that shapes its output. Worker count is not
/// part of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub master_seed: u64,
    pub corpus: Vec<CorpusSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qa_pairs: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_pool: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style_ranges: Option<PathBuf>,
    pub style_mix: StyleMix,
    pub synth: SynthConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rasterizer: Option<RasterConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableCounts {
    pub ingested: usize,
    pub skipped: usize,
    /// Tables referenced by at least one sample, each with one image.
    pub rendered: usize,
}

/// Reproducibility record of a synthesis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub toolkit: String,
    pub version: String,
    pub config: ConfigEcho,
    pub tables: TableCounts,
    pub skipped_inputs: Vec<SkippedInput>,
    /// Single-turn units per task and split; conversation turns count
    /// toward their own task.
    pub counts: BTreeMap<TaskKind, TaskCounts>,
    pub conversations: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub shortfall: BTreeMap<TaskKind, TaskCounts>,
    pub skipped_qa_pairs: usize,
    /// Achieved share of rendered tables per family.
    pub style_mix: BTreeMap<StyleFamily, f64>,
    /// Achieved share of TR units per target format.
    pub format_mix: BTreeMap<TableFormat, f64>,
    /// Shape of the JSON answer expected for each task.
    pub answer_schemas: BTreeMap<TaskKind, String>,
    /// SHA-256 of every emitted file, by path relative to the output dir.
    pub files: BTreeMap<String, String>,
}

pub fn answer_schemas() -> BTreeMap<TaskKind, String> {
    TaskKind::ALL
        .into_iter()
        .map(|t| {
            let s = match t {
                TaskKind::Tsd => r#"{"row_number": int, "column_number": int}"#,
                TaskKind::Tce => r#"{"cells": [{"position": [row_id, column_id], "value": str}]}"#,
                TaskKind::Tcl => r#"{"cells": [{"value": str, "position": [row_id, column_id]}]}"#,
                TaskKind::Mcd => r#"{"has_merged": bool, "regions": [[[top, left], [bottom, right]]]}"#,
                TaskKind::Rce => r#"{"rows": {"<row_id>": [str]}} or {"columns": {"<column_id>": [str]}}"#,
                TaskKind::Tr => r#"{"answer": "<table as HTML, Markdown or LaTeX>"}"#,
                TaskKind::QaWrap => r#"{"answer": str or [str]}"#,
            };
            (t, s.to_string())
        })
        .collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    /// Paths whose digest does not match the file on disk.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|(rel, digest)| std::fs::read(dir.join(rel)).map(|b| &sha256_hex(&b) != *digest).unwrap_or(true))
            .map(|(rel, _)| rel.clone())
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn shares<K: Ord + Copy>(counts: &BTreeMap<K, usize>) -> BTreeMap<K, f64> {
    let total: usize = counts.values().sum();
    counts.iter().map(|(k, &n)| (*k, if total == 0 { 0.0 } else { n as f64 / total as f64 })).collect()
}

fn write_file(dir: &Path, rel: &str, bytes: &[u8], digests: &mut BTreeMap<String, String>) -> Result<()> {
    let path = dir.join(rel);
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    digests.insert(rel.to_string(), sha256_hex(bytes));
    Ok(())
}

fn jsonl(samples: &[Sample]) -> Vec<u8> {
    let mut out = Vec::new();
    for s in samples {
        serde_json::to_writer(&mut out, s).expect("samples serialize");
        out.push(b'\n');
    }
    out
}

/// Runs a full synthesis with `workers` threads (0 means one per core).
/// The output is identical for every worker count.
pub fn cmd_synth(cfg: &PipelineConfig, workers: usize) -> Result<Manifest> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| synth_in_pool(cfg))
}

fn synth_in_pool(cfg: &PipelineConfig) -> Result<Manifest> {
    cfg.validate()?;
    let sources: Vec<(PathBuf, Option<CorpusFormat>)> =
        cfg.corpus.iter().map(|c| (cfg.resolve(&c.path), c.format)).collect();
    let Ingested { tables, skipped } = ingest(&sources)?;
    log::info!("ingested {} tables, skipped {}", tables.len(), skipped.len());
    let qa: Vec<QaPair> = match &cfg.qa_pairs {
        Some(p) => read_jsonl(&cfg.resolve(p))?,
        None => Vec::new(),
    };
    let owned_pool;
    let templates: &TemplatePool = match &cfg.template_pool {
        Some(p) => {
            owned_pool = load_pool(&cfg.resolve(p))?;
            &owned_pool
        }
        None => TemplatePool::bundled(),
    };
    let ranges = match &cfg.style_ranges {
        Some(p) => StyleRanges::load(&cfg.resolve(p))?,
        None => StyleRanges::default(),
    };
    let raster = cfg.rasterizer.as_ref().map(RasterConfig::backend).transpose()?;
    let ext = if raster.is_some() { "png" } else { "svg" };

    let styles: Vec<StyleSpec> = tables
        .par_iter()
        .map(|t| sample_style_with(&cfg.style_mix, &ranges, derive_seed(cfg.master_seed, &["style", &t.source_id])))
        .collect::<Result<_, _>>()?;
    let images: BTreeMap<String, TableImage> = tables
        .iter()
        .zip(&styles)
        .map(|(t, s)| {
            let img = TableImage { image_ref: format!("images/{}.{ext}", t.source_id), style_family: Some(s.family) };
            (t.source_id.clone(), img)
        })
        .collect();

    let mut synth_cfg = cfg.synth.clone();
    synth_cfg.master_seed = cfg.master_seed;
    let out = synthesize(&tables, &qa, &images, templates, &synth_cfg)?;

    let used: BTreeSet<&str> = out.train.iter().chain(&out.eval).map(|s| s.table_id.as_str()).collect();
    let to_render: Vec<usize> = (0..tables.len()).filter(|&i| used.contains(tables[i].source_id.as_str())).collect();
    let dpi = cfg.rasterizer.as_ref().map_or(96, |r| r.dpi);
    let rendered: Vec<(String, String, Option<Vec<u8>>)> = to_render
        .par_iter()
        .map(|&i| {
            let svg = render_svg(&tables[i], &styles[i])?;
            let png = match &raster {
                Some(r) => Some(rasterize(&svg, dpi, Some(r.as_ref()))?),
                None => None,
            };
            Ok((tables[i].source_id.clone(), svg, png))
        })
        .collect::<Result<_>>()?;

    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir.join("images")).map_err(|e| Error::io(dir, e))?;
    let mut files = BTreeMap::new();
    write_file(dir, "train.jsonl", &jsonl(&out.train), &mut files)?;
    write_file(dir, "eval.jsonl", &jsonl(&out.eval), &mut files)?;
    let mut style_counts: BTreeMap<StyleFamily, usize> = BTreeMap::new();
    for (id, svg, png) in &rendered {
        write_file(dir, &format!("images/{id}.svg"), svg.as_bytes(), &mut files)?;
        if let Some(png) = png {
            write_file(dir, &format!("images/{id}.png"), png, &mut files)?;
        }
        if let Some(img) = images.get(id).and_then(|i| i.style_family) {
            *style_counts.entry(img).or_default() += 1;
        }
    }

    let report = stats(&out.train.iter().chain(&out.eval).cloned().collect::<Vec<_>>());
    let manifest = Manifest {
        toolkit: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: ConfigEcho {
            master_seed: cfg.master_seed,
            corpus: cfg.corpus.clone(),
            qa_pairs: cfg.qa_pairs.clone(),
            template_pool: cfg.template_pool.clone(),
            style_ranges: cfg.style_ranges.clone(),
            style_mix: cfg.style_mix.clone(),
            synth: synth_cfg,
            rasterizer: cfg.rasterizer.clone(),
        },
        tables: TableCounts { ingested: tables.len(), skipped: skipped.len(), rendered: rendered.len() },
        skipped_inputs: skipped,
        counts: report.counts,
        conversations: report.conversations,
        shortfall: out.shortfall,
        skipped_qa_pairs: out.skipped_qa,
        style_mix: shares(&style_counts),
        format_mix: report.format_mix,
        answer_schemas: answer_schemas(),
        files,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let path = dir.join("manifest.json");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Scores a predictions file against a gold samples file and writes the
/// report as JSON.
pub fn cmd_eval(predictions: &Path, gold: &Path, report_path: &Path, workers: usize) -> Result<MetricReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let report = pool.install(|| evaluate_files(predictions, gold))?;
    if let Some(parent) = report_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(report_path, text + "\n").map_err(|e| Error::io(report_path, e))?;
    Ok(report)
}

/// Counts of single-turn units per task and split in `samples`.
pub fn unit_counts(samples: &[Sample]) -> BTreeMap<TaskKind, TaskCounts> {
    let mut m: BTreeMap<TaskKind, TaskCounts> = BTreeMap::new();
    for u in samples.iter().flat_map(Sample::units) {
        let c = m.entry(u.task).or_default();
        match u.meta.split {
            Split::Train => c.train += 1,
            Split::Eval => c.eval += 1,
        }
    }
    m
}

/// Reads one table from a markup or JSON file. The format comes from the
/// extension unless given.
pub fn load_table(path: &Path, format: Option<CorpusFormat>) -> Result<Table> {
    let mut got = ingest(&[(path.to_path_buf(), format)])?;
    match (got.tables.len(), got.skipped.pop()) {
        (1, None) => Ok(got.tables.remove(0)),
        (_, Some(s)) => Err(Error::Config(format!("{}: {}", s.path, s.reason))),
        (n, None) => Err(Error::Config(format!("{}: expected one table, found {n}", path.display()))),
    }
}

/// Renders a single table. `family` pins the style family; otherwise it
/// is drawn from the default mix. Writes PNG when `out` ends in `.png`.
pub fn cmd_render(input: &Path, out: &Path, family: Option<StyleFamily>, seed: u64) -> Result<StyleSpec> {
    let table = load_table(input, None)?;
    let mix = family.map_or_else(StyleMix::default, StyleMix::only);
    let style = sample_style_with(&mix, &StyleRanges::default(), seed)?;
    let svg = render_svg(&table, &style)?;
    let bytes = if out.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
        RasterConfig { backend: RasterBackend::Resvg, command: None, dpi: 96, concurrent_safe: true }
            .backend()
            .and_then(|b| Ok(rasterize(&svg, 96, Some(b.as_ref()))?))?
    } else {
        svg.into_bytes()
    };
    std::fs::write(out, bytes).map_err(|e| Error::io(out, e))?;
    Ok(style)
}

/// Converts a table file to `to`. Strict: malformed input is an error.
pub fn cmd_convert(input: &Path, from: Option<TableFormat>, to: TableFormat) -> Result<String> {
    let format = from.map(|f| match f {
        TableFormat::Html => CorpusFormat::Html,
        TableFormat::Markdown => CorpusFormat::Markdown,
        TableFormat::Latex => CorpusFormat::Latex,
    });
    Ok(serialize(&load_table(input, format)?, to)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::serialize;
    use crate::table::Table;

    fn write_corpus(dir: &Path, n: usize) {
        std::fs::create_dir_all(dir).unwrap();
        for i in 0..n {
            let t = Table::from_rows(&[vec![format!("h{i}"), "b".into()], vec!["c".into(), format!("d{i}")]]);
            std::fs::write(dir.join(format!("t{i:02}.html")), serialize(&t, TableFormat::Html).unwrap()).unwrap();
        }
    }

    fn config(root: &Path, synth: &str) -> PipelineConfig {
        let src = format!("master_seed = 7\noutput_dir = \"out\"\n[[corpus]]\npath = \"corpus\"\n{synth}");
        let mut cfg = PipelineConfig::from_toml_str(&src, root).unwrap();
        cfg.output_dir = root.join("out");
        cfg
    }

    #[test]
    fn ten_tables_tsd_only() {
        let root = tempfile::tempdir().unwrap();
        write_corpus(&root.path().join("corpus"), 10);
        let cfg = config(root.path(), "[synth.counts]\nTSD = { train = 10, eval = 0 }\n");
        let m = cmd_synth(&cfg, 2).unwrap();
        assert_eq!(m.counts[&TaskKind::Tsd], TaskCounts { train: 10, eval: 0 });
        assert_eq!(m.tables.rendered, 10);
        assert_eq!(m.files.keys().filter(|k| k.ends_with(".svg")).count(), 10);
        assert!(m.verify(&cfg.output_dir).is_empty());
        let again = cmd_synth(&cfg, 1).unwrap();
        assert_eq!(again.files, m.files);
    }

    #[test]
    fn malformed_file_is_skipped() {
        let root = tempfile::tempdir().unwrap();
        let corpus = root.path().join("corpus");
        write_corpus(&corpus, 9);
        std::fs::write(corpus.join("broken.html"), "<table><tr><td>x").unwrap();
        let cfg = config(root.path(), "[synth.counts]\nTSD = { train = 9, eval = 0 }\n");
        let m = cmd_synth(&cfg, 0).unwrap();
        assert_eq!(m.tables.ingested, 9);
        assert_eq!(m.tables.skipped, 1);
        assert_eq!(m.counts[&TaskKind::Tsd].train, 9);
    }

    #[test]
    fn config_errors_are_fatal() {
        let root = tempfile::tempdir().unwrap();
        let cfg = config(root.path(), "");
        assert!(matches!(cmd_synth(&cfg, 1), Err(Error::Config(_))));
        assert!(PipelineConfig::from_toml_str("master_seed = 1\nbogus = 2\n", root.path()).is_err());
    }

    #[test]
    fn convert_and_render() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("t.md");
        std::fs::write(&src, "| a | b |\n| --- | --- |\n| 1 | 2 |\n").unwrap();
        let html = cmd_convert(&src, None, TableFormat::Html).unwrap();
        assert!(html.contains("<td>2</td>"), "{html}");
        let out = dir.path().join("t.svg");
        let style = cmd_render(&src, &out, Some(StyleFamily::Excel), 3).unwrap();
        assert_eq!(style.family, StyleFamily::Excel);
        assert!(std::fs::read_to_string(&out).unwrap().contains("<svg "));
        std::fs::write(&src, "| a |\n| b |\n").unwrap();
        assert!(cmd_convert(&src, None, TableFormat::Latex).is_err());
    }

    #[test]
    fn tampering_is_detected() {
        let root = tempfile::tempdir().unwrap();
        write_corpus(&root.path().join("corpus"), 3);
        let cfg = config(root.path(), "[synth.counts]\nTSD = { train = 3, eval = 0 }\n");
        let m = cmd_synth(&cfg, 1).unwrap();
        std::fs::write(cfg.output_dir.join("train.jsonl"), "changed").unwrap();
        assert_eq!(m.verify(&cfg.output_dir), vec!["train.jsonl".to_string()]);
    }
}
