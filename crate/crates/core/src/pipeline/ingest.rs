use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{parse, TableFormat};
use crate::table::Table;

/// How a corpus file is read. `json` accepts one table object, an array
/// of them, or (for `.jsonl`) one table per line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Html,
    Markdown,
    Latex,
    Json,
}

impl CorpusFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "json" | "jsonl" => Some(CorpusFormat::Json),
            _ => TableFormat::from_extension(&ext).map(|f| match f {
                TableFormat::Html => CorpusFormat::Html,
                TableFormat::Markdown => CorpusFormat::Markdown,
                TableFormat::Latex => CorpusFormat::Latex,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedInput {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    /// Valid tables with unique, file-name-safe `source_id`s.
    pub tables: Vec<Table>,
    pub skipped: Vec<SkippedInput>,
}

/// Keeps `[A-Za-z0-9._-]`, replaces everything else with `_`.
pub fn sanitize_id(s: &str) -> String {
    let id: String = s
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect();
    let id = id.trim_start_matches('.').to_string();
    if id.is_empty() {
        "table".into()
    } else {
        id
    }
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else if CorpusFormat::from_path(&path).is_some() {
            out.push(path);
        }
    }
    Ok(())
}

fn read_file(path: &Path, format: Option<CorpusFormat>) -> Vec<Result<Table, String>> {
    let Some(format) = format.or_else(|| CorpusFormat::from_path(path)) else {
        return vec![Err("unrecognized file extension".into())];
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return vec![Err(e.to_string())],
    };
    let checked = |t: Table| t.validate().map(|_| t).map_err(|v| v.to_string());
    let markup = |f: TableFormat| vec![parse(&text, f).map(|(t, _)| t).map_err(|e| e.to_string())];
    match format {
        CorpusFormat::Html => markup(TableFormat::Html),
        CorpusFormat::Markdown => markup(TableFormat::Markdown),
        CorpusFormat::Latex => markup(TableFormat::Latex),
        CorpusFormat::Json if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("jsonl")) => text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str::<Table>(l).map_err(|e| format!("line {}: {e}", i + 1)).and_then(checked)
            })
            .collect(),
        CorpusFormat::Json => match serde_json::from_str::<serde_json::Value>(&text) {
            Ok(serde_json::Value::Array(items)) => items
                .into_iter()
                .enumerate()
                .map(|(i, v)| serde_json::from_value::<Table>(v).map_err(|e| format!("item {i}: {e}")).and_then(checked))
                .collect(),
            Ok(v) => vec![serde_json::from_value::<Table>(v).map_err(|e| e.to_string()).and_then(checked)],
            Err(e) => vec![Err(e.to_string())],
        },
    }
}

/// Reads every source. A source may be a file or a directory (searched
/// recursively for known extensions, in sorted order). Unreadable or
/// invalid tables are skipped and reported; a missing source is an error.
pub fn ingest(sources: &[(PathBuf, Option<CorpusFormat>)]) -> Result<Ingested> {
    let mut files = Vec::new();
    for (path, format) in sources {
        if path.is_dir() {
            let mut found = Vec::new();
            collect_files(path, &mut found)?;
            found.sort();
            files.extend(found.into_iter().map(|p| (p, *format)));
        } else if path.is_file() {
            files.push((path.clone(), *format));
        } else {
            return Err(Error::Config(format!("corpus path {} does not exist", path.display())));
        }
    }
    let parsed: Vec<Vec<Result<Table, String>>> = files.par_iter().map(|(p, f)| read_file(p, *f)).collect();

    let mut out = Ingested::default();
    let mut used = HashSet::new();
    for ((path, _), results) in files.iter().zip(parsed) {
        let stem = sanitize_id(&path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
        let many = results.len() > 1;
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(mut t) => {
                    let base = if !t.source_id.is_empty() {
                        sanitize_id(&t.source_id)
                    } else if many {
                        format!("{stem}-{i:04}")
                    } else {
                        stem.clone()
                    };
                    let mut id = base.clone();
                    let mut k = 2;
                    while !used.insert(id.clone()) {
                        id = format!("{base}-{k}");
                        k += 1;
                    }
                    t.source_id = id;
                    out.tables.push(t);
                }
                Err(reason) => {
                    log::warn!("skipping {}: {reason}", path.display());
                    out.skipped.push(SkippedInput { path: path.display().to_string(), reason });
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_directory() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        std::fs::write(p.join("a.html"), "<table><tr><td>1</td></tr></table>").unwrap();
        std::fs::write(p.join("b.md"), "| x |\n| --- |\n| y |").unwrap();
        std::fs::write(p.join("c.tex"), "\\begin{tabular}{c}\n1 \\\\\n\\end{tabular}").unwrap();
        std::fs::write(p.join("bad.html"), "<table><tr><td>unclosed").unwrap();
        std::fs::write(p.join("notes.txt"), "ignored").unwrap();
        std::fs::create_dir(p.join("sub")).unwrap();
        let t = Table::from_rows(&[vec!["q"]]);
        std::fs::write(p.join("sub/many.jsonl"), format!("{0}\n{0}\nnot json\n", serde_json::to_string(&t).unwrap()))
            .unwrap();
        let got = ingest(&[(p.to_path_buf(), None)]).unwrap();
        let ids: Vec<&str> = got.tables.iter().map(|t| t.source_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c", "many-0000", "many-0001"]);
        assert_eq!(got.skipped.len(), 2);
    }

    #[test]
    fn duplicate_stems_get_suffixes() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("x")).unwrap();
        std::fs::write(dir.path().join("t.html"), "<table><tr><td>1</td></tr></table>").unwrap();
        std::fs::write(dir.path().join("x/t.html"), "<table><tr><td>2</td></tr></table>").unwrap();
        let got = ingest(&[(dir.path().to_path_buf(), None)]).unwrap();
        let ids: Vec<&str> = got.tables.iter().map(|t| t.source_id.as_str()).collect();
        assert_eq!(ids, ["t", "t-2"]);
    }

    #[test]
    fn missing_source_is_fatal() {
        assert!(matches!(ingest(&[(PathBuf::from("/no/such/dir"), None)]), Err(Error::Config(_))));
    }

    #[test]
    fn ids_are_sanitized() {
        assert_eq!(sanitize_id("my table/1"), "my_table_1");
        assert_eq!(sanitize_id("..x"), "x");
        assert_eq!(sanitize_id(""), "table");
    }
}
