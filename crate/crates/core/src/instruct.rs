//! Instruction templates and JSON output hints, combined at random into
//! the request text of each sample.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write as _;
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::Deserialize;

use crate::tasks::TaskKind;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub id: String,
    pub task: TaskKind,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatHint {
    pub id: String,
    pub body: String,
}

#[derive(Debug, thiserror::Error)]
pub enum InstructError {
    #[error("template pool: {0}")]
    PoolFormat(String),
    #[error("duplicate template id `{0}`")]
    DuplicateId(String),
    #[error("pool has no {what} for task {task}")]
    MissingMandatoryDefault { task: TaskKind, what: &'static str },
    #[error("template `{template_id}` needs a value for {{{placeholder}}}")]
    MissingPlaceholder { template_id: String, placeholder: String },
    #[error("expansion hook: {0}")]
    Hook(String),
    #[error("reading pool: {0}")]
    Io(#[from] std::io::Error),
}

/// Name of the placeholder that positions the hint inside a template.
pub const FORMAT_HINT: &str = "format_hint";

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([a-z_]+)\}").unwrap())
}

/// Placeholder names referenced by `body`, in order of first use.
pub fn placeholders(body: &str) -> Vec<String> {
    let mut seen = Vec::new();
    for c in placeholder_re().captures_iter(body) {
        let name = c[1].to_string();
        if !seen.contains(&name) {
            seen.push(name);
        }
    }
    seen
}

fn check_template(t: &Template) -> Result<(), InstructError> {
    if t.body.trim().is_empty() {
        return Err(InstructError::PoolFormat(format!("template `{}` has an empty body", t.id)));
    }
    let allowed = t.task.placeholders();
    for p in placeholders(&t.body) {
        if p != FORMAT_HINT && !allowed.contains(&p.as_str()) {
            return Err(InstructError::PoolFormat(format!(
                "template `{}` uses {{{p}}}, which {} does not define",
                t.id, t.task
            )));
        }
    }
    Ok(())
}

fn check_hint(task: TaskKind, h: &FormatHint) -> Result<(), InstructError> {
    for key in task.answer_keys() {
        if !h.body.contains(key) {
            return Err(InstructError::PoolFormat(format!("hint `{}` does not mention the key `{key}`", h.id)));
        }
    }
    Ok(())
}

/// Built-in fallback used for a task the pool has nothing for.
pub fn mandatory_default(task: TaskKind) -> (Template, FormatHint) {
    let (body, hint) = match task {
        TaskKind::Tsd => (
            "Determine the row number and column number of the given table.",
            "Output the final answer in JSON format: {\"row_number\": m, \"column_number\": n}.",
        ),
        TaskKind::Tce => (
            "Extract the table cells at the following positions (row_id, column_id): {cells}.",
            "Output the final answer in JSON format: {\"cells\": [{\"position\": [row_id, column_id], \"value\": \"...\"}]}.",
        ),
        TaskKind::Tcl => (
            "Find the positions of the following cells in the table: {cells}.",
            "Output the final answer in JSON format: {\"cells\": [{\"value\": \"...\", \"position\": [row_id, column_id]}]}.",
        ),
        TaskKind::Mcd => (
            "Determine whether the table contains merged cells and give the top-left and bottom-right positions of each merged region.",
            "Output the final answer in JSON format: {\"has_merged\": true/false, \"regions\": [[[r1, c1], [r2, c2]]]}.",
        ),
        TaskKind::Rce => (
            "Extract all cells in the following target {cells}.",
            "Output the final answer in JSON format: {\"rows\": {\"id\": [cells]}} or {\"columns\": {\"id\": [cells]}}.",
        ),
        TaskKind::Tr => (
            "Recognize the table in the image and return it in {format_name} format.",
            "Output the final answer in JSON format: {\"answer\": \"<table text>\"}.",
        ),
        TaskKind::QaWrap => (
            "Answer the request based on the table image.\n{question}",
            "Output the final answer in JSON format: {\"answer\": \"...\"}.",
        ),
    };
    let key = task.pool_key();
    (
        Template { id: format!("{key}-default"), task, body: body.into() },
        FormatHint { id: format!("{key}-default-hint"), body: hint.into() },
    )
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    id: String,
    body: String,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSection {
    #[serde(default)]
    templates: Vec<RawEntry>,
    #[serde(default)]
    hints: Vec<RawEntry>,
}

/// Immutable once built; every operation on it is read-only.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TemplatePool {
    templates: BTreeMap<TaskKind, Vec<Template>>,
    hints: BTreeMap<TaskKind, Vec<FormatHint>>,
}

impl TemplatePool {
    /// A pool with no entries; requests fall back to the mandatory defaults.
    pub fn empty() -> Self {
        Self::default()
    }

    /// The pool shipped with the crate.
    pub fn bundled() -> &'static TemplatePool {
        static POOL: OnceLock<TemplatePool> = OnceLock::new();
        POOL.get_or_init(|| {
            TemplatePool::from_toml_str(include_str!("../assets/default_pool.toml"))
                .expect("bundled pool is valid")
        })
    }

    /// Parses and validates a pool. Every built-in task needs at least one
    /// template and one hint.
    pub fn from_toml_str(src: &str) -> Result<Self, InstructError> {
        let raw: BTreeMap<String, RawSection> =
            toml::from_str(src).map_err(|e| InstructError::PoolFormat(e.to_string()))?;
        let mut pool = TemplatePool::default();
        let mut ids = HashSet::new();
        for (key, section) in raw {
            let task = TaskKind::from_pool_key(&key)
                .ok_or_else(|| InstructError::PoolFormat(format!("unknown task section [{key}]")))?;
            for e in section.templates {
                if !ids.insert(e.id.clone()) {
                    return Err(InstructError::DuplicateId(e.id));
                }
                let t = Template { id: e.id, task, body: e.body };
                check_template(&t)?;
                pool.templates.entry(task).or_default().push(t);
            }
            for e in section.hints {
                if !ids.insert(e.id.clone()) {
                    return Err(InstructError::DuplicateId(e.id));
                }
                let h = FormatHint { id: e.id, body: e.body };
                check_hint(task, &h)?;
                pool.hints.entry(task).or_default().push(h);
            }
        }
        for task in TaskKind::ALL {
            if pool.templates(task).is_empty() {
                return Err(InstructError::MissingMandatoryDefault { task, what: "template" });
            }
            if pool.hints(task).is_empty() {
                return Err(InstructError::MissingMandatoryDefault { task, what: "format hint" });
            }
        }
        Ok(pool)
    }

    pub fn templates(&self, task: TaskKind) -> &[Template] {
        self.templates.get(&task).map_or(&[], Vec::as_slice)
    }

    pub fn hints(&self, task: TaskKind) -> &[FormatHint] {
        self.hints.get(&task).map_or(&[], Vec::as_slice)
    }

    /// Adds a template after the same validation `load_pool` applies.
    pub fn add_template(&mut self, t: Template) -> Result<(), InstructError> {
        check_template(&t)?;
        if self.all_ids().contains(t.id.as_str()) {
            return Err(InstructError::DuplicateId(t.id));
        }
        self.templates.entry(t.task).or_default().push(t);
        Ok(())
    }

    pub fn add_hint(&mut self, task: TaskKind, h: FormatHint) -> Result<(), InstructError> {
        check_hint(task, &h)?;
        if self.all_ids().contains(h.id.as_str()) {
            return Err(InstructError::DuplicateId(h.id));
        }
        self.hints.entry(task).or_default().push(h);
        Ok(())
    }

    fn all_ids(&self) -> BTreeSet<&str> {
        let t = self.templates.values().flatten().map(|t| t.id.as_str());
        let h = self.hints.values().flatten().map(|h| h.id.as_str());
        t.chain(h).collect()
    }
}

pub fn load_pool(path: &Path) -> Result<TemplatePool, InstructError> {
    TemplatePool::from_toml_str(&std::fs::read_to_string(path)?)
}

/// Picks one template and one hint uniformly from a seeded generator and
/// fills in `inputs`. The hint goes where `{format_hint}` appears, or after
/// the template on its own line when the template has no such marker.
pub fn build_request(
    pool: &TemplatePool,
    task: TaskKind,
    inputs: &BTreeMap<String, String>,
    seed: u64,
) -> Result<String, InstructError> {
    let fallback;
    let (templates, hints) = match (pool.templates(task), pool.hints(task)) {
        (t, h) if !t.is_empty() && !h.is_empty() => (t, h),
        _ => {
            fallback = mandatory_default(task);
            (std::slice::from_ref(&fallback.0), std::slice::from_ref(&fallback.1))
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let template = &templates[rng.gen_range(0..templates.len())];
    let hint = &hints[rng.gen_range(0..hints.len())];
    fill(template, &hint.body, inputs)
}

fn fill(template: &Template, hint: &str, inputs: &BTreeMap<String, String>) -> Result<String, InstructError> {
    let mut missing = None;
    let mut inline_hint = false;
    let body = placeholder_re().replace_all(&template.body, |c: &regex::Captures| {
        let name = &c[1];
        if name == FORMAT_HINT {
            inline_hint = true;
            return hint.to_string();
        }
        match inputs.get(name) {
            Some(v) => v.clone(),
            None => {
                missing.get_or_insert_with(|| name.to_string());
                String::new()
            }
        }
    });
    if let Some(placeholder) = missing {
        return Err(InstructError::MissingPlaceholder { template_id: template.id.clone(), placeholder });
    }
    Ok(if inline_hint { body.into_owned() } else { format!("{body}\n{hint}") })
}

/// Runs an external generator to propose more templates for `task`. The
/// command gets the current bodies on stdin, one per line with newlines
/// escaped as `\n`, and prints candidates the same way. Candidates that
/// fail placeholder validation or repeat an existing body are dropped.
pub fn expand_with_command(pool: &TemplatePool, task: TaskKind, command: &str) -> Result<Vec<Template>, InstructError> {
    let mut parts = command.split_whitespace();
    let program = parts.next().ok_or_else(|| InstructError::Hook("empty command".into()))?;
    let mut child = Command::new(program)
        .args(parts)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| InstructError::Hook(format!("cannot run `{program}`: {e}")))?;
    let input: String = pool
        .templates(task)
        .iter()
        .map(|t| format!("{}\n", t.body.replace('\n', "\\n")))
        .collect();
    {
        let mut stdin = child.stdin.take().expect("piped stdin");
        stdin.write_all(input.as_bytes())?;
    }
    let out = child.wait_with_output()?;
    if !out.status.success() {
        return Err(InstructError::Hook(format!("`{program}` exited with {}", out.status)));
    }
    let mut seen: HashSet<String> = pool.templates(task).iter().map(|t| t.body.clone()).collect();
    let mut accepted = Vec::new();
    for line in String::from_utf8_lossy(&out.stdout).lines() {
        let body = line.trim().replace("\\n", "\n");
        if body.is_empty() || !seen.insert(body.clone()) {
            continue;
        }
        let t = Template { id: format!("{}-x{:03}", task.pool_key(), accepted.len() + 1), task, body };
        match check_template(&t) {
            Ok(()) => accepted.push(t),
            Err(e) => log::debug!("dropping generated template: {e}"),
        }
    }
    Ok(accepted)
}
