//! Reference implementations used as oracles. None of these call into the
//! library's algorithms; they only share its data types.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};
use tablekit::eval::{Tag, TableTree};
use tablekit::format::TableFormat;
use tablekit::table::{AnchorCell, Table};

// ---------------------------------------------------------------- trees

/// Random ordered tree with 1..=max_nodes nodes. Node k > 0 becomes the
/// last child of a uniformly chosen earlier node.
pub fn random_tree<R: Rng>(rng: &mut R, max_nodes: usize) -> TableTree {
    let n = rng.gen_range(1..=max_nodes);
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for k in 1..n {
        let p = rng.gen_range(0..k);
        children[p].push(k);
    }
    let labels: Vec<TableTree> = (0..n)
        .map(|_| match rng.gen_range(0..4) {
            0 => TableTree::node(Tag::Table, vec![]),
            1 => TableTree::node(Tag::Tr, vec![]),
            _ => {
                let content = ["", "a", "b", "ab", "ba", "abc"].choose(rng).unwrap();
                TableTree::td(content, rng.gen_range(1..=2), rng.gen_range(1..=2))
            }
        })
        .collect();
    fn build(i: usize, children: &[Vec<usize>], labels: &[TableTree]) -> TableTree {
        let mut t = labels[i].clone();
        t.children = children[i].iter().map(|&c| build(c, children, labels)).collect();
        t
    }
    build(0, &children, &labels)
}

struct Flat<'a> {
    nodes: Vec<&'a TableTree>,
    /// anc[i][j]: i is a proper ancestor of j.
    anc: Vec<Vec<bool>>,
    /// left[i][j]: i precedes j in preorder and is not its ancestor.
    left: Vec<Vec<bool>>,
}

fn flatten(t: &TableTree) -> Flat<'_> {
    fn walk<'a>(t: &'a TableTree, parent: Option<usize>, nodes: &mut Vec<&'a TableTree>, parents: &mut Vec<Option<usize>>) {
        let me = nodes.len();
        nodes.push(t);
        parents.push(parent);
        for c in &t.children {
            walk(c, Some(me), nodes, parents);
        }
    }
    let mut nodes = Vec::new();
    let mut parents = Vec::new();
    walk(t, None, &mut nodes, &mut parents);
    let n = nodes.len();
    let mut anc = vec![vec![false; n]; n];
    for j in 0..n {
        let mut p = parents[j];
        while let Some(i) = p {
            anc[i][j] = true;
            p = parents[i];
        }
    }
    let left = (0..n).map(|i| (0..n).map(|j| i < j && !anc[i][j]).collect()).collect();
    Flat { nodes, anc, left }
}

fn lev(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}

/// Relabel cost, restated from the metric definition.
pub fn oracle_relabel(a: &TableTree, b: &TableTree) -> f64 {
    match (a.tag, b.tag) {
        (x, y) if x != y => 1.0,
        (Tag::Td, Tag::Td) => {
            if (a.rowspan, a.colspan) != (b.rowspan, b.colspan) {
                return 1.0;
            }
            let m = a.content.chars().count().max(b.content.chars().count());
            if m == 0 {
                0.0
            } else {
                lev(&a.content, &b.content) as f64 / m as f64
            }
        }
        _ => 0.0,
    }
}

/// Minimum edit distance by enumerating every valid ordered edit mapping:
/// one-to-one pairs preserving ancestry and left-to-right order. Cost is
/// relabels over mapped pairs plus one per unmapped node on either side.
pub fn brute_force_ted(a: &TableTree, b: &TableTree) -> f64 {
    let (fa, fb) = (flatten(a), flatten(b));
    let (n, m) = (fa.nodes.len(), fb.nodes.len());
    let mut best = (n + m) as f64;
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut used = vec![false; m];
    fn go(
        i: usize,
        fa: &Flat,
        fb: &Flat,
        pairs: &mut Vec<(usize, usize)>,
        used: &mut [bool],
        relabel: f64,
        best: &mut f64,
    ) {
        let (n, m) = (fa.nodes.len(), fb.nodes.len());
        if i == n {
            let k = pairs.len();
            let cost = relabel + (n - k) as f64 + (m - k) as f64;
            if cost < *best {
                *best = cost;
            }
            return;
        }
        go(i + 1, fa, fb, pairs, used, relabel, best);
        for j in 0..m {
            if used[j] {
                continue;
            }
            let ok = pairs.iter().all(|&(i2, j2)| {
                fa.anc[i2][i] == fb.anc[j2][j]
                    && fa.anc[i][i2] == fb.anc[j][j2]
                    && fa.left[i2][i] == fb.left[j2][j]
                    && fa.left[i][i2] == fb.left[j][j2]
            });
            if !ok {
                continue;
            }
            used[j] = true;
            pairs.push((i, j));
            let r = oracle_relabel(fa.nodes[i], fb.nodes[j]);
            go(i + 1, fa, fb, pairs, used, relabel + r, best);
            pairs.pop();
            used[j] = false;
        }
    }
    go(0, &fa, &fb, &mut pairs, &mut used, 0.0, &mut best);
    best
}

pub fn tree_size(t: &TableTree) -> usize {
    1 + t.children.iter().map(tree_size).sum::<usize>()
}

// --------------------------------------------------------------- tables

const VOCAB: &[&str] = &[
    "north", "South", "total", "2019", "3.5", "-7", "1,200", "n/a", "Q4", "é", "日本", "a&b", "x<y", "p>q", "50%",
    "$3", "#1", "under_score", "{x}", "a|b", "c\\d", "~", "^", "\"q\"", "it's", "--", "x/y", "(1)",
];

fn random_content<R: Rng>(rng: &mut R) -> String {
    if rng.gen_bool(0.1) {
        return String::new();
    }
    let k = rng.gen_range(1..=3);
    (0..k).map(|_| *VOCAB.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// Options for [`random_valid_table`].
#[derive(Clone, Copy)]
pub struct Gen {
    pub max_rows: usize,
    pub max_cols: usize,
    pub spans: bool,
    pub fmt: Option<TableFormat>,
}

/// A random valid table. Spans are proposed at random and kept only when
/// the whole rectangle is free. With `fmt` set, header flags and caption
/// are limited to what that format can carry.
pub fn random_valid_table<R: Rng>(rng: &mut R, g: Gen) -> Table {
    let rows = rng.gen_range(1..=g.max_rows);
    let cols = rng.gen_range(1..=g.max_cols);
    let mut free = vec![vec![true; cols]; rows];
    let mut anchors = Vec::new();
    let header_first = rng.gen_bool(0.5);
    for r in 0..rows {
        for c in 0..cols {
            if !free[r][c] {
                continue;
            }
            let (mut rs, mut cs) = (1, 1);
            if g.spans && rng.gen_bool(0.25) {
                let (pr, pc) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
                let fits = r + pr <= rows
                    && c + pc <= cols
                    && (r..r + pr).all(|rr| (c..c + pc).all(|cc| free[rr][cc]));
                if fits {
                    (rs, cs) = (pr, pc);
                }
            }
            for row in free.iter_mut().skip(r).take(rs) {
                for cell in row.iter_mut().skip(c).take(cs) {
                    *cell = false;
                }
            }
            let mut a = AnchorCell::new(r + 1, c + 1, random_content(rng)).span(rs, cs);
            a.is_header = match g.fmt {
                Some(TableFormat::Markdown) => r == 0,
                Some(TableFormat::Latex) => false,
                _ => (header_first && r == 0) || rng.gen_bool(0.05),
            };
            anchors.push(a);
        }
    }
    let mut t = Table::new(rows, cols, anchors);
    if matches!(g.fmt, None | Some(TableFormat::Html)) && rng.gen_bool(0.3) {
        t.caption = Some(format!("Caption {}", random_content(rng)).trim().to_string());
    }
    t
}

/// For every grid position, the index of the anchor covering it, found by
/// scanning all anchors.
pub fn grid_dump(t: &Table) -> Vec<Vec<usize>> {
    let rows = t.anchors.iter().map(|a| a.row + a.row_span - 1).max().unwrap_or(0);
    let cols = t.anchors.iter().map(|a| a.col + a.col_span - 1).max().unwrap_or(0);
    let mut g = vec![vec![usize::MAX; cols]; rows];
    for (i, a) in t.anchors.iter().enumerate() {
        for r in a.row..a.row + a.row_span {
            for c in a.col..a.col + a.col_span {
                assert_eq!(g[r - 1][c - 1], usize::MAX, "overlap at ({r},{c})");
                g[r - 1][c - 1] = i;
            }
        }
    }
    assert!(g.iter().flatten().all(|&i| i != usize::MAX), "grid not tiled");
    g
}

pub fn dump_content(t: &Table, g: &[Vec<usize>], r: usize, c: usize) -> String {
    t.anchors[g[r - 1][c - 1]].content.clone()
}

pub fn fold_key(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

// ------------------------------------------------------------ writers

fn html_text(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write_html(t: &Table) -> String {
    let mut s = String::from("<table>");
    if let Some(c) = &t.caption {
        s += &format!("<caption>{}</caption>", html_text(c));
    }
    for r in 1..=t.n_rows {
        s += "<tr>";
        for a in t.anchors.iter().filter(|a| a.row == r) {
            let tag = if a.is_header { "th" } else { "td" };
            let rs = if a.row_span > 1 { format!(" rowspan=\"{}\"", a.row_span) } else { String::new() };
            let cs = if a.col_span > 1 { format!(" colspan=\"{}\"", a.col_span) } else { String::new() };
            s += &format!("<{tag}{rs}{cs}>{}</{tag}>", html_text(&a.content));
        }
        s += "</tr>";
    }
    s + "</table>"
}

pub fn write_markdown(t: &Table) -> String {
    let g = grid_dump(t);
    let esc = |s: String| s.replace('\\', "\\\\").replace('|', "\\|");
    let row = |r: usize| format!("| {} |", (1..=t.n_cols).map(|c| esc(dump_content(t, &g, r, c))).collect::<Vec<_>>().join(" | "));
    let mut lines = vec![row(1), format!("| {} |", vec!["---"; t.n_cols].join(" | "))];
    lines.extend((2..=t.n_rows).map(row));
    lines.join("\n")
}

fn tex_text(s: &str) -> String {
    let mut o = String::new();
    for ch in s.chars() {
        match ch {
            '\\' => o += "\\textbackslash{}",
            '~' => o += "\\textasciitilde{}",
            '^' => o += "\\textasciicircum{}",
            '&' | '%' | '$' | '#' | '_' | '{' | '}' => {
                o.push('\\');
                o.push(ch);
            }
            _ => o.push(ch),
        }
    }
    o
}

/// One `c` column spec per column; `\hline` top, bottom and under a
/// header first row; rows covered by a multirow get an empty placeholder
/// as wide as the region.
pub fn write_latex(t: &Table) -> String {
    let g = grid_dump(t);
    let mut s = format!("\\begin{{tabular}}{{{}}}\n\\hline\n", "c".repeat(t.n_cols));
    for r in 1..=t.n_rows {
        let mut cells = Vec::new();
        let mut c = 1;
        while c <= t.n_cols {
            let a = &t.anchors[g[r - 1][c - 1]];
            let mut body = String::new();
            if a.row == r {
                body = tex_text(&a.content);
                if a.row_span > 1 {
                    body = format!("\\multirow{{{}}}{{*}}{{{}}}", a.row_span, body);
                }
            }
            if a.col_span > 1 {
                body = format!("\\multicolumn{{{}}}{{c}}{{{}}}", a.col_span, body);
            }
            cells.push(body);
            c += a.col_span;
        }
        s += &cells.join(" & ");
        s += " \\\\\n";
        if r == 1 && t.n_rows > 1 && t.anchors.iter().any(|a| a.row == 1 && a.is_header) {
            s += "\\hline\n";
        }
    }
    s + "\\hline\n\\end{tabular}"
}

pub fn write_table(t: &Table, f: TableFormat) -> String {
    match f {
        TableFormat::Html => write_html(t),
        TableFormat::Markdown => write_markdown(t),
        TableFormat::Latex => write_latex(t),
    }
}

// ------------------------------------------------------------- answers

/// Expected merged-cell answer from a scan over anchors.
pub fn oracle_mcd(t: &Table) -> Value {
    let regions: Vec<Value> = t
        .anchors
        .iter()
        .filter(|a| a.row_span > 1 || a.col_span > 1)
        .map(|a| json!([[a.row, a.col], [a.row + a.row_span - 1, a.col + a.col_span - 1]]))
        .collect();
    json!({ "has_merged": !regions.is_empty(), "regions": regions })
}

/// Anchors whose folded content is non-empty and occurs exactly once.
pub fn oracle_unique(t: &Table) -> Vec<&AnchorCell> {
    t.anchors
        .iter()
        .filter(|a| {
            let k = fold_key(&a.content);
            !k.is_empty() && t.anchors.iter().filter(|b| fold_key(&b.content) == k).count() == 1
        })
        .collect()
}

// ----------------------------------------------------------------- BLEU

fn ref_tokens(s: &str) -> Vec<String> {
    // state machine: accumulate alphanumerics, flush on anything else
    let mut toks = Vec::new();
    let mut cur = String::new();
    for ch in s.chars() {
        if ch.is_alphanumeric() {
            cur.push_str(&ch.to_lowercase().to_string());
        } else {
            if !cur.is_empty() {
                toks.push(cur.clone());
                cur.clear();
            }
            if !ch.is_whitespace() {
                toks.push(ch.to_lowercase().to_string());
            }
        }
    }
    if !cur.is_empty() {
        toks.push(cur);
    }
    toks
}

fn counts(toks: &[String], n: usize) -> BTreeMap<Vec<String>, usize> {
    let mut m = BTreeMap::new();
    if toks.len() >= n {
        for i in 0..=toks.len() - n {
            *m.entry(toks[i..i + n].to_vec()).or_insert(0) += 1;
        }
    }
    m
}

/// Corpus BLEU-4: clipped precisions, geometric mean, brevity penalty;
/// orders 2..4 with zero corpus matches use 1/(total+1); zero unigram
/// matches score 0.
pub fn reference_bleu(preds: &[String], refs: &[String]) -> f64 {
    let mut hits = [0usize; 4];
    let mut tot = [0usize; 4];
    let (mut c, mut r) = (0usize, 0usize);
    for (p, q) in preds.iter().zip(refs) {
        let (pt, qt) = (ref_tokens(p), ref_tokens(q));
        c += pt.len();
        r += qt.len();
        for n in 1..=4 {
            let pc = counts(&pt, n);
            let qc = counts(&qt, n);
            for (g, k) in &pc {
                hits[n - 1] += (*k).min(*qc.get(g).unwrap_or(&0));
                tot[n - 1] += k;
            }
        }
    }
    if c == 0 || hits[0] == 0 {
        return 0.0;
    }
    let mut prod = 1.0f64;
    for n in 0..4 {
        let p = if hits[n] == 0 { 1.0 / (tot[n] as f64 + 1.0) } else { hits[n] as f64 / tot[n] as f64 };
        prod *= p;
    }
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    100.0 * bp * prod.powf(0.25)
}

// ---------------------------------------------------------------- corpus

/// Writes `n` random HTML tables big enough for every task.
pub fn write_corpus<R: Rng>(rng: &mut R, dir: &Path, n: usize) -> Vec<Table> {
    std::fs::create_dir_all(dir).unwrap();
    let g = Gen { max_rows: 7, max_cols: 5, spans: true, fmt: Some(TableFormat::Html) };
    (0..n)
        .map(|i| {
            let mut t = random_valid_table(rng, g);
            while t.n_rows * t.n_cols < 6 {
                t = random_valid_table(rng, g);
            }
            let id = format!("tab{i:04}");
            std::fs::write(dir.join(format!("{id}.html")), write_html(&t)).unwrap();
            t.source_id = id;
            t
        })
        .collect()
}
