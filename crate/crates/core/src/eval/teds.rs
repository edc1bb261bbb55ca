//! Tree-edit-distance similarity between HTML tables.

use serde::{Deserialize, Serialize};

use crate::format::html::{tokenize, Token};
use crate::format::{convert, normalize_text, TableFormat, MAX_SPAN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Table,
    Tr,
    Td,
}

/// Canonical table tree: `table` over `tr` over `td`. Only `td` nodes
/// carry content and spans; other nodes keep them empty and 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableTree {
    pub tag: Tag,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub content: String,
    pub colspan: usize,
    pub rowspan: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<TableTree>,
}

impl TableTree {
    pub fn node(tag: Tag, children: Vec<TableTree>) -> Self {
        Self { tag, content: String::new(), colspan: 1, rowspan: 1, children }
    }

    pub fn td(content: &str, rowspan: usize, colspan: usize) -> Self {
        Self { tag: Tag::Td, content: content.to_string(), colspan, rowspan, children: Vec::new() }
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(TableTree::size).sum::<usize>()
    }
}

fn span_attr(attrs: &[(String, String)], name: &str) -> usize {
    attrs
        .iter()
        .find(|(k, _)| k == name)
        .and_then(|(_, v)| v.trim().parse::<usize>().ok())
        .map_or(1, |n| n.clamp(1, MAX_SPAN))
}

/// Builds the canonical tree of the first table in `html`. `th` becomes
/// `td`, `thead`/`tbody`/`tfoot` and inline markup vanish, captions and
/// nested tables are dropped. Input without a table gives a lone `table`
/// node.
pub fn html_to_tree(html: &str) -> TableTree {
    let mut root = TableTree::node(Tag::Table, Vec::new());
    let mut depth = 0usize;
    let mut in_cell = false;
    let mut in_caption = false;
    let mut text = String::new();

    fn close_cell(root: &mut TableTree, text: &mut String) {
        if let Some(td) = root.children.last_mut().and_then(|tr| tr.children.last_mut()) {
            td.content = normalize_text(text);
        }
        text.clear();
    }

    for tok in tokenize(html) {
        match tok {
            Token::Open { name, attrs, .. } => match name.as_str() {
                "table" => {
                    depth += 1;
                }
                _ if depth != 1 => {}
                "caption" => in_caption = true,
                "tr" => {
                    if in_cell {
                        close_cell(&mut root, &mut text);
                        in_cell = false;
                    }
                    root.children.push(TableTree::node(Tag::Tr, Vec::new()));
                }
                "td" | "th" => {
                    if in_cell {
                        close_cell(&mut root, &mut text);
                    }
                    if root.children.is_empty() {
                        root.children.push(TableTree::node(Tag::Tr, Vec::new()));
                    }
                    let td = TableTree::td("", span_attr(&attrs, "rowspan"), span_attr(&attrs, "colspan"));
                    root.children.last_mut().unwrap().children.push(td);
                    in_cell = true;
                }
                _ => {}
            },
            Token::Close { name, .. } => match name.as_str() {
                "table" if depth == 1 => break,
                "table" => depth = depth.saturating_sub(1),
                _ if depth != 1 => {}
                "caption" => in_caption = false,
                "td" | "th" if in_cell => {
                    close_cell(&mut root, &mut text);
                    in_cell = false;
                }
                "tr" if in_cell => {
                    close_cell(&mut root, &mut text);
                    in_cell = false;
                }
                _ => {}
            },
            Token::Text { text: t, .. } => {
                if depth == 1 && in_cell && !in_caption {
                    text.push_str(&t);
                    text.push(' ');
                }
            }
        }
    }
    if in_cell {
        close_cell(&mut root, &mut text);
    }
    root
}

/// Character edit distance.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Relabel cost between two nodes.
pub fn substitution_cost(a: &TableTree, b: &TableTree) -> f64 {
    if a.tag != b.tag {
        return 1.0;
    }
    if a.tag != Tag::Td {
        return 0.0;
    }
    if a.colspan != b.colspan || a.rowspan != b.rowspan {
        return 1.0;
    }
    let longest = a.content.chars().count().max(b.content.chars().count());
    if longest == 0 {
        0.0
    } else {
        levenshtein(&a.content, &b.content) as f64 / longest as f64
    }
}

// Postorder view of a tree: nodes, leftmost leaf descendant of each node
// and the keyroots.
struct Postorder<'a> {
    nodes: Vec<&'a TableTree>,
    lmd: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a> Postorder<'a> {
    fn new(root: &'a TableTree) -> Self {
        fn walk<'a>(t: &'a TableTree, nodes: &mut Vec<&'a TableTree>, lmd: &mut Vec<usize>) -> usize {
            let mut leftmost = None;
            for c in &t.children {
                let l = walk(c, nodes, lmd);
                leftmost.get_or_insert(l);
            }
            let idx = nodes.len();
            nodes.push(t);
            let l = leftmost.unwrap_or(idx);
            lmd.push(l);
            l
        }
        let mut nodes = Vec::new();
        let mut lmd = Vec::new();
        walk(root, &mut nodes, &mut lmd);
        // a keyroot is the highest node for each distinct leftmost leaf
        let mut highest = vec![None; nodes.len()];
        for (i, &l) in lmd.iter().enumerate() {
            highest[l] = Some(i);
        }
        let mut keyroots: Vec<usize> = highest.into_iter().flatten().collect();
        keyroots.sort_unstable();
        Self { nodes, lmd, keyroots }
    }
}

/// Ordered tree edit distance (Zhang-Shasha) with unit insert/delete and
/// [`substitution_cost`] for relabeling.
pub fn tree_edit_distance(a: &TableTree, b: &TableTree) -> f64 {
    let t1 = Postorder::new(a);
    let t2 = Postorder::new(b);
    let (n, m) = (t1.nodes.len(), t2.nodes.len());
    let mut td = vec![vec![0.0f64; m]; n];
    let mut fd = vec![vec![0.0f64; m + 1]; n + 1];
    for &i in &t1.keyroots {
        for &j in &t2.keyroots {
            let (li, lj) = (t1.lmd[i], t2.lmd[j]);
            // fd[x][y]: forest li..li+x-1 against lj..lj+y-1
            let rows = i - li + 2;
            let cols = j - lj + 2;
            fd[0][0] = 0.0;
            for x in 1..rows {
                fd[x][0] = fd[x - 1][0] + 1.0;
            }
            for y in 1..cols {
                fd[0][y] = fd[0][y - 1] + 1.0;
            }
            for x in 1..rows {
                let i1 = li + x - 1;
                for y in 1..cols {
                    let j1 = lj + y - 1;
                    let del = fd[x - 1][y] + 1.0;
                    let ins = fd[x][y - 1] + 1.0;
                    if t1.lmd[i1] == li && t2.lmd[j1] == lj {
                        let sub = fd[x - 1][y - 1] + substitution_cost(t1.nodes[i1], t2.nodes[j1]);
                        fd[x][y] = del.min(ins).min(sub);
                        td[i1][j1] = fd[x][y];
                    } else {
                        let px = t1.lmd[i1] - li;
                        let py = t2.lmd[j1] - lj;
                        fd[x][y] = del.min(ins).min(fd[px][py] + td[i1][j1]);
                    }
                }
            }
        }
    }
    td[n - 1][m - 1]
}

/// Similarity in [0, 1]: one minus the edit distance over the larger tree.
pub fn teds_trees(a: &TableTree, b: &TableTree) -> f64 {
    let d = tree_edit_distance(a, b);
    (1.0 - d / a.size().max(b.size()) as f64).clamp(0.0, 1.0)
}

pub fn teds(pred_html: &str, gold_html: &str) -> f64 {
    teds_trees(&html_to_tree(pred_html), &html_to_tree(gold_html))
}

/// Converts a prediction written in `pred_fmt` to HTML, then compares.
/// Unreadable predictions become the empty table and still get a score.
pub fn score_tr(pred: &str, pred_fmt: TableFormat, gold_html: &str) -> f64 {
    let (html, _) = convert(pred, pred_fmt);
    teds(&html, gold_html)
}
