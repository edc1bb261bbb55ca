//! Seeded random tables for demo corpora, property tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::table::{AnchorCell, Table};

const WORDS: &[&str] = &[
    "alpha", "beta", "gamma", "delta", "total", "region", "north", "south", "east", "west",
    "revenue", "cost", "profit", "year", "team", "score", "city", "price", "rank", "name",
    "Paris", "Tokyo", "Lima", "Oslo", "Q1", "Q2", "Q3", "Q4", "n/a", "yes", "no",
];

const TRICKY: &[&str] = &["a&b", "x<y", "p>q", "50%", "$3", "#1", "under_score", "{x}", "a|b", "c\\d", "~", "^"];

/// Knobs for [`random_table`].
#[derive(Debug, Clone)]
pub struct TableShape {
    pub rows: (usize, usize),
    pub cols: (usize, usize),
    /// Chance that a free position starts a merged region.
    pub span_prob: f64,
    pub max_span: usize,
    pub header_row_prob: f64,
    pub caption_prob: f64,
    pub empty_cell_prob: f64,
    /// Mix in characters that need escaping in every format.
    pub tricky_text: bool,
}

impl Default for TableShape {
    fn default() -> Self {
        Self {
            rows: (1, 6),
            cols: (1, 6),
            span_prob: 0.15,
            max_span: 3,
            header_row_prob: 0.6,
            caption_prob: 0.2,
            empty_cell_prob: 0.05,
            tricky_text: false,
        }
    }
}

impl TableShape {
    pub fn spanless(mut self) -> Self {
        self.span_prob = 0.0;
        self
    }
}

fn random_text<R: Rng>(rng: &mut R, shape: &TableShape) -> String {
    if rng.gen_bool(shape.empty_cell_prob) {
        return String::new();
    }
    let n_words = rng.gen_range(1..=3);
    let mut parts = Vec::with_capacity(n_words);
    for _ in 0..n_words {
        let p: f64 = rng.gen();
        let w = if shape.tricky_text && p < 0.25 {
            TRICKY.choose(rng).unwrap().to_string()
        } else if p < 0.55 {
            rng.gen_range(0..10_000).to_string()
        } else {
            WORDS.choose(rng).unwrap().to_string()
        };
        parts.push(w);
    }
    parts.join(" ")
}

/// Draws a valid table. Spans are placed greedily over free positions in
/// row-major order, so the result always tiles the grid.
pub fn random_table<R: Rng>(rng: &mut R, shape: &TableShape) -> Table {
    let n_rows = rng.gen_range(shape.rows.0..=shape.rows.1).max(1);
    let n_cols = rng.gen_range(shape.cols.0..=shape.cols.1).max(1);
    let header_row = rng.gen_bool(shape.header_row_prob);
    let mut taken = vec![false; n_rows * n_cols];
    let mut anchors = Vec::new();
    for r in 1..=n_rows {
        for c in 1..=n_cols {
            if taken[(r - 1) * n_cols + (c - 1)] {
                continue;
            }
            let (mut rs, mut cs) = (1, 1);
            if shape.span_prob > 0.0 && rng.gen_bool(shape.span_prob) {
                rs = rng.gen_range(1..=shape.max_span.max(1));
                cs = rng.gen_range(1..=shape.max_span.max(1));
                rs = rs.min(n_rows - r + 1);
                // shrink the width until the rectangle is free
                cs = cs.min(n_cols - c + 1);
                while cs > 1
                    && (0..rs).any(|dr| (0..cs).any(|dc| taken[(r - 1 + dr) * n_cols + (c - 1 + dc)]))
                {
                    cs -= 1;
                }
                while rs > 1
                    && (0..rs).any(|dr| (0..cs).any(|dc| taken[(r - 1 + dr) * n_cols + (c - 1 + dc)]))
                {
                    rs -= 1;
                }
            }
            for dr in 0..rs {
                for dc in 0..cs {
                    taken[(r - 1 + dr) * n_cols + (c - 1 + dc)] = true;
                }
            }
            let mut a = AnchorCell::new(r, c, random_text(rng, shape)).span(rs, cs);
            a.is_header = header_row && r == 1;
            anchors.push(a);
        }
    }
    let mut table = Table::new(n_rows, n_cols, anchors);
    if rng.gen_bool(shape.caption_prob) {
        table.caption = Some(format!("Table of {}", WORDS.choose(rng).unwrap()));
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_tables_are_valid_and_seeded() {
        let shape = TableShape {
            span_prob: 0.5,
            ..TableShape::default()
        };
        for seed in 0..300 {
            let a = random_table(&mut ChaCha8Rng::seed_from_u64(seed), &shape);
            let b = random_table(&mut ChaCha8Rng::seed_from_u64(seed), &shape);
            assert_eq!(a, b);
            assert_eq!(a.validate(), Ok(()), "seed {seed}");
        }
    }

    #[test]
    fn spanless_shape_has_no_spans() {
        let shape = TableShape::default().spanless();
        for seed in 0..100 {
            assert!(!random_table(&mut ChaCha8Rng::seed_from_u64(seed), &shape).has_spans());
        }
    }
}
