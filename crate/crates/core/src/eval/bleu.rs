//! Corpus BLEU with up to 4-grams.
//!
//! Tokens are lowercased runs of alphanumerics; every other non-space
//! character is a token of its own. For n >= 2 an n-gram order with no
//! matches in the whole corpus gets precision 1/(total + 1) instead of 0.
//! Unigram precision is never smoothed, so sharing no word scores 0.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::EvalError;

pub const MAX_ORDER: usize = 4;

pub fn tokenize(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for c in s.chars() {
        if c.is_alphanumeric() {
            word.extend(c.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            out.push(c.to_lowercase().collect());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

/// Sufficient statistics of one pair; corpus BLEU sums them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuStats {
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl std::ops::AddAssign for BleuStats {
    fn add_assign(&mut self, o: Self) {
        for n in 0..MAX_ORDER {
            self.matches[n] += o.matches[n];
            self.totals[n] += o.totals[n];
        }
        self.hyp_len += o.hyp_len;
        self.ref_len += o.ref_len;
    }
}

fn ngrams(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut m = HashMap::new();
    for w in tokens.windows(n) {
        *m.entry(w).or_insert(0) += 1;
    }
    m
}

pub fn bleu_stats(prediction: &str, reference: &str) -> BleuStats {
    let hyp = tokenize(prediction);
    let rf = tokenize(reference);
    let mut s = BleuStats { hyp_len: hyp.len() as u64, ref_len: rf.len() as u64, ..Default::default() };
    for n in 1..=MAX_ORDER {
        let h = ngrams(&hyp, n);
        let r = ngrams(&rf, n);
        s.totals[n - 1] = hyp.len().saturating_sub(n - 1) as u64;
        s.matches[n - 1] = h.iter().map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0))).sum();
    }
    s
}

/// Score in [0, 100] from summed statistics.
pub fn bleu_from_stats(s: &BleuStats) -> f64 {
    if s.hyp_len == 0 || s.matches[0] == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 0..MAX_ORDER {
        let p = if n > 0 && s.matches[n] == 0 {
            1.0 / (s.totals[n] as f64 + 1.0)
        } else {
            s.matches[n] as f64 / s.totals[n] as f64
        };
        log_sum += p.ln();
    }
    let (c, r) = (s.hyp_len as f64, s.ref_len as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    100.0 * bp * (log_sum / MAX_ORDER as f64).exp()
}

pub fn bleu<S: AsRef<str>, T: AsRef<str>>(predictions: &[S], references: &[T]) -> Result<f64, EvalError> {
    if predictions.len() != references.len() {
        return Err(EvalError::LengthMismatch { predictions: predictions.len(), references: references.len() });
    }
    let mut total = BleuStats::default();
    for (p, r) in predictions.iter().zip(references) {
        total += bleu_stats(p.as_ref(), r.as_ref());
    }
    Ok(bleu_from_stats(&total))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(tokenize("Hello, World! 3.5%"), ["hello", ",", "world", "!", "3", ".", "5", "%"]);
        assert!(tokenize("  ").is_empty());
    }

    #[test]
    fn identical_is_100() {
        let s = "the cat sat on the mat";
        assert!((bleu(&[s], &[s]).unwrap() - 100.0).abs() < 1e-9);
        // shorter than four tokens: empty higher orders smooth to 1
        assert!((bleu(&["yes"], &["yes"]).unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn disjoint_is_zero() {
        assert_eq!(bleu(&["alpha beta"], &["gamma delta"]).unwrap(), 0.0);
        assert_eq!(bleu(&[""], &["gamma"]).unwrap(), 0.0);
    }

    #[test]
    fn hand_computed_case() {
        // hyp: a b c d e (5), ref: a b c x e y (6)
        // p1 = 4/5, p2 = 2/4, p3 = 1/3, p4 smoothed = 1/(2+1)
        let got = bleu(&["a b c d e"], &["a b c x e y"]).unwrap();
        let geo = (0.8f64 * 0.5 * (1.0 / 3.0) * (1.0 / 3.0)).powf(0.25);
        let want = 100.0 * (1.0f64 - 6.0 / 5.0).exp() * geo;
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }

    #[test]
    fn clipping() {
        let s = bleu_stats("the the the", "the cat");
        assert_eq!(s.matches[0], 1);
        assert_eq!(s.totals[0], 3);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(bleu(&["a"], &["a", "b"]), Err(EvalError::LengthMismatch { .. })));
    }
}
