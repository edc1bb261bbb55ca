use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{derive_seed, Sample};

/// Groups single-turn samples by table and, for each table with at least
/// two of them, starts a conversation with probability `fraction`. A
/// conversation takes 2 to 4 distinct samples of that table in a seeded
/// order; no sample ends up in two conversations. Samples that already
/// carry turns are ignored.
pub fn compose_multiturn(samples: &[Sample], fraction: f64, master_seed: u64) -> Vec<Sample> {
    let mut groups: BTreeMap<&str, Vec<&Sample>> = BTreeMap::new();
    for s in samples.iter().filter(|s| s.turns.is_none()) {
        groups.entry(s.table_id.as_str()).or_default().push(s);
    }
    let mut out = Vec::new();
    for (table_id, mut group) in groups {
        if group.len() < 2 {
            continue;
        }
        group.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master_seed, &["multiturn", table_id]));
        if rng.gen::<f64>() >= fraction {
            continue;
        }
        group.shuffle(&mut rng);
        let n = rng.gen_range(2..=group.len().min(4));
        let turns: Vec<_> = group[..n].iter().flat_map(|s| s.units()).collect();
        let first = group[0];
        out.push(Sample {
            sample_id: format!("conv-{}-{:06}", first.meta.split.as_str(), out.len()),
            turns: Some(turns),
            ..first.clone()
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::{SampleMeta, TaskKind};
    use std::collections::HashSet;

    fn sample(table: usize, k: usize) -> Sample {
        Sample {
            sample_id: format!("TSD-train-{table:04}-{k}"),
            table_id: format!("t{table}"),
            task: TaskKind::Tsd,
            image_ref: format!("images/t{table}.svg"),
            request: format!("q{k}"),
            gold_response: "{}".into(),
            gold_answer: serde_json::json!({}),
            turns: None,
            meta: SampleMeta::default(),
        }
    }

    #[test]
    fn singletons_never_form_conversations() {
        assert!(compose_multiturn(&[sample(1, 0)], 1.0, 0).is_empty());
    }

    #[test]
    fn group_of_four() {
        let group: Vec<Sample> = (0..4).map(|k| sample(7, k)).collect();
        let conv = compose_multiturn(&group, 1.0, 3);
        assert_eq!(conv.len(), 1);
        let turns = conv[0].turns.as_ref().unwrap();
        assert!((2..=4).contains(&turns.len()));
        assert_eq!(conv[0].table_id, "t7");
        assert_eq!(conv[0].request, turns[0].request);
    }

    #[test]
    fn no_sample_in_two_turns() {
        let samples: Vec<Sample> = (0..1000).flat_map(|t| (0..5).map(move |k| sample(t, k))).collect();
        let conv = compose_multiturn(&samples, 0.2, 11);
        assert!(conv.len() > 150 && conv.len() < 250, "{}", conv.len());
        let mut seen = HashSet::new();
        for c in &conv {
            for t in c.turns.as_ref().unwrap() {
                assert!(seen.insert(t.sample_id.clone()));
                assert!(t.sample_id.contains(&format!("-{:04}-", c.table_id[1..].parse::<usize>().unwrap())));
            }
        }
    }
}
