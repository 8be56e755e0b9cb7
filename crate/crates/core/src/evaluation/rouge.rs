use std::collections::HashMap;

/// Precision / recall / F1 of one ROUGE variant, all in `[0, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    pub fn from_counts(overlap: usize, candidate_total: usize, reference_total: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(overlap, candidate_total);
        let recall = ratio(overlap, reference_total);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        RougeScore { precision, recall, f1 }
    }
}

fn ngram_counts<T: AsRef<str>>(tokens: &[T], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            let key: Vec<&str> = w.iter().map(AsRef::as_ref).collect();
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    counts
}

/// ROUGE-N with clipped n-gram multiset overlap. Panics if `n == 0`.
pub fn rouge_n<T: AsRef<str>>(candidate: &[T], reference: &[T], n: usize) -> RougeScore {
    assert!(n >= 1, "rouge_n needs n >= 1");
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let overlap = cand
        .iter()
        .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    RougeScore::from_counts(overlap, cand.values().sum(), refs.values().sum())
}

pub fn lcs_len<T: AsRef<str>>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Sentence-level ROUGE-L over the whole token sequence.
pub fn rouge_l<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> RougeScore {
    RougeScore::from_counts(lcs_len(candidate, reference), candidate.len(), reference.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn degenerate_inputs() {
        let empty: [&str; 0] = [];
        assert_eq!(rouge_n(&empty, &["a"], 1), RougeScore::default());
        assert_eq!(rouge_l(&empty, &empty), RougeScore::default());
        assert_eq!(rouge_n(&["a", "b"], &["a", "b"], 3), RougeScore::default());
    }

    fn toks() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec("[a-d]", 0..12)
    }

    proptest! {
        #[test]
        fn rouge1_is_order_free(cand in toks(), reference in toks(), seed in any::<u64>()) {
            let mut shuffled = cand.clone();
            crate::rng::Prng::new(seed).shuffle(&mut shuffled);
            prop_assert_eq!(rouge_n(&cand, &reference, 1), rouge_n(&shuffled, &reference, 1));
        }

        #[test]
        fn scores_are_bounded_and_zero_iff_no_overlap(cand in toks(), reference in toks()) {
            for s in [rouge_n(&cand, &reference, 1), rouge_n(&cand, &reference, 2), rouge_l(&cand, &reference)] {
                prop_assert!((0.0..=1.0).contains(&s.f1));
                prop_assert!((0.0..=1.0).contains(&s.precision));
                prop_assert!((0.0..=1.0).contains(&s.recall));
            }
            let lcs = lcs_len(&cand, &reference);
            prop_assert_eq!(rouge_l(&cand, &reference).f1 == 0.0, lcs == 0);
            let shared = cand.iter().any(|t| reference.contains(t));
            prop_assert_eq!(rouge_n(&cand, &reference, 1).f1 > 0.0, shared);
        }

        #[test]
        fn n_beyond_length_gives_zero(cand in toks(), reference in toks()) {
            let n = cand.len().min(reference.len()) + 1;
            prop_assert_eq!(rouge_n(&cand, &reference, n), RougeScore::default());
        }
    }
}
