use std::collections::{BTreeSet, HashMap};

use crate::corpus::Meeting;
use crate::text;

/// Cosine similarity of n-gram count vectors pooled over `orders`.
///
/// Units are whitespace words, or characters for unsegmented scripts.
/// Returns 0 when either side has no n-grams of the requested orders.
pub fn ngram_cosine(a: &str, b: &str, orders: &BTreeSet<usize>) -> f64 {
    let ua = text::units(a);
    let ub = text::units(b);
    cosine_of_units(&ua, &ub, orders)
}

fn ngram_counts<'a>(units: &'a [String], orders: &BTreeSet<usize>) -> HashMap<&'a [String], f64> {
    let mut counts = HashMap::new();
    for &n in orders {
        if n == 0 || n > units.len() {
            continue;
        }
        for w in units.windows(n) {
            *counts.entry(w).or_insert(0.0) += 1.0;
        }
    }
    counts
}

pub(crate) fn cosine_of_units(a: &[String], b: &[String], orders: &BTreeSet<usize>) -> f64 {
    let ca = ngram_counts(a, orders);
    let cb = ngram_counts(b, orders);
    if ca.is_empty() || cb.is_empty() {
        return 0.0;
    }
    let (small, large) = if ca.len() <= cb.len() { (&ca, &cb) } else { (&cb, &ca) };
    let dot: f64 = small
        .iter()
        .filter_map(|(k, v)| large.get(k).map(|w| v * w))
        .sum();
    let norm = |c: &HashMap<&[String], f64>| c.values().map(|v| v * v).sum::<f64>().sqrt();
    (dot / (norm(&ca) * norm(&cb))).clamp(0.0, 1.0)
}

/// Every other sentence of the meeting scored against the focus.
pub(crate) fn score_all(meeting: &Meeting, focus_id: usize, orders: &BTreeSet<usize>) -> Vec<(usize, f64)> {
    let units: Vec<Vec<String>> = meeting.sentences.iter().map(|s| text::units(&s.text)).collect();
    let focus = &units[focus_id];
    units
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != focus_id)
        .map(|(i, u)| (i, cosine_of_units(focus, u, orders)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn orders(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().copied().collect()
    }

    #[test]
    fn identical_texts_score_one() {
        let s = ngram_cosine("we finish tomorrow", "we finish tomorrow", &orders(&[1, 2]));
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_texts_score_zero() {
        assert_eq!(ngram_cosine("alpha beta", "gamma delta", &orders(&[1, 2])), 0.0);
    }

    #[test]
    fn unigram_hand_value() {
        let s = ngram_cosine("a b c", "a b d", &orders(&[1]));
        assert!((s - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_side_scores_zero() {
        assert_eq!(ngram_cosine("...", "a b", &orders(&[1])), 0.0);
        // bigrams of a one-word text do not exist
        assert_eq!(ngram_cosine("a", "a b", &orders(&[2])), 0.0);
    }

    #[test]
    fn chinese_uses_characters() {
        let s = ngram_cosine("明天完成", "明天开会", &orders(&[1]));
        assert!((s - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(
            a in "[abcd ]{0,20}",
            b in "[abcd ]{0,20}",
            ord in prop::collection::btree_set(1usize..4, 1..3),
        ) {
            let ab = ngram_cosine(&a, &b, &ord);
            let ba = ngram_cosine(&b, &a, &ord);
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
            if !crate::text::units(&a).is_empty() && ord.contains(&1) {
                prop_assert!((ngram_cosine(&a, &a, &ord) - 1.0).abs() < 1e-12);
            }
        }
    }
}
