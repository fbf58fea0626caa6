use ddrm::eval::{ndcg_at_k, recall_at_k};
use ddrm::inference::rank_scores;
use proptest::prelude::*;

fn scores_and_exclusions() -> impl Strategy<Value = (Vec<f64>, Vec<usize>, usize)> {
    (1usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec(-5.0f64..5.0, n),
            prop::collection::btree_set(0..n, 0..n),
            1usize..=n + 5,
        )
            .prop_map(|(s, ex, k)| (s, ex.into_iter().collect(), k))
    })
}

proptest! {
    #[test]
    fn ranking_matches_a_full_sort((scores, excl, k) in scores_and_exclusions()) {
        let list = rank_scores(0, &scores, &excl, k).unwrap();
        let mut reference: Vec<usize> = (0..scores.len()).filter(|i| !excl.contains(i)).collect();
        reference.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
        reference.truncate(k);
        prop_assert_eq!(&list.items, &reference);
        prop_assert_eq!(list.truncated, reference.len() < k);
        for (i, s) in list.items.iter().zip(&list.scores) {
            prop_assert_eq!(scores[*i], *s);
        }
    }

    #[test]
    fn metrics_are_bounded_and_monotone_in_k(
        (ranked, relevant) in (1usize..40).prop_flat_map(|n| (
            Just((0..n).collect::<Vec<usize>>()).prop_shuffle(),
            prop::collection::btree_set(0..n, 1..=n),
        )),
        k in 1usize..45,
    ) {
        let relevant: Vec<usize> = relevant.into_iter().collect();
        let r = recall_at_k(&ranked, &relevant, k);
        let n = ndcg_at_k(&ranked, &relevant, k);
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert!((0.0..=1.0 + 1e-12).contains(&n));
        prop_assert!(recall_at_k(&ranked, &relevant, k + 1) >= r);
    }
}
