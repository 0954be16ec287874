use std::collections::BTreeSet;

use proptest::prelude::*;
use seedpure_core::protocol::{build_binary_task, split_train_test, train_count, Variety};
use seedpure_core::{accuracy, ConfusionCounts};

fn varieties(sizes: &[usize]) -> Vec<Variety<(usize, usize)>> {
    sizes.iter().enumerate().map(|(v, &n)| Variety { name: format!("v{v}"), items: (0..n).map(|i| (v, i)).collect() }).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn equal_sources_give_balanced_even_negatives(n_varieties in 2usize..=9, size in 1usize..=40, target in 0usize..9, seed in any::<u64>()) {
        let target = target % n_varieties;
        let vs = varieties(&vec![size; n_varieties]);
        let task = build_binary_task(&vs[target].name, &vs, seed).unwrap();
        prop_assert_eq!(task.n_positive, size);
        prop_assert_eq!(task.n_negative, size);
        prop_assert!(task.is_balanced());
        let per: Vec<usize> = task.negatives_per_source.iter().map(|(_, n)| *n).collect();
        prop_assert_eq!(per.len(), n_varieties - 1);
        prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
        let positives: BTreeSet<_> = task.samples.iter().filter(|s| s.label == 1).map(|s| s.item).collect();
        prop_assert_eq!(positives, vs[target].items.iter().copied().collect::<BTreeSet<_>>());
        let negatives: BTreeSet<_> = task.samples.iter().filter(|s| s.label == 0).map(|s| s.item).collect();
        prop_assert_eq!(negatives.len(), size);
        prop_assert!(negatives.iter().all(|&(v, _)| v != target));
    }

    #[test]
    fn uneven_sources_fill_like_water(sizes in prop::collection::vec(1usize..=30, 2..=6), seed in any::<u64>()) {
        let vs = varieties(&sizes);
        let task = build_binary_task("v0", &vs, seed).unwrap();
        let others: usize = sizes[1..].iter().sum();
        prop_assert_eq!(task.n_negative, sizes[0].min(others));
        let per: Vec<usize> = task.negatives_per_source.iter().map(|(_, n)| *n).collect();
        for (a, &na) in per.iter().enumerate() {
            prop_assert!(na <= sizes[a + 1]);
            if na < sizes[a + 1] {
                prop_assert!(per.iter().all(|&nb| nb <= na + 1));
            }
        }
        prop_assert_eq!(task.samples.len(), task.n_positive + task.n_negative);
        prop_assert_eq!(&task, &build_binary_task("v0", &vs, seed).unwrap());
    }

    #[test]
    fn split_counts_follow_floor_arithmetic(
        n0 in 1usize..=200,
        n1 in 1usize..=200,
        percent in 1usize..=99,
        seed in any::<u64>(),
        order in any::<u64>(),
    ) {
        let mut labels: Vec<u8> = std::iter::repeat_n(0, n0).chain(std::iter::repeat_n(1, n1)).collect();
        labels.rotate_left((order % (n0 + n1) as u64) as usize);
        let fraction = percent as f64 / 100.0;
        let (train, test) = split_train_test(&labels, fraction, seed).unwrap();
        for (label, n) in [(0u8, n0), (1, n1)] {
            let expected = percent * n / 100;
            prop_assert_eq!(train.iter().filter(|&&i| labels[i] == label).count(), expected);
            prop_assert_eq!(test.iter().filter(|&&i| labels[i] == label).count(), n - expected);
        }
        prop_assert!(train.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(test.windows(2).all(|w| w[0] < w[1]));
        let all: BTreeSet<usize> = train.iter().chain(&test).copied().collect();
        prop_assert_eq!(all.len(), labels.len());
    }

    #[test]
    fn accuracy_recomputes_from_counts(pairs in prop::collection::vec((0u8..=1, 0u8..=1), 1..200)) {
        let (truth, predicted): (Vec<u8>, Vec<u8>) = pairs.iter().copied().unzip();
        let c = ConfusionCounts::from_predictions(&truth, &predicted).unwrap();
        let correct = pairs.iter().filter(|(t, p)| t == p).count();
        prop_assert_eq!(c.total(), pairs.len());
        prop_assert_eq!(c.true_pos, pairs.iter().filter(|&&p| p == (1, 1)).count());
        prop_assert_eq!(c.false_pos, pairs.iter().filter(|&&p| p == (0, 1)).count());
        prop_assert_eq!(accuracy(&c).unwrap(), correct as f64 / pairs.len() as f64);
    }
}

#[test]
fn floor_is_robust_to_representation_error() {
    assert_eq!(train_count(0.67, 100), 67);
    assert_eq!(train_count(0.29, 100), 29);
    assert_eq!(train_count(0.67, 3677), 2463);
    assert_eq!(train_count(0.5, 1), 0);
}

#[test]
fn empty_evaluation_has_no_accuracy() {
    assert!(accuracy(&ConfusionCounts::default()).is_err());
    assert!(ConfusionCounts::from_predictions(&[0, 1], &[0]).is_err());
}

#[test]
fn hold_out_counts_for_large_totals() {
    for n in [3677usize, 4150, 2867, 3009, 2009, 4147] {
        assert_eq!(train_count(0.67, n), 67 * n / 100, "n = {n}");
    }
}
