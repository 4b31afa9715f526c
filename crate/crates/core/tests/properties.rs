use evodt::baseline::{train_adaboost_greedy, GreedyTreeConfig};
use evodt::dataset::{apply_normalizer, fit_normalizer, stratified_folds, Dataset};
use evodt::ensemble::{Ensemble, EnsembleObjective, TreeModel};
use evodt::evolution::Objective;
use evodt::tree::{attach_leaves, decode, TreeShape};
use proptest::prelude::*;

fn names(k: usize) -> Vec<String> {
    (0..k).map(|c| format!("c{c}")).collect()
}

/// Random labeled data where every class in `0..k` occurs at least once.
fn dataset(max_f: usize, k: usize) -> impl Strategy<Value = Dataset> {
    (1..=max_f, k.max(2)..40usize).prop_flat_map(move |(f, n)| {
        (
            prop::collection::vec(prop::collection::vec(-5.0..5.0f64, f), n),
            prop::collection::vec(0..k, n),
        )
            .prop_map(move |(rows, mut labels)| {
                for (c, l) in labels.iter_mut().take(k).enumerate() {
                    *l = c;
                }
                Dataset::new(rows, labels, names(k)).unwrap()
            })
    })
}

fn unit_data(f: usize, n: usize, k: usize) -> impl Strategy<Value = Dataset> {
    (
        prop::collection::vec(prop::collection::vec(0.0..1.0f64, f), n),
        prop::collection::vec(0..k, n),
    )
        .prop_map(move |(rows, mut labels)| {
            for (c, l) in labels.iter_mut().take(k).enumerate() {
                *l = c;
            }
            Dataset::new(rows, labels, names(k)).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn decoded_nodes_are_in_range(
        depth in 1..6usize,
        f in 1..12usize,
        seed in prop::collection::vec(-1.0..2.0f64, 64),
    ) {
        let shape = TreeShape::new(depth, f).unwrap();
        let g: Vec<f64> = (0..shape.genotype_len()).map(|i| seed[i % seed.len()] + i as f64 * 1e-3).collect();
        let tree = decode(&g, shape).unwrap();
        prop_assert_eq!(tree.features().len(), shape.n_internal());
        prop_assert!(tree.features().iter().all(|&j| j < f));
        prop_assert!(tree.thresholds().iter().all(|t| (0.0..=1.0).contains(t)));
    }

    #[test]
    fn one_tree_vote_is_the_tree(
        data in unit_data(3, 30, 3),
        g in prop::collection::vec(0.0..1.0f64, 14),
        x in prop::collection::vec(-0.5..1.5f64, 3),
    ) {
        let shape = TreeShape::new(3, 3).unwrap();
        let tree = attach_leaves(&decode(&g, shape).unwrap(), &data).unwrap();
        let expected = tree.predict(&x).unwrap();
        let ens = Ensemble::single(TreeModel::Complete(tree), names(3)).unwrap();
        prop_assert_eq!(ens.predict(&x).unwrap(), expected);
    }

    #[test]
    fn boosting_weights_stay_a_distribution(data in dataset(3, 2), rounds in 1..6usize) {
        let cfg = GreedyTreeConfig { max_depth: 1, min_samples_split: 2 };
        let out = train_adaboost_greedy(&data, cfg, rounds).unwrap();
        let mut member = 0;
        for r in &out.rounds {
            prop_assert!(r.weights.iter().all(|&w| w >= 0.0));
            prop_assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            if r.accepted && r.epsilon > 0.0 && r.epsilon < 0.5 {
                let tree = &out.ensemble.trees()[member];
                let single = Ensemble::single(tree.clone(), names(2)).unwrap();
                let missed: f64 = (0..data.n_samples())
                    .filter(|&i| single.predict(data.row(i)).unwrap() != data.label(i))
                    .map(|i| r.weights[i])
                    .sum();
                prop_assert!((missed - 0.5).abs() < 1e-9);
            }
            if r.accepted {
                member += 1;
            }
        }
        prop_assert!(out.loss_bound() <= 1.0 + 1e-12);
    }

    #[test]
    fn ensemble_objective_ignores_tree_order(
        data in unit_data(2, 25, 2),
        g in prop::collection::vec(0.0..1.0f64, 18),
        rotate in 0..3usize,
    ) {
        let shape = TreeShape::new(2, 2).unwrap();
        let obj = EnsembleObjective::new(&data, shape, 3).unwrap();
        let mut h = g.clone();
        h.rotate_left(rotate * shape.genotype_len());
        prop_assert_eq!(obj.evaluate(&g).unwrap(), obj.evaluate(&h).unwrap());
    }

    #[test]
    fn folds_partition_and_balance_classes(data in dataset(2, 3), k in 2..5usize, seed: u64) {
        let mut counts = [0usize; 3];
        for &l in data.labels() {
            counts[l] += 1;
        }
        prop_assume!(counts.iter().all(|&c| c >= k));
        let plan = stratified_folds(&data, k, seed).unwrap();
        prop_assert_eq!(plan.assignments.len(), data.n_samples());
        for c in 0..3 {
            let per_fold: Vec<usize> = (0..k)
                .map(|f| plan.test_indices(f).iter().filter(|&&i| data.label(i) == c).count())
                .collect();
            let (lo, hi) = (per_fold.iter().min().unwrap(), per_fold.iter().max().unwrap());
            prop_assert!(hi - lo <= 1);
        }
        let sizes: Vec<usize> = (0..k).map(|f| plan.test_indices(f).len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn training_split_scales_into_unit_box(data in dataset(4, 2)) {
        let stats = fit_normalizer(&data).unwrap();
        let scaled = apply_normalizer(&data, &stats).unwrap();
        prop_assert!(scaled.features().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
