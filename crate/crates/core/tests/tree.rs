use bvdual::gen::{random_adapted, random_cell_field, random_path, random_raw, random_tree};
use bvdual::time_grid::TimeGrid;
use bvdual::tree::{
    adjoint_embedding, count_stopping_times, embedding_pairing, for_each_predictable_stopping_time,
    for_each_stopping_time, optional_identity_gap, optional_projection, predictable_identity_gap,
    predictable_projection, RandomRefMeasure,
};
use bvdual::{ScenarioTree, RawProcess};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn measure(rng: &mut ChaCha8Rng, tree: &ScenarioTree) -> RandomRefMeasure {
    let n = tree.n_periods();
    let grid = TimeGrid::uniform(n, 1.0).unwrap();
    let weights = (0..tree.len())
        .map(|m| if tree.is_leaf(m) { 0.0 } else { rng.gen_range(0.1..2.0) })
        .collect();
    RandomRefMeasure::new(tree, grid, vec![false; n], weights).unwrap()
}

#[test]
fn projection_identities_for_every_stopping_time() {
    for seed in 0..12 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let periods = rng.gen_range(1..=4);
        let tree = random_tree(&mut rng, periods, (1, 2));
        assert!(count_stopping_times(&tree) < 1 << 20);
        let raw = random_raw(&mut rng, &tree, 2);
        let opt = optional_projection(&raw, &tree).unwrap();
        let pred = predictable_projection(&raw, &tree).unwrap();
        let mut count = 0u128;
        for_each_stopping_time(&tree, |tau| {
            assert!(optional_identity_gap(&raw, &opt, &tree, tau) <= 1e-10);
            count += 1;
        });
        assert_eq!(count, count_stopping_times(&tree));
        for_each_predictable_stopping_time(&tree, |tau| {
            assert!(tau.is_predictable(&tree));
            assert!(predictable_identity_gap(&raw, &pred, &tree, tau) <= 1e-10);
        });
    }
}

#[test]
fn projections_fix_adapted_processes() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tree = random_tree(&mut rng, 3, (2, 3));
    let v = random_adapted(&mut rng, &tree, 1);
    let raw = v.to_raw(&tree);
    assert!(raw.is_adapted(&tree, 1e-12));
    let opt = optional_projection(&raw, &tree).unwrap();
    for n in 0..tree.len() {
        assert!((opt.get(n)[0] - v.get(n)[0]).abs() <= 1e-12);
    }
}

#[test]
fn stopping_times_on_a_binary_two_period_tree() {
    // root stops, or each child either stops or passes to its leaves
    let tree = ScenarioTree::uniform(2, 2);
    let per_child = 1 + 2 * 2;
    assert_eq!(count_stopping_times(&tree), 1 + per_child * per_child);
}

#[test]
fn adjoint_identity_on_random_trees() {
    for seed in 0..24 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let periods = rng.gen_range(1..=3);
        let tree = random_tree(&mut rng, periods, (1, 3));
        let mu = measure(&mut rng, &tree);
        let d = rng.gen_range(1..=2);
        let w = random_cell_field(&mut rng, &tree, d, false);
        let x = random_path(&mut rng, &tree, d, 2.0);
        let lhs = embedding_pairing(&x, &w, &tree, &mu);
        let (vm, v) = adjoint_embedding(&w, &tree, &mu).unwrap();
        let rhs = x.pairing(&tree, &vm, &v);
        assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "seed {seed}: {lhs} vs {rhs}");
    }
}

#[test]
fn raw_process_shape_is_checked() {
    let tree = ScenarioTree::uniform(2, 2);
    assert!(RawProcess::scalar(&tree, &[vec![0.0; 3]]).is_err());
}
