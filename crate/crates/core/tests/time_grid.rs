use bvdual::duality::agree;
use bvdual::gen::{random_dual, random_instance, random_null_cells, DualKind, Recipe};
use bvdual::oracle::{conjugate_bruteforce, OracleOptions};
use bvdual::time_grid::{integral_functional_det, lebesgue_decompose, pairing_det};
use bvdual::{BVPath, DualFunction, RefMeasure, SeparableFn, TimeGrid, Plq};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn deterministic_conjugate_matches_oracle() {
    let opts = OracleOptions::default();
    let mut singular = 0;
    for seed in 0..36 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let periods = rng.gen_range(1..=8);
        let null = if seed % 3 == 0 { random_null_cells(&mut rng, periods, 2) } else { vec![] };
        let recipe = Recipe {
            periods,
            branching: (1, 1),
            dim: rng.gen_range(1..=2),
            null_cells: null.clone(),
            ..Recipe::default()
        };
        let inst = random_instance(&mut rng, &recipe).unwrap();
        let grid = inst.to_grid().unwrap();
        for kind in [DualKind::InDomain, DualKind::Arbitrary] {
            let v = random_dual(&mut rng, &inst, kind);
            let det = grid.conjugate(&inst.dual_to_grid(&v).unwrap()).unwrap();
            let tree_value = inst.conjugate_formula(&v).unwrap();
            let o = conjugate_bruteforce(&inst, &v.v_minus, &v.v, &opts).unwrap();
            assert!(agree(det, o.value, 1e-5), "seed {seed}: {det} vs {}", o.value);
            assert!(agree(det, tree_value.value, 1e-12));
            if det.is_finite() && tree_value.singular != 0.0 {
                singular += 1;
            }
        }
    }
    assert!(singular >= 5, "only {singular} instances exercised a singular term");
}

#[test]
fn pairing_with_constant_dual_is_terminal_value() {
    let x = BVPath::scalar(0.5, &[1.0, -2.0, 0.25]).unwrap();
    let v = DualFunction::constant(&[3.0], 2);
    let p = pairing_det(&v, &x).unwrap();
    assert!((p - 3.0 * x.terminal()[0]).abs() < 1e-12);
}

#[test]
fn decomposition_splits_null_cells() {
    let grid = TimeGrid::uniform(3, 1.0).unwrap();
    let mu = RefMeasure::with_null_cells(grid, &[2]).unwrap();
    let x = BVPath::scalar(0.0, &[1.0, 2.0, -1.0, 0.0]).unwrap();
    let theta = bvdual::time_grid::GridMeasure::zero(3, 1);
    let dec = lebesgue_decompose(&theta, &mu).unwrap();
    assert_eq!(dec.singular_variation(), 0.0);
    let h = vec![SeparableFn::scalar(Plq::half_square()); 3];
    // running values 1, 3, 2; the null middle cell only asks for 3 ∈ dom h
    let value = integral_functional_det(&h, &x, &mu).unwrap();
    assert!((value - (0.5 + 2.0) / 3.0).abs() < 1e-12, "{value}");
    let boxed = vec![SeparableFn::scalar(Plq::indicator(-2.0, 2.0).unwrap()); 3];
    assert_eq!(integral_functional_det(&boxed, &x, &mu).unwrap(), f64::INFINITY);
}
