use bvdual::duality::{agree, corollary_suite, BolzaInstance, Shape};
use bvdual::gen::{random_dual, random_feasible_path, random_instance, DualKind, Family, Recipe};
use bvdual::oracle::{conjugate_bruteforce, OracleOptions};
use bvdual::time_grid::{ConditionKind, SUBDIFF_TOL};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn recipe(seed: u64) -> Recipe {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    use rand::Rng;
    let periods = rng.gen_range(1..=3);
    Recipe {
        periods,
        branching: (1, 3),
        dim: rng.gen_range(1..=2),
        null_cells: bvdual::gen::random_null_cells(&mut rng, periods, 1),
        random_weights: rng.gen_bool(0.5),
        ..Recipe::default()
    }
}

fn instance(seed: u64, recipe: &Recipe) -> BolzaInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_instance(&mut rng, recipe).expect("valid instance")
}

#[test]
fn formula_matches_oracle_on_random_instances() {
    let opts = OracleOptions::default();
    let mut infinite = 0;
    for seed in 0..40 {
        let r = recipe(seed);
        let inst = instance(seed, &r);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
        for kind in [DualKind::InDomain, DualKind::Martingale, DualKind::Arbitrary] {
            let v = random_dual(&mut rng, &inst, kind);
            let f = inst.conjugate_formula(&v).unwrap().value;
            let o = conjugate_bruteforce(&inst, &v.v_minus, &v.v, &opts).unwrap().value;
            if f.is_infinite() {
                infinite += 1;
            }
            assert!(agree(f, o, 1e-6), "seed {seed} {kind:?}: formula {f} oracle {o}");
        }
    }
    assert!(infinite > 0);
}

#[test]
fn lower_bound_by_mean_variation() {
    for seed in 0..30 {
        let inst = instance(seed, &recipe(seed));
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 7);
        for kind in [DualKind::InDomain, DualKind::Arbitrary] {
            let v = random_dual(&mut rng, &inst, kind);
            let f = inst.conjugate_formula(&v).unwrap().value;
            let lb = inst.variation_lower_bound(&v).unwrap();
            assert!(f >= lb - 1e-9 * (1.0 + lb.abs()), "seed {seed}: {f} < {lb}");
        }
    }
}

#[test]
fn optimal_pair_closes_gap_and_single_perturbations_are_isolated() {
    for seed in 0..30 {
        let inst = instance(seed, &Recipe {
            running: Family::Quadratic,
            initial: Family::Quadratic,
            terminal: Family::Quadratic,
            ..recipe(seed)
        });
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 99);
        let x = random_feasible_path(&mut rng, &inst);
        let v = inst.optimal_dual(&x).unwrap();
        let rep = inst.subdiff_check(&x, &v, SUBDIFF_TOL).unwrap();
        assert!(rep.all_hold() && rep.gap_closed(), "seed {seed}: gap {}", rep.gap);

        let tree = inst.tree();
        let eps = 1e-2;
        let leaf = tree.leaves()[0];
        let pert = inst.perturb(&v, Some(leaf), 0, eps);
        let rep = inst.subdiff_check(&x, &pert, SUBDIFF_TOL).unwrap();
        assert_eq!(rep.failing_kinds(), vec![ConditionKind::Terminal], "seed {seed}");
        assert!((rep.gap - rep.gap_sum()).abs() < 1e-9, "seed {seed}: {} vs {} {:?}", rep.gap, rep.gap_sum(), rep.checks);

        let pert = inst.perturb(&v, None, 0, eps);
        let rep = inst.subdiff_check(&x, &pert, SUBDIFF_TOL).unwrap();
        assert_eq!(rep.failing_kinds(), vec![ConditionKind::Initial], "seed {seed}");

        let root = tree.root();
        if !inst.mu().weight(root).is_null() {
            let pert = inst.perturb(&v, Some(root), 0, eps);
            let rep = inst.subdiff_check(&x, &pert, SUBDIFF_TOL).unwrap();
            assert_eq!(rep.failing_kinds(), vec![ConditionKind::Density], "seed {seed}");
        }
    }
}

#[test]
fn corollary_cases() {
    let opts = OracleOptions::default();
    let cases = [
        (Family::Finite, Shape::FiniteIntegrand),
        (Family::Indicator, Shape::Indicator),
        (Family::Zero, Shape::NoRunningCost),
    ];
    for (family, shape) in cases {
        for seed in 0..6 {
            let mut r = recipe(seed);
            r.running = family;
            if seed % 2 == 0 {
                r.initial = Family::ZeroPoint;
            }
            let inst = instance(seed, &r);
            assert!(inst.shapes().contains(&shape));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = random_dual(&mut rng, &inst, DualKind::InDomain);
            for c in corollary_suite(&inst, &v, &opts, 1e-6).unwrap() {
                assert!(c.pass, "seed {seed} {:?} {}: {} vs {}", c.shape, c.name, c.lhs, c.rhs);
            }
        }
    }
}
