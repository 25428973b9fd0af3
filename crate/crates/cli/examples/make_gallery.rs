//! Regenerates the bundled instance gallery: `cargo run --example make_gallery -- gallery`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use bvdual::duality::{Certificate, InstanceParts, Witness};
use bvdual::gen::{random_dual, random_feasible_path, random_instance, random_raw_near, DualKind, Family, Recipe};
use bvdual::tree::RandomRefMeasure;
use bvdual::{AdaptedPath, AdaptedProcess, BolzaInstance, DualCandidate, Plq, ScenarioTree, SeparableFn, TimeGrid};
use bvdual_cli::{InstanceFile, Loaded};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn renamed(inst: BolzaInstance, name: &str) -> BolzaInstance {
    BolzaInstance::new(InstanceParts {
        name: name.into(),
        ..inst.parts().clone()
    })
    .expect("valid")
}

fn generated(name: &str, seed: u64, recipe: Recipe) -> Loaded {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = renamed(random_instance(&mut rng, &recipe).expect("valid"), name);
    let mut duals = BTreeMap::new();
    duals.insert("v-domain".to_string(), random_dual(&mut rng, &inst, DualKind::InDomain));
    duals.insert("v-martingale".to_string(), random_dual(&mut rng, &inst, DualKind::Martingale));
    duals.insert("v-arbitrary".to_string(), random_dual(&mut rng, &inst, DualKind::Arbitrary));
    let mut primals = BTreeMap::new();
    primals.insert("x-feasible".to_string(), random_feasible_path(&mut rng, &inst));
    let mut raw = BTreeMap::new();
    raw.insert("raw-near".to_string(), random_raw_near(&mut rng, &inst));
    Loaded { inst, duals, primals, raw }
}

fn quadratic_1period() -> Loaded {
    let tree = ScenarioTree::chain(1);
    let grid = TimeGrid::new(vec![0.0, 1.0]).unwrap();
    let mu = RandomRefMeasure::new(&tree, grid, vec![false], vec![1.0, 0.0]).unwrap();
    let half = SeparableFn::scalar(Plq::half_square());
    let inst = BolzaInstance::new(InstanceParts {
        name: "quadratic_1period".into(),
        tree: tree.clone(),
        mu,
        h: vec![Some(half.clone()), None],
        k0: SeparableFn::scalar(Plq::indicator(0.0, 0.0).unwrap()),
        kt: vec![None, Some(half)],
        certificate: vec![Some(Certificate { slope: vec![0.0], alpha: 0.0 }), None],
        witness: Witness {
            radius: 1.0,
            path: AdaptedPath::new(&tree, vec![0.0], vec![vec![0.0], vec![0.0]]).unwrap(),
            beta: vec![0.5, 0.0],
        },
    })
    .unwrap();
    let constant = |c: f64| DualCandidate {
        v_minus: vec![c],
        v: AdaptedProcess::scalar(&tree, &[c, c]).unwrap(),
    };
    let duals = BTreeMap::from([("v1".to_string(), constant(0.5)), ("v2".to_string(), constant(-1.25))]);
    let primals = BTreeMap::from([(
        "x-opt-v1".to_string(),
        AdaptedPath::new(&tree, vec![0.0], vec![vec![0.0], vec![0.5]]).unwrap(),
    )]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let raw = BTreeMap::from([("raw-near".to_string(), random_raw_near(&mut rng, &inst))]);
    Loaded { inst, duals, primals, raw }
}

fn unit_ball_var() -> Loaded {
    let tree = ScenarioTree::uniform(2, 2);
    let grid = TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap();
    let weights = (0..tree.len()).map(|n| if tree.is_leaf(n) { 0.0 } else { 0.5 }).collect();
    let mu = RandomRefMeasure::new(&tree, grid, vec![false, false], weights).unwrap();
    let ball = SeparableFn::scalar(Plq::indicator(-1.0, 1.0).unwrap());
    let zero = SeparableFn::scalar(Plq::indicator(0.0, 0.0).unwrap());
    let n = tree.len();
    let inner = |m: usize| !tree.is_leaf(m);
    let inst = BolzaInstance::new(InstanceParts {
        name: "unit_ball_var".into(),
        tree: tree.clone(),
        mu,
        h: (0..n).map(|m| inner(m).then(|| ball.clone())).collect(),
        k0: zero.clone(),
        kt: (0..n).map(|m| (!inner(m)).then(|| zero.clone())).collect(),
        certificate: (0..n)
            .map(|m| inner(m).then(|| Certificate { slope: vec![0.0], alpha: 0.0 }))
            .collect(),
        witness: Witness {
            radius: 0.5,
            path: AdaptedPath::zeros(&tree, 1),
            beta: vec![0.0; n],
        },
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut duals = BTreeMap::new();
    for i in 0..3 {
        let vals: Vec<f64> = (0..n).map(|_| (rng.gen_range(-20..=20) as f64) / 8.0).collect();
        duals.insert(
            format!("v{i}"),
            DualCandidate {
                v_minus: vec![0.0],
                v: AdaptedProcess::scalar(&tree, &vals).unwrap(),
            },
        );
    }
    let raw = BTreeMap::from([("raw-near".to_string(), random_raw_near(&mut rng, &inst))]);
    Loaded { inst, duals, primals: BTreeMap::new(), raw }
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "gallery".into()));
    std::fs::create_dir_all(&dir).expect("create gallery dir");
    let base = Recipe::default();
    let all = vec![
        quadratic_1period(),
        unit_ball_var(),
        generated("quadratic_binomial", 11, Recipe {
            periods: 2,
            branching: (2, 2),
            running: Family::Quadratic,
            initial: Family::Quadratic,
            terminal: Family::Quadratic,
            ..base.clone()
        }),
        generated("singular_atom", 12, Recipe { periods: 3, branching: (1, 2), null_cells: vec![2], ..base.clone() }),
        generated("plq_mix_2d", 13, Recipe { periods: 3, branching: (1, 2), dim: 2, random_weights: true, ..base.clone() }),
        generated("abs_costs", 14, Recipe {
            running: Family::Abs,
            initial: Family::Abs,
            terminal: Family::Abs,
            ..base.clone()
        }),
        generated("finite_integrand_a", 21, Recipe { running: Family::Finite, ..base.clone() }),
        generated("finite_integrand_b", 22, Recipe { running: Family::Finite, periods: 3, null_cells: vec![2], ..base.clone() }),
        generated("finite_integrand_c", 23, Recipe { running: Family::Finite, branching: (2, 3), dim: 2, ..base.clone() }),
        generated("box_constraint_a", 31, Recipe { running: Family::Indicator, ..base.clone() }),
        generated("box_constraint_b", 32, Recipe { running: Family::Indicator, periods: 3, null_cells: vec![1], ..base.clone() }),
        generated("martingale_only_a", 41, Recipe { running: Family::Zero, ..base.clone() }),
        generated("martingale_only_b", 42, Recipe { running: Family::Zero, periods: 3, branching: (2, 2), ..base.clone() }),
        generated("martingale_only_c", 43, Recipe { running: Family::Zero, dim: 2, null_cells: vec![1], ..base.clone() }),
        generated("pinned_start_a", 51, Recipe { initial: Family::ZeroPoint, ..base.clone() }),
        generated("pinned_start_b", 52, Recipe { initial: Family::ZeroPoint, running: Family::Quadratic, periods: 3, ..base.clone() }),
        generated("pinned_start_c", 53, Recipe { initial: Family::ZeroPoint, running: Family::Indicator, dim: 2, ..base.clone() }),
    ];
    for l in &all {
        let file = InstanceFile::from_loaded(l);
        let path = dir.join(format!("{}.json", l.inst.name()));
        std::fs::write(&path, file.to_json()).expect("write instance");
        println!("{}", path.display());
    }
}
