//! Acceptance criteria 1 to 11. Prints one line per criterion and exits
//! nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use bvdual::duality::{agree, corollary_suite, Shape};
use bvdual::gen::{
    random_adapted, random_cell_field, random_dual, random_feasible_path, random_instance, random_null_cells,
    random_path, random_plq, random_raw, random_raw_near, random_tree, DualKind, Family, Recipe,
};
use bvdual::interchange::interchange_tree;
use bvdual::oracle::{conjugate_bruteforce, DivergenceRay, OracleOptions};
use bvdual::quasimartingale::{ibp_check, mean_variation, mean_variation_on, rao_decompose, var_support_bruteforce};
use bvdual::time_grid::{ConditionKind, SUBDIFF_TOL};
use bvdual::tree::{
    adjoint_embedding, count_stopping_times, embedding_pairing, for_each_predictable_stopping_time,
    for_each_stopping_time, optional_identity_gap, optional_projection, predictable_identity_gap,
    predictable_projection,
};
use bvdual::{AdaptedPath, AdaptedProcess, BolzaInstance, DualCandidate, Interval, Plq, SeparableFn};
use bvdual_cli::{run, InstanceFile, Settings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn gallery_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../gallery")
}

fn gallery_files() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(gallery_dir())
        .expect("gallery directory")
        .map(|e| e.expect("entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    files
}

fn support(i: Interval, x: f64) -> f64 {
    if x > 0.0 {
        if i.hi.is_finite() { x * i.hi } else { f64::INFINITY }
    } else if x < 0.0 {
        if i.lo.is_finite() { x * i.lo } else { f64::INFINITY }
    } else {
        0.0
    }
}

fn convex_suite() -> Outcome {
    let families = [
        Family::General,
        Family::Quadratic,
        Family::Finite,
        Family::Indicator,
        Family::ZeroPoint,
        Family::Abs,
        Family::Zero,
    ];
    let mut count = 0;
    for (fi, &family) in families.iter().enumerate() {
        for seed in 0..40u64 {
            let mut r = rng(seed * 31 + fi as u64);
            let centre = r.gen_range(-1.0..1.0);
            let f = random_plq(&mut r, family, centre, 2.0);
            let fs = f.conjugate().map_err(|e| e.to_string())?;
            let fss = fs.conjugate().map_err(|e| e.to_string())?;
            let dom = f.domain();
            let mut xs: Vec<f64> = (-48..=48).map(|i| i as f64 / 8.0).collect();
            xs.extend(f.breakpoints());
            xs.extend([dom.lo, dom.hi].into_iter().filter(|x| x.is_finite()));
            for &x in &xs {
                ensure!(close(f.eval(x), fss.eval(x), 1e-9), "{family:?} seed {seed}: f**({x}) = {} but f = {}", fss.eval(x), f.eval(x));
            }
            let rec = f.recession();
            for x in [-5.0, -1.0, -1e-3, 0.0, 1e-3, 1.0, 5.0] {
                ensure!(close(rec.eval(x), support(fs.domain(), x), 1e-9), "{family:?} seed {seed}: recession at {x}");
            }
            for &x in xs.iter().filter(|&&x| f.in_domain(x)) {
                let sub = f.subdifferential(x);
                for y in [-3.0, -1.0, -0.25, 0.0, 0.5, 1.0, 3.0].into_iter().chain(sub.representative()) {
                    let gap = f.fenchel_gap(x, y).map_err(|e| e.to_string())?;
                    let member = sub.distance(y) <= 1e-9;
                    let zero = gap <= 1e-9 * (1.0 + f.eval(x).abs() + (x * y).abs());
                    ensure!(gap >= -1e-9 * (1.0 + (x * y).abs()), "{family:?} seed {seed}: negative gap {gap}");
                    ensure!(member == zero || sub.distance(y) < 1e-6, "{family:?} seed {seed}: x={x} y={y} gap={gap} {sub:?}");
                }
            }
            count += 1;
        }
    }
    Ok(format!("{count} random PLQ functions"))
}

fn deterministic_duality() -> Outcome {
    let opts = OracleOptions::default();
    let (mut count, mut singular, mut infinite) = (0, 0, 0);
    for seed in 0..40u64 {
        let mut r = rng(1000 + seed);
        let periods = r.gen_range(1..=8);
        let null = if seed % 3 == 0 { random_null_cells(&mut r, periods, 2) } else { vec![] };
        let recipe = Recipe {
            periods,
            branching: (1, 1),
            dim: r.gen_range(1..=2),
            null_cells: null,
            ..Recipe::default()
        };
        let inst = random_instance(&mut r, &recipe).map_err(|e| e.to_string())?;
        let grid = inst.to_grid().map_err(|e| e.to_string())?;
        let mut exercised = false;
        for kind in [DualKind::InDomain, DualKind::Arbitrary] {
            let v = random_dual(&mut r, &inst, kind);
            let det = grid.conjugate(&inst.dual_to_grid(&v).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            let o = conjugate_bruteforce(&inst, &v.v_minus, &v.v, &opts).map_err(|e| e.to_string())?;
            ensure!(agree(det, o.value, 1e-5), "seed {seed}: formula {det} oracle {}", o.value);
            let terms = inst.conjugate_formula(&v).map_err(|e| e.to_string())?;
            exercised |= det.is_finite() && terms.singular != 0.0;
            if det.is_infinite() {
                infinite += 1;
            }
        }
        if exercised {
            singular += 1;
        }
        count += 1;
    }
    ensure!(singular >= 5, "only {singular} instances exercised a finite singular term");
    Ok(format!("{count} instances, {singular} with singular atoms, {infinite} infinite values"))
}

/// Moves the ray's variable by `t` from its base point.
fn along(ray: &DivergenceRay, t: f64) -> AdaptedPath {
    let mut x = ray.base.clone();
    match ray.node {
        None => x.x0[ray.coord] += ray.sign * t,
        Some(n) => x.s[n][ray.coord] += ray.sign * t,
    }
    x
}

fn objective(inst: &BolzaInstance, v: &DualCandidate, x: &AdaptedPath) -> f64 {
    let ef = inst.evaluate_ef(x).expect("shape");
    if ef == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    inst.pairing(x, v).expect("shape") - ef
}

fn ray_certifies(inst: &BolzaInstance, v: &DualCandidate, ray: &DivergenceRay) -> bool {
    let f0 = objective(inst, v, &ray.base);
    let f1 = objective(inst, v, &along(ray, 1e3));
    let f2 = objective(inst, v, &along(ray, 1e6));
    f0.is_finite() && f1 > f0 && (f2 - f1) >= 0.5 * (1e6 - 1e3) * ray.slope
}

fn stochastic_duality() -> Outcome {
    let opts = OracleOptions::default();
    let (mut count, mut rays) = (0, 0);
    for seed in 0..36u64 {
        let mut r = rng(2000 + seed);
        let periods = r.gen_range(1..=3);
        let recipe = Recipe {
            periods,
            branching: (1, 3),
            dim: r.gen_range(1..=2),
            null_cells: random_null_cells(&mut r, periods, 1),
            random_weights: r.gen_bool(0.5),
            ..Recipe::default()
        };
        let inst = random_instance(&mut r, &recipe).map_err(|e| e.to_string())?;
        for kind in [DualKind::InDomain, DualKind::Martingale, DualKind::Arbitrary] {
            let v = random_dual(&mut r, &inst, kind);
            let f = inst.conjugate_formula(&v).map_err(|e| e.to_string())?.value;
            let o = conjugate_bruteforce(&inst, &v.v_minus, &v.v, &opts).map_err(|e| e.to_string())?;
            ensure!(agree(f, o.value, 1e-5), "seed {seed} {kind:?}: formula {f} oracle {}", o.value);
            if f == f64::INFINITY {
                let ray = o.ray.as_ref().ok_or(format!("seed {seed} {kind:?}: +inf without a ray"))?;
                ensure!(ray.slope > 0.0 && ray_certifies(&inst, &v, ray), "seed {seed} {kind:?}: ray does not certify divergence");
                rays += 1;
            }
        }
        count += 1;
    }
    ensure!(rays > 0, "no infinite branch was exercised");
    Ok(format!("{count} instances, {rays} divergence rays certified"))
}

fn curvature(f: &SeparableFn, coord: usize) -> f64 {
    f.components()[coord].pieces()[0].a
}

fn subdifferential_equivalence() -> Outcome {
    let eps = 1e-3;
    let mut perturbations = 0;
    let mut count = 0;
    for seed in 0..30u64 {
        let mut r = rng(3000 + seed);
        let periods = r.gen_range(1..=3);
        let recipe = Recipe {
            periods,
            branching: (1, 3),
            dim: r.gen_range(1..=2),
            null_cells: if seed % 3 == 0 { vec![r.gen_range(1..=periods)] } else { vec![] },
            running: Family::Quadratic,
            initial: Family::Quadratic,
            terminal: Family::Quadratic,
            random_weights: r.gen_bool(0.5),
            ..Recipe::default()
        };
        let inst = random_instance(&mut r, &recipe).map_err(|e| e.to_string())?;
        let tree = inst.tree();
        let x = random_feasible_path(&mut r, &inst);
        let v = inst.optimal_dual(&x).map_err(|e| e.to_string())?;
        let rep = inst.subdiff_check(&x, &v, SUBDIFF_TOL).map_err(|e| e.to_string())?;
        ensure!(rep.all_hold() && rep.gap.abs() <= 1e-8, "seed {seed}: optimal pair gap {}", rep.gap);

        let coord = r.gen_range(0..inst.dim());
        let leaf = tree.leaves()[r.gen_range(0..tree.leaves().len())];
        let mut cases: Vec<(ConditionKind, Option<usize>, f64)> = vec![
            (ConditionKind::Initial, None, eps * eps / (4.0 * curvature(inst.k0(), coord))),
            (ConditionKind::Terminal, Some(leaf), tree.prob(leaf) * eps * eps / (4.0 * curvature(inst.kt(leaf), coord))),
        ];
        if let Some(n) = tree.inner_nodes().find(|&n| !inst.mu().weight(n).is_null()) {
            let w = inst.mu().weight(n).mass();
            let shift = eps / w;
            cases.push((ConditionKind::Density, Some(n), tree.prob(n) * w * shift * shift / (4.0 * curvature(inst.h(n), coord))));
        }
        if let Some(n) = tree.inner_nodes().find(|&n| inst.mu().weight(n).is_null()) {
            // a finite quadratic has no room for singular mass
            cases.push((ConditionKind::Singular, Some(n), f64::INFINITY));
        }
        for (kind, node, predicted) in cases {
            let p = inst.perturb(&v, node, coord, eps);
            let rep = inst.subdiff_check(&x, &p, SUBDIFF_TOL).map_err(|e| e.to_string())?;
            ensure!(rep.failing_kinds() == vec![kind], "seed {seed}: perturbing {kind:?} broke {:?}", rep.failing_kinds());
            ensure!(
                rep.gap == predicted || (rep.gap - predicted).abs() <= 1e-9,
                "seed {seed} {kind:?}: gap {} predicted {predicted}",
                rep.gap
            );
            perturbations += 1;
        }
        count += 1;
    }

    let (loaded, bytes) = bvdual_cli::load_instance(&gallery_dir().join("quadratic_1period.json")).map_err(|e| e.to_string())?;
    let report = run("check-subdiff", &loaded, &bytes, &Settings::default()).map_err(|e| e.to_string())?;
    let e = bvdual_cli::suites::PERTURBATION;
    let rows: Vec<_> = report.checks.iter().filter(|c| c.name.contains("perturb")).collect();
    ensure!(!rows.is_empty(), "no perturbation rows on quadratic_1period");
    for c in rows {
        ensure!(c.pass && (c.lhs - e * e / 2.0).abs() <= 1e-9, "{}: gap {} expected {}", c.name, c.lhs, e * e / 2.0);
    }
    Ok(format!("{count} optimal pairs, {perturbations} single-condition perturbations, eps^2/2 on the quadratic instance"))
}

fn interchange() -> Outcome {
    let mut count = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..30u64 {
        let mut r = rng(4000 + seed);
        let periods = r.gen_range(1..=3);
        let recipe = Recipe {
            periods,
            branching: if seed % 4 == 0 { (1, 1) } else { (1, 3) },
            dim: r.gen_range(1..=2),
            running: [Family::General, Family::Finite, Family::Indicator, Family::Abs][seed as usize % 4],
            coercive_running: true,
            null_cells: if seed % 5 == 0 { vec![1] } else { vec![] },
            ..Recipe::default()
        };
        let inst = random_instance(&mut r, &recipe).map_err(|e| e.to_string())?;
        let h = inst.parts().h.clone();
        let probe = interchange_tree(inst.tree(), inst.mu(), &h, &[]).map_err(|e| e.to_string())?;
        let tv = probe.candidates.iter().map(|c| c.variation).fold(0.0, f64::max);
        let budgets: Vec<f64> = [0.0, 0.125, 0.25, 0.5, 1.0, 2.0].iter().map(|f| f * tv).collect();
        let rep = interchange_tree(inst.tree(), inst.mu(), &h, &budgets).map_err(|e| e.to_string())?;
        ensure!(rep.monotone(), "seed {seed}: not monotone {:?}", rep.lhs);
        ensure!(rep.bounded_by_rhs(1e-9), "seed {seed}: below the pointwise bound");
        let last = *rep.lhs.last().expect("budgets");
        ensure!(last - rep.rhs <= 1e-6, "seed {seed}: LHS {last} RHS {}", rep.rhs);
        worst = worst.max(last - rep.rhs);
        count += 1;
    }
    Ok(format!("{count} instances, worst LHS - RHS {worst:e}"))
}

fn partitions(n: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << (n - 1)))
        .map(|mask| {
            let mut p = vec![0];
            p.extend((1..n).filter(|k| mask >> (k - 1) & 1 == 1));
            p.push(n);
            p
        })
        .collect()
}

fn quasimartingale() -> Outcome {
    let mut count = 0;
    for seed in 0..120u64 {
        let mut r = rng(5000 + seed);
        let periods = r.gen_range(1..=4);
        let tree = random_tree(&mut r, periods, (1, 2));
        let d = if seed % 5 == 0 { 2 } else { 1 };
        let v = random_adapted(&mut r, &tree, d);
        let var = mean_variation(&v, &tree);
        let dec = rao_decompose(&v, &tree).map_err(|e| e.to_string())?;
        let tv = dec.expected_compensator_variation(&tree);
        ensure!((var - tv).abs() <= 1e-10, "seed {seed}: Var {var} vs E|Da| {tv}");
        if d == 1 {
            let sup = var_support_bruteforce(&v, &tree, 1 << 16);
            ensure!((var - sup.value).abs() <= 1e-9, "seed {seed}: Var {var} vs support {}", sup.value);
        }
        let x = random_path(&mut r, &tree, d, 2.0);
        let gap = ibp_check(&v, &x, &tree).map_err(|e| e.to_string())?;
        ensure!(gap <= 1e-10, "seed {seed}: integration by parts gap {gap}");
        let parts = partitions(tree.n_periods());
        let values = parts
            .iter()
            .map(|p| mean_variation_on(&v, &tree, p))
            .collect::<bvdual::Result<Vec<f64>>>()
            .map_err(|e| e.to_string())?;
        for (i, p) in parts.iter().enumerate() {
            for (j, q) in parts.iter().enumerate() {
                if p.iter().all(|k| q.contains(k)) {
                    ensure!(values[i] <= values[j] + 1e-10, "seed {seed}: refinement {p:?} -> {q:?} decreased");
                }
            }
        }
        count += 1;
    }
    Ok(format!("{count} random processes"))
}

fn projections() -> Outcome {
    let mut taus = 0u128;
    for seed in 0..20u64 {
        let mut r = rng(6000 + seed);
        let periods = r.gen_range(1..=4);
        let tree = random_tree(&mut r, periods, (1, 2));
        let d = r.gen_range(1..=2);
        let raw = random_raw(&mut r, &tree, d);
        let opt = optional_projection(&raw, &tree).map_err(|e| e.to_string())?;
        let pred = predictable_projection(&raw, &tree).map_err(|e| e.to_string())?;
        let mut worst: f64 = 0.0;
        for_each_stopping_time(&tree, |tau| {
            worst = worst.max(optional_identity_gap(&raw, &opt, &tree, tau));
            taus += 1;
        });
        for_each_predictable_stopping_time(&tree, |tau| {
            worst = worst.max(predictable_identity_gap(&raw, &pred, &tree, tau));
        });
        ensure!(worst <= 1e-10, "seed {seed}: identity defect {worst} over {} stopping times", count_stopping_times(&tree));
    }

    let mut jensen = 0;
    for seed in 0..30u64 {
        let mut r = rng(6500 + seed);
        let periods = r.gen_range(1..=3);
        let inst = random_instance(&mut r, &Recipe {
            periods,
            branching: (2, 3),
            running: Family::Quadratic,
            ..Recipe::default()
        })
        .map_err(|e| e.to_string())?;
        let tree = inst.tree();
        let raw = random_raw_near(&mut r, &inst);
        let j = inst.jensen_check(&raw).map_err(|e| e.to_string())?;
        let proj = optional_projection(&raw, tree).map_err(|e| e.to_string())?;
        let moved = (0..tree.n_scenarios()).any(|s| {
            (1..=tree.n_periods()).any(|k| {
                let n = tree.path(s)[k];
                raw.at(s, k).iter().zip(proj.get(n)).any(|(a, b)| (a - b).abs() > 1e-6)
            })
        });
        ensure!(j.raw >= j.optional - 1e-10, "seed {seed}: Jensen fails {} < {}", j.raw, j.optional);
        ensure!(!moved || j.raw - j.optional > 1e-10, "seed {seed}: equality on a non-adapted process");
        let adapted = AdaptedProcess::new(tree, inst.witness().path.s.clone()).map_err(|e| e.to_string())?.to_raw(tree);
        let j = inst.jensen_check(&adapted).map_err(|e| e.to_string())?;
        ensure!((j.raw - j.optional).abs() <= 1e-10, "seed {seed}: adapted process moved by projection");
        jensen += 1;
    }
    Ok(format!("{taus} stopping times on 20 trees, Jensen on {jensen} instances"))
}

fn adjoint() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..24u64 {
        let mut r = rng(7000 + seed);
        let periods = r.gen_range(1..=3);
        let recipe = Recipe {
            periods,
            branching: (1, 3),
            random_weights: true,
            ..Recipe::default()
        };
        let inst = random_instance(&mut r, &recipe).map_err(|e| e.to_string())?;
        let tree = inst.tree();
        let d = r.gen_range(1..=2);
        let w = random_cell_field(&mut r, tree, d, false);
        let x = random_path(&mut r, tree, d, 2.0);
        let lhs = embedding_pairing(&x, &w, tree, inst.mu());
        let (vm, v) = adjoint_embedding(&w, tree, inst.mu()).map_err(|e| e.to_string())?;
        let rhs = x.pairing(tree, &vm, &v);
        ensure!((lhs - rhs).abs() <= 1e-10, "seed {seed}: {lhs} vs {rhs}");
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(format!("24 random trees, worst defect {worst:e}"))
}

fn recession() -> Outcome {
    let families = [Family::General, Family::Finite, Family::Abs, Family::Indicator, Family::Quadratic];
    let (mut count, mut infinite) = (0, 0);
    let mut coercive = [0, 0];
    for seed in 0..40u64 {
        let mut r = rng(8000 + seed);
        let fam = families[seed as usize % families.len()];
        let periods = r.gen_range(1..=3);
        let recipe = Recipe {
            periods,
            branching: (1, 2),
            running: fam,
            initial: fam,
            terminal: fam,
            null_cells: if seed % 3 == 0 { vec![1] } else { vec![] },
            ..Recipe::default()
        };
        let inst = random_instance(&mut r, &recipe).map_err(|e| e.to_string())?;
        for _ in 0..3 {
            let x = random_path(&mut r, inst.tree(), inst.dim(), 1.0);
            let c = inst.recession_check(&x, 1e6, 1e-6).map_err(|e| e.to_string())?;
            ensure!(c.agrees && c.monotone, "seed {seed} {fam:?}: formula {} limit {}", c.formula, c.limit);
            if c.formula == f64::INFINITY {
                infinite += 1;
            }
            count += 1;
        }
        let tree = inst.tree();
        let zero = |f: &SeparableFn| f.recession().components().iter().all(Plq::is_zero_indicator);
        let direct = zero(inst.k0()) && tree.inner_nodes().all(|n| zero(inst.h(n))) && tree.leaves().iter().all(|&l| zero(inst.kt(l)));
        ensure!(inst.coercivity_check() == direct, "seed {seed}: coercivity_check disagrees");
        coercive[direct as usize] += 1;
    }
    ensure!(coercive[0] > 0 && coercive[1] > 0, "coercivity only seen one way: {coercive:?}");
    Ok(format!("{count} directions ({infinite} infinite), coercive {} / non-coercive {}", coercive[1], coercive[0]))
}

fn corollaries() -> Outcome {
    let opts = OracleOptions::default();
    let mut per_shape: std::collections::BTreeMap<&'static str, usize> = Default::default();
    let (mut singular_mass, mut unit_ball) = (false, false);
    for path in gallery_files() {
        let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
        let loaded = InstanceFile::parse(&text).and_then(|f| f.load()).map_err(|e| format!("{}: {e:#}", path.display()))?;
        let inst = &loaded.inst;
        let shapes = inst.shapes();
        if shapes.is_empty() {
            continue;
        }
        let mut ok = true;
        for v in loaded.duals.values() {
            for c in corollary_suite(inst, v, &opts, 1e-5).map_err(|e| e.to_string())? {
                ensure!(c.pass, "{}: {} {} lhs {} rhs {}", path.display(), c.shape.label(), c.name, c.lhs, c.rhs);
                ok &= c.pass;
                singular_mass |= c.name == "singular-mass-forces-infinity" && c.lhs > 0.0;
                unit_ball |= c.name == "unit-ball-recovers-mean-variation";
            }
        }
        if ok && !loaded.duals.is_empty() {
            for s in shapes {
                *per_shape.entry(s.label()).or_default() += 1;
            }
        }
    }
    for s in [Shape::FiniteIntegrand, Shape::Indicator, Shape::NoRunningCost, Shape::ZeroInitial] {
        let n = per_shape.get(s.label()).copied().unwrap_or(0);
        ensure!(n >= 3, "{} covered by {n} gallery instances", s.label());
    }
    ensure!(singular_mass, "no gallery dual puts mass on a null cell");
    ensure!(unit_ball, "no unit-ball instance in the gallery");
    Ok(format!("{per_shape:?}"))
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_bvdual");
    let files = gallery_files();
    let variants: [&[&str]; 2] = [&["--format", "report"], &["--format", "table", "--parallel", "--refine", "2"]];
    for path in &files {
        for extra in variants {
            let once = || {
                Command::new(bin)
                    .args(["all", "--seed", "7", "--instance"])
                    .arg(path)
                    .args(extra)
                    .output()
                    .expect("run bvdual")
            };
            let (a, b) = (once(), once());
            ensure!(a.status.code() == Some(0), "{}: exit {:?}", path.display(), a.status.code());
            ensure!(a.stdout == b.stdout && !a.stdout.is_empty(), "{} {extra:?}: outputs differ", path.display());
        }
    }
    Ok(format!("{} gallery instances, every suite, two output variants", files.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("convex calculus", convex_suite),
        ("deterministic duality", deterministic_duality),
        ("stochastic duality", stochastic_duality),
        ("subdifferential equivalence", subdifferential_equivalence),
        ("interchange", interchange),
        ("quasimartingale identities", quasimartingale),
        ("projections and Jensen", projections),
        ("adjoint identity", adjoint),
        ("recession", recession),
        ("special cases on the gallery", corollaries),
        ("determinism", determinism),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
