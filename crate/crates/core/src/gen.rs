//! Seeded random instances, paths and dual elements for property suites.

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::convex::{Interval, Plq, SeparableFn};
use crate::duality::{BolzaInstance, Certificate, DualCandidate, InstanceParts, Witness};
use crate::error::Result;
use crate::time_grid::TimeGrid;
use crate::tree::{
    AdaptedPath, AdaptedProcess, CellField, NodeSpec, Prob, RandomRefMeasure, RawProcess,
    ScenarioTree,
};

/// Shape of a generated convex function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Random piecewise linear-quadratic, possibly with a bounded domain.
    General,
    /// Strictly convex quadratic on the whole line.
    Quadratic,
    /// Piecewise linear-quadratic, finite everywhere.
    Finite,
    /// Indicator of a random interval.
    Indicator,
    /// Identically zero.
    Zero,
    /// Indicator of `{0}`.
    ZeroPoint,
    /// `k|x|`.
    Abs,
}

/// A point of `I`, spread over a unit-scale window when `I` is unbounded.
pub fn sample_in<R: Rng>(rng: &mut R, i: Interval) -> f64 {
    match (i.lo.is_finite(), i.hi.is_finite()) {
        (true, true) if i.lo == i.hi => i.lo,
        (true, true) => rng.gen_range(i.lo..=i.hi),
        (true, false) => i.lo + rng.gen_range(0.0..2.0),
        (false, true) => i.hi - rng.gen_range(0.0..2.0),
        (false, false) => rng.gen_range(-2.0..2.0),
    }
}

fn piecewise<R: Rng>(rng: &mut R, lo: f64, hi: f64, center: f64) -> Plq {
    let span_lo = if lo.is_finite() { lo } else { center - 3.0 };
    let span_hi = if hi.is_finite() { hi } else { center + 3.0 };
    let mut breaks: Vec<f64> = (0..rng.gen_range(0..=3))
        .map(|_| rng.gen_range(span_lo..span_hi))
        .filter(|&b| b > lo + 0.05 && b < hi - 0.05)
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 0.05);
    let curv = |rng: &mut R| if rng.gen_bool(0.4) { 0.0 } else { rng.gen_range(0.1..1.5) };
    let mut a = curv(rng);
    let mut b = rng.gen_range(-2.0..2.0);
    let mut c = rng.gen_range(-1.0..1.0);
    let mut pieces = vec![crate::convex::Quad { a, b, c }];
    for &x in &breaks {
        let d = 2.0 * a * x + b + rng.gen_range(0.2..2.0);
        let v = a * x * x + b * x + c;
        a = curv(rng);
        b = d - 2.0 * a * x;
        c = v - a * x * x - b * x;
        pieces.push(crate::convex::Quad { a, b, c });
    }
    Plq::new(lo, hi, breaks, pieces).expect("generated function is convex")
}

fn random_domain<R: Rng>(rng: &mut R, center: f64, radius: f64) -> (f64, f64) {
    let l = center - radius - rng.gen_range(0.0..1.5);
    let u = center + radius + rng.gen_range(0.0..1.5);
    match rng.gen_range(0..4) {
        0 => (f64::NEG_INFINITY, f64::INFINITY),
        1 => (l, f64::INFINITY),
        2 => (f64::NEG_INFINITY, u),
        _ => (l, u),
    }
}

/// A function of the given family whose domain contains
/// `[center - radius, center + radius]` (except `ZeroPoint`).
pub fn random_plq<R: Rng>(rng: &mut R, family: Family, center: f64, radius: f64) -> Plq {
    match family {
        Family::General => {
            let (lo, hi) = random_domain(rng, center, radius);
            piecewise(rng, lo, hi, center)
        }
        Family::Finite => piecewise(rng, f64::NEG_INFINITY, f64::INFINITY, center),
        Family::Quadratic => Plq::quadratic(
            rng.gen_range(0.25..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-1.0..1.0),
        )
        .expect("positive curvature"),
        Family::Indicator => {
            let (lo, hi) = random_domain(rng, center, radius);
            Plq::indicator(lo, hi).expect("nonempty interval")
        }
        Family::Zero => Plq::zero(),
        Family::ZeroPoint => Plq::indicator(0.0, 0.0).expect("point"),
        Family::Abs => Plq::abs_scaled(rng.gen_range(0.2..2.0)).expect("positive"),
    }
}

/// A tree with `periods` periods and between `branching.0` and
/// `branching.1` children per node, with exact random probabilities.
pub fn random_tree<R: Rng>(rng: &mut R, periods: usize, branching: (usize, usize)) -> ScenarioTree {
    let (bmin, bmax) = (branching.0.max(1), branching.1.max(branching.0.max(1)));
    let mut specs = vec![NodeSpec {
        id: 0,
        parent: None,
        time: 0,
        prob: Prob::Ratio(1, 1),
    }];
    let mut frontier = vec![(0u64, Ratio::new(1i64, 1))];
    let mut next_id = 1;
    for k in 1..=periods {
        let mut next = vec![];
        for &(pid, p) in &frontier {
            let b = rng.gen_range(bmin..=bmax);
            let weights: Vec<i64> = (0..b).map(|_| rng.gen_range(1..=3)).collect();
            let total: i64 = weights.iter().sum();
            for w in weights {
                let q = p * Ratio::new(w, total);
                specs.push(NodeSpec {
                    id: next_id,
                    parent: Some(pid),
                    time: k,
                    prob: Prob::Ratio(*q.numer(), *q.denom()),
                });
                next.push((next_id, q));
                next_id += 1;
            }
        }
        frontier = next;
    }
    ScenarioTree::new(specs).expect("generated tree is valid")
}

/// Recipe for [`random_instance`].
#[derive(Debug, Clone, PartialEq)]
pub struct Recipe {
    pub periods: usize,
    pub branching: (usize, usize),
    pub dim: usize,
    /// Null cells, 1-based.
    pub null_cells: Vec<usize>,
    pub running: Family,
    pub initial: Family,
    pub terminal: Family,
    /// Node-dependent cell weights instead of cell lengths.
    pub random_weights: bool,
    /// Add a small quadratic to every running cost so it is bounded below.
    pub coercive_running: bool,
}

impl Default for Recipe {
    fn default() -> Self {
        Recipe {
            periods: 2,
            branching: (1, 2),
            dim: 1,
            null_cells: vec![],
            running: Family::General,
            initial: Family::General,
            terminal: Family::General,
            random_weights: false,
            coercive_running: false,
        }
    }
}

fn separable<R: Rng>(rng: &mut R, family: Family, center: &[f64], radius: f64, coercive: bool) -> SeparableFn {
    let comps = center
        .iter()
        .map(|&c| {
            let f = random_plq(rng, family, c, radius);
            if coercive {
                f.add(&Plq::quadratic(0.2, 0.0, 0.0).expect("convex"))
                    .expect("full domain")
            } else {
                f
            }
        })
        .collect();
    SeparableFn::new(comps).expect("d ≥ 1")
}

fn centre<R: Rng>(rng: &mut R, family: Family, d: usize) -> Vec<f64> {
    if family == Family::ZeroPoint {
        vec![0.0; d]
    } else {
        (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }
}

/// A validated instance with witness and certificates.
pub fn random_instance<R: Rng>(rng: &mut R, recipe: &Recipe) -> Result<BolzaInstance> {
    let tree = random_tree(rng, recipe.periods, recipe.branching);
    let n = recipe.periods;
    let d = recipe.dim;
    let mut times = vec![0.0];
    for _ in 0..n {
        let last = *times.last().expect("nonempty");
        times.push(last + rng.gen_range(0.3..1.2));
    }
    let null: Vec<bool> = (1..=n).map(|k| recipe.null_cells.contains(&k)).collect();
    let weights = (0..tree.len())
        .map(|m| {
            let k = tree.depth(m);
            if k == n {
                0.0
            } else if recipe.random_weights {
                rng.gen_range(0.3..1.5)
            } else {
                times[k + 1] - times[k]
            }
        })
        .collect();
    let mu = RandomRefMeasure::new(&tree, TimeGrid::new(times)?, null, weights)?;
    let radius = rng.gen_range(0.1..0.5);
    let x0 = centre(rng, recipe.initial, d);
    let mut s = vec![];
    for m in 0..tree.len() {
        let fam = if tree.is_leaf(m) { recipe.terminal } else { recipe.running };
        s.push(centre(rng, fam, d));
    }
    let path = AdaptedPath::new(&tree, x0.clone(), s)?;
    let mut h = vec![None; tree.len()];
    let mut kt = vec![None; tree.len()];
    let mut certificate = vec![None; tree.len()];
    let mut beta = vec![0.0; tree.len()];
    for m in 0..tree.len() {
        if tree.is_leaf(m) {
            kt[m] = Some(separable(rng, recipe.terminal, &path.s[m], radius, false));
        } else {
            let f = separable(rng, recipe.running, &path.s[m], radius, recipe.coercive_running);
            certificate[m] = Some(Certificate::derive(&f)?);
            beta[m] = f
                .components()
                .iter()
                .zip(&path.s[m])
                .map(|(g, &c)| g.eval(c - radius).max(g.eval(c + radius)))
                .sum::<f64>()
                + rng.gen_range(0.0..0.1);
            h[m] = Some(f);
        }
    }
    let k0 = separable(rng, recipe.initial, &x0, radius, false);
    BolzaInstance::new(InstanceParts {
        name: "random".into(),
        tree,
        mu,
        h,
        k0,
        kt,
        certificate,
        witness: Witness {
            radius,
            path,
            beta,
        },
    })
}

fn sample_dom<R: Rng>(rng: &mut R, f: &SeparableFn) -> Vec<f64> {
    f.components()
        .iter()
        .map(|g| {
            let dom = g.conjugate().expect("proper").domain();
            sample_in(rng, dom)
        })
        .collect()
}

/// How [`random_dual`] chooses its candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualKind {
    /// Every conjugate term finite by construction.
    InDomain,
    /// A martingale with finite endpoint terms.
    Martingale,
    /// Unconstrained values; the conjugate is often `+inf`.
    Arbitrary,
}

/// A dual element built backwards from points in the conjugate domains.
pub fn random_dual<R: Rng>(rng: &mut R, inst: &BolzaInstance, kind: DualKind) -> DualCandidate {
    let tree = inst.tree();
    let d = inst.dim();
    let mut v = AdaptedProcess::zeros(tree, d);
    if kind == DualKind::Arbitrary {
        for m in 0..tree.len() {
            v.set(m, (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect());
        }
        let v_minus = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        return DualCandidate { v_minus, v };
    }
    for m in (0..tree.len()).rev() {
        if tree.is_leaf(m) {
            v.set(m, sample_dom(rng, inst.kt(m)));
            continue;
        }
        let mean = v.next_mean(tree, m);
        let add: Vec<f64> = match (kind, inst.mu().weight(m)) {
            (DualKind::Martingale, _) => vec![0.0; d],
            (_, crate::time_grid::CellWeight::Regular(w)) => {
                sample_dom(rng, inst.h(m)).iter().map(|y| w * y).collect()
            }
            (_, crate::time_grid::CellWeight::Null) => sample_dom(rng, &inst.h(m).domain_indicator()),
        };
        v.set(m, mean.iter().zip(&add).map(|(a, b)| a + b).collect());
    }
    let y0 = sample_dom(rng, inst.k0());
    let v_minus = v.get(tree.root()).iter().zip(&y0).map(|(a, b)| a + b).collect();
    DualCandidate { v_minus, v }
}

/// A feasible path: the witness moved inside its ball, with endpoints moved
/// only where the endpoint cost is finite everywhere.
pub fn random_feasible_path<R: Rng>(rng: &mut R, inst: &BolzaInstance) -> AdaptedPath {
    let tree = inst.tree();
    let w = inst.witness();
    let r = w.radius;
    let mut x = w.path.clone();
    let jiggle = |rng: &mut R, vals: &mut Vec<f64>, f: Option<&SeparableFn>| {
        for (i, c) in vals.iter_mut().enumerate() {
            let free = f.map_or(true, |f| f.components()[i].is_finite_everywhere());
            if free {
                *c += rng.gen_range(-0.9 * r..0.9 * r);
            }
        }
    };
    jiggle(rng, &mut x.x0, Some(inst.k0()));
    for m in 0..tree.len() {
        let f = if tree.is_leaf(m) { Some(inst.kt(m)) } else { None };
        jiggle(rng, &mut x.s[m], f);
    }
    x
}

/// Any path with values in `[-scale, scale]`.
pub fn random_path<R: Rng>(rng: &mut R, tree: &ScenarioTree, dim: usize, scale: f64) -> AdaptedPath {
    let mut draw = || (0..dim).map(|_| rng.gen_range(-scale..=scale)).collect::<Vec<f64>>();
    let x0 = draw();
    let s = (0..tree.len()).map(|_| draw()).collect();
    AdaptedPath { x0, s }
}

pub fn random_adapted<R: Rng>(rng: &mut R, tree: &ScenarioTree, dim: usize) -> AdaptedProcess {
    let values = (0..tree.len())
        .map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    AdaptedProcess::new(tree, values).expect("shape matches")
}

/// Per-scenario values at times `0..=N`, not necessarily adapted.
pub fn random_raw<R: Rng>(rng: &mut R, tree: &ScenarioTree, dim: usize) -> RawProcess {
    let values = (0..tree.n_scenarios())
        .map(|_| {
            (0..=tree.n_periods())
                .map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect()
        })
        .collect();
    RawProcess::new(tree, values).expect("shape matches")
}

/// Per-scenario cell values; `predictable` makes cell `k` depend only on the
/// node where it starts.
pub fn random_cell_field<R: Rng>(rng: &mut R, tree: &ScenarioTree, dim: usize, predictable: bool) -> CellField {
    let node_vals: Vec<Vec<f64>> = (0..tree.len())
        .map(|_| (0..dim).map(|_| rng.gen_range(0.2..1.5)).collect())
        .collect();
    let values = (0..tree.n_scenarios())
        .map(|s| {
            (1..=tree.n_periods())
                .map(|k| {
                    if predictable {
                        node_vals[tree.path(s)[k - 1]].clone()
                    } else {
                        (0..dim).map(|_| rng.gen_range(0.2..1.5)).collect()
                    }
                })
                .collect()
        })
        .collect();
    CellField::new(tree, values).expect("shape matches")
}

/// Up to `max` distinct null cells out of `1..=n`.
pub fn random_null_cells<R: Rng>(rng: &mut R, n: usize, max: usize) -> Vec<usize> {
    let mut cells: Vec<usize> = (1..=n).collect();
    cells.shuffle(rng);
    cells.truncate(rng.gen_range(0..=max.min(n)));
    cells.sort_unstable();
    cells
}

/// A raw process whose time-`k` value lies in the witness ball of the node
/// where cell `k` starts, so every running term stays finite.
pub fn random_raw_near<R: Rng>(rng: &mut R, inst: &BolzaInstance) -> RawProcess {
    let tree = inst.tree();
    let w = inst.witness();
    let r = w.radius;
    let values = (0..tree.n_scenarios())
        .map(|s| {
            let path = tree.path(s);
            (0..=tree.n_periods())
                .map(|k| {
                    let centre = if k == 0 { &w.path.x0 } else { &w.path.s[path[k - 1]] };
                    centre.iter().map(|c| c + rng.gen_range(-r..r)).collect()
                })
                .collect()
        })
        .collect();
    RawProcess::new(tree, values).expect("shape matches")
}
