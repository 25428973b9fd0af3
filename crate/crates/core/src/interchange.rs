//! Minimisation of `EI_h` over adapted paths with bounded pathwise variation.
//!
//! For each coordinate a backward dynamic programme on the tree solves the
//! penalised problem `min EI_h(x) + λ E Σ |J|`: the value function at a node
//! is its own cost plus the infimal convolution of each child's value with
//! `λ p_c |·|`. Sweeping `λ` traces the variation/value trade-off; the
//! budgeted infimum is read off the candidates.

use crate::convex::{Plq, SeparableFn};
use crate::error::{Error, Result};
use crate::time_grid::{CellWeight, RefMeasure};
use crate::tree::{AdaptedPath, RandomRefMeasure, ScenarioTree};

const INF: f64 = f64::INFINITY;

/// One path produced by the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// Penalty used; `None` for the minimum-variation and constant paths.
    pub lambda: Option<f64>,
    pub variation: f64,
    pub value: f64,
    pub path: AdaptedPath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterchangeReport {
    /// `E ∫ inf h dμ`.
    pub rhs: f64,
    pub budgets: Vec<f64>,
    /// `inf {EI_h(x) : max pathwise variation ≤ B}` over the candidates.
    pub lhs: Vec<f64>,
    pub candidates: Vec<Candidate>,
}

impl InterchangeReport {
    /// `lhs` never increases with the budget.
    pub fn monotone(&self) -> bool {
        self.lhs.windows(2).all(|w| w[1] <= w[0])
    }

    /// The largest budget reaches the pointwise infimum within `tol`.
    pub fn converged(&self, tol: f64) -> bool {
        match self.lhs.last() {
            Some(&l) => l - self.rhs <= tol * (1.0 + self.rhs.abs()),
            None => false,
        }
    }

    /// No candidate undercuts the pointwise bound.
    pub fn bounded_by_rhs(&self, tol: f64) -> bool {
        self.lhs.iter().all(|&l| l >= self.rhs - tol * (1.0 + self.rhs.abs()))
    }
}

fn node_cost(h: &SeparableFn, w: CellWeight, p: f64, coord: usize, feasibility: bool) -> Result<Plq> {
    let f = &h.components()[coord];
    match w {
        CellWeight::Regular(m) if !feasibility => f.scale(p * m),
        _ => Ok(f.domain_indicator()),
    }
}

/// Solves one coordinate of the penalised problem; returns node values.
fn solve_coord(
    tree: &ScenarioTree,
    mu: &RandomRefMeasure,
    h: &[Option<SeparableFn>],
    coord: usize,
    lambda: f64,
    feasibility: bool,
) -> Result<Vec<f64>> {
    let n_nodes = tree.len();
    let mut value: Vec<Option<Plq>> = vec![None; n_nodes];
    let mut window = vec![(f64::NEG_INFINITY, INF); n_nodes];
    for n in (0..n_nodes).rev() {
        if tree.is_leaf(n) {
            continue;
        }
        let hn = h[n].as_ref().ok_or_else(|| Error::Missing(format!("h at node {}", tree.id(n))))?;
        let mut v = node_cost(hn, mu.weight(n), tree.prob(n), coord, feasibility)?;
        for &c in tree.children(n) {
            let Some(vc) = value[c].take() else { continue };
            let (conv, win) = vc.inf_conv_abs(lambda * tree.prob(c)).ok_or_else(|| {
                Error::Infeasible(format!("value at node {} is unbounded below", tree.id(c)))
            })?;
            window[c] = win;
            v = v.add(&conv).ok_or_else(|| Error::Infeasible("empty domain".into()))?;
        }
        value[n] = Some(v);
    }
    let root = tree.root();
    let (inf, arg) = value[root].as_ref().expect("root is inner").infimum();
    if !inf.is_finite() {
        return Err(Error::Infeasible("penalised problem is unbounded below".into()));
    }
    let mut s = vec![0.0; n_nodes];
    s[root] = arg;
    for n in 0..n_nodes {
        if let Some(p) = tree.parent(n) {
            s[n] = if tree.is_leaf(n) {
                s[p]
            } else {
                s[p].clamp(window[n].0, window[n].1)
            };
        }
    }
    Ok(s)
}

fn assemble(tree: &ScenarioTree, cols: &[Vec<f64>]) -> AdaptedPath {
    let d = cols.len();
    let s: Vec<Vec<f64>> = (0..tree.len())
        .map(|n| (0..d).map(|i| cols[i][n]).collect())
        .collect();
    AdaptedPath {
        x0: s[tree.root()].clone(),
        s,
    }
}

/// `EI_h(x)` with `δ_{dom h}` on null cells.
pub fn integral_value(
    tree: &ScenarioTree,
    mu: &RandomRefMeasure,
    h: &[Option<SeparableFn>],
    x: &AdaptedPath,
) -> f64 {
    let mut total = 0.0;
    for n in tree.inner_nodes() {
        let hn = h[n].as_ref().expect("checked");
        let term = match mu.weight(n) {
            CellWeight::Regular(m) => m * hn.eval(&x.s[n]),
            CellWeight::Null => hn.domain_indicator().eval(&x.s[n]),
        };
        if term == INF {
            return INF;
        }
        total += tree.prob(n) * term;
    }
    total
}

/// Runs the solver for the given variation budgets.
pub fn interchange_tree(
    tree: &ScenarioTree,
    mu: &RandomRefMeasure,
    h: &[Option<SeparableFn>],
    budgets: &[f64],
) -> Result<InterchangeReport> {
    if h.len() != tree.len() {
        return Err(Error::Shape("one integrand per node".into()));
    }
    let d = tree
        .inner_nodes()
        .find_map(|n| h[n].as_ref().map(SeparableFn::dim))
        .ok_or_else(|| Error::Missing("integrands".into()))?;
    let mut rhs = 0.0;
    for n in tree.inner_nodes() {
        let hn = h[n].as_ref().ok_or_else(|| Error::Missing(format!("h at node {}", tree.id(n))))?;
        if hn.dim() != d {
            return Err(Error::Dimension {
                expected: d,
                got: hn.dim(),
            });
        }
        let inf = hn.infimum();
        if !inf.is_finite() {
            return Err(Error::Infeasible(format!(
                "h at node {} is unbounded below",
                tree.id(n)
            )));
        }
        if let CellWeight::Regular(m) = mu.weight(n) {
            rhs += tree.prob(n) * m * inf;
        }
    }

    let mut candidates = vec![];
    let mut push = |lambda: Option<f64>, path: AdaptedPath| {
        let value = integral_value(tree, mu, h, &path);
        candidates.push(Candidate {
            lambda,
            variation: path.max_variation(tree),
            value,
            path,
        });
    };

    let cols = (0..d)
        .map(|i| solve_coord(tree, mu, h, i, 1.0, true))
        .collect::<Result<Vec<_>>>()?;
    push(None, assemble(tree, &cols));

    // the constant path exists only when the domains along the tree intersect
    let mut constant = vec![];
    for i in 0..d {
        let mut total = Some(Plq::zero());
        for n in tree.inner_nodes() {
            let f = node_cost(h[n].as_ref().expect("checked"), mu.weight(n), tree.prob(n), i, false)?;
            total = total.and_then(|t| t.add(&f));
        }
        constant.push(total.map_or(f64::NAN, |t| t.infimum().1));
    }
    if constant.iter().all(|c| c.is_finite()) {
        let mut p = AdaptedPath::zeros(tree, d);
        p.x0 = constant.clone();
        for s in p.s.iter_mut() {
            s.clone_from(&constant);
        }
        push(None, p);
    }

    let mut ladder = vec![0.0];
    ladder.extend((-12..=16).map(|j| 2f64.powi(j)));
    for &lambda in &ladder {
        let cols = (0..d)
            .map(|i| solve_coord(tree, mu, h, i, lambda, false))
            .collect::<Result<Vec<_>>>()?;
        push(Some(lambda), assemble(tree, &cols));
    }

    let lhs = budgets
        .iter()
        .map(|&b| {
            candidates
                .iter()
                .filter(|c| c.variation <= b + 1e-12 * (1.0 + b))
                .map(|c| c.value)
                .fold(INF, f64::min)
        })
        .collect();
    Ok(InterchangeReport {
        rhs,
        budgets: budgets.to_vec(),
        lhs,
        candidates,
    })
}

/// The deterministic problem; every `dom h_k` must have nonempty interior.
pub fn interchange_det(h: &[SeparableFn], mu: &RefMeasure, budgets: &[f64]) -> Result<InterchangeReport> {
    if h.len() != mu.n_cells() {
        return Err(Error::Shape("one integrand per cell".into()));
    }
    for (k, f) in h.iter().enumerate() {
        if f.components().iter().any(|g| {
            let dom = g.domain();
            dom.lo >= dom.hi
        }) {
            return Err(Error::Infeasible(format!(
                "dom h on cell {} has empty interior",
                k + 1
            )));
        }
    }
    let tree = ScenarioTree::chain(h.len());
    let rmu = RandomRefMeasure::from_det(&tree, mu)?;
    let mut hs: Vec<Option<SeparableFn>> = h.iter().cloned().map(Some).collect();
    hs.push(None);
    interchange_tree(&tree, &rmu, &hs, budgets)
}
