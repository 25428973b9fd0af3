//! Finite filtered probability spaces given as scenario trees.
//!
//! Node `n` at depth `k` is an atom of `F_k`; scenarios are the leaves, all at
//! depth `N`. A process is *adapted* when it stores one value per node.
//! Nodes are indexed in `(depth, id)` order so that every reduction over
//! nodes runs in a fixed order.
//!
//! Cell `k + 1 = (t_k, t_{k+1}]` belongs to the node at depth `k` on each
//! scenario: integrands, reference weights and path values for that cell are
//! all known at `t_k`.

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::time_grid::{CellWeight, RefMeasure, TimeGrid};

/// Probability of a node: an exact ratio or a float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prob {
    Ratio(i64, i64),
    Float(f64),
}

impl Prob {
    pub fn value(&self) -> f64 {
        match *self {
            Prob::Ratio(n, d) => n as f64 / d as f64,
            Prob::Float(p) => p,
        }
    }
}

/// Input record for one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub id: u64,
    pub parent: Option<u64>,
    pub time: usize,
    pub prob: Prob,
}

#[derive(Debug, Clone, PartialEq)]
struct Node {
    id: u64,
    parent: Option<usize>,
    depth: usize,
    prob: f64,
    exact: Option<Ratio<i128>>,
    children: Vec<usize>,
}

/// A validated scenario tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTree {
    nodes: Vec<Node>,
    n_periods: usize,
    leaves: Vec<usize>,
    by_depth: Vec<Vec<usize>>,
    paths: Vec<Vec<usize>>,
}

const PROB_TOL: f64 = 1e-12;

impl ScenarioTree {
    /// Validates node records: one root of probability 1 at time 0, times
    /// equal to depths, children summing to their parent, all leaves at the
    /// final time. Sums are exact when every probability is a ratio.
    pub fn new(specs: Vec<NodeSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Invalid("tree has no nodes".into()));
        }
        let mut order: Vec<usize> = (0..specs.len()).collect();
        order.sort_by_key(|&i| (specs[i].time, specs[i].id));
        for w in order.windows(2) {
            if specs[w[0]].id == specs[w[1]].id {
                return Err(Error::invariant(
                    format!("node {}", specs[w[0]].id),
                    "duplicate node id",
                ));
            }
        }
        let index_of = |id: u64| order.iter().position(|&i| specs[i].id == id);
        let mut nodes = Vec::with_capacity(specs.len());
        for &i in &order {
            let s = &specs[i];
            let at = format!("node {}", s.id);
            let exact = match s.prob {
                Prob::Ratio(n, d) => {
                    if d <= 0 || n <= 0 {
                        return Err(Error::invariant(at, "probability must be a positive ratio"));
                    }
                    Some(Ratio::new(n as i128, d as i128))
                }
                Prob::Float(p) if !(p > 0.0 && p <= 1.0 + PROB_TOL) => {
                    return Err(Error::invariant(at, format!("probability {p} not in (0, 1]")));
                }
                Prob::Float(_) => None,
            };
            let parent = match s.parent {
                None => None,
                Some(pid) => Some(index_of(pid).ok_or_else(|| {
                    Error::invariant(&at, format!("unknown parent id {pid}"))
                })?),
            };
            nodes.push(Node {
                id: s.id,
                parent,
                depth: s.time,
                prob: s.prob.value(),
                exact,
                children: vec![],
            });
        }
        let roots: Vec<usize> = (0..nodes.len()).filter(|&n| nodes[n].parent.is_none()).collect();
        if roots != [0] {
            return Err(Error::invariant("root", "exactly one root at time 0 is required"));
        }
        if nodes[0].depth != 0 {
            return Err(Error::invariant("root", "root must sit at time 0"));
        }
        for n in 1..nodes.len() {
            let p = nodes[n].parent.expect("non-root");
            if nodes[n].depth != nodes[p].depth + 1 {
                return Err(Error::invariant(
                    format!("node {}", nodes[n].id),
                    "time index must equal parent's plus one",
                ));
            }
            nodes[p].children.push(n);
        }
        let root_one = match nodes[0].exact {
            Some(r) => r == Ratio::from_integer(1),
            None => (nodes[0].prob - 1.0).abs() <= PROB_TOL,
        };
        if !root_one {
            return Err(Error::invariant("root", "root probability must be 1"));
        }
        let n_periods = nodes.iter().map(|n| n.depth).max().unwrap_or(0);
        if n_periods == 0 {
            return Err(Error::invariant("tree", "at least one period is required"));
        }
        for n in 0..nodes.len() {
            let node = &nodes[n];
            if node.children.is_empty() {
                if node.depth != n_periods {
                    return Err(Error::invariant(
                        format!("node {}", node.id),
                        format!("leaf at time {} but the horizon is {n_periods}", node.depth),
                    ));
                }
                continue;
            }
            let all_exact = node.exact.is_some()
                && node.children.iter().all(|&c| nodes[c].exact.is_some());
            let ok = if all_exact {
                let sum: Ratio<i128> = node.children.iter().map(|&c| nodes[c].exact.unwrap()).sum();
                sum == node.exact.unwrap()
            } else {
                let sum: f64 = node.children.iter().map(|&c| nodes[c].prob).sum();
                (sum - node.prob).abs() <= PROB_TOL
            };
            if !ok {
                return Err(Error::invariant(
                    format!("node {}", node.id),
                    "children probabilities do not sum to the parent's",
                ));
            }
        }
        let mut by_depth = vec![vec![]; n_periods + 1];
        for (n, node) in nodes.iter().enumerate() {
            by_depth[node.depth].push(n);
        }
        let leaves = by_depth[n_periods].clone();
        let paths = leaves
            .iter()
            .map(|&l| {
                let mut p = vec![l];
                let mut cur = l;
                while let Some(par) = nodes[cur].parent {
                    p.push(par);
                    cur = par;
                }
                p.reverse();
                p
            })
            .collect();
        Ok(ScenarioTree {
            nodes,
            n_periods,
            leaves,
            by_depth,
            paths,
        })
    }

    /// A single scenario over `n` periods.
    pub fn chain(n: usize) -> Self {
        let specs = (0..=n)
            .map(|k| NodeSpec {
                id: k as u64,
                parent: k.checked_sub(1).map(|p| p as u64),
                time: k,
                prob: Prob::Ratio(1, 1),
            })
            .collect();
        ScenarioTree::new(specs).expect("chain is valid")
    }

    /// Every node has `branching` equally likely children for `n` periods.
    pub fn uniform(n: usize, branching: usize) -> Self {
        let b = branching.max(1) as i64;
        let mut specs = vec![NodeSpec {
            id: 0,
            parent: None,
            time: 0,
            prob: Prob::Ratio(1, 1),
        }];
        let mut frontier = vec![(0u64, 1i64)];
        let mut next_id = 1u64;
        for k in 1..=n {
            let mut next = vec![];
            for &(pid, den) in &frontier {
                for _ in 0..b {
                    specs.push(NodeSpec {
                        id: next_id,
                        parent: Some(pid),
                        time: k,
                        prob: Prob::Ratio(1, den * b),
                    });
                    next.push((next_id, den * b));
                    next_id += 1;
                }
            }
            frontier = next;
        }
        ScenarioTree::new(specs).expect("uniform tree is valid")
    }

    /// Node records in index order, suitable for serialisation.
    pub fn specs(&self) -> Vec<NodeSpec> {
        self.nodes
            .iter()
            .map(|n| NodeSpec {
                id: n.id,
                parent: n.parent.map(|p| self.nodes[p].id),
                time: n.depth,
                prob: match n.exact {
                    Some(r) => Prob::Ratio(*r.numer() as i64, *r.denom() as i64),
                    None => Prob::Float(n.prob),
                },
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn id(&self, n: usize) -> u64 {
        self.nodes[n].id
    }

    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn depth(&self, n: usize) -> usize {
        self.nodes[n].depth
    }

    pub fn prob(&self, n: usize) -> f64 {
        self.nodes[n].prob
    }

    pub fn parent(&self, n: usize) -> Option<usize> {
        self.nodes[n].parent
    }

    pub fn children(&self, n: usize) -> &[usize] {
        &self.nodes[n].children
    }

    pub fn is_leaf(&self, n: usize) -> bool {
        self.nodes[n].children.is_empty()
    }

    /// Leaves in index order; scenario `s` is `leaves()[s]`.
    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    pub fn n_scenarios(&self) -> usize {
        self.leaves.len()
    }

    pub fn nodes_at(&self, depth: usize) -> &[usize] {
        &self.by_depth[depth]
    }

    /// Nodes `n_0, …, n_N` along scenario `s`.
    pub fn path(&self, s: usize) -> &[usize] {
        &self.paths[s]
    }

    /// Indices of non-leaf nodes, in index order.
    pub fn inner_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&n| !self.is_leaf(n))
    }

    /// The ancestor of `n` at `depth` (`n` itself at its own depth).
    pub fn ancestor(&self, n: usize, depth: usize) -> usize {
        let mut cur = n;
        while self.nodes[cur].depth > depth {
            cur = self.nodes[cur].parent.expect("depth above root");
        }
        cur
    }

    /// Conditional probability of moving from the parent to `n`.
    pub fn cond_prob(&self, n: usize) -> f64 {
        match self.nodes[n].parent {
            Some(p) => self.nodes[n].prob / self.nodes[p].prob,
            None => 1.0,
        }
    }

    /// Scenarios (leaf positions) passing through `n`.
    pub fn scenarios_through(&self, n: usize) -> Vec<usize> {
        let d = self.depth(n);
        (0..self.n_scenarios())
            .filter(|&s| self.paths[s][d] == n)
            .collect()
    }

    /// Deterministic reference measure seen along scenario `s`.
    pub fn scenario_measure(&self, mu: &RandomRefMeasure, s: usize) -> RefMeasure {
        let cells = (0..self.n_periods).map(|k| mu.weight(self.paths[s][k])).collect();
        RefMeasure::new(mu.grid.clone(), cells).expect("validated weights")
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn axpy(acc: &mut [f64], a: f64, x: &[f64]) {
    for (o, v) in acc.iter_mut().zip(x) {
        *o += a * v;
    }
}

/// One vector per node.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedProcess {
    dim: usize,
    values: Vec<Vec<f64>>,
}

impl AdaptedProcess {
    pub fn new(tree: &ScenarioTree, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != tree.len() {
            return Err(Error::Shape(format!(
                "{} node values for {} nodes",
                values.len(),
                tree.len()
            )));
        }
        let dim = values[0].len();
        if dim == 0 {
            return Err(Error::Shape("process values need d ≥ 1".into()));
        }
        for v in &values {
            if v.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Invalid("process values must be finite".into()));
            }
        }
        Ok(AdaptedProcess { dim, values })
    }

    pub fn scalar(tree: &ScenarioTree, values: &[f64]) -> Result<Self> {
        AdaptedProcess::new(tree, values.iter().map(|&v| vec![v]).collect())
    }

    pub fn zeros(tree: &ScenarioTree, dim: usize) -> Self {
        AdaptedProcess {
            dim,
            values: vec![vec![0.0; dim]; tree.len()],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, n: usize) -> &[f64] {
        &self.values[n]
    }

    pub fn set(&mut self, n: usize, v: Vec<f64>) {
        debug_assert_eq!(v.len(), self.dim);
        self.values[n] = v;
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// `E[v_{k+1} | F_k]` at the non-leaf node `n`.
    pub fn next_mean(&self, tree: &ScenarioTree, n: usize) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        for &c in tree.children(n) {
            axpy(&mut acc, tree.cond_prob(c), &self.values[c]);
        }
        acc
    }

    /// Largest `|E[v_{k+1} | F_k] - v_k|` over non-leaf nodes.
    pub fn martingale_defect(&self, tree: &ScenarioTree) -> f64 {
        tree.inner_nodes()
            .map(|n| {
                let m = self.next_mean(tree, n);
                m.iter()
                    .zip(&self.values[n])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    pub fn is_martingale(&self, tree: &ScenarioTree, tol: f64) -> bool {
        self.martingale_defect(tree) <= tol
    }

    /// Componentwise `self + other`.
    pub fn add(&self, other: &AdaptedProcess) -> AdaptedProcess {
        AdaptedProcess {
            dim: self.dim,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
                .collect(),
        }
    }

    pub fn scaled(&self, alpha: f64) -> AdaptedProcess {
        AdaptedProcess {
            dim: self.dim,
            values: self
                .values
                .iter()
                .map(|v| v.iter().map(|x| alpha * x).collect())
                .collect(),
        }
    }

    /// The scenario-wise paths as a raw process.
    pub fn to_raw(&self, tree: &ScenarioTree) -> RawProcess {
        RawProcess {
            dim: self.dim,
            values: (0..tree.n_scenarios())
                .map(|s| tree.path(s).iter().map(|&n| self.values[n].clone()).collect())
                .collect(),
        }
    }
}

/// Per-scenario values at times `0..=N`, not necessarily adapted.
#[derive(Debug, Clone, PartialEq)]
pub struct RawProcess {
    dim: usize,
    values: Vec<Vec<Vec<f64>>>,
}

impl RawProcess {
    pub fn new(tree: &ScenarioTree, values: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if values.len() != tree.n_scenarios() {
            return Err(Error::Shape(format!(
                "{} scenario paths for {} scenarios",
                values.len(),
                tree.n_scenarios()
            )));
        }
        let dim = values
            .first()
            .and_then(|p| p.first())
            .map(Vec::len)
            .unwrap_or(0);
        if dim == 0 {
            return Err(Error::Shape("raw process values need d ≥ 1".into()));
        }
        for p in &values {
            if p.len() != tree.n_periods() + 1 {
                return Err(Error::Shape(format!(
                    "scenario path has {} times, expected {}",
                    p.len(),
                    tree.n_periods() + 1
                )));
            }
            for v in p {
                if v.len() != dim {
                    return Err(Error::Dimension {
                        expected: dim,
                        got: v.len(),
                    });
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Invalid("raw values must be finite".into()));
                }
            }
        }
        Ok(RawProcess { dim, values })
    }

    pub fn scalar(tree: &ScenarioTree, values: &[Vec<f64>]) -> Result<Self> {
        RawProcess::new(
            tree,
            values
                .iter()
                .map(|p| p.iter().map(|&v| vec![v]).collect())
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Value of scenario `s` at time `k`.
    pub fn at(&self, s: usize, k: usize) -> &[f64] {
        &self.values[s][k]
    }

    pub fn values(&self) -> &[Vec<Vec<f64>>] {
        &self.values
    }

    /// True when every time-`k` value is constant on the atoms of `F_k`.
    pub fn is_adapted(&self, tree: &ScenarioTree, tol: f64) -> bool {
        let proj = optional_projection(self, tree).expect("shape checked");
        (0..tree.n_scenarios()).all(|s| {
            tree.path(s).iter().enumerate().all(|(k, &n)| {
                self.values[s][k]
                    .iter()
                    .zip(proj.get(n))
                    .all(|(a, b)| (a - b).abs() <= tol)
            })
        })
    }
}

fn check_raw(raw: &RawProcess, tree: &ScenarioTree) -> Result<()> {
    if raw.values.len() != tree.n_scenarios()
        || raw.values.iter().any(|p| p.len() != tree.n_periods() + 1)
    {
        return Err(Error::Shape("raw process does not match the tree".into()));
    }
    Ok(())
}

/// `°v`: at a depth-`k` node, the probability-weighted mean of the time-`k`
/// values of the scenarios through it.
pub fn optional_projection(raw: &RawProcess, tree: &ScenarioTree) -> Result<AdaptedProcess> {
    check_raw(raw, tree)?;
    let mut acc = vec![vec![0.0; raw.dim]; tree.len()];
    for s in 0..tree.n_scenarios() {
        let ps = tree.prob(tree.leaves()[s]);
        for (k, &n) in tree.path(s).iter().enumerate() {
            axpy(&mut acc[n], ps, &raw.values[s][k]);
        }
    }
    for (n, a) in acc.iter_mut().enumerate() {
        let p = tree.prob(n);
        a.iter_mut().for_each(|v| *v /= p);
    }
    Ok(AdaptedProcess {
        dim: raw.dim,
        values: acc,
    })
}

/// `ᵖv`: the time-`k` value conditioned on `F_{k-1}`, stored at each depth-`k`
/// node (equal across siblings). At time 0 it is the plain mean.
pub fn predictable_projection(raw: &RawProcess, tree: &ScenarioTree) -> Result<AdaptedProcess> {
    check_raw(raw, tree)?;
    let mut out = vec![vec![0.0; raw.dim]; tree.len()];
    for n in 0..tree.len() {
        let m = tree.parent(n).unwrap_or(n);
        let mut sum = vec![0.0; raw.dim];
        for s in tree.scenarios_through(m) {
            axpy(&mut sum, tree.prob(tree.leaves()[s]), &raw.values[s][tree.depth(n)]);
        }
        let p = tree.prob(m);
        out[n] = sum.into_iter().map(|v| v / p).collect();
    }
    Ok(AdaptedProcess {
        dim: raw.dim,
        values: out,
    })
}

/// A stopping time given by the nodes where it stops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoppingTime {
    stop: Vec<bool>,
}

impl StoppingTime {
    /// No node may be flagged below an already flagged ancestor.
    pub fn new(tree: &ScenarioTree, stop: Vec<bool>) -> Result<Self> {
        if stop.len() != tree.len() {
            return Err(Error::Shape("one stop flag per node is required".into()));
        }
        for n in 0..tree.len() {
            let mut cur = tree.parent(n);
            while let Some(p) = cur {
                if stop[n] && stop[p] {
                    return Err(Error::invariant(
                        format!("node {}", tree.id(n)),
                        "stopped twice on one scenario",
                    ));
                }
                cur = tree.parent(p);
            }
        }
        Ok(StoppingTime { stop })
    }

    pub fn never(tree: &ScenarioTree) -> Self {
        StoppingTime {
            stop: vec![false; tree.len()],
        }
    }

    /// Stops at every node of the given depth.
    pub fn fixed(tree: &ScenarioTree, k: usize) -> Self {
        StoppingTime {
            stop: (0..tree.len()).map(|n| tree.depth(n) == k).collect(),
        }
    }

    pub fn stops_at(&self, n: usize) -> bool {
        self.stop[n]
    }

    pub fn stop_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.stop.iter().enumerate().filter(|(_, &b)| b).map(|(n, _)| n)
    }

    /// `τ(ω_s)`, or `None` for `+inf`.
    pub fn value(&self, tree: &ScenarioTree, s: usize) -> Option<usize> {
        tree.path(s).iter().position(|&n| self.stop[n])
    }

    /// Predictable: whenever a node stops, so do all its siblings.
    pub fn is_predictable(&self, tree: &ScenarioTree) -> bool {
        (1..tree.len()).all(|n| {
            let p = tree.parent(n).expect("non-root");
            tree.children(p).iter().all(|&c| self.stop[c] == self.stop[n])
        })
    }
}

/// Number of stopping times on the tree (saturating).
pub fn count_stopping_times(tree: &ScenarioTree) -> u128 {
    fn rec(tree: &ScenarioTree, n: usize) -> u128 {
        let below = tree
            .children(n)
            .iter()
            .fold(1u128, |acc, &c| acc.saturating_mul(rec(tree, c)));
        below.saturating_add(1)
    }
    rec(tree, 0)
}

/// Calls `f` on every stopping time of the tree.
pub fn for_each_stopping_time(tree: &ScenarioTree, mut f: impl FnMut(&StoppingTime)) {
    let mut st = StoppingTime::never(tree);
    fn choices(tree: &ScenarioTree, n: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![n]];
        let mut below: Vec<Vec<usize>> = vec![vec![]];
        for &c in tree.children(n) {
            let sub = choices(tree, c);
            let mut next = Vec::with_capacity(below.len() * sub.len());
            for b in &below {
                for s in &sub {
                    let mut v = b.clone();
                    v.extend_from_slice(s);
                    next.push(v);
                }
            }
            below = next;
        }
        out.extend(below);
        out
    }
    // Small trees only: the enumeration is materialised per subtree.
    for set in choices(tree, 0) {
        for &n in &set {
            st.stop[n] = true;
        }
        f(&st);
        for &n in &set {
            st.stop[n] = false;
        }
    }
}

/// Calls `f` on every predictable stopping time: the decision to stop at a
/// node is taken at its parent, for all siblings at once.
pub fn for_each_predictable_stopping_time(tree: &ScenarioTree, mut f: impl FnMut(&StoppingTime)) {
    fn below(tree: &ScenarioTree, m: usize) -> Vec<Vec<usize>> {
        let kids = tree.children(m);
        if kids.is_empty() {
            return vec![vec![]];
        }
        let mut out = vec![kids.to_vec()];
        let mut acc: Vec<Vec<usize>> = vec![vec![]];
        for &c in kids {
            let sub = below(tree, c);
            let mut next = Vec::with_capacity(acc.len() * sub.len());
            for a in &acc {
                for s in &sub {
                    let mut v = a.clone();
                    v.extend_from_slice(s);
                    next.push(v);
                }
            }
            acc = next;
        }
        out.extend(acc);
        out
    }
    let mut st = StoppingTime::never(tree);
    let mut sets = vec![vec![0]];
    sets.extend(below(tree, 0));
    for set in sets {
        for &n in &set {
            st.stop[n] = true;
        }
        f(&st);
        for &n in &set {
            st.stop[n] = false;
        }
    }
}

/// Largest violation of `E[v_τ 1_A] = E[°v_τ 1_A]` over the `F_τ`-atoms `A`
/// (the stop nodes) of `tau`.
pub fn optional_identity_gap(
    raw: &RawProcess,
    proj: &AdaptedProcess,
    tree: &ScenarioTree,
    tau: &StoppingTime,
) -> f64 {
    let mut worst: f64 = 0.0;
    for n in tau.stop_nodes() {
        let k = tree.depth(n);
        let mut lhs = vec![0.0; raw.dim];
        for s in tree.scenarios_through(n) {
            axpy(&mut lhs, tree.prob(tree.leaves()[s]), &raw.values[s][k]);
        }
        let p = tree.prob(n);
        for (a, b) in lhs.iter().zip(proj.get(n)) {
            worst = worst.max((a - p * b).abs());
        }
    }
    worst
}

/// Largest violation of `E[v_τ 1_A] = E[ᵖv_τ 1_A]` over the `F_{τ-}`-atoms of
/// a predictable `tau` (the parents of stop nodes, or the root).
pub fn predictable_identity_gap(
    raw: &RawProcess,
    proj: &AdaptedProcess,
    tree: &ScenarioTree,
    tau: &StoppingTime,
) -> f64 {
    let mut worst: f64 = 0.0;
    let mut seen = vec![false; tree.len()];
    for n in tau.stop_nodes() {
        let m = tree.parent(n).unwrap_or(n);
        if std::mem::replace(&mut seen[m], true) {
            continue;
        }
        let k = tree.depth(n);
        let mut lhs = vec![0.0; raw.dim];
        for s in tree.scenarios_through(m) {
            axpy(&mut lhs, tree.prob(tree.leaves()[s]), &raw.values[s][k]);
        }
        let p = tree.prob(m);
        for (a, b) in lhs.iter().zip(proj.get(n)) {
            worst = worst.max((a - p * b).abs());
        }
    }
    worst
}

/// Values per scenario and per cell `k = 1..=N` (index `k - 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    dim: usize,
    values: Vec<Vec<Vec<f64>>>,
}

impl CellField {
    pub fn new(tree: &ScenarioTree, values: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if values.len() != tree.n_scenarios()
            || values.iter().any(|p| p.len() != tree.n_periods())
        {
            return Err(Error::Shape("cell field must have N values per scenario".into()));
        }
        let dim = values[0][0].len();
        if values.iter().flatten().any(|v| v.len() != dim || v.iter().any(|x| !x.is_finite())) {
            return Err(Error::Invalid("cell field values must be finite with one dimension".into()));
        }
        Ok(CellField { dim, values })
    }

    pub fn scalar(tree: &ScenarioTree, values: &[Vec<f64>]) -> Result<Self> {
        CellField::new(
            tree,
            values
                .iter()
                .map(|p| p.iter().map(|&v| vec![v]).collect())
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Value on scenario `s`, cell `k` (1-based).
    pub fn at(&self, s: usize, k: usize) -> &[f64] {
        &self.values[s][k - 1]
    }
}

/// The optionality identity `E Σ_k v_{k-1} μ_k = E Σ_k °v_{k-1} μ_k`, tested on
/// the indicator of every (scenario, time) pair. The value of `v` inside cell
/// `k` is its value at `t_{k-1}`, so this holds iff each cell weight is
/// measurable at the cell's left endpoint.
pub fn validate_optional_measure(weights: &CellField, tree: &ScenarioTree) -> bool {
    if weights.values.len() != tree.n_scenarios() || weights.dim != 1 {
        return false;
    }
    let n = tree.n_periods();
    let prob = |s: usize| tree.prob(tree.leaves()[s]);
    for s in 0..tree.n_scenarios() {
        for k in 1..=n {
            // v = indicator of (s, time k - 1)
            let lhs = prob(s) * weights.values[s][k - 1][0];
            let node = tree.path(s)[k - 1];
            let pn = tree.prob(node);
            let mut rhs = 0.0;
            for s2 in tree.scenarios_through(node) {
                rhs += prob(s2) * (prob(s) / pn) * weights.values[s2][k - 1][0];
            }
            let scale = 1.0 + lhs.abs().max(rhs.abs());
            if (lhs - rhs).abs() > 1e-12 * scale {
                return false;
            }
        }
    }
    true
}

/// Reference measure on a tree: weight of cell `k + 1` stored at the depth-`k`
/// node, with grid-level null cells.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomRefMeasure {
    grid: TimeGrid,
    null_cells: Vec<bool>,
    weights: Vec<f64>,
}

impl RandomRefMeasure {
    /// `weights[n]` is read for non-leaf nodes whose cell is not null.
    pub fn new(
        tree: &ScenarioTree,
        grid: TimeGrid,
        null_cells: Vec<bool>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let n = tree.n_periods();
        if grid.n_cells() != n || null_cells.len() != n || weights.len() != tree.len() {
            return Err(Error::Shape(
                "grid, null flags and node weights must match the tree".into(),
            ));
        }
        let mut weights = weights;
        for m in 0..tree.len() {
            let d = tree.depth(m);
            if d == n || null_cells[d] {
                weights[m] = 0.0;
                continue;
            }
            CellWeight::Regular(weights[m]).validate(&format!("node {}", tree.id(m)))?;
        }
        Ok(RandomRefMeasure {
            grid,
            null_cells,
            weights,
        })
    }

    /// The same deterministic measure on every scenario.
    pub fn from_det(tree: &ScenarioTree, mu: &RefMeasure) -> Result<Self> {
        let weights = (0..tree.len())
            .map(|m| {
                let d = tree.depth(m);
                if d < tree.n_periods() {
                    mu.cell(d + 1).mass()
                } else {
                    0.0
                }
            })
            .collect();
        let null = mu.cells().iter().map(CellWeight::is_null).collect();
        RandomRefMeasure::new(tree, mu.grid().clone(), null, weights)
    }

    /// Builds the measure from raw per-scenario cell weights, which must be
    /// measurable at each cell's left endpoint.
    pub fn from_cell_field(
        tree: &ScenarioTree,
        grid: TimeGrid,
        null_cells: Vec<bool>,
        weights: &CellField,
    ) -> Result<Self> {
        if !validate_optional_measure(weights, tree) {
            return Err(Error::invariant(
                "reference measure",
                "cell weights depend on information after the cell starts",
            ));
        }
        let mut node_w = vec![0.0; tree.len()];
        for s in 0..tree.n_scenarios() {
            for k in 1..=tree.n_periods() {
                node_w[tree.path(s)[k - 1]] = weights.values[s][k - 1][0];
            }
        }
        RandomRefMeasure::new(tree, grid, null_cells, node_w)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn null_cells(&self) -> &[bool] {
        &self.null_cells
    }

    pub fn raw_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight of the cell starting at node `n` (must not be a leaf).
    pub fn weight(&self, n: usize) -> CellWeight {
        let w = self.weights[n];
        if w == 0.0 {
            CellWeight::Null
        } else {
            CellWeight::Regular(w)
        }
    }

    /// True when cell `k` (1-based) is null.
    pub fn is_null_cell(&self, k: usize) -> bool {
        self.null_cells[k - 1]
    }
}

/// A singular atom of a random measure, stored at the node that knows it.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeAtom {
    pub node: usize,
    pub tau: f64,
    pub mass: Vec<f64>,
}

/// An adapted signed measure: density of the cell starting at each node plus
/// atoms at null locations in `[t_k, t_{k+1})` (or at `T`) of depth-`k` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomMeasureSigned {
    pub density: Vec<Vec<f64>>,
    pub atoms: Vec<NodeAtom>,
}

impl RandomMeasureSigned {
    pub fn zero(tree: &ScenarioTree, dim: usize) -> Self {
        RandomMeasureSigned {
            density: vec![vec![0.0; dim]; tree.len()],
            atoms: vec![],
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        RandomMeasureSigned {
            density: self
                .density
                .iter()
                .map(|g| g.iter().map(|v| alpha * v).collect())
                .collect(),
            atoms: self
                .atoms
                .iter()
                .map(|a| NodeAtom {
                    node: a.node,
                    tau: a.tau,
                    mass: a.mass.iter().map(|v| alpha * v).collect(),
                })
                .collect(),
        }
    }

    /// Checks shapes and that every atom is at a null location its node knows.
    pub fn validate(&self, tree: &ScenarioTree, mu: &RandomRefMeasure) -> Result<()> {
        if self.density.len() != tree.len() {
            return Err(Error::Shape("one density per node is required".into()));
        }
        let times = mu.grid.times();
        for a in &self.atoms {
            let k = tree.depth(a.node);
            let inside = if k == tree.n_periods() {
                a.tau == times[k]
            } else {
                a.tau >= times[k] && a.tau < times[k + 1]
            };
            let cell = mu.grid.cell_of(a.tau);
            let null = cell.is_some_and(|c| mu.is_null_cell(c));
            if !inside || !null {
                return Err(Error::Invalid(format!(
                    "atom at {} on node {} is not at a null location of its period",
                    a.tau,
                    tree.id(a.node)
                )));
            }
        }
        Ok(())
    }

    /// Pathwise total variation along scenario `s`.
    pub fn path_variation(&self, tree: &ScenarioTree, mu: &RandomRefMeasure, s: usize) -> f64 {
        let path = tree.path(s);
        let mut tv = 0.0;
        for &n in &path[..tree.n_periods()] {
            tv += norm(&self.density[n]) * mu.weight(n).mass();
        }
        for a in &self.atoms {
            if path[tree.depth(a.node)] == a.node {
                tv += norm(&a.mass);
            }
        }
        tv
    }
}

/// `ess sup ‖θ‖_TV`: the largest pathwise total variation.
pub fn m_infty_norm(theta: &RandomMeasureSigned, tree: &ScenarioTree, mu: &RandomRefMeasure) -> f64 {
    (0..tree.n_scenarios())
        .map(|s| theta.path_variation(tree, mu, s))
        .fold(0.0, f64::max)
}

/// `E ∫ v dθ` with `v` right-continuous: mass at node `n` meets `v_n`.
pub fn pairing_stoch(
    v: &AdaptedProcess,
    theta: &RandomMeasureSigned,
    tree: &ScenarioTree,
    mu: &RandomRefMeasure,
) -> Result<f64> {
    if v.len() != tree.len() || theta.density.len() != tree.len() {
        return Err(Error::Shape("process and measure must match the tree".into()));
    }
    let mut total = 0.0;
    for n in 0..tree.len() {
        if tree.is_leaf(n) {
            continue;
        }
        total += tree.prob(n) * mu.weight(n).mass() * dot(v.get(n), &theta.density[n]);
    }
    for a in &theta.atoms {
        total += tree.prob(a.node) * dot(v.get(a.node), &a.mass);
    }
    Ok(total)
}

/// `sup_τ E|v_τ|` by backward induction: at each node, stop and collect `|v|`
/// or continue; leaves may also decline to stop (worth 0).
pub fn r1_norm(v: &AdaptedProcess, tree: &ScenarioTree) -> f64 {
    let mut u = vec![0.0; tree.len()];
    for n in (0..tree.len()).rev() {
        let cont: f64 = tree
            .children(n)
            .iter()
            .map(|&c| tree.cond_prob(c) * u[c])
            .sum();
        u[n] = norm(v.get(n)).max(cont);
    }
    u[0]
}

/// `sup_τ E|v_τ|` by enumerating every stopping time.
pub fn r1_norm_exhaustive(v: &AdaptedProcess, tree: &ScenarioTree) -> f64 {
    let mut best: f64 = 0.0;
    for_each_stopping_time(tree, |tau| {
        let val: f64 = tau.stop_nodes().map(|n| tree.prob(n) * norm(v.get(n))).sum();
        best = best.max(val);
    });
    best
}

/// A path of bounded variation adapted to the tree: `x_0` and, at each node,
/// the value `s_n` held on the cell starting there (at leaves, `x_{T+}`).
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedPath {
    pub x0: Vec<f64>,
    pub s: Vec<Vec<f64>>,
}

impl AdaptedPath {
    pub fn new(tree: &ScenarioTree, x0: Vec<f64>, s: Vec<Vec<f64>>) -> Result<Self> {
        if s.len() != tree.len() {
            return Err(Error::Shape(format!(
                "{} node values for {} nodes",
                s.len(),
                tree.len()
            )));
        }
        let d = x0.len();
        if d == 0 {
            return Err(Error::Shape("path needs d ≥ 1".into()));
        }
        for v in &s {
            if v.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: v.len(),
                });
            }
        }
        if x0.iter().chain(s.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("path values must be finite".into()));
        }
        Ok(AdaptedPath { x0, s })
    }

    pub fn zeros(tree: &ScenarioTree, dim: usize) -> Self {
        AdaptedPath {
            x0: vec![0.0; dim],
            s: vec![vec![0.0; dim]; tree.len()],
        }
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    /// Jump `J_n` into node `n`: `s_n - s_parent` (at the root, `s_root - x_0`).
    pub fn jump(&self, tree: &ScenarioTree, n: usize) -> Vec<f64> {
        let prev = match tree.parent(n) {
            Some(p) => &self.s[p],
            None => &self.x0,
        };
        self.s[n].iter().zip(prev).map(|(a, b)| a - b).collect()
    }

    /// Pathwise `Σ |J|` along scenario `s`.
    pub fn path_variation(&self, tree: &ScenarioTree, s: usize) -> f64 {
        tree.path(s).iter().map(|&n| norm(&self.jump(tree, n))).sum()
    }

    /// Largest pathwise variation over scenarios.
    pub fn max_variation(&self, tree: &ScenarioTree) -> f64 {
        (0..tree.n_scenarios())
            .map(|s| self.path_variation(tree, s))
            .fold(0.0, f64::max)
    }

    /// `x̄ + α·x`.
    pub fn offset(&self, alpha: f64, dir: &AdaptedPath) -> AdaptedPath {
        let f = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| x + alpha * y).collect()
        };
        AdaptedPath {
            x0: f(&self.x0, &dir.x0),
            s: self.s.iter().zip(&dir.s).map(|(a, b)| f(a, b)).collect(),
        }
    }

    /// `Dx` as a random measure: the jump into each node is an atom there.
    pub fn derivative_atoms(&self, tree: &ScenarioTree, grid: &TimeGrid) -> Vec<NodeAtom> {
        (0..tree.len())
            .map(|n| NodeAtom {
                node: n,
                tau: grid.times()[tree.depth(n)],
                mass: self.jump(tree, n),
            })
            .collect()
    }

    /// `v_{-inf}·x_0 + E Σ_n v_n·J_n`, summed directly from the jumps.
    pub fn pairing(&self, tree: &ScenarioTree, v_minus: &[f64], v: &AdaptedProcess) -> f64 {
        let mut total = dot(v_minus, &self.x0);
        for n in 0..tree.len() {
            total += tree.prob(n) * dot(v.get(n), &self.jump(tree, n));
        }
        total
    }
}

/// `⟨i(x), w⟩ = E Σ_k s_{k-1}·w_k μ_k`: the path embedded as cell values and
/// paired with a raw per-cell density.
pub fn embedding_pairing(
    x: &AdaptedPath,
    w: &CellField,
    tree: &ScenarioTree,
    mu: &RandomRefMeasure,
) -> f64 {
    let mut total = 0.0;
    for s in 0..tree.n_scenarios() {
        let ps = tree.prob(tree.leaves()[s]);
        let path = tree.path(s);
        for k in 1..=tree.n_periods() {
            let n = path[k - 1];
            total += ps * mu.weight(n).mass() * dot(&x.s[n], w.at(s, k));
        }
    }
    total
}

/// The adjoint of the embedding: with `z_k = Σ_{j≤k} w_j μ_j` per scenario,
/// returns `v_{-inf} = E z_N` and `v_k = °(z_N - z_k)`.
pub fn adjoint_embedding(
    w: &CellField,
    tree: &ScenarioTree,
    mu: &RandomRefMeasure,
) -> Result<(Vec<f64>, AdaptedProcess)> {
    if w.values.len() != tree.n_scenarios() {
        return Err(Error::Shape("cell field does not match the tree".into()));
    }
    let n = tree.n_periods();
    let d = w.dim;
    let mut raw = Vec::with_capacity(tree.n_scenarios());
    let mut v_minus = vec![0.0; d];
    for s in 0..tree.n_scenarios() {
        let path = tree.path(s);
        let mut z = vec![vec![0.0; d]; n + 1];
        for k in 1..=n {
            let m = mu.weight(path[k - 1]).mass();
            z[k] = z[k - 1].clone();
            axpy(&mut z[k], m, w.at(s, k));
        }
        axpy(&mut v_minus, tree.prob(tree.leaves()[s]), &z[n]);
        raw.push(
            (0..=n)
                .map(|k| z[n].iter().zip(&z[k]).map(|(a, b)| a - b).collect())
                .collect(),
        );
    }
    let raw = RawProcess { dim: d, values: raw };
    Ok((v_minus, optional_projection(&raw, tree)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_leaf() -> ScenarioTree {
        // root -> one time-1 node -> two leaves
        ScenarioTree::new(vec![
            NodeSpec { id: 0, parent: None, time: 0, prob: Prob::Ratio(1, 1) },
            NodeSpec { id: 1, parent: Some(0), time: 1, prob: Prob::Ratio(1, 1) },
            NodeSpec { id: 2, parent: Some(1), time: 2, prob: Prob::Ratio(1, 2) },
            NodeSpec { id: 3, parent: Some(1), time: 2, prob: Prob::Ratio(1, 2) },
        ])
        .unwrap()
    }

    #[test]
    fn projections_of_non_adapted_example() {
        let t = two_leaf();
        let raw = RawProcess::scalar(&t, &[vec![0.0, 4.0, 1.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let o = optional_projection(&raw, &t).unwrap();
        assert_eq!(o.get(1), &[2.0]);
        let p = predictable_projection(&raw, &t).unwrap();
        assert_eq!(p.get(1), &[2.0]);
        assert!(!raw.is_adapted(&t, 1e-12));
    }

    #[test]
    fn probabilities_must_sum_exactly() {
        let bad = ScenarioTree::new(vec![
            NodeSpec { id: 0, parent: None, time: 0, prob: Prob::Ratio(1, 1) },
            NodeSpec { id: 7, parent: Some(0), time: 1, prob: Prob::Ratio(1, 3) },
            NodeSpec { id: 8, parent: Some(0), time: 1, prob: Prob::Ratio(1, 3) },
        ]);
        match bad {
            Err(Error::Invariant { location, .. }) => assert_eq!(location, "node 0"),
            other => panic!("expected invariant error, got {other:?}"),
        }
    }

    #[test]
    fn leaves_must_reach_the_horizon() {
        let bad = ScenarioTree::new(vec![
            NodeSpec { id: 0, parent: None, time: 0, prob: Prob::Ratio(1, 1) },
            NodeSpec { id: 1, parent: Some(0), time: 1, prob: Prob::Ratio(1, 2) },
            NodeSpec { id: 2, parent: Some(0), time: 1, prob: Prob::Ratio(1, 2) },
            NodeSpec { id: 3, parent: Some(1), time: 2, prob: Prob::Ratio(1, 2) },
        ]);
        assert!(bad.is_err());
    }

    #[test]
    fn r1_norm_examples() {
        let t = ScenarioTree::uniform(1, 2);
        let v = AdaptedProcess::scalar(&t, &[0.0, 2.0, -1.0]).unwrap();
        assert_eq!(r1_norm(&v, &t), 1.5);
        assert_eq!(r1_norm_exhaustive(&v, &t), 1.5);
        let chain = ScenarioTree::chain(3);
        let d = AdaptedProcess::scalar(&chain, &[1.0, -3.0, 2.0, 0.5]).unwrap();
        assert_eq!(r1_norm(&d, &chain), 3.0);
    }

    #[test]
    fn stopping_time_counts() {
        let t = ScenarioTree::uniform(2, 2);
        let mut count = 0u128;
        for_each_stopping_time(&t, |_| count += 1);
        assert_eq!(count, count_stopping_times(&t));
        assert_eq!(count, 1 + 5 * 5);
        let mut pred = 0;
        for_each_predictable_stopping_time(&t, |tau| {
            assert!(tau.is_predictable(&t));
            pred += 1;
        });
        // stop at root, stop both children, or decide below each child
        assert_eq!(pred, 1 + 1 + 2 * 2);
    }

    #[test]
    fn m_infty_example() {
        let t = ScenarioTree::chain(2);
        let grid = TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap();
        let mu = RandomRefMeasure::new(&t, grid, vec![false, true], vec![0.5, 0.0, 0.0]).unwrap();
        let theta = RandomMeasureSigned {
            density: vec![vec![2.0], vec![0.0], vec![0.0]],
            atoms: vec![NodeAtom { node: 1, tau: 0.75, mass: vec![-1.0] }],
        };
        theta.validate(&t, &mu).unwrap();
        assert_eq!(m_infty_norm(&theta, &t, &mu), 2.0);
        assert_eq!(m_infty_norm(&theta.scaled(-3.0), &t, &mu), 6.0);
    }

    #[test]
    fn adjoint_example_single_scenario() {
        let t = ScenarioTree::chain(2);
        let grid = TimeGrid::uniform(2, 1.0).unwrap();
        let mu = RandomRefMeasure::from_det(&t, &RefMeasure::lebesgue(grid)).unwrap();
        let w = CellField::scalar(&t, &[vec![1.0, 1.0]]).unwrap();
        let (vm, v) = adjoint_embedding(&w, &t, &mu).unwrap();
        assert_eq!(vm, vec![1.0]);
        assert_eq!(v.values(), &[vec![1.0], vec![0.5], vec![0.0]]);
        for basis in 0..4 {
            let mut vals = vec![vec![0.0]; 3];
            let mut x0 = vec![0.0];
            if basis == 0 {
                x0[0] = 1.0;
            } else {
                vals[basis - 1][0] = 1.0;
            }
            let x = AdaptedPath::new(&t, x0, vals).unwrap();
            let lhs = embedding_pairing(&x, &w, &t, &mu);
            let rhs = x.pairing(&t, &vm, &v);
            assert!((lhs - rhs).abs() < 1e-14, "basis {basis}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn optional_measure_detects_look_ahead() {
        let t = ScenarioTree::uniform(2, 2);
        let n = t.n_scenarios();
        let adapted: Vec<Vec<f64>> = (0..n)
            .map(|s| vec![1.0, 1.0 + t.path(s)[1] as f64])
            .collect();
        assert!(validate_optional_measure(&CellField::scalar(&t, &adapted).unwrap(), &t));
        let mut peek = adapted.clone();
        peek[0][0] = 5.0; // cell 1 weight depends on the scenario
        assert!(!validate_optional_measure(&CellField::scalar(&t, &peek).unwrap(), &t));
        let chain = ScenarioTree::chain(2);
        let any = CellField::scalar(&chain, &[vec![3.0, 0.1]]).unwrap();
        assert!(validate_optional_measure(&any, &chain));
    }
}
