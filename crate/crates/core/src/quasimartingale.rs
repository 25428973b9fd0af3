//! Mean variation and the martingale plus predictable decomposition.
//!
//! For an adapted `v`, the compensator `a` is built from the conditional
//! increments `a_{k+1} - a_k = E[v_{k+1} - v_k | F_k]` with `a_0 = 0`, and
//! `m = v - a` is a martingale. `a_{k+1}` is known at time `k`, so it is
//! stored at every depth-`k+1` node but is equal across siblings.

use crate::error::{Error, Result};
use crate::tree::{AdaptedPath, AdaptedProcess, RawProcess, ScenarioTree};

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

/// `v = m + a` with `m` a martingale and `a` predictable, `a_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RaoDecomposition {
    pub m: AdaptedProcess,
    pub a: AdaptedProcess,
}

impl RaoDecomposition {
    /// `a_{k+1} - a_k` on the cell starting at the non-leaf node `n`.
    pub fn increment(&self, tree: &ScenarioTree, n: usize) -> Vec<f64> {
        let c = tree.children(n)[0];
        sub(self.a.get(c), self.a.get(n))
    }

    /// `E ‖Da‖_TV = Σ_n p_n |a_{k+1} - a_k|` over non-leaf nodes.
    pub fn expected_compensator_variation(&self, tree: &ScenarioTree) -> f64 {
        tree.inner_nodes()
            .map(|n| tree.prob(n) * norm(&self.increment(tree, n)))
            .sum()
    }

    /// Largest violation of the defining properties: `v = m + a`, `m` a
    /// martingale, `a_0 = 0`, `a` equal across siblings.
    pub fn invariant_defect(&self, v: &AdaptedProcess, tree: &ScenarioTree) -> f64 {
        let mut worst: f64 = norm(self.a.get(tree.root()));
        for n in 0..tree.len() {
            let recon = sub(v.get(n), self.m.get(n));
            worst = worst.max(norm(&sub(&recon, self.a.get(n))));
            if let Some(p) = tree.parent(n) {
                let first = tree.children(p)[0];
                worst = worst.max(norm(&sub(self.a.get(n), self.a.get(first))));
            }
        }
        worst.max(self.m.martingale_defect(tree))
    }
}

/// Splits `v` into its martingale part and its predictable compensator.
pub fn rao_decompose(v: &AdaptedProcess, tree: &ScenarioTree) -> Result<RaoDecomposition> {
    if v.len() != tree.len() {
        return Err(Error::Shape("process does not match the tree".into()));
    }
    let d = v.dim();
    let mut a = AdaptedProcess::zeros(tree, d);
    for n in 0..tree.len() {
        if tree.is_leaf(n) {
            continue;
        }
        let mean = v.next_mean(tree, n);
        let next: Vec<f64> = a
            .get(n)
            .iter()
            .zip(mean.iter().zip(v.get(n)))
            .map(|(an, (m, vn))| an + (m - vn))
            .collect();
        for &c in tree.children(n) {
            a.set(c, next.clone());
        }
    }
    let m = v.add(&a.scaled(-1.0));
    Ok(RaoDecomposition { m, a })
}

/// `Var(v)` on the finest partition: `Σ_n p_n |E[v_{k+1} | F_k] - v_k|`.
pub fn mean_variation(v: &AdaptedProcess, tree: &ScenarioTree) -> f64 {
    tree.inner_nodes()
        .map(|n| tree.prob(n) * norm(&sub(&v.next_mean(tree, n), v.get(n))))
        .sum()
}

/// `E Σ_i |E[v_{t_{i+1}} - v_{t_i} | F_{t_i}]|` for the partition given by
/// strictly increasing time indices.
pub fn mean_variation_on(v: &AdaptedProcess, tree: &ScenarioTree, partition: &[usize]) -> Result<f64> {
    if partition.windows(2).any(|w| w[0] >= w[1])
        || partition.last().is_some_and(|&k| k > tree.n_periods())
    {
        return Err(Error::Invalid("partition must be increasing time indices".into()));
    }
    let mut total = 0.0;
    for w in partition.windows(2) {
        let (from, to) = (w[0], w[1]);
        for &n in tree.nodes_at(from) {
            let mut mean = vec![0.0; v.dim()];
            for s in tree.scenarios_through(n) {
                let leaf = tree.leaves()[s];
                let node = tree.path(s)[to];
                for (m, x) in mean.iter_mut().zip(v.get(node)) {
                    *m += tree.prob(leaf) / tree.prob(n) * x;
                }
            }
            total += tree.prob(n) * norm(&sub(&mean, v.get(n)));
        }
    }
    Ok(total)
}

/// `|LHS - RHS|` of `E Σ_k v_k·J_k = E[v_N·x_{T+} - v_0·x_0 - Σ_{k<N} s_k·(a_{k+1} - a_k)]`.
pub fn ibp_check(v: &AdaptedProcess, x: &AdaptedPath, tree: &ScenarioTree) -> Result<f64> {
    if v.dim() != x.dim() || x.s.len() != tree.len() {
        return Err(Error::Shape("process and path must match".into()));
    }
    let zero = vec![0.0; v.dim()];
    let lhs = x.pairing(tree, &zero, v);
    let dec = rao_decompose(v, tree)?;
    let mut rhs = -dot(v.get(tree.root()), &x.x0);
    for n in 0..tree.len() {
        let p = tree.prob(n);
        if tree.is_leaf(n) {
            rhs += p * dot(v.get(n), &x.s[n]);
        } else {
            rhs -= p * dot(&x.s[n], &dec.increment(tree, n));
        }
    }
    Ok((lhs - rhs).abs())
}

/// Result of maximising `E ∫ v dx` over adapted paths with `|x| ≤ 1` and
/// `x_0 = x_{T+} = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarSupport {
    pub value: f64,
    pub path: AdaptedPath,
    /// True when every vertex of the feasible box was enumerated.
    pub exhaustive: bool,
}

/// Lower bound on `σ_D(v)` found without the decomposition: the objective is
/// linear in the free node values, so its coefficient at each non-leaf node
/// is read off by pairing `v` with a unit path there, and the optimum puts
/// the node value on the unit sphere along that coefficient. Scalar problems
/// with at most `budget` free nodes are also solved by enumerating every
/// sign vector.
pub fn var_support_bruteforce(v: &AdaptedProcess, tree: &ScenarioTree, budget: usize) -> VarSupport {
    let d = v.dim();
    let zero = vec![0.0; d];
    let inner: Vec<usize> = tree.inner_nodes().collect();
    let mut coef = vec![vec![0.0; d]; tree.len()];
    for &n in &inner {
        for i in 0..d {
            let mut x = AdaptedPath::zeros(tree, d);
            x.s[n][i] = 1.0;
            coef[n][i] = x.pairing(tree, &zero, v);
        }
    }
    let mut best = AdaptedPath::zeros(tree, d);
    for &n in &inner {
        let c = norm(&coef[n]);
        if c > 0.0 {
            best.s[n] = coef[n].iter().map(|x| x / c).collect();
        }
    }
    let mut value = best.pairing(tree, &zero, v);
    let mut exhaustive = false;
    if d == 1 && inner.len() <= budget && inner.len() < 24 {
        exhaustive = true;
        for mask in 0u32..(1u32 << inner.len()) {
            let mut x = AdaptedPath::zeros(tree, 1);
            for (bit, &n) in inner.iter().enumerate() {
                x.s[n][0] = if mask >> bit & 1 == 1 { 1.0 } else { -1.0 };
            }
            let val = x.pairing(tree, &zero, v);
            if val > value {
                value = val;
                best = x;
            }
        }
    }
    VarSupport {
        value,
        path: best,
        exhaustive,
    }
}

/// The raw process `m_N + a_k` whose optional projection is `v`.
pub fn lift_to_iv(v: &AdaptedProcess, tree: &ScenarioTree) -> Result<RawProcess> {
    let dec = rao_decompose(v, tree)?;
    let n = tree.n_periods();
    let values = (0..tree.n_scenarios())
        .map(|s| {
            let path = tree.path(s);
            let m_n = dec.m.get(path[n]);
            path.iter()
                .map(|&node| m_n.iter().zip(dec.a.get(node)).map(|(x, y)| x + y).collect())
                .collect()
        })
        .collect();
    RawProcess::new(tree, values)
}

/// Largest pathwise total variation of a raw process.
pub fn raw_path_variation(raw: &RawProcess) -> f64 {
    raw.values()
        .iter()
        .map(|p| p.windows(2).map(|w| norm(&sub(&w[1], &w[0]))).sum::<f64>())
        .fold(0.0, f64::max)
}
