//! Bolza-type convex functionals on scenario trees and their conjugates.
//!
//! `Ef(x) = E[Σ_k h_k(s_k) μ_k + k_0(x_0) + k_T(x_{T+})]` over adapted paths,
//! where `h` and `μ` for the cell starting at a node are stored at that node.
//! The closed-form conjugate uses only the compensator `a` of the dual
//! process `v` (`Dv := Da`):
//!
//! `(Ef)*(v) = E[J_{h*}(-Da) + k_0*(v_{-inf} - v_0) + k_T*(v_T)]`.

use crate::convex::{Interval, SeparableFn};
use crate::error::{Error, Result};
use crate::oracle::{conjugate_bruteforce, OracleOptions, OracleResult};
use crate::quasimartingale::{mean_variation, rao_decompose, RaoDecomposition};
use crate::time_grid::{
    condition, j_functional, Atom, CellWeight, ConditionCheck, ConditionKind, DualFunction,
    GridInstance, GridMeasure, RefMeasure, SubdiffReport,
};
use crate::tree::{
    optional_projection, predictable_projection, AdaptedPath, AdaptedProcess, NodeAtom,
    RandomMeasureSigned, RandomRefMeasure, RawProcess, ScenarioTree,
};

const INF: f64 = f64::INFINITY;

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Affine minorant `h(x) ≥ x·slope - alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub slope: Vec<f64>,
    pub alpha: f64,
}

impl Certificate {
    /// The tightest certificate at a representative slope of `dom h*`.
    pub fn derive(h: &SeparableFn) -> Result<Certificate> {
        let hs = h.conjugate()?;
        let slope: Vec<f64> = hs
            .components()
            .iter()
            .map(|f| f.domain().representative().expect("proper conjugate"))
            .collect();
        let alpha = hs.eval(&slope).max(0.0);
        Ok(Certificate { slope, alpha })
    }
}

/// An adapted path strictly inside the domain: the box of half-width
/// `radius` around each cell value lies in `dom h`, where `h ≤ beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub radius: f64,
    pub path: AdaptedPath,
    /// Bound per node; only read at non-leaf nodes.
    pub beta: Vec<f64>,
}

/// Everything needed to build a [`BolzaInstance`].
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceParts {
    pub name: String,
    pub tree: ScenarioTree,
    pub mu: RandomRefMeasure,
    /// Integrand for the cell starting at each non-leaf node.
    pub h: Vec<Option<SeparableFn>>,
    pub k0: SeparableFn,
    /// Terminal cost at each leaf.
    pub kt: Vec<Option<SeparableFn>>,
    pub certificate: Vec<Option<Certificate>>,
    pub witness: Witness,
}

/// A validated instance.
#[derive(Debug, Clone)]
pub struct BolzaInstance {
    parts: InstanceParts,
    hstar: Vec<Option<SeparableFn>>,
    k0star: SeparableFn,
    ktstar: Vec<Option<SeparableFn>>,
}

/// A dual element `(v_{-inf}, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCandidate {
    pub v_minus: Vec<f64>,
    pub v: AdaptedProcess,
}

pub type PrimalCandidate = AdaptedPath;

/// Terms of the closed-form conjugate.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateEval {
    pub value: f64,
    /// `E ∫ h*(-dDa/dμ) dμ`.
    pub density: f64,
    /// `E Σ (h*)^∞(-ΔDa)` over atoms at null cells.
    pub singular: f64,
    pub initial: f64,
    pub terminal: f64,
    /// Mean variation of `v`, reported with every evaluation.
    pub var: f64,
}

fn sup_box(f: &SeparableFn, center: &[f64], r: f64) -> f64 {
    f.components()
        .iter()
        .zip(center)
        .map(|(g, &c)| g.eval(c - r).max(g.eval(c + r)))
        .sum()
}

fn box_inside(f: &SeparableFn, center: &[f64], r: f64) -> bool {
    f.components()
        .iter()
        .zip(center)
        .all(|(g, &c)| g.in_domain(c - r) && g.in_domain(c + r))
}

impl BolzaInstance {
    pub fn new(parts: InstanceParts) -> Result<Self> {
        let tree = &parts.tree;
        let d = parts.k0.dim();
        let n_nodes = tree.len();
        if parts.h.len() != n_nodes || parts.kt.len() != n_nodes || parts.certificate.len() != n_nodes
        {
            return Err(Error::Shape("node tables must have one entry per node".into()));
        }
        if parts.mu.grid().n_cells() != tree.n_periods() {
            return Err(Error::Shape("grid and tree disagree on the number of periods".into()));
        }
        for n in 0..n_nodes {
            let at = format!("node {}", tree.id(n));
            let leaf = tree.is_leaf(n);
            match (&parts.h[n], leaf) {
                (Some(_), true) => return Err(Error::invariant(at, "leaves carry no running cost")),
                (None, false) => return Err(Error::Missing(format!("h at {at}"))),
                (Some(h), false) if h.dim() != d => {
                    return Err(Error::Dimension {
                        expected: d,
                        got: h.dim(),
                    })
                }
                _ => {}
            }
            match (&parts.kt[n], leaf) {
                (None, true) => return Err(Error::Missing(format!("kT at {at}"))),
                (Some(_), false) => {
                    return Err(Error::invariant(at, "terminal cost only at leaves"))
                }
                (Some(k), true) if k.dim() != d => {
                    return Err(Error::Dimension {
                        expected: d,
                        got: k.dim(),
                    })
                }
                _ => {}
            }
            match (&parts.certificate[n], leaf) {
                (None, false) => return Err(Error::Missing(format!("certificate at {at}"))),
                (Some(c), false) => {
                    if c.slope.len() != d || !(c.alpha >= 0.0) {
                        return Err(Error::invariant(at, "certificate needs d slopes and alpha ≥ 0"));
                    }
                }
                _ => {}
            }
        }
        let hstar = parts
            .h
            .iter()
            .map(|h| h.as_ref().map(SeparableFn::conjugate).transpose())
            .collect::<Result<Vec<_>>>()?;
        for n in tree.inner_nodes() {
            let c = parts.certificate[n].as_ref().expect("checked");
            let val = hstar[n].as_ref().expect("inner").eval(&c.slope);
            if val > c.alpha + 1e-9 * (1.0 + c.alpha.abs()) {
                return Err(Error::invariant(
                    format!("node {}", tree.id(n)),
                    format!("h ≥ x·v - α fails: h*(v) = {val} > α = {}", c.alpha),
                ));
            }
        }
        let w = &parts.witness;
        if w.path.s.len() != n_nodes || w.path.dim() != d || w.beta.len() != n_nodes {
            return Err(Error::Shape("witness does not match the tree".into()));
        }
        if !(w.radius > 0.0 && w.radius.is_finite()) {
            return Err(Error::invariant("witness", "radius must be positive"));
        }
        for n in tree.inner_nodes() {
            let h = parts.h[n].as_ref().expect("inner");
            let at = format!("node {}", tree.id(n));
            if !box_inside(h, &w.path.s[n], w.radius) {
                return Err(Error::invariant(at, "witness ball leaves dom h"));
            }
            if !parts.mu.weight(n).is_null() && sup_box(h, &w.path.s[n], w.radius) > w.beta[n] + 1e-9 * (1.0 + w.beta[n].abs()) {
                return Err(Error::invariant(at, "h exceeds beta on the witness ball"));
            }
        }
        if parts.k0.eval(&w.path.x0) == INF {
            return Err(Error::invariant("witness", "k0 is infinite at the witness"));
        }
        for &l in tree.leaves() {
            if parts.kt[l].as_ref().expect("leaf").eval(&w.path.s[l]) == INF {
                return Err(Error::invariant(
                    format!("node {}", tree.id(l)),
                    "kT is infinite at the witness",
                ));
            }
        }
        let k0star = parts.k0.conjugate()?;
        let ktstar = parts
            .kt
            .iter()
            .map(|k| k.as_ref().map(SeparableFn::conjugate).transpose())
            .collect::<Result<Vec<_>>>()?;
        Ok(BolzaInstance {
            parts,
            hstar,
            k0star,
            ktstar,
        })
    }

    /// A single-scenario instance from a deterministic one.
    pub fn from_grid(inst: &GridInstance, witness_x0: Vec<f64>, witness_values: Vec<Vec<f64>>, radius: f64, name: &str) -> Result<Self> {
        let n = inst.n_cells();
        let tree = ScenarioTree::chain(n);
        let mu = RandomRefMeasure::from_det(&tree, &inst.mu)?;
        let mut h = vec![None; n + 1];
        let mut kt = vec![None; n + 1];
        let mut certificate = vec![None; n + 1];
        let mut beta = vec![0.0; n + 1];
        let path = AdaptedPath::new(&tree, witness_x0, witness_values)?;
        for k in 0..n {
            certificate[k] = Some(Certificate::derive(&inst.h[k])?);
            beta[k] = sup_box(&inst.h[k], &path.s[k], radius);
            h[k] = Some(inst.h[k].clone());
        }
        kt[n] = Some(inst.kt.clone());
        BolzaInstance::new(InstanceParts {
            name: name.to_string(),
            tree,
            mu,
            h,
            k0: inst.k0.clone(),
            kt,
            certificate,
            witness: Witness {
                radius,
                path,
                beta,
            },
        })
    }

    /// The deterministic instance behind a single-scenario tree.
    pub fn to_grid(&self) -> Result<GridInstance> {
        let tree = &self.parts.tree;
        if tree.n_scenarios() != 1 {
            return Err(Error::Shape("only single-scenario instances are deterministic".into()));
        }
        let mu = tree.scenario_measure(&self.parts.mu, 0);
        let path = tree.path(0);
        let n = tree.n_periods();
        let h = path[..n]
            .iter()
            .map(|&m| self.parts.h[m].clone().expect("inner"))
            .collect();
        GridInstance::new(
            mu,
            h,
            self.parts.k0.clone(),
            self.parts.kt[path[n]].clone().expect("leaf"),
        )
    }

    pub fn parts(&self) -> &InstanceParts {
        &self.parts
    }

    pub fn name(&self) -> &str {
        &self.parts.name
    }

    pub fn tree(&self) -> &ScenarioTree {
        &self.parts.tree
    }

    pub fn mu(&self) -> &RandomRefMeasure {
        &self.parts.mu
    }

    pub fn dim(&self) -> usize {
        self.parts.k0.dim()
    }

    pub fn h(&self, n: usize) -> &SeparableFn {
        self.parts.h[n].as_ref().expect("running cost lives at non-leaf nodes")
    }

    pub fn hstar(&self, n: usize) -> &SeparableFn {
        self.hstar[n].as_ref().expect("running cost lives at non-leaf nodes")
    }

    pub fn k0(&self) -> &SeparableFn {
        &self.parts.k0
    }

    pub fn kt(&self, n: usize) -> &SeparableFn {
        self.parts.kt[n].as_ref().expect("terminal cost lives at leaves")
    }

    pub fn witness(&self) -> &Witness {
        &self.parts.witness
    }

    fn check_path(&self, x: &AdaptedPath) -> Result<()> {
        if x.s.len() != self.tree().len() || x.dim() != self.dim() {
            return Err(Error::Shape("path does not match the instance".into()));
        }
        Ok(())
    }

    fn check_dual(&self, v: &DualCandidate) -> Result<()> {
        if v.v.len() != self.tree().len() || v.v.dim() != self.dim() || v.v_minus.len() != self.dim()
        {
            return Err(Error::Shape("dual candidate does not match the instance".into()));
        }
        Ok(())
    }

    /// `Ef(x)`; on a null cell the running term is `δ_{cl dom h}`.
    pub fn evaluate_ef(&self, x: &AdaptedPath) -> Result<f64> {
        self.check_path(x)?;
        let tree = self.tree();
        let mut total = self.parts.k0.eval(&x.x0);
        for n in 0..tree.len() {
            let p = tree.prob(n);
            let term = if tree.is_leaf(n) {
                self.kt(n).eval(&x.s[n])
            } else {
                match self.mu().weight(n) {
                    CellWeight::Regular(w) => w * self.h(n).eval(&x.s[n]),
                    CellWeight::Null => self.h(n).domain_indicator().eval(&x.s[n]),
                }
            };
            if term == INF {
                return Ok(INF);
            }
            total += p * term;
        }
        Ok(total)
    }

    /// `⟨x, v⟩ = x_0·v_{-inf} + E Σ v·J`.
    pub fn pairing(&self, x: &AdaptedPath, v: &DualCandidate) -> Result<f64> {
        self.check_path(x)?;
        self.check_dual(v)?;
        Ok(x.pairing(self.tree(), &v.v_minus, &v.v))
    }

    /// `Da` as an adapted random measure: density on regular cells at the
    /// node where the cell starts, atoms at `t_{k+1}` on null cells stored at
    /// the children (which are the nodes that see time `t_{k+1}`).
    pub fn compensator_measure(&self, dec: &RaoDecomposition) -> RandomMeasureSigned {
        let tree = self.tree();
        let times = self.mu().grid().times();
        let mut theta = RandomMeasureSigned::zero(tree, self.dim());
        for n in tree.inner_nodes() {
            let inc = dec.increment(tree, n);
            match self.mu().weight(n) {
                CellWeight::Regular(w) => theta.density[n] = inc.iter().map(|x| x / w).collect(),
                CellWeight::Null => {
                    let tau = times[tree.depth(n) + 1];
                    for &c in tree.children(n) {
                        theta.atoms.push(NodeAtom {
                            node: c,
                            tau,
                            mass: inc.clone(),
                        });
                    }
                }
            }
        }
        theta
    }

    /// The closed-form conjugate, evaluated scenario by scenario with the
    /// deterministic `J` functional applied to `-Da`.
    pub fn conjugate_formula(&self, v: &DualCandidate) -> Result<ConjugateEval> {
        self.check_dual(v)?;
        let tree = self.tree();
        let dec = rao_decompose(&v.v, tree)?;
        let theta = self.compensator_measure(&dec);
        theta.validate(tree, self.mu())?;
        let n = tree.n_periods();
        let mut density = 0.0;
        let mut total = 0.0;
        for s in 0..tree.n_scenarios() {
            let path = tree.path(s);
            let ps = tree.prob(tree.leaves()[s]);
            let mu_s = tree.scenario_measure(self.mu(), s);
            let f: Vec<SeparableFn> = path[..n].iter().map(|&m| self.hstar(m).clone()).collect();
            let dens = GridMeasure {
                density: path[..n]
                    .iter()
                    .map(|&m| theta.density[m].iter().map(|x| -x).collect())
                    .collect(),
                atoms: vec![],
            };
            let full = GridMeasure {
                density: dens.density.clone(),
                atoms: theta
                    .atoms
                    .iter()
                    .filter(|a| path[tree.depth(a.node)] == a.node)
                    .map(|a| Atom {
                        tau: a.tau,
                        mass: a.mass.iter().map(|x| -x).collect(),
                    })
                    .collect(),
            };
            density += ps * j_functional(&f, &dens, &mu_s)?;
            total += ps * j_functional(&f, &full, &mu_s)?;
        }
        let mut singular = 0.0;
        for a in &theta.atoms {
            let parent = tree.parent(a.node).expect("atoms sit below a null cell");
            let neg: Vec<f64> = a.mass.iter().map(|x| -x).collect();
            singular += tree.prob(a.node) * self.hstar(parent).recession().eval(&neg);
        }
        let root = tree.root();
        let initial = self.k0star.eval(&sub(&v.v_minus, v.v.get(root)));
        let mut terminal = 0.0;
        for &l in tree.leaves() {
            terminal += tree.prob(l) * self.ktstar[l].as_ref().expect("leaf").eval(v.v.get(l));
        }
        let value = total + initial + terminal;
        Ok(ConjugateEval {
            value: if value.is_nan() { INF } else { value },
            density,
            singular,
            initial,
            terminal,
            var: mean_variation(&v.v, tree),
        })
    }

    /// `E[Σ β μ + k_0(x̄_0) + k_T(x̄_{T+})]`, an upper bound on `Ef` over the
    /// witness ball (with the endpoints held fixed).
    pub fn witness_bound(&self) -> f64 {
        let tree = self.tree();
        let w = self.witness();
        let mut total = self.parts.k0.eval(&w.path.x0);
        for n in 0..tree.len() {
            if tree.is_leaf(n) {
                total += tree.prob(n) * self.kt(n).eval(&w.path.s[n]);
            } else if let CellWeight::Regular(m) = self.mu().weight(n) {
                total += tree.prob(n) * m * w.beta[n];
            }
        }
        total
    }

    /// `⟨x̄, v⟩ - α + r·Var(v)`, a lower bound on the conjugate obtained by
    /// moving the witness against the compensator inside its ball.
    pub fn variation_lower_bound(&self, v: &DualCandidate) -> Result<f64> {
        let w = self.witness();
        Ok(self.pairing(&w.path, v)? - self.witness_bound() + w.radius * mean_variation(&v.v, self.tree()))
    }

    /// Checks the four pointwise optimality conditions and the Fenchel gap.
    pub fn subdiff_check(&self, x: &AdaptedPath, v: &DualCandidate, tol: f64) -> Result<SubdiffReport> {
        let primal = self.evaluate_ef(x)?;
        if primal == INF {
            return Err(Error::Infeasible("Ef(x) is infinite".into()));
        }
        let conjugate = self.conjugate_formula(v)?.value;
        let pairing = self.pairing(x, v)?;
        let tree = self.tree();
        let dec = rao_decompose(&v.v, tree)?;
        let mut checks: Vec<ConditionCheck> = Vec::new();
        for n in 0..tree.len() {
            let p = tree.prob(n);
            if tree.is_leaf(n) {
                checks.push(condition(ConditionKind::Terminal, n, self.kt(n), &x.s[n], v.v.get(n), p, tol)?);
                continue;
            }
            let neg: Vec<f64> = dec.increment(tree, n).iter().map(|a| -a).collect();
            checks.push(match self.mu().weight(n) {
                CellWeight::Regular(w) => {
                    let y: Vec<f64> = neg.iter().map(|a| a / w).collect();
                    condition(ConditionKind::Density, n, self.h(n), &x.s[n], &y, p * w, tol)?
                }
                CellWeight::Null => condition(
                    ConditionKind::Singular,
                    n,
                    &self.h(n).domain_indicator(),
                    &x.s[n],
                    &neg,
                    p,
                    tol,
                )?,
            });
        }
        let init = sub(&v.v_minus, v.v.get(tree.root()));
        checks.insert(0, condition(ConditionKind::Initial, 0, self.k0(), &x.x0, &init, 1.0, tol)?);
        Ok(SubdiffReport {
            checks,
            primal,
            conjugate,
            pairing,
            gap: primal + conjugate - pairing,
            tol,
        })
    }

    /// A dual element satisfying every optimality condition at the feasible
    /// `x`, built backwards from subgradients.
    pub fn optimal_dual(&self, x: &AdaptedPath) -> Result<DualCandidate> {
        if self.evaluate_ef(x)? == INF {
            return Err(Error::Infeasible("Ef(x) is infinite".into()));
        }
        let tree = self.tree();
        let d = self.dim();
        let pick = |f: &SeparableFn, at: &[f64]| -> Result<Vec<f64>> {
            f.subdifferential(at)
                .representative()
                .ok_or_else(|| Error::Infeasible("empty subdifferential".into()))
        };
        let mut v = AdaptedProcess::zeros(tree, d);
        for n in (0..tree.len()).rev() {
            if tree.is_leaf(n) {
                v.set(n, pick(self.kt(n), &x.s[n])?);
                continue;
            }
            let mean = v.next_mean(tree, n);
            let add = match self.mu().weight(n) {
                CellWeight::Regular(w) => pick(self.h(n), &x.s[n])?.iter().map(|y| w * y).collect(),
                CellWeight::Null => pick(&self.h(n).domain_indicator(), &x.s[n])?,
            };
            v.set(n, mean.iter().zip(&add).map(|(a, b)| a + b).collect::<Vec<f64>>());
        }
        let y0 = pick(self.k0(), &x.x0)?;
        let v_minus = v.get(tree.root()).iter().zip(&y0).map(|(a, b)| a + b).collect();
        Ok(DualCandidate { v_minus, v })
    }

    /// Shifts exactly one optimality condition by `eps` (coordinate `coord`):
    /// the terminal condition at a leaf, the density or singular condition at
    /// a non-leaf node (through `-Da`), or the initial condition when `node`
    /// is `None`. The shift is propagated to the ancestors as a martingale so
    /// that no other condition moves.
    pub fn perturb(&self, v: &DualCandidate, node: Option<usize>, coord: usize, eps: f64) -> DualCandidate {
        let tree = self.tree();
        let mut out = v.clone();
        let Some(target) = node else {
            out.v_minus[coord] += eps;
            return out;
        };
        let pt = tree.prob(target);
        let mut cur = Some(target);
        while let Some(n) = cur {
            let mut val = out.v.get(n).to_vec();
            val[coord] += eps * pt / tree.prob(n);
            out.v.set(n, val);
            cur = tree.parent(n);
        }
        out.v_minus[coord] += eps * pt;
        out
    }

    /// `sup_v ⟨x, v⟩ - (Ef)*(v)` over the optimal dual at `x` and the given
    /// samples, against `Ef(x)`. Weak duality bounds every sample by `Ef(x)`.
    pub fn biconjugate_check(&self, x: &AdaptedPath, samples: &[DualCandidate], tol: f64) -> Result<BiconjugateCheck> {
        let primal = self.evaluate_ef(x)?;
        let mut best = f64::NEG_INFINITY;
        let mut weak = true;
        let mut candidates: Vec<DualCandidate> = samples.to_vec();
        if primal < INF {
            candidates.push(self.optimal_dual(x)?);
        }
        for v in &candidates {
            let c = self.conjugate_formula(v)?.value;
            if c == INF {
                continue;
            }
            let val = self.pairing(x, v)? - c;
            if val > primal + tol * (1.0 + primal.abs()) {
                weak = false;
            }
            best = best.max(val);
        }
        Ok(BiconjugateCheck {
            primal,
            best,
            weak_duality: weak,
            closed: agree(primal, best, tol),
        })
    }

    /// Evaluates `EI_h` on a raw process: cell `k` uses the time-`k` value
    /// with the integrand of the depth-`(k-1)` node.
    pub fn integral_raw(&self, x: &RawProcess) -> Result<f64> {
        let tree = self.tree();
        if x.values().len() != tree.n_scenarios() || x.dim() != self.dim() {
            return Err(Error::Shape("raw process does not match the instance".into()));
        }
        let mut total = 0.0;
        for s in 0..tree.n_scenarios() {
            let ps = tree.prob(tree.leaves()[s]);
            let path = tree.path(s);
            for k in 1..=tree.n_periods() {
                let n = path[k - 1];
                let term = match self.mu().weight(n) {
                    CellWeight::Regular(w) => w * self.h(n).eval(x.at(s, k)),
                    CellWeight::Null => self.h(n).domain_indicator().eval(x.at(s, k)),
                };
                if term == INF {
                    return Ok(INF);
                }
                total += ps * term;
            }
        }
        Ok(total)
    }

    /// `EI_h(x)`, `EI_h(°x)` and `EI_h(ᵖx)`.
    pub fn jensen_check(&self, x: &RawProcess) -> Result<JensenReport> {
        let tree = self.tree();
        let raw = self.integral_raw(x)?;
        let optional = self.integral_raw(&optional_projection(x, tree)?.to_raw(tree))?;
        let predictable = self.integral_raw(&predictable_projection(x, tree)?.to_raw(tree))?;
        Ok(JensenReport {
            raw,
            optional,
            predictable,
        })
    }

    /// `E[I_{h^∞}(x) + k_0^∞(x_0) + k_T^∞(x_{T+})]`; on a null cell the term
    /// is the indicator of the recession cone of `dom h`.
    pub fn recession_ef(&self, x: &AdaptedPath) -> Result<f64> {
        self.check_path(x)?;
        let tree = self.tree();
        let mut total = self.k0().recession().eval(&x.x0);
        for n in 0..tree.len() {
            let term = if tree.is_leaf(n) {
                self.kt(n).recession().eval(&x.s[n])
            } else {
                match self.mu().weight(n) {
                    CellWeight::Regular(w) => w * self.h(n).recession().eval(&x.s[n]),
                    CellWeight::Null => self.h(n).domain_indicator().recession().eval(&x.s[n]),
                }
            };
            if term == INF {
                return Ok(INF);
            }
            total += tree.prob(n) * term;
        }
        Ok(total)
    }

    /// `(Ef(x̄ + αx) - Ef(x̄)) / α` from the witness.
    pub fn recession_quotient(&self, x: &AdaptedPath, alpha: f64) -> Result<f64> {
        let base = &self.witness().path;
        let f0 = self.evaluate_ef(base)?;
        let f1 = self.evaluate_ef(&base.offset(alpha, x))?;
        Ok((f1 - f0) / alpha)
    }

    /// Compares the recession formula with difference quotients at
    /// `α = 1, 10, …, alpha_max`.
    pub fn recession_check(&self, x: &AdaptedPath, alpha_max: f64, tol: f64) -> Result<RecessionCheck> {
        let formula = self.recession_ef(x)?;
        let mut alphas = vec![];
        let mut a = 1.0;
        while a <= alpha_max * (1.0 + 1e-12) {
            alphas.push(a);
            a *= 10.0;
        }
        let quotients = alphas
            .iter()
            .map(|&a| self.recession_quotient(x, a))
            .collect::<Result<Vec<_>>>()?;
        let monotone = quotients
            .windows(2)
            .all(|w| w[1] >= w[0] - 1e-9 * (1.0 + w[0].abs()) || w[1] == INF);
        let q = *quotients.last().expect("nonempty");
        let q2 = self.recession_quotient(x, 2.0 * alpha_max)?;
        let limit = if q == INF || q2 == INF { INF } else { 2.0 * q2 - q };
        // an infinite recession shows as quotients still growing linearly in α
        let agrees = if formula == INF {
            limit == INF || q2 - q > 1.0
        } else {
            limit.is_finite() && (limit - formula).abs() <= tol * (1.0 + formula.abs())
        };
        Ok(RecessionCheck {
            formula,
            quotient: q,
            limit,
            monotone,
            agrees,
        })
    }

    /// True when every integrand has `h^∞ = δ_{{0}}`, read off the conjugate
    /// domains being the whole line.
    pub fn coercivity_check(&self) -> bool {
        let tree = self.tree();
        let full = |f: &SeparableFn| f.components().iter().all(|g| g.domain() == Interval::REALS);
        full(&self.k0star)
            && tree.inner_nodes().all(|n| full(self.hstar(n)))
            && tree.leaves().iter().all(|&l| full(self.ktstar[l].as_ref().expect("leaf")))
    }

    /// Which special cases the instance falls under.
    pub fn shapes(&self) -> Vec<Shape> {
        let tree = self.tree();
        let all = |p: &dyn Fn(&SeparableFn) -> bool| tree.inner_nodes().all(|n| p(self.h(n)));
        let mut out = vec![];
        if all(&|h| h.is_finite_everywhere()) {
            out.push(Shape::FiniteIntegrand);
        }
        if all(&|h| h.is_indicator()) {
            out.push(Shape::Indicator);
        }
        if all(&|h| h.is_identically_zero()) {
            out.push(Shape::NoRunningCost);
        }
        if self.k0().is_zero_indicator() {
            out.push(Shape::ZeroInitial);
        }
        out
    }

    /// The dual candidate of a deterministic dual function on a single scenario.
    pub fn dual_from_grid(&self, v: &DualFunction) -> Result<DualCandidate> {
        let tree = self.tree();
        if tree.n_scenarios() != 1 || v.values().len() != tree.len() {
            return Err(Error::Shape("grid dual needs a single-scenario instance".into()));
        }
        Ok(DualCandidate {
            v_minus: v.v_minus().to_vec(),
            v: AdaptedProcess::new(tree, v.values().to_vec())?,
        })
    }

    /// The deterministic dual function of a single-scenario candidate.
    pub fn dual_to_grid(&self, v: &DualCandidate) -> Result<DualFunction> {
        if self.tree().n_scenarios() != 1 {
            return Err(Error::Shape("only single-scenario duals are deterministic".into()));
        }
        DualFunction::new(v.v_minus.clone(), v.v.values().to_vec())
    }
}

/// Biconjugate evaluation at one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiconjugateCheck {
    pub primal: f64,
    pub best: f64,
    pub weak_duality: bool,
    pub closed: bool,
}

/// Values of the Jensen comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JensenReport {
    pub raw: f64,
    pub optional: f64,
    pub predictable: f64,
}

/// Recession formula against difference quotients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecessionCheck {
    pub formula: f64,
    /// Raw quotient at the largest `α`.
    pub quotient: f64,
    /// Two-point extrapolation `2q(2α) - q(α)`, exact on linear tails.
    pub limit: f64,
    pub monotone: bool,
    pub agrees: bool,
}

/// Special cases with simplified conjugates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Shape {
    /// Every `h` is finite on all of `ℝ^d`: singular `Da` is ruled out.
    FiniteIntegrand,
    /// Every `h` is the indicator of a box `S`: `h*` is the support function.
    Indicator,
    /// `h ≡ 0`: only martingales have finite conjugate.
    NoRunningCost,
    /// `k_0 = δ_{{0}}`: the initial value is pinned.
    ZeroInitial,
}

impl Shape {
    pub fn label(&self) -> &'static str {
        match self {
            Shape::FiniteIntegrand => "finite-integrand",
            Shape::Indicator => "indicator",
            Shape::NoRunningCost => "no-running-cost",
            Shape::ZeroInitial => "zero-initial",
        }
    }
}

/// One special-case comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CorollaryCheck {
    pub shape: Shape,
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Relative agreement allowing matching infinities.
pub fn agree(a: f64, b: f64, tol: f64) -> bool {
    if a == INF || b == INF {
        return a == b;
    }
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn support(interval: &Interval, y: f64) -> f64 {
    if y.abs() <= crate::convex::DOMAIN_SLACK {
        0.0
    } else if y > 0.0 {
        if interval.hi == INF {
            INF
        } else {
            y * interval.hi
        }
    } else if y < 0.0 {
        if interval.lo == f64::NEG_INFINITY {
            INF
        } else {
            y * interval.lo
        }
    } else {
        0.0
    }
}

/// Runs every special case the instance falls under against the formula and
/// the oracle.
pub fn corollary_suite(
    inst: &BolzaInstance,
    v: &DualCandidate,
    opts: &OracleOptions,
    tol: f64,
) -> Result<Vec<CorollaryCheck>> {
    let tree = inst.tree();
    let formula = inst.conjugate_formula(v)?;
    let mut out = vec![];
    let mut oracle_cache: Option<OracleResult> = None;
    let mut oracle = || -> Result<f64> {
        if oracle_cache.is_none() {
            oracle_cache = Some(conjugate_bruteforce(inst, &v.v_minus, &v.v, opts)?);
        }
        Ok(oracle_cache.as_ref().expect("set").value)
    };
    let dec = rao_decompose(&v.v, tree)?;
    let shapes = inst.shapes();
    for &shape in &shapes {
        match shape {
            Shape::FiniteIntegrand => {
                let mass: f64 = tree
                    .inner_nodes()
                    .filter(|&n| inst.mu().weight(n).is_null())
                    .map(|n| tree.prob(n) * norm(&dec.increment(tree, n)))
                    .sum();
                out.push(CorollaryCheck {
                    shape,
                    name: "singular-mass-forces-infinity",
                    lhs: mass,
                    rhs: formula.singular,
                    pass: if mass > 0.0 { formula.singular == INF } else { formula.singular == 0.0 },
                });
                let o = oracle()?;
                out.push(CorollaryCheck {
                    shape,
                    name: "formula-vs-oracle",
                    lhs: formula.value,
                    rhs: o,
                    pass: agree(formula.value, o, tol),
                });
            }
            Shape::Indicator => {
                let mut running = 0.0;
                for n in tree.inner_nodes() {
                    let neg: Vec<f64> = dec.increment(tree, n).iter().map(|a| -a).collect();
                    let s: f64 = inst
                        .h(n)
                        .components()
                        .iter()
                        .zip(&neg)
                        .map(|(f, &y)| support(&f.domain(), y))
                        .sum();
                    running += tree.prob(n) * s;
                }
                let sigma = running + formula.initial + formula.terminal;
                out.push(CorollaryCheck {
                    shape,
                    name: "support-function-conjugate",
                    lhs: sigma,
                    rhs: formula.value,
                    pass: agree(sigma, formula.value, tol),
                });
                let o = oracle()?;
                out.push(CorollaryCheck {
                    shape,
                    name: "formula-vs-oracle",
                    lhs: formula.value,
                    rhs: o,
                    pass: agree(formula.value, o, tol),
                });
                let unit = inst.dim() == 1
                    && tree.inner_nodes().all(|n| {
                        inst.h(n).components()[0].domain() == Interval::new(-1.0, 1.0)
                    })
                    && inst.k0().is_zero_indicator()
                    && tree.leaves().iter().all(|&l| inst.kt(l).is_zero_indicator());
                if unit {
                    out.push(CorollaryCheck {
                        shape,
                        name: "unit-ball-recovers-mean-variation",
                        lhs: formula.value,
                        rhs: formula.var,
                        pass: agree(formula.value, formula.var, tol),
                    });
                }
                let x = &inst.witness().path;
                let opt = inst.optimal_dual(x)?;
                let rep = inst.subdiff_check(x, &opt, crate::time_grid::SUBDIFF_TOL)?;
                out.push(CorollaryCheck {
                    shape,
                    name: "normal-cone-condition",
                    lhs: rep.gap,
                    rhs: 0.0,
                    pass: rep.all_hold() && rep.gap_closed(),
                });
            }
            Shape::NoRunningCost => {
                let martingale = v.v.is_martingale(tree, 1e-12);
                let ends = formula.initial + formula.terminal;
                let pass = if martingale {
                    formula.value == ends
                } else {
                    formula.value == INF
                };
                out.push(CorollaryCheck {
                    shape,
                    name: "finite-only-on-martingales",
                    lhs: formula.value,
                    rhs: if martingale { ends } else { INF },
                    pass,
                });
                let o = oracle()?;
                out.push(CorollaryCheck {
                    shape,
                    name: "formula-vs-oracle",
                    lhs: formula.value,
                    rhs: o,
                    pass: agree(formula.value, o, tol),
                });
            }
            Shape::ZeroInitial => {
                let pinned = DualCandidate {
                    v_minus: vec![0.0; inst.dim()],
                    v: v.v.clone(),
                };
                let lhs = inst.conjugate_formula(&pinned)?.value;
                let frozen = OracleOptions {
                    freeze_x0: true,
                    ..opts.clone()
                };
                let o = conjugate_bruteforce(inst, &pinned.v_minus, &v.v, &frozen)?.value;
                out.push(CorollaryCheck {
                    shape,
                    name: "pinned-start-conjugate",
                    lhs,
                    rhs: o,
                    pass: agree(lhs, o, tol),
                });
            }
        }
    }
    Ok(out)
}

/// Converts a node-indexed certificate table check into an error-free bool;
/// used by loaders that want to report instead of fail.
pub fn certificate_holds(h: &SeparableFn, c: &Certificate) -> Result<bool> {
    Ok(h.conjugate()?.eval(&c.slope) <= c.alpha + 1e-9 * (1.0 + c.alpha.abs()))
}

/// The deterministic measure for a one-scenario instance built from cell
/// lengths with the given null cells; convenience for tests and examples.
pub fn lebesgue_with_null(times: Vec<f64>, null: &[usize]) -> Result<RefMeasure> {
    RefMeasure::with_null_cells(crate::time_grid::TimeGrid::new(times)?, null)
}
