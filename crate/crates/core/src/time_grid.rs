//! Deterministic paths of bounded variation on a time grid.
//!
//! Conventions used throughout the crate:
//!
//! - the grid is `0 = t_0 < t_1 < … < t_N = T` and cell `k` is `(t_{k-1}, t_k]`;
//! - a path is `x_0` plus jumps `J_0, …, J_N` at the grid times, with
//!   `s_k = x_0 + J_0 + … + J_k`; its value on cell `k` is `s_{k-1}` (left
//!   continuity) and `x_{T+} = s_N`;
//! - a dual function `v` is right-continuous and sampled at grid times, with
//!   an extra value `v_{-inf}` paired against `x_0`.
//!
//! The reference measure gives every cell a positive weight, except cells
//! flagged *null*: those carry no mass, the increment of `v` across them is a
//! singular atom, and the integrand only contributes the constraint
//! `x ∈ cl dom h` there.

use crate::convex::{fenchel_gap_with, Interval, SeparableFn};
use crate::error::{Error, Result};

/// Strictly increasing grid times starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::Invalid("a time grid needs at least one cell".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::Invalid(format!("grid must start at 0, got {}", times[0])));
        }
        for (k, w) in times.windows(2).enumerate() {
            if !(w[0] < w[1]) || !w[1].is_finite() {
                return Err(Error::Invalid(format!(
                    "grid times not strictly increasing at index {}",
                    k + 1
                )));
            }
        }
        Ok(TimeGrid { times })
    }

    /// `n` equal cells on `[0, horizon]`.
    pub fn uniform(n: usize, horizon: f64) -> Result<Self> {
        TimeGrid::new((0..=n).map(|k| horizon * k as f64 / n.max(1) as f64).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_cells(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// The cell `k ∈ 1..=N` containing `tau`; `tau = 0` maps to cell 1.
    pub fn cell_of(&self, tau: f64) -> Option<usize> {
        if !(tau >= 0.0 && tau <= self.horizon()) {
            return None;
        }
        if tau == 0.0 {
            return Some(1);
        }
        Some(self.times.partition_point(|&t| t < tau))
    }
}

/// Weight of one cell under the reference measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellWeight {
    Regular(f64),
    /// A μ-null cell: singular mass of a dual increment may sit here.
    Null,
}

impl CellWeight {
    pub fn mass(&self) -> f64 {
        match self {
            CellWeight::Regular(w) => *w,
            CellWeight::Null => 0.0,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, CellWeight::Null)
    }

    pub(crate) fn validate(&self, at: &str) -> Result<()> {
        match self {
            CellWeight::Regular(w) if !(*w > 0.0 && w.is_finite()) => Err(Error::invariant(
                at,
                format!("cell weight must be positive and finite, got {w}"),
            )),
            _ => Ok(()),
        }
    }
}

/// Reference measure on the cells of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RefMeasure {
    grid: TimeGrid,
    cells: Vec<CellWeight>,
}

impl RefMeasure {
    pub fn new(grid: TimeGrid, cells: Vec<CellWeight>) -> Result<Self> {
        if cells.len() != grid.n_cells() {
            return Err(Error::Shape(format!(
                "{} cell weights for {} cells",
                cells.len(),
                grid.n_cells()
            )));
        }
        for (k, c) in cells.iter().enumerate() {
            c.validate(&format!("cell {}", k + 1))?;
        }
        Ok(RefMeasure { grid, cells })
    }

    /// Lebesgue measure on the grid: each cell weighs its length.
    pub fn lebesgue(grid: TimeGrid) -> Self {
        let cells = grid
            .times()
            .windows(2)
            .map(|w| CellWeight::Regular(w[1] - w[0]))
            .collect();
        RefMeasure { grid, cells }
    }

    /// Lebesgue measure with the listed cells (1-based) flagged null.
    pub fn with_null_cells(grid: TimeGrid, null: &[usize]) -> Result<Self> {
        let mut mu = RefMeasure::lebesgue(grid);
        for &k in null {
            if k == 0 || k > mu.cells.len() {
                return Err(Error::Invalid(format!("null cell {k} out of range")));
            }
            mu.cells[k - 1] = CellWeight::Null;
        }
        Ok(mu)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn cells(&self) -> &[CellWeight] {
        &self.cells
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Weight of cell `k` (1-based).
    pub fn cell(&self, k: usize) -> CellWeight {
        self.cells[k - 1]
    }

    /// True when `tau` lies in a null cell.
    pub fn is_null_at(&self, tau: f64) -> bool {
        self.grid
            .cell_of(tau)
            .is_some_and(|k| self.cells[k - 1].is_null())
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// A left-continuous path of bounded variation: `x_0` and jumps at grid times.
#[derive(Debug, Clone, PartialEq)]
pub struct BVPath {
    x0: Vec<f64>,
    jumps: Vec<Vec<f64>>,
}

impl BVPath {
    pub fn new(x0: Vec<f64>, jumps: Vec<Vec<f64>>) -> Result<Self> {
        let d = x0.len();
        if d == 0 || jumps.len() < 2 {
            return Err(Error::Shape("path needs d ≥ 1 and at least two jump times".into()));
        }
        if let Some(j) = jumps.iter().find(|j| j.len() != d) {
            return Err(Error::Dimension {
                expected: d,
                got: j.len(),
            });
        }
        Ok(BVPath { x0, jumps })
    }

    /// Builds the path with the given running values `s_0, …, s_N`.
    pub fn from_values(x0: Vec<f64>, values: &[Vec<f64>]) -> Result<Self> {
        let mut prev = x0.clone();
        let mut jumps = Vec::with_capacity(values.len());
        for s in values {
            if s.len() != prev.len() {
                return Err(Error::Dimension {
                    expected: prev.len(),
                    got: s.len(),
                });
            }
            jumps.push(s.iter().zip(&prev).map(|(a, b)| a - b).collect());
            prev = s.clone();
        }
        BVPath::new(x0, jumps)
    }

    pub fn scalar(x0: f64, jumps: &[f64]) -> Result<Self> {
        BVPath::new(vec![x0], jumps.iter().map(|&j| vec![j]).collect())
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn jumps(&self) -> &[Vec<f64>] {
        &self.jumps
    }

    /// Number of cells `N` (one less than the number of jump times).
    pub fn n_cells(&self) -> usize {
        self.jumps.len() - 1
    }

    /// Running values `s_0, …, s_N` (prefix sums of the jumps).
    pub fn values(&self) -> Vec<Vec<f64>> {
        let mut cur = self.x0.clone();
        self.jumps
            .iter()
            .map(|j| {
                for (c, v) in cur.iter_mut().zip(j) {
                    *c += v;
                }
                cur.clone()
            })
            .collect()
    }

    /// `x_{T+} = s_N`.
    pub fn terminal(&self) -> Vec<f64> {
        self.values().pop().expect("nonempty")
    }

    /// `Σ_k |J_k|` with the Euclidean norm per jump.
    pub fn total_variation(&self) -> f64 {
        self.jumps.iter().map(|j| norm(j)).sum()
    }

    pub fn scaled(&self, alpha: f64) -> BVPath {
        BVPath {
            x0: self.x0.iter().map(|v| alpha * v).collect(),
            jumps: self
                .jumps
                .iter()
                .map(|j| j.iter().map(|v| alpha * v).collect())
                .collect(),
        }
    }
}

/// An atom `mass · δ_τ` of a grid measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub tau: f64,
    pub mass: Vec<f64>,
}

/// A signed vector measure: per-cell density with respect to μ plus atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    pub density: Vec<Vec<f64>>,
    pub atoms: Vec<Atom>,
}

impl GridMeasure {
    pub fn zero(n_cells: usize, dim: usize) -> Self {
        GridMeasure {
            density: vec![vec![0.0; dim]; n_cells],
            atoms: vec![],
        }
    }

    pub fn negated(&self) -> GridMeasure {
        GridMeasure {
            density: self
                .density
                .iter()
                .map(|g| g.iter().map(|v| -v).collect())
                .collect(),
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    tau: a.tau,
                    mass: a.mass.iter().map(|v| -v).collect(),
                })
                .collect(),
        }
    }

    /// `λθ + (1-λ)θ'` for measures with the same atom locations.
    pub fn combine(&self, other: &GridMeasure, lambda: f64) -> Result<GridMeasure> {
        if self.density.len() != other.density.len() || self.atoms.len() != other.atoms.len() {
            return Err(Error::Shape("measures have different supports".into()));
        }
        let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter()
                .zip(b)
                .map(|(x, y)| lambda * x + (1.0 - lambda) * y)
                .collect()
        };
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for (a, b) in self.atoms.iter().zip(&other.atoms) {
            if a.tau != b.tau {
                return Err(Error::Shape("atom locations differ".into()));
            }
            atoms.push(Atom {
                tau: a.tau,
                mass: mix(&a.mass, &b.mass),
            });
        }
        Ok(GridMeasure {
            density: self
                .density
                .iter()
                .zip(&other.density)
                .map(|(a, b)| mix(a, b))
                .collect(),
            atoms,
        })
    }

    pub fn scaled(&self, alpha: f64) -> GridMeasure {
        GridMeasure {
            density: self
                .density
                .iter()
                .map(|g| g.iter().map(|v| alpha * v).collect())
                .collect(),
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    tau: a.tau,
                    mass: a.mass.iter().map(|v| alpha * v).collect(),
                })
                .collect(),
        }
    }
}

/// One atom of the singular part: its location and mass, with the polar
/// decomposition `mass = |mass| · direction` available on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularAtom {
    pub tau: f64,
    pub mass: Vec<f64>,
}

impl SingularAtom {
    /// `|θ^s|` of this atom (Euclidean norm of the mass).
    pub fn weight(&self) -> f64 {
        norm(&self.mass)
    }

    /// `dθ^s / d|θ^s|`; zero for a zero atom.
    pub fn direction(&self) -> Vec<f64> {
        let w = self.weight();
        if w == 0.0 {
            vec![0.0; self.mass.len()]
        } else {
            self.mass.iter().map(|m| m / w).collect()
        }
    }
}

/// Absolutely continuous and singular parts of a grid measure.
#[derive(Debug, Clone, PartialEq)]
pub struct LebesgueDecomposition {
    /// `dθ^a/dμ` per cell; zero on null cells.
    pub density: Vec<Vec<f64>>,
    pub singular: Vec<SingularAtom>,
}

impl LebesgueDecomposition {
    /// Total variation `|θ^s|` of the singular part.
    pub fn singular_variation(&self) -> f64 {
        self.singular.iter().map(SingularAtom::weight).sum()
    }

    pub fn recombine(&self) -> GridMeasure {
        GridMeasure {
            density: self.density.clone(),
            atoms: self
                .singular
                .iter()
                .map(|a| Atom {
                    tau: a.tau,
                    mass: a.mass.clone(),
                })
                .collect(),
        }
    }
}

/// Splits `θ` into its μ-density and its singular atoms.
///
/// Atoms must sit in null cells and null cells must carry no density;
/// otherwise the decomposition is not determined by the flags.
pub fn lebesgue_decompose(theta: &GridMeasure, mu: &RefMeasure) -> Result<LebesgueDecomposition> {
    if theta.density.len() != mu.n_cells() {
        return Err(Error::Shape(format!(
            "{} density cells for {} grid cells",
            theta.density.len(),
            mu.n_cells()
        )));
    }
    for (k, g) in theta.density.iter().enumerate() {
        if mu.cells[k].is_null() && g.iter().any(|v| *v != 0.0) {
            return Err(Error::Invalid(format!(
                "density on null cell {} has no reference mass",
                k + 1
            )));
        }
    }
    let mut singular = Vec::with_capacity(theta.atoms.len());
    for a in &theta.atoms {
        if !mu.is_null_at(a.tau) {
            return Err(Error::Invalid(format!(
                "atom at {} is not at a flagged null location",
                a.tau
            )));
        }
        singular.push(SingularAtom {
            tau: a.tau,
            mass: a.mass.clone(),
        });
    }
    Ok(LebesgueDecomposition {
        density: theta.density.clone(),
        singular,
    })
}

/// `J_f(θ) = Σ_k f_k(g_k) w_k + Σ_j f^∞_{cell(τ_j)}(m_j/|m_j|) |m_j|`.
///
/// `f[k-1]` is the integrand on cell `k`; an atom uses the cell containing
/// its location (cell 1 for `τ = 0`).
pub fn j_functional(f: &[SeparableFn], theta: &GridMeasure, mu: &RefMeasure) -> Result<f64> {
    if f.len() != mu.n_cells() {
        return Err(Error::Shape(format!(
            "{} integrands for {} cells",
            f.len(),
            mu.n_cells()
        )));
    }
    let parts = lebesgue_decompose(theta, mu)?;
    let mut total = 0.0;
    for (k, g) in parts.density.iter().enumerate() {
        if let CellWeight::Regular(w) = mu.cells[k] {
            total += f[k].eval(g) * w;
        }
    }
    for atom in &parts.singular {
        if atom.weight() == 0.0 {
            continue;
        }
        let k = mu.grid.cell_of(atom.tau).expect("validated location");
        // f^∞ is positively homogeneous, so evaluate at the mass itself
        total += f[k - 1].recession().eval(&atom.mass);
    }
    Ok(total)
}

/// `I_h(x) = Σ_k h_k(s_{k-1}) w_k`; on a null cell the term is
/// `δ_{cl dom h_k}(s_{k-1})`.
pub fn integral_functional_det(h: &[SeparableFn], x: &BVPath, mu: &RefMeasure) -> Result<f64> {
    if h.len() != mu.n_cells() || x.n_cells() != mu.n_cells() {
        return Err(Error::Shape("integrand, path and measure disagree on N".into()));
    }
    let values = x.values();
    let mut total = 0.0;
    for (k, hk) in h.iter().enumerate() {
        let s = &values[k];
        total += match mu.cells[k] {
            CellWeight::Regular(w) => hk.eval(s) * w,
            CellWeight::Null => hk.domain_indicator().eval(s),
        };
    }
    Ok(total)
}

/// A right-continuous dual function sampled at grid times, plus `v_{-inf}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualFunction {
    v_minus: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl DualFunction {
    pub fn new(v_minus: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let d = v_minus.len();
        if d == 0 || values.len() < 2 {
            return Err(Error::Shape("dual function needs d ≥ 1 and two grid times".into()));
        }
        for v in values.iter().chain(std::iter::once(&v_minus)) {
            if v.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Invalid("dual values must be finite".into()));
            }
        }
        Ok(DualFunction { v_minus, values })
    }

    pub fn scalar(v_minus: f64, values: &[f64]) -> Result<Self> {
        DualFunction::new(vec![v_minus], values.iter().map(|&v| vec![v]).collect())
    }

    /// `v ≡ c` on the grid with `v_{-inf} = c` as well.
    pub fn constant(c: &[f64], n_cells: usize) -> Self {
        DualFunction {
            v_minus: c.to_vec(),
            values: vec![c.to_vec(); n_cells + 1],
        }
    }

    pub fn v_minus(&self) -> &[f64] {
        &self.v_minus
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.v_minus.len()
    }

    pub fn n_cells(&self) -> usize {
        self.values.len() - 1
    }

    /// `Dv` on `(0, T]`: the increment across cell `k` is a μ-density on
    /// regular cells and an atom at `t_k` on null cells.
    pub fn derivative(&self, mu: &RefMeasure) -> Result<GridMeasure> {
        if self.n_cells() != mu.n_cells() {
            return Err(Error::Shape("dual function and measure disagree on N".into()));
        }
        let d = self.dim();
        let mut density = vec![vec![0.0; d]; self.n_cells()];
        let mut atoms = Vec::new();
        for k in 1..=self.n_cells() {
            let inc: Vec<f64> = self.values[k]
                .iter()
                .zip(&self.values[k - 1])
                .map(|(a, b)| a - b)
                .collect();
            match mu.cell(k) {
                CellWeight::Regular(w) => density[k - 1] = inc.iter().map(|v| v / w).collect(),
                CellWeight::Null => atoms.push(Atom {
                    tau: mu.grid.times()[k],
                    mass: inc,
                }),
            }
        }
        Ok(GridMeasure { density, atoms })
    }
}

/// `⟨v, x⟩ = v_{-inf}·x_0 + Σ_k v(t_k)·J_k`.
pub fn pairing_det(v: &DualFunction, x: &BVPath) -> Result<f64> {
    if v.dim() != x.dim() {
        return Err(Error::Dimension {
            expected: v.dim(),
            got: x.dim(),
        });
    }
    if v.values.len() != x.jumps.len() {
        return Err(Error::Shape("dual function and path live on different grids".into()));
    }
    let mut total = dot(&v.v_minus, &x.x0);
    for (vk, jk) in v.values.iter().zip(&x.jumps) {
        total += dot(vk, jk);
    }
    Ok(total)
}

/// Which optimality condition a [`ConditionCheck`] refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConditionKind {
    /// `-dv/dμ ∈ ∂h(x)` on a regular cell.
    Density,
    /// `-dv/d|Dv^s| ∈ N_{cl dom h}(x)` on a null cell.
    Singular,
    /// `v_{-inf} - v_0 ∈ ∂k_0(x_0)`.
    Initial,
    /// `v_T ∈ ∂k_T(x_{T+})`.
    Terminal,
}

impl ConditionKind {
    pub fn label(&self) -> &'static str {
        match self {
            ConditionKind::Density => "density",
            ConditionKind::Singular => "singular",
            ConditionKind::Initial => "initial",
            ConditionKind::Terminal => "terminal",
        }
    }
}

/// One pointwise optimality condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCheck {
    pub kind: ConditionKind,
    /// Cell (deterministic) or node (stochastic) index; 0 for the initial one.
    pub at: usize,
    /// Distance from the dual element to the required subdifferential.
    pub distance: f64,
    /// This condition's share of the Fenchel gap (probability weighted).
    pub gap: f64,
    pub holds: bool,
}

/// Pointwise conditions together with the aggregate Fenchel gap.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdiffReport {
    pub checks: Vec<ConditionCheck>,
    pub primal: f64,
    pub conjugate: f64,
    pub pairing: f64,
    /// `primal + conjugate - pairing`.
    pub gap: f64,
    pub tol: f64,
}

impl SubdiffReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn gap_closed(&self) -> bool {
        self.gap <= self.tol
    }

    /// The two certificates agree: all conditions hold iff the gap vanishes.
    pub fn consistent(&self) -> bool {
        self.all_hold() == self.gap_closed()
    }

    /// Kinds of the failing conditions, sorted and deduplicated.
    pub fn failing_kinds(&self) -> Vec<ConditionKind> {
        let mut kinds: Vec<_> = self.checks.iter().filter(|c| !c.holds).map(|c| c.kind).collect();
        kinds.sort();
        kinds.dedup();
        kinds
    }

    /// Sum of the per-condition gaps.
    pub fn gap_sum(&self) -> f64 {
        self.checks.iter().map(|c| c.gap).sum()
    }
}

/// Membership tolerance for subdifferential conditions.
pub const SUBDIFF_TOL: f64 = 1e-8;

pub(crate) fn condition(
    kind: ConditionKind,
    at: usize,
    f: &SeparableFn,
    x: &[f64],
    y: &[f64],
    scale: f64,
    tol: f64,
) -> Result<ConditionCheck> {
    let set = f.subdifferential(x);
    let distance = set.distance(y);
    let gap = fenchel_gap_with(f.eval(x), f.conjugate()?.eval(y), dot(x, y), 1.0);
    let holds = set.contains(y, tol);
    Ok(ConditionCheck {
        kind,
        at,
        distance,
        gap: scale * gap,
        holds,
    })
}

/// Deterministic Bolza functional `f(x) = I_h(x) + k_0(x_0) + k_T(x_{T+})`.
#[derive(Debug, Clone)]
pub struct GridInstance {
    pub mu: RefMeasure,
    /// `h[k-1]` is the integrand on cell `k`.
    pub h: Vec<SeparableFn>,
    pub k0: SeparableFn,
    pub kt: SeparableFn,
}

impl GridInstance {
    pub fn new(mu: RefMeasure, h: Vec<SeparableFn>, k0: SeparableFn, kt: SeparableFn) -> Result<Self> {
        if h.len() != mu.n_cells() {
            return Err(Error::Shape(format!(
                "{} integrands for {} cells",
                h.len(),
                mu.n_cells()
            )));
        }
        let d = k0.dim();
        for f in h.iter().chain(std::iter::once(&kt)) {
            if f.dim() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: f.dim(),
                });
            }
        }
        Ok(GridInstance { mu, h, k0, kt })
    }

    pub fn dim(&self) -> usize {
        self.k0.dim()
    }

    pub fn n_cells(&self) -> usize {
        self.mu.n_cells()
    }

    pub fn eval(&self, x: &BVPath) -> Result<f64> {
        let running = integral_functional_det(&self.h, x, &self.mu)?;
        let ends = self.k0.eval(x.x0()) + self.kt.eval(&x.terminal());
        Ok(running + ends)
    }

    /// The closed-form conjugate
    /// `J_{h*}(-Dv) + k_0*(v_{-inf} - v_0) + k_T*(v_T)`.
    pub fn conjugate(&self, v: &DualFunction) -> Result<f64> {
        let hstar = self
            .h
            .iter()
            .map(SeparableFn::conjugate)
            .collect::<Result<Vec<_>>>()?;
        let dv = v.derivative(&self.mu)?;
        let running = j_functional(&hstar, &dv.negated(), &self.mu)?;
        let init: Vec<f64> = v
            .v_minus
            .iter()
            .zip(&v.values[0])
            .map(|(a, b)| a - b)
            .collect();
        let term_init = self.k0.conjugate()?.eval(&init);
        let term_end = self.kt.conjugate()?.eval(&v.values[v.n_cells()]);
        Ok(running + term_init + term_end)
    }

    /// Checks the pointwise optimality conditions and the Fenchel gap.
    pub fn subdiff_check(&self, x: &BVPath, v: &DualFunction, tol: f64) -> Result<SubdiffReport> {
        let primal = self.eval(x)?;
        if primal == f64::INFINITY {
            return Err(Error::Infeasible("x is outside the domain of f".into()));
        }
        let conjugate = self.conjugate(v)?;
        let pairing = pairing_det(v, x)?;
        let values = x.values();
        let vals = &v.values;
        let mut checks = Vec::new();
        for k in 1..=self.n_cells() {
            let s = &values[k - 1];
            let neg_inc: Vec<f64> = vals[k - 1].iter().zip(&vals[k]).map(|(a, b)| a - b).collect();
            let hk = &self.h[k - 1];
            checks.push(match self.mu.cell(k) {
                CellWeight::Regular(w) => {
                    let y: Vec<f64> = neg_inc.iter().map(|v| v / w).collect();
                    condition(ConditionKind::Density, k, hk, s, &y, w, tol)?
                }
                CellWeight::Null => {
                    condition(ConditionKind::Singular, k, &hk.domain_indicator(), s, &neg_inc, 1.0, tol)?
                }
            });
        }
        let init: Vec<f64> = v.v_minus.iter().zip(&vals[0]).map(|(a, b)| a - b).collect();
        checks.push(condition(ConditionKind::Initial, 0, &self.k0, x.x0(), &init, 1.0, tol)?);
        let n = self.n_cells();
        checks.push(condition(
            ConditionKind::Terminal,
            n,
            &self.kt,
            &x.terminal(),
            &vals[n],
            1.0,
            tol,
        )?);
        Ok(SubdiffReport {
            checks,
            primal,
            conjugate,
            pairing,
            gap: primal + conjugate - pairing,
            tol,
        })
    }

    /// Domain of `h_k` as one interval per coordinate.
    pub fn domain(&self, k: usize) -> Vec<Interval> {
        self.h[k - 1].components().iter().map(|f| f.domain()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::Plq;

    fn sq() -> SeparableFn {
        SeparableFn::scalar(Plq::half_square())
    }

    #[test]
    fn pairing_examples() {
        let v = DualFunction::scalar(7.0, &[1.0, 2.0]).unwrap();
        let x = BVPath::scalar(0.0, &[1.0, 1.0]).unwrap();
        assert_eq!(pairing_det(&v, &x).unwrap(), 3.0);
        let zero = DualFunction::scalar(0.0, &[0.0, 0.0, 0.0]).unwrap();
        let y = BVPath::scalar(2.0, &[1.0, -4.0, 0.5]).unwrap();
        assert_eq!(pairing_det(&zero, &y).unwrap(), 0.0);
        let c = DualFunction::constant(&[1.5], 2);
        let z = BVPath::scalar(0.0, &[1.0, -4.0, 0.5]).unwrap();
        assert_eq!(pairing_det(&c, &z).unwrap(), 1.5 * z.terminal()[0]);
    }

    #[test]
    fn total_variation_examples() {
        assert_eq!(BVPath::scalar(3.0, &[0.0, 0.0]).unwrap().total_variation(), 0.0);
        let x = BVPath::scalar(0.0, &[1.0, -1.0]).unwrap();
        assert_eq!(x.total_variation(), 2.0);
        assert_eq!(x.scaled(-3.0).total_variation(), 6.0);
    }

    #[test]
    fn cell_lookup_resolves_ties_to_the_left() {
        let g = TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(g.cell_of(0.0), Some(1));
        assert_eq!(g.cell_of(0.5), Some(1));
        assert_eq!(g.cell_of(0.5000001), Some(2));
        assert_eq!(g.cell_of(1.0), Some(2));
        assert_eq!(g.cell_of(1.5), None);
    }

    #[test]
    fn decomposition_examples() {
        let grid = TimeGrid::uniform(2, 1.0).unwrap();
        let mu = RefMeasure::with_null_cells(grid.clone(), &[1]).unwrap();
        let theta = GridMeasure {
            density: vec![vec![0.0], vec![0.0]],
            atoms: vec![Atom {
                tau: 0.5,
                mass: vec![3.0],
            }],
        };
        let parts = lebesgue_decompose(&theta, &mu).unwrap();
        assert_eq!(parts.singular_variation(), 3.0);
        assert_eq!(parts.singular[0].direction(), vec![1.0]);
        assert_eq!(parts.recombine(), theta);
        let plain = RefMeasure::lebesgue(grid);
        assert!(lebesgue_decompose(&theta, &plain).is_err());
    }

    #[test]
    fn j_functional_examples() {
        let grid = TimeGrid::uniform(4, 1.0).unwrap();
        let mu = RefMeasure::lebesgue(grid.clone());
        let f = vec![sq(); 4];
        assert_eq!(j_functional(&f, &GridMeasure::zero(4, 1), &mu).unwrap(), 0.0);

        // an atom needs a null cell; give the measure a fifth, null cell
        let grid5 = TimeGrid::new(vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.25]).unwrap();
        let mu5 = RefMeasure::with_null_cells(grid5, &[5]).unwrap();
        let atom = GridMeasure {
            density: vec![vec![0.0]; 5],
            atoms: vec![Atom {
                tau: 1.25,
                mass: vec![3.0],
            }],
        };
        assert_eq!(j_functional(&vec![sq(); 5], &atom, &mu5).unwrap(), f64::INFINITY);
        let abs = vec![SeparableFn::scalar(Plq::abs()); 5];
        let mut both = atom.clone();
        for g in both.density.iter_mut().take(4) {
            g[0] = 2.0;
        }
        assert_eq!(j_functional(&abs, &both, &mu5).unwrap(), 5.0);
    }

    #[test]
    fn integral_functional_examples() {
        let mu = RefMeasure::lebesgue(TimeGrid::uniform(2, 1.0).unwrap());
        let x = BVPath::scalar(0.0, &[1.0, 1.0, 0.0]).unwrap();
        assert_eq!(integral_functional_det(&vec![sq(); 2], &x, &mu).unwrap(), 1.25);
        let zero = SeparableFn::scalar(Plq::indicator(0.0, 0.0).unwrap());
        let x0 = BVPath::scalar(0.0, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(integral_functional_det(&vec![zero; 2], &x0, &mu).unwrap(), 0.0);
    }

    fn quadratic_one_period() -> GridInstance {
        let mu = RefMeasure::lebesgue(TimeGrid::uniform(1, 1.0).unwrap());
        let k0 = SeparableFn::scalar(Plq::indicator(0.0, 0.0).unwrap());
        GridInstance::new(mu, vec![sq()], k0, sq()).unwrap()
    }

    #[test]
    fn constant_dual_on_quadratic_instance() {
        let inst = quadratic_one_period();
        for c in [-2.0, 0.0, 0.7, 3.0] {
            let v = DualFunction::constant(&[c], 1);
            assert_eq!(inst.conjugate(&v).unwrap(), c * c / 2.0);
            // x_0 = 0, s_0 = 0 (cell value), s_1 = c
            let x = BVPath::scalar(0.0, &[0.0, c]).unwrap();
            let rep = inst.subdiff_check(&x, &v, SUBDIFF_TOL).unwrap();
            assert!(rep.all_hold() && rep.gap.abs() < 1e-12, "{rep:?}");
        }
    }

    #[test]
    fn terminal_perturbation_breaks_terminal_condition() {
        let inst = quadratic_one_period();
        let c = 1.0;
        let eps = 0.1;
        // shift v_0 and v_1 together so that Dv is unchanged
        let v = DualFunction::scalar(c + eps, &[c + eps, c + eps]).unwrap();
        let x = BVPath::scalar(0.0, &[0.0, c]).unwrap();
        let rep = inst.subdiff_check(&x, &v, SUBDIFF_TOL).unwrap();
        assert_eq!(rep.failing_kinds(), vec![ConditionKind::Terminal]);
        assert!((rep.gap - eps * eps / 2.0).abs() < 1e-12);
    }
}
