//! The check suites behind each command.

use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::{bail, Result};
use bvdual::duality::{agree, corollary_suite};
use bvdual::gen::{random_adapted, random_cell_field, random_dual, random_path, random_raw_near, DualKind};
use bvdual::interchange::interchange_tree;
use bvdual::oracle::{conjugate_bruteforce, OracleOptions};
use bvdual::quasimartingale::{ibp_check, mean_variation, mean_variation_on, rao_decompose, var_support_bruteforce};
use bvdual::time_grid::{ConditionKind, SUBDIFF_TOL};
use bvdual::tree::{
    adjoint_embedding, count_stopping_times, embedding_pairing, for_each_predictable_stopping_time,
    for_each_stopping_time, optional_identity_gap, optional_projection, predictable_identity_gap,
    predictable_projection, RawProcess,
};
use bvdual::{AdaptedPath, AdaptedProcess, DualCandidate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::report::{abs_gap, sha256_hex, CheckRow, Report};
use crate::schema::Loaded;

/// Tolerance for exact identities evaluated in floating point.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Tolerance for the recession limit.
pub const RECESSION_TOL: f64 = 1e-6;
/// Tolerance for the interchange limit.
pub const INTERCHANGE_TOL: f64 = 1e-6;
/// Size of the single-condition perturbations.
pub const PERTURBATION: f64 = 1e-3;
/// Largest stopping-time family enumerated by `project`.
pub const STOPPING_BUDGET: u128 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Duality,
    Interchange,
    Subdiff,
    Jensen,
    Ibp,
    Var,
    Decompose,
    Project,
    Recession,
    Corollaries,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::Duality,
        Suite::Interchange,
        Suite::Subdiff,
        Suite::Jensen,
        Suite::Ibp,
        Suite::Var,
        Suite::Decompose,
        Suite::Project,
        Suite::Recession,
        Suite::Corollaries,
    ];

    pub fn command(&self) -> &'static str {
        match self {
            Suite::Duality => "check-duality",
            Suite::Interchange => "check-interchange",
            Suite::Subdiff => "check-subdiff",
            Suite::Jensen => "check-jensen",
            Suite::Ibp => "check-ibp",
            Suite::Var => "check-var",
            Suite::Decompose => "decompose",
            Suite::Project => "project",
            Suite::Recession => "recession",
            Suite::Corollaries => "corollaries",
        }
    }

    /// Commands map to suites; `all` maps to every suite.
    pub fn parse(command: &str) -> Result<Vec<Suite>> {
        if command == "all" {
            return Ok(Suite::ALL.to_vec());
        }
        match Suite::ALL.iter().find(|s| s.command() == command) {
            Some(&s) => Ok(vec![s]),
            None => bail!("unknown command `{command}`"),
        }
    }

    fn stream(&self) -> u64 {
        *self as u64 + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub tol: f64,
    /// Oracle refinement levels; reported per level when set.
    pub refine: Option<usize>,
    /// Named dual or raw process for `decompose` and `project`.
    pub process: Option<String>,
    pub timings: bool,
    pub parallel: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            seed: 0,
            tol: 1e-5,
            refine: None,
            process: None,
            timings: false,
            parallel: false,
        }
    }
}

struct Rows<'a> {
    loaded: &'a Loaded,
    settings: &'a Settings,
    digest: &'a str,
    out: Vec<CheckRow>,
    clock: Instant,
}

impl Rows<'_> {
    #[allow(clippy::too_many_arguments)]
    fn push(&mut self, name: String, anchor: &str, lhs: f64, rhs: f64, gap: f64, tol: f64, pass: bool) {
        let key = format!("{}|{}|{}|{:e}", self.digest, name, self.settings.seed, self.settings.tol);
        let runtime_ms = self
            .settings
            .timings
            .then(|| self.clock.elapsed().as_secs_f64() * 1e3);
        self.clock = Instant::now();
        self.out.push(CheckRow {
            name,
            anchor: anchor.to_string(),
            digest: sha256_hex(key.as_bytes()),
            lhs,
            rhs,
            gap,
            tol,
            pass,
            runtime_ms,
        });
    }

    fn rng(&self, suite: Suite) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.settings.seed);
        rng.set_stream(suite.stream());
        rng
    }

    fn oracle(&self) -> OracleOptions {
        OracleOptions {
            seed: self.settings.seed,
            levels: self.settings.refine.unwrap_or(3).max(1),
            tol: (self.settings.tol * 1e-3).max(1e-12),
            all_levels: self.settings.refine.is_some(),
            ..OracleOptions::default()
        }
    }

    fn duals(&self, suite: Suite) -> BTreeMap<String, DualCandidate> {
        if !self.loaded.duals.is_empty() {
            return self.loaded.duals.clone();
        }
        let mut rng = self.rng(suite);
        let inst = &self.loaded.inst;
        [DualKind::InDomain, DualKind::InDomain, DualKind::Martingale, DualKind::Arbitrary]
            .iter()
            .enumerate()
            .map(|(i, &k)| (format!("random-{i}"), random_dual(&mut rng, inst, k)))
            .collect()
    }

    fn primals(&self) -> BTreeMap<String, AdaptedPath> {
        let mut out = self.loaded.primals.clone();
        out.insert("witness".into(), self.loaded.inst.witness().path.clone());
        out
    }
}

fn duality(r: &mut Rows) -> Result<()> {
    let inst = &r.loaded.inst;
    let tol = r.settings.tol;
    let opts = r.oracle();
    let grid = r.loaded.grid();
    for (name, v) in r.duals(Suite::Duality) {
        let f = inst.conjugate_formula(&v)?;
        let o = conjugate_bruteforce(inst, &v.v_minus, &v.v, &opts)?;
        let anchor = if o.ray.is_some() {
            "conjugate formula vs ascent oracle (divergence ray)"
        } else {
            "conjugate formula vs ascent oracle"
        };
        r.push(format!("duality/{name}"), anchor, f.value, o.value, abs_gap(f.value, o.value), tol, agree(f.value, o.value, tol));
        if r.settings.refine.is_some() {
            let mut prev = f64::INFINITY;
            let last = o.levels.len() - 1;
            for (i, &lv) in o.levels.iter().enumerate() {
                let gap = abs_gap(f.value, lv);
                let pass = gap <= prev + tol * (1.0 + f.value.abs()) && (i < last || agree(f.value, lv, tol));
                prev = gap;
                r.push(format!("duality/{name}/level-{i}"), "refinement sweep of the ascent oracle", f.value, lv, gap, tol, pass);
            }
        }
        let lb = inst.variation_lower_bound(&v)?;
        r.push(
            format!("variation-bound/{name}"),
            "conjugate dominates witness pairing minus bound plus r times mean variation",
            f.value,
            lb,
            f.value - lb,
            tol,
            f.value >= lb - tol * (1.0 + lb.abs()),
        );
        if let Some(g) = &grid {
            let det = g.conjugate(&inst.dual_to_grid(&v)?)?;
            r.push(
                format!("duality-grid/{name}"),
                "deterministic conjugate vs scenario-tree conjugate",
                det,
                f.value,
                abs_gap(det, f.value),
                1e-12,
                agree(det, f.value, 1e-12),
            );
        }
        for (pname, x) in r.primals() {
            let ef = inst.evaluate_ef(&x)?;
            let lhs = inst.pairing(&x, &v)? - ef;
            r.push(
                format!("weak-duality/{name}/{pname}"),
                "pairing minus primal never exceeds the conjugate",
                lhs,
                f.value,
                f.value - lhs,
                tol,
                lhs <= f.value + tol * (1.0 + lhs.abs()),
            );
        }
    }
    let samples: Vec<DualCandidate> = r.duals(Suite::Duality).into_values().collect();
    for (pname, x) in r.primals() {
        let b = inst.biconjugate_check(&x, &samples, tol)?;
        r.push(
            format!("closedness/{pname}"),
            "primal equals its biconjugate",
            b.primal,
            b.best,
            abs_gap(b.primal, b.best),
            tol,
            b.closed && b.weak_duality,
        );
    }
    Ok(())
}

fn interchange(r: &mut Rows) -> Result<()> {
    let inst = &r.loaded.inst;
    let tree = inst.tree();
    let unbounded = tree
        .inner_nodes()
        .any(|n| !inst.mu().weight(n).is_null() && inst.h(n).infimum() == f64::NEG_INFINITY);
    if unbounded {
        let ninf = f64::NEG_INFINITY;
        r.push("interchange/unbounded".into(), "some integrand is unbounded below: both sides are -inf", ninf, ninf, 0.0, INTERCHANGE_TOL, true);
        return Ok(());
    }
    let h = inst.parts().h.clone();
    let probe = interchange_tree(tree, inst.mu(), &h, &[])?;
    let tv0 = probe
        .candidates
        .iter()
        .find(|c| c.lambda == Some(0.0))
        .map_or(0.0, |c| c.variation);
    let mut budgets = vec![0.0];
    if tv0 > 0.0 {
        budgets.extend([0.125, 0.25, 0.5, 1.0, 2.0].iter().map(|f| f * tv0));
    }
    let rep = interchange_tree(tree, inst.mu(), &h, &budgets)?;
    let last = budgets.len() - 1;
    let mut prev = f64::INFINITY;
    for (i, (&b, &l)) in budgets.iter().zip(&rep.lhs).enumerate() {
        let bounded = l >= rep.rhs - INTERCHANGE_TOL * (1.0 + rep.rhs.abs());
        let monotone = l <= prev;
        let converged = i < last || l - rep.rhs <= INTERCHANGE_TOL * (1.0 + rep.rhs.abs());
        prev = l;
        r.push(
            format!("interchange/budget-{i}"),
            &format!("variation budget {b:e}: constrained infimum vs pointwise infimum"),
            l,
            rep.rhs,
            l - rep.rhs,
            INTERCHANGE_TOL,
            bounded && monotone && converged,
        );
    }
    Ok(())
}

fn quadratic_curvature(f: &bvdual::SeparableFn) -> Option<f64> {
    let g = &f.components()[0];
    (g.is_finite_everywhere() && g.pieces().len() == 1 && g.pieces()[0].a > 0.0).then(|| g.pieces()[0].a)
}

fn subdiff(r: &mut Rows) -> Result<()> {
    let inst = &r.loaded.inst;
    let tree = inst.tree();
    let eps = PERTURBATION;
    for (pname, x) in r.primals() {
        if inst.evaluate_ef(&x)? == f64::INFINITY {
            r.push(format!("subdiff/{pname}/feasible"), "primal candidate must be feasible", f64::INFINITY, 0.0, f64::INFINITY, 0.0, false);
            continue;
        }
        let v = inst.optimal_dual(&x)?;
        let rep = inst.subdiff_check(&x, &v, SUBDIFF_TOL)?;
        r.push(
            format!("subdiff/{pname}/optimal"),
            "constructed optimal pair: all four conditions and zero Fenchel gap",
            rep.gap,
            0.0,
            rep.gap.abs(),
            SUBDIFF_TOL,
            rep.all_hold() && rep.gap_closed(),
        );
        let mut targets: Vec<(ConditionKind, Option<usize>)> = vec![
            (ConditionKind::Initial, None),
            (ConditionKind::Terminal, Some(tree.leaves()[0])),
        ];
        if let Some(n) = tree.inner_nodes().find(|&n| !inst.mu().weight(n).is_null()) {
            targets.push((ConditionKind::Density, Some(n)));
        }
        if let Some(n) = tree.inner_nodes().find(|&n| inst.mu().weight(n).is_null()) {
            targets.push((ConditionKind::Singular, Some(n)));
        }
        // A point-domain function has the whole line as subdifferential there,
        // so no dual shift can violate its condition.
        let pinned = |f: &bvdual::SeparableFn| {
            let d = f.components()[0].domain();
            d.lo == d.hi
        };
        targets.retain(|&(kind, node)| match (kind, node) {
            (ConditionKind::Initial, _) => !pinned(inst.k0()),
            (ConditionKind::Terminal, Some(l)) => !pinned(inst.kt(l)),
            (ConditionKind::Density, Some(n)) => !pinned(inst.h(n)),
            _ => true,
        });
        for (kind, node) in targets {
            let mut chosen = None;
            for sign in [1.0, -1.0] {
                let pert = inst.perturb(&v, node, 0, sign * eps);
                let rep = inst.subdiff_check(&x, &pert, SUBDIFF_TOL)?;
                if rep.failing_kinds() == vec![kind] {
                    chosen = Some(rep);
                    break;
                }
                chosen.get_or_insert(rep);
            }
            let rep = chosen.expect("two attempts");
            let (f, scale, shift) = match (kind, node) {
                (ConditionKind::Initial, _) => (Some(inst.k0()), 1.0, eps),
                (ConditionKind::Terminal, Some(l)) => (Some(inst.kt(l)), tree.prob(l), eps),
                (ConditionKind::Density, Some(n)) => {
                    let w = inst.mu().weight(n).mass();
                    (Some(inst.h(n)), tree.prob(n) * w, eps / w)
                }
                _ => (None, 0.0, 0.0),
            };
            let predicted = match f.and_then(quadratic_curvature) {
                Some(a) => scale * shift * shift / (4.0 * a),
                None => rep.gap_sum(),
            };
            let gap = abs_gap(rep.gap, predicted);
            let tol = 1e-9;
            r.push(
                format!("subdiff/{pname}/perturb-{}", kind.label()),
                "single-condition perturbation: only that condition fails, gap as predicted",
                rep.gap,
                predicted,
                gap,
                tol,
                rep.failing_kinds() == vec![kind] && gap <= tol * (1.0 + predicted.abs()),
            );
        }
    }
    Ok(())
}

fn raws(r: &Rows, suite: Suite) -> BTreeMap<String, RawProcess> {
    if !r.loaded.raw.is_empty() {
        return r.loaded.raw.clone();
    }
    let mut rng = r.rng(suite);
    (0..3)
        .map(|i| (format!("random-{i}"), random_raw_near(&mut rng, &r.loaded.inst)))
        .collect()
}

fn jensen(r: &mut Rows) -> Result<()> {
    let inst = &r.loaded.inst;
    let tree = inst.tree();
    let mut cases: Vec<(String, RawProcess, bool)> = raws(r, Suite::Jensen).into_iter().map(|(k, v)| (k, v, false)).collect();
    let adapted = AdaptedProcess::new(tree, inst.witness().path.s.clone())?.to_raw(tree);
    cases.push(("witness-adapted".into(), adapted, true));
    for (name, x, is_adapted) in cases {
        let j = inst.jensen_check(&x)?;
        let gap = j.raw - j.optional;
        let pass = if is_adapted {
            abs_gap(j.raw, j.optional) <= IDENTITY_TOL * (1.0 + j.raw.abs())
        } else {
            j.raw == f64::INFINITY || gap >= -IDENTITY_TOL * (1.0 + j.raw.abs())
        };
        r.push(format!("jensen-optional/{name}"), "integral of raw process dominates integral of optional projection", j.raw, j.optional, gap, IDENTITY_TOL, pass);
        let gap = j.raw - j.predictable;
        let pass = j.raw == f64::INFINITY || gap >= -IDENTITY_TOL * (1.0 + j.raw.abs());
        r.push(format!("jensen-predictable/{name}"), "integral of raw process dominates integral of predictable projection", j.raw, j.predictable, gap, IDENTITY_TOL, pass);
    }
    Ok(())
}

fn ibp(r: &mut Rows) -> Result<()> {
    let inst = &r.loaded.inst;
    let tree = inst.tree();
    let mut rng = r.rng(Suite::Ibp);
    let mut paths = r.primals();
    paths.insert("random".into(), random_path(&mut rng, tree, inst.dim(), 2.0));
    for (vname, v) in r.duals(Suite::Ibp) {
        for (xname, x) in &paths {
            let zero = vec![0.0; inst.dim()];
            let direct = x.pairing(tree, &zero, &v.v);
            let gap = ibp_check(&v.v, x, tree)?;
            r.push(
                format!("ibp/{vname}/{xname}"),
                "direct pairing vs integration by parts against the compensator",
                direct,
                direct - gap,
                gap,
                IDENTITY_TOL,
                gap <= IDENTITY_TOL * (1.0 + direct.abs()),
            );
        }
        let dec = rao_decompose(&v.v, tree)?;
        let defect = dec.invariant_defect(&v.v, tree);
        r.push(format!("rao/{vname}"), "martingale plus predictable decomposition invariants", defect, 0.0, defect, IDENTITY_TOL, defect <= IDENTITY_TOL);
    }
    Ok(())
}

/// Every increasing subset of `0..=n` containing both ends.
fn partitions(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![0]];
    }
    (0u32..(1 << (n - 1)))
        .map(|mask| {
            let mut p = vec![0];
            p.extend((1..n).filter(|k| mask >> (k - 1) & 1 == 1));
            p.push(n);
            p
        })
        .collect()
}

fn var(r: &mut Rows) -> Result<()> {
    let inst = &r.loaded.inst;
    let tree = inst.tree();
    let mut procs: Vec<(String, AdaptedProcess)> = r.duals(Suite::Var).into_iter().map(|(k, v)| (k, v.v)).collect();
    let mut rng = r.rng(Suite::Var);
    procs.push(("random-process".into(), random_adapted(&mut rng, tree, inst.dim())));
    let parts = partitions(tree.n_periods());
    for (name, v) in procs {
        let var = mean_variation(&v, tree);
        let dec = rao_decompose(&v, tree)?;
        let tv = dec.expected_compensator_variation(tree);
        r.push(format!("var/{name}"), "mean variation equals expected total variation of the compensator", var, tv, abs_gap(var, tv), IDENTITY_TOL, abs_gap(var, tv) <= IDENTITY_TOL * (1.0 + var));
        if inst.dim() == 1 {
            let sup = var_support_bruteforce(&v, tree, 1 << 16);
            let gap = abs_gap(var, sup.value);
            r.push(
                format!("var-support/{name}"),
                "mean variation equals the support function of adapted path derivatives",
                var,
                sup.value,
                gap,
                1e-9,
                gap <= 1e-9 * (1.0 + var),
            );
        }
        let values = parts
            .iter()
            .map(|p| mean_variation_on(&v, tree, p))
            .collect::<bvdual::Result<Vec<f64>>>()?;
        let mut violations = 0.0;
        for (i, p) in parts.iter().enumerate() {
            for (j, q) in parts.iter().enumerate() {
                if p.iter().all(|k| q.contains(k)) && values[i] > values[j] + IDENTITY_TOL * (1.0 + values[j]) {
                    violations += 1.0;
                }
            }
        }
        let full = *values.last().expect("nonempty");
        r.push(
            format!("var-refinement/{name}"),
            "mean variation is monotone under partition refinement",
            violations,
            0.0,
            violations,
            0.0,
            violations == 0.0 && abs_gap(full, var) <= IDENTITY_TOL * (1.0 + var),
        );
    }
    Ok(())
}

fn decompose(r: &mut Rows) -> Result<()> {
    let inst = &r.loaded.inst;
    let tree = inst.tree();
    let mut duals = r.duals(Suite::Decompose);
    if let Some(p) = &r.settings.process {
        match duals.remove(p) {
            Some(v) => duals = BTreeMap::from([(p.clone(), v)]),
            None => bail!("no process named `{p}` in the instance"),
        }
    }
    for (name, v) in duals {
        let dec = rao_decompose(&v.v, tree)?;
        for n in 0..tree.len() {
            for i in 0..inst.dim() {
                let m = dec.m.get(n)[i];
                let a = dec.a.get(n)[i];
                let resid = (v.v.get(n)[i] - m - a).abs();
                r.push(
                    format!("decompose/{name}/node-{}/coord-{i}", tree.id(n)),
                    "martingale part (lhs) and predictable part (rhs)",
                    m,
                    a,
                    resid,
                    IDENTITY_TOL,
                    resid <= IDENTITY_TOL * (1.0 + v.v.get(n)[i].abs()),
                );
            }
        }
        let defect = dec.m.martingale_defect(tree);
        let a0 = dec.a.get(tree.root()).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        r.push(format!("decompose/{name}/martingale"), "martingale part has zero conditional drift; predictable part starts at zero", defect, a0, defect + a0, IDENTITY_TOL, defect <= IDENTITY_TOL && a0 == 0.0);
    }
    Ok(())
}

fn project(r: &mut Rows) -> Result<()> {
    let inst = &r.loaded.inst;
    let tree = inst.tree();
    let mut raw = raws(r, Suite::Project);
    if let Some(p) = &r.settings.process {
        match raw.remove(p) {
            Some(x) => raw = BTreeMap::from([(p.clone(), x)]),
            None => bail!("no raw process named `{p}` in the instance"),
        }
    }
    let count = count_stopping_times(tree);
    for (name, x) in raw {
        let opt = optional_projection(&x, tree)?;
        let pred = predictable_projection(&x, tree)?;
        if count > STOPPING_BUDGET {
            r.push(format!("project/{name}/stopping-times"), "stopping-time family too large to enumerate", count as f64, STOPPING_BUDGET as f64, 0.0, 0.0, false);
            continue;
        }
        let (mut worst, mut n_opt) = (0.0f64, 0u64);
        for_each_stopping_time(tree, |tau| {
            worst = worst.max(optional_identity_gap(&x, &opt, tree, tau));
            n_opt += 1;
        });
        r.push(
            format!("project/{name}/optional"),
            &format!("optional projection identity over {n_opt} stopping times"),
            worst,
            0.0,
            worst,
            IDENTITY_TOL,
            worst <= IDENTITY_TOL,
        );
        let (mut worst, mut n_pred) = (0.0f64, 0u64);
        for_each_predictable_stopping_time(tree, |tau| {
            worst = worst.max(predictable_identity_gap(&x, &pred, tree, tau));
            n_pred += 1;
        });
        r.push(
            format!("project/{name}/predictable"),
            &format!("predictable projection identity over {n_pred} predictable stopping times"),
            worst,
            0.0,
            worst,
            IDENTITY_TOL,
            worst <= IDENTITY_TOL,
        );
    }
    let mut rng = r.rng(Suite::Project);
    for i in 0..3 {
        let w = random_cell_field(&mut rng, tree, inst.dim(), false);
        let x = random_path(&mut rng, tree, inst.dim(), 2.0);
        let lhs = embedding_pairing(&x, &w, tree, inst.mu());
        let (vm, v) = adjoint_embedding(&w, tree, inst.mu())?;
        let rhs = x.pairing(tree, &vm, &v);
        let gap = abs_gap(lhs, rhs);
        r.push(format!("adjoint/random-{i}"), "embedding pairing equals pairing with the adjoint", lhs, rhs, gap, IDENTITY_TOL, gap <= IDENTITY_TOL * (1.0 + lhs.abs()));
    }
    Ok(())
}

fn recession(r: &mut Rows) -> Result<()> {
    let inst = &r.loaded.inst;
    let tree = inst.tree();
    let mut dirs = r.loaded.primals.clone();
    let mut rng = r.rng(Suite::Recession);
    for i in 0..3 {
        dirs.insert(format!("random-{i}"), random_path(&mut rng, tree, inst.dim(), 1.0));
    }
    for (name, x) in dirs {
        let c = inst.recession_check(&x, 1e6, RECESSION_TOL)?;
        r.push(
            format!("recession/{name}"),
            "recession formula vs difference-quotient limit at alpha 1e6",
            c.formula,
            c.limit,
            abs_gap(c.formula, c.limit),
            RECESSION_TOL,
            c.agrees && c.monotone,
        );
    }
    let coercive = inst.coercivity_check();
    let direct = inst.k0().recession().components().iter().all(|g| g.is_zero_indicator())
        && tree.inner_nodes().all(|n| inst.h(n).recession().components().iter().all(|g| g.is_zero_indicator()))
        && tree.leaves().iter().all(|&l| inst.kt(l).recession().components().iter().all(|g| g.is_zero_indicator()));
    let b = |x: bool| if x { 1.0 } else { 0.0 };
    r.push("coercivity".into(), "full conjugate domains iff every recession function is the indicator of zero", b(coercive), b(direct), abs_gap(b(coercive), b(direct)), 0.0, coercive == direct);
    Ok(())
}

fn corollaries(r: &mut Rows) -> Result<()> {
    let inst = &r.loaded.inst;
    if inst.shapes().is_empty() {
        return Ok(());
    }
    let opts = r.oracle();
    let tol = r.settings.tol;
    for (name, v) in r.duals(Suite::Corollaries) {
        for c in corollary_suite(inst, &v, &opts, tol)? {
            r.push(
                format!("corollary/{}/{}/{name}", c.shape.label(), c.name),
                "special-case conjugate",
                c.lhs,
                c.rhs,
                abs_gap(c.lhs, c.rhs),
                tol,
                c.pass,
            );
        }
    }
    Ok(())
}

fn run_one(suite: Suite, loaded: &Loaded, digest: &str, settings: &Settings) -> Result<Vec<CheckRow>> {
    let mut rows = Rows {
        loaded,
        settings,
        digest,
        out: vec![],
        clock: Instant::now(),
    };
    match suite {
        Suite::Duality => duality(&mut rows)?,
        Suite::Interchange => interchange(&mut rows)?,
        Suite::Subdiff => subdiff(&mut rows)?,
        Suite::Jensen => jensen(&mut rows)?,
        Suite::Ibp => ibp(&mut rows)?,
        Suite::Var => var(&mut rows)?,
        Suite::Decompose => decompose(&mut rows)?,
        Suite::Project => project(&mut rows)?,
        Suite::Recession => recession(&mut rows)?,
        Suite::Corollaries => corollaries(&mut rows)?,
    }
    Ok(rows.out)
}

/// Runs a command against a loaded instance. `bytes` are the instance file
/// contents, hashed into every record.
pub fn run(command: &str, loaded: &Loaded, bytes: &[u8], settings: &Settings) -> Result<Report> {
    let suites = Suite::parse(command)?;
    let digest = sha256_hex(bytes);
    let results: Vec<Result<Vec<CheckRow>>> = if settings.parallel {
        suites.par_iter().map(|&s| run_one(s, loaded, &digest, settings)).collect()
    } else {
        suites.iter().map(|&s| run_one(s, loaded, &digest, settings)).collect()
    };
    let mut checks = vec![];
    for r in results {
        checks.extend(r?);
    }
    if settings.parallel {
        checks.sort_by(|a, b| a.name.cmp(&b.name));
    }
    Ok(Report {
        instance: loaded.inst.name().to_string(),
        instance_digest: digest,
        command: command.to_string(),
        seed: settings.seed,
        tol: settings.tol,
        checks,
    })
}
