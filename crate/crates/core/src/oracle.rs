//! Brute-force conjugate: maximises `⟨x, v⟩ - Ef(x)` over adapted paths.
//!
//! The objective is concave and separable across (node, coordinate) pairs up
//! to the pairing, which is linear, so cyclic exact line maximisation
//! converges. Each line search brackets by doubling and then runs golden
//! section on either side of the incumbent, which copes with `-inf` outside
//! the domain. Values beyond `bound` are reported as `+inf` once a ray with
//! positive slope has been confirmed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::duality::BolzaInstance;
use crate::error::{Error, Result};
use crate::tree::{AdaptedPath, AdaptedProcess};

const INF: f64 = f64::INFINITY;
const NEG_INF: f64 = f64::NEG_INFINITY;
const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    pub seed: u64,
    /// Number of starting points; the first is the witness.
    pub starts: usize,
    /// Refinement levels; each tightens the line-search tolerance.
    pub levels: usize,
    /// Target relative accuracy of the returned value.
    pub tol: f64,
    /// Objective values above this are treated as divergence.
    pub bound: f64,
    /// Hold `x_0 = 0` fixed.
    pub freeze_x0: bool,
    /// Run every level even after the values settle.
    pub all_levels: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            seed: 0,
            starts: 3,
            levels: 3,
            tol: 1e-9,
            bound: 1e12,
            freeze_x0: false,
            all_levels: false,
        }
    }
}

/// A direction along which the objective grows without bound.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceRay {
    pub base: AdaptedPath,
    /// Index of the moved variable: `None` for `x_0`, else the node.
    pub node: Option<usize>,
    pub coord: usize,
    pub sign: f64,
    /// Objective slope measured far along the ray.
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub value: f64,
    pub argmax: Option<AdaptedPath>,
    pub ray: Option<DivergenceRay>,
    /// Best value after each refinement level.
    pub levels: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Var {
    node: Option<usize>,
    coord: usize,
}

struct Problem<'a> {
    inst: &'a BolzaInstance,
    v_minus: &'a [f64],
    v: &'a AdaptedProcess,
    vars: Vec<Var>,
    bound: f64,
}

enum Line {
    Max(f64, f64),
    Diverges(f64, f64),
}

impl Problem<'_> {
    fn objective(&self, x: &AdaptedPath) -> f64 {
        match self.inst.evaluate_ef(x) {
            Ok(f) if f < INF => x.pairing(self.inst.tree(), self.v_minus, self.v) - f,
            _ => NEG_INF,
        }
    }

    fn slot<'b>(&self, x: &'b mut AdaptedPath, var: Var) -> &'b mut f64 {
        match var.node {
            None => &mut x.x0[var.coord],
            Some(n) => &mut x.s[n][var.coord],
        }
    }

    fn along(&self, x: &mut AdaptedPath, var: Var, base: f64, t: f64) -> f64 {
        *self.slot(x, var) = base + t;
        let f = self.objective(x);
        *self.slot(x, var) = base;
        f
    }

    /// Maximises over `t ≥ 0` along `sign`; `f0` is the value at `t = 0`.
    fn half_line(&self, x: &mut AdaptedPath, var: Var, base: f64, sign: f64, f0: f64, tol: f64) -> Line {
        let mut prev2 = 0.0;
        let mut prev = 0.0;
        let mut fprev = f0;
        let mut t = 1.0;
        let hi;
        loop {
            let ft = self.along(x, var, base, sign * t);
            if ft > self.bound {
                let f2 = self.along(x, var, base, sign * 2.0 * t);
                let slope = (f2 - ft) / t;
                if slope > 1e-9 {
                    return Line::Diverges(sign, slope);
                }
            }
            if !(ft > fprev) || t > 1e300 {
                hi = t;
                break;
            }
            prev2 = prev;
            prev = t;
            fprev = ft;
            t *= 2.0;
        }
        let (mut a, mut b) = (prev2, hi);
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = self.along(x, var, base, sign * c);
        let mut fd = self.along(x, var, base, sign * d);
        let scale = 1.0 + base.abs();
        for _ in 0..400 {
            if b - a <= tol * scale {
                break;
            }
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = self.along(x, var, base, sign * c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = self.along(x, var, base, sign * d);
            }
        }
        let mut best = (0.0, f0);
        for (t, f) in [(c, fc), (d, fd), (prev, fprev)] {
            if f > best.1 {
                best = (t, f);
            }
        }
        Line::Max(sign * best.0, best.1)
    }

    /// Cyclic coordinate ascent until a sweep gains less than `stop`.
    fn ascend(&self, x: &mut AdaptedPath, f: &mut f64, tol: f64, stop: f64) -> Option<DivergenceRay> {
        for _sweep in 0..500 {
            let start = *f;
            for &var in &self.vars {
                let base = *self.slot(x, var);
                let mut best = (0.0, *f);
                for sign in [1.0, -1.0] {
                    match self.half_line(x, var, base, sign, *f, tol) {
                        Line::Diverges(sign, slope) => {
                            return Some(DivergenceRay {
                                base: x.clone(),
                                node: var.node,
                                coord: var.coord,
                                sign,
                                slope,
                            })
                        }
                        Line::Max(t, v) if v > best.1 => best = (t, v),
                        Line::Max(..) => {}
                    }
                }
                *self.slot(x, var) = base + best.0;
                *f = best.1;
            }
            if *f - start <= stop * (1.0 + f.abs()) {
                break;
            }
        }
        None
    }
}

/// `sup_x ⟨x, v⟩ - Ef(x)` by multi-start coordinate ascent.
pub fn conjugate_bruteforce(
    inst: &BolzaInstance,
    v_minus: &[f64],
    v: &AdaptedProcess,
    opts: &OracleOptions,
) -> Result<OracleResult> {
    let tree = inst.tree();
    let d = inst.dim();
    if v.len() != tree.len() || v.dim() != d || v_minus.len() != d {
        return Err(Error::Shape("dual candidate does not match the instance".into()));
    }
    if opts.starts == 0 || opts.levels == 0 {
        return Err(Error::Invalid("oracle needs at least one start and one level".into()));
    }
    let mut vars = vec![];
    if !opts.freeze_x0 {
        vars.extend((0..d).map(|coord| Var { node: None, coord }));
    }
    for n in 0..tree.len() {
        vars.extend((0..d).map(|coord| Var {
            node: Some(n),
            coord,
        }));
    }
    let prob = Problem {
        inst,
        v_minus,
        v,
        vars,
        bound: opts.bound,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let witness = inst.witness();
    let mut starts = vec![];
    for i in 0..opts.starts {
        let mut x = witness.path.clone();
        if i > 0 {
            for s in x.s.iter_mut() {
                for c in s.iter_mut() {
                    *c += rng.gen_range(-witness.radius..witness.radius);
                }
            }
        }
        if opts.freeze_x0 {
            x.x0 = vec![0.0; d];
        }
        let f = prob.objective(&x);
        if f > NEG_INF {
            starts.push((x, f));
        }
    }
    if starts.is_empty() {
        return Err(Error::Infeasible("no start point with finite objective".into()));
    }
    let mut levels = vec![];
    for level in 0..opts.levels {
        let tol = 1e-6 * 1e-3f64.powi(level as i32);
        let stop = (opts.tol * 1e-2).max(1e-15) * 10f64.powi((opts.levels - 1 - level) as i32);
        for (x, f) in starts.iter_mut() {
            if let Some(ray) = prob.ascend(x, f, tol, stop) {
                return Ok(OracleResult {
                    value: INF,
                    argmax: None,
                    ray: Some(ray),
                    levels: {
                        levels.push(INF);
                        levels
                    },
                });
            }
        }
        let best = starts.iter().map(|s| s.1).fold(NEG_INF, f64::max);
        levels.push(best);
        if level > 0 && !opts.all_levels {
            let prev = levels[level - 1];
            if (best - prev).abs() <= 0.1 * opts.tol * (1.0 + best.abs()) {
                break;
            }
        }
    }
    let (x, value) = starts
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty");
    Ok(OracleResult {
        value,
        argmax: Some(x),
        ray: None,
        levels,
    })
}
