//! The instance file format, version `bvdual-instance/1`.
//!
//! Node-keyed tables use the node id as a JSON object key. Infinite domain
//! ends are written as `null`. Probabilities are integer ratios.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use bvdual::duality::{Certificate, InstanceParts, Witness};
use bvdual::time_grid::{GridInstance, TimeGrid};
use bvdual::tree::{NodeSpec, Prob, RandomRefMeasure, RawProcess};
use bvdual::{AdaptedPath, AdaptedProcess, BolzaInstance, DualCandidate, Plq, Quad, ScenarioTree, SeparableFn};
use serde::{Deserialize, Serialize};

pub const VERSION: &str = "bvdual-instance/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlqSpec {
    pub domain: [Option<f64>; 2],
    #[serde(default)]
    pub breakpoints: Vec<f64>,
    pub pieces: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: u64,
    pub parent: Option<u64>,
    pub time: usize,
    pub prob: [i64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSpec {
    pub slope: Vec<f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessSpec {
    pub radius: f64,
    pub x0: Vec<f64>,
    pub path: BTreeMap<u64, Vec<f64>>,
    pub beta: BTreeMap<u64, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualSpec {
    pub v_minus: Vec<f64>,
    pub v: BTreeMap<u64, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimalSpec {
    pub x0: Vec<f64>,
    pub s: BTreeMap<u64, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub version: String,
    pub name: String,
    pub dim: usize,
    pub grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub null_cells: Vec<usize>,
    pub tree: Vec<NodeRecord>,
    pub mu: BTreeMap<u64, f64>,
    pub h: BTreeMap<u64, Vec<PlqSpec>>,
    pub k0: Vec<PlqSpec>,
    #[serde(rename = "kT")]
    pub kt: BTreeMap<u64, Vec<PlqSpec>>,
    pub certificate: BTreeMap<u64, CertificateSpec>,
    pub witness: Option<WitnessSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub duals: BTreeMap<String, DualSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub primals: BTreeMap<String, PrimalSpec>,
    /// Raw processes: per scenario (leaf order), per time `0..=N`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub raw: BTreeMap<String, Vec<Vec<Vec<f64>>>>,
}

/// A validated instance with its named candidates.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub inst: BolzaInstance,
    pub duals: BTreeMap<String, DualCandidate>,
    pub primals: BTreeMap<String, AdaptedPath>,
    pub raw: BTreeMap<String, RawProcess>,
}

impl Loaded {
    /// The deterministic view of a single-scenario instance.
    pub fn grid(&self) -> Option<GridInstance> {
        self.inst.to_grid().ok()
    }
}

fn plq_from(spec: &PlqSpec, at: &str) -> Result<Plq> {
    let lo = spec.domain[0].unwrap_or(f64::NEG_INFINITY);
    let hi = spec.domain[1].unwrap_or(f64::INFINITY);
    let pieces = spec.pieces.iter().map(|p| Quad { a: p[0], b: p[1], c: p[2] }).collect();
    Plq::new(lo, hi, spec.breakpoints.clone(), pieces).with_context(|| format!("{at}: invalid function"))
}

fn plq_to(f: &Plq) -> PlqSpec {
    let dom = f.domain();
    let end = |x: f64| if x.is_finite() { Some(x) } else { None };
    PlqSpec {
        domain: [end(dom.lo), end(dom.hi)],
        breakpoints: f.breakpoints().to_vec(),
        pieces: f.pieces().iter().map(|q| [q.a, q.b, q.c]).collect(),
    }
}

fn sep_from(specs: &[PlqSpec], dim: usize, at: &str) -> Result<SeparableFn> {
    if specs.len() != dim {
        bail!("{at}: expected {dim} components, found {}", specs.len());
    }
    let comps = specs.iter().map(|s| plq_from(s, at)).collect::<Result<Vec<_>>>()?;
    Ok(SeparableFn::new(comps)?)
}

fn sep_to(f: &SeparableFn) -> Vec<PlqSpec> {
    f.components().iter().map(plq_to).collect()
}

fn vector(v: &[f64], dim: usize, at: &str) -> Result<Vec<f64>> {
    if v.len() != dim {
        bail!("{at}: expected {dim} entries, found {}", v.len());
    }
    Ok(v.to_vec())
}

fn node_table<T: Clone>(
    table: &BTreeMap<u64, T>,
    tree: &ScenarioTree,
    field: &str,
    wanted: impl Fn(usize) -> bool,
) -> Result<Vec<Option<T>>> {
    let mut out = vec![None; tree.len()];
    for (&id, v) in table {
        let n = tree
            .index_of(id)
            .ok_or_else(|| anyhow!("{field}: node {id} does not exist"))?;
        if !wanted(n) {
            bail!("{field}: node {id} should not carry an entry");
        }
        out[n] = Some(v.clone());
    }
    for n in 0..tree.len() {
        if wanted(n) && out[n].is_none() {
            bail!("{field}: missing entry for node {}", tree.id(n));
        }
    }
    Ok(out)
}

fn node_values(table: &BTreeMap<u64, Vec<f64>>, tree: &ScenarioTree, dim: usize, field: &str) -> Result<Vec<Vec<f64>>> {
    node_table(table, tree, field, |_| true)?
        .into_iter()
        .enumerate()
        .map(|(n, v)| vector(&v.expect("present"), dim, &format!("{field} at node {}", tree.id(n))))
        .collect()
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text).context("schema violation")?;
        if file.version != VERSION {
            bail!("version mismatch: expected {VERSION}, found {}", file.version);
        }
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serialisable") + "\n"
    }

    /// Validates every invariant and builds the instance.
    pub fn load(&self) -> Result<Loaded> {
        let d = self.dim;
        if d == 0 {
            bail!("dim: must be at least 1");
        }
        let specs = self
            .tree
            .iter()
            .map(|r| NodeSpec {
                id: r.id,
                parent: r.parent,
                time: r.time,
                prob: Prob::Ratio(r.prob[0], r.prob[1]),
            })
            .collect();
        let tree = ScenarioTree::new(specs).context("tree")?;
        let grid = TimeGrid::new(self.grid.clone()).context("grid")?;
        let n = tree.n_periods();
        if grid.n_cells() != n {
            bail!("grid: {} cells for a tree with {n} periods", grid.n_cells());
        }
        let mut null = vec![false; n];
        for &k in &self.null_cells {
            if k == 0 || k > n {
                bail!("null_cells: cell {k} is outside 1..={n}");
            }
            null[k - 1] = true;
        }
        let regular = |m: usize| tree.depth(m) < n && !null[tree.depth(m)];
        let inner = |m: usize| !tree.is_leaf(m);
        let weights = node_table(&self.mu, &tree, "mu", regular)?
            .into_iter()
            .map(|w| w.unwrap_or(0.0))
            .collect();
        let mu = RandomRefMeasure::new(&tree, grid, null, weights).context("mu")?;
        let h = node_table(&self.h, &tree, "h", inner)?
            .into_iter()
            .enumerate()
            .map(|(m, s)| {
                s.map(|s| sep_from(&s, d, &format!("h at node {}", tree.id(m))))
                    .transpose()
            })
            .collect::<Result<Vec<_>>>()?;
        let kt = node_table(&self.kt, &tree, "kT", |m| tree.is_leaf(m))?
            .into_iter()
            .enumerate()
            .map(|(m, s)| {
                s.map(|s| sep_from(&s, d, &format!("kT at node {}", tree.id(m))))
                    .transpose()
            })
            .collect::<Result<Vec<_>>>()?;
        let k0 = sep_from(&self.k0, d, "k0")?;
        let certificate = node_table(&self.certificate, &tree, "certificate", inner)?
            .into_iter()
            .enumerate()
            .map(|(m, c)| {
                c.map(|c| {
                    Ok(Certificate {
                        slope: vector(&c.slope, d, &format!("certificate at node {}", tree.id(m)))?,
                        alpha: c.alpha,
                    })
                })
                .transpose()
            })
            .collect::<Result<Vec<_>>>()?;
        let w = self
            .witness
            .as_ref()
            .ok_or_else(|| anyhow!("witness: required field is missing"))?;
        let path = AdaptedPath::new(
            &tree,
            vector(&w.x0, d, "witness x0")?,
            node_values(&w.path, &tree, d, "witness path")?,
        )?;
        let beta = node_table(&w.beta, &tree, "witness beta", inner)?
            .into_iter()
            .map(|b| b.unwrap_or(0.0))
            .collect();
        let inst = BolzaInstance::new(InstanceParts {
            name: self.name.clone(),
            tree,
            mu,
            h,
            k0,
            kt,
            certificate,
            witness: Witness {
                radius: w.radius,
                path,
                beta,
            },
        })
        .context("instance invariants")?;
        let tree = inst.tree();
        let mut duals = BTreeMap::new();
        for (name, dspec) in &self.duals {
            let at = format!("duals.{name}");
            let v = AdaptedProcess::new(tree, node_values(&dspec.v, tree, d, &at)?)?;
            duals.insert(
                name.clone(),
                DualCandidate {
                    v_minus: vector(&dspec.v_minus, d, &at)?,
                    v,
                },
            );
        }
        let mut primals = BTreeMap::new();
        for (name, p) in &self.primals {
            let at = format!("primals.{name}");
            primals.insert(
                name.clone(),
                AdaptedPath::new(tree, vector(&p.x0, d, &at)?, node_values(&p.s, tree, d, &at)?)?,
            );
        }
        let mut raw = BTreeMap::new();
        for (name, r) in &self.raw {
            let proc = RawProcess::new(tree, r.clone()).with_context(|| format!("raw.{name}"))?;
            if proc.dim() != d {
                bail!("raw.{name}: expected dimension {d}");
            }
            raw.insert(name.clone(), proc);
        }
        Ok(Loaded {
            inst,
            duals,
            primals,
            raw,
        })
    }

    /// The file describing a loaded instance.
    pub fn from_loaded(l: &Loaded) -> InstanceFile {
        let inst = &l.inst;
        let tree = inst.tree();
        let id = |m: usize| tree.id(m);
        let by_node = |vals: &[Vec<f64>]| -> BTreeMap<u64, Vec<f64>> {
            vals.iter().enumerate().map(|(m, v)| (id(m), v.clone())).collect()
        };
        let tree_rec = tree
            .specs()
            .into_iter()
            .map(|s| NodeRecord {
                id: s.id,
                parent: s.parent,
                time: s.time,
                prob: match s.prob {
                    Prob::Ratio(a, b) => [a, b],
                    Prob::Float(_) => unreachable!("files only carry ratios"),
                },
            })
            .collect();
        let mut mu = BTreeMap::new();
        let mut h = BTreeMap::new();
        let mut kt = BTreeMap::new();
        let mut certificate = BTreeMap::new();
        let mut beta = BTreeMap::new();
        let parts = inst.parts();
        for m in 0..tree.len() {
            if tree.is_leaf(m) {
                kt.insert(id(m), sep_to(inst.kt(m)));
                continue;
            }
            if let bvdual::CellWeight::Regular(w) = inst.mu().weight(m) {
                mu.insert(id(m), w);
            }
            h.insert(id(m), sep_to(inst.h(m)));
            let c = parts.certificate[m].as_ref().expect("inner");
            certificate.insert(
                id(m),
                CertificateSpec {
                    slope: c.slope.clone(),
                    alpha: c.alpha,
                },
            );
            beta.insert(id(m), inst.witness().beta[m]);
        }
        let null_cells = inst
            .mu()
            .null_cells()
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(k, _)| k + 1)
            .collect();
        let w = inst.witness();
        InstanceFile {
            version: VERSION.into(),
            name: inst.name().into(),
            dim: inst.dim(),
            grid: inst.mu().grid().times().to_vec(),
            null_cells,
            tree: tree_rec,
            mu,
            h,
            k0: sep_to(inst.k0()),
            kt,
            certificate,
            witness: Some(WitnessSpec {
                radius: w.radius,
                x0: w.path.x0.clone(),
                path: by_node(&w.path.s),
                beta,
            }),
            duals: l
                .duals
                .iter()
                .map(|(k, v)| {
                    (
                        k.clone(),
                        DualSpec {
                            v_minus: v.v_minus.clone(),
                            v: by_node(v.v.values()),
                        },
                    )
                })
                .collect(),
            primals: l
                .primals
                .iter()
                .map(|(k, p)| {
                    (
                        k.clone(),
                        PrimalSpec {
                            x0: p.x0.clone(),
                            s: by_node(&p.s),
                        },
                    )
                })
                .collect(),
            raw: l.raw.iter().map(|(k, r)| (k.clone(), r.values().to_vec())).collect(),
        }
    }
}

/// Reads, parses and validates an instance file.
pub fn load_instance(path: &Path) -> Result<(Loaded, Vec<u8>)> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let text = std::str::from_utf8(&bytes).context("instance is not UTF-8")?;
    let loaded = InstanceFile::parse(text)?.load()?;
    Ok((loaded, bytes))
}
