//! Conjugate Dirichlet / normal-inverse-gamma hyper-distribution over all
//! parameters of a CGN: the suggested data-dependent prior, the closed-form
//! posterior update and the parameter-averaged predictive density.
//!
//! Hyperparameter tables are sparse: each node keeps a `default` entry
//! (the prior of any cell never seen in data) plus explicit entries for
//! cells that received cell-specific prior values or observations.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dataset::{block_stats, CellIndexer, Dataset, Instance, Schema};
use crate::distributions::{
    dirichlet_posterior, log_student, nig_posterior_from_moments, nig_predictive, DirichletParams,
    NigParams, RegressionMoments,
};
use crate::error::{CgnError, Result};
use crate::model::{regressors, validate_structure, CgnStructure};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorConfig {
    pub dirichlet_pseudocount: f64,
    pub rho_base: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            dirichlet_pseudocount: 0.01,
            rho_base: 1.1,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dirichlet_pseudocount > 0.0 && self.dirichlet_pseudocount.is_finite()) {
            return Err(CgnError::Contract(format!(
                "dirichlet_pseudocount must be positive, got {}",
                self.dirichlet_pseudocount
            )));
        }
        if !(self.rho_base > 0.0 && self.rho_base.is_finite()) {
            return Err(CgnError::Contract(format!(
                "rho_base must be positive, got {}",
                self.rho_base
            )));
        }
        Ok(())
    }
}

/// Sparse per-cell table with a fallback entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTable<T> {
    pub indexer: CellIndexer,
    pub default: T,
    pub cells: BTreeMap<usize, T>,
}

impl<T> CellTable<T> {
    pub fn get(&self, code: usize) -> &T {
        self.cells.get(&code).unwrap_or(&self.default)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousHyper {
    pub continuous_parents: Vec<usize>,
    pub table: CellTable<NigParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DhdnigParams {
    pub structure: CgnStructure,
    pub discrete: BTreeMap<usize, CellTable<DirichletParams>>,
    pub continuous: BTreeMap<usize, ContinuousHyper>,
}

fn group_rows(data: &Dataset, indexer: &CellIndexer) -> BTreeMap<usize, Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (j, row) in data.rows().iter().enumerate() {
        groups.entry(indexer.code(row)).or_default().push(j);
    }
    groups
}

/// Scale matrix of the independence prior for parent means `m` and
/// diagonal parent variances `k`:
/// `[[1 + mᵀK⁻¹m, -mᵀK⁻¹], [-K⁻¹m, K⁻¹]]`.
fn prior_scale(parent_means: &DVector<f64>, parent_vars: &DVector<f64>) -> DMatrix<f64> {
    let q = parent_means.len();
    let k_inv_m = parent_means.component_div(parent_vars);
    let mut v = DMatrix::zeros(q + 1, q + 1);
    v[(0, 0)] = 1.0 + parent_means.dot(&k_inv_m);
    for a in 0..q {
        v[(0, a + 1)] = -k_inv_m[a];
        v[(a + 1, 0)] = -k_inv_m[a];
        v[(a + 1, a + 1)] = 1.0 / parent_vars[a];
    }
    v
}

/// The suggested prior: every Dirichlet pseudo-count equal to
/// `cfg.dirichlet_pseudocount`, and per continuous node and cell an NIG
/// centred on the pooled mean with scale built from the pooled variances.
/// Parent means are cell-specific where the cell has rows and pooled
/// otherwise.
pub fn init_prior(s: &CgnStructure, data: &Dataset, cfg: &PriorConfig) -> Result<DhdnigParams> {
    cfg.validate()?;
    validate_structure(s).map_err(CgnError::InvalidStructure)?;
    if data.is_empty() {
        return Err(CgnError::Contract("the prior needs a nonempty dataset".into()));
    }
    let schema = s.schema();
    let all_rows: Vec<usize> = (0..data.len()).collect();

    let mut pooled: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    let mut pooled_stats = |v: usize| -> Result<(f64, f64)> {
        if let Some(&mv) = pooled.get(&v) {
            return Ok(mv);
        }
        let st = block_stats(data, &all_rows, &[v]);
        let var = st.sigma_hat.as_ref().expect("nonempty")[(0, 0)];
        if !(var > 0.0) {
            return Err(CgnError::DegeneratePrior {
                variable: schema.variable(v).name.clone(),
            });
        }
        pooled.insert(v, (st.mean[0], var));
        Ok((st.mean[0], var))
    };

    let mut discrete = BTreeMap::new();
    let mut continuous = BTreeMap::new();
    for v in s.nodes() {
        let indexer = CellIndexer::new(schema, &s.discrete_parents(v));
        if let Some(card) = schema.variable(v).cardinality() {
            discrete.insert(
                v,
                CellTable {
                    indexer,
                    default: DirichletParams::uniform(card, cfg.dirichlet_pseudocount)?,
                    cells: BTreeMap::new(),
                },
            );
            continue;
        }
        let pc = s.continuous_parents(v);
        let q = pc.len();
        let (mean_v, var_v) = pooled_stats(v)?;
        let mut parent_means = DVector::zeros(q);
        let mut parent_vars = DVector::zeros(q);
        for (a, &p) in pc.iter().enumerate() {
            let (m, var) = pooled_stats(p)?;
            parent_means[a] = m;
            parent_vars[a] = var;
        }
        let mut mu = DVector::zeros(q + 1);
        mu[0] = mean_v;
        let rho = cfg.rho_base + q as f64 / 2.0;
        let phi = var_v / 2.0;
        let default = NigParams::new(mu.clone(), prior_scale(&parent_means, &parent_vars), rho, phi)?;
        let mut cells = BTreeMap::new();
        if q > 0 {
            for (code, members) in group_rows(data, &indexer) {
                let cell_means = block_stats(data, &members, &pc).mean;
                cells.insert(
                    code,
                    NigParams::new(mu.clone(), prior_scale(&cell_means, &parent_vars), rho, phi)?,
                );
            }
        }
        continuous.insert(
            v,
            ContinuousHyper {
                continuous_parents: pc,
                table: CellTable {
                    indexer,
                    default,
                    cells,
                },
            },
        );
    }
    Ok(DhdnigParams {
        structure: s.clone(),
        discrete,
        continuous,
    })
}

/// Conjugate update of every Dirichlet and NIG table with the rows of `data`.
pub fn posterior(prior: &DhdnigParams, data: &Dataset) -> Result<DhdnigParams> {
    let mut post = prior.clone();
    if data.is_empty() {
        return Ok(post);
    }
    if data.schema() != prior.structure.schema() {
        return Err(CgnError::Contract("dataset schema differs from the hyperparameters' schema".into()));
    }
    for (&v, table) in post.discrete.iter_mut() {
        let card = table.default.len();
        for (code, members) in group_rows(data, &table.indexer) {
            let mut counts = vec![0u64; card];
            for j in members {
                counts[data.row(j).discrete(v)] += 1;
            }
            let updated = dirichlet_posterior(table.get(code), &counts)?;
            table.cells.insert(code, updated);
        }
    }
    for (&v, hyper) in post.continuous.iter_mut() {
        let p = hyper.continuous_parents.len() + 1;
        for (code, members) in group_rows(data, &hyper.table.indexer) {
            let mut moments = RegressionMoments::zeros(p);
            for j in members {
                let row = data.row(j);
                moments.push(&regressors(row, &hyper.continuous_parents), row.continuous(v));
            }
            let updated = nig_posterior_from_moments(hyper.table.get(code), &moments)?;
            hyper.table.cells.insert(code, updated);
        }
    }
    Ok(post)
}

impl DhdnigParams {
    /// Predictive `ln p(x_v | parents, Ψ)` of one node.
    pub fn node_logdensity(&self, v: usize, x: &Instance) -> f64 {
        if let Some(table) = self.discrete.get(&v) {
            let psi = table.get(table.indexer.code(x));
            (psi.psi()[x.discrete(v)] / psi.total()).ln()
        } else {
            let hyper = &self.continuous[&v];
            let nig = hyper.table.get(hyper.table.indexer.code(x));
            let z = regressors(x, &hyper.continuous_parents);
            let st = nig_predictive(nig, &z).expect("regressor length matches by construction");
            log_student(x.continuous(v), st.nu, st.location[0], st.scale[(0, 0)])
                .expect("predictive scale is positive")
        }
    }

    pub(crate) fn logdensity_unchecked(&self, x: &Instance) -> f64 {
        self.structure.nodes().map(|v| self.node_logdensity(v, x)).sum()
    }

    /// Structure text followed by per-node hyperparameter blocks. Floats
    /// use the shortest representation that parses back to the same value.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in self.structure.nodes() {
            let pa = self.structure.parents(v);
            let list = pa.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",");
            let kind = self.structure.schema().variable(v).kind.name();
            out.push_str(&format!("node {v} {kind} parents={list}\n"));
            if let Some(table) = self.discrete.get(&v) {
                out.push_str(&format!("default dirichlet psi={}\n", join(table.default.psi())));
                for (code, psi) in &table.cells {
                    out.push_str(&format!("cell {code} dirichlet psi={}\n", join(psi.psi())));
                }
            } else {
                let table = &self.continuous[&v].table;
                out.push_str(&format!("default {}\n", nig_text(&table.default)));
                for (code, nig) in &table.cells {
                    out.push_str(&format!("cell {code} {}\n", nig_text(nig)));
                }
            }
        }
        out
    }

    pub fn from_text(text: &str, schema: Arc<Schema>) -> Result<Self> {
        enum Entry {
            Dirichlet(DirichletParams),
            Nig(NigParams),
        }
        let mut structure_text = String::new();
        let mut entries: BTreeMap<usize, (Option<Entry>, BTreeMap<usize, Entry>)> = BTreeMap::new();
        let mut current: Option<usize> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let parse = |message: String| CgnError::Parse {
                line: lineno + 1,
                message,
            };
            if line.is_empty() || line.starts_with('#') {
                structure_text.push('\n');
                continue;
            }
            let mut fields = line.split_whitespace();
            let head = fields.next().unwrap_or_default();
            if head == "node" {
                let v: usize = fields
                    .next()
                    .and_then(|f| f.parse().ok())
                    .ok_or_else(|| parse("bad node line".into()))?;
                current = Some(v);
                entries.insert(v, (None, BTreeMap::new()));
                structure_text.push_str(line);
                structure_text.push('\n');
                continue;
            }
            structure_text.push('\n');
            let v = current.ok_or_else(|| parse("hyperparameters before any node line".into()))?;
            let code = match head {
                "default" => None,
                "cell" => Some(
                    fields
                        .next()
                        .and_then(|f| f.parse::<usize>().ok())
                        .ok_or_else(|| parse("bad cell code".into()))?,
                ),
                other => return Err(parse(format!("unexpected line kind `{other}`"))),
            };
            let kind = fields.next().ok_or_else(|| parse("missing distribution kind".into()))?;
            let mut kv: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for f in fields {
                let (k, list) = f.split_once('=').ok_or_else(|| parse(format!("bad field `{f}`")))?;
                let values = list
                    .split(',')
                    .map(|x| x.parse::<f64>().map_err(|_| parse(format!("bad number `{x}`"))))
                    .collect::<Result<Vec<_>>>()?;
                kv.insert(k, values);
            }
            let take = |k: &str| kv.get(k).cloned().ok_or_else(|| parse(format!("missing `{k}`")));
            let entry = match kind {
                "dirichlet" => Entry::Dirichlet(DirichletParams::new(take("psi")?)?),
                "nig" => {
                    let mu = take("mu")?;
                    let p = mu.len();
                    let v_flat = take("v")?;
                    if v_flat.len() != p * p {
                        return Err(parse(format!("v has {} entries, expected {}", v_flat.len(), p * p)));
                    }
                    let scalar = |k: &str| -> Result<f64> {
                        match take(k)?.as_slice() {
                            [x] => Ok(*x),
                            _ => Err(parse(format!("`{k}` must be a single number"))),
                        }
                    };
                    Entry::Nig(NigParams::new(
                        DVector::from_vec(mu),
                        DMatrix::from_row_slice(p, p, &v_flat),
                        scalar("rho")?,
                        scalar("phi")?,
                    )?)
                }
                other => return Err(parse(format!("unknown distribution `{other}`"))),
            };
            let slot = entries.get_mut(&v).expect("node registered");
            match code {
                None => slot.0 = Some(entry),
                Some(c) => {
                    slot.1.insert(c, entry);
                }
            }
        }

        let structure = CgnStructure::from_text(&structure_text, Arc::clone(&schema))?;
        validate_structure(&structure).map_err(CgnError::InvalidStructure)?;
        let mut discrete = BTreeMap::new();
        let mut continuous = BTreeMap::new();
        let missing = |v: usize| CgnError::Parse {
            line: 0,
            message: format!("node {v} lacks a matching default hyperparameter line"),
        };
        for (v, (default, cells)) in entries {
            let indexer = CellIndexer::new(&schema, &structure.discrete_parents(v));
            if structure.is_discrete(v) {
                let Some(Entry::Dirichlet(default)) = default else {
                    return Err(missing(v));
                };
                let cells = cells
                    .into_iter()
                    .map(|(c, e)| match e {
                        Entry::Dirichlet(d) => Ok((c, d)),
                        Entry::Nig(_) => Err(missing(v)),
                    })
                    .collect::<Result<_>>()?;
                discrete.insert(v, CellTable { indexer, default, cells });
            } else {
                let Some(Entry::Nig(default)) = default else {
                    return Err(missing(v));
                };
                let cells = cells
                    .into_iter()
                    .map(|(c, e)| match e {
                        Entry::Nig(n) => Ok((c, n)),
                        Entry::Dirichlet(_) => Err(missing(v)),
                    })
                    .collect::<Result<_>>()?;
                continuous.insert(
                    v,
                    ContinuousHyper {
                        continuous_parents: structure.continuous_parents(v),
                        table: CellTable { indexer, default, cells },
                    },
                );
            }
        }
        Ok(Self {
            structure,
            discrete,
            continuous,
        })
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

fn nig_text(nig: &NigParams) -> String {
    let v: Vec<f64> = nig.v().transpose().iter().copied().collect();
    format!(
        "nig mu={} v={} rho={:?} phi={:?}",
        join(nig.mu().as_slice()),
        join(&v),
        nig.rho(),
        nig.phi()
    )
}

/// `ln p(x | Ψ)`: Dirichlet predictive ratios for discrete nodes and
/// Student-t predictives for continuous nodes.
pub fn predictive_logdensity(psi: &DhdnigParams, x: &Instance) -> Result<f64> {
    x.check(psi.structure.schema())?;
    Ok(psi.logdensity_unchecked(x))
}
