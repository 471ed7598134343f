//! Conditional Gaussian network structures, the acceptability check that
//! makes maximum likelihood well defined, ML fitting and the factorized
//! joint log density.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::dataset::{block_stats, Cell, CellIndexer, Dataset, Instance, Schema, VariableKind};
use crate::distributions::{GaussLinRegParams, MultinomialParams};
use crate::error::{CgnError, Result};
use crate::linalg::{Cholesky, PD_PIVOT_TOL};

/// A DAG over a subset of the schema's variables. Variables absent from
/// `parents` are not part of the model. Parent lists are kept sorted by
/// variable index, which also fixes the regressor order `z = [1, y_pc]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CgnStructure {
    schema: Arc<Schema>,
    parents: BTreeMap<usize, Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StructureViolation {
    UnknownVariable { node: usize },
    UnknownParent { node: usize, parent: usize },
    ParentNotInStructure { node: usize, parent: usize },
    ContinuousParentOfDiscrete { child: usize, parent: usize },
    Cycle { nodes: Vec<usize> },
}

impl fmt::Display for StructureViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UnknownVariable { node } => write!(f, "node {node} is not a schema variable"),
            Self::UnknownParent { node, parent } => {
                write!(f, "node {node} has unknown parent {parent}")
            }
            Self::ParentNotInStructure { node, parent } => {
                write!(f, "node {node} has parent {parent} which is not in the structure")
            }
            Self::ContinuousParentOfDiscrete { child, parent } => write!(
                f,
                "discrete node {child} has continuous parent {parent}"
            ),
            Self::Cycle { nodes } => write!(f, "cycle through nodes {nodes:?}"),
        }
    }
}

impl CgnStructure {
    /// Builds a structure; parents are sorted and deduplicated. Call
    /// [`validate_structure`] before using it.
    pub fn new(schema: Arc<Schema>, parents: BTreeMap<usize, Vec<usize>>) -> Self {
        let parents = parents
            .into_iter()
            .map(|(v, mut pa)| {
                pa.sort_unstable();
                pa.dedup();
                (v, pa)
            })
            .collect();
        Self { schema, parents }
    }

    /// The class node alone.
    pub fn class_only(schema: Arc<Schema>) -> Self {
        let class = schema.class_index();
        Self::new(schema, BTreeMap::from([(class, Vec::new())]))
    }

    /// Class node plus `attributes`, each with the class as sole parent.
    pub fn naive_bayes(schema: Arc<Schema>, attributes: &[usize]) -> Self {
        let class = schema.class_index();
        let mut parents = BTreeMap::from([(class, Vec::new())]);
        for &a in attributes {
            parents.insert(a, vec![class]);
        }
        Self::new(schema, parents)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn schema_arc(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.parents.keys().copied()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.parents.contains_key(&v)
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        self.parents.get(&v).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn parent_map(&self) -> &BTreeMap<usize, Vec<usize>> {
        &self.parents
    }

    /// Discrete parents `pd(v)`.
    pub fn discrete_parents(&self, v: usize) -> Vec<usize> {
        self.parents(v)
            .iter()
            .copied()
            .filter(|&p| self.schema.variable(p).is_discrete())
            .collect()
    }

    /// Continuous parents `pc(v)`.
    pub fn continuous_parents(&self, v: usize) -> Vec<usize> {
        self.parents(v)
            .iter()
            .copied()
            .filter(|&p| !self.schema.variable(p).is_discrete())
            .collect()
    }

    pub fn is_discrete(&self, v: usize) -> bool {
        self.schema.variable(v).is_discrete()
    }

    /// Number of free ML parameters: `cells·(card-1)` per discrete node and
    /// `cells·(|pc|+2)` (intercept, slopes, variance) per continuous node.
    pub fn parameter_count(&self) -> usize {
        self.nodes()
            .map(|v| {
                let cells = CellIndexer::new(&self.schema, &self.discrete_parents(v)).size();
                match self.schema.variable(v).kind {
                    VariableKind::Discrete { cardinality } => cells * (cardinality - 1),
                    VariableKind::Continuous => cells * (self.continuous_parents(v).len() + 2),
                }
            })
            .sum()
    }

    /// Line-oriented text form: `node <index> <kind> parents=<i,j,...>`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (v, pa) in &self.parents {
            let kind = self.schema.variable(*v).kind.name();
            let list = pa.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",");
            out.push_str(&format!("node {v} {kind} parents={list}\n"));
        }
        out
    }

    /// Parses [`CgnStructure::to_text`] output against `schema`. Blank lines
    /// and lines starting with `#` are ignored.
    pub fn from_text(text: &str, schema: Arc<Schema>) -> Result<Self> {
        let mut parents = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse = |message: String| CgnError::Parse {
                line: lineno + 1,
                message,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 || fields[0] != "node" {
                return Err(parse(format!("expected `node <index> <kind> parents=...`, got `{line}`")));
            }
            let v: usize = fields[1]
                .parse()
                .map_err(|_| parse(format!("bad node index `{}`", fields[1])))?;
            let meta = schema
                .variables()
                .get(v)
                .ok_or_else(|| parse(format!("node {v} is not a schema variable")))?;
            if fields[2] != meta.kind.name() {
                return Err(parse(format!(
                    "node {v} declared {} but the schema says {}",
                    fields[2],
                    meta.kind.name()
                )));
            }
            let list = fields[3]
                .strip_prefix("parents=")
                .ok_or_else(|| parse("missing `parents=`".into()))?;
            let pa = if list.is_empty() {
                Vec::new()
            } else {
                list.split(',')
                    .map(|p| p.parse::<usize>().map_err(|_| parse(format!("bad parent `{p}`"))))
                    .collect::<Result<Vec<_>>>()?
            };
            if parents.insert(v, pa).is_some() {
                return Err(parse(format!("node {v} listed twice")));
            }
        }
        Ok(Self::new(schema, parents))
    }

    /// Nodes in an order where every parent precedes its children, or
    /// `None` if the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indegree: BTreeMap<usize, usize> = self.nodes().map(|v| (v, 0)).collect();
        let mut children: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (&v, pa) in &self.parents {
            for &p in pa {
                if self.parents.contains_key(&p) {
                    *indegree.get_mut(&v).unwrap() += 1;
                    children.entry(p).or_default().push(v);
                }
            }
        }
        let mut ready: BTreeSet<usize> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&v, _)| v).collect();
        let mut order = Vec::with_capacity(indegree.len());
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &c in children.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
                let d = indegree.get_mut(&c).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == indegree.len()).then_some(order)
    }
}

/// Checks acyclicity, index validity and the rule that discrete nodes have
/// no continuous parents.
pub fn validate_structure(s: &CgnStructure) -> std::result::Result<(), Vec<StructureViolation>> {
    let mut violations = Vec::new();
    let n = s.schema.len();
    for (&v, pa) in &s.parents {
        if v >= n {
            violations.push(StructureViolation::UnknownVariable { node: v });
            continue;
        }
        for &p in pa {
            if p >= n {
                violations.push(StructureViolation::UnknownParent { node: v, parent: p });
            } else if !s.parents.contains_key(&p) {
                violations.push(StructureViolation::ParentNotInStructure { node: v, parent: p });
            } else if s.is_discrete(v) && !s.is_discrete(p) {
                violations.push(StructureViolation::ContinuousParentOfDiscrete { child: v, parent: p });
            }
        }
    }
    if violations.is_empty() && s.topological_order().is_none() {
        violations.push(StructureViolation::Cycle {
            nodes: cycle_members(s),
        });
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Nodes left after repeatedly stripping sources and sinks: every cycle
/// lies within this set.
fn cycle_members(s: &CgnStructure) -> Vec<usize> {
    let mut alive: BTreeSet<usize> = s.nodes().collect();
    loop {
        let before = alive.len();
        let has_parent = |v: usize, alive: &BTreeSet<usize>| s.parents(v).iter().any(|p| alive.contains(p));
        let has_child = |v: usize, alive: &BTreeSet<usize>| {
            alive.iter().any(|&c| s.parents(c).contains(&v))
        };
        let keep: BTreeSet<usize> = alive
            .iter()
            .copied()
            .filter(|&v| has_parent(v, &alive) && has_child(v, &alive))
            .collect();
        alive = keep;
        if alive.len() == before {
            return alive.into_iter().collect();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcceptabilityReason {
    EmptyCell,
    SingularSsd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcceptabilityViolation {
    pub node: usize,
    pub cell: Cell,
    pub reason: AcceptabilityReason,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AcceptabilityReport {
    pub violations: Vec<AcceptabilityViolation>,
}

impl AcceptabilityReport {
    pub fn acceptable(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for AcceptabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.acceptable() {
            return write!(f, "acceptable");
        }
        let shown: Vec<String> = self
            .violations
            .iter()
            .take(5)
            .map(|v| {
                let reason = match v.reason {
                    AcceptabilityReason::EmptyCell => "empty-cell",
                    AcceptabilityReason::SingularSsd => "singular-ssd",
                };
                format!("node {} cell {:?}={:?}: {reason}", v.node, v.cell.indexes, v.cell.values)
            })
            .collect();
        write!(f, "{} violation(s): {}", self.violations.len(), shown.join("; "))?;
        if self.violations.len() > 5 {
            write!(f, "; ...")?;
        }
        Ok(())
    }
}

/// Row positions of `data` grouped by the cell code of `indexer`.
fn group_rows(data: &Dataset, indexer: &CellIndexer) -> BTreeMap<usize, Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (j, row) in data.rows().iter().enumerate() {
        groups.entry(indexer.code(row)).or_default().push(j);
    }
    groups
}

/// Checks that every discrete family cell is populated and that every
/// continuous node has, in each discrete-parent cell, a positive-definite
/// centered scatter matrix over its continuous parents and itself.
pub fn is_acceptable(s: &CgnStructure, data: &Dataset) -> AcceptabilityReport {
    let mut violations = Vec::new();
    for v in s.nodes() {
        let pd = s.discrete_parents(v);
        if s.is_discrete(v) {
            let mut family = pd.clone();
            family.push(v);
            family.sort_unstable();
            let indexer = CellIndexer::new(s.schema(), &family);
            let groups = group_rows(data, &indexer);
            for code in 0..indexer.size() {
                if !groups.contains_key(&code) {
                    violations.push(AcceptabilityViolation {
                        node: v,
                        cell: indexer.cell(code),
                        reason: AcceptabilityReason::EmptyCell,
                    });
                }
            }
        } else {
            let indexer = CellIndexer::new(s.schema(), &pd);
            let groups = group_rows(data, &indexer);
            let mut block = s.continuous_parents(v);
            block.push(v);
            for code in 0..indexer.size() {
                let Some(members) = groups.get(&code) else {
                    violations.push(AcceptabilityViolation {
                        node: v,
                        cell: indexer.cell(code),
                        reason: AcceptabilityReason::EmptyCell,
                    });
                    continue;
                };
                let stats = block_stats(data, members, &block);
                if Cholesky::factor_with_tol(&stats.ssd, PD_PIVOT_TOL, "ssd").is_err() {
                    violations.push(AcceptabilityViolation {
                        node: v,
                        cell: indexer.cell(code),
                        reason: AcceptabilityReason::SingularSsd,
                    });
                }
            }
        }
    }
    AcceptabilityReport { violations }
}

/// Conditional probability table of one discrete node, one row per
/// parent cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCpt {
    pub indexer: CellIndexer,
    pub rows: Vec<MultinomialParams>,
}

/// Per-cell Gaussian linear regressions of one continuous node on
/// `[1, y_pc]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousCpd {
    pub indexer: CellIndexer,
    pub continuous_parents: Vec<usize>,
    pub cells: Vec<GaussLinRegParams>,
}

/// Regressor vector `[1, y_pc]` of `row`.
pub fn regressors(row: &Instance, continuous_parents: &[usize]) -> DVector<f64> {
    let mut z = DVector::zeros(continuous_parents.len() + 1);
    z[0] = 1.0;
    for (k, &p) in continuous_parents.iter().enumerate() {
        z[k + 1] = row.continuous(p);
    }
    z
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgnModel {
    pub structure: CgnStructure,
    pub discrete: BTreeMap<usize, DiscreteCpt>,
    pub continuous: BTreeMap<usize, ContinuousCpd>,
}

impl CgnModel {
    /// `ln p(x_v | parents)` for one node.
    pub fn node_logdensity(&self, v: usize, x: &Instance) -> f64 {
        if let Some(cpt) = self.discrete.get(&v) {
            cpt.rows[cpt.indexer.code(x)].ln_prob(x.discrete(v))
        } else {
            let cpd = &self.continuous[&v];
            let params = &cpd.cells[cpd.indexer.code(x)];
            params.ln_density(x.continuous(v), &regressors(x, &cpd.continuous_parents))
        }
    }

    /// Sum of `ln p(x) ` over the rows of `data`.
    pub fn log_likelihood(&self, data: &Dataset) -> f64 {
        data.rows().iter().map(|x| self.joint_logdensity_unchecked(x)).sum()
    }

    fn joint_logdensity_unchecked(&self, x: &Instance) -> f64 {
        self.structure.nodes().map(|v| self.node_logdensity(v, x)).sum()
    }
}

/// Maximum-likelihood parameters; the sample must be acceptable.
pub fn fit_ml(s: &CgnStructure, data: &Dataset) -> Result<CgnModel> {
    validate_structure(s).map_err(CgnError::InvalidStructure)?;
    let report = is_acceptable(s, data);
    if !report.acceptable() {
        return Err(CgnError::NotAcceptable(report));
    }
    let mut discrete = BTreeMap::new();
    let mut continuous = BTreeMap::new();
    for v in s.nodes() {
        let pd = s.discrete_parents(v);
        let indexer = CellIndexer::new(s.schema(), &pd);
        let groups = group_rows(data, &indexer);
        if let Some(card) = s.schema().variable(v).cardinality() {
            let mut rows = Vec::with_capacity(indexer.size());
            for code in 0..indexer.size() {
                let members = &groups[&code];
                let mut counts = vec![0usize; card];
                for &j in members {
                    counts[data.row(j).discrete(v)] += 1;
                }
                let n = members.len() as f64;
                rows.push(MultinomialParams::new(counts.iter().map(|&c| c as f64 / n).collect())?);
            }
            discrete.insert(v, DiscreteCpt { indexer, rows });
        } else {
            let pc = s.continuous_parents(v);
            let mut block = pc.clone();
            block.push(v);
            let q = pc.len();
            let mut cells = Vec::with_capacity(indexer.size());
            for code in 0..indexer.size() {
                let stats = block_stats(data, &groups[&code], &block);
                let m = stats.sigma_hat.expect("acceptable cells are nonempty");
                let mean = &stats.mean;
                let (r, sigma2) = if q == 0 {
                    (DVector::zeros(0), m[(0, 0)])
                } else {
                    let m_pp = m.view((0, 0), (q, q)).into_owned();
                    let m_pg = m.view((0, q), (q, 1)).column(0).into_owned();
                    let chol = Cholesky::factor(&m_pp, "continuous parent covariance")?;
                    let r = chol.solve(&m_pg);
                    let sigma2 = m[(q, q)] - r.dot(&m_pg);
                    (r, sigma2)
                };
                let mut beta = DVector::zeros(q + 1);
                beta[0] = mean[q] - r.dot(&mean.rows(0, q));
                beta.rows_mut(1, q).copy_from(&r);
                cells.push(GaussLinRegParams::new(beta, sigma2)?);
            }
            continuous.insert(
                v,
                ContinuousCpd {
                    indexer,
                    continuous_parents: pc,
                    cells,
                },
            );
        }
    }
    Ok(CgnModel {
        structure: s.clone(),
        discrete,
        continuous,
    })
}

/// `ln p(x | Θ)` as the sum of per-node terms.
pub fn joint_logdensity(m: &CgnModel, x: &Instance) -> Result<f64> {
    x.check(m.structure.schema())?;
    Ok(m.joint_logdensity_unchecked(x))
}
