//! Mixed discrete/continuous datasets, per-cell sufficient statistics and
//! cross-validation splits.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CgnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VariableKind {
    Discrete { cardinality: usize },
    Continuous,
}

impl VariableKind {
    pub fn is_discrete(self) -> bool {
        matches!(self, VariableKind::Discrete { .. })
    }

    pub fn name(self) -> &'static str {
        match self {
            VariableKind::Discrete { .. } => "discrete",
            VariableKind::Continuous => "continuous",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableMeta {
    pub name: String,
    pub kind: VariableKind,
    pub index: usize,
    /// Category labels of a discrete variable, position = code.
    pub labels: Vec<String>,
}

impl VariableMeta {
    pub fn continuous(name: impl Into<String>, index: usize) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Continuous,
            index,
            labels: Vec::new(),
        }
    }

    pub fn discrete(name: impl Into<String>, index: usize, cardinality: usize) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Discrete { cardinality },
            index,
            labels: (0..cardinality).map(|c| c.to_string()).collect(),
        }
    }

    pub fn with_labels(name: impl Into<String>, index: usize, labels: Vec<String>) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Discrete {
                cardinality: labels.len(),
            },
            index,
            labels,
        }
    }

    pub fn cardinality(&self) -> Option<usize> {
        match self.kind {
            VariableKind::Discrete { cardinality } => Some(cardinality),
            VariableKind::Continuous => None,
        }
    }

    pub fn is_discrete(&self) -> bool {
        self.kind.is_discrete()
    }
}

/// Variable metadata plus the designated class variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    variables: Vec<VariableMeta>,
    class_index: usize,
}

impl Schema {
    pub fn new(variables: Vec<VariableMeta>, class_index: usize) -> Result<Self> {
        for (i, v) in variables.iter().enumerate() {
            if v.index != i {
                return Err(CgnError::Contract(format!(
                    "variable `{}` has index {} but sits at position {i}",
                    v.name, v.index
                )));
            }
            if let Some(c) = v.cardinality() {
                if c < 2 {
                    return Err(CgnError::Contract(format!(
                        "discrete variable `{}` has cardinality {c} (< 2)",
                        v.name
                    )));
                }
            }
        }
        match variables.get(class_index) {
            Some(v) if v.is_discrete() => {}
            Some(v) => {
                return Err(CgnError::Contract(format!(
                    "class variable `{}` must be discrete",
                    v.name
                )))
            }
            None => {
                return Err(CgnError::Contract(format!(
                    "class index {class_index} out of range"
                )))
            }
        }
        Ok(Self {
            variables,
            class_index,
        })
    }

    pub fn variables(&self) -> &[VariableMeta] {
        &self.variables
    }

    pub fn variable(&self, index: usize) -> &VariableMeta {
        &self.variables[index]
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn class_index(&self) -> usize {
        self.class_index
    }

    pub fn class_cardinality(&self) -> usize {
        self.variables[self.class_index]
            .cardinality()
            .expect("class is discrete")
    }

    /// Indexes of the continuous variables (Γ).
    pub fn continuous(&self) -> Vec<usize> {
        self.variables
            .iter()
            .filter(|v| !v.is_discrete())
            .map(|v| v.index)
            .collect()
    }

    /// Indexes of the discrete variables (Δ).
    pub fn discrete(&self) -> Vec<usize> {
        self.variables
            .iter()
            .filter(|v| v.is_discrete())
            .map(|v| v.index)
            .collect()
    }

    /// Attributes: every variable except the class.
    pub fn attributes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| i != self.class_index).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Discrete(usize),
    Continuous(f64),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Discrete(c) => write!(f, "{c}"),
            Value::Continuous(y) => write!(f, "{y}"),
        }
    }
}

/// A full assignment of values, one per variable, in schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance(pub Vec<Value>);

impl Instance {
    pub fn discrete(&self, index: usize) -> usize {
        match self.0[index] {
            Value::Discrete(c) => c,
            Value::Continuous(_) => panic!("variable {index} is continuous"),
        }
    }

    pub fn continuous(&self, index: usize) -> f64 {
        match self.0[index] {
            Value::Continuous(y) => y,
            Value::Discrete(_) => panic!("variable {index} is discrete"),
        }
    }

    pub fn set(&mut self, index: usize, value: Value) {
        self.0[index] = value;
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[Value] {
        &self.0
    }

    /// Checks that every value matches its variable's kind and range.
    pub fn check(&self, schema: &Schema) -> Result<()> {
        if self.0.len() != schema.len() {
            return Err(CgnError::Contract(format!(
                "assignment has {} values, schema has {} variables",
                self.0.len(),
                schema.len()
            )));
        }
        for (value, meta) in self.0.iter().zip(schema.variables()) {
            match (value, meta.kind) {
                (Value::Discrete(c), VariableKind::Discrete { cardinality }) if *c < cardinality => {}
                (Value::Continuous(y), VariableKind::Continuous) if y.is_finite() => {}
                _ => {
                    return Err(CgnError::Contract(format!(
                        "value {value} is invalid for {} variable `{}`",
                        meta.kind.name(),
                        meta.name
                    )))
                }
            }
        }
        Ok(())
    }
}

/// Observations over a shared schema. `origin[j]` is the row id of
/// observation `j` in the dataset it was ultimately loaded from, so any
/// subset can be traced back to the source rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<Schema>,
    rows: Vec<Instance>,
    origin: Vec<usize>,
}

impl Dataset {
    pub fn new(schema: Arc<Schema>, rows: Vec<Instance>) -> Result<Self> {
        for (j, row) in rows.iter().enumerate() {
            row.check(&schema)
                .map_err(|e| CgnError::Contract(format!("row {j}: {e}")))?;
        }
        let origin = (0..rows.len()).collect();
        Ok(Self {
            schema,
            rows,
            origin,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn schema_arc(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn rows(&self) -> &[Instance] {
        &self.rows
    }

    pub fn row(&self, j: usize) -> &Instance {
        &self.rows[j]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn origin(&self) -> &[usize] {
        &self.origin
    }

    pub fn class_of(&self, j: usize) -> usize {
        self.rows[j].discrete(self.schema.class_index())
    }

    pub fn class_labels(&self) -> Vec<usize> {
        (0..self.len()).map(|j| self.class_of(j)).collect()
    }

    /// Row positions grouped by class value.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.schema.class_cardinality()];
        for j in 0..self.len() {
            members[self.class_of(j)].push(j);
        }
        members
    }

    /// The observations at `positions`, in that order.
    pub fn select(&self, positions: &[usize]) -> Dataset {
        Dataset {
            schema: Arc::clone(&self.schema),
            rows: positions.iter().map(|&j| self.rows[j].clone()).collect(),
            origin: positions.iter().map(|&j| self.origin[j]).collect(),
        }
    }

    pub fn continuous_column(&self, index: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.continuous(index)).collect()
    }

    /// Writes the dataset as CSV with category labels.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| CgnError::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let header: Vec<&str> = self.schema.variables().iter().map(|v| v.name.as_str()).collect();
        let mut text = header.join(",");
        text.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row
                .0
                .iter()
                .zip(self.schema.variables())
                .map(|(value, meta)| match value {
                    Value::Discrete(c) => meta.labels[*c].clone(),
                    Value::Continuous(y) => format!("{y}"),
                })
                .collect();
            text.push_str(&fields.join(","));
            text.push('\n');
        }
        out.write_all(text.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| CgnError::io(path, e))
    }
}

/// How one CSV column is interpreted.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnKind {
    Continuous,
    /// Categories in `labels` order, or first-appearance order when `None`.
    Discrete { labels: Option<Vec<String>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

/// Column layout expected by [`load_csv`]. Variable indexes follow
/// `columns` order.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub columns: Vec<ColumnSpec>,
    pub class: String,
}

impl CsvSchema {
    /// Every header column continuous except `class` and the names in
    /// `discrete`, which use first-appearance coding.
    pub fn from_header(header: &[String], class: &str, discrete: &[String]) -> Self {
        let columns = header
            .iter()
            .map(|name| ColumnSpec {
                name: name.clone(),
                kind: if name == class || discrete.contains(name) {
                    ColumnKind::Discrete { labels: None }
                } else {
                    ColumnKind::Continuous
                },
            })
            .collect();
        Self {
            columns,
            class: class.to_string(),
        }
    }
}

/// Reads only the header line of a CSV file.
pub fn read_csv_header(path: &Path) -> Result<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?;
    Ok(header.iter().map(|s| s.trim().to_string()).collect())
}

fn csv_error(path: &Path, e: csv::Error) -> CgnError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CgnError::io(path, io),
        other => CgnError::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Loads a comma-separated file with a header row.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();

    let mut positions = Vec::with_capacity(schema.columns.len());
    for col in &schema.columns {
        let pos = header.iter().position(|h| *h == col.name).ok_or_else(|| CgnError::Parse {
            line: 1,
            message: format!("header has no column named `{}`", col.name),
        })?;
        positions.push(pos);
    }
    if header.len() != schema.columns.len() {
        return Err(CgnError::Parse {
            line: 1,
            message: format!(
                "header has {} columns, schema declares {}",
                header.len(),
                schema.columns.len()
            ),
        });
    }

    let mut codes: Vec<HashMap<String, usize>> = Vec::with_capacity(schema.columns.len());
    let mut labels: Vec<Vec<String>> = Vec::with_capacity(schema.columns.len());
    for col in &schema.columns {
        match &col.kind {
            ColumnKind::Discrete { labels: Some(l) } => {
                codes.push(l.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect());
                labels.push(l.clone());
            }
            _ => {
                codes.push(HashMap::new());
                labels.push(Vec::new());
            }
        }
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != header.len() {
            return Err(CgnError::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let mut values = Vec::with_capacity(schema.columns.len());
        for (c, col) in schema.columns.iter().enumerate() {
            let field = record[positions[c]].trim();
            let value = match &col.kind {
                ColumnKind::Continuous => {
                    let y: f64 = field.parse().map_err(|_| CgnError::Parse {
                        line,
                        message: format!("column `{}`: `{field}` is not a number", col.name),
                    })?;
                    if !y.is_finite() {
                        return Err(CgnError::Parse {
                            line,
                            message: format!("column `{}`: non-finite value", col.name),
                        });
                    }
                    Value::Continuous(y)
                }
                ColumnKind::Discrete { labels: declared } => match codes[c].get(field) {
                    Some(&code) => Value::Discrete(code),
                    None if declared.is_none() => {
                        let code = labels[c].len();
                        codes[c].insert(field.to_string(), code);
                        labels[c].push(field.to_string());
                        Value::Discrete(code)
                    }
                    None => {
                        return Err(CgnError::Parse {
                            line,
                            message: format!("column `{}`: unknown category `{field}`", col.name),
                        })
                    }
                },
            };
            values.push(value);
        }
        rows.push(Instance(values));
    }
    if rows.is_empty() {
        return Err(CgnError::Parse {
            line: 1,
            message: "file contains no observations".into(),
        });
    }

    let mut variables = Vec::with_capacity(schema.columns.len());
    for (i, col) in schema.columns.iter().enumerate() {
        variables.push(match col.kind {
            ColumnKind::Continuous => VariableMeta::continuous(col.name.clone(), i),
            ColumnKind::Discrete { .. } => {
                if labels[i].len() < 2 {
                    return Err(CgnError::Parse {
                        line: 1,
                        message: format!(
                            "discrete column `{}` has fewer than two categories; declare its labels",
                            col.name
                        ),
                    });
                }
                VariableMeta::with_labels(col.name.clone(), i, labels[i].clone())
            }
        });
    }
    let class_index = schema
        .columns
        .iter()
        .position(|c| c.name == schema.class)
        .ok_or_else(|| CgnError::Parse {
            line: 1,
            message: format!("class column `{}` not in schema", schema.class),
        })?;
    let schema = Schema::new(variables, class_index)?;
    Dataset::new(Arc::new(schema), rows)
}

/// A joint assignment to a set of discrete variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cell {
    pub indexes: Vec<usize>,
    pub values: Vec<usize>,
}

impl Cell {
    /// The empty cell, matching every row.
    pub fn all() -> Self {
        Self {
            indexes: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn new(indexes: Vec<usize>, values: Vec<usize>) -> Self {
        assert_eq!(indexes.len(), values.len(), "one value per cell index");
        Self { indexes, values }
    }

    pub fn matches(&self, row: &Instance) -> bool {
        self.indexes
            .iter()
            .zip(&self.values)
            .all(|(&i, &v)| row.discrete(i) == v)
    }
}

/// Mixed-radix coding of the cells of a set of discrete variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellIndexer {
    vars: Vec<usize>,
    cards: Vec<usize>,
}

impl CellIndexer {
    pub fn new(schema: &Schema, vars: &[usize]) -> Self {
        let cards = vars
            .iter()
            .map(|&v| schema.variable(v).cardinality().expect("cell variables are discrete"))
            .collect();
        Self {
            vars: vars.to_vec(),
            cards,
        }
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    /// Number of cells, saturating on overflow.
    pub fn size(&self) -> usize {
        self.cards.iter().fold(1usize, |a, &c| a.saturating_mul(c))
    }

    pub fn code(&self, row: &Instance) -> usize {
        self.vars
            .iter()
            .zip(&self.cards)
            .fold(0, |acc, (&v, &c)| acc * c + row.discrete(v))
    }

    pub fn code_values(&self, values: &[usize]) -> usize {
        values.iter().zip(&self.cards).fold(0, |acc, (&x, &c)| acc * c + x)
    }

    pub fn decode(&self, mut code: usize) -> Vec<usize> {
        let mut values = vec![0; self.vars.len()];
        for k in (0..self.vars.len()).rev() {
            values[k] = code % self.cards[k];
            code /= self.cards[k];
        }
        values
    }

    pub fn cell(&self, code: usize) -> Cell {
        Cell::new(self.vars.clone(), self.decode(code))
    }
}

/// Counts and moment matrices of a block of continuous variables over the
/// rows of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub n: usize,
    pub member_rows: Vec<usize>,
    pub s: DVector<f64>,
    pub mean: DVector<f64>,
    pub ss: DMatrix<f64>,
    pub ssd: DMatrix<f64>,
    pub sigma_hat: Option<DMatrix<f64>>,
}

impl SufficientStats {
    /// Combines the statistics of two disjoint row sets.
    pub fn merge(&self, other: &SufficientStats) -> SufficientStats {
        let n = self.n + other.n;
        let s = &self.s + &other.s;
        let ss = &self.ss + &other.ss;
        let mut member_rows = self.member_rows.clone();
        member_rows.extend_from_slice(&other.member_rows);
        member_rows.sort_unstable();
        let (mean, ssd, sigma_hat) = if n == 0 {
            (DVector::zeros(s.len()), DMatrix::zeros(s.len(), s.len()), None)
        } else {
            let mean = &s / n as f64;
            let ssd = &ss - &s * s.transpose() / n as f64;
            let sigma_hat = &ssd / n as f64;
            (mean, ssd, Some(sigma_hat))
        };
        SufficientStats {
            n,
            member_rows,
            s,
            mean,
            ss,
            ssd,
            sigma_hat,
        }
    }
}

/// Statistics of the continuous block `b` over rows falling in `cell`.
/// `ssd` is accumulated around the cell mean (two passes).
pub fn cell_stats(data: &Dataset, cell: &Cell, b: &[usize]) -> SufficientStats {
    let members: Vec<usize> = (0..data.len()).filter(|&j| cell.matches(data.row(j))).collect();
    block_stats(data, &members, b)
}

/// Statistics of block `b` over an explicit row set.
pub fn block_stats(data: &Dataset, members: &[usize], b: &[usize]) -> SufficientStats {
    let p = b.len();
    let n = members.len();
    let mut s = DVector::zeros(p);
    let mut ss = DMatrix::zeros(p, p);
    let mut y = DVector::zeros(p);
    for &j in members {
        let row = data.row(j);
        for (k, &v) in b.iter().enumerate() {
            y[k] = row.continuous(v);
        }
        s += &y;
        ss.ger(1.0, &y, &y, 1.0);
    }
    if n == 0 {
        return SufficientStats {
            n,
            member_rows: Vec::new(),
            s,
            mean: DVector::zeros(p),
            ss,
            ssd: DMatrix::zeros(p, p),
            sigma_hat: None,
        };
    }
    let mean = &s / n as f64;
    let mut ssd = DMatrix::zeros(p, p);
    for &j in members {
        let row = data.row(j);
        for (k, &v) in b.iter().enumerate() {
            y[k] = row.continuous(v) - mean[k];
        }
        ssd.ger(1.0, &y, &y, 1.0);
    }
    let sigma_hat = Some(&ssd / n as f64);
    SufficientStats {
        n,
        member_rows: members.to_vec(),
        s,
        mean,
        ss,
        ssd,
        sigma_hat,
    }
}

/// One cross-validation split, as row positions into the source dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified k-fold split. Each class's rows are shuffled and dealt
/// round-robin, continuing the rotation across classes so fold sizes stay
/// balanced. Classes with fewer than `k` members leave some folds without
/// that class.
pub fn stratified_kfold(data: &Dataset, k: usize, seed: u64) -> Result<Vec<Fold>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    stratified_kfold_with(data, k, &mut rng)
}

pub fn stratified_kfold_with(data: &Dataset, k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(CgnError::Contract(format!("k-fold needs k >= 2, got {k}")));
    }
    if k > data.len() {
        return Err(CgnError::Contract(format!(
            "{k} folds requested for {} rows",
            data.len()
        )));
    }
    let mut assignment = vec![0usize; data.len()];
    let mut position = 0usize;
    for mut members in data.class_members() {
        members.shuffle(rng);
        for j in members {
            assignment[j] = position % k;
            position += 1;
        }
    }
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..data.len()).partition(|&j| assignment[j] == f);
            Fold { train, test }
        })
        .collect())
}

/// Stratified random subset of `⌈fraction·n⌉` rows, keeping at least one
/// row of every class present. Rows keep their original order.
pub fn subsample(data: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    subsample_with(data, fraction, &mut rng)
}

pub fn subsample_with(data: &Dataset, fraction: f64, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CgnError::Contract(format!(
            "subsample fraction must lie in (0, 1], got {fraction}"
        )));
    }
    if fraction == 1.0 {
        return Ok(data.clone());
    }
    let members = data.class_members();
    let target = ((fraction * data.len() as f64) - 1e-9).ceil() as usize;
    let mut quota: Vec<usize> = members
        .iter()
        .map(|m| {
            if m.is_empty() {
                0
            } else {
                (((fraction * m.len() as f64) + 1e-9).floor() as usize).max(1)
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..members.len()).collect();
    let remainder = |c: usize| {
        let exact = fraction * members[c].len() as f64;
        exact - exact.floor()
    };
    order.sort_by(|&a, &b| remainder(b).total_cmp(&remainder(a)).then(a.cmp(&b)));
    let mut assigned: usize = quota.iter().sum();
    for &c in order.iter().cycle().take(order.len() * 2) {
        if assigned >= target {
            break;
        }
        if quota[c] < members[c].len() {
            quota[c] += 1;
            assigned += 1;
        }
    }
    let mut chosen = Vec::with_capacity(assigned);
    for (c, mut m) in members.into_iter().enumerate() {
        m.shuffle(rng);
        chosen.extend_from_slice(&m[..quota[c]]);
    }
    chosen.sort_unstable();
    Ok(data.select(&chosen))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy(classes: &[usize], ys: &[f64]) -> Dataset {
        let schema = Schema::new(
            vec![VariableMeta::discrete("c", 0, 2), VariableMeta::continuous("y", 1)],
            0,
        )
        .unwrap();
        let rows = classes
            .iter()
            .zip(ys)
            .map(|(&c, &y)| Instance(vec![Value::Discrete(c), Value::Continuous(y)]))
            .collect();
        Dataset::new(Arc::new(schema), rows).unwrap()
    }

    fn write_tmp(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    fn simple_schema() -> CsvSchema {
        CsvSchema {
            columns: vec![
                ColumnSpec {
                    name: "c".into(),
                    kind: ColumnKind::Discrete { labels: None },
                },
                ColumnSpec {
                    name: "y".into(),
                    kind: ColumnKind::Continuous,
                },
            ],
            class: "c".into(),
        }
    }

    #[test]
    fn load_small_file() {
        let f = write_tmp("c,y\na,1.0\nb,2.5\na,-3\n");
        let d = load_csv(f.path(), &simple_schema()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.schema().variable(0).labels, vec!["a", "b"]);
        assert_eq!(d.class_labels(), vec![0, 1, 0]);
        assert_eq!(d.row(2).continuous(1), -3.0);
    }

    #[test]
    fn load_reports_bad_number_line() {
        let f = write_tmp("c,y\na,1.0\nb,x\n");
        match load_csv(f.path(), &simple_schema()) {
            Err(CgnError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_reports_unknown_category_and_short_row() {
        let mut schema = simple_schema();
        schema.columns[0].kind = ColumnKind::Discrete {
            labels: Some(vec!["a".into(), "b".into()]),
        };
        let f = write_tmp("c,y\na,1.0\nz,2\n");
        assert!(matches!(load_csv(f.path(), &schema), Err(CgnError::Parse { line: 3, .. })));
        let f = write_tmp("c,y\na,1.0\nb\n");
        assert!(matches!(load_csv(f.path(), &schema), Err(CgnError::Parse { line: 3, .. })));
        let f = write_tmp("c,w\na,1.0\n");
        assert!(matches!(load_csv(f.path(), &schema), Err(CgnError::Parse { line: 1, .. })));
        assert!(matches!(
            load_csv(Path::new("/nonexistent/file.csv"), &schema),
            Err(CgnError::Io { .. })
        ));
    }

    #[test]
    fn cell_stats_worked_example() {
        let d = toy(&[0, 0, 0], &[1.0, 2.0, 3.0]);
        let st = cell_stats(&d, &Cell::all(), &[1]);
        assert_eq!(st.n, 3);
        assert_eq!(st.s[0], 6.0);
        assert_eq!(st.mean[0], 2.0);
        assert_eq!(st.ss[(0, 0)], 14.0);
        assert_relative_eq!(st.ssd[(0, 0)], 2.0, epsilon = 1e-14);
        assert_relative_eq!(st.sigma_hat.unwrap()[(0, 0)], 2.0 / 3.0, epsilon = 1e-14);

        let empty = cell_stats(&d, &Cell::new(vec![0], vec![1]), &[1]);
        assert_eq!(empty.n, 0);
        assert_eq!(empty.s[0], 0.0);
        assert_eq!(empty.ss[(0, 0)], 0.0);
        assert!(empty.sigma_hat.is_none());
    }

    #[test]
    fn cell_stats_two_columns_match_identity() {
        let schema = Schema::new(
            vec![
                VariableMeta::discrete("c", 0, 2),
                VariableMeta::continuous("a", 1),
                VariableMeta::continuous("b", 2),
            ],
            0,
        )
        .unwrap();
        let pts = [(1.0, 2.0), (2.0, 1.0), (4.0, 4.5), (0.5, -1.0)];
        let rows = pts
            .iter()
            .map(|&(a, b)| Instance(vec![Value::Discrete(0), Value::Continuous(a), Value::Continuous(b)]))
            .collect();
        let d = Dataset::new(Arc::new(schema), rows).unwrap();
        let st = cell_stats(&d, &Cell::new(vec![0], vec![0]), &[1, 2]);
        let identity = &st.ss - &st.s * st.s.transpose() / st.n as f64;
        assert!((&identity - &st.ssd).amax() < 1e-12);
        assert_eq!(st.ssd[(0, 1)], st.ssd[(1, 0)]);
        let eig = st.ssd.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&e| e >= -1e-10));
    }

    #[test]
    fn kfold_balanced_two_classes() {
        let d = toy(&[0, 1, 0, 1, 0, 1, 0, 1, 0, 1], &[0.0; 10]);
        let folds = stratified_kfold(&d, 5, 3).unwrap();
        assert_eq!(folds.len(), 5);
        for f in &folds {
            let mut per = [0; 2];
            for &j in &f.test {
                per[d.class_of(j)] += 1;
            }
            assert_eq!(per, [1, 1]);
            assert_eq!(f.train.len(), 8);
        }
        assert_eq!(folds, stratified_kfold(&d, 5, 3).unwrap());
        assert!(matches!(stratified_kfold(&d, 11, 3), Err(CgnError::Contract(_))));
        assert!(matches!(stratified_kfold(&d, 1, 3), Err(CgnError::Contract(_))));
    }

    #[test]
    fn subsample_examples() {
        let classes: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let ys: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let d = toy(&classes, &ys);
        assert_eq!(subsample(&d, 1.0, 9).unwrap(), d);
        let s = subsample(&d, 0.2, 9).unwrap();
        assert_eq!(s.len(), 20);
        assert_eq!(s.class_members().iter().map(Vec::len).collect::<Vec<_>>(), vec![10, 10]);
        assert!(s.origin().windows(2).all(|w| w[0] < w[1]));
        assert!(matches!(subsample(&d, 0.0, 1), Err(CgnError::Contract(_))));
        assert!(matches!(subsample(&d, 1.5, 1), Err(CgnError::Contract(_))));
    }

    #[test]
    fn subsample_keeps_every_class() {
        let mut classes = vec![0; 40];
        classes.push(1);
        let d = toy(&classes, &vec![0.0; 41]);
        let s = subsample(&d, 0.1, 2).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s.class_members()[1].len(), 1);
    }

    #[test]
    fn cell_indexer_round_trips() {
        let schema = Schema::new(
            vec![
                VariableMeta::discrete("a", 0, 3),
                VariableMeta::discrete("b", 1, 2),
                VariableMeta::discrete("c", 2, 4),
            ],
            0,
        )
        .unwrap();
        let ix = CellIndexer::new(&schema, &[0, 2]);
        assert_eq!(ix.size(), 12);
        for code in 0..12 {
            assert_eq!(ix.code_values(&ix.decode(code)), code);
        }
    }
}
