//! Joint augmented naive Bayes (JAN) partitions, the greedy wrapper search
//! with its forward / backward / condensed candidate generators, and the
//! contiguous `k-BOX` and `k-BAND` structure families.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::classifier::{evaluate, Classifier};
use crate::dataset::{stratified_kfold, Dataset, Fold, Schema};
use crate::error::{CgnError, Result};
use crate::model::{fit_ml, is_acceptable, CgnStructure};

/// Attributes split into groups that are mutually independent given the
/// class and fully dependent inside. Attributes in no group are left out of
/// the classifier. Groups are kept sorted, and ordered by smallest member.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JanPartition {
    groups: Vec<Vec<usize>>,
    class_index: usize,
}

impl JanPartition {
    pub fn new(groups: Vec<Vec<usize>>, class_index: usize) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut groups: Vec<Vec<usize>> = groups
            .into_iter()
            .map(|mut g| {
                g.sort_unstable();
                g
            })
            .collect();
        for g in &groups {
            if g.is_empty() {
                return Err(CgnError::Contract("JAN partition has an empty group".into()));
            }
            for &a in g {
                if a == class_index {
                    return Err(CgnError::Contract("the class cannot be grouped".into()));
                }
                if !seen.insert(a) {
                    return Err(CgnError::Contract(format!("attribute {a} appears in two groups")));
                }
            }
        }
        groups.sort();
        Ok(Self { groups, class_index })
    }

    pub fn empty(class_index: usize) -> Self {
        Self {
            groups: Vec::new(),
            class_index,
        }
    }

    /// One singleton group per attribute (naive Bayes).
    pub fn singletons(attrs: &[usize], class_index: usize) -> Self {
        Self::new(attrs.iter().map(|&a| vec![a]).collect(), class_index).expect("distinct attributes")
    }

    /// All attributes in a single group.
    pub fn complete(attrs: &[usize], class_index: usize) -> Self {
        if attrs.is_empty() {
            return Self::empty(class_index);
        }
        Self::new(vec![attrs.to_vec()], class_index).expect("distinct attributes")
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn class_index(&self) -> usize {
        self.class_index
    }

    pub fn attributes(&self) -> BTreeSet<usize> {
        self.groups.iter().flatten().copied().collect()
    }

    fn rebuilt(&self, groups: Vec<Vec<usize>>) -> Self {
        let groups = groups.into_iter().filter(|g| !g.is_empty()).collect();
        Self::new(groups, self.class_index).expect("derived from a valid partition")
    }
}

impl fmt::Display for JanPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .groups
            .iter()
            .map(|g| format!("{{{}}}", g.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")))
            .collect();
        if parts.is_empty() {
            write!(f, "{{}}")
        } else {
            write!(f, "{}", parts.join(" "))
        }
    }
}

/// Class node plus every grouped attribute; inside a group each attribute
/// takes all lower-indexed members as parents.
pub fn jan_to_structure(p: &JanPartition, schema: Arc<Schema>) -> CgnStructure {
    let class = schema.class_index();
    let mut parents = BTreeMap::from([(class, Vec::new())]);
    for g in &p.groups {
        for (j, &a) in g.iter().enumerate() {
            let mut pa = vec![class];
            pa.extend_from_slice(&g[..j]);
            parents.insert(a, pa);
        }
    }
    CgnStructure::new(schema, parents)
}

/// For every attribute not yet in `p`: add it to each existing group, or as
/// a new group.
pub fn fw_candidates(p: &JanPartition, all_attrs: &[usize]) -> Vec<JanPartition> {
    let present = p.attributes();
    let mut out = Vec::new();
    for &a in all_attrs.iter().filter(|a| !present.contains(a)) {
        for k in 0..p.groups.len() {
            let mut groups = p.groups.clone();
            groups[k].push(a);
            out.push(p.rebuilt(groups));
        }
        let mut groups = p.groups.clone();
        groups.push(vec![a]);
        out.push(p.rebuilt(groups));
    }
    dedup(out)
}

/// Remove any single attribute, or merge any two groups.
pub fn bw_candidates(p: &JanPartition) -> Vec<JanPartition> {
    let mut out = wc_candidates(p);
    for i in 0..p.groups.len() {
        for j in (i + 1)..p.groups.len() {
            let mut groups = p.groups.clone();
            let moved = std::mem::take(&mut groups[j]);
            groups[i].extend(moved);
            out.push(p.rebuilt(groups));
        }
    }
    dedup(out)
}

/// Remove any single attribute.
pub fn wc_candidates(p: &JanPartition) -> Vec<JanPartition> {
    let mut out = Vec::new();
    for (k, g) in p.groups.iter().enumerate() {
        for idx in 0..g.len() {
            let mut groups = p.groups.clone();
            groups[k].remove(idx);
            out.push(p.rebuilt(groups));
        }
    }
    dedup(out)
}

fn dedup(candidates: Vec<JanPartition>) -> Vec<JanPartition> {
    let mut seen = BTreeSet::new();
    candidates
        .into_iter()
        .filter(|c| seen.insert(format!("{c}")))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    /// Start from the class alone; add attributes.
    Forward,
    /// Start from naive Bayes; remove attributes or merge groups.
    Backward,
    /// Start from one complete group; remove attributes.
    Condensed,
}

impl Generator {
    pub fn initial(self, attrs: &[usize], class_index: usize) -> JanPartition {
        match self {
            Generator::Forward => JanPartition::empty(class_index),
            Generator::Backward => JanPartition::singletons(attrs, class_index),
            Generator::Condensed => JanPartition::complete(attrs, class_index),
        }
    }

    pub fn candidates(self, p: &JanPartition, attrs: &[usize]) -> Vec<JanPartition> {
        match self {
            Generator::Forward => fw_candidates(p, attrs),
            Generator::Backward => bw_candidates(p),
            Generator::Condensed => wc_candidates(p),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Generator::Forward => "fw",
            Generator::Backward => "bw",
            Generator::Condensed => "wc",
        }
    }
}

impl std::str::FromStr for Generator {
    type Err = CgnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fw" => Ok(Generator::Forward),
            "bw" => Ok(Generator::Backward),
            "wc" => Ok(Generator::Condensed),
            other => Err(CgnError::Contract(format!("unknown generator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchIteration {
    pub candidates: usize,
    /// Score of the incumbent after this iteration.
    pub best_score: f64,
    pub partition: JanPartition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchTrace {
    /// Entry 0 is the initial structure (zero candidates).
    pub iterations: Vec<SearchIteration>,
    pub folds: Vec<Fold>,
    pub final_partition: JanPartition,
}

/// Mean test-fold accuracy of the ML classifier; a fold on which the
/// structure is not acceptable scores `-∞`.
pub fn cv_accuracy(structure: &CgnStructure, data: &Dataset, folds: &[Fold]) -> Result<f64> {
    let mut total = 0.0;
    for fold in folds {
        let train = data.select(&fold.train);
        let model = match fit_ml(structure, &train) {
            Ok(m) => m,
            Err(CgnError::NotAcceptable(_)) => return Ok(f64::NEG_INFINITY),
            Err(e) => return Err(e),
        };
        let test = data.select(&fold.test);
        if test.is_empty() {
            continue;
        }
        let posteriors = Classifier::Ml(model).posteriors(&test)?;
        total += evaluate(&posteriors, &test.class_labels())?.accuracy;
    }
    Ok(total / folds.len() as f64)
}

/// Greedy wrapper search scored by cross-validated ML accuracy. All
/// candidates of a search share one stratified fold split. The search stops
/// as soon as the best candidate fails to strictly beat the incumbent;
/// candidate ties prefer fewer parameters, then generation order.
pub fn wrapper_search(
    data: &Dataset,
    generator: Generator,
    cv_folds: usize,
    seed: u64,
) -> Result<(JanPartition, SearchTrace)> {
    let schema = Arc::clone(data.schema_arc());
    let class = schema.class_index();
    let attrs = schema.continuous();
    let folds = stratified_kfold(data, cv_folds, seed)?;

    let mut incumbent = generator.initial(&attrs, class);
    let initial_structure = jan_to_structure(&incumbent, Arc::clone(&schema));
    let report = is_acceptable(&initial_structure, data);
    if !report.acceptable() {
        return Err(CgnError::Search(format!(
            "initial {} structure {incumbent} is not acceptable: {report}",
            generator.name()
        )));
    }
    let mut incumbent_score = cv_accuracy(&initial_structure, data, &folds)?;
    let mut iterations = vec![SearchIteration {
        candidates: 0,
        best_score: incumbent_score,
        partition: incumbent.clone(),
    }];

    loop {
        let candidates = generator.candidates(&incumbent, &attrs);
        if candidates.is_empty() {
            break;
        }
        let scored: Vec<(f64, usize)> = candidates
            .par_iter()
            .map(|c| {
                let s = jan_to_structure(c, Arc::clone(&schema));
                cv_accuracy(&s, data, &folds).map(|score| (score, s.parameter_count()))
            })
            .collect::<Result<_>>()?;
        let mut best = 0;
        for k in 1..scored.len() {
            let (score, params) = scored[k];
            let (best_score, best_params) = scored[best];
            if score > best_score || (score == best_score && params < best_params) {
                best = k;
            }
        }
        let (best_score, _) = scored[best];
        if !(best_score > incumbent_score) {
            break;
        }
        incumbent = candidates[best].clone();
        incumbent_score = best_score;
        iterations.push(SearchIteration {
            candidates: candidates.len(),
            best_score,
            partition: incumbent.clone(),
        });
    }
    Ok((
        incumbent.clone(),
        SearchTrace {
            iterations,
            folds,
            final_partition: incumbent,
        },
    ))
}

fn check_k(n_attrs: usize, k: usize) -> Result<()> {
    if n_attrs == 0 || k == 0 || k > n_attrs {
        return Err(CgnError::Contract(format!(
            "need 1 <= k <= n_attrs, got k={k}, n_attrs={n_attrs}"
        )));
    }
    Ok(())
}

/// Consecutive blocks of `k` attributes; the last block may be shorter.
pub fn kbox_partition(attrs: &[usize], k: usize, class_index: usize) -> Result<JanPartition> {
    check_k(attrs.len(), k)?;
    JanPartition::new(attrs.chunks(k).map(<[usize]>::to_vec).collect(), class_index)
}

/// `k-BOX` over the schema's continuous variables in index order.
pub fn kbox_structure(schema: Arc<Schema>, k: usize) -> Result<CgnStructure> {
    let p = kbox_partition(&schema.continuous(), k, schema.class_index())?;
    Ok(jan_to_structure(&p, schema))
}

/// `k-BAND` over the schema's continuous variables in index order: each
/// attribute's parents are the class and the `k-1` attributes before it.
pub fn kband_structure(schema: Arc<Schema>, k: usize) -> Result<CgnStructure> {
    let attrs = schema.continuous();
    check_k(attrs.len(), k)?;
    let class = schema.class_index();
    let mut parents = BTreeMap::from([(class, Vec::new())]);
    for (j, &a) in attrs.iter().enumerate() {
        let mut pa = vec![class];
        pa.extend_from_slice(&attrs[j.saturating_sub(k - 1)..j]);
        parents.insert(a, pa);
    }
    Ok(CgnStructure::new(schema, parents))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::VariableMeta;
    use crate::model::validate_structure;

    fn schema(n_attrs: usize) -> Arc<Schema> {
        let mut vars = vec![VariableMeta::discrete("class", 0, 2)];
        vars.extend((1..=n_attrs).map(|i| VariableMeta::continuous(format!("x{i}"), i)));
        Arc::new(Schema::new(vars, 0).unwrap())
    }

    fn part(groups: &[&[usize]]) -> JanPartition {
        JanPartition::new(groups.iter().map(|g| g.to_vec()).collect(), 0).unwrap()
    }

    fn edges(s: &CgnStructure) -> BTreeSet<(usize, usize)> {
        s.nodes().flat_map(|v| s.parents(v).iter().map(move |&p| (p, v))).collect()
    }

    #[test]
    fn jan_structure_of_three_groups() {
        let s = jan_to_structure(&part(&[&[1, 2, 3], &[4, 5], &[6]]), schema(6));
        let mut expected: BTreeSet<(usize, usize)> = (1..=6).map(|a| (0, a)).collect();
        expected.extend([(1, 2), (1, 3), (2, 3), (4, 5)]);
        assert_eq!(edges(&s), expected);
        assert!(validate_structure(&s).is_ok());
    }

    #[test]
    fn jan_degenerate_cases() {
        let nb = jan_to_structure(&part(&[&[1], &[2], &[3]]), schema(3));
        assert_eq!(nb, CgnStructure::naive_bayes(schema(3), &[1, 2, 3]));
        let empty = jan_to_structure(&JanPartition::empty(0), schema(3));
        assert_eq!(empty, CgnStructure::class_only(schema(3)));
    }

    #[test]
    fn jan_ignores_group_order() {
        let a = JanPartition::new(vec![vec![4, 5], vec![3, 1, 2]], 0).unwrap();
        let b = JanPartition::new(vec![vec![1, 2, 3], vec![5, 4]], 0).unwrap();
        assert_eq!(jan_to_structure(&a, schema(5)), jan_to_structure(&b, schema(5)));
    }

    #[test]
    fn partition_rejects_overlap() {
        assert!(JanPartition::new(vec![vec![1, 2], vec![2]], 0).is_err());
        assert!(JanPartition::new(vec![vec![]], 0).is_err());
    }

    #[test]
    fn fw_examples() {
        let c = fw_candidates(&part(&[&[1], &[2]]), &[1, 2, 3]);
        assert_eq!(c, vec![part(&[&[1, 3], &[2]]), part(&[&[1], &[2, 3]]), part(&[&[1], &[2], &[3]])]);
        let c = fw_candidates(&JanPartition::empty(0), &[1, 2]);
        assert_eq!(c, vec![part(&[&[1]]), part(&[&[2]])]);
        assert!(fw_candidates(&part(&[&[1, 2]]), &[1, 2]).is_empty());
    }

    #[test]
    fn bw_examples() {
        let c = bw_candidates(&part(&[&[1], &[2]]));
        assert_eq!(c, vec![part(&[&[2]]), part(&[&[1]]), part(&[&[1, 2]])]);
        assert_eq!(bw_candidates(&part(&[&[1]])), vec![JanPartition::empty(0)]);
        assert_eq!(bw_candidates(&part(&[&[1, 2], &[3]])).len(), 4);
    }

    #[test]
    fn wc_examples() {
        let c = wc_candidates(&part(&[&[1, 2, 3]]));
        assert_eq!(c, vec![part(&[&[2, 3]]), part(&[&[1, 3]]), part(&[&[1, 2]])]);
        assert_eq!(wc_candidates(&part(&[&[1]])), vec![JanPartition::empty(0)]);
        assert!(wc_candidates(&JanPartition::empty(0)).is_empty());
    }

    #[test]
    fn initial_partitions() {
        assert_eq!(Generator::Backward.initial(&[1, 2], 0), part(&[&[1], &[2]]));
        assert_eq!(Generator::Condensed.initial(&[1, 2, 3], 0), part(&[&[1, 2, 3]]));
        assert_eq!(Generator::Forward.initial(&[1, 2, 3], 0), JanPartition::empty(0));
    }

    #[test]
    fn kbox_examples() {
        assert_eq!(kbox_partition(&[1, 2, 3, 4, 5, 6], 3, 0).unwrap(), part(&[&[1, 2, 3], &[4, 5, 6]]));
        assert_eq!(
            kbox_partition(&[1, 2, 3, 4, 5, 6, 7], 3, 0).unwrap(),
            part(&[&[1, 2, 3], &[4, 5, 6], &[7]])
        );
        assert_eq!(kbox_structure(schema(4), 1).unwrap(), CgnStructure::naive_bayes(schema(4), &[1, 2, 3, 4]));
        let full = kbox_structure(schema(4), 4).unwrap();
        assert_eq!(full, jan_to_structure(&part(&[&[1, 2, 3, 4]]), schema(4)));
        assert!(kbox_structure(schema(4), 5).is_err());
        assert!(kbox_structure(schema(4), 0).is_err());
    }

    #[test]
    fn kband_examples() {
        assert_eq!(kband_structure(schema(5), 1).unwrap(), CgnStructure::naive_bayes(schema(5), &[1, 2, 3, 4, 5]));
        let s = kband_structure(schema(6), 3).unwrap();
        assert_eq!(s.continuous_parents(3), vec![1, 2]);
        assert_eq!(s.continuous_parents(6), vec![4, 5]);
        assert_eq!(s.continuous_parents(1), Vec::<usize>::new());
        assert_eq!(s.continuous_parents(2), vec![1]);
        let dense = kband_structure(schema(5), 5).unwrap();
        for j in 1..=5 {
            assert_eq!(dense.continuous_parents(j), (1..j).collect::<Vec<_>>());
        }
        assert!(validate_structure(&s).is_ok());
    }

    #[test]
    fn kband_parameter_count_is_linear() {
        for k in 1..=4usize {
            for n in k..=10usize {
                let s = kband_structure(schema(n), k).unwrap();
                // per class cell: node j has min(j-1, k-1) slopes + intercept + variance
                let per_cell: usize = (1..=n).map(|j| (j - 1).min(k - 1) + 2).sum();
                assert_eq!(s.parameter_count(), 1 + 2 * per_cell);
                assert!(per_cell <= n * (k + 1));
            }
        }
    }
}
