//! Repeated stratified cross validation of the ML and BA classifiers, the
//! `k`-sweep over banded structure families, and report emission.

mod config;
mod mwu;
mod report;
mod spectra;

pub use config::{ExperimentConfig, Learner, StructureSource, CONFIG_KEYS};
pub use mwu::{mann_whitney_u, mann_whitney_u_with, midranks, upper_normal_tail, Alternative, MwuResult, Verdict};
pub use report::{
    emit_report, summary_path, verdict_label, ExperimentReport, FoldRecord, FoldScore, LearnerSummary, MeanSd,
    Metric, Report, SweepReport, SweepRow, TestSummary, FOLD_HEADER, SWEEP_HEADER,
};
pub use spectra::{generate_spectra, SyntheticSpectraSpec};

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bayes::{init_prior, posterior};
use crate::classifier::{evaluate, Classifier};
use crate::dataset::{load_csv, read_csv_header, stratified_kfold_with, subsample_with, CsvSchema, Dataset, Fold};
use crate::error::{CgnError, Result};
use crate::model::{fit_ml, validate_structure, CgnStructure};
use crate::search::{jan_to_structure, kband_structure, kbox_structure, wrapper_search};

/// What the structure learner of one fold was given.
#[derive(Debug)]
pub struct WrapperAudit<'a> {
    pub repetition: usize,
    pub fold: usize,
    /// Source rows of the fold's test split.
    pub test_origin: &'a [usize],
    /// Source rows of the data handed to the wrapper.
    pub seen_origin: &'a [usize],
}

pub type AuditHook<'a> = &'a (dyn Fn(&WrapperAudit<'_>) + Sync);

/// Loads the configured dataset and runs the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let data = load_dataset(cfg)?;
    run_on_dataset(cfg, &data)
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let header = read_csv_header(&cfg.dataset)?;
    if !header.contains(&cfg.class) {
        return Err(CgnError::Contract(format!(
            "class column `{}` not found in {}",
            cfg.class,
            cfg.dataset.display()
        )));
    }
    load_csv(&cfg.dataset, &CsvSchema::from_header(&header, &cfg.class, &cfg.discrete))
}

pub fn run_on_dataset(cfg: &ExperimentConfig, data: &Dataset) -> Result<ExperimentReport> {
    run_with_audit(cfg, data, &|_| {})
}

/// [`run_on_dataset`] that reports to `audit` what each wrapper search sees.
pub fn run_with_audit(cfg: &ExperimentConfig, data: &Dataset, audit: AuditHook<'_>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let schema = Arc::clone(data.schema_arc());
    let fixed = match &cfg.structure {
        StructureSource::Fixed(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CgnError::io(path, e))?;
            let s = CgnStructure::from_text(&text, Arc::clone(&schema))?;
            validate_structure(&s).map_err(CgnError::InvalidStructure)?;
            Some(s)
        }
        StructureSource::NaiveBayes => Some(CgnStructure::naive_bayes(Arc::clone(&schema), &schema.continuous())),
        StructureSource::KBox(k) => Some(kbox_structure(Arc::clone(&schema), *k)?),
        StructureSource::KBand(k) => Some(kband_structure(Arc::clone(&schema), *k)?),
        StructureSource::Wrapper(_) => None,
    };

    let mut items = Vec::with_capacity(cfg.repetitions * cfg.folds);
    for rep in 0..cfg.repetitions {
        let mut rng = stream(cfg.seed, rep, 0);
        for (f, fold) in stratified_kfold_with(data, cfg.folds, &mut rng)?.into_iter().enumerate() {
            items.push((rep, f, fold));
        }
    }
    let nested: Vec<Vec<FoldRecord>> = items
        .par_iter()
        .map(|(rep, f, fold)| run_fold(cfg, data, fixed.as_ref(), *rep, *f, fold, audit))
        .collect::<Result<_>>()?;
    let mut folds: Vec<FoldRecord> = nested.into_iter().flatten().collect();
    folds.sort_by_key(|r| (r.learner, r.repetition, r.fold));
    if folds.iter().all(|r| r.score.is_none()) {
        return Err(CgnError::Experiment(
            "every learner is undefined on every fold".into(),
        ));
    }
    ExperimentReport::from_folds(folds, cfg.alpha)
}

/// Independent random stream per (repetition, fold); fold 0 is the split
/// itself, fold `f + 1` the work on test fold `f`.
fn stream(seed: u64, repetition: usize, slot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((repetition as u64) << 32) | slot as u64);
    rng
}

fn run_fold(
    cfg: &ExperimentConfig,
    data: &Dataset,
    fixed: Option<&CgnStructure>,
    rep: usize,
    f: usize,
    fold: &Fold,
    audit: AuditHook<'_>,
) -> Result<Vec<FoldRecord>> {
    let mut rng = stream(cfg.seed, rep, f + 1);
    let train = subsample_with(&data.select(&fold.train), cfg.train_fraction, &mut rng)?;
    let test = data.select(&fold.test);
    let structure = match (fixed, &cfg.structure) {
        (Some(s), _) => s.clone(),
        (None, StructureSource::Wrapper(generator)) => {
            audit(&WrapperAudit {
                repetition: rep,
                fold: f,
                test_origin: test.origin(),
                seen_origin: train.origin(),
            });
            let inner = cfg.wrapper_folds.min(train.len());
            match wrapper_search(&train, *generator, inner, rng.next_u64()) {
                Ok((p, _)) => jan_to_structure(&p, Arc::clone(train.schema_arc())),
                // the training split cannot support the starting structure;
                // keep it so BA still predicts and ML is reported undefined
                Err(CgnError::Search(_)) => {
                    let schema = train.schema_arc();
                    let start = generator.initial(&schema.continuous(), schema.class_index());
                    jan_to_structure(&start, Arc::clone(schema))
                }
                Err(e) => return Err(e),
            }
        }
        (None, _) => unreachable!("only wrapper structures are learned per fold"),
    };

    let truth = test.class_labels();
    cfg.learners
        .iter()
        .map(|&learner| {
            let classifier = match learner {
                Learner::Ml => match fit_ml(&structure, &train) {
                    Ok(m) => Some(Classifier::Ml(m)),
                    Err(CgnError::NotAcceptable(_)) => None,
                    Err(e) => return Err(e),
                },
                Learner::Ba => match init_prior(&structure, &train, &cfg.prior) {
                    Ok(prior) => Some(Classifier::Ba(posterior(&prior, &train)?)),
                    Err(CgnError::DegeneratePrior { .. }) => None,
                    Err(e) => return Err(e),
                },
            };
            let score = match classifier {
                Some(c) => {
                    let m = evaluate(&c.posteriors(&test)?, &truth)?;
                    Some(FoldScore {
                        accuracy: m.accuracy,
                        cll: m.cll,
                    })
                }
                None => None,
            };
            Ok(FoldRecord {
                learner,
                repetition: rep,
                fold: f,
                n_train: train.len(),
                n_test: test.len(),
                parameters: structure.parameter_count(),
                score,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    KBox,
    KBand,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::KBox => "kbox",
            Family::KBand => "kband",
        }
    }

    pub fn structure(self, schema: Arc<crate::dataset::Schema>, k: usize) -> Result<CgnStructure> {
        match self {
            Family::KBox => kbox_structure(schema, k),
            Family::KBand => kband_structure(schema, k),
        }
    }

    fn source(self, k: usize) -> StructureSource {
        match self {
            Family::KBox => StructureSource::KBox(k),
            Family::KBand => StructureSource::KBand(k),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = CgnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "kbox" => Ok(Family::KBox),
            "kband" => Ok(Family::KBand),
            other => Err(CgnError::Contract(format!("unknown structure family `{other}`"))),
        }
    }
}

/// One point of a sweep with its full fold-level report.
#[derive(Debug, Clone)]
pub struct SweepRun {
    pub family: Family,
    pub k: usize,
    pub parameters: usize,
    pub report: ExperimentReport,
}

/// Runs the experiment once per `k`, all with the same seed so every point
/// sees the same folds.
pub fn sweep_runs(data: &Dataset, family: Family, k_values: &[usize], cfg: &ExperimentConfig) -> Result<Vec<SweepRun>> {
    let n_attrs = data.schema().continuous().len();
    if let Some(&k) = k_values.iter().find(|&&k| k == 0 || k > n_attrs) {
        return Err(CgnError::Contract(format!("k={k} outside 1..={n_attrs}")));
    }
    k_values
        .iter()
        .map(|&k| {
            let mut c = cfg.clone();
            c.structure = family.source(k);
            let parameters = family.structure(Arc::clone(data.schema_arc()), k)?.parameter_count();
            Ok(SweepRun {
                family,
                k,
                parameters,
                report: run_on_dataset(&c, data)?,
            })
        })
        .collect()
}

/// Generates the spectra and sweeps `k` for one structure family.
pub fn k_sweep(
    spec: &SyntheticSpectraSpec,
    family: Family,
    k_values: &[usize],
    cfg: &ExperimentConfig,
) -> Result<SweepReport> {
    let data = generate_spectra(spec)?;
    Ok(SweepReport::from_runs(&sweep_runs(&data, family, k_values, cfg)?))
}

impl SweepReport {
    pub fn from_runs(runs: &[SweepRun]) -> Self {
        let rows = runs
            .iter()
            .flat_map(|run| {
                run.report.learners.iter().map(move |s| SweepRow {
                    family: run.family.name().to_string(),
                    k: run.k,
                    parameters: run.parameters,
                    learner: s.learner,
                    defined: s.defined,
                    undefined: s.undefined,
                    accuracy: s.accuracy,
                    cll: s.cll,
                })
            })
            .collect();
        Self { rows }
    }
}

/// The `k` whose `family` structure over `schema` has the parameter count
/// closest to `target` (smaller `k` on ties).
pub fn matched_k(schema: Arc<crate::dataset::Schema>, family: Family, target: usize) -> Result<usize> {
    let n = schema.continuous().len();
    let mut best = (usize::MAX, 0);
    for k in 1..=n {
        let p = family.structure(Arc::clone(&schema), k)?.parameter_count();
        let gap = p.abs_diff(target);
        if gap < best.0 {
            best = (gap, k);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Instance, Schema, Value, VariableMeta};

    fn toy(n_per_class: usize) -> Dataset {
        let schema = Arc::new(
            Schema::new(
                vec![
                    VariableMeta::discrete("c", 0, 2),
                    VariableMeta::continuous("x", 1),
                    VariableMeta::continuous("y", 2),
                ],
                0,
            )
            .unwrap(),
        );
        let rows = (0..2 * n_per_class)
            .map(|j| {
                let c = j % 2;
                let t = j as f64 * 0.37;
                Instance(vec![
                    Value::Discrete(c),
                    Value::Continuous(c as f64 + t.sin()),
                    Value::Continuous(t.cos() - c as f64 + 0.3 * t.sin()),
                ])
            })
            .collect();
        Dataset::new(schema, rows).unwrap()
    }

    fn cfg() -> ExperimentConfig {
        ExperimentConfig {
            repetitions: 2,
            folds: 5,
            ..Default::default()
        }
    }

    #[test]
    fn bookkeeping_and_determinism() {
        let d = toy(20);
        let a = run_on_dataset(&cfg(), &d).unwrap();
        assert_eq!(a.folds.len(), 2 * 2 * 5);
        assert_eq!(a.learner(Learner::Ml).unwrap().defined, 10);
        assert_eq!(a.tests.len(), 2);
        let b = run_on_dataset(&cfg(), &d).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.summary(), b.summary());
    }

    #[test]
    fn paired_folds_share_splits() {
        let r = run_on_dataset(&cfg(), &toy(20)).unwrap();
        let ml: Vec<_> = r.folds.iter().filter(|f| f.learner == Learner::Ml).collect();
        let ba: Vec<_> = r.folds.iter().filter(|f| f.learner == Learner::Ba).collect();
        for (m, b) in ml.iter().zip(&ba) {
            assert_eq!((m.repetition, m.fold, m.n_train, m.n_test), (b.repetition, b.fold, b.n_train, b.n_test));
        }
    }

    #[test]
    fn ml_undefined_folds_counted() {
        // two training rows per class cannot support a 2-parent regression
        let mut c = cfg();
        c.structure = StructureSource::KBand(2);
        c.train_fraction = 0.1;
        let r = run_on_dataset(&c, &toy(20)).unwrap();
        let ml = r.learner(Learner::Ml).unwrap();
        assert_eq!(ml.defined + ml.undefined, 10);
        assert!(ml.undefined > 0);
        assert_eq!(r.learner(Learner::Ba).unwrap().defined, 10);
        if let Some(t) = r.test(Metric::Cll) {
            assert_eq!(t.paired_folds, ml.defined);
        }
    }

    #[test]
    fn all_undefined_is_an_error() {
        let mut c = cfg();
        c.learners = vec![Learner::Ml];
        c.structure = StructureSource::KBand(2);
        c.train_fraction = 0.05;
        assert!(matches!(run_on_dataset(&c, &toy(20)), Err(CgnError::Experiment(_))));
    }

    #[test]
    fn wrapper_sees_training_rows_only() {
        let mut c = cfg();
        c.structure = "bw".parse().unwrap();
        c.wrapper_folds = 3;
        let seen = std::sync::Mutex::new(0usize);
        run_with_audit(&c, &toy(20), &|a| {
            assert!(a.seen_origin.iter().all(|r| !a.test_origin.contains(r)));
            *seen.lock().unwrap() += 1;
        })
        .unwrap();
        assert_eq!(*seen.lock().unwrap(), 10);
    }

    #[test]
    fn sweep_k1_families_coincide() {
        let spec = SyntheticSpectraSpec {
            n_vars: 6,
            n_per_class: 15,
            ..Default::default()
        };
        let c = ExperimentConfig {
            repetitions: 1,
            folds: 3,
            ..Default::default()
        };
        let a = k_sweep(&spec, Family::KBox, &[1], &c).unwrap();
        let b = k_sweep(&spec, Family::KBand, &[1], &c).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!((x.parameters, x.accuracy, x.cll), (y.parameters, y.accuracy, y.cll));
        }
        let s = k_sweep(&spec, Family::KBand, &[1, 2, 3, 6], &c).unwrap();
        let params: Vec<usize> = s.rows.iter().filter(|r| r.learner == Learner::Ml).map(|r| r.parameters).collect();
        assert!(params.windows(2).all(|w| w[0] < w[1]));
        assert!(k_sweep(&spec, Family::KBand, &[7], &c).is_err());
    }

    #[test]
    fn matched_k_for_box() {
        let schema = Arc::new(SyntheticSpectraSpec::default().schema());
        let band = kband_structure(Arc::clone(&schema), 3).unwrap().parameter_count();
        let k = matched_k(Arc::clone(&schema), Family::KBox, band).unwrap();
        assert_eq!(k, 5);
        assert_eq!(matched_k(schema, Family::KBox, 0).unwrap(), 1);
    }
}
