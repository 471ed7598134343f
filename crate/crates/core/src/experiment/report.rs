//! Experiment and sweep reports: CSV tables with stable column order, a
//! plain-text summary, and parsers that rebuild a report from its table.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::Learner;
use super::mwu::{mann_whitney_u, MwuResult, Verdict};
use crate::error::{CgnError, Result};

pub const FOLD_HEADER: &str = "learner,repetition,fold,status,n_train,n_test,parameters,accuracy,cll,mean_cll";
pub const SWEEP_HEADER: &str =
    "family,k,parameters,learner,folds_defined,folds_undefined,mean_accuracy,sd_accuracy,mean_cll,sd_cll";

/// Accuracy and summed CLL of one learner on one test fold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldScore {
    pub accuracy: f64,
    pub cll: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldRecord {
    pub learner: Learner,
    pub repetition: usize,
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub parameters: usize,
    /// `None` when the learner is undefined on this fold.
    pub score: Option<FoldScore>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    /// Mean and sample standard deviation (0 for a single value).
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Self { mean, sd })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerSummary {
    pub learner: Learner,
    pub defined: usize,
    pub undefined: usize,
    pub accuracy: Option<MeanSd>,
    pub cll: Option<MeanSd>,
    /// Total CLL over total test instances; a derived per-instance figure.
    pub cll_per_instance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    Cll,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Cll => "cll",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSummary {
    pub metric: Metric,
    /// Folds on which both learners are defined.
    pub paired_folds: usize,
    pub mean_ba: f64,
    pub mean_ml: f64,
    /// BA is sample `a`, ML sample `b`.
    pub test: MwuResult,
}

impl TestSummary {
    pub fn verdict_label(&self) -> &'static str {
        verdict_label(self.test.verdict)
    }
}

pub fn verdict_label(v: Verdict) -> &'static str {
    match v {
        Verdict::AWins => "BA-wins",
        Verdict::BWins => "ML-wins",
        Verdict::Tie => "tie",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub folds: Vec<FoldRecord>,
    pub alpha: f64,
    pub learners: Vec<LearnerSummary>,
    pub tests: Vec<TestSummary>,
}

impl ExperimentReport {
    /// Aggregates and tests from fold records. Tests use only folds where
    /// both learners are defined.
    pub fn from_folds(folds: Vec<FoldRecord>, alpha: f64) -> Result<Self> {
        let mut present: Vec<Learner> = folds.iter().map(|f| f.learner).collect();
        present.sort();
        present.dedup();
        if present.is_empty() {
            return Err(CgnError::Experiment("report has no learners".into()));
        }
        let learners = present
            .iter()
            .map(|&l| {
                let own: Vec<&FoldRecord> = folds.iter().filter(|f| f.learner == l).collect();
                let scored: Vec<(FoldScore, usize)> =
                    own.iter().filter_map(|f| f.score.map(|s| (s, f.n_test))).collect();
                let acc: Vec<f64> = scored.iter().map(|(s, _)| s.accuracy).collect();
                let cll: Vec<f64> = scored.iter().map(|(s, _)| s.cll).collect();
                let n_total: usize = scored.iter().map(|(_, n)| n).sum();
                LearnerSummary {
                    learner: l,
                    defined: scored.len(),
                    undefined: own.len() - scored.len(),
                    accuracy: MeanSd::of(&acc),
                    cll: MeanSd::of(&cll),
                    cll_per_instance: (n_total > 0).then(|| cll.iter().sum::<f64>() / n_total as f64),
                }
            })
            .collect();

        let mut tests = Vec::new();
        if present == [Learner::Ml, Learner::Ba] {
            let key = |f: &FoldRecord| (f.repetition, f.fold);
            let mut pairs: Vec<(FoldScore, FoldScore)> = Vec::new();
            for ba in folds.iter().filter(|f| f.learner == Learner::Ba) {
                let ml = folds.iter().find(|f| f.learner == Learner::Ml && key(f) == key(ba));
                if let (Some(b), Some(Some(m))) = (ba.score, ml.map(|m| m.score)) {
                    pairs.push((b, m));
                }
            }
            if !pairs.is_empty() {
                for metric in [Metric::Accuracy, Metric::Cll] {
                    let pick = |s: &FoldScore| match metric {
                        Metric::Accuracy => s.accuracy,
                        Metric::Cll => s.cll,
                    };
                    let a: Vec<f64> = pairs.iter().map(|(b, _)| pick(b)).collect();
                    let b: Vec<f64> = pairs.iter().map(|(_, m)| pick(m)).collect();
                    tests.push(TestSummary {
                        metric,
                        paired_folds: pairs.len(),
                        mean_ba: a.iter().sum::<f64>() / a.len() as f64,
                        mean_ml: b.iter().sum::<f64>() / b.len() as f64,
                        test: mann_whitney_u(&a, &b, alpha)?,
                    });
                }
            }
        }
        Ok(Self {
            folds,
            alpha,
            learners,
            tests,
        })
    }

    pub fn learner(&self, l: Learner) -> Option<&LearnerSummary> {
        self.learners.iter().find(|s| s.learner == l)
    }

    pub fn test(&self, metric: Metric) -> Option<&TestSummary> {
        self.tests.iter().find(|t| t.metric == metric)
    }

    /// Per-fold scores of one learner, in (repetition, fold) order.
    pub fn scores(&self, l: Learner) -> Vec<Option<FoldScore>> {
        self.folds.iter().filter(|f| f.learner == l).map(|f| f.score).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{FOLD_HEADER}\n");
        for f in &self.folds {
            let (status, acc, cll, mean) = match f.score {
                Some(s) => (
                    "ok",
                    format!("{:?}", s.accuracy),
                    format!("{:?}", s.cll),
                    format!("{:?}", s.cll / f.n_test as f64),
                ),
                None => ("undefined", String::new(), String::new(), String::new()),
            };
            let _ = writeln!(
                out,
                "{},{},{},{status},{},{},{},{acc},{cll},{mean}",
                f.learner.name(),
                f.repetition,
                f.fold,
                f.n_train,
                f.n_test,
                f.parameters
            );
        }
        out
    }

    /// Rebuilds a report from [`Self::to_csv`] output.
    pub fn from_csv(text: &str, alpha: f64) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        expect_header(lines.next(), FOLD_HEADER)?;
        let mut folds = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let line_no = i + 1;
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 10 {
                return Err(parse_err(line_no, format!("expected 10 fields, got {}", cells.len())));
            }
            let int = |k: usize| -> Result<usize> {
                cells[k]
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("bad integer `{}`", cells[k])))
            };
            let real = |k: usize| -> Result<f64> {
                cells[k]
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("bad number `{}`", cells[k])))
            };
            let score = match cells[3] {
                "ok" => Some(FoldScore {
                    accuracy: real(7)?,
                    cll: real(8)?,
                }),
                "undefined" => None,
                other => return Err(parse_err(line_no, format!("bad status `{other}`"))),
            };
            folds.push(FoldRecord {
                learner: cells[0].parse().map_err(|e: CgnError| parse_err(line_no, e.to_string()))?,
                repetition: int(1)?,
                fold: int(2)?,
                n_train: int(4)?,
                n_test: int(5)?,
                parameters: int(6)?,
                score,
            });
        }
        Self::from_folds(folds, alpha)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let reps = self.folds.iter().map(|f| f.repetition + 1).max().unwrap_or(0);
        let per_rep = self.folds.iter().map(|f| f.fold + 1).max().unwrap_or(0);
        let _ = writeln!(out, "cross validation: {reps} repetitions x {per_rep} folds");
        for s in &self.learners {
            let _ = writeln!(out, "{}: {} folds defined, {} undefined", s.learner.name(), s.defined, s.undefined);
            if let (Some(a), Some(c), Some(ci)) = (s.accuracy, s.cll, s.cll_per_instance) {
                let _ = writeln!(out, "  accuracy        {:.4} +- {:.4}", a.mean, a.sd);
                let _ = writeln!(out, "  cll (fold sum)  {:.4} +- {:.4}", c.mean, c.sd);
                let _ = writeln!(out, "  cll / instance  {ci:.4} (derived)");
            }
        }
        if !self.tests.is_empty() {
            let _ = writeln!(
                out,
                "Mann-Whitney U, BA vs ML over the per-fold scores (unpaired rank test on paired folds), two-sided, alpha = {}",
                self.alpha
            );
            for t in &self.tests {
                let _ = writeln!(
                    out,
                    "  {:<8} folds={} mean BA={:.4} ML={:.4} {} -> {}",
                    t.metric.name(),
                    t.paired_folds,
                    t.mean_ba,
                    t.mean_ml,
                    t.test,
                    t.verdict_label()
                );
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub family: String,
    pub k: usize,
    pub parameters: usize,
    pub learner: Learner,
    pub defined: usize,
    pub undefined: usize,
    pub accuracy: Option<MeanSd>,
    pub cll: Option<MeanSd>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn row(&self, family: &str, k: usize, learner: Learner) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.family == family && r.k == k && r.learner == learner)
    }

    pub fn to_csv(&self) -> String {
        let opt = |m: Option<MeanSd>| match m {
            Some(m) => (format!("{:?}", m.mean), format!("{:?}", m.sd)),
            None => (String::new(), String::new()),
        };
        let mut out = format!("{SWEEP_HEADER}\n");
        for r in &self.rows {
            let (am, asd) = opt(r.accuracy);
            let (cm, csd) = opt(r.cll);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{am},{asd},{cm},{csd}",
                r.family,
                r.k,
                r.parameters,
                r.learner.name(),
                r.defined,
                r.undefined
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        expect_header(lines.next(), SWEEP_HEADER)?;
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let line_no = i + 1;
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 10 {
                return Err(parse_err(line_no, format!("expected 10 fields, got {}", cells.len())));
            }
            let int = |k: usize| -> Result<usize> {
                cells[k]
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("bad integer `{}`", cells[k])))
            };
            let pair = |k: usize| -> Result<Option<MeanSd>> {
                if cells[k].is_empty() && cells[k + 1].is_empty() {
                    return Ok(None);
                }
                let num = |j: usize| -> Result<f64> {
                    cells[j]
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad number `{}`", cells[j])))
                };
                Ok(Some(MeanSd {
                    mean: num(k)?,
                    sd: num(k + 1)?,
                }))
            };
            rows.push(SweepRow {
                family: cells[0].to_string(),
                k: int(1)?,
                parameters: int(2)?,
                learner: cells[3].parse().map_err(|e: CgnError| parse_err(line_no, e.to_string()))?,
                defined: int(4)?,
                undefined: int(5)?,
                accuracy: pair(6)?,
                cll: pair(8)?,
            });
        }
        Ok(Self { rows })
    }

    pub fn summary(&self) -> String {
        let mut out = String::from("family  k  parameters  learner  folds  accuracy          cll\n");
        for r in &self.rows {
            let fmt = |m: Option<MeanSd>| match m {
                Some(m) => format!("{:.4} +- {:.4}", m.mean, m.sd),
                None => "undefined".to_string(),
            };
            let _ = writeln!(
                out,
                "{:<6} {:>3} {:>10}  {:<7} {:>3}/{:<3} {:<17} {}",
                r.family,
                r.k,
                r.parameters,
                r.learner.name(),
                r.defined,
                r.defined + r.undefined,
                fmt(r.accuracy),
                fmt(r.cll)
            );
        }
        out
    }
}

/// Anything [`emit_report`] can write.
pub trait Report {
    fn table(&self) -> String;
    fn summary_text(&self) -> String;
}

impl Report for ExperimentReport {
    fn table(&self) -> String {
        self.to_csv()
    }
    fn summary_text(&self) -> String {
        self.summary()
    }
}

impl Report for SweepReport {
    fn table(&self) -> String {
        self.to_csv()
    }
    fn summary_text(&self) -> String {
        self.summary()
    }
}

/// Path of the summary written next to a table.
pub fn summary_path(table: &Path) -> PathBuf {
    let mut name = table.file_stem().unwrap_or_default().to_os_string();
    name.push(".summary.txt");
    table.with_file_name(name)
}

/// Writes the table to `path` and the summary to [`summary_path`]`(path)`.
pub fn emit_report(r: &impl Report, path: &Path) -> Result<PathBuf> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CgnError::io(dir, e))?;
    }
    std::fs::write(path, r.table()).map_err(|e| CgnError::io(path, e))?;
    let summary = summary_path(path);
    std::fs::write(&summary, r.summary_text()).map_err(|e| CgnError::io(&summary, e))?;
    Ok(summary)
}

fn expect_header(line: Option<(usize, &str)>, header: &str) -> Result<()> {
    match line {
        Some((_, h)) if h.trim() == header => Ok(()),
        Some((_, h)) => Err(parse_err(1, format!("unexpected header `{h}`"))),
        None => Err(parse_err(1, "empty report".into())),
    }
}

fn parse_err(line: usize, message: String) -> CgnError {
    CgnError::Parse { line, message }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(learner: Learner, rep: usize, fold: usize, acc: f64, cll: f64) -> FoldRecord {
        FoldRecord {
            learner,
            repetition: rep,
            fold,
            n_train: 27,
            n_test: 3,
            parameters: 29,
            score: Some(FoldScore { accuracy: acc, cll }),
        }
    }

    fn sample() -> ExperimentReport {
        let mut folds = Vec::new();
        for f in 0..10 {
            folds.push(record(Learner::Ml, 0, f, 0.9 - 0.01 * f as f64, -3.0 - f as f64 / 7.0));
            folds.push(record(Learner::Ba, 0, f, 0.9, -1.0 - f as f64 / 11.0));
        }
        folds[4].score = None;
        ExperimentReport::from_folds(folds, 0.05).unwrap()
    }

    #[test]
    fn undefined_folds_are_excluded() {
        let r = sample();
        let ml = r.learner(Learner::Ml).unwrap();
        assert_eq!((ml.defined, ml.undefined), (9, 1));
        let t = r.test(Metric::Cll).unwrap();
        assert_eq!(t.paired_folds, 9);
        assert_eq!(t.verdict_label(), "BA-wins");
    }

    #[test]
    fn csv_round_trip() {
        let r = sample();
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 21);
        let back = ExperimentReport::from_csv(&csv, 0.05).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn sweep_round_trip() {
        let s = SweepReport {
            rows: vec![
                SweepRow {
                    family: "kband".into(),
                    k: 3,
                    parameters: 311,
                    learner: Learner::Ba,
                    defined: 50,
                    undefined: 0,
                    accuracy: Some(MeanSd { mean: 0.8, sd: 0.1 / 3.0 }),
                    cll: Some(MeanSd { mean: -2.5, sd: 0.7 }),
                },
                SweepRow {
                    family: "kbox".into(),
                    k: 40,
                    parameters: 1000,
                    learner: Learner::Ml,
                    defined: 0,
                    undefined: 50,
                    accuracy: None,
                    cll: None,
                },
            ],
        };
        assert_eq!(SweepReport::from_csv(&s.to_csv()).unwrap(), s);
    }

    #[test]
    fn emit_writes_both_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/report.csv");
        let summary = emit_report(&sample(), &path).unwrap();
        assert_eq!(summary, dir.path().join("nested/report.summary.txt"));
        assert!(std::fs::read_to_string(&summary).unwrap().contains("BA-wins"));
        assert_eq!(std::fs::read_to_string(&path).unwrap(), sample().to_csv());
    }

    #[test]
    fn bad_tables_rejected() {
        assert!(ExperimentReport::from_csv("", 0.05).is_err());
        assert!(ExperimentReport::from_csv("a,b\n", 0.05).is_err());
        let bad = format!("{FOLD_HEADER}\nML,0,0,ok,1,1,1,x,0,0\n");
        assert!(matches!(ExperimentReport::from_csv(&bad, 0.05), Err(CgnError::Parse { line: 2, .. })));
        assert!(ExperimentReport::from_folds(Vec::new(), 0.05).is_err());
    }
}
