//! Class posteriors for the ML and Bayesian-averaged back ends, the argmax
//! decision rule and accuracy / conditional log-likelihood metrics.

use crate::bayes::DhdnigParams;
use crate::dataset::{Dataset, Instance, Value};
use crate::distributions::log_sum_exp;
use crate::error::{CgnError, Result};
use crate::model::CgnModel;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassPosterior {
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
}

impl ClassPosterior {
    /// Normalizes unnormalized log scores with log-sum-exp.
    pub fn from_log_scores(scores: &[f64]) -> Result<Self> {
        if scores.is_empty() || scores.iter().any(|s| s.is_nan() || *s == f64::INFINITY) {
            return Err(CgnError::Domain(format!("invalid class scores {scores:?}")));
        }
        let norm = log_sum_exp(scores);
        if !norm.is_finite() {
            return Err(CgnError::Domain("every class has zero probability".into()));
        }
        let log_probs: Vec<f64> = scores.iter().map(|s| s - norm).collect();
        let probs: Vec<f64> = log_probs.iter().map(|l| l.exp()).collect();
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-12, "unnormalized {probs:?}");
        Ok(Self { probs, log_probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Either fitted back end, viewed as a classifier.
#[derive(Debug, Clone)]
pub enum Classifier {
    Ml(CgnModel),
    Ba(DhdnigParams),
}

impl Classifier {
    pub fn posterior(&self, evidence: &Instance) -> Result<ClassPosterior> {
        match self {
            Classifier::Ml(m) => class_posterior_ml(m, evidence),
            Classifier::Ba(psi) => class_posterior_ba(psi, evidence),
        }
    }

    /// Posteriors for every row of `data`, in row order.
    pub fn posteriors(&self, data: &Dataset) -> Result<Vec<ClassPosterior>> {
        data.rows().iter().map(|x| self.posterior(x)).collect()
    }
}

fn class_scores(
    class: usize,
    cardinality: usize,
    evidence: &Instance,
    score: impl Fn(&Instance) -> f64,
) -> Vec<f64> {
    let mut x = evidence.clone();
    (0..cardinality)
        .map(|c| {
            x.set(class, Value::Discrete(c));
            score(&x)
        })
        .collect()
}

fn check_evidence(schema: &crate::dataset::Schema, evidence: &Instance) -> Result<()> {
    let mut x = evidence.clone();
    x.set(schema.class_index(), Value::Discrete(0));
    x.check(schema)
}

/// `p(c | x₋c, Θ)` from the ML model. The class entry of `evidence` is ignored.
pub fn class_posterior_ml(m: &CgnModel, evidence: &Instance) -> Result<ClassPosterior> {
    let schema = m.structure.schema();
    check_evidence(schema, evidence)?;
    let scores = class_scores(schema.class_index(), schema.class_cardinality(), evidence, |x| {
        m.structure.nodes().map(|v| m.node_logdensity(v, x)).sum()
    });
    ClassPosterior::from_log_scores(&scores)
}

/// `p(c | x₋c, Ψ')` from posterior hyperparameters. The class entry of
/// `evidence` is ignored.
pub fn class_posterior_ba(psi: &DhdnigParams, evidence: &Instance) -> Result<ClassPosterior> {
    let schema = psi.structure.schema();
    check_evidence(schema, evidence)?;
    let scores = class_scores(schema.class_index(), schema.class_cardinality(), evidence, |x| {
        psi.logdensity_unchecked(x)
    });
    ClassPosterior::from_log_scores(&scores)
}

/// Most probable class; ties go to the lowest index.
pub fn predict(p: &ClassPosterior) -> usize {
    let mut best = 0;
    for (c, lp) in p.log_probs.iter().enumerate() {
        if *lp > p.log_probs[best] {
            best = c;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMetrics {
    pub accuracy: f64,
    /// Sum over instances of `ln p(true class | x)`.
    pub cll: f64,
    pub n: usize,
}

impl EvalMetrics {
    /// CLL per instance.
    pub fn mean_cll(&self) -> f64 {
        self.cll / self.n as f64
    }
}

pub fn evaluate(posteriors: &[ClassPosterior], truth: &[usize]) -> Result<EvalMetrics> {
    if posteriors.len() != truth.len() {
        return Err(CgnError::Contract(format!(
            "{} posteriors for {} labels",
            posteriors.len(),
            truth.len()
        )));
    }
    if posteriors.is_empty() {
        return Err(CgnError::Contract("nothing to evaluate".into()));
    }
    let mut correct = 0usize;
    let mut cll = 0.0;
    for (p, &t) in posteriors.iter().zip(truth) {
        if t >= p.len() {
            return Err(CgnError::Contract(format!("label {t} out of range")));
        }
        if predict(p) == t {
            correct += 1;
        }
        cll += p.log_probs[t];
    }
    Ok(EvalMetrics {
        accuracy: correct as f64 / truth.len() as f64,
        cll,
        n: truth.len(),
    })
}
