//! `key = value` experiment configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bayes::PriorConfig;
use crate::error::{CgnError, Result};
use crate::search::Generator;

/// Where a fold's structure comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum StructureSource {
    /// Structure text file.
    Fixed(PathBuf),
    /// Class plus every continuous attribute as a child of the class.
    NaiveBayes,
    Wrapper(Generator),
    KBox(usize),
    KBand(usize),
}

impl FromStr for StructureSource {
    type Err = CgnError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || CgnError::Contract(format!("unknown structure source `{s}`"));
        let parse_k = |k: &str| k.trim().parse::<usize>().map_err(|_| bad());
        match s.trim() {
            "naive" => Ok(StructureSource::NaiveBayes),
            "fw" | "bw" | "wc" => Ok(StructureSource::Wrapper(s.trim().parse()?)),
            other => match other.split_once(':') {
                Some(("file", path)) => Ok(StructureSource::Fixed(PathBuf::from(path.trim()))),
                Some(("kbox", k)) => Ok(StructureSource::KBox(parse_k(k)?)),
                Some(("kband", k)) => Ok(StructureSource::KBand(parse_k(k)?)),
                _ => Err(bad()),
            },
        }
    }
}

impl fmt::Display for StructureSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StructureSource::Fixed(p) => write!(f, "file:{}", p.display()),
            StructureSource::NaiveBayes => write!(f, "naive"),
            StructureSource::Wrapper(g) => write!(f, "{}", g.name()),
            StructureSource::KBox(k) => write!(f, "kbox:{k}"),
            StructureSource::KBand(k) => write!(f, "kband:{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Learner {
    Ml,
    Ba,
}

impl Learner {
    pub fn name(self) -> &'static str {
        match self {
            Learner::Ml => "ML",
            Learner::Ba => "BA",
        }
    }
}

impl FromStr for Learner {
    type Err = CgnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ML" => Ok(Learner::Ml),
            "BA" => Ok(Learner::Ba),
            _ => Err(CgnError::Contract(format!("unknown learner `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    /// Name of the class column.
    pub class: String,
    /// Non-class columns read as categorical.
    pub discrete: Vec<String>,
    pub structure: StructureSource,
    pub repetitions: usize,
    pub folds: usize,
    /// Fraction of each training split kept for learning.
    pub train_fraction: f64,
    pub learners: Vec<Learner>,
    pub prior: PriorConfig,
    pub seed: u64,
    pub output: Option<PathBuf>,
    /// Inner cross-validation folds of the wrapper search.
    pub wrapper_folds: usize,
    pub alpha: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            class: "class".into(),
            discrete: Vec::new(),
            structure: StructureSource::NaiveBayes,
            repetitions: 10,
            folds: 10,
            train_fraction: 1.0,
            learners: vec![Learner::Ml, Learner::Ba],
            prior: PriorConfig::default(),
            seed: 0,
            output: None,
            wrapper_folds: 10,
            alpha: 0.05,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "dataset",
    "class",
    "discrete",
    "structure",
    "repetitions",
    "folds",
    "train_fraction",
    "learners",
    "dirichlet_pseudocount",
    "rho_base",
    "seed",
    "output",
    "wrapper_folds",
    "alpha",
];

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| CgnError::Contract(format!("bad value `{value}` for `{key}`")))
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

impl ExperimentConfig {
    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "dataset" => self.dataset = PathBuf::from(value),
            "class" => self.class = value.to_string(),
            "discrete" => self.discrete = list(value),
            "structure" => self.structure = value.parse()?,
            "repetitions" => self.repetitions = parse_num(key, value)?,
            "folds" => self.folds = parse_num(key, value)?,
            "train_fraction" => self.train_fraction = parse_num(key, value)?,
            "learners" => {
                self.learners = list(value).iter().map(|s| s.parse()).collect::<Result<_>>()?;
                self.learners.sort();
                self.learners.dedup();
            }
            "dirichlet_pseudocount" => self.prior.dirichlet_pseudocount = parse_num(key, value)?,
            "rho_base" => self.prior.rho_base = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "output" => self.output = (!value.is_empty()).then(|| PathBuf::from(value)),
            "wrapper_folds" => self.wrapper_folds = parse_num(key, value)?,
            "alpha" => self.alpha = parse_num(key, value)?,
            other => return Err(CgnError::Contract(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of the defaults. `#` starts a
    /// comment; blank lines are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CgnError::Parse {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            cfg.set(key, value).map_err(|e| CgnError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CgnError::io(path, e))?;
        Self::from_text(&text)
    }

    /// The configuration as `key = value` lines, readable by [`Self::from_text`].
    pub fn to_text(&self) -> String {
        let learners: Vec<&str> = self.learners.iter().map(|l| l.name()).collect();
        let mut out = String::new();
        let mut put = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        put("dataset", self.dataset.display().to_string());
        put("class", self.class.clone());
        put("discrete", self.discrete.join(","));
        put("structure", self.structure.to_string());
        put("repetitions", self.repetitions.to_string());
        put("folds", self.folds.to_string());
        put("train_fraction", format!("{:?}", self.train_fraction));
        put("learners", learners.join(","));
        put("dirichlet_pseudocount", format!("{:?}", self.prior.dirichlet_pseudocount));
        put("rho_base", format!("{:?}", self.prior.rho_base));
        put("seed", self.seed.to_string());
        put(
            "output",
            self.output.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        );
        put("wrapper_folds", self.wrapper_folds.to_string());
        put("alpha", format!("{:?}", self.alpha));
        out
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(CgnError::Contract(m));
        if self.repetitions < 1 {
            return fail("repetitions must be at least 1".into());
        }
        if self.folds < 2 {
            return fail(format!("folds must be at least 2, got {}", self.folds));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return fail(format!("train_fraction must lie in (0, 1], got {}", self.train_fraction));
        }
        if self.learners.is_empty() {
            return fail("no learners configured".into());
        }
        if self.wrapper_folds < 2 {
            return fail(format!("wrapper_folds must be at least 2, got {}", self.wrapper_folds));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if let StructureSource::KBox(0) | StructureSource::KBand(0) = self.structure {
            return fail("k must be at least 1".into());
        }
        self.prior.validate()
    }
}
