use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use cgn::dataset::{load_csv, read_csv_header, CsvSchema};
use cgn::experiment::{
    emit_report, generate_spectra, run_experiment, sweep_runs, ExperimentConfig, Family, Report, SweepReport,
    SyntheticSpectraSpec,
};
use cgn::model::{is_acceptable, validate_structure, CgnStructure};
use cgn::search::{kband_structure, kbox_structure};
use cgn::{CgnError, Result};

#[derive(Parser)]
#[command(name = "cgn", version, about = "Conditional Gaussian network classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Repeated cross validation of ML and BA classifiers.
    Run(ConfigArgs),
    /// k-BOX / k-BAND parameter sweep on synthetic spectra.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        spectra: SpectraArgs,
        /// Structure families to sweep.
        #[arg(long, value_delimiter = ',', default_value = "kbox,kband")]
        family: Vec<Family>,
        /// Values of k.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,5,8,12")]
        k: Vec<usize>,
    },
    /// Write synthetic spectra as CSV.
    GenSpectra {
        #[command(flatten)]
        spectra: SpectraArgs,
        #[arg(long)]
        output: PathBuf,
    },
    /// Check a structure and report acceptability on a dataset.
    Validate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "class")]
        class: String,
        #[arg(long, value_delimiter = ',')]
        discrete: Vec<String>,
        /// Structure file, or `naive`, `kbox:K`, `kband:K`.
        #[arg(long)]
        structure: String,
    },
}

/// Configuration file plus per-field overrides.
#[derive(Args)]
struct ConfigArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set seed=3` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    class: Option<String>,
    #[arg(long)]
    discrete: Option<String>,
    #[arg(long)]
    structure: Option<String>,
    #[arg(long)]
    repetitions: Option<String>,
    #[arg(long)]
    folds: Option<String>,
    #[arg(long)]
    train_fraction: Option<String>,
    #[arg(long)]
    learners: Option<String>,
    #[arg(long)]
    dirichlet_pseudocount: Option<String>,
    #[arg(long)]
    rho_base: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    wrapper_folds: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("dataset", &self.dataset),
            ("class", &self.class),
            ("discrete", &self.discrete),
            ("structure", &self.structure),
            ("repetitions", &self.repetitions),
            ("folds", &self.folds),
            ("train_fraction", &self.train_fraction),
            ("learners", &self.learners),
            ("dirichlet_pseudocount", &self.dirichlet_pseudocount),
            ("rho_base", &self.rho_base),
            ("seed", &self.seed),
            ("output", &self.output),
            ("wrapper_folds", &self.wrapper_folds),
            ("alpha", &self.alpha),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CgnError::Contract(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SpectraArgs {
    #[arg(long, default_value_t = 40)]
    n_vars: usize,
    #[arg(long, default_value_t = 30)]
    n_per_class: usize,
    #[arg(long, default_value_t = 2)]
    n_classes: usize,
    #[arg(long, default_value_t = 3)]
    band_width: usize,
    #[arg(long, default_value_t = 0.3)]
    separation: f64,
    #[arg(long, default_value_t = 1)]
    spectra_seed: u64,
}

impl SpectraArgs {
    fn spec(&self) -> SyntheticSpectraSpec {
        SyntheticSpectraSpec {
            n_vars: self.n_vars,
            n_per_class: self.n_per_class,
            n_classes: self.n_classes,
            band_width: self.band_width,
            separation: self.separation,
            seed: self.spectra_seed,
        }
    }
}

fn publish(report: &impl Report, output: Option<&PathBuf>) -> Result<()> {
    print!("{}", report.summary_text());
    if let Some(path) = output {
        let summary = emit_report(report, path)?;
        println!("wrote {} and {}", path.display(), summary.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let report = run_experiment(&cfg)?;
            publish(&report, cfg.output.as_ref())?;
        }
        Command::Sweep {
            config,
            spectra,
            family,
            k,
        } => {
            let cfg = config.resolve()?;
            let data = generate_spectra(&spectra.spec())?;
            let mut runs = Vec::new();
            for f in family {
                runs.extend(sweep_runs(&data, f, &k, &cfg)?);
            }
            publish(&SweepReport::from_runs(&runs), cfg.output.as_ref())?;
        }
        Command::GenSpectra { spectra, output } => {
            let data = generate_spectra(&spectra.spec())?;
            data.write_csv(&output)?;
            println!("wrote {} rows to {}", data.len(), output.display());
        }
        Command::Validate {
            dataset,
            class,
            discrete,
            structure,
        } => {
            let header = read_csv_header(&dataset)?;
            let data = load_csv(&dataset, &CsvSchema::from_header(&header, &class, &discrete))?;
            let schema = Arc::clone(data.schema_arc());
            let s = match structure.as_str() {
                "naive" => CgnStructure::naive_bayes(Arc::clone(&schema), &schema.continuous()),
                other => match other.split_once(':') {
                    Some(("kbox", k)) => kbox_structure(schema, parse_k(k)?)?,
                    Some(("kband", k)) => kband_structure(schema, parse_k(k)?)?,
                    _ => {
                        let text = std::fs::read_to_string(other).map_err(|e| CgnError::Io {
                            path: other.into(),
                            source: e,
                        })?;
                        CgnStructure::from_text(&text, schema)?
                    }
                },
            };
            if let Err(violations) = validate_structure(&s) {
                for v in &violations {
                    println!("structure: {v}");
                }
                return Err(CgnError::InvalidStructure(violations));
            }
            println!("structure: ok ({} parameters)", s.parameter_count());
            let report = is_acceptable(&s, &data);
            println!("acceptability: {report}");
            if !report.acceptable() {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_k(k: &str) -> Result<usize> {
    k.trim()
        .parse()
        .map_err(|_| CgnError::Contract(format!("bad k `{k}`")))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
