use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mlspl::dataio::{load_arff, load_csv, Dataset, LabelSpec};
use mlspl::{SchemeKind, TrainConfig};

pub const SCHEMES: [&str; 4] = ["arctan", "sigmoid", "tanh", "exponential"];

#[derive(Debug, Parser)]
#[command(name = "mlspl", version, about = "Multi-label self-paced learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write a checkpoint plus manifest.
    Train(TrainArgs),
    /// Score a dataset with a saved checkpoint.
    Evaluate(EvaluateArgs),
    /// Repeated random-split benchmark with mean ± std table.
    Benchmark(BenchmarkArgs),
    /// Benchmark every self-paced scheme on the same splits.
    SchemeCompare(BenchmarkArgs),
    /// Check the closed-form properties of every self-paced scheme.
    VerifySchemes(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DataFormat {
    Arff,
    Csv,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// ARFF file, or the feature CSV with --format csv.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Defaults to the dataset's file extension.
    #[arg(long, value_enum)]
    pub format: Option<DataFormat>,
    /// ARFF: label count K (last K attributes), comma-separated names or a
    /// MULAN .xml file. CSV: path of the label CSV.
    #[arg(long)]
    pub labels: String,
}

impl DataArgs {
    pub fn resolved_format(&self) -> Result<DataFormat> {
        if let Some(f) = self.format {
            return Ok(f);
        }
        match self.dataset.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("arff") => Ok(DataFormat::Arff),
            Some(e) if e.eq_ignore_ascii_case("csv") => Ok(DataFormat::Csv),
            _ => bail!("cannot infer the format of {}; pass --format", self.dataset.display()),
        }
    }

    pub fn load(&self) -> Result<Dataset> {
        let ds = match self.resolved_format()? {
            DataFormat::Arff => {
                let spec = if self.labels.ends_with(".xml") { LabelSpec::from_mulan_xml(&self.labels)? } else { self.labels.parse()? };
                load_arff(&self.dataset, &spec)
            }
            DataFormat::Csv => load_csv(&self.dataset, &self.labels),
        };
        ds.with_context(|| format!("loading {}", self.dataset.display()))
    }

    /// Files whose bytes identify the dataset.
    pub fn source_files(&self) -> Vec<PathBuf> {
        let mut files = vec![self.dataset.clone()];
        let labels = Path::new(&self.labels);
        if labels.is_file() {
            files.push(labels.to_path_buf());
        }
        files
    }
}

#[derive(Debug, Default, Args)]
pub struct ConfigArgs {
    /// TOML file with training settings; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = SCHEMES)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Number of label clusters.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub lambda0: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub no_standardize: bool,
}

impl ConfigArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => TrainConfig::default(),
        };
        if let Some(s) = &self.scheme {
            cfg.scheme = s.parse::<SchemeKind>()?;
        }
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = self.$field { cfg.$field = v; })* };
        }
        set!(alpha, beta, m, lambda0, mu, max_outer, seed);
        if self.no_standardize {
            cfg.standardize = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Fraction of instances used for training in each repeat.
    #[arg(long, default_value_t = 0.3)]
    pub train_fraction: f64,
    /// Also run the independent-binary and mllocc-equivalent baselines.
    #[arg(long)]
    pub baselines: bool,
    /// Select λ₀ and μ per repeat on a 20% holdout of the training split.
    #[arg(long)]
    pub grid: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Verify a deliberately broken scheme (negated regularizer).
    #[arg(long, hide = true)]
    pub corrupt: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
