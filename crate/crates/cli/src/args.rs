use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tricomp_core::{Error, GaussianSpec, ModelKind, Result, SurrogateLoss};

/// Environment variable read for `--seed` when the flag is absent.
pub const SEED_ENV: &str = "TRICOMP_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "tricomp",
    version,
    about = "Train and evaluate binary classifiers from triplet comparisons"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a triplet file from a labeled source.
    Gen(GenArgs),
    /// Estimate the class prior from a triplet file.
    EstimatePrior(EstimateArgs),
    /// Train a classifier on a triplet file.
    Train(TrainArgs),
    /// Score a trained model on a labeled CSV.
    Eval(EvalArgs),
    /// Tabulate the bound coefficient over a grid of priors.
    BoundCurve(BoundCurveArgs),
    /// Evaluate the estimation error bound.
    Bound(BoundArgs),
    /// Run a multi-trial experiment and print a results table.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args, Serialize)]
#[group(id = "source", required = true, multiple = false)]
pub struct SourceArgs {
    /// Gaussian pair as "MU_PLUS;MU_MINUS;SIGMA", e.g. "1,1;-1,-1;1.0".
    #[arg(long, group = "source")]
    pub gaussian: Option<String>,
    /// Labeled CSV (last column is the +1/-1 or 1/0 label).
    #[arg(long, group = "source")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Positive class prior. Required with --gaussian; with --input, draws
    /// labels at this rate instead of the file's own.
    #[arg(long)]
    pub prior: Option<f64>,
    /// Number of triplets.
    #[arg(long)]
    pub triplets: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// Output JSON-lines triplet file.
    #[arg(long)]
    pub out: PathBuf,
    /// Draw each CSV row at most once.
    #[arg(long)]
    pub without_replacement: bool,
    /// Also write a labeled test CSV that never enters triplet generation.
    #[arg(long)]
    pub test_out: Option<PathBuf>,
    /// Test size (default 1000, or min(1000, 20% of the rows) for --input).
    #[arg(long)]
    pub test_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// JSON-lines triplet file.
    #[arg(long)]
    pub triplets: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, default_value = "double-hinge", value_parser = parse_loss)]
    pub loss: SurrogateLoss,
    #[arg(long, default_value = "linear", value_parser = parse_model)]
    pub model: ModelKind,
    #[arg(long, default_value_t = 100)]
    pub hidden: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long = "lr", default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Points per bag per step; 0 trains full batch.
    #[arg(long, default_value_t = 0)]
    pub batch_size: usize,
    /// Guard band half-width around a prior of 0.5.
    #[arg(long, default_value_t = 0.005)]
    pub guard: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    /// Use plain gradient descent instead of Adam.
    #[arg(long)]
    pub gd: bool,
    /// Minimize |R+| + |R-| instead of the signed risk.
    #[arg(long)]
    pub floor_risk: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// JSON-lines triplet file.
    #[arg(long)]
    pub triplets: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// Known class prior; estimated from the keep/flip counts when absent.
    #[arg(long)]
    pub prior: Option<f64>,
    /// Test-time class prior, for class-prior shift.
    #[arg(long)]
    pub pi_test: Option<f64>,
    /// Output model JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Labeled CSV.
    #[arg(long)]
    pub test: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BoundCurveArgs {
    #[arg(long)]
    pub from: f64,
    #[arg(long)]
    pub to: f64,
    #[arg(long)]
    pub step: f64,
    /// Fixed test prior; defaults to the grid prior.
    #[arg(long)]
    pub pi_test: Option<f64>,
    #[arg(long, default_value_t = 0.005)]
    pub guard: f64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub prior: f64,
    #[arg(long)]
    pub pi_test: Option<f64>,
    /// Sample count (number of triplets).
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Model-class complexity constant.
    #[arg(long, default_value_t = 1.0)]
    pub c_f: f64,
    /// Derive rho and the loss ceiling from this loss and --c-b.
    #[arg(long, value_parser = parse_loss, requires = "c_b")]
    pub loss: Option<SurrogateLoss>,
    /// Bound on |f(x)| over the model class.
    #[arg(long)]
    pub c_b: Option<f64>,
    #[arg(long, conflicts_with = "loss")]
    pub rho: Option<f64>,
    #[arg(long, conflicts_with = "loss")]
    pub c_ell: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value_t = 0.7)]
    pub prior: f64,
    /// Comma-separated triplet counts.
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    pub triplets: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Comma-separated methods: squared, double-hinge, logistic, kmeans.
    #[arg(long, value_delimiter = ',', default_value = "squared,double-hinge,kmeans")]
    pub methods: Vec<String>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Train with the true prior instead of estimating it.
    #[arg(long)]
    pub known_prior: bool,
    #[arg(long)]
    pub test_size: Option<usize>,
    /// Keep raw CSV feature scales.
    #[arg(long)]
    pub no_standardize: bool,
    /// Drop trials whose estimated prior is singular instead of failing.
    #[arg(long)]
    pub skip_singular: bool,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

fn parse_loss(s: &str) -> std::result::Result<SurrogateLoss, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_vector(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("invalid number {v:?} in Gaussian spec")))
        })
        .collect()
}

/// Parses "MU_PLUS;MU_MINUS;SIGMA" into a spec with the given prior.
pub fn parse_gaussian(spec: &str, pi_plus: f64) -> Result<GaussianSpec> {
    let parts: Vec<&str> = spec.split(';').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "Gaussian spec {spec:?} must look like \"1,1;-1,-1;1.0\""
        )));
    }
    let sigma = parts[2]
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("invalid sigma {:?}", parts[2])))?;
    GaussianSpec::new(parse_vector(parts[0])?, parse_vector(parts[1])?, sigma, pi_plus)
}
