use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tricomp_core::data::write_labeled_csv;
use tricomp_core::eval::{prior_grid, write_curve_csv};
use tricomp_core::experiment::{holdout_split, MAX_TEST_SIZE};
use tricomp_core::rng::tags;
use tricomp_core::{
    aggregate_pointwise, classification_accuracy, estimation_error_bound,
    experiment_run, generate_triplets, load_labeled_csv, load_triplets, sample_gaussian,
    save_triplets, BoundParams, DataSource, Error, ExperimentConfig, LabeledExample,
    Method, Model, Optimizer, PiTestRule, PoolSampling, PoolSource, PriorSource,
    Result, Seed, SurrogateLoss, TrainConfig, TripletDataset,
};

use crate::args::{
    parse_gaussian, BoundArgs, BoundCurveArgs, EstimateArgs, EvalArgs, ExperimentArgs, GenArgs,
    ModelArgs, SourceArgs, TrainArgs,
};

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".run.json");
    out.with_file_name(name)
}

#[derive(Serialize)]
struct RunRecord<'a, A: Serialize, R: Serialize> {
    command: &'a str,
    version: &'a str,
    args: &'a A,
    resolved: R,
}

/// Writes `<out>.run.json` with the arguments and every resolved setting.
fn record_run<A: Serialize, R: Serialize>(out: &Path, command: &str, args: &A, resolved: R) -> Result<()> {
    let record = RunRecord {
        command,
        version: env!("CARGO_PKG_VERSION"),
        args,
        resolved,
    };
    let mut json = serde_json::to_string_pretty(&record).expect("run record serializes");
    json.push('\n');
    write_file(&sidecar_path(out), json.as_bytes())
}

fn require_prior(prior: Option<f64>, context: &str) -> Result<f64> {
    prior.ok_or_else(|| Error::Config(format!("--prior is required {context}")))
}

fn default_test_size(pool: usize) -> usize {
    MAX_TEST_SIZE.min(pool / 5)
}

fn print_counts(data: &TripletDataset) -> Result<()> {
    let pi_t = data.estimate_pi_t()?;
    let pi_plus = data.estimate_prior()?;
    println!("n1: {}", data.n_keep());
    println!("n2: {}", data.n_flip());
    println!("pi_t_hat: {pi_t:.6}");
    println!("pi_plus_hat: {pi_plus:.6}");
    Ok(())
}

#[derive(Serialize)]
struct GenResolved {
    source: String,
    sampling: Option<PoolSampling>,
    pi_plus: Option<f64>,
    test_size: Option<usize>,
    n_keep: usize,
    n_flip: usize,
}

pub fn gen(args: GenArgs) -> Result<()> {
    let seed = Seed::new(args.seed);
    let (data, test, resolved) = match (&args.source.gaussian, &args.source.input) {
        (Some(spec), _) => {
            if args.without_replacement {
                return Err(Error::Config(
                    "--without-replacement applies to --input only".into(),
                ));
            }
            let pi = require_prior(args.prior, "with --gaussian")?;
            let spec = parse_gaussian(spec, pi)?;
            let data = generate_triplets(&spec, args.triplets, seed.child(tags::TRIPLETS))?;
            let test = match args.test_out {
                Some(_) => {
                    let n = args.test_size.unwrap_or(MAX_TEST_SIZE);
                    Some(sample_gaussian(&spec, n, seed.child(tags::TEST_SET))?)
                }
                None => None,
            };
            let resolved = GenResolved {
                source: "gaussian".into(),
                sampling: None,
                pi_plus: Some(pi),
                test_size: test.as_ref().map(Vec::len),
                n_keep: data.n_keep(),
                n_flip: data.n_flip(),
            };
            (data, test, resolved)
        }
        (None, Some(path)) => {
            let mut pool = load_labeled_csv(path)?;
            let mut test = None;
            if args.test_out.is_some() {
                let n = args.test_size.unwrap_or_else(|| default_test_size(pool.len()));
                let (train, held) = holdout_split(&pool, args.prior, n, seed.child(tags::SPLIT))?;
                pool = train;
                test = Some(held);
            }
            let sampling = match (args.without_replacement, args.prior) {
                (true, Some(_)) => {
                    return Err(Error::Config(
                        "--without-replacement and --prior cannot be combined".into(),
                    ))
                }
                (true, None) => PoolSampling::WithoutReplacement,
                (false, Some(p)) => PoolSampling::TargetPrior(p),
                (false, None) => PoolSampling::Uniform,
            };
            let source = PoolSource::new(pool, sampling, seed.child(tags::SPLIT))?;
            let data = generate_triplets(&source, args.triplets, seed.child(tags::TRIPLETS))?;
            let resolved = GenResolved {
                source: path.display().to_string(),
                sampling: Some(sampling),
                pi_plus: args.prior,
                test_size: test.as_ref().map(Vec::len),
                n_keep: data.n_keep(),
                n_flip: data.n_flip(),
            };
            (data, test, resolved)
        }
        (None, None) => unreachable!("clap requires a source"),
    };
    save_triplets(&args.out, &data)?;
    if let (Some(path), Some(test)) = (&args.test_out, &test) {
        write_labeled_csv(path, test)?;
    }
    record_run(&args.out, "gen", &args, resolved)?;
    print_counts(&data)
}

pub fn estimate_prior(args: EstimateArgs) -> Result<()> {
    let data = load_triplets(&args.triplets)?;
    print_counts(&data)
}

fn optimizer(m: &ModelArgs) -> Optimizer {
    if m.gd {
        Optimizer::GradientDescent
    } else {
        Optimizer::Adam {
            beta1: m.beta1,
            beta2: m.beta2,
            epsilon: m.epsilon,
        }
    }
}

fn train_config(m: &ModelArgs, seed: u64, prior: PriorSource, pi_test: Option<f64>) -> TrainConfig {
    TrainConfig {
        loss: m.loss,
        model: m.model,
        hidden_width: m.hidden,
        learning_rate: m.learning_rate,
        epochs: m.epochs,
        batch_size: m.batch_size,
        seed,
        prior,
        pi_test,
        guard_margin: m.guard,
        optimizer: optimizer(m),
        floor_risk: m.floor_risk,
    }
}

#[derive(Serialize)]
struct TrainResolved<'a> {
    config: &'a TrainConfig,
    pi_plus: f64,
    pi_test: f64,
    n_keep: usize,
    n_flip: usize,
    final_risk: f64,
}

pub fn train(args: TrainArgs) -> Result<()> {
    let data = load_triplets(&args.triplets)?;
    let prior = match args.prior {
        Some(p) => PriorSource::Known(p),
        None => PriorSource::Estimate,
    };
    let config = train_config(&args.model, args.seed, prior, args.pi_test);
    config.validate()?;
    let bags = aggregate_pointwise(&data);
    let (pi_plus, pi_test) = config.resolve_prior(&bags)?;
    match prior {
        PriorSource::Known(_) => eprintln!("prior: {pi_plus} (given)"),
        PriorSource::Estimate => eprintln!(
            "prior: {pi_plus:.6} (estimated from {} keep / {} flip)",
            data.n_keep(),
            data.n_flip()
        ),
    }
    let outcome = tricomp_core::train(&bags, &config)?;
    outcome.model.save(&args.out)?;
    record_run(
        &args.out,
        "train",
        &args,
        TrainResolved {
            config: &config,
            pi_plus,
            pi_test,
            n_keep: data.n_keep(),
            n_flip: data.n_flip(),
            final_risk: outcome.final_risk,
        },
    )?;
    println!("final_risk: {:.6}", outcome.final_risk);
    Ok(())
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let model = Model::load(&args.model)?;
    let test = load_labeled_csv(&args.test)?;
    let accuracy = classification_accuracy(&model, &test)?;
    let correct = (accuracy * test.len() as f64).round() as usize;
    println!("accuracy: {accuracy:.4} ({correct}/{})", test.len());
    Ok(())
}

pub fn bound_curve(args: BoundCurveArgs) -> Result<()> {
    let grid = prior_grid(args.from, args.to, args.step)?;
    let rule = match args.pi_test {
        Some(t) => PiTestRule::Fixed(t),
        None => PiTestRule::SameAsTrain,
    };
    let rows = tricomp_core::eval::bound_curve(&grid, rule, args.guard)?;
    let mut buf = Vec::new();
    write_curve_csv(&mut buf, &rows).expect("writing to memory");
    match &args.out {
        Some(path) => {
            write_file(path, &buf)?;
            record_run(path, "bound-curve", &args, rows.len())?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => std::io::stdout()
            .write_all(&buf)
            .map_err(|source| Error::Io {
                path: PathBuf::from("<stdout>"),
                source,
            })?,
    }
    Ok(())
}

pub fn bound(args: BoundArgs) -> Result<()> {
    let (rho, c_ell) = match (args.loss, args.c_b) {
        (Some(loss), Some(c_b)) => loss.lipschitz_and_ceiling(c_b)?,
        _ => match (args.rho, args.c_ell) {
            (Some(r), Some(c)) => (r, c),
            _ => {
                return Err(Error::Config(
                    "give either --loss with --c-b, or both --rho and --c-ell".into(),
                ))
            }
        },
    };
    let params = BoundParams {
        n: args.n,
        delta: args.delta,
        rho,
        c_f: args.c_f,
        c_ell,
    };
    let pi_test = args.pi_test.unwrap_or(args.prior);
    let coefficient = tricomp_core::bound_coefficient(args.prior, pi_test)?;
    let value = estimation_error_bound(&params, args.prior, pi_test)?;
    println!("coefficient: {coefficient:.6}");
    println!("bound: {value:.6}");
    Ok(())
}

fn parse_methods(names: &[String]) -> Result<Vec<Method>> {
    names
        .iter()
        .map(|n| match n.trim() {
            "kmeans" => Ok(Method::KMeans),
            other => other.parse::<SurrogateLoss>().map(Method::Proposed),
        })
        .collect()
}

fn experiment_source(source: &SourceArgs, prior: f64) -> Result<DataSource> {
    match (&source.gaussian, &source.input) {
        (Some(spec), _) => Ok(DataSource::Gaussian(parse_gaussian(spec, prior)?)),
        (None, Some(path)) => {
            let examples: Vec<LabeledExample> = load_labeled_csv(path)?;
            Ok(DataSource::Pool {
                name: path.display().to_string(),
                examples,
            })
        }
        (None, None) => unreachable!("clap requires a source"),
    }
}

pub fn experiment(args: ExperimentArgs) -> Result<()> {
    let source = experiment_source(&args.source, args.prior)?;
    let mut config = ExperimentConfig::new(source, args.prior);
    config.triplet_counts = args.triplets.clone();
    config.trials = args.trials;
    config.methods = parse_methods(&args.methods)?;
    let prior = if args.known_prior {
        PriorSource::Known(args.prior)
    } else {
        PriorSource::Estimate
    };
    config.train = train_config(&args.model, 0, prior, None);
    config.test_size = args.test_size;
    config.standardize = !args.no_standardize;
    config.skip_singular = args.skip_singular;
    config.seed = args.seed;

    let report = experiment_run(&config)?;
    print!("{}", report.to_table());
    if let Some(path) = &args.out_csv {
        write_file(path, report.to_csv().as_bytes())?;
        record_run(path, "experiment", &args, &config)?;
    }
    if let Some(path) = &args.out_json {
        let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
        json.push('\n');
        write_file(path, json.as_bytes())?;
        record_run(path, "experiment", &args, &config)?;
    }
    Ok(())
}
