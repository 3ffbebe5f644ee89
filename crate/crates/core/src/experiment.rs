//! Multi-trial experiment harness: per trial, draw a fresh labeled split,
//! generate triplets, fit each method, and score it on held-out labels.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    aggregate_pointwise, generate_triplets, sample_gaussian, GaussianSpec, Label, LabeledExample,
    LabeledSource, PointSet, PoolSampling, PoolSource, Standardizer,
};
use crate::erm::{train, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::{classification_accuracy, clustering_accuracy, EvalReport};
use crate::kmeans::{kmeans_fit_with, DEFAULT_MAX_ITER, DEFAULT_RESTARTS};
use crate::loss::SurrogateLoss;
use crate::rng::{tags, Seed};

/// Upper limit on the held-out test size.
pub const MAX_TEST_SIZE: usize = 1000;

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    /// Fresh Gaussian draws for both triplets and test points.
    Gaussian(GaussianSpec),
    /// A finite labeled pool, split per trial into a held-out test set and a
    /// training pool.
    Pool {
        name: String,
        #[serde(skip)]
        examples: Vec<LabeledExample>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Proposed(SurrogateLoss),
    KMeans,
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Proposed(l) => l.name().to_string(),
            Method::KMeans => "kmeans".to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub source: DataSource,
    /// Positive rate of the triplet-generating distribution and of the test
    /// set.
    pub pi_plus: f64,
    pub triplet_counts: Vec<usize>,
    pub trials: usize,
    pub methods: Vec<Method>,
    /// Template for the proposed method; loss and seed are set per run.
    pub train: TrainConfig,
    /// Defaults to `min(1000, pool / 5)` for pools and 1000 for Gaussians.
    pub test_size: Option<usize>,
    /// Z-score features using training-pool statistics (pools only).
    pub standardize: bool,
    /// Record trials whose estimated prior is singular as skipped instead of
    /// failing the whole run.
    pub skip_singular: bool,
    pub kmeans_restarts: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(source: DataSource, pi_plus: f64) -> Self {
        Self {
            source,
            pi_plus,
            triplet_counts: vec![1000],
            trials: 20,
            methods: vec![
                Method::Proposed(SurrogateLoss::Squared),
                Method::Proposed(SurrogateLoss::DoubleHinge),
                Method::KMeans,
            ],
            train: TrainConfig::default(),
            test_size: None,
            standardize: true,
            skip_singular: false,
            kmeans_restarts: DEFAULT_RESTARTS,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pi_plus) {
            return Err(Error::Domain {
                what: "pi_plus",
                value: self.pi_plus,
            });
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        if self.triplet_counts.is_empty() || self.methods.is_empty() {
            return Err(Error::Config("need at least one triplet count and one method".into()));
        }
        self.train.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub triplets: usize,
    pub method: String,
    pub report: EvalReport,
    /// Trial indices dropped for a singular estimated prior.
    pub skipped_trials: Vec<usize>,
    /// Training prior used by each completed trial (proposed methods only).
    pub priors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
}

impl ExperimentReport {
    pub fn row(&self, triplets: usize, method: &str) -> Option<&ExperimentRow> {
        self.rows
            .iter()
            .find(|r| r.triplets == triplets && r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("triplets,method,trials,skipped,n_test,mean_accuracy,std_error\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.triplets,
                r.method,
                r.report.trials(),
                r.skipped_trials.len(),
                r.report.n_test,
                r.report.mean,
                r.report.std_error
            );
        }
        s
    }

    /// Percent accuracies as `mean (se)`, one row per triplet count and one
    /// column per method.
    pub fn to_table(&self) -> String {
        let mut methods: Vec<&str> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for r in &self.rows {
            if !methods.contains(&r.method.as_str()) {
                methods.push(&r.method);
            }
            if !counts.contains(&r.triplets) {
                counts.push(r.triplets);
            }
        }
        let mut header = vec!["triplets".to_string()];
        header.extend(methods.iter().map(|m| m.to_string()));
        let mut lines = vec![header];
        for &n in &counts {
            let mut line = vec![n.to_string()];
            for m in &methods {
                line.push(match self.row(n, m) {
                    Some(r) => format!(
                        "{:.2} ({:.2})",
                        100.0 * r.report.mean,
                        100.0 * r.report.std_error
                    ),
                    None => "-".to_string(),
                });
            }
            lines.push(line);
        }
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for l in &lines {
            let cells: Vec<String> = l
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (cell, w))| {
                    if i == 0 {
                        format!("{cell:<w$}")
                    } else {
                        format!("{cell:>w$}")
                    }
                })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

/// Outcome of one method in one trial.
enum Score {
    Accuracy { value: f64, prior: Option<f64> },
    Skipped,
}

struct TrialSplit {
    source: Box<dyn LabeledSource + Send>,
    test: Vec<LabeledExample>,
}

fn split_trial(config: &ExperimentConfig, trial_seed: Seed) -> Result<TrialSplit> {
    match &config.source {
        DataSource::Gaussian(spec) => {
            let spec = spec.with_prior(config.pi_plus);
            let n_test = config.test_size.unwrap_or(MAX_TEST_SIZE);
            let test = sample_gaussian(&spec, n_test, trial_seed.child(tags::TEST_SET))?;
            Ok(TrialSplit {
                source: Box::new(spec),
                test,
            })
        }
        DataSource::Pool { examples, .. } => {
            let n_test = config
                .test_size
                .unwrap_or_else(|| MAX_TEST_SIZE.min(examples.len() / 5));
            let (mut train_pool, mut test) = holdout_split(
                examples,
                Some(config.pi_plus),
                n_test,
                trial_seed.child(tags::SPLIT),
            )?;
            if config.standardize {
                let z = Standardizer::fit(&train_pool)?;
                z.apply_all(&mut train_pool);
                z.apply_all(&mut test);
            }
            let source = PoolSource::new(
                train_pool,
                PoolSampling::TargetPrior(config.pi_plus),
                trial_seed,
            )?;
            Ok(TrialSplit {
                source: Box::new(source),
                test,
            })
        }
    }
}

/// Splits a labeled pool into `(train, test)` with `n_test` held-out
/// examples. With `pi_plus` the test split is drawn per class to match that
/// positive rate as closely as the pool allows; otherwise uniformly. Both
/// halves keep the pool order.
pub fn holdout_split(
    examples: &[LabeledExample],
    pi_plus: Option<f64>,
    n_test: usize,
    seed: Seed,
) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>)> {
    if n_test == 0 || n_test >= examples.len() {
        return Err(Error::DegenerateData(format!(
            "cannot hold out {n_test} of {} examples",
            examples.len()
        )));
    }
    let mut rng = seed.stream(0);
    let mut held = vec![false; examples.len()];
    match pi_plus {
        Some(p) => {
            let (mut pos, mut neg): (Vec<usize>, Vec<usize>) =
                (0..examples.len()).partition(|&i| examples[i].y == Label::Positive);
            pos.shuffle(&mut rng);
            neg.shuffle(&mut rng);
            let want_pos = ((p * n_test as f64).round() as usize).min(pos.len());
            let want_neg = (n_test - want_pos).min(neg.len());
            for &i in pos[..want_pos].iter().chain(&neg[..want_neg]) {
                held[i] = true;
            }
        }
        None => {
            let mut all: Vec<usize> = (0..examples.len()).collect();
            all.shuffle(&mut rng);
            for &i in &all[..n_test] {
                held[i] = true;
            }
        }
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (e, h) in examples.iter().zip(held) {
        if h {
            test.push(e.clone());
        } else {
            train.push(e.clone());
        }
    }
    Ok((train, test))
}

/// Scores for every (triplet count, method) pair of one trial.
fn run_trial(config: &ExperimentConfig, index: usize) -> Result<(usize, Vec<Score>)> {
    let trial_seed = Seed::new(config.seed).child(tags::TRIAL).child(index as u64);
    let split = split_trial(config, trial_seed)?;
    let test_labels: Vec<Label> = split.test.iter().map(|e| e.y).collect();
    let mut scores = Vec::new();
    for &n in &config.triplet_counts {
        // Triplet i comes from substream i for every n, so smaller sets are
        // prefixes of larger ones within a trial.
        let data = generate_triplets(split.source.as_ref(), n, trial_seed.child(tags::TRIPLETS))?;
        let bags = aggregate_pointwise(&data);
        for method in &config.methods {
            let score = match method {
                Method::Proposed(loss) => {
                    let cfg = TrainConfig {
                        loss: *loss,
                        seed: trial_seed.child(tags::INIT).value(),
                        ..config.train.clone()
                    };
                    match train(&bags, &cfg) {
                        Ok(out) => Score::Accuracy {
                            value: classification_accuracy(&out.model, &split.test)?,
                            prior: Some(out.pi_plus),
                        },
                        Err(Error::SingularPrior { .. }) | Err(Error::EmptyBag(_))
                            if config.skip_singular =>
                        {
                            Score::Skipped
                        }
                        Err(e) => return Err(e),
                    }
                }
                Method::KMeans => {
                    let points = PointSet::from_rows(bags.dim(), bags.all_points())?;
                    let (km, _) = kmeans_fit_with(
                        &points,
                        trial_seed.child(tags::KMEANS),
                        config.kmeans_restarts,
                        DEFAULT_MAX_ITER,
                    )?;
                    let assigned: Vec<usize> = split.test.iter().map(|e| km.assign(&e.x)).collect();
                    Score::Accuracy {
                        value: clustering_accuracy(&assigned, &test_labels)?,
                        prior: None,
                    }
                }
            };
            scores.push(score);
        }
    }
    Ok((split.test.len(), scores))
}

/// Runs all trials (in parallel, each on its own seed substream) and
/// aggregates per (triplet count, method).
pub fn experiment_run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let trials: Vec<(usize, Vec<Score>)> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            run_trial(config, t).map_err(|e| Error::Trial {
                index: t,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let n_test = trials[0].0;
    let mut rows = Vec::new();
    let mut slot = 0;
    for &n in &config.triplet_counts {
        for method in &config.methods {
            let mut accuracies = Vec::new();
            let mut priors = Vec::new();
            let mut skipped = Vec::new();
            for (t, (_, scores)) in trials.iter().enumerate() {
                match &scores[slot] {
                    Score::Accuracy { value, prior } => {
                        accuracies.push(*value);
                        priors.extend(prior);
                    }
                    Score::Skipped => skipped.push(t),
                }
            }
            rows.push(ExperimentRow {
                triplets: n,
                method: method.name(),
                report: EvalReport::from_trials(accuracies, n_test)?,
                skipped_trials: skipped,
                priors,
            });
            slot += 1;
        }
    }
    Ok(ExperimentReport { rows })
}
