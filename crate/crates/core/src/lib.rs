//! Binary classification from passively collected triplet comparisons.
//!
//! A triplet `(a, b, c)` is shown to a user who keeps it if `a` looks at
//! least as similar to `b` as to `c`, and flips it otherwise. No labels are
//! ever observed. Pooling the triplet positions gives three samples whose
//! marginals are known mixtures of the two class-conditional densities; a
//! signed combination of bag-wise losses is then an unbiased estimate of the
//! classification risk, and minimizing it trains a classifier.
//!
//! Modules:
//! - [`prior`]: prior/keep-probability algebra, risk weights, error bound.
//! - [`data`]: triplet generation, pointwise bags, CSV and JSON-lines I/O.
//! - [`loss`]: squared, double-hinge and logistic surrogates.
//! - [`model`] and [`erm`]: scoring models, empirical risk, training.
//! - [`eval`], [`kmeans`], [`experiment`]: metrics, baseline, trial harness.

pub mod data;
pub mod erm;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod kmeans;
pub mod loss;
pub mod model;
pub mod prior;
pub mod rng;

pub use data::{
    aggregate_pointwise, generate_triplets, load_labeled_csv, load_triplets, route_label_pattern,
    sample_gaussian, save_triplets, Feedback, GaussianSpec, Label, LabeledExample, LabeledSource,
    PointSet, PointwiseBags, PoolSampling, PoolSource, Triplet, TripletDataset,
};
pub use erm::{empirical_risk, risk_gradient, train, Optimizer, PriorSource, TrainConfig, TrainOutcome};
pub use error::{Error, ErrorCategory, Result};
pub use eval::{bound_curve, classification_accuracy, clustering_accuracy, EvalReport, PiTestRule};
pub use experiment::{experiment_run, DataSource, ExperimentConfig, ExperimentReport, Method};
pub use kmeans::{kmeans_fit, KMeansModel};
pub use loss::{MarginLoss, SurrogateLoss};
pub use model::{Model, ModelKind};
pub use prior::{
    bound_coefficient, estimate_pi_t, estimation_error_bound, mixing_coefficients, pi_t_from_prior,
    prior_from_pi_t, risk_weights, BoundParams, ClassPrior, MixingCoefficients, RiskWeights,
};
pub use rng::Seed;
