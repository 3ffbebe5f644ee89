use std::fs;

use tricomp_core::data::write_labeled_csv;
use tricomp_core::{
    aggregate_pointwise, classification_accuracy, experiment_run, generate_triplets,
    load_labeled_csv, load_triplets, sample_gaussian, save_triplets, train, DataSource, Error,
    ExperimentConfig, GaussianSpec, Method, Model, PoolSampling, PoolSource, Seed, SurrogateLoss,
    TrainConfig,
};

fn spec() -> GaussianSpec {
    GaussianSpec::new(vec![1.0, 1.0], vec![-1.0, -1.0], 1.0, 0.7).unwrap()
}

#[test]
fn files_round_trip_through_training() {
    let dir = tempfile::tempdir().unwrap();
    let triplets = dir.path().join("t.jsonl");
    let test_csv = dir.path().join("test.csv");
    let model_json = dir.path().join("m.json");

    let data = generate_triplets(&spec(), 1000, Seed::new(42)).unwrap();
    save_triplets(&triplets, &data).unwrap();
    assert_eq!(fs::read_to_string(&triplets).unwrap().lines().count(), 1000);
    let loaded = load_triplets(&triplets).unwrap();
    assert_eq!(loaded, data);

    let test = sample_gaussian(&spec(), 2000, Seed::new(43)).unwrap();
    write_labeled_csv(&test_csv, &test).unwrap();
    assert_eq!(load_labeled_csv(&test_csv).unwrap(), test);

    let config = TrainConfig {
        seed: 7,
        ..TrainConfig::default()
    };
    let out = train(&aggregate_pointwise(&loaded), &config).unwrap();
    out.model.save(&model_json).unwrap();
    let model = Model::load(&model_json).unwrap();
    assert_eq!(model, out.model);
    assert!(classification_accuracy(&model, &test).unwrap() > 0.85);
}

#[test]
fn pool_source_feeds_generation() {
    let examples = sample_gaussian(&spec(), 400, Seed::new(1)).unwrap();
    let pool = PoolSource::new(examples.clone(), PoolSampling::TargetPrior(0.8), Seed::new(2)).unwrap();
    let data = generate_triplets(&pool, 20_000, Seed::new(3)).unwrap();
    assert!((data.estimate_prior().unwrap() - 0.8).abs() < 0.02);

    let once = PoolSource::new(examples, PoolSampling::WithoutReplacement, Seed::new(2)).unwrap();
    assert!(generate_triplets(&once, 133, Seed::new(3)).is_ok());
    assert!(matches!(
        generate_triplets(&once, 134, Seed::new(3)),
        Err(Error::SourceExhausted { .. })
    ));
}

#[test]
fn experiment_is_reproducible() {
    let mut config = ExperimentConfig::new(DataSource::Gaussian(spec()), 0.7);
    config.triplet_counts = vec![300];
    config.trials = 6;
    config.methods = vec![Method::Proposed(SurrogateLoss::DoubleHinge), Method::KMeans];
    config.skip_singular = true;
    config.seed = 5;
    let a = experiment_run(&config).unwrap();
    let b = experiment_run(&config).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv(), b.to_csv());
    config.seed = 6;
    assert_ne!(experiment_run(&config).unwrap(), a);
}

#[test]
fn experiment_on_a_labeled_pool() {
    let examples = sample_gaussian(&spec(), 600, Seed::new(11)).unwrap();
    let mut config = ExperimentConfig::new(
        DataSource::Pool {
            name: "gaussian-pool".into(),
            examples,
        },
        0.7,
    );
    config.triplet_counts = vec![500];
    config.trials = 4;
    config.methods = vec![Method::Proposed(SurrogateLoss::Squared), Method::KMeans];
    let report = experiment_run(&config).unwrap();
    let row = report.row(500, "squared").unwrap();
    assert_eq!(row.report.n_test, 120);
    assert!(row.report.mean > 0.8);
    assert!(report.to_table().contains("squared"));
}
