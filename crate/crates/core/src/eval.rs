//! Accuracy metrics, per-trial aggregation, and the prior/coefficient curve.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{Label, LabeledExample};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::prior;

/// Fraction of test points whose predicted sign matches the label.
pub fn classification_accuracy(model: &Model, test: &[LabeledExample]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::DegenerateData("empty test set".into()));
    }
    let mut correct = 0usize;
    for e in test {
        if model.predict(&e.x)? == e.y {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// `1 - min(r, 1 - r)` where `r` is the error rate of mapping cluster 0 to
/// the positive class and cluster 1 to the negative class.
pub fn clustering_accuracy(assignments: &[usize], labels: &[Label]) -> Result<f64> {
    if assignments.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: assignments.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::DegenerateData("no points to score".into()));
    }
    let mut errors = 0usize;
    for (&a, &y) in assignments.iter().zip(labels) {
        let predicted = match a {
            0 => Label::Positive,
            1 => Label::Negative,
            other => {
                return Err(Error::DegenerateData(format!(
                    "cluster id {other} is not 0 or 1"
                )))
            }
        };
        if predicted != y {
            errors += 1;
        }
    }
    let r = errors as f64 / labels.len() as f64;
    Ok(1.0 - r.min(1.0 - r))
}

/// Per-trial accuracies with their mean and standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracies: Vec<f64>,
    pub n_test: usize,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(trials)`; zero for one trial.
    pub std_error: f64,
}

impl EvalReport {
    /// Sums run over the sorted values, so the summary does not depend on
    /// trial order.
    pub fn from_trials(accuracies: Vec<f64>, n_test: usize) -> Result<Self> {
        if accuracies.is_empty() {
            return Err(Error::DegenerateData("no completed trials".into()));
        }
        let mut sorted = accuracies.clone();
        sorted.sort_by(f64::total_cmp);
        let k = sorted.len() as f64;
        let mean = sorted.iter().sum::<f64>() / k;
        let std_error = if sorted.len() > 1 {
            let mut sq: Vec<f64> = sorted.iter().map(|a| (a - mean) * (a - mean)).collect();
            sq.sort_by(f64::total_cmp);
            (sq.iter().sum::<f64>() / (k - 1.0)).sqrt() / k.sqrt()
        } else {
            0.0
        };
        Ok(Self {
            accuracies,
            n_test,
            mean,
            std_error,
        })
    }

    pub fn trials(&self) -> usize {
        self.accuracies.len()
    }
}

/// How the test prior is chosen along a curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PiTestRule {
    SameAsTrain,
    Fixed(f64),
}

/// Evenly spaced priors from `from` to `to` inclusive.
pub fn prior_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Domain {
            what: "step",
            value: step,
        });
    }
    if from.is_nan() || to.is_nan() || from > to {
        return Err(Error::Config(format!("empty grid: from {from} > to {to}")));
    }
    let count = ((to - from) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| {
            let v = from + i as f64 * step;
            // strip accumulated representation noise
            (v * 1e12).round() / 1e12
        })
        .collect())
}

/// Bound coefficient at each prior. Every grid point inside the guard band
/// is reported in the error.
pub fn bound_curve(grid: &[f64], rule: PiTestRule, guard_margin: f64) -> Result<Vec<(f64, f64)>> {
    let offending: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|p| (p - 0.5).abs() < guard_margin)
        .collect();
    if !offending.is_empty() {
        return Err(Error::GridInGuardBand(offending));
    }
    grid.iter()
        .map(|&p| {
            let pi_test = match rule {
                PiTestRule::SameAsTrain => p,
                PiTestRule::Fixed(t) => t,
            };
            Ok((p, prior::bound_coefficient_guarded(p, pi_test, guard_margin)?))
        })
        .collect()
}

pub fn write_curve_csv<W: Write>(mut out: W, rows: &[(f64, f64)]) -> std::io::Result<()> {
    writeln!(out, "prior,coefficient")?;
    for (p, c) in rows {
        writeln!(out, "{p},{c}")?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelKind;
    use Label::{Negative as N, Positive as P};

    fn examples(labels: &[Label]) -> Vec<LabeledExample> {
        labels
            .iter()
            .enumerate()
            .map(|(i, &y)| LabeledExample {
                x: vec![if y == P { 1.0 + i as f64 } else { -1.0 - i as f64 }],
                y,
            })
            .collect()
    }

    #[test]
    fn accuracy_examples() {
        let test = examples(&[P, P, N, P, N, P, P, N, P, P]);
        let perfect = Model::from_params(ModelKind::Linear, 1, 0, vec![1.0, 0.0]).unwrap();
        assert_eq!(classification_accuracy(&perfect, &test).unwrap(), 1.0);
        let constant = Model::from_params(ModelKind::Linear, 1, 0, vec![0.0, 3.0]).unwrap();
        assert!((classification_accuracy(&constant, &test).unwrap() - 0.7).abs() < 1e-15);
        assert!((classification_accuracy(&Model::linear(1), &test).unwrap() - 0.7).abs() < 1e-15);
        assert!(classification_accuracy(&perfect, &[]).is_err());
    }

    #[test]
    fn clustering_accuracy_examples() {
        let labels = [P, N, P, N];
        assert_eq!(clustering_accuracy(&[0, 1, 0, 1], &labels).unwrap(), 1.0);
        assert_eq!(clustering_accuracy(&[1, 0, 1, 0], &labels).unwrap(), 1.0);
        assert_eq!(clustering_accuracy(&[0, 0, 1, 1], &labels).unwrap(), 0.5);
        assert!(clustering_accuracy(&[0, 1], &labels).is_err());
        assert!(clustering_accuracy(&[0, 2, 0, 1], &labels).is_err());
    }

    #[test]
    fn report_statistics() {
        let r = EvalReport::from_trials(vec![0.9, 0.8, 1.0], 10).unwrap();
        assert!((r.mean - 0.9).abs() < 1e-12);
        assert!((r.std_error - 0.1 / 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(EvalReport::from_trials(vec![0.5], 1).unwrap().std_error, 0.0);
        assert!(EvalReport::from_trials(vec![], 1).is_err());
    }

    #[test]
    fn curve_examples() {
        let rows = bound_curve(&[0.55, 0.7, 0.9], PiTestRule::SameAsTrain, 0.005).unwrap();
        let want = [8.091, 2.079, 1.148];
        for ((_, c), w) in rows.iter().zip(want) {
            assert!((c - w).abs() < 1e-3, "{c} vs {w}");
        }
        assert_eq!(bound_curve(&[0.7], PiTestRule::SameAsTrain, 0.005).unwrap().len(), 1);
        match bound_curve(&[0.3, 0.5, 0.502, 0.7], PiTestRule::SameAsTrain, 0.005) {
            Err(Error::GridInGuardBand(bad)) => assert_eq!(bad, vec![0.5, 0.502]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn grid_arithmetic() {
        let g = prior_grid(0.51, 0.99, 0.01).unwrap();
        assert_eq!(g.len(), 49);
        assert_eq!(g[0], 0.51);
        assert_eq!(g[48], 0.99);
        assert_eq!(prior_grid(0.7, 0.7, 0.1).unwrap(), vec![0.7]);
        assert!(prior_grid(0.9, 0.1, 0.1).is_err());
        assert!(prior_grid(0.1, 0.9, 0.0).is_err());
    }

    #[test]
    fn curve_csv_header() {
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &[(0.7, 2.0)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "prior,coefficient\n0.7,2\n");
    }
}
