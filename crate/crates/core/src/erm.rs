//! Unbiased empirical risk over the three pointwise bags, its gradient, and
//! the training loop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Label, PointSet, PointwiseBags};
use crate::error::{Error, Result};
use crate::loss::{MarginLoss, SurrogateLoss};
use crate::model::{Model, ModelKind, DEFAULT_HIDDEN_WIDTH};
use crate::prior::{self, RiskWeights, DEFAULT_GUARD_MARGIN};
use crate::rng::{tags, Seed};

/// Risk split by the label the loss is evaluated against.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct ClassParts {
    pos: f64,
    neg: f64,
}

/// Which rows of a bag enter the mean.
#[derive(Clone, Copy)]
enum Rows<'a> {
    All,
    Sampled(&'a [usize]),
}

struct Evaluation {
    parts: ClassParts,
    grad: Vec<f64>,
}

/// Accumulates the bag-mean risk parts. With `grad_signs = Some((sp, sn))`
/// also accumulates the gradient of `sp * R+ + sn * R-`.
fn evaluate<L: MarginLoss + ?Sized>(
    model: &Model,
    bags: &PointwiseBags,
    weights: &RiskWeights,
    loss: &L,
    batches: [Rows<'_>; 3],
    grad_signs: Option<(f64, f64)>,
) -> Result<Evaluation> {
    bags.require_nonempty()?;
    if bags.dim() != model.d {
        return Err(Error::DimensionMismatch {
            expected: model.d,
            found: bags.dim(),
        });
    }
    let mut out = Evaluation {
        parts: ClassParts::default(),
        grad: vec![0.0; if grad_signs.is_some() { model.n_params() } else { 0 }],
    };
    let mut hidden = vec![0.0; model.hidden_width];
    let sets: [&PointSet; 3] = [&bags.bag1, &bags.bag2, &bags.bag3];
    for ((set, (w_pos, w_neg)), rows) in sets.into_iter().zip(weights.pairs()).zip(batches) {
        let (count, indices): (usize, Box<dyn Iterator<Item = usize>>) = match rows {
            Rows::All => (set.len(), Box::new(0..set.len())),
            Rows::Sampled(idx) => (idx.len(), Box::new(idx.iter().copied())),
        };
        let (wp, wn) = (w_pos / count as f64, w_neg / count as f64);
        for i in indices {
            let x = set.row(i);
            let z = match grad_signs {
                Some((sp, sn)) => model.score_with_gradient(x, &mut hidden, &mut out.grad, |z| {
                    sp * wp * loss.derivative(z, Label::Positive)
                        + sn * wn * loss.derivative(z, Label::Negative)
                }),
                None => model.score_unchecked(x),
            };
            out.parts.pos += wp * loss.value(z, Label::Positive);
            out.parts.neg += wn * loss.value(z, Label::Negative);
        }
    }
    Ok(out)
}

/// Weighted sum of bag-mean losses:
/// `sum_i mean_{x in bag_i} [w_i_pos l(f(x), +1) + w_i_neg l(f(x), -1)]`.
///
/// Signed weights make negative values possible.
pub fn empirical_risk<L: MarginLoss + ?Sized>(
    model: &Model,
    bags: &PointwiseBags,
    weights: &RiskWeights,
    loss: &L,
) -> Result<f64> {
    let e = evaluate(model, bags, weights, loss, [Rows::All; 3], None)?;
    Ok(e.parts.pos + e.parts.neg)
}

/// Gradient of [`empirical_risk`] with respect to the model parameters.
pub fn risk_gradient<L: MarginLoss + ?Sized>(
    model: &Model,
    bags: &PointwiseBags,
    weights: &RiskWeights,
    loss: &L,
) -> Result<Vec<f64>> {
    Ok(evaluate(model, bags, weights, loss, [Rows::All; 3], Some((1.0, 1.0)))?.grad)
}

/// Update rule for [`train`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Optimizer {
    /// Adaptive moment estimation with bias correction.
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
    /// Plain `params -= lr * grad`.
    GradientDescent,
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Where the training prior comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorSource {
    /// From the keep/flip counts, i.e. the sizes of bags 2 and 3.
    Estimate,
    Known(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: SurrogateLoss,
    pub model: ModelKind,
    pub hidden_width: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Points drawn per bag per step; 0 means full batch.
    pub batch_size: usize,
    pub seed: u64,
    pub prior: PriorSource,
    /// Test-time positive rate; `None` means equal to the training prior.
    pub pi_test: Option<f64>,
    pub guard_margin: f64,
    pub optimizer: Optimizer,
    /// Minimize `|R+| + |R-|` over the positive- and negative-label parts of
    /// the risk instead of their signed sum.
    pub floor_risk: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: SurrogateLoss::DoubleHinge,
            model: ModelKind::Linear,
            hidden_width: DEFAULT_HIDDEN_WIDTH,
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 0,
            seed: 0,
            prior: PriorSource::Estimate,
            pi_test: None,
            guard_margin: DEFAULT_GUARD_MARGIN,
            optimizer: Optimizer::default(),
            floor_risk: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Domain {
                what: "learning_rate",
                value: self.learning_rate,
            });
        }
        if !(self.guard_margin >= 0.0 && self.guard_margin < 0.5) {
            return Err(Error::Domain {
                what: "guard_margin",
                value: self.guard_margin,
            });
        }
        if let Optimizer::Adam {
            beta1,
            beta2,
            epsilon,
        } = self.optimizer
        {
            for (what, v) in [("beta1", beta1), ("beta2", beta2)] {
                if !(0.0..1.0).contains(&v) {
                    return Err(Error::Domain { what, value: v });
                }
            }
            if epsilon.is_nan() || epsilon <= 0.0 {
                return Err(Error::Domain {
                    what: "epsilon",
                    value: epsilon,
                });
            }
        }
        Ok(())
    }

    /// Training prior and test prior for these bags.
    pub fn resolve_prior(&self, bags: &PointwiseBags) -> Result<(f64, f64)> {
        let pi_plus = match self.prior {
            PriorSource::Known(p) => {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(Error::Domain {
                        what: "pi_plus",
                        value: p,
                    });
                }
                p
            }
            PriorSource::Estimate => prior::estimate_prior(bags.bag2.len(), bags.bag3.len())?,
        };
        let pi_test = self.pi_test.unwrap_or(pi_plus);
        if !(0.0..=1.0).contains(&pi_test) {
            return Err(Error::Domain {
                what: "pi_test",
                value: pi_test,
            });
        }
        Ok((pi_plus, pi_test))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: Model,
    pub pi_plus: f64,
    pub pi_test: f64,
    pub weights: RiskWeights,
    /// Empirical risk (as minimized) at the start of each epoch.
    pub trace: Vec<f64>,
    /// Empirical risk of the returned model.
    pub final_risk: f64,
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

/// Minimizes the empirical risk from a seeded initialization.
///
/// Deterministic: the same bags and config give bitwise-identical output.
pub fn train(bags: &PointwiseBags, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    bags.require_nonempty()?;
    let (pi_plus, pi_test) = config.resolve_prior(bags)?;
    let weights = prior::risk_weights_guarded(pi_plus, pi_test, config.guard_margin)?;
    let seed = Seed::new(config.seed);
    let mut model = Model::initialize(
        config.model,
        bags.dim(),
        config.hidden_width,
        seed.child(tags::INIT),
    )?;
    let n = model.n_params();
    let mut adam = AdamState {
        m: vec![0.0; n],
        v: vec![0.0; n],
        t: 0,
    };
    let loss = config.loss;
    let objective = |parts: ClassParts| {
        if config.floor_risk {
            parts.pos.abs() + parts.neg.abs()
        } else {
            parts.pos + parts.neg
        }
    };
    // Gradient of the objective restricted to the given rows. The floored
    // objective needs the signs of the parts before the backward pass.
    let gradient = |model: &Model, rows: [Rows<'_>; 3]| -> Result<(ClassParts, Vec<f64>)> {
        let signs = if config.floor_risk {
            let parts = evaluate(model, bags, &weights, &loss, rows, None)?.parts;
            (sign(parts.pos), sign(parts.neg))
        } else {
            (1.0, 1.0)
        };
        let e = evaluate(model, bags, &weights, &loss, rows, Some(signs))?;
        Ok((e.parts, e.grad))
    };
    let mut trace = Vec::with_capacity(config.epochs);
    let batch_stream = seed.child(tags::MINIBATCH);
    let largest = bags.bag1.len().max(bags.bag2.len()).max(bags.bag3.len());

    for epoch in 0..config.epochs {
        if config.batch_size == 0 {
            let (parts, grad) = gradient(&model, [Rows::All; 3])?;
            let risk = objective(parts);
            if !risk.is_finite() {
                return Err(Error::Diverged { epoch, risk });
            }
            trace.push(risk);
            step(&mut model.params, &grad, config, &mut adam);
        } else {
            let parts = evaluate(&model, bags, &weights, &loss, [Rows::All; 3], None)?.parts;
            let risk = objective(parts);
            if !risk.is_finite() {
                return Err(Error::Diverged { epoch, risk });
            }
            trace.push(risk);
            let mut rng = batch_stream.stream(epoch as u64);
            let steps = largest.div_ceil(config.batch_size);
            for _ in 0..steps {
                let mut draw = |len: usize| -> Vec<usize> {
                    (0..config.batch_size).map(|_| rng.random_range(0..len)).collect()
                };
                let i1 = draw(bags.bag1.len());
                let i2 = draw(bags.bag2.len());
                let i3 = draw(bags.bag3.len());
                let rows = [Rows::Sampled(&i1), Rows::Sampled(&i2), Rows::Sampled(&i3)];
                let (_, grad) = gradient(&model, rows)?;
                step(&mut model.params, &grad, config, &mut adam);
            }
        }
        if model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                risk: f64::NAN,
            });
        }
    }
    let final_risk =
        objective(evaluate(&model, bags, &weights, &loss, [Rows::All; 3], None)?.parts);
    if !final_risk.is_finite() {
        return Err(Error::Diverged {
            epoch: config.epochs,
            risk: final_risk,
        });
    }
    Ok(TrainOutcome {
        model,
        pi_plus,
        pi_test,
        weights,
        trace,
        final_risk,
    })
}

fn sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn step(params: &mut [f64], grad: &[f64], config: &TrainConfig, adam: &mut AdamState) {
    let lr = config.learning_rate;
    match config.optimizer {
        Optimizer::GradientDescent => {
            for (p, g) in params.iter_mut().zip(grad) {
                *p -= lr * g;
            }
        }
        Optimizer::Adam {
            beta1,
            beta2,
            epsilon,
        } => {
            adam.t += 1;
            let c1 = 1.0 - beta1.powi(adam.t);
            let c2 = 1.0 - beta2.powi(adam.t);
            for (((p, g), m), v) in params
                .iter_mut()
                .zip(grad)
                .zip(adam.m.iter_mut())
                .zip(adam.v.iter_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
    }
}
