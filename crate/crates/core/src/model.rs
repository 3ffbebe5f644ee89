//! Scoring models: affine, and one hidden ReLU layer.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};
use crate::rng::Seed;

/// Hidden width used when none is given.
pub const DEFAULT_HIDDEN_WIDTH: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Mlp1,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Linear => "linear",
            ModelKind::Mlp1 => "mlp1",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ModelKind::Linear),
            "mlp1" => Ok(ModelKind::Mlp1),
            other => Err(Error::Config(format!(
                "unknown model {other:?}; expected linear or mlp1"
            ))),
        }
    }
}

/// A scoring function `f: R^d -> R` with a flat parameter vector.
///
/// Parameter layout:
/// - linear: `w[0..d]`, then the bias.
/// - mlp1: hidden weights `W[h][d]` row-major, hidden biases `[h]`, output
///   weights `[h]`, output bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub kind: ModelKind,
    pub d: usize,
    /// Zero for linear models.
    pub hidden_width: usize,
    pub params: Vec<f64>,
}

pub fn param_count(kind: ModelKind, d: usize, hidden_width: usize) -> usize {
    match kind {
        ModelKind::Linear => d + 1,
        ModelKind::Mlp1 => d * hidden_width + 2 * hidden_width + 1,
    }
}

impl Model {
    /// All-zero linear model.
    pub fn linear(d: usize) -> Self {
        Self {
            kind: ModelKind::Linear,
            d,
            hidden_width: 0,
            params: vec![0.0; d + 1],
        }
    }

    pub fn from_params(kind: ModelKind, d: usize, hidden_width: usize, params: Vec<f64>) -> Result<Self> {
        let model = Self {
            kind,
            d,
            hidden_width: if kind == ModelKind::Linear { 0 } else { hidden_width },
            params,
        };
        model.validate()?;
        Ok(model)
    }

    /// Linear models start at zero. MLP weights are uniform in
    /// `±1/sqrt(fan_in)` with zero biases.
    pub fn initialize(kind: ModelKind, d: usize, hidden_width: usize, seed: Seed) -> Result<Self> {
        match kind {
            ModelKind::Linear => Ok(Self::linear(d)),
            ModelKind::Mlp1 => {
                if hidden_width == 0 {
                    return Err(Error::Config("mlp1 needs a positive hidden width".into()));
                }
                let h = hidden_width;
                let mut rng = seed.stream(0);
                let mut params = vec![0.0; param_count(kind, d, h)];
                let r1 = 1.0 / (d.max(1) as f64).sqrt();
                for w in &mut params[..d * h] {
                    *w = rng.random_range(-r1..r1);
                }
                let r2 = 1.0 / (h as f64).sqrt();
                for w in &mut params[d * h + h..d * h + 2 * h] {
                    *w = rng.random_range(-r2..r2);
                }
                Self::from_params(kind, d, h, params)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let expected = param_count(self.kind, self.d, self.hidden_width);
        if self.kind == ModelKind::Mlp1 && self.hidden_width == 0 {
            return Err(Error::Config("mlp1 needs a positive hidden width".into()));
        }
        if self.params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.params.len(),
            });
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("model parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.d {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.d,
                found: x.len(),
            })
        }
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.score_unchecked(x))
    }

    /// Sign of the score, with zero mapped to the positive class.
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        Ok(Label::from_bernoulli(self.score(x)? >= 0.0))
    }

    pub(crate) fn score_unchecked(&self, x: &[f64]) -> f64 {
        match self.kind {
            ModelKind::Linear => dot(&self.params[..self.d], x) + self.params[self.d],
            ModelKind::Mlp1 => {
                let (d, h) = (self.d, self.hidden_width);
                let (w1, rest) = self.params.split_at(d * h);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(h);
                let mut z = b2[0];
                for j in 0..h {
                    let pre = dot(&w1[j * d..(j + 1) * d], x) + b1[j];
                    z += w2[j] * pre.max(0.0);
                }
                z
            }
        }
    }

    /// Returns the score at `x` and adds `coef(score) * d score / d params`
    /// into `grad`. `hidden` is scratch space of length `hidden_width`.
    pub(crate) fn score_with_gradient(
        &self,
        x: &[f64],
        hidden: &mut [f64],
        grad: &mut [f64],
        coef: impl FnOnce(f64) -> f64,
    ) -> f64 {
        match self.kind {
            ModelKind::Linear => {
                let d = self.d;
                let z = dot(&self.params[..d], x) + self.params[d];
                let g = coef(z);
                if g != 0.0 {
                    for (gi, xi) in grad[..d].iter_mut().zip(x) {
                        *gi += g * xi;
                    }
                    grad[d] += g;
                }
                z
            }
            ModelKind::Mlp1 => {
                let (d, h) = (self.d, self.hidden_width);
                let (w1, rest) = self.params.split_at(d * h);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(h);
                let mut z = b2[0];
                for j in 0..h {
                    let pre = dot(&w1[j * d..(j + 1) * d], x) + b1[j];
                    // ReLU; the kink at zero takes slope 0
                    hidden[j] = pre.max(0.0);
                    z += w2[j] * hidden[j];
                }
                let g = coef(z);
                if g != 0.0 {
                    let (gw1, rest) = grad.split_at_mut(d * h);
                    let (gb1, rest) = rest.split_at_mut(h);
                    let (gw2, gb2) = rest.split_at_mut(h);
                    for j in 0..h {
                        gw2[j] += g * hidden[j];
                        if hidden[j] > 0.0 {
                            let back = g * w2[j];
                            gb1[j] += back;
                            for (gk, xk) in gw1[j * d..(j + 1) * d].iter_mut().zip(x) {
                                *gk += back * xk;
                            }
                        }
                    }
                    gb2[0] += g;
                }
                z
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: Model = serde_json::from_str(s)
            .map_err(|e| Error::Config(format!("invalid model JSON: {e}")))?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, self).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let model: Model = serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        model.validate()?;
        Ok(model)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
