//! Margin-based surrogate losses.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

/// A loss `l(z, t)` of a real score `z` and a label `t`.
pub trait MarginLoss: Sync {
    fn value(&self, z: f64, t: Label) -> f64;

    /// Derivative in `z`; a fixed subgradient where not differentiable.
    fn derivative(&self, z: f64, t: Label) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateLoss {
    /// `(tz - 1)^2 / 4`
    Squared,
    /// `max(-tz, max(0, (1 - tz) / 2))`
    DoubleHinge,
    /// `ln(1 + exp(-tz))`
    Logistic,
}

impl SurrogateLoss {
    pub const ALL: [SurrogateLoss; 3] = [
        SurrogateLoss::Squared,
        SurrogateLoss::DoubleHinge,
        SurrogateLoss::Logistic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SurrogateLoss::Squared => "squared",
            SurrogateLoss::DoubleHinge => "double-hinge",
            SurrogateLoss::Logistic => "logistic",
        }
    }

    /// Lipschitz constant `rho` and ceiling `C_l = sup_t l(C_b, t)` over
    /// scores bounded by `c_b` in absolute value.
    pub fn lipschitz_and_ceiling(self, c_b: f64) -> Result<(f64, f64)> {
        if !(c_b > 0.0 && c_b.is_finite()) {
            return Err(Error::Domain {
                what: "c_b",
                value: c_b,
            });
        }
        Ok(match self {
            SurrogateLoss::Squared => ((c_b + 1.0) / 2.0, (c_b + 1.0).powi(2) / 4.0),
            SurrogateLoss::DoubleHinge => (1.0, c_b.max((1.0 + c_b) / 2.0)),
            SurrogateLoss::Logistic => (1.0, softplus(c_b)),
        })
    }
}

impl fmt::Display for SurrogateLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SurrogateLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(SurrogateLoss::Squared),
            "double-hinge" => Ok(SurrogateLoss::DoubleHinge),
            "logistic" => Ok(SurrogateLoss::Logistic),
            other => Err(Error::Config(format!(
                "unknown loss {other:?}; expected squared, double-hinge or logistic"
            ))),
        }
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl MarginLoss for SurrogateLoss {
    fn value(&self, z: f64, t: Label) -> f64 {
        let m = t.sign() * z;
        match self {
            SurrogateLoss::Squared => (m - 1.0).powi(2) / 4.0,
            SurrogateLoss::DoubleHinge => (-m).max((0.5 * (1.0 - m)).max(0.0)),
            SurrogateLoss::Logistic => softplus(-m),
        }
    }

    fn derivative(&self, z: f64, t: Label) -> f64 {
        let s = t.sign();
        let m = s * z;
        let d_margin = match self {
            SurrogateLoss::Squared => (m - 1.0) / 2.0,
            // kinks at m = -1 and m = 1 take the slope of the branch to their left
            SurrogateLoss::DoubleHinge => {
                if m <= -1.0 {
                    -1.0
                } else if m <= 1.0 {
                    -0.5
                } else {
                    0.0
                }
            }
            SurrogateLoss::Logistic => -sigmoid(-m),
        };
        s * d_margin
    }
}
