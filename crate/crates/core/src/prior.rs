//! Closed-form algebra linking the class prior to the keep probability,
//! the mixing coefficients of the three pointwise marginals, the signed
//! risk weights, and the estimation-error-bound coefficient.
//!
//! Every function here is pure and works in `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default half-width of the rejected band around `pi_plus = 0.5`.
pub const DEFAULT_GUARD_MARGIN: f64 = 0.005;

/// A training class prior together with the test-time class prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassPrior {
    pi_plus: f64,
    pi_test: f64,
}

impl ClassPrior {
    pub fn new(pi_plus: f64) -> Result<Self> {
        Self::with_test(pi_plus, pi_plus)
    }

    /// A prior whose test distribution has a different positive rate.
    pub fn with_test(pi_plus: f64, pi_test: f64) -> Result<Self> {
        check_open_unit("pi_plus", pi_plus)?;
        check_open_unit("pi_test", pi_test)?;
        Ok(Self { pi_plus, pi_test })
    }

    pub fn pi_plus(&self) -> f64 {
        self.pi_plus
    }

    pub fn pi_minus(&self) -> f64 {
        1.0 - self.pi_plus
    }

    pub fn pi_test(&self) -> f64 {
        self.pi_test
    }

    /// Rejects priors within `margin` of 0.5.
    pub fn check_nonsingular(&self, margin: f64) -> Result<()> {
        guard(self.pi_plus, margin)
    }
}

fn check_open_unit(what: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain { what, value })
    }
}

fn check_closed_unit(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain { what, value })
    }
}

fn guard(pi_plus: f64, margin: f64) -> Result<()> {
    if (pi_plus - 0.5).abs() < margin {
        Err(Error::SingularPrior { pi_plus, margin })
    } else {
        Ok(())
    }
}

/// Probability that a triplet is kept: `1 - pi_plus * pi_minus`.
pub fn pi_t_from_prior(pi_plus: f64) -> Result<f64> {
    check_closed_unit("pi_plus", pi_plus)?;
    Ok(1.0 - pi_plus * (1.0 - pi_plus))
}

/// Tolerance below 0.75 that is still attributed to rounding and clamped.
const PI_T_CLAMP_TOLERANCE: f64 = 1e-12;

/// Recovers the class prior from the keep probability, taking the root with
/// `pi_plus >= 0.5`.
///
/// Inputs below 0.75 come from sampling noise; they are clamped to a zero
/// discriminant and give 0.5, which the singularity guard then rejects.
/// `pi_t` must lie in `[0, 1]`.
pub fn prior_from_pi_t(pi_t: f64) -> Result<f64> {
    if !(0.0..=1.0 + PI_T_CLAMP_TOLERANCE).contains(&pi_t) {
        return Err(Error::Domain {
            what: "pi_t",
            value: pi_t,
        });
    }
    // 4 * pi_t - 3 is exact for pi_t in [0.75, 1]
    let disc = (4.0 * pi_t - 3.0).max(0.0);
    Ok(((1.0 + disc.sqrt()) / 2.0).min(1.0))
}

/// Like [`prior_from_pi_t`] but refuses keep probabilities that fall below
/// 0.75 by more than `tolerance` instead of clamping them.
pub fn prior_from_pi_t_strict(pi_t: f64, tolerance: f64) -> Result<f64> {
    if pi_t < 0.75 - tolerance {
        return Err(Error::InconsistentCounts { pi_t });
    }
    prior_from_pi_t(pi_t)
}

/// Unbiased estimate of the keep probability from the keep/flip counts.
pub fn estimate_pi_t(n_keep: usize, n_flip: usize) -> Result<f64> {
    let total = n_keep + n_flip;
    if total == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(n_keep as f64 / total as f64)
}

/// Estimated class prior from the keep/flip counts.
pub fn estimate_prior(n_keep: usize, n_flip: usize) -> Result<f64> {
    prior_from_pi_t(estimate_pi_t(n_keep, n_flip)?)
}

/// Constants of the pseudo-inverse of the 3x2 mixing matrix
/// `[[pi+, pi-], [A, B], [pi-, pi+]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingCoefficients {
    pub pi_plus: f64,
    pub pi_t: f64,
    /// Weight of the positive class in the middle-position marginal.
    pub big_a: f64,
    /// Weight of the negative class in the middle-position marginal.
    pub big_b: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// `a*c - b^2`, the determinant of the Gram matrix.
    pub det: f64,
}

impl MixingCoefficients {
    pub fn pi_minus(&self) -> f64 {
        1.0 - self.pi_plus
    }

    /// Mixing matrix rows: the weights of `(p_plus, p_minus)` in each of the
    /// three pointwise marginals.
    pub fn mixing_rows(&self) -> [[f64; 2]; 3] {
        let (p, q) = (self.pi_plus, self.pi_minus());
        [[p, q], [self.big_a, self.big_b], [q, p]]
    }

    /// Numerators of the reconstruction rows, before division by `det`.
    ///
    /// Row 0 rebuilds `p_plus`, row 1 rebuilds `p_minus`; column `i` is the
    /// coefficient on the marginal of bag `i + 1`.
    pub fn reconstruction_numerators(&self) -> [[f64; 3]; 2] {
        let (p, q) = (self.pi_plus, self.pi_minus());
        let (a, b, c) = (self.a, self.b, self.c);
        let (ba, bb) = (self.big_a, self.big_b);
        [
            [c * p - b * q, c * ba - b * bb, c * q - b * p],
            [a * q - b * p, a * bb - b * ba, a * p - b * q],
        ]
    }

    /// The pseudo-inverse of the mixing matrix. Fails on a zero determinant.
    pub fn pseudo_inverse(&self) -> Result<[[f64; 3]; 2]> {
        if self.det == 0.0 {
            return Err(Error::SingularPrior {
                pi_plus: self.pi_plus,
                margin: 0.0,
            });
        }
        let mut rows = self.reconstruction_numerators();
        for row in rows.iter_mut() {
            for v in row.iter_mut() {
                *v /= self.det;
            }
        }
        Ok(rows)
    }
}

pub fn mixing_coefficients(pi_plus: f64) -> Result<MixingCoefficients> {
    if !(pi_plus > 0.0 && pi_plus <= 1.0) {
        return Err(Error::Domain {
            what: "pi_plus",
            value: pi_plus,
        });
    }
    let p = pi_plus;
    let q = 1.0 - p;
    let pi_t = 1.0 - p * q;
    let big_a = (p * p * p + 2.0 * p * p * q) / pi_t;
    let big_b = (2.0 * p * q * q + q * q * q) / pi_t;
    let a = p * p + big_a * big_a + q * q;
    let b = 2.0 * p * q + big_a * big_b;
    let c = q * q + big_b * big_b + p * p;
    Ok(MixingCoefficients {
        pi_plus: p,
        pi_t,
        big_a,
        big_b,
        a,
        b,
        c,
        det: a * c - b * b,
    })
}

/// The six signed coefficients of the unbiased risk estimator.
///
/// `wK_pos` multiplies the mean positive-label loss over bag K, `wK_neg` the
/// mean negative-label loss.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RiskWeights {
    pub w1_pos: f64,
    pub w1_neg: f64,
    pub w2_pos: f64,
    pub w2_neg: f64,
    pub w3_pos: f64,
    pub w3_neg: f64,
}

impl RiskWeights {
    /// `(pos, neg)` pairs for bags 1, 2 and 3.
    pub fn pairs(&self) -> [(f64, f64); 3] {
        [
            (self.w1_pos, self.w1_neg),
            (self.w2_pos, self.w2_neg),
            (self.w3_pos, self.w3_neg),
        ]
    }

    pub fn positive_sum(&self) -> f64 {
        self.w1_pos + self.w2_pos + self.w3_pos
    }

    pub fn negative_sum(&self) -> f64 {
        self.w1_neg + self.w2_neg + self.w3_neg
    }

    pub fn abs_sum(&self) -> f64 {
        self.pairs().iter().map(|(p, n)| p.abs() + n.abs()).sum()
    }
}

/// Unnormalized coefficients shared by the risk weights and the bound.
fn weight_numerators(pi_plus: f64, pi_test: f64) -> Result<(RiskWeights, f64)> {
    check_closed_unit("pi_test", pi_test)?;
    let m = mixing_coefficients(pi_plus)?;
    let [pos, neg] = m.reconstruction_numerators();
    let t = pi_test;
    let w = RiskWeights {
        w1_pos: t * pos[0],
        w1_neg: (1.0 - t) * neg[0],
        w2_pos: t * pos[1],
        w2_neg: (1.0 - t) * neg[1],
        w3_pos: t * pos[2],
        w3_neg: (1.0 - t) * neg[2],
    };
    Ok((w, m.det))
}

/// Risk weights with the default singularity guard.
pub fn risk_weights(pi_plus: f64, pi_test: f64) -> Result<RiskWeights> {
    risk_weights_guarded(pi_plus, pi_test, DEFAULT_GUARD_MARGIN)
}

pub fn risk_weights_guarded(pi_plus: f64, pi_test: f64, margin: f64) -> Result<RiskWeights> {
    guard(pi_plus, margin)?;
    let (w, det) = weight_numerators(pi_plus, pi_test)?;
    Ok(RiskWeights {
        w1_pos: w.w1_pos / det,
        w1_neg: w.w1_neg / det,
        w2_pos: w.w2_pos / det,
        w2_neg: w.w2_neg / det,
        w3_pos: w.w3_pos / det,
        w3_neg: w.w3_neg / det,
    })
}

/// `C_R / |ac - b^2|`: how strongly the prior inflates the estimation error.
pub fn bound_coefficient(pi_plus: f64, pi_test: f64) -> Result<f64> {
    bound_coefficient_guarded(pi_plus, pi_test, DEFAULT_GUARD_MARGIN)
}

pub fn bound_coefficient_guarded(pi_plus: f64, pi_test: f64, margin: f64) -> Result<f64> {
    guard(pi_plus, margin)?;
    let (w, det) = weight_numerators(pi_plus, pi_test)?;
    Ok(w.abs_sum() / det.abs())
}

/// Constants entering the estimation error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// Sample count; reports use the number of triplets.
    pub n: usize,
    pub delta: f64,
    /// Lipschitz constant of the loss in its score argument.
    pub rho: f64,
    /// Model-class complexity constant: Rademacher complexity <= c_f / sqrt(n).
    pub c_f: f64,
    /// Loss ceiling over bounded scores.
    pub c_ell: f64,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain {
                what: "n",
                value: 0.0,
            });
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Domain {
                what: "delta",
                value: self.delta,
            });
        }
        for (what, v) in [("rho", self.rho), ("c_f", self.c_f), ("c_ell", self.c_ell)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain { what, value: v });
            }
        }
        Ok(())
    }
}

/// High-probability bound on `R(f_hat) - R(f*)`:
/// `(2 rho C_F / sqrt(n) + sqrt(C_l^2 ln(2/delta) / 2n)) * C_R / |ac - b^2|`.
pub fn estimation_error_bound(params: &BoundParams, pi_plus: f64, pi_test: f64) -> Result<f64> {
    params.validate()?;
    let coefficient = bound_coefficient(pi_plus, pi_test)?;
    let n = params.n as f64;
    let complexity = 2.0 * params.rho * params.c_f / n.sqrt();
    let deviation = (params.c_ell * params.c_ell * (2.0 / params.delta).ln() / (2.0 * n)).sqrt();
    Ok((complexity + deviation) * coefficient)
}
