//! Shared model vocabulary: parameters, the quality distribution, threshold
//! strategies and the truncated-normal review score.

use std::f64::consts::SQRT_2;
use std::fmt;

use libm::{erf, erfc};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::erf::erfc_inv;

use crate::error::{param_err, Result};

/// Distribution of true paper quality on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum QualityDistribution {
    #[default]
    Uniform01,
    Beta { a: f64, b_shape: f64 },
}

impl QualityDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            QualityDistribution::Uniform01 => Ok(()),
            QualityDistribution::Beta { a, b_shape } => {
                if a > 0.0 && b_shape > 0.0 && a.is_finite() && b_shape.is_finite() {
                    Ok(())
                } else {
                    Err(param_err(format!("beta shapes must be positive, got ({a}, {b_shape})")))
                }
            }
        }
    }

    pub fn pdf(&self, q: f64) -> f64 {
        if !(0.0..=1.0).contains(&q) {
            return 0.0;
        }
        match *self {
            QualityDistribution::Uniform01 => 1.0,
            QualityDistribution::Beta { a, b_shape } => {
                if (q == 0.0 && a < 1.0) || (q == 1.0 && b_shape < 1.0) {
                    return f64::INFINITY;
                }
                let log = (a - 1.0) * q.ln() + (b_shape - 1.0) * (1.0 - q).ln() - ln_beta(a, b_shape);
                // 0 * ln(0) for unit shapes
                if log.is_nan() {
                    (-ln_beta(a, b_shape)).exp()
                } else {
                    log.exp()
                }
            }
        }
    }

    /// Exponents `(a, b)` with `pdf ~ q^(a-1)` near 0 and `(1-q)^(b-1)` near 1.
    pub fn endpoint_exponents(&self) -> (f64, f64) {
        match *self {
            QualityDistribution::Uniform01 => (1.0, 1.0),
            QualityDistribution::Beta { a, b_shape } => (a, b_shape),
        }
    }

    pub fn cdf(&self, q: f64) -> f64 {
        if q <= 0.0 {
            return 0.0;
        }
        if q >= 1.0 {
            return 1.0;
        }
        match *self {
            QualityDistribution::Uniform01 => q,
            QualityDistribution::Beta { a, b_shape } => beta_reg(a, b_shape, q),
        }
    }

    /// Inverse of [`cdf`](Self::cdf). `u` is clamped to `[0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match *self {
            QualityDistribution::Uniform01 => u,
            QualityDistribution::Beta { .. } => {
                if u == 0.0 || u == 1.0 {
                    return u;
                }
                // Safeguarded Newton: keep a bracket and fall back to bisection
                // whenever the Newton step leaves it.
                let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
                let mut x = 0.5;
                for _ in 0..200 {
                    let g = self.cdf(x) - u;
                    if g.abs() <= 1e-15 {
                        return x;
                    }
                    if g > 0.0 {
                        hi = x;
                    } else {
                        lo = x;
                    }
                    let d = self.pdf(x);
                    let newton = x - g / d;
                    x = if d.is_finite() && d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
                    if hi - lo <= 1e-16 {
                        break;
                    }
                }
                x
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            QualityDistribution::Uniform01 => 0.5,
            QualityDistribution::Beta { a, b_shape } => a / (a + b_shape),
        }
    }
}

impl fmt::Display for QualityDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QualityDistribution::Uniform01 => write!(f, "uniform"),
            QualityDistribution::Beta { a, b_shape } => write!(f, "beta({a},{b_shape})"),
        }
    }
}

/// Scalar parameters of the venue and its authors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Baseline review noise.
    pub sigma: f64,
    /// Noise elasticity.
    pub beta: f64,
    /// Acceptance fraction of original submissions.
    pub alpha: f64,
    /// Probability that a participating paper is rejected before review.
    pub lottery_rate: f64,
    pub n_scientists: usize,
    /// Private benefit of publication.
    pub b: f64,
    /// Epistemic weight on the quality of the literature.
    pub s: f64,
    /// Rejection cost coefficient.
    pub c: f64,
    /// Journal cost exponent.
    pub k: f64,
    pub quality_dist: QualityDistribution,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            sigma: 0.3,
            beta: 8.0,
            alpha: 0.1,
            lottery_rate: 0.1,
            n_scientists: 100,
            b: 1.0,
            s: 2.0,
            c: 0.1,
            k: 2.0,
            quality_dist: QualityDistribution::Uniform01,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.sigma, self.beta, self.alpha, self.lottery_rate, self.b, self.s, self.c, self.k];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(param_err("parameters must be finite"));
        }
        if self.sigma <= 0.0 {
            return Err(param_err(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if self.beta < 0.0 {
            return Err(param_err(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(param_err(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.lottery_rate) {
            return Err(param_err(format!("lottery rate must lie in [0, 1), got {}", self.lottery_rate)));
        }
        if self.n_scientists == 0 {
            return Err(param_err("n_scientists must be positive"));
        }
        if self.b < 0.0 || self.s < 0.0 || self.c < 0.0 {
            return Err(param_err("b, s and c must be non-negative"));
        }
        if self.b + self.s <= 0.0 {
            return Err(param_err("b + s must be positive"));
        }
        if self.k <= 0.0 {
            return Err(param_err(format!("k must be > 0, got {}", self.k)));
        }
        self.quality_dist.validate()
    }

    /// Private-epistemic ratio `b / (b + s)`.
    pub fn ratio(&self) -> f64 {
        self.b / (self.b + self.s)
    }

    pub fn normalized_cost(&self) -> f64 {
        self.c / (self.b + self.s)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    /// Keeps `b` and sets `s` so that `b / (b + s) = r`.
    pub fn with_ratio(mut self, r: f64) -> Result<Self> {
        if !(r > 0.0 && r <= 1.0) {
            return Err(param_err(format!("ratio r must lie in (0, 1], got {r}")));
        }
        if self.b <= 0.0 {
            return Err(param_err("ratio r requires b > 0"));
        }
        self.s = self.b * (1.0 - r) / r;
        Ok(self)
    }
}

/// Participation rule: enter the lottery iff `q <= tau`.
///
/// A negative `tau` is the empty rule (nobody enters, not even `q = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdStrategy {
    pub tau: f64,
}

impl ThresholdStrategy {
    pub fn new(tau: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(param_err(format!("threshold must lie in [0, 1], got {tau}")));
        }
        Ok(ThresholdStrategy { tau })
    }

    /// Nobody enters the lottery.
    pub fn none() -> Self {
        ThresholdStrategy { tau: -1.0 }
    }

    pub fn is_empty(&self) -> bool {
        self.tau < 0.0
    }

    pub fn full() -> Self {
        ThresholdStrategy { tau: 1.0 }
    }

    pub fn participation(&self, q: f64) -> f64 {
        if q <= self.tau {
            1.0
        } else {
            0.0
        }
    }
}

/// Review score of a single paper: `Normal(mean, sd)` truncated to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreModel {
    pub mean: f64,
    pub sd: f64,
}

impl ScoreModel {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mean) {
            return Err(param_err(format!("score mean must lie in [0, 1], got {mean}")));
        }
        if !(sd >= 0.0) || !sd.is_finite() {
            return Err(param_err(format!("score sd must be finite and >= 0, got {sd}")));
        }
        Ok(ScoreModel { mean, sd })
    }

    pub fn survival(&self, t: f64) -> f64 {
        survival_unchecked(t, self.mean, self.sd)
    }

    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.survival(t)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        score_from_uniform(self.mean, self.sd, u)
    }
}

/// Standard normal CDF.
pub(crate) fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal upper tail `1 - phi(x)`.
pub(crate) fn phi_upper(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Standard normal mass on `[lo, hi]`. Tail differences far from the
/// origin, an `erf` difference near it (no cancellation around 1/2).
pub(crate) fn normal_mass(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if lo > 0.5 {
        phi_upper(lo) - phi_upper(hi)
    } else if hi < -0.5 {
        phi(hi) - phi(lo)
    } else {
        0.5 * (erf(hi / SQRT_2) - erf(lo / SQRT_2))
    }
}

/// Standard normal quantile for lower-tail mass `p`.
fn phi_inv_lower(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// `sigma * w_bar^beta`: review noise at surviving load `w_bar`.
pub fn effective_noise(sigma: f64, w_bar: f64, beta: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(param_err(format!("sigma must be > 0, got {sigma}")));
    }
    if !(0.0..=1.0).contains(&w_bar) {
        return Err(param_err(format!("survival fraction must lie in [0, 1], got {w_bar}")));
    }
    if !(beta >= 0.0) {
        return Err(param_err(format!("beta must be >= 0, got {beta}")));
    }
    Ok(sigma * w_bar.powf(beta))
}

/// Probability `1 - L p` that a paper with participation `p` survives the lottery.
pub fn survival_prob(p: f64, lottery_rate: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(param_err(format!("participation must lie in [0, 1], got {p}")));
    }
    if !(0.0..1.0).contains(&lottery_rate) {
        return Err(param_err(format!("lottery rate must lie in [0, 1), got {lottery_rate}")));
    }
    Ok(1.0 - lottery_rate * p)
}

/// `P[S >= t]` for a score `S ~ Normal(q, sigma_eff)` truncated to `[0, 1]`.
///
/// `sigma_eff = 0` is the noiseless step: 1 if `q >= t`, else 0.
pub fn score_survival(t: f64, q: f64, sigma_eff: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(param_err(format!("cutoff must lie in [0, 1], got {t}")));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(param_err(format!("quality must lie in [0, 1], got {q}")));
    }
    if !(sigma_eff >= 0.0) || !sigma_eff.is_finite() {
        return Err(param_err(format!("effective noise must be finite and >= 0, got {sigma_eff}")));
    }
    Ok(survival_unchecked(t, q, sigma_eff))
}

pub(crate) fn survival_unchecked(t: f64, q: f64, sigma_eff: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if sigma_eff == 0.0 {
        return if q >= t { 1.0 } else { 0.0 };
    }
    if t >= 1.0 {
        return 0.0;
    }
    let lo = -q / sigma_eff;
    let hi = (1.0 - q) / sigma_eff;
    let x = (t - q) / sigma_eff;
    let z = normal_mass(lo, hi);
    if z <= 0.0 {
        // Both bounds are far out in one tail: fall back to the step.
        return if q >= t { 1.0 } else { 0.0 };
    }
    (normal_mass(x, hi) / z).clamp(0.0, 1.0)
}

/// Draws one review score by inversion. Deterministic in the generator state.
pub fn sample_score<R: Rng + ?Sized>(q: f64, sigma_eff: f64, rng: &mut R) -> Result<f64> {
    let model = ScoreModel::new(q, sigma_eff)?;
    Ok(model.sample(rng))
}

/// Inverse-CDF map from a uniform `u in [0, 1)` to a truncated-normal score.
pub(crate) fn score_from_uniform(q: f64, sigma_eff: f64, u: f64) -> f64 {
    if sigma_eff == 0.0 {
        return q;
    }
    let lo = -q / sigma_eff;
    let hi = (1.0 - q) / sigma_eff;
    let z = normal_mass(lo, hi);
    if z <= 0.0 {
        return q;
    }
    // Lower-tail mass of the target point; invert on the smaller tail.
    let lower = phi(lo) + u * z;
    let x = if lower <= 0.5 {
        phi_inv_lower(lower)
    } else {
        let upper = phi_upper(hi) + (1.0 - u) * z;
        -phi_inv_lower(upper)
    };
    (q + sigma_eff * x.clamp(lo, hi)).clamp(0.0, 1.0)
}
