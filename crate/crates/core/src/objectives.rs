//! Sharpness scores of a frame and their adjoints with respect to the bin
//! values. Both scores are maximized.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::binning::Frame;
use crate::error::{Error, Result};

/// Which of `p` and `1 - p` multiplies the count in the NB pmf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NbConvention {
    /// `pmf(h) ∝ (1 - p)^r p^h`.
    #[default]
    CountsWithP,
    /// `pmf(h) ∝ p^r (1 - p)^h`.
    CountsWithOneMinusP,
}

/// Negative binomial parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NbParams {
    pub r: f64,
    pub p: f64,
    #[serde(default)]
    pub convention: NbConvention,
}

impl NbParams {
    pub fn new(r: f64, p: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!("NB r = {r} must be > 0")));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!("NB p = {p} must lie in (0, 1)")));
        }
        Ok(Self {
            r,
            p,
            convention: NbConvention::default(),
        })
    }

    pub fn with_convention(mut self, convention: NbConvention) -> Self {
        self.convention = convention;
        self
    }

    // (log of the factor raised to r, log of the factor raised to h)
    fn log_factors(&self) -> (f64, f64) {
        match self.convention {
            NbConvention::CountsWithP => ((1.0 - self.p).ln(), self.p.ln()),
            NbConvention::CountsWithOneMinusP => (self.p.ln(), (1.0 - self.p).ln()),
        }
    }
}

impl Default for NbParams {
    fn default() -> Self {
        Self {
            r: 0.3,
            p: 0.8,
            convention: NbConvention::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Variance,
    LogLikelihood(NbParams),
}

impl ScoreKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Variance => "var",
            Self::LogLikelihood(_) => "ll",
        }
    }

    pub fn score(&self, frame: &Frame) -> Result<f64> {
        match self {
            Self::Variance => score_variance(frame),
            Self::LogLikelihood(nb) => score_loglik(frame, nb),
        }
    }

    pub fn adjoint(&self, frame: &Frame) -> Result<Vec<f64>> {
        match self {
            Self::Variance => adjoint_variance(frame),
            Self::LogLikelihood(nb) => adjoint_loglik(frame, nb),
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyFrame);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Population variance of the bin values.
pub fn score_variance(frame: &Frame) -> Result<f64> {
    let mu = mean(&frame.values)?;
    let ss: f64 = frame.values.iter().map(|h| (h - mu) * (h - mu)).sum();
    Ok(ss / frame.values.len() as f64)
}

/// `∂Var/∂h = 2 (h - μ) / N`.
pub fn adjoint_variance(frame: &Frame) -> Result<Vec<f64>> {
    let mu = mean(&frame.values)?;
    let scale = 2.0 / frame.values.len() as f64;
    Ok(frame.values.iter().map(|h| scale * (h - mu)).collect())
}

fn check_nonnegative(frame: &Frame) -> Result<()> {
    if frame.values.is_empty() {
        return Err(Error::EmptyFrame);
    }
    if let Some((index, &value)) = frame.values.iter().enumerate().find(|(_, &h)| !(h >= 0.0)) {
        return Err(Error::NegativeBinValue { index, value });
    }
    Ok(())
}

/// Sum over bins of the gamma-extended NB log pmf
/// `lnΓ(h+r) - lnΓ(h+1) - lnΓ(r) + r ln(1-p) + h ln(p)`.
pub fn score_loglik(frame: &Frame, nb: &NbParams) -> Result<f64> {
    check_nonnegative(frame)?;
    let (log_r_factor, log_h_factor) = nb.log_factors();
    let base = nb.r * log_r_factor - ln_gamma(nb.r);
    // Empty bins are the common case; their log pmf is just `base + lnΓ(r)`.
    let zero_term = nb.r * log_r_factor;
    Ok(frame
        .values
        .iter()
        .map(|&h| {
            if h == 0.0 {
                zero_term
            } else {
                ln_gamma(h + nb.r) - ln_gamma(h + 1.0) + base + h * log_h_factor
            }
        })
        .sum())
}

/// `∂LL/∂h = ψ(h+r) - ψ(h+1) + ln p`.
pub fn adjoint_loglik(frame: &Frame, nb: &NbParams) -> Result<Vec<f64>> {
    check_nonnegative(frame)?;
    let (_, log_h_factor) = nb.log_factors();
    let at_zero = digamma(nb.r) - digamma(1.0) + log_h_factor;
    Ok(frame
        .values
        .iter()
        .map(|&h| {
            if h == 0.0 {
                at_zero
            } else {
                digamma(h + nb.r) - digamma(h + 1.0) + log_h_factor
            }
        })
        .collect())
}
