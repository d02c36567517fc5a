//! Gaussian kernel.
//!
//! Two exponent conventions are supported: `Plain` evaluates
//! `exp(-|p - q|^2 / sigma^2)` and `Half` evaluates
//! `exp(-|p - q|^2 / (2 sigma^2))`. Both are `1/sigma`-Lipschitz as a function
//! of distance, which is what the grid sizing rule relies on. `Half` is the
//! default.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelForm {
    /// Denominator `sigma^2`.
    Plain,
    /// Denominator `2 sigma^2`.
    #[default]
    Half,
}

impl fmt::Display for KernelForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelForm::Plain => "plain",
            KernelForm::Half => "half",
        })
    }
}

impl FromStr for KernelForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plain" => Ok(KernelForm::Plain),
            "half" => Ok(KernelForm::Half),
            other => Err(Error::param(
                "kernel-form",
                format!("expected `plain` or `half`, got `{other}`"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernel {
    sigma: f64,
    form: KernelForm,
    #[serde(skip)]
    neg_inv_denom: f64,
}

impl GaussianKernel {
    pub fn new(sigma: f64, form: KernelForm) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::param(
                "sigma",
                format!("bandwidth must be positive and finite, got {sigma}"),
            ));
        }
        let denom = match form {
            KernelForm::Plain => sigma * sigma,
            KernelForm::Half => 2.0 * sigma * sigma,
        };
        Ok(Self {
            sigma,
            form,
            neg_inv_denom: -1.0 / denom,
        })
    }

    /// Half-form kernel with bandwidth `sigma`.
    pub fn half(sigma: f64) -> Result<Self> {
        Self::new(sigma, KernelForm::Half)
    }

    pub fn plain(sigma: f64) -> Result<Self> {
        Self::new(sigma, KernelForm::Plain)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn form(&self) -> KernelForm {
        self.form
    }

    /// Kernel similarity of two locations of equal dimension.
    pub fn eval(&self, p: &[f64], q: &[f64]) -> Result<f64> {
        if p.len() != q.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                got: q.len(),
            });
        }
        Ok(self.of_sq_dist(sq_dist(p, q)))
    }

    /// Kernel value as a function of squared distance. No range checks.
    #[inline]
    pub fn of_sq_dist(&self, d2: f64) -> f64 {
        (d2 * self.neg_inv_denom).exp()
    }

    /// Kernel value as a function of distance.
    #[inline]
    pub fn profile(&self, r: f64) -> f64 {
        self.of_sq_dist(r * r)
    }

    /// Lipschitz constant `1/sigma`, valid for both forms.
    ///
    /// The half form's steepest slope is `exp(-1/2)/sigma` at `r = sigma`; the
    /// plain form's is `sqrt(2) exp(-1/2)/sigma`. Both are below `1/sigma`.
    pub fn lipschitz_bound(&self) -> f64 {
        1.0 / self.sigma
    }
}

#[inline]
pub(crate) fn sq_dist(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| {
            let t = a - b;
            t * t
        })
        .sum()
}
