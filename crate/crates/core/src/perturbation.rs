//! Convex perturbation functions.
//!
//! The traveler's objective subtracts a length-weighted sum of a strictly
//! convex function `F` of each link flow. Both supported variants satisfy
//! `F(0) = 0` and `F'(0) = 0`, which is what forces exact zero flows on
//! links where the conservation constraint is slack.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Inputs in `(-NEG_CLAMP, 0)` are treated as zero to absorb solver round-off.
const NEG_CLAMP: f64 = 1e-12;

/// Supported perturbation functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// `F(x) = (1 + x) ln(1 + x) - x`, an entropy-like function flattened
    /// at the origin.
    #[default]
    ModifiedEntropy,
    /// `F(x) = x^2`.
    Quadratic,
}

impl Perturbation {
    /// `F(x)` for `x >= 0`.
    pub fn value(self, x: f64) -> Result<f64> {
        let x = clamp_domain(x)?;
        Ok(self.value_raw(x))
    }

    /// `F'(x)` for `x >= 0`.
    pub fn prime(self, x: f64) -> Result<f64> {
        let x = clamp_domain(x)?;
        Ok(self.prime_raw(x))
    }

    /// `F''(x)` for `x >= 0`.
    pub fn second(self, x: f64) -> Result<f64> {
        let x = clamp_domain(x)?;
        Ok(self.second_raw(x))
    }

    pub(crate) fn value_raw(self, x: f64) -> f64 {
        debug_assert!(x >= 0.0);
        match self {
            Perturbation::ModifiedEntropy => (1.0 + x) * (1.0 + x).ln() - x,
            Perturbation::Quadratic => x * x,
        }
    }

    pub(crate) fn prime_raw(self, x: f64) -> f64 {
        debug_assert!(x >= 0.0);
        match self {
            Perturbation::ModifiedEntropy => x.ln_1p(),
            Perturbation::Quadratic => 2.0 * x,
        }
    }

    pub(crate) fn second_raw(self, x: f64) -> f64 {
        debug_assert!(x >= 0.0);
        match self {
            Perturbation::ModifiedEntropy => 1.0 / (1.0 + x),
            Perturbation::Quadratic => 2.0,
        }
    }
}

impl std::str::FromStr for Perturbation {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "modified_entropy" => Ok(Perturbation::ModifiedEntropy),
            "quadratic" => Ok(Perturbation::Quadratic),
            other => Err(CoreError::InvalidArgument(format!(
                "unknown perturbation `{other}` (expected `modified_entropy` or `quadratic`)"
            ))),
        }
    }
}

impl std::fmt::Display for Perturbation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Perturbation::ModifiedEntropy => write!(f, "modified_entropy"),
            Perturbation::Quadratic => write!(f, "quadratic"),
        }
    }
}

fn clamp_domain(x: f64) -> Result<f64> {
    if x >= 0.0 {
        Ok(x)
    } else if x > -NEG_CLAMP {
        Ok(0.0)
    } else {
        Err(CoreError::NegativeFlow(x))
    }
}
