//! Weight and bias laws.
//!
//! Every built-in weight law is symmetric with mean 0 and variance 1 and has
//! all moments finite. Each draw is produced by transforming exactly one
//! standard normal variate through the law's quantile map, so two networks
//! that differ only in their weight law but share a stream are coupled draw
//! by draw (the monotone coupling). Universality studies rely on this.

use std::fmt;
use std::str::FromStr;

use libm::erf;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rng::RngStream;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightDistribution {
    Gaussian,
    Rademacher,
    /// Uniform on `[-sqrt(3), sqrt(3)]`.
    #[serde(alias = "uniform_sym")]
    Uniform,
}

impl WeightDistribution {
    pub const ALL: [WeightDistribution; 3] = [
        WeightDistribution::Gaussian,
        WeightDistribution::Rademacher,
        WeightDistribution::Uniform,
    ];

    pub fn label(self) -> &'static str {
        match self {
            WeightDistribution::Gaussian => "gaussian",
            WeightDistribution::Rademacher => "rademacher",
            WeightDistribution::Uniform => "uniform",
        }
    }

    /// Map a standard normal variate to a draw from this law.
    #[inline]
    pub fn from_normal(self, g: f64) -> f64 {
        match self {
            WeightDistribution::Gaussian => g,
            WeightDistribution::Rademacher => {
                if g < 0.0 {
                    -1.0
                } else {
                    1.0
                }
            }
            // 2*Phi(g) - 1 = erf(g / sqrt 2) is uniform on [-1, 1].
            WeightDistribution::Uniform => SQRT_3 * erf(g * std::f64::consts::FRAC_1_SQRT_2),
        }
    }

    #[inline]
    pub fn draw(self, rng: &mut RngStream) -> f64 {
        self.from_normal(rng.standard_normal())
    }

    /// `count` iid draws.
    pub fn sample(self, count: usize, rng: &mut RngStream) -> Vec<f64> {
        (0..count).map(|_| self.draw(rng)).collect()
    }

    /// Exact k-th raw moment. Panics on `k == 0`.
    pub fn moment(self, k: u32) -> f64 {
        assert!(k >= 1, "moment order must be positive");
        if k % 2 == 1 {
            return 0.0;
        }
        match self {
            // (k-1)!!
            WeightDistribution::Gaussian => (1..k).step_by(2).map(f64::from).product(),
            WeightDistribution::Rademacher => 1.0,
            WeightDistribution::Uniform => SQRT_3.powi(k as i32) / f64::from(k + 1),
        }
    }

    /// Excess kurtosis, `E[w^4] - 3`.
    pub fn excess_kurtosis(self) -> f64 {
        self.moment(4) - 3.0
    }
}

impl fmt::Display for WeightDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for WeightDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "gaussian" => Ok(WeightDistribution::Gaussian),
            "rademacher" => Ok(WeightDistribution::Rademacher),
            "uniform" | "uniform_sym" => Ok(WeightDistribution::Uniform),
            other => Err(Error::Validation(format!(
                "unknown weight distribution {other:?}; supported: gaussian, rademacher, uniform"
            ))),
        }
    }
}

/// Centered Gaussian bias law with variance `C_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasLaw {
    variance: f64,
}

impl BiasLaw {
    pub fn new(variance: f64) -> Result<Self, Error> {
        if !(variance >= 0.0 && variance.is_finite()) {
            return Err(Error::Validation(format!(
                "C_b must be non-negative and finite, got {variance}"
            )));
        }
        Ok(Self { variance })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// One draw. Always consumes one normal variate so that streams stay
    /// aligned whether or not `C_b` is zero.
    #[inline]
    pub fn draw(&self, rng: &mut RngStream) -> f64 {
        let g = rng.standard_normal();
        if self.variance == 0.0 {
            0.0
        } else {
            self.variance.sqrt() * g
        }
    }

    pub fn sample(&self, count: usize, rng: &mut RngStream) -> Vec<f64> {
        (0..count).map(|_| self.draw(rng)).collect()
    }
}
