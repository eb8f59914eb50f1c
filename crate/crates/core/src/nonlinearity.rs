//! Built-in nonlinearities.
//!
//! All built-ins are absolutely continuous with a polynomially bounded
//! derivative, which is what the infinite-width limit needs. `growth_degree`
//! records the exponent `k` in `|σ'(x)| <= B (1 + |x|^k)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use libm::erf;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Odd,
    Even,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nonlinearity {
    Identity,
    Relu,
    LeakyRelu { slope: f64 },
    Tanh,
    Erf,
    Gelu,
}

pub const SUPPORTED: &[&str] = &["identity", "relu", "leaky_relu", "tanh", "erf", "gelu"];

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

impl Nonlinearity {
    pub fn name(&self) -> &'static str {
        match self {
            Nonlinearity::Identity => "identity",
            Nonlinearity::Relu => "relu",
            Nonlinearity::LeakyRelu { .. } => "leaky_relu",
            Nonlinearity::Tanh => "tanh",
            Nonlinearity::Erf => "erf",
            Nonlinearity::Gelu => "gelu",
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Nonlinearity::Identity => x,
            Nonlinearity::Relu => x.max(0.0),
            Nonlinearity::LeakyRelu { slope } => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Nonlinearity::Tanh => x.tanh(),
            Nonlinearity::Erf => erf(x),
            Nonlinearity::Gelu => 0.5 * x * (1.0 + erf(x * FRAC_1_SQRT_2)),
        }
    }

    /// σ'(x). Piecewise-linear activations return the left derivative at the
    /// kink, so `relu'(0) = 0`.
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Nonlinearity::Identity => 1.0,
            Nonlinearity::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Nonlinearity::LeakyRelu { slope } => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Nonlinearity::Tanh => 1.0 - x.tanh().powi(2),
            Nonlinearity::Erf => FRAC_2_SQRT_PI * (-x * x).exp(),
            Nonlinearity::Gelu => {
                let cdf = 0.5 * (1.0 + erf(x * FRAC_1_SQRT_2));
                let pdf = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
                cdf + x * pdf
            }
        }
    }

    /// Every built-in has a bounded derivative.
    pub fn growth_degree(&self) -> u32 {
        0
    }

    pub fn parity(&self) -> Parity {
        match self {
            Nonlinearity::Identity | Nonlinearity::Tanh | Nonlinearity::Erf => Parity::Odd,
            Nonlinearity::LeakyRelu { slope } if *slope == -1.0 => Parity::Even,
            Nonlinearity::LeakyRelu { slope } if *slope == 1.0 => Parity::Odd,
            _ => Parity::None,
        }
    }

    /// `d` such that `σ(cx) = c^d σ(x)` for all `c > 0`, if any.
    pub fn homogeneity_degree(&self) -> Option<f64> {
        match self {
            Nonlinearity::Identity | Nonlinearity::Relu | Nonlinearity::LeakyRelu { .. } => {
                Some(1.0)
            }
            _ => None,
        }
    }

    /// Whether σ is only piecewise smooth, with its single kink at 0.
    pub fn has_kink_at_zero(&self) -> bool {
        match self {
            Nonlinearity::Relu => true,
            Nonlinearity::LeakyRelu { slope } => *slope != 1.0,
            _ => false,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if let Nonlinearity::LeakyRelu { slope } = self {
            if !slope.is_finite() {
                return Err(Error::Validation(format!(
                    "leaky_relu slope must be finite, got {slope}"
                )));
            }
        }
        Ok(())
    }

    /// Parse a name plus the optional leaky-ReLU slope.
    pub fn from_name(name: &str, slope: Option<f64>) -> Result<Self, Error> {
        let nl = match name {
            "identity" => Nonlinearity::Identity,
            "relu" => Nonlinearity::Relu,
            "leaky_relu" => Nonlinearity::LeakyRelu {
                slope: slope.unwrap_or(0.01),
            },
            "tanh" => Nonlinearity::Tanh,
            "erf" => Nonlinearity::Erf,
            "gelu" => Nonlinearity::Gelu,
            other => {
                return Err(Error::Validation(format!(
                    "unknown nonlinearity {other:?}; supported: {}",
                    SUPPORTED.join(", ")
                )))
            }
        };
        if slope.is_some() && !matches!(nl, Nonlinearity::LeakyRelu { .. }) {
            return Err(Error::Validation(format!("nonlinearity {name} takes no slope")));
        }
        nl.validate()?;
        Ok(nl)
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlinearity::LeakyRelu { slope } => write!(f, "leaky_relu({slope})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Nonlinearity {
    type Err = Error;

    /// Accepts `"tanh"`, `"leaky_relu"` or `"leaky_relu:0.2"`.
    fn from_str(s: &str) -> Result<Self, Error> {
        match s.split_once(':') {
            Some((name, slope)) => {
                let slope = slope
                    .parse::<f64>()
                    .map_err(|_| Error::Validation(format!("bad slope in {s:?}")))?;
                Self::from_name(name, Some(slope))
            }
            None => Self::from_name(s, None),
        }
    }
}

// Config files carry either `"relu"` or `{"name": "leaky_relu", "slope": 0.2}`.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Repr {
    Name(String),
    Full {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        slope: Option<f64>,
    },
}

impl Serialize for Nonlinearity {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Nonlinearity::LeakyRelu { slope } => Repr::Full {
                name: "leaky_relu".into(),
                slope: Some(*slope),
            },
            other => Repr::Name(other.name().into()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Nonlinearity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let parsed = match Repr::deserialize(d)? {
            Repr::Name(name) => name.parse(),
            Repr::Full { name, slope } => Nonlinearity::from_name(&name, slope),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [Nonlinearity; 6] = [
        Nonlinearity::Identity,
        Nonlinearity::Relu,
        Nonlinearity::LeakyRelu { slope: 0.2 },
        Nonlinearity::Tanh,
        Nonlinearity::Erf,
        Nonlinearity::Gelu,
    ];

    fn grid() -> impl Iterator<Item = f64> {
        (0..100).map(|i| -5.0 + 10.0 * (i as f64 + 0.5) / 100.0)
    }

    #[test]
    fn pointwise_values() {
        assert_eq!(Nonlinearity::Relu.eval(-2.5), 0.0);
        assert_eq!(Nonlinearity::Identity.eval(3.7), 3.7);
        assert_eq!(Nonlinearity::Tanh.eval(0.0), 0.0);
        assert_eq!(Nonlinearity::Relu.derivative(1.0), 1.0);
        assert_eq!(Nonlinearity::Relu.derivative(0.0), 0.0);
        assert_eq!(Nonlinearity::LeakyRelu { slope: 0.2 }.eval(-1.0), -0.2);
    }

    #[test]
    fn growth_degrees() {
        for nl in ALL {
            assert_eq!(nl.growth_degree(), 0);
        }
    }

    #[test]
    fn tanh_derivative_matches_central_difference() {
        let h = 1e-5;
        for x in [-1.0, 0.3, 2.0] {
            let fd = (Nonlinearity::Tanh.eval(x + h) - Nonlinearity::Tanh.eval(x - h)) / (2.0 * h);
            assert!((Nonlinearity::Tanh.derivative(x) - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn smooth_derivatives_match_central_difference_on_grid() {
        // Truncation error of the central difference is h^2/6 * |σ'''|, and
        // |σ'''| <= 2 for tanh, erf and gelu on the real line; rounding adds
        // about eps/h.
        let h = 1e-5;
        let curvature = 2.0;
        for nl in [Nonlinearity::Tanh, Nonlinearity::Erf, Nonlinearity::Gelu] {
            for x in grid() {
                let fd = (nl.eval(x + h) - nl.eval(x - h)) / (2.0 * h);
                let bound = 10.0 * h * h * curvature + 1e-10;
                assert!((nl.derivative(x) - fd).abs() <= bound, "{nl} at {x}");
            }
        }
    }

    #[test]
    fn derivative_is_bounded_at_declared_degree() {
        for nl in ALL {
            let k = nl.growth_degree() as i32;
            let b = (-50..=50)
                .map(|i| i as f64 * 0.37)
                .map(|x| nl.derivative(x).abs() / (1.0 + x.abs().powi(k)))
                .fold(0.0, f64::max);
            assert!(b <= 1.5, "{nl}: {b}");
        }
    }

    #[test]
    fn parity_and_homogeneity_metadata_hold() {
        for nl in ALL {
            for x in grid() {
                if nl.parity() == Parity::Odd {
                    assert!((nl.eval(-x) + nl.eval(x)).abs() < 1e-15, "{nl}");
                }
                if let Some(d) = nl.homogeneity_degree() {
                    for c in [0.1, 0.5, 2.0, 7.3] {
                        let lhs = nl.eval(c * x);
                        let rhs = c.powf(d) * nl.eval(x);
                        assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()), "{nl}");
                    }
                }
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for nl in ALL {
            let json = serde_json::to_string(&nl).unwrap();
            let back: Nonlinearity = serde_json::from_str(&json).unwrap();
            assert_eq!(nl, back);
        }
        assert_eq!(
            "leaky_relu:0.3".parse::<Nonlinearity>().unwrap(),
            Nonlinearity::LeakyRelu { slope: 0.3 }
        );
        let err = "exp".parse::<Nonlinearity>().unwrap_err().to_string();
        assert!(err.contains("relu") && err.contains("tanh"));
    }
}
