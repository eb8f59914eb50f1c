//! Collective observables and the conditional covariance.
//!
//! A collective observable at layer `ℓ` is `n_ℓ^{-1} Σ_i f(z^(ℓ)_{i;A})` for a
//! fixed `f: R^{|A|} -> R`. The conditional covariance of the next layer,
//! `Σ_{αβ} = C_b + C_W n_ℓ^{-1} Σ_j σ(z_{j;α}) σ(z_{j;β})`, is the one that
//! drives the Gaussian limit.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::LayerwiseActivations;
use crate::nonlinearity::Nonlinearity;

/// Observable library. Indices refer to positions in the input set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ObservableFn {
    /// `f ≡ 1`.
    Constant,
    /// `z_α`.
    Coordinate { alpha: usize },
    /// `z_α z_β`.
    Overlap { alpha: usize, beta: usize },
    /// `σ(z_α) σ(z_β)`.
    PostActivationProduct {
        alpha: usize,
        beta: usize,
        nonlinearity: Nonlinearity,
    },
    /// `|z_α|^k`, `1 <= k <= 4`.
    AbsPower { alpha: usize, k: u32 },
}

impl ObservableFn {
    pub fn name(&self) -> String {
        match self {
            ObservableFn::Constant => "constant".into(),
            ObservableFn::Coordinate { alpha } => format!("z{alpha}"),
            ObservableFn::Overlap { alpha, beta } => format!("z{alpha}*z{beta}"),
            ObservableFn::PostActivationProduct { alpha, beta, nonlinearity } => {
                format!("{nonlinearity}(z{alpha})*{nonlinearity}(z{beta})")
            }
            ObservableFn::AbsPower { alpha, k } => format!("|z{alpha}|^{k}"),
        }
    }

    /// Polynomial growth degree: `|f(z)| <= C (1 + ‖z‖^k)`.
    pub fn growth_degree(&self) -> u32 {
        match self {
            ObservableFn::Constant => 0,
            ObservableFn::Coordinate { .. } => 1,
            ObservableFn::Overlap { .. } => 2,
            ObservableFn::PostActivationProduct { nonlinearity, .. } => 2 * (nonlinearity.growth_degree() + 1),
            ObservableFn::AbsPower { k, .. } => *k,
        }
    }

    /// Largest input index referenced.
    pub fn max_index(&self) -> Option<usize> {
        match *self {
            ObservableFn::Constant => None,
            ObservableFn::Coordinate { alpha } | ObservableFn::AbsPower { alpha, .. } => Some(alpha),
            ObservableFn::Overlap { alpha, beta } | ObservableFn::PostActivationProduct { alpha, beta, .. } => {
                Some(alpha.max(beta))
            }
        }
    }

    pub fn validate(&self, arity: usize) -> Result<()> {
        if let ObservableFn::AbsPower { k, .. } = self {
            if !(1..=4).contains(k) {
                return Err(Error::Validation(format!("power k must be in 1..=4, got {k}")));
            }
        }
        match self.max_index() {
            Some(i) if i >= arity => Err(Error::Validation(format!(
                "observable {} references input {i}, but only {arity} inputs exist",
                self.name()
            ))),
            _ => Ok(()),
        }
    }

    /// Evaluate on one neuron's vector `z_{i;A}`.
    #[inline]
    pub fn eval(&self, z: &[f64]) -> f64 {
        match *self {
            ObservableFn::Constant => 1.0,
            ObservableFn::Coordinate { alpha } => z[alpha],
            ObservableFn::Overlap { alpha, beta } => z[alpha] * z[beta],
            ObservableFn::PostActivationProduct { alpha, beta, nonlinearity } => {
                nonlinearity.eval(z[alpha]) * nonlinearity.eval(z[beta])
            }
            ObservableFn::AbsPower { alpha, k } => z[alpha].abs().powi(k as i32),
        }
    }
}

/// `n_ℓ^{-1} Σ_i f(z^(ℓ)_{i;A})`.
pub fn collective_observable(acts: &LayerwiseActivations, layer: usize, f: &ObservableFn) -> Result<f64> {
    let z = acts.layer(layer)?;
    f.validate(z.ncols())?;
    let mut row = vec![0.0; z.ncols()];
    let mut sum = 0.0;
    for i in 0..z.nrows() {
        for (a, slot) in row.iter_mut().enumerate() {
            *slot = z[(i, a)];
        }
        sum += f.eval(&row);
    }
    Ok(sum / z.nrows() as f64)
}

/// The random covariance `Σ^(ℓ+1)_A` of layer `ℓ+1` given layers `<= ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalCovariance {
    pub entries: DMatrix<f64>,
    /// The layer `ℓ` whose activations it is built from.
    pub source_layer: usize,
}

impl ConditionalCovariance {
    pub fn get(&self, alpha: usize, beta: usize) -> f64 {
        self.entries[(alpha, beta)]
    }
}

/// `Σ_{αβ} = C_b + (C_W / n_ℓ) Σ_j σ(z^(ℓ)_{j;α}) σ(z^(ℓ)_{j;β})`.
pub fn conditional_covariance(
    acts: &LayerwiseActivations,
    layer: usize,
    c_b: f64,
    c_w: f64,
) -> Result<ConditionalCovariance> {
    if layer >= acts.num_layers() {
        return Err(Error::Validation(format!(
            "conditional covariance needs a hidden layer (1..={}), got {layer}",
            acts.num_layers() - 1
        )));
    }
    let z = acts.layer(layer)?;
    let nl = acts.nonlinearity();
    let post = z.map(|v| nl.eval(v));
    let gram = post.transpose() * &post;
    let n = z.nrows() as f64;
    let mut entries = gram.map(|g| c_b + c_w / n * g);
    // Gram products are symmetric up to summation order; make it exact.
    for a in 0..entries.nrows() {
        for b in 0..a {
            entries[(a, b)] = entries[(b, a)];
        }
    }
    Ok(ConditionalCovariance {
        entries,
        source_layer: layer,
    })
}

/// Sample moments of per-trial observable values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableMoments {
    pub mean: f64,
    /// Unbiased (divisor `m - 1`).
    pub variance: f64,
    pub se_mean: f64,
    pub se_variance: f64,
    pub count: usize,
}

/// Mean, unbiased variance and their standard errors.
///
/// The variance SE is `sqrt((m4 - (m-3)/(m-1) · s⁴) / m)` with `m4` the
/// fourth central sample moment; it is reported as 0 for `m < 4`.
pub fn observable_moments(values: &[f64]) -> Result<ObservableMoments> {
    let m = values.len();
    if m < 2 {
        return Err(Error::InsufficientData { needed: 2, got: m });
    }
    let mf = m as f64;
    let mean = ordered_sum(values) / mf;
    let dev2: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let variance = ordered_sum(&dev2) / (mf - 1.0);
    let se_mean = (variance / mf).sqrt();
    let se_variance = if m >= 4 {
        let dev4: Vec<f64> = dev2.iter().map(|d| d * d).collect();
        let m4 = ordered_sum(&dev4) / mf;
        ((m4 - (mf - 3.0) / (mf - 1.0) * variance * variance) / mf).max(0.0).sqrt()
    } else {
        0.0
    };
    Ok(ObservableMoments {
        mean,
        variance,
        se_mean,
        se_variance,
        count: m,
    })
}

/// Pairwise summation in the given order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Sum that depends only on the multiset of values: they are sorted before a
/// pairwise reduction, so any reordering of trials gives the same bits.
pub fn ordered_sum(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    pairwise_sum(&v)
}

/// Order-independent mean.
pub fn ordered_mean(xs: &[f64]) -> f64 {
    ordered_sum(xs) / xs.len() as f64
}
