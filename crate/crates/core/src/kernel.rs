//! Infinite-width kernel engine.
//!
//! The limiting coordinate covariance obeys
//! `K^(ℓ+1)_{αβ} = C_b + C_W E[σ(u_α) σ(u_β)]` with `(u_α, u_β)` centered
//! Gaussian with covariance given by the 2×2 block of `K^(ℓ)`. The
//! expectation is evaluated in polar coordinates, with the angular integral
//! split at the angles where either pre-activation changes sign. The radial
//! rule is Gauss–Laguerre for piecewise-linear nonlinearities, where it is
//! exact, and Gauss–Legendre in `ln r` for smooth saturating ones, where
//! tensor Gauss–Hermite converges slowly once the variance is large. The
//! identity uses tensor Gauss–Hermite after a Cholesky factorization of the
//! block, which is exact.
//!
//! `K^(2)` depends on the law of the first-layer weights. For Gaussian first
//! layers it follows from the exact `K^(1)`; otherwise it is estimated by
//! Monte Carlo and reported with standard errors.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{BiasLaw, WeightDistribution};
use crate::error::{Error, Result};
use crate::network::{map_trials, InputSet, NetworkConfig};
use crate::nonlinearity::Nonlinearity;
use crate::quadrature::{QuadratureRule, RADIAL_MIN};
use crate::rng::RngStream;

/// `|ρ|` at or above this routes to the one-dimensional rule.
const RHO_DEGENERATE: f64 = 1.0 - 1e-12;

/// A symmetric PSD `|A| × |A|` kernel at one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    entries: DMatrix<f64>,
    layer: usize,
}

impl KernelMatrix {
    /// Wraps `entries`, projecting onto exact symmetry.
    pub fn new(entries: DMatrix<f64>, layer: usize) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "kernel must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("kernel at layer {layer} has non-finite entries")));
        }
        let sym = (&entries + entries.transpose()) * 0.5;
        Ok(Self { entries: sym, layer })
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, alpha: usize, beta: usize) -> f64 {
        self.entries[(alpha, beta)]
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.entries.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// PSD tolerance `1e-10 · trace`.
    pub fn psd_tolerance(&self) -> f64 {
        1e-10 * self.trace().abs()
    }

    pub fn check_psd(&self) -> Result<()> {
        let min = self.min_eigenvalue();
        let tol = self.psd_tolerance();
        if min < -tol {
            return Err(Error::NotPsd {
                layer: self.layer,
                min_eigenvalue: min,
                tol,
            });
        }
        Ok(())
    }

    pub fn slice(&self, alpha: usize, beta: usize) -> Result<BivariateSlice> {
        BivariateSlice::new(self.get(alpha, alpha), self.get(beta, beta), self.get(alpha, beta))
            .map_err(|e| e.at_pair(alpha, beta))
    }

    pub fn max_abs_diff(&self, other: &KernelMatrix) -> f64 {
        (&self.entries - &other.entries).amax()
    }

    /// Rows and columns reordered so that new index `i` is old `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.size();
        Self {
            entries: DMatrix::from_fn(n, n, |i, j| self.entries[(perm[i], perm[j])]),
            layer: self.layer,
        }
    }
}

/// The 2×2 covariance block `[[v_a, c], [c, v_b]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateSlice {
    pub v_a: f64,
    pub v_b: f64,
    pub c: f64,
}

impl BivariateSlice {
    pub fn new(v_a: f64, v_b: f64, c: f64) -> Result<Self> {
        let degenerate = || Error::DegenerateCovariance {
            alpha: 0,
            beta: 0,
            v_a,
            v_b,
            c,
        };
        if !(v_a >= 0.0 && v_b >= 0.0 && c.is_finite() && v_a.is_finite() && v_b.is_finite()) {
            return Err(degenerate());
        }
        if c * c > v_a * v_b + 1e-12 * (1.0 + v_a * v_b) {
            return Err(degenerate());
        }
        Ok(Self { v_a, v_b, c })
    }

    /// Correlation, clamped into `[-1, 1]`; 0 when either variance vanishes.
    pub fn rho(&self) -> f64 {
        let denom = (self.v_a * self.v_b).sqrt();
        if denom == 0.0 {
            0.0
        } else {
            (self.c / denom).clamp(-1.0, 1.0)
        }
    }
}

impl Error {
    pub(crate) fn at_pair(self, a: usize, b: usize) -> Self {
        match self {
            Error::DegenerateCovariance { v_a, v_b, c, .. } => Error::DegenerateCovariance {
                alpha: a,
                beta: b,
                v_a,
                v_b,
                c,
            },
            other => other,
        }
    }
}

/// `E[σ(u_α) σ(u_β)]` for `(u_α, u_β) ~ N(0, slice)`.
pub fn bivariate_expectation(slice: &BivariateSlice, nl: Nonlinearity, quad: &QuadratureRule) -> f64 {
    match nl {
        Nonlinearity::Identity => hermite_expectation(slice, nl, quad),
        _ if nl.has_kink_at_zero() => polar_expectation(slice, nl, &quad.legendre, &quad.radial, 0.0),
        _ => polar_expectation(slice, nl, &quad.legendre, &quad.log_radial, RADIAL_MIN),
    }
}

fn hermite_expectation(slice: &BivariateSlice, nl: Nonlinearity, quad: &QuadratureRule) -> f64 {
    let (sa, sb) = (slice.v_a.sqrt(), slice.v_b.sqrt());
    if slice.v_a == 0.0 || slice.v_b == 0.0 {
        // One coordinate is identically zero.
        let s = sa.max(sb);
        return nl.eval(0.0) * quad.expect(|x| nl.eval(s * x));
    }
    let rho = slice.rho();
    if rho.abs() >= RHO_DEGENERATE {
        let sign = rho.signum();
        return quad.expect(|x| nl.eval(sa * x) * nl.eval(sign * sb * x));
    }
    // u_α = √v_a x, u_β = √v_b (ρ x + √(1-ρ²) y).
    let perp = (1.0 - rho * rho).sqrt();
    quad.nodes
        .iter()
        .zip(&quad.weights)
        .map(|(&x, &wx)| {
            let outer = nl.eval(sa * x);
            if outer == 0.0 {
                return 0.0;
            }
            let base = rho * x;
            let inner: f64 = quad
                .nodes
                .iter()
                .zip(&quad.weights)
                .map(|(&y, &wy)| wy * nl.eval(sb * (base + perp * y)))
                .sum();
            wx * outer * inner
        })
        .sum()
}

/// `(u_α, u_β) = r (a·e(φ), b·e(φ))` with `e(φ) = (cos φ, sin φ)`, `r` Rayleigh
/// and `φ` uniform. Splitting `φ` at the zeros of `a·e(φ)` and `b·e(φ)` makes
/// the integrand smooth on every arc. The radial rule covers `r ≥ r_min`;
/// the disc below it contributes `σ(0)²` times its mass.
fn polar_expectation(
    slice: &BivariateSlice,
    nl: Nonlinearity,
    (lx, lw): &(Vec<f64>, Vec<f64>),
    (radii, rw): &(Vec<f64>, Vec<f64>),
    r_min: f64,
) -> f64 {
    let rho = slice.rho();
    let perp = (1.0 - rho * rho).max(0.0).sqrt();
    let (sa, sb) = (slice.v_a.sqrt(), slice.v_b.sqrt());
    let a = [sa, 0.0];
    let b = [sb * rho, sb * perp];

    let mut cuts: Vec<f64> = Vec::with_capacity(5);
    for form in [a, b] {
        if form != [0.0, 0.0] {
            let phi = (-form[0]).atan2(form[1]).rem_euclid(2.0 * PI);
            cuts.push(phi);
            cuts.push((phi + PI).rem_euclid(2.0 * PI));
        }
    }
    if cuts.is_empty() {
        let s0 = nl.eval(0.0);
        return s0 * s0;
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
    cuts.push(cuts[0] + 2.0 * PI);

    let s0 = nl.eval(0.0);
    let disc = s0 * s0 * -(-0.5 * r_min * r_min).exp_m1();
    let mut total = 0.0;
    for arc in cuts.windows(2) {
        let (lo, hi) = (arc[0], arc[1]);
        let half = 0.5 * (hi - lo);
        if half <= 0.0 {
            continue;
        }
        let mid = 0.5 * (hi + lo);
        for (&t, &w) in lx.iter().zip(lw) {
            let phi = mid + half * t;
            let (s, c) = phi.sin_cos();
            let da = a[0] * c + a[1] * s;
            let db = b[0] * c + b[1] * s;
            let radial: f64 = radii
                .iter()
                .zip(rw)
                .map(|(&r, &wr)| wr * nl.eval(r * da) * nl.eval(r * db))
                .sum();
            total += w * half * radial;
        }
    }
    disc + total / (2.0 * PI)
}

/// Closed form of `E[relu(u_α) relu(u_β)]`:
/// `√(v_a v_b) / 2π · (sin θ + (π - θ) cos θ)`, `θ = arccos ρ`.
pub fn relu_pair_oracle(slice: &BivariateSlice) -> f64 {
    let scale = (slice.v_a * slice.v_b).sqrt();
    if scale == 0.0 {
        return 0.0;
    }
    let theta = slice.rho().acos();
    scale / (2.0 * PI) * (theta.sin() + (PI - theta) * theta.cos())
}

fn check_scales(c_b: f64, c_w: f64) -> Result<()> {
    if !(c_w > 0.0 && c_w.is_finite()) {
        return Err(Error::Validation(format!("C_W must be positive, got {c_w}")));
    }
    BiasLaw::new(c_b).map(|_| ())
}

/// One step of the layerwise recursion.
pub fn kernel_step(
    k: &KernelMatrix,
    nl: Nonlinearity,
    c_b: f64,
    c_w: f64,
    quad: &QuadratureRule,
) -> Result<KernelMatrix> {
    check_scales(c_b, c_w)?;
    let n = k.size();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect();
    let values = pairs
        .par_iter()
        .map(|&(a, b)| {
            let slice = k.slice(a, b)?;
            Ok(c_b + c_w * bivariate_expectation(&slice, nl, quad))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut out = DMatrix::zeros(n, n);
    for (&(a, b), &v) in pairs.iter().zip(&values) {
        out[(a, b)] = v;
        out[(b, a)] = v;
    }
    let next = KernelMatrix::new(out, k.layer() + 1)?;
    next.check_psd()?;
    Ok(next)
}

/// Exact covariance of `z^(1)`: `C_b + (C_W / n_0) ⟨x_α, x_β⟩`.
pub fn first_layer_kernel_gaussian(inputs: &InputSet, n0: usize, c_b: f64, c_w: f64) -> Result<KernelMatrix> {
    check_scales(c_b, c_w)?;
    if inputs.dim() != n0 {
        return Err(Error::DimensionMismatch(format!(
            "n_0 = {n0}, inputs have dimension {}",
            inputs.dim()
        )));
    }
    let x = inputs.as_matrix();
    let gram = x.transpose() * &x;
    let k = gram.map(|g| c_b + c_w / n0 as f64 * g);
    KernelMatrix::new(k, 1)
}

/// Monte Carlo estimate of `K^(2)` with per-entry standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct McKernel {
    pub kernel: KernelMatrix,
    pub se: DMatrix<f64>,
    pub trials: usize,
}

/// Minimum trial count for [`second_layer_kernel_general`].
pub const MIN_MC_TRIALS: usize = 100;

/// Estimate `K^(2) = C_b + C_W E[σ(z^(1)_{1;α}) σ(z^(1)_{1;β})]` for an
/// arbitrary first-layer weight law.
///
/// Each trial draws a first layer with `n_1` neurons; the neurons are iid, so
/// their average is one unbiased sample and the trial means give the SE.
/// Trial `t` uses the stream `(master_seed, t)`.
pub fn second_layer_kernel_general(
    inputs: &InputSet,
    config: &NetworkConfig,
    trials: usize,
    master_seed: u64,
) -> Result<McKernel> {
    config.validate()?;
    if trials < MIN_MC_TRIALS {
        return Err(Error::Validation(format!(
            "second-layer kernel estimate needs at least {MIN_MC_TRIALS} trials, got {trials}"
        )));
    }
    if inputs.dim() != config.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "config n_0 = {}, inputs have dimension {}",
            config.input_dim(),
            inputs.dim()
        )));
    }
    let n0 = config.input_dim();
    let n1 = config.width(1);
    let a = inputs.len();
    let x = inputs.as_matrix();
    let dist: WeightDistribution = config.weight_dist_first;
    let bias = BiasLaw::new(config.c_b)?;
    let nl = config.nonlinearity;
    let scale = (config.c_w / n0 as f64).sqrt();

    let per_trial: Vec<DMatrix<f64>> = map_trials(trials, |t| {
        let mut rng = RngStream::new(master_seed, t);
        let mut acc = DMatrix::<f64>::zeros(a, a);
        let mut w = vec![0.0; n0];
        let mut post = vec![0.0; a];
        for _ in 0..n1 {
            for wj in w.iter_mut() {
                *wj = scale * dist.draw(&mut rng);
            }
            let b = bias.draw(&mut rng);
            for (alpha, p) in post.iter_mut().enumerate() {
                let z = b + x.column(alpha).iter().zip(&w).map(|(xi, wi)| xi * wi).sum::<f64>();
                *p = nl.eval(z);
            }
            for i in 0..a {
                for j in 0..a {
                    acc[(i, j)] += post[i] * post[j];
                }
            }
        }
        acc.map(|v| config.c_b + config.c_w * v / n1 as f64)
    });

    let m = trials as f64;
    let mut mean = DMatrix::<f64>::zeros(a, a);
    for s in &per_trial {
        mean += s;
    }
    mean /= m;
    let mut var = DMatrix::<f64>::zeros(a, a);
    for s in &per_trial {
        let d = s - &mean;
        var += d.component_mul(&d);
    }
    let se = var.map(|v| (v / (m - 1.0) / m).sqrt());
    Ok(McKernel {
        kernel: KernelMatrix::new(mean, 2)?,
        se,
        trials,
    })
}

/// How a layer's kernel was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Exact for identity σ (affine recursion).
    ClosedForm,
    Quadrature,
    MonteCarlo,
    /// Quadrature applied on top of a Monte Carlo `K^(2)`.
    QuadratureOnMonteCarlo,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::ClosedForm => "closed_form",
            Provenance::Quadrature => "quadrature",
            Provenance::MonteCarlo => "monte_carlo",
            Provenance::QuadratureOnMonteCarlo => "quadrature_on_monte_carlo",
        })
    }
}

/// A kernel with its provenance and, for Monte Carlo layers, standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerKernel {
    pub kernel: KernelMatrix,
    pub provenance: Provenance,
    pub se: Option<DMatrix<f64>>,
}

/// `K^(2), ..., K^(L+1)`.
///
/// With a Gaussian first layer, `K^(2)` is one recursion step from the exact
/// `K^(1)`; otherwise it is the Monte Carlo estimate from
/// [`second_layer_kernel_general`] with `mc_trials` trials.
pub fn kernel_forward(
    inputs: &InputSet,
    config: &NetworkConfig,
    quad: &QuadratureRule,
    mc_trials: usize,
    master_seed: u64,
) -> Result<Vec<LayerKernel>> {
    config.validate()?;
    let nl = config.nonlinearity;
    let exact = nl == Nonlinearity::Identity;
    let step_provenance = if exact {
        Provenance::ClosedForm
    } else {
        Provenance::Quadrature
    };
    let mut out = Vec::with_capacity(config.depth);
    let (k2, provenance, se) = if config.weight_dist_first == WeightDistribution::Gaussian {
        let k1 = first_layer_kernel_gaussian(inputs, config.input_dim(), config.c_b, config.c_w)?;
        (kernel_step(&k1, nl, config.c_b, config.c_w, quad)?, step_provenance, None)
    } else {
        let mc = second_layer_kernel_general(inputs, config, mc_trials, master_seed)?;
        (mc.kernel, Provenance::MonteCarlo, Some(mc.se))
    };
    let mc_upstream = provenance == Provenance::MonteCarlo;
    out.push(LayerKernel {
        kernel: k2,
        provenance,
        se,
    });
    for _ in 3..=config.output_layer() {
        let prev = &out.last().expect("non-empty").kernel;
        let next = kernel_step(prev, nl, config.c_b, config.c_w, quad)?;
        out.push(LayerKernel {
            kernel: next,
            provenance: if mc_upstream {
                Provenance::QuadratureOnMonteCarlo
            } else {
                step_provenance
            },
            se: None,
        });
    }
    Ok(out)
}

/// Serialized kernel: entries plus metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelRecord {
    pub layer: usize,
    pub labels: Vec<String>,
    pub provenance: Provenance,
    pub entries: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se: Option<Vec<Vec<f64>>>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl KernelRecord {
    pub fn from_layer(layer: &LayerKernel, labels: &[String]) -> Self {
        Self {
            layer: layer.kernel.layer(),
            labels: labels.to_vec(),
            provenance: layer.provenance,
            entries: rows(layer.kernel.entries()),
            se: layer.se.as_ref().map(rows),
        }
    }
}

/// Row-major CSV of several layers. Header `layer,input,<labels...>`, then one
/// row per (layer, input α) holding `K_{αβ}` over β. Values use Rust's
/// shortest round-trip formatting.
pub fn kernels_to_csv(layers: &[LayerKernel], labels: &[String]) -> String {
    let mut out = String::from("layer,input");
    for l in labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for lk in layers {
        let k = lk.kernel.entries();
        for (a, label) in labels.iter().enumerate() {
            out.push_str(&format!("{},{label}", lk.kernel.layer()));
            for b in 0..labels.len() {
                out.push_str(&format!(",{:?}", k[(a, b)]));
            }
            out.push('\n');
        }
    }
    out
}

/// Parse [`kernels_to_csv`] output back into `(layer, matrix)` pairs.
pub fn kernels_from_csv(text: &str) -> Result<Vec<(usize, DMatrix<f64>)>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("kernel CSV is empty".into()))?;
    let n = header.split(',').count().saturating_sub(2);
    if n == 0 {
        return Err(Error::Parse("kernel CSV header has no input labels".into()));
    }
    let mut out: Vec<(usize, Vec<f64>)> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let bad = || Error::Parse(format!("kernel CSV line {}", lineno + 2));
        if fields.len() != n + 2 {
            return Err(bad());
        }
        let layer: usize = fields[0].parse().map_err(|_| bad())?;
        let vals = fields[2..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        match out.last_mut() {
            Some((l, v)) if *l == layer && v.len() < n * n => v.extend(vals),
            _ => out.push((layer, vals)),
        }
    }
    out.into_iter()
        .map(|(l, v)| {
            if v.len() != n * n {
                return Err(Error::Parse(format!("kernel CSV layer {l} is incomplete")));
            }
            Ok((l, DMatrix::from_row_slice(n, n, &v)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(order: usize) -> QuadratureRule {
        QuadratureRule::gauss_hermite(order).unwrap()
    }

    fn slice(v_a: f64, v_b: f64, c: f64) -> BivariateSlice {
        BivariateSlice::new(v_a, v_b, c).unwrap()
    }

    #[test]
    fn identity_gives_correlation_at_any_order() {
        for order in [2, 5, 64] {
            for rho in [-0.9, -0.3, 0.0, 0.4, 0.99, 1.0] {
                let e = bivariate_expectation(&slice(1.0, 1.0, rho), Nonlinearity::Identity, &quad(order));
                assert!((e - rho).abs() < 1e-13, "order {order} rho {rho}: {e}");
            }
        }
    }

    #[test]
    fn relu_reference_values() {
        let q = quad(64);
        let same = bivariate_expectation(&slice(1.0, 1.0, 1.0), Nonlinearity::Relu, &q);
        assert!((same - 0.5).abs() < 1e-12);
        let indep = bivariate_expectation(&slice(1.0, 1.0, 0.0), Nonlinearity::Relu, &q);
        assert!((indep - 1.0 / (2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn relu_oracle_reference_values() {
        assert!((relu_pair_oracle(&slice(1.0, 1.0, 0.0)) - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((relu_pair_oracle(&slice(1.0, 1.0, 1.0)) - 0.5).abs() < 1e-15);
        assert!(relu_pair_oracle(&slice(4.0, 1.0, -2.0)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_slices_are_rejected() {
        assert!(matches!(
            BivariateSlice::new(1.0, 1.0, 1.5),
            Err(Error::DegenerateCovariance { .. })
        ));
        assert!(BivariateSlice::new(-1.0, 1.0, 0.0).is_err());
        // Within the Cauchy–Schwarz tolerance.
        assert!(BivariateSlice::new(1.0, 1.0, 1.0 + 1e-13).is_ok());
    }

    #[test]
    fn zero_variance_falls_back_to_one_dimension() {
        let q = quad(64);
        // σ(0) = 0 for tanh, so the pair expectation vanishes.
        let e = bivariate_expectation(&slice(0.0, 2.0, 0.0), Nonlinearity::Tanh, &q);
        assert_eq!(e, 0.0);
        // A zero row in K leaves only C_b.
        let k = KernelMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]), 1).unwrap();
        let next = kernel_step(&k, Nonlinearity::Identity, 0.3, 1.0, &q).unwrap();
        assert!((next.get(0, 0) - 0.3).abs() < 1e-15);
        assert!((next.get(1, 1) - 1.3).abs() < 1e-15);
        assert!((next.get(0, 1) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn kernel_step_examples() {
        let q = quad(64);
        let one = KernelMatrix::new(DMatrix::from_element(1, 1, 1.0), 1).unwrap();
        let id = kernel_step(&one, Nonlinearity::Identity, 0.0, 2.0, &q).unwrap();
        assert!((id.get(0, 0) - 2.0).abs() < 1e-14);
        assert_eq!(id.layer(), 2);
        let relu = kernel_step(&one, Nonlinearity::Relu, 0.1, 2.0, &q).unwrap();
        assert!((relu.get(0, 0) - 1.1).abs() < 1e-12);
        let eye = KernelMatrix::new(DMatrix::identity(2, 2), 1).unwrap();
        let tanh = kernel_step(&eye, Nonlinearity::Tanh, 0.0, 1.0, &q).unwrap();
        assert!(tanh.get(0, 1).abs() < 1e-15);
    }

    #[test]
    fn kernel_step_reports_offending_pair() {
        let bad = KernelMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]), 1).unwrap();
        match kernel_step(&bad, Nonlinearity::Tanh, 0.0, 1.0, &quad(8)) {
            Err(Error::DegenerateCovariance { alpha: 0, beta: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(kernel_step(&bad, Nonlinearity::Tanh, 0.0, 0.0, &quad(8)).is_err());
    }

    #[test]
    fn first_layer_examples() {
        let same = InputSet::new(vec![vec![1.0, 0.0]]).unwrap();
        let k = first_layer_kernel_gaussian(&same, 2, 0.0, 1.0).unwrap();
        assert_eq!(k.get(0, 0), 0.5);
        let orth = InputSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let k = first_layer_kernel_gaussian(&orth, 2, 0.3, 1.0).unwrap();
        assert!((k.get(0, 1) - 0.3).abs() < 1e-15);
        assert!(matches!(
            first_layer_kernel_gaussian(&orth, 3, 0.3, 1.0),
            Err(Error::DimensionMismatch(_))
        ));
        let x = [0.3, -1.2, 2.0];
        let pts = [1.0, -2.0, 0.5, 3.0].iter().map(|c| x.iter().map(|v| c * v).collect()).collect();
        let colinear = InputSet::new(pts).unwrap();
        let cb = 0.7;
        let k = first_layer_kernel_gaussian(&colinear, 3, cb, 1.3).unwrap();
        let shifted = KernelMatrix::new(k.entries().map(|v| v - cb), 1).unwrap();
        assert!(shifted.min_eigenvalue() >= -1e-12);
    }

    #[test]
    fn rademacher_single_input_is_exact() {
        // n_0 = 1, x = 1: z^(1) = ±1, so tanh(z)² = tanh(1)² in every trial.
        let inputs = InputSet::new(vec![vec![1.0]]).unwrap();
        let cfg = NetworkConfig::new(vec![1, 16, 1], Nonlinearity::Tanh)
            .unwrap()
            .with_weights(WeightDistribution::Rademacher, WeightDistribution::Gaussian);
        let mc = second_layer_kernel_general(&inputs, &cfg, 100, 0).unwrap();
        // Enumerate both signs: (tanh(1)^2 + tanh(-1)^2) / 2.
        let exact = 0.5 * (1f64.tanh().powi(2) + (-1f64).tanh().powi(2));
        assert!((mc.kernel.get(0, 0) - exact).abs() < 1e-14);
        assert!(mc.se[(0, 0)] < 1e-14);
        assert!(second_layer_kernel_general(&inputs, &cfg, 99, 0).is_err());
    }

    #[test]
    fn kernel_csv_round_trip() {
        let q = quad(16);
        let inputs = InputSet::default_triplet();
        let cfg = NetworkConfig::uniform(2, 3, 4, 1, Nonlinearity::Tanh)
            .unwrap()
            .with_scales(1.5, 0.1)
            .unwrap();
        let layers = kernel_forward(&inputs, &cfg, &q, 100, 0).unwrap();
        let csv = kernels_to_csv(&layers, inputs.labels());
        let back = kernels_from_csv(&csv).unwrap();
        assert_eq!(back.len(), 3);
        for ((l, m), lk) in back.iter().zip(&layers) {
            assert_eq!(*l, lk.kernel.layer());
            assert_eq!(m, lk.kernel.entries());
        }
    }
}
