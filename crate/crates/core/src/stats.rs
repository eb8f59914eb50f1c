//! Estimators for convergence diagnostics: covariances, cumulants,
//! characteristic-function distances, cross-neuron dependence and slope fits.
//!
//! Every sum over trials goes through [`ordered_sum`], so each estimator
//! returns the same bits for any permutation of its input trials.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::network::SampleEnsemble;
use crate::observables::{ordered_mean, ordered_sum, ObservableFn};
use crate::rng::RngStream;

/// A value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn new(value: f64, se: f64) -> Self {
        Self { value, se }
    }

    /// `sqrt(se_1² + se_2²)`.
    pub fn combined_se(&self, other: &Estimate) -> f64 {
        self.se.hypot(other.se)
    }

    /// `|value| <= k · se`.
    pub fn within_se_of_zero(&self, k: f64) -> bool {
        self.value.abs() <= k * self.se
    }
}

/// One metric at one rung of a width ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub width: usize,
    pub metric: String,
    pub value: f64,
    pub se: f64,
}

impl ConvergencePoint {
    pub fn new(width: usize, metric: impl Into<String>, est: Estimate) -> Self {
        Self {
            width,
            metric: metric.into(),
            value: est.value,
            se: est.se.max(0.0),
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate::new(self.value, self.se)
    }
}

/// Sample covariance matrix with per-entry standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub cov: DMatrix<f64>,
    pub se: DMatrix<f64>,
    pub count: usize,
}

impl CovarianceEstimate {
    /// `max_{αβ} |cov - target|`, with the SE of the maximizing entry.
    pub fn max_abs_error(&self, target: &DMatrix<f64>) -> Estimate {
        let mut best = Estimate::new(0.0, 0.0);
        let mut found = false;
        for a in 0..self.cov.nrows() {
            for b in a..self.cov.ncols() {
                let d = (self.cov[(a, b)] - target[(a, b)]).abs();
                if !found || d > best.value {
                    best = Estimate::new(d, self.se[(a, b)]);
                    found = true;
                }
            }
        }
        best
    }

    /// Every entry within `k` SEs of the target.
    pub fn matches(&self, target: &DMatrix<f64>, k: f64) -> bool {
        self.cov
            .iter()
            .zip(self.se.iter())
            .zip(target.iter())
            .all(|((c, s), t)| (c - t).abs() <= k * s)
    }
}

/// Unbiased sample covariance of vectors (one per trial).
///
/// The SE of entry `(α, β)` is the standard error of the mean of the
/// centered products `(x_α - x̄_α)(x_β - x̄_β)`.
pub fn sample_covariance(samples: &[Vec<f64>]) -> Result<CovarianceEstimate> {
    let m = samples.len();
    if m < 2 {
        return Err(Error::InsufficientData { needed: 2, got: m });
    }
    let d = samples[0].len();
    if samples.iter().any(|s| s.len() != d) {
        return Err(Error::DimensionMismatch("samples have unequal lengths".into()));
    }
    let mf = m as f64;
    let means: Vec<f64> = (0..d)
        .map(|a| ordered_mean(&samples.iter().map(|s| s[a]).collect::<Vec<_>>()))
        .collect();
    let mut cov = DMatrix::zeros(d, d);
    let mut se = DMatrix::zeros(d, d);
    let mut prods = vec![0.0; m];
    for a in 0..d {
        for b in a..d {
            for (p, s) in prods.iter_mut().zip(samples) {
                *p = (s[a] - means[a]) * (s[b] - means[b]);
            }
            let c = ordered_sum(&prods) / (mf - 1.0);
            let pm = ordered_mean(&prods);
            let dev: Vec<f64> = prods.iter().map(|p| (p - pm).powi(2)).collect();
            let s = (ordered_sum(&dev) / (mf - 1.0) / mf).sqrt();
            cov[(a, b)] = c;
            cov[(b, a)] = c;
            se[(a, b)] = s;
            se[(b, a)] = s;
        }
    }
    Ok(CovarianceEstimate { cov, se, count: m })
}

/// Covariance of `z^(ℓ)_{i;A}` across the trials of an ensemble.
pub fn empirical_covariance(ensemble: &SampleEnsemble, layer: usize, i: usize) -> Result<CovarianceEstimate> {
    let samples = ensemble.coordinate(layer, i)?;
    sample_covariance(&samples)
}

/// Unbiased k-statistics of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KStatistics {
    pub k2: f64,
    pub k3: f64,
    /// Undefined for fewer than four samples.
    pub k4: Option<f64>,
}

/// k-statistics from centered power sums. Needs at least 3 samples.
pub fn k_statistics(xs: &[f64]) -> Result<KStatistics> {
    let n = xs.len();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    let nf = n as f64;
    let mean = ordered_mean(xs);
    let d: Vec<f64> = xs.iter().map(|x| x - mean).collect();
    let s2 = ordered_sum(&d.iter().map(|v| v * v).collect::<Vec<_>>());
    let s3 = ordered_sum(&d.iter().map(|v| v * v * v).collect::<Vec<_>>());
    let k2 = s2 / (nf - 1.0);
    let k3 = nf * s3 / ((nf - 1.0) * (nf - 2.0));
    let k4 = (n >= 4).then(|| {
        let s4 = ordered_sum(&d.iter().map(|v| v.powi(4)).collect::<Vec<_>>());
        nf * ((nf + 1.0) * s4 - 3.0 * (nf - 1.0) * s2 * s2 / nf) / ((nf - 1.0) * (nf - 2.0) * (nf - 3.0))
    });
    Ok(KStatistics { k2, k3, k4 })
}

/// k-statistics from raw power sums `s_r = Σ x^r` (used by the jackknife,
/// where one value is removed from the sums at a time).
fn k_from_power_sums(n: f64, s1: f64, s2: f64, s3: f64, s4: f64) -> (f64, f64, f64) {
    let k2 = (n * s2 - s1 * s1) / (n * (n - 1.0));
    let k3 = (2.0 * s1.powi(3) - 3.0 * n * s1 * s2 + n * n * s3) / (n * (n - 1.0) * (n - 2.0));
    let k4 = (-6.0 * s1.powi(4) + 12.0 * n * s1 * s1 * s2
        - 3.0 * n * (n - 1.0) * s2 * s2
        - 4.0 * n * (n + 1.0) * s1 * s3
        + n * n * (n + 1.0) * s4)
        / (n * (n - 1.0) * (n - 2.0) * (n - 3.0));
    (k2, k3, k4)
}

/// Third and fourth cumulant estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessCumulants {
    pub kappa3: Estimate,
    pub kappa4: Estimate,
    /// Variance (second k-statistic) with its jackknife SE.
    pub kappa2: Estimate,
}

/// Unbiased κ₃ and κ₄ with delete-one jackknife standard errors.
pub fn excess_cumulants(xs: &[f64]) -> Result<ExcessCumulants> {
    let n = xs.len();
    if n < 10 {
        return Err(Error::InsufficientData { needed: 10, got: n });
    }
    let ks = k_statistics(xs)?;
    // Shift by the mean before forming raw power sums to limit cancellation.
    let mean = ordered_mean(xs);
    let d: Vec<f64> = xs.iter().map(|x| x - mean).collect();
    let pow_sum = |r: i32| ordered_sum(&d.iter().map(|v| v.powi(r)).collect::<Vec<_>>());
    let (s1, s2, s3, s4) = (pow_sum(1), pow_sum(2), pow_sum(3), pow_sum(4));
    let nm = (n - 1) as f64;
    let mut leave: [Vec<f64>; 3] = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (i, &v) in d.iter().enumerate() {
        let v2 = v * v;
        let (a, b, c) = k_from_power_sums(nm, s1 - v, s2 - v2, s3 - v2 * v, s4 - v2 * v2);
        leave[0][i] = a;
        leave[1][i] = b;
        leave[2][i] = c;
    }
    let jack = |vals: &[f64]| {
        let m = ordered_mean(vals);
        let dev: Vec<f64> = vals.iter().map(|v| (v - m).powi(2)).collect();
        ((n as f64 - 1.0) / n as f64 * ordered_sum(&dev)).sqrt()
    };
    Ok(ExcessCumulants {
        kappa2: Estimate::new(ks.k2, jack(&leave[0])),
        kappa3: Estimate::new(ks.k3, jack(&leave[1])),
        kappa4: Estimate::new(ks.k4.expect("n >= 10"), jack(&leave[2])),
    })
}

/// Probe matrices `Ξ ∈ R^{n_out × |A|}` for characteristic-function tests.
#[derive(Debug, Clone, PartialEq)]
pub struct CfProbeSet {
    pub probes: Vec<DMatrix<f64>>,
    pub seed: u64,
}

impl CfProbeSet {
    pub const DEFAULT_COUNT: usize = 32;
    pub const MAX_NORM: f64 = 3.0;

    /// `count` probes with Gaussian directions and Frobenius norms spread
    /// evenly over `[min_norm, max_norm]`.
    ///
    /// Norms are in units of the kernel scale: pass `1/sqrt(trace K)`-scaled
    /// ranges when the outputs are far from unit variance.
    pub fn generate(rows: usize, cols: usize, count: usize, seed: u64, min_norm: f64, max_norm: f64) -> Result<Self> {
        if !(0.0 < min_norm && min_norm <= max_norm && max_norm <= Self::MAX_NORM) {
            return Err(Error::Validation(format!(
                "probe norms must satisfy 0 < min <= max <= {}, got [{min_norm}, {max_norm}]",
                Self::MAX_NORM
            )));
        }
        if count == 0 || rows == 0 || cols == 0 {
            return Err(Error::Validation("probe set must be non-empty".into()));
        }
        let mut rng = RngStream::new(seed, 0);
        let probes = (0..count)
            .map(|p| {
                let dir = DMatrix::from_fn(rows, cols, |_, _| rng.standard_normal());
                let t = if count == 1 { 0.5 } else { p as f64 / (count - 1) as f64 };
                let radius = min_norm + t * (max_norm - min_norm);
                let norm = dir.norm();
                if norm == 0.0 {
                    dir
                } else {
                    dir * (radius / norm)
                }
            })
            .collect();
        Ok(Self { probes, seed })
    }

    /// Probes scaled so `Σ_i ξ_iᵀ K ξ_i` spans a moderate range, which is
    /// where the characteristic function is most informative. Norms are
    /// `[0.3, 2] / sqrt(max K_{αα})`, capped at [`Self::MAX_NORM`].
    pub fn for_kernel(rows: usize, kernel: &KernelMatrix, count: usize, seed: u64) -> Result<Self> {
        let scale = (0..kernel.size()).map(|a| kernel.get(a, a)).fold(0.0, f64::max).sqrt();
        let s = if scale > 0.0 { 1.0 / scale } else { 1.0 };
        let max = (2.0 * s).min(Self::MAX_NORM);
        let min = (0.3 * s).min(max);
        Self::generate(rows, kernel.size(), count, seed, min, max)
    }

    pub fn from_probes(probes: Vec<DMatrix<f64>>) -> Self {
        Self { probes, seed: 0 }
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }
}

/// Result of [`cf_distance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfDistance {
    pub value: f64,
    pub se: f64,
    /// Index of the maximizing probe.
    pub probe: usize,
}

impl CfDistance {
    pub fn estimate(&self) -> Estimate {
        Estimate::new(self.value, self.se)
    }
}

/// `max_Ξ |χ̂(Ξ) - exp(-½ Σ_i ξ_iᵀ K ξ_i)|` over the probes, where
/// `χ̂(Ξ) = M^{-1} Σ_t exp(i ⟨Ξ, z_t⟩)` and `z_t` is the `n_out × |A|` output
/// of trial `t`. The SE is `sqrt((Var cos + Var sin)/M)` at the maximizing
/// probe.
pub fn cf_distance(outputs: &[&DMatrix<f64>], kernel: &KernelMatrix, probes: &CfProbeSet) -> Result<CfDistance> {
    let m = outputs.len();
    if m < 100 {
        return Err(Error::InsufficientData { needed: 100, got: m });
    }
    let k = kernel.entries();
    let mut best = CfDistance {
        value: -1.0,
        se: 0.0,
        probe: 0,
    };
    let mut cos = vec![0.0; m];
    let mut sin = vec![0.0; m];
    for (p, xi) in probes.probes.iter().enumerate() {
        if xi.ncols() != k.nrows() || outputs.iter().any(|z| z.shape() != xi.shape()) {
            return Err(Error::DimensionMismatch(format!(
                "probe is {:?}, outputs must match and kernel is {}x{}",
                xi.shape(),
                k.nrows(),
                k.ncols()
            )));
        }
        let quad: f64 = (0..xi.nrows())
            .map(|i| {
                let row = xi.row(i).transpose();
                (row.transpose() * k * &row)[(0, 0)]
            })
            .sum();
        let target = (-0.5 * quad).exp();
        for (t, z) in outputs.iter().enumerate() {
            let phase = xi.dot(z);
            cos[t] = phase.cos();
            sin[t] = phase.sin();
        }
        let mc = ordered_mean(&cos);
        let ms = ordered_mean(&sin);
        let dist = (mc - target).hypot(ms);
        if dist > best.value {
            let var = |v: &[f64], mean: f64| {
                ordered_sum(&v.iter().map(|x| (x - mean).powi(2)).collect::<Vec<_>>()) / (m as f64 - 1.0)
            };
            let se = ((var(&cos, mc) + var(&sin, ms)) / m as f64).sqrt();
            best = CfDistance {
                value: dist,
                se,
                probe: p,
            };
        }
    }
    if best.value < 0.0 {
        return Err(Error::Validation("probe set is empty".into()));
    }
    Ok(best)
}

/// `Cov(f(z_{1;A}), f(z_{2;A}))` across trials, from the first two output
/// neurons.
pub fn cross_neuron_cov(outputs: &[&DMatrix<f64>], f: &ObservableFn) -> Result<Estimate> {
    let m = outputs.len();
    if let Some(z) = outputs.first() {
        if z.nrows() < 2 {
            return Err(Error::Validation(format!(
                "cross-neuron covariance needs at least 2 output neurons, got {}",
                z.nrows()
            )));
        }
        f.validate(z.ncols())?;
    }
    if m < 100 {
        return Err(Error::InsufficientData { needed: 100, got: m });
    }
    let pairs: Vec<Vec<f64>> = outputs
        .iter()
        .map(|z| {
            let r0: Vec<f64> = z.row(0).iter().copied().collect();
            let r1: Vec<f64> = z.row(1).iter().copied().collect();
            vec![f.eval(&r0), f.eval(&r1)]
        })
        .collect();
    let est = sample_covariance(&pairs)?;
    Ok(Estimate::new(est.cov[(0, 1)], est.se[(0, 1)]))
}

/// Delete-one jackknife for a smooth function of per-trial feature means.
///
/// `features[t]` holds the per-trial features; the estimate is
/// `theta(feature means)` and the SE is the jackknife spread of
/// `theta` over the leave-one-out means.
pub fn jackknife_means<F>(features: &[Vec<f64>], theta: F) -> Result<Estimate>
where
    F: Fn(&[f64]) -> f64,
{
    let m = features.len();
    if m < 2 {
        return Err(Error::InsufficientData { needed: 2, got: m });
    }
    let k = features[0].len();
    let sums: Vec<f64> = (0..k)
        .map(|j| ordered_sum(&features.iter().map(|f| f[j]).collect::<Vec<_>>()))
        .collect();
    let means: Vec<f64> = sums.iter().map(|s| s / m as f64).collect();
    let value = theta(&means);
    let mut buf = vec![0.0; k];
    let leave: Vec<f64> = features
        .iter()
        .map(|f| {
            for j in 0..k {
                buf[j] = (sums[j] - f[j]) / (m - 1) as f64;
            }
            theta(&buf)
        })
        .collect();
    let lm = ordered_mean(&leave);
    let dev: Vec<f64> = leave.iter().map(|v| (v - lm).powi(2)).collect();
    let se = ((m as f64 - 1.0) / m as f64 * ordered_sum(&dev)).sqrt();
    Ok(Estimate::new(value, se))
}

/// Cumulants of the common marginal law of `z_{i;α}` when the rows of each
/// trial's output are exchangeable: power sums are averaged over rows within
/// a trial and over trials, and SEs come from a jackknife over trials.
pub fn pooled_cumulants(outputs: &[&DMatrix<f64>], alpha: usize) -> Result<ExcessCumulants> {
    if outputs.len() < 10 {
        return Err(Error::InsufficientData {
            needed: 10,
            got: outputs.len(),
        });
    }
    if outputs.iter().any(|z| alpha >= z.ncols()) {
        return Err(Error::DimensionMismatch(format!("input index {alpha} out of range")));
    }
    let features: Vec<Vec<f64>> = outputs
        .iter()
        .map(|z| {
            let col = z.column(alpha);
            let r = col.len() as f64;
            let mut f = vec![0.0; 4];
            for &v in col.iter() {
                let v2 = v * v;
                f[0] += v;
                f[1] += v2;
                f[2] += v2 * v;
                f[3] += v2 * v2;
            }
            f.iter_mut().for_each(|x| *x /= r);
            f
        })
        .collect();
    let k2 = |m: &[f64]| m[1] - m[0] * m[0];
    let k3 = |m: &[f64]| m[2] - 3.0 * m[1] * m[0] + 2.0 * m[0].powi(3);
    let k4 = |m: &[f64]| {
        m[3] - 4.0 * m[2] * m[0] - 3.0 * m[1] * m[1] + 12.0 * m[1] * m[0] * m[0] - 6.0 * m[0].powi(4)
    };
    Ok(ExcessCumulants {
        kappa2: jackknife_means(&features, k2)?,
        kappa3: jackknife_means(&features, k3)?,
        kappa4: jackknife_means(&features, k4)?,
    })
}

/// `Cov(f(z_{i;A}), f(z_{j;A}))` for `i != j`, averaged over all ordered
/// pairs of output rows within each trial (rows are exchangeable), with a
/// jackknife SE over trials. Equals [`cross_neuron_cov`]'s estimand.
pub fn pooled_cross_neuron_cov(outputs: &[&DMatrix<f64>], f: &ObservableFn) -> Result<Estimate> {
    let m = outputs.len();
    if let Some(z) = outputs.first() {
        if z.nrows() < 2 {
            return Err(Error::Validation(format!(
                "cross-neuron covariance needs at least 2 output neurons, got {}",
                z.nrows()
            )));
        }
        f.validate(z.ncols())?;
    }
    if m < 100 {
        return Err(Error::InsufficientData { needed: 100, got: m });
    }
    let features: Vec<Vec<f64>> = outputs
        .iter()
        .map(|z| {
            let r = z.nrows() as f64;
            let mut row = vec![0.0; z.ncols()];
            let (mut s1, mut s2) = (0.0, 0.0);
            for i in 0..z.nrows() {
                for (a, slot) in row.iter_mut().enumerate() {
                    *slot = z[(i, a)];
                }
                let v = f.eval(&row);
                s1 += v;
                s2 += v * v;
            }
            vec![(s1 * s1 - s2) / (r * (r - 1.0)), s1 / r]
        })
        .collect();
    jackknife_means(&features, |m| m[0] - m[1] * m[1])
}

/// Weighted least-squares fit of `log value` on `log width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub se: f64,
    /// 95% confidence interval.
    pub ci: (f64, f64),
}

/// Fits `log v = a + b log n` with weights `(v / se)²`, the inverse variance
/// of `log v` to first order. Unit weights are used if any SE is zero.
pub fn loglog_slope(points: &[(usize, Estimate)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: points.len(),
        });
    }
    for &(n, e) in points {
        if n == 0 {
            return Err(Error::Validation("slope fit needs positive widths".into()));
        }
        if e.value.is_nan() || e.value <= 0.0 {
            return Err(Error::NonPositive { width: n, value: e.value });
        }
    }
    let x: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.value.ln()).collect();
    let w: Vec<f64> = if points.iter().any(|p| p.1.se.is_nan() || p.1.se <= 0.0) {
        vec![1.0; points.len()]
    } else {
        points.iter().map(|p| (p.1.value / p.1.se).powi(2)).collect()
    };
    let sw: f64 = w.iter().sum();
    let xm = w.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = w.iter().zip(&y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(&x).map(|(w, x)| w * (x - xm).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Validation("slope fit needs at least two distinct widths".into()));
    }
    let sxy: f64 = w.iter().zip(x.iter().zip(&y)).map(|(w, (x, y))| w * (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let dof = points.len() - 2;
    let rss: f64 = w
        .iter()
        .zip(x.iter().zip(&y))
        .map(|(w, (x, y))| w * (y - intercept - slope * x).powi(2))
        .sum();
    let se = (rss / dof as f64 / sxx).sqrt();
    let t = t_quantile_975(dof);
    Ok(SlopeFit {
        slope,
        intercept,
        se,
        ci: (slope - t * se, slope + t * se),
    })
}

/// Two-sided 95% Student-t quantile.
fn t_quantile_975(dof: usize) -> f64 {
    const TABLE: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131,
        2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
    ];
    match dof {
        0 => f64::INFINITY,
        d if d <= 30 => TABLE[d - 1],
        _ => 1.96,
    }
}

/// Draws rows iid from `N(0, K)` using a symmetric square root of `K`,
/// which also handles singular kernels.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    root: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(kernel: &DMatrix<f64>) -> Result<Self> {
        if !kernel.is_square() {
            return Err(Error::DimensionMismatch("kernel must be square".into()));
        }
        let eig = SymmetricEigen::new(kernel.clone());
        let tol = 1e-10 * kernel.trace().abs().max(f64::MIN_POSITIVE);
        if eig.eigenvalues.min() < -tol {
            return Err(Error::NotPsd {
                layer: 0,
                min_eigenvalue: eig.eigenvalues.min(),
                tol,
            });
        }
        let sqrt = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()));
        let root = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt);
        Ok(Self { root })
    }

    pub fn dim(&self) -> usize {
        self.root.nrows()
    }

    /// One vector `K^{1/2} g`.
    pub fn draw(&self, rng: &mut RngStream) -> DVector<f64> {
        let g = DVector::from_fn(self.dim(), |_, _| rng.standard_normal());
        &self.root * g
    }

    /// `rows × |A|` matrix with iid `N(0, K)` rows.
    pub fn draw_rows(&self, rows: usize, rng: &mut RngStream) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(rows, self.dim());
        for i in 0..rows {
            let v = self.draw(rng);
            out.row_mut(i).copy_from(&v.transpose());
        }
        out
    }
}
