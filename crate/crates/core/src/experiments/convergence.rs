use nalgebra::DMatrix;

use super::{
    kernel_report_with_trials, pair_label, separated_above, WidthLadder, KAPPA4_LIMIT, KERNEL_MC_TRIALS,
    VARIANCE_SLOPE_WINDOW, ZERO_SIGMAS,
};
use crate::error::Result;
use crate::kernel::KernelMatrix;
use crate::network::{forward, map_trials, sample_network, InputSet, NetworkConfig};
use crate::observables::{conditional_covariance, observable_moments, ObservableFn};
use crate::quadrature::QuadratureRule;
use crate::report::{ConvergenceReport, SlopeRecord};
use crate::rng::{splitmix64, RngStream};
use crate::stats::{
    cf_distance, cross_neuron_cov, loglog_slope, pooled_cross_neuron_cov, pooled_cumulants, CfProbeSet, Estimate, GaussianSampler,
};

pub const NETWORK_ARM: &str = "network";
pub const ORACLE_ARM: &str = "oracle";

const ORACLE_TAG: u64 = 1 << 40;
const PROBE_TAG: u64 = 0x5052_4f42;
const KERNEL_TAG: u64 = 0x4b45_524e;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceOptions {
    /// Characteristic-function probes per study.
    pub probes: usize,
    pub quad_order: usize,
    /// Trials for a Monte Carlo `K^(2)` when the first layer is not Gaussian.
    pub kernel_mc_trials: usize,
    /// Observable for the cross-neuron covariance; defaults to `σ(z_0)²`.
    pub cross_observable: Option<ObservableFn>,
    /// Also run the arm that samples directly from `N(0, K^(L+1))`.
    pub oracle_arm: bool,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self {
            probes: CfProbeSet::DEFAULT_COUNT,
            quad_order: QuadratureRule::DEFAULT_ORDER,
            kernel_mc_trials: KERNEL_MC_TRIALS,
            cross_observable: None,
            oracle_arm: true,
        }
    }
}

/// Measures, at every rung of the ladder, how far the finite-width output
/// law is from `N(0, K^(L+1))`:
///
/// * `cov[a:b]`, `cov_error`: output covariance, pooled over output neurons,
///   and its largest deviation from the kernel;
/// * `kappa3[a]`, `kappa4[a]`: cumulants of `z_{i;a}` relative to
///   `K_aa^{3/2}` and `K_aa²`, pooled over output neurons;
/// * `cf_distance`: characteristic-function distance over random probes;
/// * `cross_cov`: covariance of an observable between output neurons 1 and
///   2; `cross_cov_pooled` averages it over all neuron pairs, which is far
///   more precise (both need `n_out >= 2`);
/// * `sigma_mean[a:b]`, `var_sigma[a:b]`: mean and variance of the
///   conditional covariance `Σ^(L+1)` (network arm only).
///
/// The oracle arm repeats the output metrics on exact Gaussian samples with
/// the same trial count, which calibrates the standard errors.
pub fn convergence_study(
    config: &NetworkConfig,
    inputs: &InputSet,
    ladder: &WidthLadder,
    master_seed: u64,
    options: &ConvergenceOptions,
) -> Result<ConvergenceReport> {
    config.validate()?;
    let depth = config.depth;
    let n_out = config.output_dim();
    let arity = inputs.len();
    let cross_fn = options
        .cross_observable
        .unwrap_or(ObservableFn::PostActivationProduct {
            alpha: 0,
            beta: 0,
            nonlinearity: config.nonlinearity,
        });
    cross_fn.validate(arity)?;

    let kernels = kernel_report_with_trials(
        config,
        inputs,
        options.quad_order,
        options.kernel_mc_trials,
        splitmix64(master_seed ^ KERNEL_TAG),
    )?;
    let k = kernels.output().kernel.clone();
    let probes = CfProbeSet::for_kernel(n_out, &k, options.probes, splitmix64(master_seed ^ PROBE_TAG))?;
    let sampler = GaussianSampler::new(k.entries())?;

    let mut report = ConvergenceReport::new(
        "converge",
        config.hash(),
        master_seed,
        ladder.widths.clone(),
        ladder.trials,
    );

    for &n in &ladder.widths {
        let cfg = config.with_hidden_width(n);
        let results = map_trials(ladder.trials, |t| -> Result<(DMatrix<f64>, DMatrix<f64>)> {
            let mut rng = RngStream::derive(master_seed, t, n as u64);
            let draw = sample_network(&cfg, &mut rng);
            let acts = forward(&draw, inputs, cfg.nonlinearity)?;
            let sigma = conditional_covariance(&acts, depth, cfg.c_b, cfg.c_w)?;
            Ok((acts.output()?.clone(), sigma.entries))
        });
        let mut outputs = Vec::with_capacity(ladder.trials);
        let mut sigmas = Vec::with_capacity(ladder.trials);
        for r in results {
            let (o, s) = r?;
            outputs.push(o);
            sigmas.push(s);
        }
        output_metrics(&mut report, NETWORK_ARM, n, &outputs, &k, &probes, &cross_fn)?;
        for a in 0..arity {
            for b in a..arity {
                let vals: Vec<f64> = sigmas.iter().map(|s| s[(a, b)]).collect();
                let m = observable_moments(&vals)?;
                let label = pair_label(a, b);
                report.push(NETWORK_ARM, n, &format!("sigma_mean{label}"), Estimate::new(m.mean, m.se_mean));
                report.push(
                    NETWORK_ARM,
                    n,
                    &format!("var_sigma{label}"),
                    Estimate::new(m.variance, m.se_variance),
                );
                if m.variance <= 0.0 {
                    report
                        .degenerate
                        .push(format!("width {n}: var_sigma{label} = {} (noise floor)", m.variance));
                }
            }
        }

        if options.oracle_arm {
            let oracle: Vec<DMatrix<f64>> = map_trials(ladder.trials, |t| {
                let mut rng = RngStream::derive(master_seed, t, ORACLE_TAG + n as u64);
                sampler.draw_rows(n_out, &mut rng)
            });
            output_metrics(&mut report, ORACLE_ARM, n, &oracle, &k, &probes, &cross_fn)?;
        }
    }

    add_checks(&mut report, ladder, arity, options.oracle_arm);
    Ok(report)
}

fn output_metrics(
    report: &mut ConvergenceReport,
    arm: &str,
    width: usize,
    outputs: &[DMatrix<f64>],
    k: &KernelMatrix,
    probes: &CfProbeSet,
    cross_fn: &ObservableFn,
) -> Result<()> {
    let arity = k.size();
    let n_out = outputs[0].nrows();
    let mut worst = Estimate::new(-1.0, 0.0);
    for a in 0..arity {
        for b in a..arity {
            // Known-zero-mean estimator, averaged over the exchangeable
            // output neurons of each trial.
            let vals: Vec<f64> = outputs
                .iter()
                .map(|z| z.column(a).dot(&z.column(b)) / n_out as f64)
                .collect();
            let m = observable_moments(&vals)?;
            report.push(arm, width, &format!("cov{}", pair_label(a, b)), Estimate::new(m.mean, m.se_mean));
            let err = (m.mean - k.get(a, b)).abs();
            if err > worst.value {
                worst = Estimate::new(err, m.se_mean);
            }
        }
    }
    report.push(arm, width, "cov_error", worst);

    for a in 0..arity {
        let kaa = k.get(a, a);
        if kaa <= 0.0 {
            continue;
        }
        let refs: Vec<&DMatrix<f64>> = outputs.iter().collect();
        let c = pooled_cumulants(&refs, a)?;
        let s3 = kaa.powf(1.5);
        let s4 = kaa * kaa;
        report.push(
            arm,
            width,
            &format!("kappa3[{a}]"),
            Estimate::new(c.kappa3.value / s3, c.kappa3.se / s3),
        );
        report.push(
            arm,
            width,
            &format!("kappa4[{a}]"),
            Estimate::new(c.kappa4.value / s4, c.kappa4.se / s4),
        );
    }

    if outputs.len() >= 100 {
        let refs: Vec<&DMatrix<f64>> = outputs.iter().collect();
        report.push(arm, width, "cf_distance", cf_distance(&refs, k, probes)?.estimate());
        if n_out >= 2 {
            report.push(arm, width, "cross_cov", cross_neuron_cov(&refs, cross_fn)?);
            report.push(arm, width, "cross_cov_pooled", pooled_cross_neuron_cov(&refs, cross_fn)?);
        }
    }
    Ok(())
}

fn add_checks(report: &mut ConvergenceReport, ladder: &WidthLadder, arity: usize, oracle: bool) {
    let (first, last) = (ladder.first(), ladder.last());

    if ladder.supports_slopes() {
        for a in 0..arity {
            for b in a..arity {
                let metric = format!("var_sigma{}", pair_label(a, b));
                let series = report.series(NETWORK_ARM, &metric);
                let name = format!("slope_{metric}");
                match loglog_slope(&series) {
                    Ok(fit) => {
                        let (lo, hi) = VARIANCE_SLOPE_WINDOW;
                        report.check(
                            name,
                            (lo..=hi).contains(&fit.slope),
                            format!("slope {:.4} ± {:.4} in [{lo}, {hi}]", fit.slope, fit.se),
                        );
                        report.slopes.push(SlopeRecord {
                            arm: NETWORK_ARM.into(),
                            metric,
                            fit,
                        });
                    }
                    Err(e) => {
                        report.degenerate.push(format!("{metric}: {e}"));
                        report.check(name, false, format!("no fit: {e}"));
                    }
                }
            }
        }
    }

    for a in 0..arity {
        let metric = format!("kappa4[{a}]");
        let (Some(lo), Some(hi)) = (report.get(NETWORK_ARM, first, &metric), report.get(NETWORK_ARM, last, &metric))
        else {
            continue;
        };
        report.check(
            format!("{metric}_small_at_{last}"),
            hi.value.abs() <= KAPPA4_LIMIT,
            format!("|kappa4|/K² = {:.4} ± {:.4} <= {KAPPA4_LIMIT}", hi.value.abs(), hi.se),
        );
        if first != last {
            report.check(
                format!("{metric}_decreases"),
                separated_above(abs(lo), abs(hi)),
                format!(
                    "|kappa4| {:.4} ± {:.4} at {first} vs {:.4} ± {:.4} at {last}",
                    lo.value.abs(),
                    lo.se,
                    hi.value.abs(),
                    hi.se
                ),
            );
        }
    }

    if let (Some(net), Some(orc)) = (
        report.get(NETWORK_ARM, last, "cf_distance"),
        report.get(ORACLE_ARM, last, "cf_distance"),
    ) {
        let se = net.combined_se(&orc);
        report.check(
            format!("cf_distance_matches_oracle_at_{last}"),
            (net.value - orc.value).abs() <= ZERO_SIGMAS * se,
            format!("network {:.5} vs oracle {:.5}, combined SE {:.5}", net.value, orc.value, se),
        );
    }

    if let (Some(lo), Some(hi)) = (
        report.get(NETWORK_ARM, first, "cross_cov"),
        report.get(NETWORK_ARM, last, "cross_cov"),
    ) {
        if first != last {
            report.check(
                "cross_cov_decreases",
                separated_above(abs(lo), abs(hi)),
                format!(
                    "|cross_cov| {:.5} ± {:.5} at {first} vs {:.5} ± {:.5} at {last}",
                    lo.value.abs(),
                    lo.se,
                    hi.value.abs(),
                    hi.se
                ),
            );
        }
        report.check(
            format!("cross_cov_zero_at_{last}"),
            hi.within_se_of_zero(ZERO_SIGMAS),
            format!("{:.5} ± {:.5}", hi.value, hi.se),
        );
    }

    if oracle {
        let mut failures = Vec::new();
        for p in report.points.iter().filter(|p| p.arm == ORACLE_ARM) {
            let zero_metric = p.metric == "cov_error"
                || p.metric.starts_with("kappa")
                || p.metric == "cf_distance"
                || p.metric.starts_with("cross_cov");
            if zero_metric && !p.estimate().within_se_of_zero(ZERO_SIGMAS) {
                failures.push(format!("{}@{} = {:.3e} ± {:.3e}", p.metric, p.width, p.value, p.se));
            }
        }
        report.check(
            "oracle_statistically_zero",
            failures.is_empty(),
            if failures.is_empty() {
                format!("all oracle metrics within {ZERO_SIGMAS} SE of 0")
            } else {
                failures.join("; ")
            },
        );
    }
}

fn abs(e: Estimate) -> Estimate {
    Estimate::new(e.value.abs(), e.se)
}
