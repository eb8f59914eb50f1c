use super::{kernel_report_with_trials, pair_label, WidthLadder, KERNEL_MC_TRIALS};
use crate::error::{Error, Result};
use crate::network::{forward, map_trials, sample_network, InputSet, NetworkConfig};
use crate::observables::{conditional_covariance, observable_moments};
use crate::quadrature::QuadratureRule;
use crate::report::ConvergenceReport;
use crate::rng::{splitmix64, RngStream};
use crate::stats::Estimate;

pub const KERNEL_ARM: &str = "kernel";
/// Width-consistency checks allow this many combined standard errors.
pub const CONSISTENCY_SIGMAS: f64 = 4.0;

const KERNEL_TAG: u64 = 0x5349_4d4b;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOptions {
    pub quad_order: usize,
    /// Trials for a Monte Carlo `K^(2)` when the first layer is not Gaussian.
    pub kernel_mc_trials: usize,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            quad_order: QuadratureRule::DEFAULT_ORDER,
            kernel_mc_trials: KERNEL_MC_TRIALS,
        }
    }
}

/// Samples the network at every rung and compares layer-`L+1` second
/// moments with the kernel `K^(L+1)`.
///
/// Network-arm metrics: `sigma_mean[a:b]`, the mean of the conditional
/// covariance `Σ^(L+1)`, and `cov[a:b]`, the output covariance pooled over
/// output neurons. The kernel arm carries `K^(L+1)` as `cov[a:b]` at every
/// rung. For `L = 1` the mean of `Σ^(2)` equals `K^(2)` at every width, and
/// the checks test exactly that: `sigma_mean[a:b]_consistent` (all rungs
/// pairwise within [`CONSISTENCY_SIGMAS`]) and
/// `sigma_mean[a:b]_matches_kernel_at_<n>`.
pub fn simulate_study(
    config: &NetworkConfig,
    inputs: &InputSet,
    ladder: &WidthLadder,
    master_seed: u64,
    options: &SimulateOptions,
) -> Result<ConvergenceReport> {
    config.validate()?;
    if inputs.dim() != config.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "config n_0 = {}, inputs have dimension {}",
            config.input_dim(),
            inputs.dim()
        )));
    }
    let depth = config.depth;
    let arity = inputs.len();
    let pairs: Vec<(usize, usize)> = (0..arity).flat_map(|a| (a..arity).map(move |b| (a, b))).collect();
    let kernels = kernel_report_with_trials(
        config,
        inputs,
        options.quad_order,
        options.kernel_mc_trials,
        splitmix64(master_seed ^ KERNEL_TAG),
    )?;
    let out = kernels.output();

    let mut report = ConvergenceReport::new(
        "simulate",
        config.hash(),
        master_seed,
        ladder.widths.clone(),
        ladder.trials,
    );
    for &n in &ladder.widths {
        let cfg = config.with_hidden_width(n);
        let per_trial = map_trials(ladder.trials, |t| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut rng = RngStream::derive(master_seed, t, n as u64);
            let draw = sample_network(&cfg, &mut rng);
            let acts = forward(&draw, inputs, cfg.nonlinearity)?;
            let sigma = conditional_covariance(&acts, depth, cfg.c_b, cfg.c_w)?;
            let z = acts.output()?;
            let r = z.nrows() as f64;
            Ok((
                pairs.iter().map(|&(a, b)| sigma.get(a, b)).collect(),
                pairs.iter().map(|&(a, b)| z.column(a).dot(&z.column(b)) / r).collect(),
            ))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

        for (e, &(a, b)) in pairs.iter().enumerate() {
            let label = pair_label(a, b);
            let sigma: Vec<f64> = per_trial.iter().map(|p| p.0[e]).collect();
            let cov: Vec<f64> = per_trial.iter().map(|p| p.1[e]).collect();
            let ms = observable_moments(&sigma)?;
            let mc = observable_moments(&cov)?;
            report.push("network", n, &format!("sigma_mean{label}"), Estimate::new(ms.mean, ms.se_mean));
            report.push("network", n, &format!("cov{label}"), Estimate::new(mc.mean, mc.se_mean));
            let kse = out.se.as_ref().map_or(0.0, |s| s[(a, b)]);
            report.push(KERNEL_ARM, n, &format!("cov{label}"), Estimate::new(out.kernel.get(a, b), kse));
        }
    }

    for &(a, b) in &pairs {
        let label = pair_label(a, b);
        let metric = format!("sigma_mean{label}");
        let series = report.series("network", &metric);
        let mut worst = 0.0f64;
        for (i, (_, x)) in series.iter().enumerate() {
            for (_, y) in &series[i + 1..] {
                worst = worst.max((x.value - y.value).abs() / x.combined_se(y));
            }
        }
        if series.len() > 1 {
            report.check(
                format!("{metric}_consistent"),
                worst <= CONSISTENCY_SIGMAS,
                format!("largest pairwise gap {worst:.2} combined SEs across widths"),
            );
        }
        for (n, x) in &series {
            let k = report.get(KERNEL_ARM, *n, &format!("cov{label}")).expect("pushed above");
            let z = (x.value - k.value).abs() / x.combined_se(&k);
            report.check(
                format!("{metric}_matches_kernel_at_{n}"),
                z <= CONSISTENCY_SIGMAS,
                format!("{:.6} ± {:.2e} vs K = {:.6}: {z:.2} SEs", x.value, x.se, k.value),
            );
        }
    }
    Ok(report)
}
