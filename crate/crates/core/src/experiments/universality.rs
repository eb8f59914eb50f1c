use serde::{Deserialize, Serialize};

use super::{pair_label, separated_above, WidthLadder};
use crate::distributions::WeightDistribution;
use crate::error::{Error, Result};
use crate::network::{forward, map_trials, InputSet, NetworkConfig, StandardDraw};
use crate::observables::observable_moments;
use crate::report::{ConvergenceReport, SlopeRecord};
use crate::rng::RngStream;
use crate::stats::{loglog_slope, Estimate};

/// Covariance differences must lie within this many SEs of zero.
pub const COV_DIFF_SIGMAS: f64 = 4.0;

/// Bounded smooth test functions of one neuron's outputs `z_{i;A}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    /// `exp(-‖z‖²)`.
    GaussianBump,
    /// `∏_α tanh(z_α)`.
    TanhProduct,
}

impl TestFunction {
    pub const ALL: [TestFunction; 2] = [TestFunction::GaussianBump, TestFunction::TanhProduct];

    pub fn name(&self) -> &'static str {
        match self {
            TestFunction::GaussianBump => "gaussian_bump",
            TestFunction::TanhProduct => "tanh_product",
        }
    }

    #[inline]
    pub fn eval(&self, z: impl Iterator<Item = f64>) -> f64 {
        match self {
            TestFunction::GaussianBump => (-z.map(|v| v * v).sum::<f64>()).exp(),
            TestFunction::TanhProduct => z.map(f64::tanh).product(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniversalityOptions {
    /// Weight laws for layers `>= 2`; the first layer keeps the config's law.
    pub dists: Vec<WeightDistribution>,
    pub test_functions: Vec<TestFunction>,
}

impl Default for UniversalityOptions {
    fn default() -> Self {
        Self {
            dists: WeightDistribution::ALL.to_vec(),
            test_functions: TestFunction::ALL.to_vec(),
        }
    }
}

/// Per-trial summaries of one arm: pooled output second moments (upper
/// triangle) and neuron-averaged test-function values.
struct ArmTrial {
    cov: Vec<f64>,
    g: Vec<f64>,
}

/// Compares networks that differ only in the weight law of layers `>= 2`.
///
/// All arms of a trial are realized from the same standard normal variates
/// (each law is a monotone map of a normal), so arm differences are paired
/// and their standard errors come from per-trial differences. Every output
/// neuron is a readout of the same last hidden layer, and per-trial values
/// are averaged over them.
///
/// Metrics per rung: `cov[a:b]` and `g[<name>]` per arm; for each pair of
/// arms (`<a>~<b>`), `cov_diff` (largest entry of the covariance
/// difference) and `gap[<name>] = |Ê g(z) - Ê g(z̃)|`.
pub fn universality_study(
    config: &NetworkConfig,
    inputs: &InputSet,
    ladder: &WidthLadder,
    master_seed: u64,
    options: &UniversalityOptions,
) -> Result<ConvergenceReport> {
    config.validate()?;
    if options.dists.len() < 2 {
        return Err(Error::Validation(
            "universality needs at least two weight distributions".into(),
        ));
    }
    if options.test_functions.is_empty() {
        return Err(Error::Validation("universality needs at least one test function".into()));
    }
    if inputs.dim() != config.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "config n_0 = {}, inputs have dimension {}",
            config.input_dim(),
            inputs.dim()
        )));
    }
    let arity = inputs.len();
    let pairs_idx: Vec<(usize, usize)> = (0..arity).flat_map(|a| (a..arity).map(move |b| (a, b))).collect();
    let labels = arm_labels(&options.dists);
    let gs = &options.test_functions;

    let mut report = ConvergenceReport::new(
        "universality",
        config.hash(),
        master_seed,
        ladder.widths.clone(),
        ladder.trials,
    );

    for &n in &ladder.widths {
        let base = config.with_hidden_width(n);
        let arms: Vec<NetworkConfig> = options
            .dists
            .iter()
            .map(|&d| base.clone().with_weights(config.weight_dist_first, d))
            .collect();
        let results = map_trials(ladder.trials, |t| -> Result<Vec<ArmTrial>> {
            let mut rng = RngStream::derive(master_seed, t, n as u64);
            let raw = StandardDraw::sample(&base.dims, &mut rng);
            arms.iter()
                .map(|cfg| {
                    let acts = forward(&raw.realize(cfg), inputs, cfg.nonlinearity)?;
                    let z = acts.output()?;
                    let r = z.nrows() as f64;
                    let cov = pairs_idx
                        .iter()
                        .map(|&(a, b)| z.column(a).dot(&z.column(b)) / r)
                        .collect();
                    let g = gs
                        .iter()
                        .map(|g| (0..z.nrows()).map(|i| g.eval(z.row(i).iter().copied())).sum::<f64>() / r)
                        .collect();
                    Ok(ArmTrial { cov, g })
                })
                .collect()
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

        let column = |arm: usize, pick: &dyn Fn(&ArmTrial) -> f64| -> Vec<f64> {
            results.iter().map(|trial| pick(&trial[arm])).collect()
        };

        for (i, label) in labels.iter().enumerate() {
            for (e, &(a, b)) in pairs_idx.iter().enumerate() {
                let m = observable_moments(&column(i, &|t| t.cov[e]))?;
                report.push(label, n, &format!("cov{}", pair_label(a, b)), Estimate::new(m.mean, m.se_mean));
            }
            for (j, g) in gs.iter().enumerate() {
                let m = observable_moments(&column(i, &|t| t.g[j]))?;
                report.push(label, n, &format!("g[{}]", g.name()), Estimate::new(m.mean, m.se_mean));
            }
        }

        for i in 0..labels.len() {
            for j in i + 1..labels.len() {
                let arm = format!("{}~{}", labels[i], labels[j]);
                let paired = |pick: &dyn Fn(&ArmTrial) -> f64| -> Result<Estimate> {
                    let d: Vec<f64> = results.iter().map(|trial| pick(&trial[i]) - pick(&trial[j])).collect();
                    let m = observable_moments(&d)?;
                    Ok(Estimate::new(m.mean.abs(), m.se_mean))
                };
                let mut worst = Estimate::new(-1.0, 0.0);
                for e in 0..pairs_idx.len() {
                    let d = paired(&|t| t.cov[e])?;
                    if d.value > worst.value {
                        worst = d;
                    }
                }
                report.push(&arm, n, "cov_diff", worst);
                for (k, g) in gs.iter().enumerate() {
                    report.push(&arm, n, &format!("gap[{}]", g.name()), paired(&|t| t.g[k])?);
                }
            }
        }
    }

    add_checks(&mut report, ladder, &labels, gs);
    Ok(report)
}

/// Arm names, disambiguated if a law appears twice.
fn arm_labels(dists: &[WeightDistribution]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for d in dists {
        let base = d.label().to_string();
        let mut name = base.clone();
        let mut k = 2;
        while out.contains(&name) {
            name = format!("{base}#{k}");
            k += 1;
        }
        out.push(name);
    }
    out
}

fn add_checks(report: &mut ConvergenceReport, ladder: &WidthLadder, labels: &[String], gs: &[TestFunction]) {
    let (first, last) = (ladder.first(), ladder.last());
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            let arm = format!("{}~{}", labels[i], labels[j]);
            if let Some(d) = report.get(&arm, last, "cov_diff") {
                report.check(
                    format!("{arm}_cov_diff_zero_at_{last}"),
                    d.value <= COV_DIFF_SIGMAS * d.se,
                    format!("{:.3e} <= {COV_DIFF_SIGMAS} x {:.3e}", d.value, d.se),
                );
            }
            for g in gs {
                let metric = format!("gap[{}]", g.name());
                let series = report.series(&arm, &metric);
                for &w in &ladder.widths[1..] {
                    if let (Some(lo), Some(hi)) = (report.get(&arm, first, &metric), report.get(&arm, w, &metric)) {
                        report.check(
                            format!("{arm}_{metric}_decreases_{first}_to_{w}"),
                            separated_above(lo, hi),
                            format!(
                                "{:.3e} ± {:.3e} at {first} vs {:.3e} ± {:.3e} at {w}",
                                lo.value, lo.se, hi.value, hi.se
                            ),
                        );
                    }
                }
                if ladder.supports_slopes() {
                    match loglog_slope(&series) {
                        Ok(fit) => report.slopes.push(SlopeRecord {
                            arm: arm.clone(),
                            metric,
                            fit,
                        }),
                        Err(e) => report.degenerate.push(format!("{arm} {metric}: {e}")),
                    }
                }
            }
        }
    }
}
