//! Width-ladder studies: second moments against the kernel, convergence to
//! the Gaussian limit, universality across weight laws, width-uniform
//! tightness, and kernel tables.

mod convergence;
mod simulate;
mod tightness;
mod universality;

use serde::{Deserialize, Serialize};

pub use convergence::{convergence_study, ConvergenceOptions, NETWORK_ARM, ORACLE_ARM};
pub use simulate::{simulate_study, SimulateOptions, CONSISTENCY_SIGMAS, KERNEL_ARM};
pub use tightness::{lipschitz_ratio, sup_norm, tightness_study, TightnessOptions, MIN_GRID_POINTS};
pub use universality::{universality_study, TestFunction, UniversalityOptions, COV_DIFF_SIGMAS};

use crate::error::{Error, Result};
use crate::kernel::{kernel_forward, kernels_to_csv, LayerKernel};
use crate::network::{InputSet, NetworkConfig};
use crate::quadrature::QuadratureRule;
use crate::stats::Estimate;

/// Two estimates are separated when their difference exceeds this many
/// combined standard errors.
pub const SEPARATION_SIGMAS: f64 = 2.0;
/// Agreement window for "statistically zero" checks, in standard errors.
pub const ZERO_SIGMAS: f64 = 5.0;
/// Acceptable log-log slope window for variance decay.
pub const VARIANCE_SLOPE_WINDOW: (f64, f64) = (-1.35, -0.65);
/// Largest acceptable `|κ₄| / K_{αα}²` at the widest rung.
pub const KAPPA4_LIMIT: f64 = 0.1;
/// Largest acceptable growth factor of the tightness percentile across widths.
pub const TIGHTNESS_FACTOR: f64 = 2.0;

/// `a` exceeds `b` by more than [`SEPARATION_SIGMAS`] combined SEs.
pub fn separated_above(a: Estimate, b: Estimate) -> bool {
    a.value - b.value > SEPARATION_SIGMAS * a.combined_se(&b)
}

/// Hidden widths (all hidden layers equal at each rung) and trials per rung.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WidthLadder {
    pub widths: Vec<usize>,
    pub trials: usize,
}

impl WidthLadder {
    pub fn new(widths: Vec<usize>, trials: usize) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::Validation("width ladder is empty".into()));
        }
        if widths[0] == 0 {
            return Err(Error::Validation("widths must be positive".into()));
        }
        if let Some(w) = widths.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!(
                "width ladder must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
        if trials < 2 {
            return Err(Error::Validation(format!("need at least 2 trials per rung, got {trials}")));
        }
        Ok(Self { widths, trials })
    }

    pub fn len(&self) -> usize {
        self.widths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.widths.is_empty()
    }

    pub fn first(&self) -> usize {
        self.widths[0]
    }

    pub fn last(&self) -> usize {
        *self.widths.last().expect("non-empty ladder")
    }

    /// Slope fits need at least three rungs.
    pub fn supports_slopes(&self) -> bool {
        self.widths.len() >= 3
    }
}

/// How the points of an [`ExperimentGrid`] were generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    /// `count` equally spaced points on the unit circle in `R²`.
    UnitCircle { count: usize },
    /// A tensor grid with `per_axis` points per coordinate of the box.
    Box { lo: Vec<f64>, hi: Vec<f64>, per_axis: usize },
    /// Points supplied by the caller.
    Explicit,
}

/// A finite sample of a compact input set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub spec: GridSpec,
    pub points: Vec<Vec<f64>>,
}

impl ExperimentGrid {
    pub fn unit_circle(count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::Validation("unit-circle grid needs at least 2 points".into()));
        }
        let points = (0..count)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
        Ok(Self {
            spec: GridSpec::UnitCircle { count },
            points,
        })
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>, per_axis: usize) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::DimensionMismatch("box corners must have equal, positive dimension".into()));
        }
        if per_axis < 2 {
            return Err(Error::Validation("box grid needs at least 2 points per axis".into()));
        }
        if let Some(i) = (0..lo.len()).find(|&i| lo[i].is_nan() || hi[i].is_nan() || lo[i] >= hi[i]) {
            return Err(Error::Validation(format!(
                "box must satisfy lo < hi on every axis; axis {i} has [{}, {}]",
                lo[i], hi[i]
            )));
        }
        let d = lo.len();
        let total = per_axis.pow(d as u32);
        let points = (0..total)
            .map(|mut k| {
                (0..d)
                    .map(|i| {
                        let j = k % per_axis;
                        k /= per_axis;
                        lo[i] + (hi[i] - lo[i]) * j as f64 / (per_axis - 1) as f64
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            spec: GridSpec::Box { lo, hi, per_axis },
            points,
        })
    }

    pub fn from_points(points: Vec<Vec<f64>>) -> Self {
        Self {
            spec: GridSpec::Explicit,
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// Componentwise `(min, max)` over the grid.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for p in &self.points {
            for i in 0..d {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        (lo, hi)
    }

    /// First coinciding pair, if any.
    pub fn find_duplicate(&self) -> Option<(usize, usize)> {
        for a in 0..self.points.len() {
            for b in a + 1..self.points.len() {
                if self.points[a] == self.points[b] {
                    return Some((a, b));
                }
            }
        }
        None
    }

    pub fn to_inputs(&self) -> Result<InputSet> {
        if let Some((a, b)) = self.find_duplicate() {
            return Err(Error::DegenerateGrid(a, b));
        }
        InputSet::new(self.points.clone())
    }
}

/// `K^(2)..K^(L+1)` with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelReport {
    pub labels: Vec<String>,
    pub layers: Vec<LayerKernel>,
    pub quad_order: usize,
}

impl KernelReport {
    pub fn to_csv(&self) -> String {
        kernels_to_csv(&self.layers, &self.labels)
    }

    pub fn output(&self) -> &LayerKernel {
        self.layers.last().expect("at least one layer")
    }
}

/// Trials used for a Monte Carlo `K^(2)` when the first layer is not Gaussian.
pub const KERNEL_MC_TRIALS: usize = 20_000;

/// Layered kernel tables for `config` on `inputs`.
pub fn kernel_report(config: &NetworkConfig, inputs: &InputSet, quad_order: usize, master_seed: u64) -> Result<KernelReport> {
    kernel_report_with_trials(config, inputs, quad_order, KERNEL_MC_TRIALS, master_seed)
}

pub fn kernel_report_with_trials(
    config: &NetworkConfig,
    inputs: &InputSet,
    quad_order: usize,
    mc_trials: usize,
    master_seed: u64,
) -> Result<KernelReport> {
    config.validate()?;
    if inputs.dim() != config.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "config n_0 = {}, inputs have dimension {}",
            config.input_dim(),
            inputs.dim()
        )));
    }
    let quad = QuadratureRule::gauss_hermite(quad_order)?;
    let layers = kernel_forward(inputs, config, &quad, mc_trials, master_seed)?;
    Ok(KernelReport {
        labels: inputs.labels().to_vec(),
        layers,
        quad_order,
    })
}

/// Symmetric-pair label used in metric names, e.g. `[0:2]`.
pub(crate) fn pair_label(a: usize, b: usize) -> String {
    format!("[{a}:{b}]")
}

/// Order-statistic based standard error for the `q`-quantile of sorted
/// values: half the spread between the ranks `mq ± sqrt(mq(1-q))`.
pub(crate) fn quantile_with_se(sorted: &[f64], q: f64) -> Estimate {
    let m = sorted.len();
    let at = |pos: f64| {
        let pos = pos.clamp(0.0, (m - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    };
    let center = q * (m - 1) as f64;
    let half = (m as f64 * q * (1.0 - q)).sqrt();
    Estimate::new(at(center), 0.5 * (at(center + half) - at(center - half)))
}
