//! Run configuration for the command-line tool.
//!
//! A run is described by one JSON document. Every key has a documented
//! default except the network's `depth`, `dims` and `nonlinearity`; unknown
//! keys are rejected. Command-line flags override file values, which
//! override defaults. The resolved document is echoed into every report
//! sidecar, so a sidecar alone reproduces its run.
//!
//! ```json
//! {
//!   "network": { "depth": 3, "dims": [2, 64, 64, 64, 2], "nonlinearity": "tanh",
//!                "c_w": 1.0, "c_b": 0.0,
//!                "weight_dist_first": "gaussian", "weight_dist_rest": "gaussian" },
//!   "inputs": [[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]],
//!   "seed": 0,
//!   "quad_order": 64,
//!   "converge": { "widths": [32, 64, 128, 256, 512], "trials": 2000 }
//! }
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::distributions::WeightDistribution;
use crate::error::{Error, Result};
use crate::experiments::{
    ConvergenceOptions, ExperimentGrid, GridSpec, SimulateOptions, TestFunction, TightnessOptions,
    UniversalityOptions, WidthLadder, KERNEL_MC_TRIALS,
};
use crate::network::{InputSet, NetworkConfig, DEFAULT_STORAGE_CAP};
use crate::observables::ObservableFn;
use crate::quadrature::QuadratureRule;
use crate::stats::CfProbeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Kernel,
    Simulate,
    Converge,
    Universality,
    Tightness,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Kernel => "kernel",
            Command::Simulate => "simulate",
            Command::Converge => "converge",
            Command::Universality => "universality",
            Command::Tightness => "tightness",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Set from the command line; a file value must agree with it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    pub network: NetworkConfig,
    /// Inline input points. `inputs_csv` (or `--inputs`) takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<Vec<Vec<f64>>>,
    /// Relative paths are resolved against the config file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs_csv: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; `None` uses the available parallelism.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default = "default_quad_order")]
    pub quad_order: usize,
    /// Report destination; without one the CSV goes to standard output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub kernel: KernelParams,
    #[serde(default)]
    pub simulate: SimulateParams,
    #[serde(default)]
    pub converge: ConvergeParams,
    #[serde(default)]
    pub universality: UniversalityParams,
    #[serde(default)]
    pub tightness: TightnessParams,
}

fn default_quad_order() -> usize {
    QuadratureRule::DEFAULT_ORDER
}

fn default_kernel_mc_trials() -> usize {
    KERNEL_MC_TRIALS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelParams {
    /// Trials for a Monte Carlo `K^(2)` when the first layer is not Gaussian.
    #[serde(default = "default_kernel_mc_trials")]
    pub mc_trials: usize,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            mc_trials: KERNEL_MC_TRIALS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateParams {
    pub widths: Vec<usize>,
    pub trials: usize,
    /// Also store the ensemble at the first width as a flat binary file with
    /// a JSON sidecar.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub save_ensemble: Option<PathBuf>,
    /// Layers stored in the ensemble file; defaults to the output layer.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers: Option<Vec<usize>>,
    pub storage_cap: usize,
}

impl Default for SimulateParams {
    fn default() -> Self {
        Self {
            widths: vec![8, 64, 1024],
            trials: 10_000,
            save_ensemble: None,
            layers: None,
            storage_cap: DEFAULT_STORAGE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergeParams {
    pub widths: Vec<usize>,
    pub trials: usize,
    pub probes: usize,
    pub oracle_arm: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_observable: Option<ObservableFn>,
}

impl Default for ConvergeParams {
    fn default() -> Self {
        Self {
            widths: vec![32, 64, 128, 256, 512],
            trials: 2000,
            probes: CfProbeSet::DEFAULT_COUNT,
            oracle_arm: true,
            cross_observable: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UniversalityParams {
    pub widths: Vec<usize>,
    pub trials: usize,
    pub dists: Vec<WeightDistribution>,
    pub test_functions: Vec<TestFunction>,
}

impl Default for UniversalityParams {
    fn default() -> Self {
        Self {
            widths: vec![64, 256, 512],
            trials: 10_000,
            dists: WeightDistribution::ALL.to_vec(),
            test_functions: TestFunction::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TightnessParams {
    pub widths: Vec<usize>,
    pub draws: usize,
    pub grid: GridConfig,
}

impl Default for TightnessParams {
    fn default() -> Self {
        Self {
            widths: vec![64, 512],
            draws: 200,
            grid: GridConfig::Spec(GridSpec::UnitCircle { count: 50 }),
        }
    }
}

/// A generated grid (`{"kind": "unit_circle", "count": 50}`) or an explicit
/// list of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridConfig {
    Points(Vec<Vec<f64>>),
    Spec(GridSpec),
}

impl GridConfig {
    pub fn build(&self) -> Result<ExperimentGrid> {
        match self {
            GridConfig::Points(points) => Ok(ExperimentGrid::from_points(points.clone())),
            GridConfig::Spec(GridSpec::UnitCircle { count }) => ExperimentGrid::unit_circle(*count),
            GridConfig::Spec(GridSpec::Box { lo, hi, per_axis }) => {
                ExperimentGrid::boxed(lo.clone(), hi.clone(), *per_axis)
            }
            GridConfig::Spec(GridSpec::Explicit) => Err(Error::Validation(
                "an explicit grid is given as a list of points".into(),
            )),
        }
    }
}

/// Values given on the command line; each one replaces the file's value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub command: Option<Command>,
    pub inputs: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub quad_order: Option<usize>,
}

/// Parse and validate a config document. Syntax errors and unknown keys
/// report their line and column.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config_str(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    if let (Some(csv), Some(dir)) = (&cfg.inputs_csv, path.parent()) {
        if csv.is_relative() {
            cfg.inputs_csv = Some(dir.join(csv));
        }
    }
    Ok(cfg)
}

impl RunConfig {
    /// A config with every optional key at its default.
    pub fn new(network: NetworkConfig) -> Self {
        Self {
            command: None,
            network,
            inputs: None,
            inputs_csv: None,
            seed: 0,
            threads: None,
            quad_order: QuadratureRule::DEFAULT_ORDER,
            out: None,
            kernel: KernelParams::default(),
            simulate: SimulateParams::default(),
            converge: ConvergeParams::default(),
            universality: UniversalityParams::default(),
            tightness: TightnessParams::default(),
        }
    }

    /// Apply command-line values, then re-validate.
    pub fn apply(mut self, o: &Overrides) -> Result<Self> {
        if let Some(cmd) = o.command {
            if let Some(file_cmd) = self.command.filter(|&c| c != cmd) {
                return Err(Error::Validation(format!(
                    "config is for command {file_cmd:?} but {cmd:?} was requested"
                )));
            }
            self.command = Some(cmd);
        }
        if let Some(p) = &o.inputs {
            self.inputs_csv = Some(p.clone());
        }
        if let Some(p) = &o.out {
            self.out = Some(p.clone());
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(t) = o.threads {
            self.threads = Some(t);
        }
        if let Some(q) = o.quad_order {
            self.quad_order = q;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if self.threads == Some(0) {
            return Err(Error::Validation("threads must be at least 1".into()));
        }
        QuadratureRule::gauss_hermite(self.quad_order)?;
        if self.kernel.mc_trials < 2 {
            return Err(Error::Validation("kernel.mc_trials must be at least 2".into()));
        }
        WidthLadder::new(self.simulate.widths.clone(), self.simulate.trials)
            .map_err(|e| section_error("simulate", e))?;
        if let Some(layers) = &self.simulate.layers {
            let top = self.network.output_layer();
            if let Some(bad) = layers.iter().find(|&&l| l == 0 || l > top) {
                return Err(Error::Validation(format!(
                    "simulate.layers: layer {bad} out of range 1..={top}"
                )));
            }
        }
        WidthLadder::new(self.converge.widths.clone(), self.converge.trials)
            .map_err(|e| section_error("converge", e))?;
        if self.converge.probes == 0 {
            return Err(Error::Validation("converge.probes must be positive".into()));
        }
        WidthLadder::new(self.universality.widths.clone(), self.universality.trials)
            .map_err(|e| section_error("universality", e))?;
        if self.universality.dists.len() < 2 {
            return Err(Error::Validation(
                "universality.dists needs at least two weight distributions".into(),
            ));
        }
        if self.universality.test_functions.is_empty() {
            return Err(Error::Validation("universality.test_functions is empty".into()));
        }
        if self.tightness.widths.is_empty() || self.tightness.widths.contains(&0) {
            return Err(Error::Validation("tightness.widths must be non-empty and positive".into()));
        }
        if self.tightness.draws < 2 {
            return Err(Error::Validation("tightness.draws must be at least 2".into()));
        }
        if self.inputs.is_some() && self.inputs_csv.is_some() {
            return Err(Error::Validation("give either inputs or inputs_csv, not both".into()));
        }
        Ok(())
    }

    /// The input set: `inputs_csv`, else inline `inputs`, else the default
    /// triplet when `n_0 = 2`.
    pub fn load_inputs(&self) -> Result<InputSet> {
        let inputs = if let Some(path) = &self.inputs_csv {
            InputSet::from_csv(path)?
        } else if let Some(points) = &self.inputs {
            InputSet::new(points.clone())?
        } else if self.network.input_dim() == 2 {
            InputSet::default_triplet()
        } else {
            return Err(Error::Validation(format!(
                "no inputs given and no default for n_0 = {}; use --inputs or the inputs key",
                self.network.input_dim()
            )));
        };
        if inputs.dim() != self.network.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "network n_0 = {}, inputs have dimension {}",
                self.network.input_dim(),
                inputs.dim()
            )));
        }
        Ok(inputs)
    }

    /// The config with inputs inlined, as echoed into sidecars.
    pub fn resolved(&self, inputs: Option<&InputSet>) -> serde_json::Value {
        let mut cfg = self.clone();
        if let Some(inputs) = inputs {
            cfg.inputs = Some(inputs.points().to_vec());
            cfg.inputs_csv = None;
        }
        serde_json::to_value(&cfg).expect("config serializes")
    }

    pub fn simulate_ladder(&self) -> Result<WidthLadder> {
        WidthLadder::new(self.simulate.widths.clone(), self.simulate.trials)
    }

    pub fn simulate_options(&self) -> SimulateOptions {
        SimulateOptions {
            quad_order: self.quad_order,
            kernel_mc_trials: self.kernel.mc_trials,
        }
    }

    pub fn converge_ladder(&self) -> Result<WidthLadder> {
        WidthLadder::new(self.converge.widths.clone(), self.converge.trials)
    }

    pub fn converge_options(&self) -> ConvergenceOptions {
        ConvergenceOptions {
            probes: self.converge.probes,
            quad_order: self.quad_order,
            kernel_mc_trials: self.kernel.mc_trials,
            cross_observable: self.converge.cross_observable,
            oracle_arm: self.converge.oracle_arm,
        }
    }

    pub fn universality_ladder(&self) -> Result<WidthLadder> {
        WidthLadder::new(self.universality.widths.clone(), self.universality.trials)
    }

    pub fn universality_options(&self) -> UniversalityOptions {
        UniversalityOptions {
            dists: self.universality.dists.clone(),
            test_functions: self.universality.test_functions.clone(),
        }
    }

    pub fn tightness_options(&self) -> TightnessOptions {
        TightnessOptions {
            widths: self.tightness.widths.clone(),
            draws: self.tightness.draws,
        }
    }
}

fn section_error(section: &str, e: Error) -> Error {
    match e {
        Error::Validation(msg) => Error::Validation(format!("{section}: {msg}")),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::Nonlinearity;

    const MINIMAL: &str = r#"{"network": {"depth": 1, "dims": [2, 16, 1], "nonlinearity": "relu"}}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.network.c_w, 1.0);
        assert_eq!(cfg.network.c_b, 0.0);
        assert_eq!(cfg.network.weight_dist_first, WeightDistribution::Gaussian);
        assert_eq!(cfg.network.weight_dist_rest, WeightDistribution::Gaussian);
        assert_eq!(cfg.network.nonlinearity, Nonlinearity::Relu);
        assert_eq!(cfg.quad_order, 64);
        assert_eq!(cfg.seed, 0);
        let echoed = cfg.resolved(None);
        assert_eq!(echoed["network"]["c_w"], 1.0);
        assert_eq!(echoed["quad_order"], 64);
        assert_eq!(echoed["converge"]["trials"], 2000);
    }

    #[test]
    fn negative_c_w_is_rejected() {
        let text = r#"{"network": {"depth": 1, "dims": [2, 16, 1], "nonlinearity": "relu", "C_W": -1}}"#;
        let err = parse_config_str(text).unwrap_err();
        assert!(err.to_string().contains("C_W must be positive"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn unknown_nonlinearity_lists_supported() {
        let text = r#"{"network": {"depth": 1, "dims": [2, 16, 1], "nonlinearity": "exp"}}"#;
        let err = parse_config_str(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("exp") && msg.contains("tanh") && msg.contains("gelu"), "{msg}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn unknown_keys_report_location() {
        let text = "{\n  \"network\": {\"depth\": 1, \"dims\": [2, 16, 1], \"nonlinearity\": \"relu\"},\n  \"sede\": 4\n}";
        let err = parse_config_str(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sede") && msg.contains("line 3"), "{msg}");
        let nested = r#"{"network": {"depth": 1, "dims": [2, 16, 1], "nonlinearity": "relu"}, "converge": {"trails": 5}}"#;
        assert!(parse_config_str(nested).unwrap_err().to_string().contains("trails"));
        let bad_dist = r#"{"network": {"depth": 1, "dims": [2, 16, 1], "nonlinearity": "relu", "weight_dist_rest": "cauchy"}}"#;
        assert!(parse_config_str(bad_dist).unwrap_err().to_string().contains("cauchy"));
    }

    #[test]
    fn flags_override_file() {
        let text = r#"{"network": {"depth": 1, "dims": [2, 16, 1], "nonlinearity": "relu"}, "seed": 3, "quad_order": 32}"#;
        let cfg = parse_config_str(text).unwrap();
        let o = Overrides {
            seed: Some(9),
            threads: Some(1),
            ..Default::default()
        };
        let cfg = cfg.apply(&o).unwrap();
        assert_eq!((cfg.seed, cfg.quad_order, cfg.threads), (9, 32, Some(1)));
        let zero = Overrides {
            threads: Some(0),
            ..Default::default()
        };
        assert!(cfg.clone().apply(&zero).is_err());
        let mut file_cmd = cfg;
        file_cmd.command = Some(Command::Kernel);
        let o = Overrides {
            command: Some(Command::Converge),
            ..Default::default()
        };
        assert!(file_cmd.apply(&o).is_err());
    }

    #[test]
    fn inputs_resolution() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.load_inputs().unwrap(), InputSet::default_triplet());
        let mut three = cfg.clone();
        three.network = NetworkConfig::new(vec![3, 4, 1], Nonlinearity::Relu).unwrap();
        assert!(three.load_inputs().is_err());
        three.inputs = Some(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        assert_eq!(three.load_inputs().unwrap().len(), 2);
        let mut wrong = cfg;
        wrong.inputs = Some(vec![vec![1.0, 0.0, 0.0]]);
        assert!(matches!(wrong.load_inputs(), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        let inputs = cfg.load_inputs().unwrap();
        let echoed = cfg.resolved(Some(&inputs));
        let back: RunConfig = serde_json::from_value(echoed).unwrap();
        assert_eq!(back.load_inputs().unwrap(), inputs);
        assert_eq!(back.network, cfg.network);
        assert_eq!(back.tightness, cfg.tightness);
    }
}
