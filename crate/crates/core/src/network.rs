//! Finite-width random networks.
//!
//! A depth-`L` network maps `x ∈ R^{n_0}` through pre-activations
//! `z^(1) = W^(1) x + b^(1)` and `z^(ℓ) = W^(ℓ) σ(z^(ℓ-1)) + b^(ℓ)` for
//! `ℓ = 2..=L+1`, with `W^(ℓ)_{ij} = sqrt(C_W / n_{ℓ-1}) Ŵ_{ij}`, `Ŵ` iid from
//! the configured weight law, and `b^(ℓ)_i ~ N(0, C_b)`.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distributions::WeightDistribution;
use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::rng::RngStream;

/// Architecture, scaling constants and weight laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Number of hidden layers `L`.
    pub depth: usize,
    /// Layer widths `n_0, ..., n_{L+1}`.
    pub dims: Vec<usize>,
    #[serde(rename = "c_w", alias = "C_W", default = "default_c_w")]
    pub c_w: f64,
    #[serde(rename = "c_b", alias = "C_b", default)]
    pub c_b: f64,
    pub nonlinearity: Nonlinearity,
    #[serde(default = "default_weights")]
    pub weight_dist_first: WeightDistribution,
    #[serde(default = "default_weights")]
    pub weight_dist_rest: WeightDistribution,
}

fn default_c_w() -> f64 {
    1.0
}

fn default_weights() -> WeightDistribution {
    WeightDistribution::Gaussian
}

impl NetworkConfig {
    /// Gaussian weights, `C_W = 1`, `C_b = 0`.
    pub fn new(dims: Vec<usize>, nonlinearity: Nonlinearity) -> Result<Self> {
        let depth = dims.len().saturating_sub(2);
        let cfg = Self {
            depth,
            dims,
            c_w: 1.0,
            c_b: 0.0,
            nonlinearity,
            weight_dist_first: WeightDistribution::Gaussian,
            weight_dist_rest: WeightDistribution::Gaussian,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `n_0`, equal hidden widths `n`, `n_{L+1}`.
    pub fn uniform(
        input_dim: usize,
        depth: usize,
        width: usize,
        output_dim: usize,
        nonlinearity: Nonlinearity,
    ) -> Result<Self> {
        let mut dims = vec![input_dim];
        dims.extend(std::iter::repeat_n(width, depth));
        dims.push(output_dim);
        Self::new(dims, nonlinearity)
    }

    pub fn with_scales(mut self, c_w: f64, c_b: f64) -> Result<Self> {
        self.c_w = c_w;
        self.c_b = c_b;
        self.validate()?;
        Ok(self)
    }

    pub fn with_weights(mut self, first: WeightDistribution, rest: WeightDistribution) -> Self {
        self.weight_dist_first = first;
        self.weight_dist_rest = rest;
        self
    }

    /// Same architecture with every hidden layer set to `width`.
    pub fn with_hidden_width(&self, width: usize) -> Self {
        let mut cfg = self.clone();
        for d in &mut cfg.dims[1..=self.depth] {
            *d = width;
        }
        cfg
    }

    pub fn with_output_dim(&self, output_dim: usize) -> Self {
        let mut cfg = self.clone();
        cfg.dims[self.depth + 1] = output_dim;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 1 {
            return Err(Error::Validation("depth L must be at least 1".into()));
        }
        if self.dims.len() != self.depth + 2 {
            return Err(Error::Validation(format!(
                "dims must list n_0..n_(L+1): expected {} entries for L = {}, got {}",
                self.depth + 2,
                self.depth,
                self.dims.len()
            )));
        }
        if let Some(pos) = self.dims.iter().position(|&d| d == 0) {
            return Err(Error::Validation(format!("dims[{pos}] must be positive")));
        }
        if !(self.c_w > 0.0 && self.c_w.is_finite()) {
            return Err(Error::Validation(format!(
                "C_W must be positive, got {}",
                self.c_w
            )));
        }
        if !(self.c_b >= 0.0 && self.c_b.is_finite()) {
            return Err(Error::Validation(format!(
                "C_b must be non-negative, got {}",
                self.c_b
            )));
        }
        self.nonlinearity.validate()
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        self.dims[self.depth + 1]
    }

    /// Index of the output layer, `L + 1`.
    pub fn output_layer(&self) -> usize {
        self.depth + 1
    }

    pub fn width(&self, layer: usize) -> usize {
        self.dims[layer]
    }

    pub fn weight_dist(&self, layer: usize) -> WeightDistribution {
        if layer == 1 {
            self.weight_dist_first
        } else {
            self.weight_dist_rest
        }
    }

    /// Short stable digest of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        hex::encode(&digest[..8])
    }
}

/// Distinct network inputs `x_α ∈ R^{n_0}` with labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSet {
    labels: Vec<String>,
    points: Vec<Vec<f64>>,
}

impl InputSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (0..points.len()).map(|i| format!("x{i}")).collect();
        Self::with_labels(labels, points)
    }

    pub fn with_labels(labels: Vec<String>, points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Validation("input set is empty".into()));
        }
        if labels.len() != points.len() {
            return Err(Error::Validation(format!(
                "{} labels for {} inputs",
                labels.len(),
                points.len()
            )));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::Validation("inputs must have positive dimension".into()));
        }
        for (a, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "input {a} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("input {a} has a non-finite entry")));
            }
            for (b, q) in points[..a].iter().enumerate() {
                if p == q {
                    return Err(Error::Validation(format!("inputs {b} and {a} coincide")));
                }
            }
        }
        for (a, l) in labels.iter().enumerate() {
            if labels[..a].contains(l) {
                return Err(Error::Validation(format!("duplicate input label {l:?}")));
            }
        }
        Ok(Self { labels, points })
    }

    /// The default study inputs: the two unit vectors of `R^2` and their average.
    pub fn default_triplet() -> Self {
        Self::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]])
            .expect("default inputs are valid")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, alpha: usize) -> &[f64] {
        &self.points[alpha]
    }

    /// `n_0 × |A|` matrix whose columns are the inputs.
    pub fn as_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim(), self.len(), |i, a| self.points[a][i])
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        let points = self
            .points
            .iter()
            .map(|p| p.iter().map(|v| c * v).collect())
            .collect();
        Self::with_labels(self.labels.clone(), points)
    }

    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let labels = perm.iter().map(|&i| self.labels[i].clone()).collect();
        let points = perm.iter().map(|&i| self.points[i].clone()).collect();
        Self::with_labels(labels, points)
    }

    /// Parse CSV: one input per row, `n_0` numeric columns, optionally
    /// preceded by a non-numeric label column. Blank lines and lines starting
    /// with `#` are skipped, as is a leading header row with no numeric field.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut labels = Vec::new();
        let mut points = Vec::new();
        let mut any_label = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let numeric: Vec<Option<f64>> = fields.iter().map(|f| f.parse::<f64>().ok()).collect();
            if points.is_empty() && labels.is_empty() && numeric.iter().all(Option::is_none) {
                continue;
            }
            let (label, values) = match numeric[0] {
                Some(_) => (None, &numeric[..]),
                None => (Some(fields[0].to_string()), &numeric[1..]),
            };
            let row: Vec<f64> = values
                .iter()
                .enumerate()
                .map(|(c, v)| {
                    v.ok_or_else(|| {
                        Error::Parse(format!("inputs line {}: column {} is not a number", lineno + 1, c + 1))
                    })
                })
                .collect::<Result<_>>()?;
            any_label |= label.is_some();
            labels.push(label);
            points.push(row);
        }
        if any_label && labels.iter().any(Option::is_none) {
            return Err(Error::Parse("inputs: label column present on some rows only".into()));
        }
        let labels = labels
            .into_iter()
            .enumerate()
            .map(|(i, l)| l.unwrap_or_else(|| format!("x{i}")))
            .collect();
        Self::with_labels(labels, points)
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for (l, p) in self.labels.iter().zip(&self.points) {
            out.push_str(l);
            for v in p {
                out.push_str(&format!(",{v:?}"));
            }
            out.push('\n');
        }
        out
    }
}

/// One sample of all weights and biases, layers `1..=L+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDraw {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

impl NetworkDraw {
    pub fn depth(&self) -> usize {
        self.weights.len() - 1
    }

    /// `W^(ℓ)`, 1-based.
    pub fn weight(&self, layer: usize) -> &DMatrix<f64> {
        &self.weights[layer - 1]
    }

    pub fn bias(&self, layer: usize) -> &DVector<f64> {
        &self.biases[layer - 1]
    }

    pub fn check_shapes(&self, config: &NetworkConfig) -> Result<()> {
        if self.weights.len() != config.depth + 1 || self.biases.len() != config.depth + 1 {
            return Err(Error::DimensionMismatch(format!(
                "draw has {} layers, config expects {}",
                self.weights.len(),
                config.depth + 1
            )));
        }
        for l in 1..=config.depth + 1 {
            let w = self.weight(l);
            if w.shape() != (config.dims[l], config.dims[l - 1]) || self.bias(l).len() != config.dims[l] {
                return Err(Error::DimensionMismatch(format!("layer {l} shape does not match dims")));
            }
        }
        Ok(())
    }
}

/// The standard normal variates behind one network draw, before scaling and
/// before mapping to the configured weight laws.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardDraw {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

impl StandardDraw {
    /// Draw order: for each layer, `W^(ℓ)` row by row and then `b^(ℓ)`.
    pub fn sample(dims: &[usize], rng: &mut RngStream) -> Self {
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for l in 1..dims.len() {
            let (rows, cols) = (dims[l], dims[l - 1]);
            let mut w = DMatrix::zeros(rows, cols);
            for i in 0..rows {
                for j in 0..cols {
                    w[(i, j)] = rng.standard_normal();
                }
            }
            weights.push(w);
            biases.push(DVector::from_iterator(rows, (0..rows).map(|_| rng.standard_normal())));
        }
        Self { weights, biases }
    }

    /// Scale and map the variates to the laws of `config`. Configs that
    /// differ only in weight law realize coupled networks from one draw.
    pub fn realize(&self, config: &NetworkConfig) -> NetworkDraw {
        let bias_sd = config.c_b.sqrt();
        let weights = self
            .weights
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let scale = (config.c_w / g.ncols() as f64).sqrt();
                let dist = config.weight_dist(i + 1);
                g.map(|v| scale * dist.from_normal(v))
            })
            .collect();
        let biases = self
            .biases
            .iter()
            .map(|g| if config.c_b == 0.0 { g.map(|_| 0.0) } else { g * bias_sd })
            .collect();
        NetworkDraw { weights, biases }
    }
}

/// Sample weights and biases for one network.
///
/// Every entry consumes exactly one normal variate (see [`StandardDraw`]),
/// so configs that differ only in weight law stay coupled on a shared stream.
pub fn sample_network(config: &NetworkConfig, rng: &mut RngStream) -> NetworkDraw {
    StandardDraw::sample(&config.dims, rng).realize(config)
}

/// Pre-activations `z^(ℓ)` for `ℓ = 1..=L+1`, each stored as an `n_ℓ × |A|`
/// matrix whose column `α` is `z^(ℓ)_α`. Layers not retained are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerwiseActivations {
    layers: Vec<Option<DMatrix<f64>>>,
    nonlinearity: Nonlinearity,
}

impl LayerwiseActivations {
    pub fn new(layers: Vec<Option<DMatrix<f64>>>, nonlinearity: Nonlinearity) -> Self {
        Self {
            layers,
            nonlinearity,
        }
    }

    /// Number of layers `L + 1`.
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.nonlinearity
    }

    pub fn layer(&self, layer: usize) -> Result<&DMatrix<f64>> {
        layer
            .checked_sub(1)
            .and_then(|i| self.layers.get(i))
            .and_then(Option::as_ref)
            .ok_or(Error::MissingLayer(layer))
    }

    pub fn has_layer(&self, layer: usize) -> bool {
        self.layer(layer).is_ok()
    }

    /// Output pre-activations `z^(L+1)`.
    pub fn output(&self) -> Result<&DMatrix<f64>> {
        self.layer(self.layers.len())
    }

    pub fn retain(mut self, keep: &[usize]) -> Self {
        for (i, slot) in self.layers.iter_mut().enumerate() {
            if !keep.contains(&(i + 1)) {
                *slot = None;
            }
        }
        self
    }

    pub fn stored_values(&self) -> usize {
        self.layers.iter().flatten().map(|m| m.len()).sum()
    }
}

/// Run the network on every input and record all pre-activations.
pub fn forward(draw: &NetworkDraw, inputs: &InputSet, nl: Nonlinearity) -> Result<LayerwiseActivations> {
    let w1 = draw.weight(1);
    if w1.ncols() != inputs.dim() {
        return Err(Error::DimensionMismatch(format!(
            "first layer expects inputs of dimension {}, got {}",
            w1.ncols(),
            inputs.dim()
        )));
    }
    let mut layers = Vec::with_capacity(draw.weights.len());
    let mut z = affine(w1, draw.bias(1), &inputs.as_matrix())?;
    for l in 2..=draw.weights.len() {
        let post = z.map(|v| nl.eval(v));
        let next = affine(draw.weight(l), draw.bias(l), &post)?;
        layers.push(Some(z));
        z = next;
    }
    layers.push(Some(z));
    Ok(LayerwiseActivations::new(layers, nl))
}

fn affine(w: &DMatrix<f64>, b: &DVector<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if w.ncols() != x.nrows() || w.nrows() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "cannot apply a {}x{} layer to {}-dimensional activations",
            w.nrows(),
            w.ncols(),
            x.nrows()
        )));
    }
    let mut z = w * x;
    for mut col in z.column_iter_mut() {
        col += b;
    }
    Ok(z)
}

/// Evaluate `f(t)` for `t = 0..count` in parallel, returning results in
/// trial order. Reductions over the returned vector are therefore
/// independent of scheduling.
pub fn map_trials<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..count as u64).into_par_iter().map(f).collect()
}

/// Default cap on stored values for [`sample_ensemble`] (512 MiB of f64).
pub const DEFAULT_STORAGE_CAP: usize = 64 * 1024 * 1024;

/// `M` independent network draws evaluated on a fixed input set.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleEnsemble {
    pub master_seed: u64,
    pub layers: Vec<usize>,
    pub trials: Vec<LayerwiseActivations>,
}

impl SampleEnsemble {
    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn stored_values(&self) -> usize {
        self.trials.iter().map(LayerwiseActivations::stored_values).sum()
    }

    /// Values of `z^(ℓ)_{i;A}` for every trial.
    pub fn coordinate(&self, layer: usize, i: usize) -> Result<Vec<Vec<f64>>> {
        self.trials
            .iter()
            .map(|t| t.layer(layer).map(|z| z.row(i).iter().copied().collect()))
            .collect()
    }

    /// Per-trial `z^(ℓ)` matrices.
    pub fn layer_samples(&self, layer: usize) -> Result<Vec<&DMatrix<f64>>> {
        self.trials.iter().map(|t| t.layer(layer)).collect()
    }

    /// Flat little-endian `f64` dump plus a JSON sidecar.
    ///
    /// Values are written trial by trial, then layer by layer in ascending
    /// order, each layer column by column (input-major), i.e. `z^(ℓ)_{i;α}`
    /// with `i` varying fastest.
    pub fn save(&self, bin_path: &Path, config: &NetworkConfig, inputs: &InputSet) -> Result<()> {
        let file = fs::File::create(bin_path).map_err(|e| Error::io(bin_path, e))?;
        let mut w = BufWriter::new(file);
        let mut shapes = Vec::new();
        if let Some(first) = self.trials.first() {
            for &l in &self.layers {
                let z = first.layer(l)?;
                shapes.push((z.nrows(), z.ncols()));
            }
        }
        for t in &self.trials {
            for &l in &self.layers {
                for v in t.layer(l)?.iter() {
                    w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(bin_path, e))?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(bin_path, e))?;
        let sidecar = EnsembleSidecar {
            trials: self.trials.len(),
            layers: self.layers.clone(),
            shapes,
            master_seed: self.master_seed,
            config_hash: config.hash(),
            config: config.clone(),
            inputs: inputs.clone(),
        };
        let side_path = sidecar_path(bin_path);
        let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
        fs::write(&side_path, json).map_err(|e| Error::io(&side_path, e))
    }

    pub fn load(bin_path: &Path) -> Result<(Self, EnsembleSidecar)> {
        let side_path = sidecar_path(bin_path);
        let text = fs::read_to_string(&side_path).map_err(|e| Error::io(&side_path, e))?;
        let sidecar: EnsembleSidecar =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", side_path.display())))?;
        let mut bytes = Vec::new();
        BufReader::new(fs::File::open(bin_path).map_err(|e| Error::io(bin_path, e))?)
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(bin_path, e))?;
        let per_trial: usize = sidecar.shapes.iter().map(|(r, c)| r * c).sum();
        if bytes.len() != 8 * per_trial * sidecar.trials {
            return Err(Error::Parse(format!(
                "{}: expected {} values, found {} bytes",
                bin_path.display(),
                per_trial * sidecar.trials,
                bytes.len()
            )));
        }
        let mut values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        let num_layers = sidecar.config.depth + 1;
        let nl = sidecar.config.nonlinearity;
        let trials = (0..sidecar.trials)
            .map(|_| {
                let mut layers = vec![None; num_layers];
                for (&l, &(r, c)) in sidecar.layers.iter().zip(&sidecar.shapes) {
                    layers[l - 1] = Some(DMatrix::from_iterator(r, c, values.by_ref().take(r * c)));
                }
                LayerwiseActivations::new(layers, nl)
            })
            .collect();
        let ens = SampleEnsemble {
            master_seed: sidecar.master_seed,
            layers: sidecar.layers.clone(),
            trials,
        };
        Ok((ens, sidecar))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSidecar {
    pub trials: usize,
    pub layers: Vec<usize>,
    pub shapes: Vec<(usize, usize)>,
    pub master_seed: u64,
    pub config_hash: String,
    pub config: NetworkConfig,
    pub inputs: InputSet,
}

fn sidecar_path(bin_path: &Path) -> std::path::PathBuf {
    let mut p = bin_path.as_os_str().to_owned();
    p.push(".json");
    p.into()
}

/// Sample `m` networks and keep the requested layers. Trial `t` uses the
/// stream `(master_seed, t)`.
pub fn sample_ensemble(
    config: &NetworkConfig,
    inputs: &InputSet,
    m: usize,
    layers_to_keep: &[usize],
    master_seed: u64,
    storage_cap: usize,
) -> Result<SampleEnsemble> {
    config.validate()?;
    if m == 0 {
        return Err(Error::Validation("ensemble needs at least one trial".into()));
    }
    if inputs.dim() != config.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "config n_0 = {}, inputs have dimension {}",
            config.input_dim(),
            inputs.dim()
        )));
    }
    let mut layers: Vec<usize> = layers_to_keep.to_vec();
    layers.sort_unstable();
    layers.dedup();
    if let Some(&bad) = layers.iter().find(|&&l| l == 0 || l > config.output_layer()) {
        return Err(Error::Validation(format!(
            "layer {bad} out of range 1..={}",
            config.output_layer()
        )));
    }
    let per_trial: usize = layers.iter().map(|&l| config.width(l) * inputs.len()).sum();
    let requested = per_trial.saturating_mul(m);
    if requested > storage_cap {
        return Err(Error::Resource {
            requested,
            cap: storage_cap,
        });
    }
    let trials = map_trials(m, |t| {
        let mut rng = RngStream::new(master_seed, t);
        let draw = sample_network(config, &mut rng);
        forward(&draw, inputs, config.nonlinearity).map(|a| a.retain(&layers))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(SampleEnsemble {
        master_seed,
        layers,
        trials,
    })
}
