use nalgebra::DMatrix;

use super::{quantile_with_se, ExperimentGrid, TIGHTNESS_FACTOR};
use crate::error::{Error, Result};
use crate::network::{forward, map_trials, sample_network, NetworkConfig};
use crate::report::ConvergenceReport;
use crate::rng::RngStream;

pub const MIN_GRID_POINTS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct TightnessOptions {
    pub widths: Vec<usize>,
    pub draws: usize,
}

/// `max_{α<β} ‖z_α - z_β‖₂ / ‖x_α - x_β‖₂` for outputs stored column-wise.
pub fn lipschitz_ratio(outputs: &DMatrix<f64>, points: &[Vec<f64>]) -> f64 {
    let mut best = 0.0f64;
    for a in 0..points.len() {
        for b in a + 1..points.len() {
            let dx: f64 = points[a].iter().zip(&points[b]).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
            let dz = (outputs.column(a) - outputs.column(b)).norm();
            best = best.max(dz / dx);
        }
    }
    best
}

/// `max_α ‖z_α‖₂`.
pub fn sup_norm(outputs: &DMatrix<f64>) -> f64 {
    outputs.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// For each width, draws `options.draws` networks and records the empirical
/// Lipschitz ratio and sup norm of the output map over the grid, reported as
/// `lipschitz_median`, `lipschitz_p95`, `sup_norm_median`, `sup_norm_p95`.
pub fn tightness_study(
    config: &NetworkConfig,
    grid: &ExperimentGrid,
    options: &TightnessOptions,
    master_seed: u64,
) -> Result<ConvergenceReport> {
    config.validate()?;
    if grid.len() < MIN_GRID_POINTS {
        return Err(Error::Validation(format!(
            "tightness grid needs at least {MIN_GRID_POINTS} points, got {}",
            grid.len()
        )));
    }
    if grid.dim() < 2 || config.input_dim() < 2 {
        return Err(Error::Validation("tightness needs input dimension n_0 >= 2".into()));
    }
    if options.draws < 2 {
        return Err(Error::Validation("tightness needs at least 2 draws per width".into()));
    }
    let mut widths = options.widths.clone();
    widths.sort_unstable();
    widths.dedup();
    if widths.is_empty() || widths[0] == 0 {
        return Err(Error::Validation("tightness needs positive widths".into()));
    }
    let inputs = grid.to_inputs()?;
    if inputs.dim() != config.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "config n_0 = {}, grid has dimension {}",
            config.input_dim(),
            inputs.dim()
        )));
    }

    let mut report = ConvergenceReport::new("tightness", config.hash(), master_seed, widths.clone(), options.draws);
    for &n in &widths {
        let cfg = config.with_hidden_width(n);
        let per_draw = map_trials(options.draws, |t| -> Result<(f64, f64)> {
            let mut rng = RngStream::derive(master_seed, t, n as u64);
            let draw = sample_network(&cfg, &mut rng);
            let acts = forward(&draw, &inputs, cfg.nonlinearity)?;
            let z = acts.output()?;
            Ok((lipschitz_ratio(z, &grid.points), sup_norm(z)))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let mut lip: Vec<f64> = per_draw.iter().map(|p| p.0).collect();
        let mut sup: Vec<f64> = per_draw.iter().map(|p| p.1).collect();
        lip.sort_by(f64::total_cmp);
        sup.sort_by(f64::total_cmp);
        report.push("network", n, "lipschitz_median", quantile_with_se(&lip, 0.5));
        report.push("network", n, "lipschitz_p95", quantile_with_se(&lip, 0.95));
        report.push("network", n, "sup_norm_median", quantile_with_se(&sup, 0.5));
        report.push("network", n, "sup_norm_p95", quantile_with_se(&sup, 0.95));
    }

    let (first, last) = (widths[0], *widths.last().expect("non-empty"));
    if first != last {
        for metric in ["lipschitz_p95", "sup_norm_p95"] {
            let lo = report.get("network", first, metric).expect("pushed above");
            let hi = report.get("network", last, metric).expect("pushed above");
            let ratio = hi.value / lo.value;
            report.check(
                format!("{metric}_stable"),
                (1.0 / TIGHTNESS_FACTOR..=TIGHTNESS_FACTOR).contains(&ratio),
                format!(
                    "{metric} {:.4} at {last} / {:.4} at {first} = {ratio:.4}, within factor {TIGHTNESS_FACTOR}",
                    hi.value, lo.value
                ),
            );
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkDraw;
    use crate::nonlinearity::Nonlinearity;
    use nalgebra::DVector;

    #[test]
    fn zero_weights_give_constant_map() {
        let grid = ExperimentGrid::unit_circle(24).unwrap();
        let draw = NetworkDraw {
            weights: vec![DMatrix::zeros(3, 2), DMatrix::zeros(2, 3)],
            biases: vec![DVector::from_element(3, 0.5), DVector::from_vec(vec![0.3, -0.4])],
        };
        let acts = forward(&draw, &grid.to_inputs().unwrap(), Nonlinearity::Tanh).unwrap();
        let z = acts.output().unwrap();
        assert_eq!(lipschitz_ratio(z, &grid.points), 0.0);
        assert!((sup_norm(z) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn linear_ratio_matches_operator_norm() {
        let cfg = NetworkConfig::uniform(2, 1, 16, 3, Nonlinearity::Identity).unwrap();
        let grid = ExperimentGrid::unit_circle(50).unwrap();
        let draw = sample_network(&cfg, &mut RngStream::new(4, 0));
        let acts = forward(&draw, &grid.to_inputs().unwrap(), Nonlinearity::Identity).unwrap();
        let ratio = lipschitz_ratio(acts.output().unwrap(), &grid.points);
        let m = draw.weight(2) * draw.weight(1);
        let op = m.singular_values().max();
        assert!(ratio <= op * (1.0 + 1e-12));
        assert!(ratio >= 0.98 * op, "{ratio} vs {op}");
    }

    #[test]
    fn validation() {
        let cfg = NetworkConfig::uniform(2, 1, 8, 1, Nonlinearity::Tanh).unwrap();
        let opts = TightnessOptions {
            widths: vec![8],
            draws: 4,
        };
        let small = ExperimentGrid::unit_circle(10).unwrap();
        assert!(tightness_study(&cfg, &small, &opts, 0).is_err());
        let mut pts = ExperimentGrid::unit_circle(20).unwrap().points;
        pts[7] = pts[3].clone();
        let dup = ExperimentGrid::from_points(pts);
        assert!(matches!(tightness_study(&cfg, &dup, &opts, 0), Err(Error::DegenerateGrid(3, 7))));
        let ok = tightness_study(&cfg, &ExperimentGrid::unit_circle(20).unwrap(), &opts, 0).unwrap();
        assert_eq!(ok.points.len(), 4);
    }
}
