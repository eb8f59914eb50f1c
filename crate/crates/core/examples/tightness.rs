//! Tightness of the random output map over a grid of inputs.
//!
//! Draws networks at two widths, evaluates them on 50 points of the unit
//! circle and compares the distribution of empirical Lipschitz ratios and
//! sup norms; bounded, width-stable ratios indicate a tight family.
//!
//! ```text
//! cargo run --release --example tightness
//! ```

use nngp::experiments::{tightness_study, ExperimentGrid, TightnessOptions};
use nngp::network::NetworkConfig;
use nngp::nonlinearity::Nonlinearity;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = NetworkConfig::uniform(2, 3, 64, 1, Nonlinearity::Tanh)?;
    let grid = ExperimentGrid::unit_circle(50)?;
    let options = TightnessOptions { widths: vec![32, 256], draws: 100 };
    let report = tightness_study(&config, &grid, &options, 8)?;

    for arm in report.arms() {
        for metric in report.metrics(&arm) {
            for (w, e) in report.series(&arm, &metric) {
                println!("{arm} width {w:>4} {metric:<16} {:.4}", e.value);
            }
        }
    }
    for c in &report.checks {
        println!("[{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(())
}
