//! Weight-law universality beyond the first layer.
//!
//! Networks with Gaussian, Rademacher and uniform weights in layers `>= 2`
//! share the same standard normal draws, so their differences are paired.
//! The gaps in bounded test functions shrink with width.
//!
//! ```text
//! cargo run --release --example universality
//! ```

use nngp::experiments::{universality_study, UniversalityOptions, WidthLadder};
use nngp::network::{InputSet, NetworkConfig};
use nngp::nonlinearity::Nonlinearity;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = NetworkConfig::uniform(2, 2, 16, 64, Nonlinearity::Tanh)?;
    let inputs = InputSet::new(vec![vec![1.0, 0.0], vec![0.6, 0.8]])?;
    let ladder = WidthLadder::new(vec![16, 128], 3000)?;
    let report = universality_study(&config, &inputs, &ladder, 9, &UniversalityOptions::default())?;

    for arm in report.arms().iter().filter(|a| a.contains('~')) {
        for metric in report.metrics(arm) {
            let series: Vec<String> = report
                .series(arm, &metric)
                .iter()
                .map(|(w, e)| format!("{w}: {:.2e} ± {:.1e}", e.value, e.se))
                .collect();
            println!("{arm:<22} {metric:<20} {}", series.join(", "));
        }
    }
    Ok(())
}
