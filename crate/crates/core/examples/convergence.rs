//! Convergence of the output law to `N(0, K^(L+1))` along a width ladder.
//!
//! Runs a small convergence study with its exact-Gaussian oracle arm and
//! prints the fourth-cumulant and characteristic-function distance series,
//! the fitted log-log slopes, and the study's checks.
//!
//! ```text
//! cargo run --release --example convergence
//! ```

use nngp::experiments::{convergence_study, ConvergenceOptions, WidthLadder, NETWORK_ARM, ORACLE_ARM};
use nngp::network::{InputSet, NetworkConfig};
use nngp::nonlinearity::Nonlinearity;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = NetworkConfig::uniform(2, 2, 32, 64, Nonlinearity::Tanh)?;
    let inputs = InputSet::default_triplet();
    let ladder = WidthLadder::new(vec![16, 32, 64, 128], 4000)?;
    let report = convergence_study(&config, &inputs, &ladder, 3, &ConvergenceOptions::default())?;

    for metric in ["kappa4[0]", "cf_distance"] {
        for arm in [NETWORK_ARM, ORACLE_ARM] {
            let series: Vec<String> = report
                .series(arm, metric)
                .iter()
                .map(|(w, e)| format!("{w}: {:.4} ± {:.4}", e.value, e.se))
                .collect();
            println!("{arm:>8} {metric:<12} {}", series.join(", "));
        }
    }
    for s in &report.slopes {
        println!("slope {} {}: {:.2} ± {:.2}", s.arm, s.metric, s.fit.slope, s.fit.se);
    }
    for c in &report.checks {
        println!("[{}] {}", if c.passed { "pass" } else { "FAIL" }, c.name);
    }
    Ok(())
}
