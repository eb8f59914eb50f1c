//! Finite-width ensembles against the infinite-width kernel.
//!
//! Samples a few thousand networks at two widths and compares the empirical
//! covariance of one output neuron with `K^(L+1)`, entry by entry in units
//! of its standard error.
//!
//! ```text
//! cargo run --release --example ensemble_moments
//! ```

use nngp::experiments::kernel_report;
use nngp::network::{sample_ensemble, InputSet, NetworkConfig, DEFAULT_STORAGE_CAP};
use nngp::nonlinearity::Nonlinearity;
use nngp::stats::empirical_covariance;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inputs = InputSet::default_triplet();
    let base = NetworkConfig::uniform(2, 3, 8, 1, Nonlinearity::Erf)?.with_scales(1.8, 0.1)?;
    let kernel = kernel_report(&base, &inputs, 64, 0)?.output().kernel.entries().clone();
    println!("K^(L+1) =\n{kernel:.5}");

    for width in [8, 256] {
        let config = base.with_hidden_width(width);
        let out = config.output_layer();
        let ensemble = sample_ensemble(&config, &inputs, 4000, &[out], 42, DEFAULT_STORAGE_CAP)?;
        let est = empirical_covariance(&ensemble, out, 0)?;
        let worst = est.max_abs_error(&kernel);
        println!(
            "width {width:>4}: largest |cov - K| = {:.4} ({:.1} SE), all entries within 4 SE: {}",
            worst.value,
            worst.value / worst.se,
            est.matches(&kernel, 4.0)
        );
    }
    Ok(())
}
