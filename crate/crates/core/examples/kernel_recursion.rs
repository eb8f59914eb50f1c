//! Layerwise infinite-width kernels of a deep tanh network.
//!
//! Prints `K^(2)..K^(L+1)` on three inputs, how each was computed, and how
//! much the output kernel moves when the quadrature order is doubled.
//!
//! ```text
//! cargo run --release --example kernel_recursion
//! ```

use nngp::experiments::kernel_report;
use nngp::network::{InputSet, NetworkConfig};
use nngp::nonlinearity::Nonlinearity;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = NetworkConfig::uniform(2, 4, 128, 1, Nonlinearity::Tanh)?.with_scales(1.5, 0.05)?;
    let inputs = InputSet::default_triplet();

    let report = kernel_report(&config, &inputs, 64, 0)?;
    for layer in &report.layers {
        let k = &layer.kernel;
        println!("K^({}) via {}, smallest eigenvalue {:.3e}", k.layer(), layer.provenance, k.min_eigenvalue());
        for a in 0..k.size() {
            let row: Vec<String> = (0..k.size()).map(|b| format!("{:>10.6}", k.get(a, b))).collect();
            println!("  {:>4} {}", inputs.labels()[a], row.join(" "));
        }
    }

    let finer = kernel_report(&config, &inputs, 128, 0)?;
    let change = (finer.output().kernel.entries() - report.output().kernel.entries()).abs().max();
    println!("order 64 -> 128: largest change in the output kernel {change:.2e}");
    Ok(())
}
