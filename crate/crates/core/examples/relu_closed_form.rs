//! ReLU kernels: quadrature against the arc-cosine closed form.
//!
//! For ReLU, `E[σ(u)σ(v)]` has a closed form, so the whole recursion can be
//! iterated exactly. This compares it, layer by layer, with the engine.
//!
//! ```text
//! cargo run --release --example relu_closed_form
//! ```

use nalgebra::DMatrix;
use nngp::experiments::kernel_report;
use nngp::kernel::{relu_pair_oracle, BivariateSlice};
use nngp::network::{InputSet, NetworkConfig};
use nngp::nonlinearity::Nonlinearity;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (c_w, c_b) = (2.0, 0.1);
    let config = NetworkConfig::uniform(2, 5, 64, 1, Nonlinearity::Relu)?.with_scales(c_w, c_b)?;
    let inputs = InputSet::new(vec![vec![1.0, 0.0], vec![0.8, 0.6], vec![-0.5, 0.5], vec![0.0, 2.0]])?;
    let report = kernel_report(&config, &inputs, 200, 0)?;

    let x = inputs.as_matrix();
    let mut exact: DMatrix<f64> = (x.transpose() * &x).map(|g| c_b + c_w / 2.0 * g);
    for layer in &report.layers {
        let prev = exact.clone();
        exact = DMatrix::from_fn(prev.nrows(), prev.ncols(), |a, b| {
            let slice = BivariateSlice::new(prev[(a, a)], prev[(b, b)], prev[(a, b)]).expect("valid slice");
            c_b + c_w * relu_pair_oracle(&slice)
        });
        let err = (layer.kernel.entries() - &exact).abs().max() / exact.abs().max();
        println!("K^({}) via {}: relative error vs closed form {err:.2e}", layer.kernel.layer(), layer.provenance);
    }
    Ok(())
}
