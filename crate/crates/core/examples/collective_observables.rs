//! Collective observables self-average at rate `1/n`.
//!
//! For each width, samples networks, forms the conditional covariance
//! `Σ^(L+1)` from the last hidden layer and a neuron average of
//! `σ(z_0)σ(z_1)`, and prints their means and `n · Var`, which should settle
//! to a constant.
//!
//! ```text
//! cargo run --release --example collective_observables
//! ```

use nngp::network::{forward, map_trials, sample_network, InputSet, NetworkConfig};
use nngp::nonlinearity::Nonlinearity;
use nngp::observables::{collective_observable, conditional_covariance, observable_moments, ObservableFn};
use nngp::rng::RngStream;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inputs = InputSet::default_triplet();
    let nl = Nonlinearity::Tanh;
    let trials = 2000;
    let f = ObservableFn::PostActivationProduct { alpha: 0, beta: 1, nonlinearity: nl };
    println!("{:>6} {:>12} {:>12} {:>12} {:>12}", "width", "E Σ[0:1]", "n Var Σ", "E O_f", "n Var O_f");
    for width in [16, 64, 256] {
        let config = NetworkConfig::uniform(2, 2, width, 1, nl)?.with_scales(1.5, 0.05)?;
        let depth = config.depth;
        let per_trial = map_trials(trials, |t| {
            let mut rng = RngStream::derive(7, t, width as u64);
            let draw = sample_network(&config, &mut rng);
            let acts = forward(&draw, &inputs, nl).expect("shapes match");
            let sigma = conditional_covariance(&acts, depth, config.c_b, config.c_w).expect("hidden layer");
            let obs = collective_observable(&acts, depth, &f).expect("valid observable");
            (sigma.get(0, 1), obs)
        });
        let (sigma, obs): (Vec<f64>, Vec<f64>) = per_trial.into_iter().unzip();
        let s = observable_moments(&sigma)?;
        let o = observable_moments(&obs)?;
        let n = width as f64;
        println!(
            "{width:>6} {:>12.5} {:>12.4} {:>12.5} {:>12.4}",
            s.mean,
            n * s.variance,
            o.mean,
            n * o.variance
        );
    }
    Ok(())
}
