use nalgebra::DMatrix;
use proptest::prelude::*;

use nngp::kernel::{
    bivariate_expectation, kernel_forward, kernel_step, relu_pair_oracle, BivariateSlice, KernelMatrix,
};
use nngp::network::{InputSet, NetworkConfig};
use nngp::nonlinearity::Nonlinearity;
use nngp::quadrature::QuadratureRule;
use nngp::rng::RngStream;

fn nonlinearity() -> impl Strategy<Value = Nonlinearity> {
    prop_oneof![
        Just(Nonlinearity::Identity),
        Just(Nonlinearity::Relu),
        (-0.5f64..0.5).prop_map(|slope| Nonlinearity::LeakyRelu { slope }),
        Just(Nonlinearity::Tanh),
        Just(Nonlinearity::Erf),
        Just(Nonlinearity::Gelu),
    ]
}

fn smooth() -> impl Strategy<Value = Nonlinearity> {
    prop_oneof![Just(Nonlinearity::Tanh), Just(Nonlinearity::Erf), Just(Nonlinearity::Gelu)]
}

/// Two to four distinct points in `R^3`.
fn inputs() -> impl Strategy<Value = InputSet> {
    prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 2..=4)
        .prop_filter_map("distinct points", |pts| InputSet::new(pts).ok())
}

fn slice() -> impl Strategy<Value = BivariateSlice> {
    (-3.0f64..2.0, -3.0f64..2.0, -0.99f64..0.99).prop_map(|(la, lb, rho)| {
        let (v_a, v_b) = (la.exp(), lb.exp());
        BivariateSlice::new(v_a, v_b, rho * (v_a * v_b).sqrt()).unwrap()
    })
}

fn config(depth: usize, nl: Nonlinearity, c_w: f64, c_b: f64) -> NetworkConfig {
    let mut dims = vec![3; depth + 1];
    dims.push(1);
    NetworkConfig::new(dims, nl).unwrap().with_scales(c_w, c_b).unwrap()
}

fn layers(inputs: &InputSet, cfg: &NetworkConfig) -> Vec<KernelMatrix> {
    let quad = QuadratureRule::gauss_hermite(64).unwrap();
    kernel_forward(inputs, cfg, &quad, 0, 0)
        .unwrap()
        .into_iter()
        .map(|l| l.kernel)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_layer_is_symmetric_psd(
        x in inputs(), nl in nonlinearity(), depth in 1usize..4, c_w in 0.5f64..2.5, c_b in 0.0f64..0.5,
    ) {
        for k in layers(&x, &config(depth, nl, c_w, c_b)) {
            let e = k.entries();
            prop_assert_eq!(e, &e.transpose());
            prop_assert!(k.min_eigenvalue() >= -k.psd_tolerance(), "layer {} min eig {}", k.layer(), k.min_eigenvalue());
        }
    }

    #[test]
    fn permuting_inputs_permutes_kernels(
        x in inputs(), nl in nonlinearity(), depth in 1usize..4, c_b in 0.0f64..0.5, seed in any::<u64>(),
    ) {
        let mut perm: Vec<usize> = (0..x.len()).collect();
        let mut rng = RngStream::new(seed, 0);
        for i in (1..perm.len()).rev() {
            perm.swap(i, (rng.next_u64() % (i as u64 + 1)) as usize);
        }
        let cfg = config(depth, nl, 1.0, c_b);
        let base = layers(&x, &cfg);
        let moved = layers(&x.permuted(&perm).unwrap(), &cfg);
        for (k, kp) in base.iter().zip(&moved) {
            prop_assert!(k.permuted(&perm).max_abs_diff(kp) <= 1e-12);
        }
    }

    #[test]
    fn doubling_quadrature_order_is_stable_for_smooth_nonlinearities(s in slice(), nl in smooth()) {
        let q64 = QuadratureRule::gauss_hermite(64).unwrap();
        let q128 = QuadratureRule::gauss_hermite(128).unwrap();
        let a = bivariate_expectation(&s, nl, &q64);
        let b = bivariate_expectation(&s, nl, &q128);
        prop_assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-12) + 1e-14, "{a} vs {b}");
    }

    #[test]
    fn relu_quadrature_matches_closed_form(s in slice()) {
        let quad = QuadratureRule::gauss_hermite(200).unwrap();
        let q = bivariate_expectation(&s, Nonlinearity::Relu, &quad);
        let o = relu_pair_oracle(&s);
        prop_assert!((q - o).abs() <= 1e-4 * o + 1e-8, "{q} vs {o}");
    }

    #[test]
    fn relu_kernels_are_two_homogeneous(x in inputs(), depth in 1usize..4, c in 0.2f64..4.0, c_w in 0.5f64..2.5) {
        let cfg = config(depth, Nonlinearity::Relu, c_w, 0.0);
        let base = layers(&x, &cfg);
        let scaled = layers(&x.scaled(c).unwrap(), &cfg);
        for (k, ks) in base.iter().zip(&scaled) {
            let expect = k.entries() * (c * c);
            let tol = 1e-9 * expect.abs().max();
            prop_assert!((ks.entries() - expect).abs().max() <= tol);
        }
    }

    #[test]
    fn odd_nonlinearity_decouples_independent_coordinates(
        va in 0.05f64..4.0, vb in 0.05f64..4.0, c_w in 0.5f64..2.5, c_b in 0.0f64..0.5,
        nl in prop_oneof![Just(Nonlinearity::Tanh), Just(Nonlinearity::Erf), Just(Nonlinearity::Identity)],
    ) {
        let k = KernelMatrix::new(DMatrix::from_row_slice(2, 2, &[va, 0.0, 0.0, vb]), 1).unwrap();
        let quad = QuadratureRule::gauss_hermite(64).unwrap();
        let next = kernel_step(&k, nl, c_b, c_w, &quad).unwrap();
        prop_assert!((next.get(0, 1) - c_b).abs() <= 1e-12);
    }

    #[test]
    fn kernel_step_increases_with_bias_variance(
        x in inputs(), nl in nonlinearity(), c_b in 0.0f64..0.5, extra in 0.01f64..0.5,
    ) {
        let quad = QuadratureRule::gauss_hermite(64).unwrap();
        let k = layers(&x, &config(1, nl, 1.0, 0.1)).remove(0);
        let lo = kernel_step(&k, nl, c_b, 1.0, &quad).unwrap();
        let hi = kernel_step(&k, nl, c_b + extra, 1.0, &quad).unwrap();
        prop_assert!(lo.entries().iter().zip(hi.entries().iter()).all(|(a, b)| b > a));
    }
}

/// Order-200 quadrature for tanh against a Monte Carlo oracle with 10^6
/// samples per slice.
#[test]
fn tanh_quadrature_agrees_with_monte_carlo() {
    let quad = QuadratureRule::gauss_hermite(200).unwrap();
    let mut rng = RngStream::new(77, 0);
    for &(v_a, v_b, rho) in &[(1.0, 1.0, 0.5), (0.3, 2.5, -0.8), (4.0, 0.7, 0.95), (1.5, 1.5, 0.0)] {
        let s = BivariateSlice::new(v_a, v_b, rho * f64::sqrt(v_a * v_b)).unwrap();
        let exact = bivariate_expectation(&s, Nonlinearity::Tanh, &quad);
        let m = 1_000_000;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..m {
            let g1 = rng.standard_normal();
            let g2 = rng.standard_normal();
            let u = v_a.sqrt() * g1;
            let w = v_b.sqrt() * (rho * g1 + (1.0 - rho * rho).sqrt() * g2);
            let p = u.tanh() * w.tanh();
            sum += p;
            sum2 += p * p;
        }
        let mean = sum / m as f64;
        let se = ((sum2 / m as f64 - mean * mean) / (m as f64 - 1.0)).sqrt();
        assert!((exact - mean).abs() <= 5.0 * se, "slice {s:?}: quadrature {exact} vs MC {mean} ± {se}");
    }
}
