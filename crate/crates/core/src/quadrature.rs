//! Gaussian quadrature rules.
//!
//! [`QuadratureRule`] is a Gauss–Hermite rule normalized to the standard
//! Gaussian measure: `Σ w_i f(x_i) ≈ E[f(Z)]`, `Z ~ N(0, 1)`. It also carries
//! a Gauss–Legendre rule and two radial rules of matching order for the
//! polar form of the bivariate Gaussian: Gauss–Laguerre, exact for
//! piecewise-linear nonlinearities, and Gauss–Legendre in `ln r`, whose
//! accuracy does not degrade as the pre-activation variance grows.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::Error;

const NEWTON_EPS: f64 = 1e-14;
const NEWTON_MAXIT: usize = 100;
/// Radial (Laguerre) order is capped: the weights of higher-order rules
/// underflow and the radial integrand is polynomial for the kinked built-ins.
const MAX_RADIAL_ORDER: usize = 48;
/// Radial window of the logarithmic rule. The Rayleigh mass outside it is
/// below 1e-31 above and `RADIAL_MIN²/2` below.
pub(crate) const RADIAL_MIN: f64 = 1e-4;
const RADIAL_MAX: f64 = 12.0;

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub(crate) legendre: (Vec<f64>, Vec<f64>),
    pub(crate) radial: (Vec<f64>, Vec<f64>),
    pub(crate) log_radial: (Vec<f64>, Vec<f64>),
}

impl QuadratureRule {
    pub const DEFAULT_ORDER: usize = 64;

    pub fn gauss_hermite(order: usize) -> Result<Self, Error> {
        if order < 2 {
            return Err(Error::Validation(format!(
                "quadrature order must be at least 2, got {order}"
            )));
        }
        let (nodes, weights) = hermite_probabilists(order);
        let legendre = gauss_legendre(order);
        let (t, w) = gauss_laguerre(order.min(MAX_RADIAL_ORDER));
        // Radius r = sqrt(2t) turns ∫ r e^{-r²/2} f(r) dr into ∫ e^{-t} f(√(2t)) dt.
        let radii = t.iter().map(|t| (2.0 * t).sqrt()).collect();
        let log_radial = log_radial_rule(&legendre);
        Ok(Self {
            order,
            nodes,
            weights,
            legendre,
            radial: (radii, w),
            log_radial,
        })
    }

    /// `E[f(Z)]` for `Z ~ N(0, 1)`.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// `∫ r e^{-r²/2} f(r) dr` over `[RADIAL_MIN, RADIAL_MAX]` with `r = e^u`
/// and Gauss–Legendre in `u`. A singularity of `f(c r)` at `r = iπ/(2c)`
/// sits at imaginary part π/2 in `u` whatever `c` is.
fn log_radial_rule((x, w): &(Vec<f64>, Vec<f64>)) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = (RADIAL_MIN.ln(), RADIAL_MAX.ln());
    let (mid, half) = (0.5 * (hi + lo), 0.5 * (hi - lo));
    x.iter()
        .zip(w)
        .map(|(&t, &wt)| {
            let r = (mid + half * t).exp();
            (r, half * wt * r * r * (-0.5 * r * r).exp())
        })
        .unzip()
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::gauss_hermite(Self::DEFAULT_ORDER).expect("default order is valid")
    }
}

/// Nodes and weights for weight `exp(-x²/2) / sqrt(2π)`, ascending.
fn hermite_probabilists(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Starting points are the eigenvalues of the Jacobi matrix (Golub–Welsch);
    // each is then polished by Newton on the orthonormal physicists' Hermite
    // functions, whose derivative also yields the weight.
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut seeds: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    seeds.sort_by(f64::total_cmp);

    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // Polish the non-negative half and mirror it, which keeps the rule
    // exactly symmetric.
    for i in n / 2..n {
        let mut z = seeds[i] / sqrt2;
        if n % 2 == 1 && i == n / 2 {
            z = 0.0;
        }
        for _ in 0..NEWTON_MAXIT {
            let (p1, p2) = hermite_orthonormal(n, z, pim4);
            let pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= NEWTON_EPS * z.abs().max(1.0) {
                break;
            }
        }
        let (_, p2) = hermite_orthonormal(n, z, pim4);
        let pp = (2.0 * nf).sqrt() * p2;
        let w = 2.0 / (pp * pp) / PI.sqrt();
        nodes[i] = sqrt2 * z;
        nodes[n - 1 - i] = -sqrt2 * z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Returns `(h_n(z), h_{n-1}(z))` for the orthonormal Hermite functions.
fn hermite_orthonormal(n: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, p2)
}

/// Gauss–Legendre on `[-1, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..NEWTON_MAXIT {
            let (p1, p2) = legendre_pair(n, z);
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= NEWTON_EPS {
                break;
            }
        }
        let (p1, p2) = legendre_pair(n, z);
        pp = if z * z != 1.0 { nf * (z * p1 - p2) / (z * z - 1.0) } else { pp };
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn legendre_pair(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
    }
    (p1, p2)
}

/// Gauss–Laguerre for weight `e^{-t}` on `[0, ∞)`.
pub(crate) fn gauss_laguerre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0_f64;
    for i in 0..n {
        z = match i {
            0 => 3.0 / (1.0 + 2.4 * nf),
            1 => z + 15.0 / (1.0 + 2.5 * nf),
            _ => {
                let ai = (i - 1) as f64;
                z + (1.0 + 2.55 * ai) / (1.9 * ai) * (z - x[i - 2])
            }
        };
        for _ in 0..NEWTON_MAXIT {
            let (p1, p2) = laguerre_pair(n, z);
            let pp = (nf * p1 - nf * p2) / z;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= NEWTON_EPS * z.max(1.0) {
                break;
            }
        }
        let (p1, p2) = laguerre_pair(n, z);
        let pp = (nf * p1 - nf * p2) / z;
        x[i] = z;
        w[i] = -1.0 / (pp * nf * p2);
    }
    (x, w)
}

fn laguerre_pair(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = ((2.0 * jf - 1.0 - z) * p2 - (jf - 1.0) * p3) / jf;
    }
    (p1, p2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_moment(j: u32) -> f64 {
        if j % 2 == 1 {
            0.0
        } else {
            (1..j).step_by(2).map(f64::from).product()
        }
    }

    #[test]
    fn hermite_is_exact_on_monomials() {
        for order in [2usize, 3, 7, 16, 64, 128, 200] {
            let q = QuadratureRule::gauss_hermite(order).unwrap();
            assert_eq!(q.nodes.len(), order);
            assert!(q.weights.iter().all(|&w| w >= 0.0));
            for j in 0..=12u32 {
                if (j as usize) > 2 * order - 1 {
                    break;
                }
                let got = q.expect(|x| x.powi(j as i32));
                let want = gaussian_moment(j);
                assert!(
                    (got - want).abs() <= 1e-9 * want.max(1.0),
                    "order {order}, j {j}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn nodes_are_sorted_and_symmetric() {
        let q = QuadratureRule::gauss_hermite(9).unwrap();
        assert!(q.nodes.windows(2).all(|p| p[0] < p[1]));
        assert!(q.nodes[4].abs() < 1e-14);
        for i in 0..9 {
            assert!((q.nodes[i] + q.nodes[8 - i]).abs() < 1e-13);
        }
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((integral - 2.0 / 19.0).abs() < 1e-13);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn laguerre_integrates_polynomials() {
        for n in [4usize, 16, 48] {
            let (x, w) = gauss_laguerre(n);
            for k in 0..(2 * n).min(12) {
                let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                let fact: f64 = (1..=k).map(|i| i as f64).product();
                assert!((integral - fact).abs() <= 1e-10 * fact, "n={n} k={k}: {integral}");
            }
        }
    }

    #[test]
    fn rejects_order_one() {
        assert!(QuadratureRule::gauss_hermite(1).is_err());
    }
}
