//! Trapezoidal quadrature on circles centred at the origin.
//!
//! For an integrand analytic in an annulus around the circle the trapezoidal
//! rule converges geometrically in the node count, so refinement is by node
//! doubling with reuse of the previous nodes.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const DEFAULT_NODES: usize = 256;
pub const MAX_NODES: usize = 8192;
pub const DEFAULT_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    pub initial_nodes: usize,
    pub max_nodes: usize,
    pub rel_tol: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            initial_nodes: DEFAULT_NODES,
            max_nodes: MAX_NODES,
            rel_tol: DEFAULT_REL_TOL,
        }
    }
}

impl QuadratureSettings {
    pub fn with_initial_nodes(mut self, nodes: usize) -> Self {
        self.initial_nodes = nodes;
        self
    }
}

/// Node `k` of `n` on the circle of the given radius.
#[inline]
pub fn circle_node(radius: f64, k: usize, n: usize) -> Complex64 {
    Complex64::from_polar(radius, TAU * k as f64 / n as f64)
}

/// Value of an adaptive contour integral together with the node count used.
#[derive(Debug, Clone, Copy)]
pub struct ContourValue {
    pub value: Complex64,
    pub nodes: usize,
    /// Mean modulus of `f(z) z` on the circle; the natural absolute error scale.
    pub scale: f64,
}

/// `(1/2πi) ∮_{|z|=radius} f(z) dz` with a fixed number of nodes.
pub fn circle_integral_fixed<F>(f: F, radius: f64, nodes: usize) -> Complex64
where
    F: Fn(Complex64) -> Complex64,
{
    let sum: Complex64 = (0..nodes)
        .map(|k| {
            let z = circle_node(radius, k, nodes);
            f(z) * z
        })
        .sum();
    sum / nodes as f64
}

/// `(1/2πi) ∮_{|z|=radius} f(z) dz`, doubling the node count until two
/// successive refinements agree to `rel_tol` relative to
/// `max(|I|, mean |f(z) z|)`.
pub fn circle_integral<F>(f: F, radius: f64, settings: &QuadratureSettings) -> Result<ContourValue>
where
    F: Fn(Complex64) -> Complex64,
{
    let mut n = settings.initial_nodes.max(2);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut modulus = 0.0;
    for k in 0..n {
        let v = f(circle_node(radius, k, n)) * circle_node(radius, k, n);
        sum += v;
        modulus += v.norm();
    }
    let mut prev = sum / n as f64;
    let mut change = f64::INFINITY;
    while 2 * n <= settings.max_nodes {
        let m = 2 * n;
        for k in (1..m).step_by(2) {
            let z = circle_node(radius, k, m);
            let v = f(z) * z;
            sum += v;
            modulus += v.norm();
        }
        let next = sum / m as f64;
        let scale = modulus / m as f64;
        change = (next - prev).norm();
        if change <= settings.rel_tol * next.norm().max(scale) {
            return Ok(ContourValue {
                value: next,
                nodes: m,
                scale,
            });
        }
        prev = next;
        n = m;
    }
    Err(Error::QuadratureNonConvergence {
        nodes: n,
        change,
        tolerance: settings.rel_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residue_of_simple_pole() {
        let settings = QuadratureSettings::default();
        let v = circle_integral(|z| 1.0 / (z - 0.5), 1.0, &settings).unwrap();
        assert!((v.value - 1.0).norm() < 1e-13);
        let outside = circle_integral(|z| 1.0 / (z - 2.0), 1.0, &settings).unwrap();
        assert!(outside.value.norm() < 1e-13);
    }

    #[test]
    fn coefficient_extraction() {
        // [z^3] e^z = 1/6
        let settings = QuadratureSettings::default().with_initial_nodes(16);
        let v = circle_integral(|z| z.exp() / z.powi(4), 1.0, &settings).unwrap();
        assert!((v.value.re - 1.0 / 6.0).abs() < 1e-14);
        assert!(v.value.im.abs() < 1e-14);
    }

    #[test]
    fn pole_near_circle_fails_to_converge_under_tight_cap() {
        let settings = QuadratureSettings {
            initial_nodes: 16,
            max_nodes: 64,
            rel_tol: 1e-14,
        };
        let r = circle_integral(|z| 1.0 / (z - 0.999), 1.0, &settings);
        assert!(matches!(r, Err(Error::QuadratureNonConvergence { .. })));
    }
}
