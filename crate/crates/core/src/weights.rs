//! Geometric weights, their negative binomial convolution powers, and the
//! finite difference calculus (forward differences and anti-differences)
//! every determinantal formula is assembled from.

use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::contour::{circle_integral, QuadratureSettings, DEFAULT_NODES, MAX_NODES};
use crate::error::{Error, Result};
use crate::scalar::{parse_rational, rational_to_f64, Scalar};

/// Parameter `q` of the geometric law `P[w = k] = (1 - q) q^k`, strictly inside (0, 1).
#[derive(Clone, PartialEq, Eq)]
pub struct GeometricParameter {
    q: BigRational,
}

impl GeometricParameter {
    pub fn new(q: BigRational) -> Result<Self> {
        if !q.is_positive() || q >= BigRational::one() {
            return Err(Error::InvalidParameter(format!(
                "q must lie strictly between 0 and 1, got {q}"
            )));
        }
        Ok(Self { q })
    }

    /// Parses an exact literal such as `"1/3"`.
    pub fn parse(s: &str) -> Result<Self> {
        Self::new(parse_rational(s)?)
    }

    pub fn from_ratio(numer: i64, denom: i64) -> Result<Self> {
        if denom == 0 {
            return Err(Error::InvalidParameter("zero denominator".into()));
        }
        Self::new(BigRational::new(numer.into(), denom.into()))
    }

    pub fn rational(&self) -> &BigRational {
        &self.q
    }

    pub fn value(&self) -> f64 {
        rational_to_f64(&self.q)
    }

    /// `1 - q`
    pub fn complement(&self) -> BigRational {
        BigRational::one() - &self.q
    }
}

impl fmt::Debug for GeometricParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q={}", self.q)
    }
}

impl fmt::Display for GeometricParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::scalar::format_rational(&self.q))
    }
}

/// Order `k` of the difference operator: positive `k` is the k-th forward
/// difference, negative `k` the |k|-fold anti-difference, zero the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DifferenceOrder(pub i32);

impl From<i32> for DifferenceOrder {
    fn from(k: i32) -> Self {
        Self(k)
    }
}

/// Two concentric circles `|z| = r2 < |w| = r1` inside the disc of radius `1/q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourConfig {
    pub r2: f64,
    pub r1: f64,
    pub nodes: usize,
}

impl ContourConfig {
    pub fn new(q: &GeometricParameter, r2: f64, r1: f64, nodes: usize) -> Result<Self> {
        let cfg = Self { r2, r1, nodes };
        cfg.validate(q)?;
        Ok(cfg)
    }

    /// `r2 = (1/q)^(1/3)`, `r1 = (1/q)^(2/3)`.
    pub fn default_for(q: &GeometricParameter) -> Self {
        let inv = 1.0 / q.value();
        Self {
            r2: inv.powf(1.0 / 3.0),
            r1: inv.powf(2.0 / 3.0),
            nodes: DEFAULT_NODES,
        }
    }

    pub fn validate(&self, q: &GeometricParameter) -> Result<()> {
        let limit = 1.0 / q.value();
        if !(1.0 < self.r2 && self.r2 < self.r1 && self.r1 < limit) {
            return Err(Error::InvalidParameter(format!(
                "contour radii must satisfy 1 < r2 < r1 < 1/q = {limit}, got r2={}, r1={}",
                self.r2, self.r1
            )));
        }
        if self.nodes < 16 || !self.nodes.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "node count must be even and at least 16, got {}",
                self.nodes
            )));
        }
        Ok(())
    }

    pub fn quadrature(&self) -> QuadratureSettings {
        QuadratureSettings::default().with_initial_nodes(self.nodes.min(MAX_NODES / 2))
    }
}

/// `P[w = k] = (1 - q) q^k` for `k >= 0`, zero otherwise.
pub fn geometric_pmf(q: &GeometricParameter, k: i64) -> BigRational {
    if k < 0 {
        return BigRational::zero();
    }
    q.complement() * num_traits::pow(q.rational().clone(), k as usize)
}

/// `binom(n, k)` by the multiplicative recurrence; zero outside `0 <= k <= n`.
pub fn binomial(n: i64, k: i64) -> BigInt {
    if k < 0 || n < 0 || k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut c = BigInt::one();
    for i in 1..=k {
        c = c * BigInt::from(n - k + i) / BigInt::from(i);
    }
    c
}

/// Negative binomial weight `w_m(x) = (1-q)^m binom(x+m-1, x) q^x H(x)`,
/// the law of a sum of `m` independent geometric variables.
pub fn neg_binomial(q: &GeometricParameter, m: i64, x: i64) -> Result<BigRational> {
    if m <= 0 {
        return Err(Error::InvalidParameter(format!(
            "negative binomial order must be positive, got {m}"
        )));
    }
    if x < 0 {
        return Ok(BigRational::zero());
    }
    Ok(num_traits::pow(q.complement(), m as usize)
        * BigRational::from_integer(binomial(x + m - 1, m - 1))
        * num_traits::pow(q.rational().clone(), x as usize))
}

/// Float layer of [`neg_binomial`], evaluated in logarithms.
pub fn neg_binomial_f64(q: f64, m: i64, x: i64) -> f64 {
    if x < 0 || m <= 0 {
        return 0.0;
    }
    let mut log_binom = 0.0;
    for i in 1..m {
        log_binom += ((x + i) as f64).ln() - (i as f64).ln();
    }
    (m as f64 * (1.0 - q).ln() + log_binom + x as f64 * q.ln()).exp()
}

/// `(Δ^k f)(x)` for a function with support in `[support, ∞)`.
///
/// Positive orders use the binomial expansion of the forward difference.
/// Negative orders are computed as iterated finite sums starting at the
/// support bound, which must then be supplied.
pub fn delta_pow<S, F>(f: F, support: Option<i64>, k: DifferenceOrder, x: i64) -> Result<S>
where
    S: Scalar,
    F: Fn(i64) -> S,
{
    let k = k.0;
    if k >= 0 {
        let mut acc = S::zero();
        let mut c = BigInt::one();
        for i in 0..=k as i64 {
            // c = binom(k, i)
            let coef = S::from_rational(&BigRational::from_integer(c.clone()));
            let term = coef * f(x + i);
            if (k as i64 - i) % 2 == 0 {
                acc = acc + term;
            } else {
                acc = acc - term;
            }
            c = c * BigInt::from(k as i64 - i) / BigInt::from(i + 1);
        }
        return Ok(acc);
    }
    let lower = support.ok_or(Error::MissingSupportBound)?;
    if x <= lower {
        return Ok(S::zero());
    }
    // g_0 = f on [lower, x-1]; g_{t+1}(y) = sum_{u=lower}^{y-1} g_t(u).
    let len = (x - lower) as usize;
    let mut level: Vec<S> = (0..len).map(|i| f(lower + i as i64)).collect();
    for _ in 1..-k {
        let mut running = S::zero();
        for v in level.iter_mut() {
            let current = std::mem::replace(v, running.clone());
            running = running + current;
        }
    }
    Ok(level.into_iter().fold(S::zero(), |a, b| a + b))
}

/// `(Δ^k w_m)(x)` in exact arithmetic.
pub fn delta_w(q: &GeometricParameter, m: i64, k: i32, x: i64) -> Result<BigRational> {
    if m <= 0 {
        return Err(Error::InvalidParameter(format!(
            "negative binomial order must be positive, got {m}"
        )));
    }
    delta_pow(
        |y| neg_binomial(q, m, y).expect("m checked"),
        Some(0),
        DifferenceOrder(k),
        x,
    )
}

/// `(Δ^k w_m)(x)` in the float layer.
pub fn delta_w_f64(q: f64, m: i64, k: i32, x: i64) -> Result<f64> {
    delta_pow(|y| neg_binomial_f64(q, m, y), Some(0), DifferenceOrder(k), x)
}

/// `h^{*k}(x) = ((x-1)^{[k-1]} / (k-1)!) H(x-k)` with `h(x) = H(x-1)`:
/// the kernel of the k-fold anti-difference as a convolution.
pub fn heaviside_conv_pow(k: i64, x: i64) -> Result<BigRational> {
    if k <= 0 {
        return Err(Error::InvalidParameter(format!(
            "convolution power must be positive, got {k}"
        )));
    }
    if x < k {
        return Ok(BigRational::zero());
    }
    // (x-1)^{[k-1]} / (k-1)! = binom(x-1, k-1)
    Ok(BigRational::from_integer(binomial(x - 1, k - 1)))
}

/// Inner radius used for negative orders, where the contour must stay inside
/// the unit circle.
pub fn negative_order_radius(q: &GeometricParameter) -> f64 {
    0.9f64.min((1.0 + q.value()) / 2.0)
}

/// `(Δ^k w_m)(x)` from its contour-integral representation
/// `((1-q)^m / 2πi) ∮ (1-z)^k / ((1-qz)^m z^{x+k+1}) dz`.
pub fn delta_w_contour(
    q: &GeometricParameter,
    m: i64,
    k: i32,
    x: i64,
    cfg: &ContourConfig,
) -> Result<f64> {
    if m <= 0 {
        return Err(Error::InvalidParameter(format!(
            "negative binomial order must be positive, got {m}"
        )));
    }
    cfg.validate(q)?;
    let qf = q.value();
    let radius = if k < 0 { negative_order_radius(q) } else { cfg.r2 };
    let one = Complex64::new(1.0, 0.0);
    let power = -(x + k as i64 + 1);
    let integrand = |z: Complex64| {
        (one - z).powi(k) * (one - z * qf).powi(-(m as i32)) * z.powi(power as i32)
    };
    let v = circle_integral(integrand, radius, &cfg.quadrature())?;
    Ok((1.0 - qf).powi(m as i32) * v.value.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat};

    fn half() -> GeometricParameter {
        GeometricParameter::from_ratio(1, 2).unwrap()
    }

    fn third() -> GeometricParameter {
        GeometricParameter::from_ratio(1, 3).unwrap()
    }

    /// m-fold convolution of the geometric pmf, straight from the definition.
    fn convolution_oracle(q: &GeometricParameter, m: i64, x: i64) -> BigRational {
        if m == 1 {
            return geometric_pmf(q, x);
        }
        (0..=x.max(-1))
            .map(|y| geometric_pmf(q, y) * convolution_oracle(q, m - 1, x - y))
            .fold(BigRational::zero(), |a, b| a + b)
    }

    #[test]
    fn parameter_rejects_endpoints() {
        assert!(GeometricParameter::from_ratio(0, 1).is_err());
        assert!(GeometricParameter::from_ratio(1, 1).is_err());
        assert!(GeometricParameter::from_ratio(3, 2).is_err());
        assert!(GeometricParameter::from_ratio(-1, 2).is_err());
        assert!(GeometricParameter::parse("0.5").is_err());
        assert!(GeometricParameter::parse("2/3").is_ok());
    }

    #[test]
    fn geometric_pmf_values() {
        assert_eq!(geometric_pmf(&half(), 0), rat(1, 2));
        assert_eq!(geometric_pmf(&half(), 2), rat(1, 8));
        assert_eq!(geometric_pmf(&third(), -1), int(0));
    }

    #[test]
    fn neg_binomial_values() {
        assert_eq!(neg_binomial(&half(), 1, 1).unwrap(), rat(1, 4));
        assert_eq!(neg_binomial(&half(), 2, 2).unwrap(), rat(3, 16));
        assert!(neg_binomial(&half(), 0, 2).is_err());
        assert!(neg_binomial(&half(), -1, 2).is_err());
        for x in 0..=10 {
            assert_eq!(
                neg_binomial(&third(), 3, x).unwrap(),
                convolution_oracle(&third(), 3, x),
                "x={x}"
            );
        }
    }

    #[test]
    fn float_layer_matches_exact() {
        for m in 1..6 {
            for x in -2..40 {
                let exact = rational_to_f64(&neg_binomial(&third(), m, x).unwrap());
                let float = neg_binomial_f64(1.0 / 3.0, m, x);
                assert!((exact - float).abs() <= 1e-14 * exact.max(1e-300), "m={m} x={x}");
            }
        }
    }

    #[test]
    fn convolution_semigroup() {
        for q in [third(), half()] {
            for a in 1..=5 {
                for b in 1..=5 {
                    for x in (0..=40).step_by(3) {
                        let conv = (0..=x)
                            .map(|y| {
                                neg_binomial(&q, a, y).unwrap() * neg_binomial(&q, b, x - y).unwrap()
                            })
                            .fold(BigRational::zero(), |s, t| s + t);
                        assert_eq!(conv, neg_binomial(&q, a + b, x).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn normalization_with_tail_bound() {
        // Partial sums increase to 1 and the missing mass is the tail, which for
        // x >= X is bounded by w_m(X) / (1 - ratio) with ratio = q (X+m)/(X+1).
        let q = third();
        for m in 1..=4 {
            let mut partial = BigRational::zero();
            let mut last = BigRational::zero();
            for x in 0..60 {
                partial += neg_binomial(&q, m, x).unwrap();
                assert!(partial > last);
                last = partial.clone();
                let next = x + 1;
                let ratio = q.rational() * int(next + m) / int(next + 1);
                if ratio < int(1) {
                    let bound = neg_binomial(&q, m, next).unwrap() / (int(1) - ratio);
                    let tail = int(1) - &partial;
                    assert!(tail.is_positive() && tail <= bound, "m={m} x={x}");
                }
            }
        }
    }

    #[test]
    fn delta_pow_examples() {
        let w1 = |y| neg_binomial(&half(), 1, y).unwrap();
        assert_eq!(delta_pow(w1, Some(0), DifferenceOrder(1), 0).unwrap(), rat(-1, 4));
        assert_eq!(delta_pow(w1, Some(0), DifferenceOrder(-1), 1).unwrap(), rat(1, 2));
        assert_eq!(delta_pow(w1, Some(0), DifferenceOrder(0), 3).unwrap(), rat(1, 16));
        assert_eq!(
            delta_pow::<BigRational, _>(w1, None, DifferenceOrder(-1), 1),
            Err(Error::MissingSupportBound)
        );
    }

    #[test]
    fn anti_difference_is_heaviside_convolution() {
        let q = third();
        for k in 1..=4i64 {
            for x in -2..=20 {
                let direct = delta_w(&q, 3, -(k as i32), x).unwrap();
                let conv = (0..=x.max(0))
                    .map(|y| heaviside_conv_pow(k, x - y).unwrap() * neg_binomial(&q, 3, y).unwrap())
                    .fold(BigRational::zero(), |a, b| a + b);
                assert_eq!(direct, conv, "k={k} x={x}");
            }
        }
        // the example in the operation's contract
        let at5 = (0..=5)
            .map(|y| heaviside_conv_pow(2, 5 - y).unwrap() * neg_binomial(&q, 3, y).unwrap())
            .fold(BigRational::zero(), |a, b| a + b);
        assert_eq!(delta_w(&q, 3, -2, 5).unwrap(), at5);
    }

    #[test]
    fn difference_and_anti_difference_invert() {
        let q = half();
        let f = |y| neg_binomial(&q, 2, y).unwrap();
        for x in -3..15 {
            // Δ(Δ^{-1} f) = f
            let inner = |y| delta_pow(f, Some(0), DifferenceOrder(-1), y).unwrap();
            assert_eq!(delta_pow(inner, Some(0), DifferenceOrder(1), x).unwrap(), f(x));
            // Δ^{-1}(Δ f) = f; Δf is supported from -1
            let diff = |y| delta_pow(f, Some(0), DifferenceOrder(1), y).unwrap();
            assert_eq!(delta_pow(diff, Some(-1), DifferenceOrder(-1), x).unwrap(), f(x));
        }
    }

    #[test]
    fn composition_law() {
        let q = third();
        let f = |y| neg_binomial(&q, 2, y).unwrap();
        for a in -3..=3i32 {
            for b in -3..=3i32 {
                let support_a = if a > 0 { -(a as i64) } else { 0 };
                let inner = |y| delta_pow(f, Some(0), DifferenceOrder(a), y).unwrap();
                for x in -2..12 {
                    let lhs = delta_pow(inner, Some(support_a), DifferenceOrder(b), x).unwrap();
                    let rhs = delta_pow(f, Some(0), DifferenceOrder(a + b), x).unwrap();
                    assert_eq!(lhs, rhs, "a={a} b={b} x={x}");
                }
            }
        }
    }

    #[test]
    fn heaviside_examples() {
        assert_eq!(heaviside_conv_pow(1, 1).unwrap(), int(1));
        assert_eq!(heaviside_conv_pow(2, 4).unwrap(), int(3));
        assert_eq!(heaviside_conv_pow(3, 2).unwrap(), int(0));
        assert!(heaviside_conv_pow(0, 2).is_err());
    }

    #[test]
    fn heaviside_powers_are_iterated_convolutions() {
        // h^{*1} = H(x-1); h^{*(k+1)} = h * h^{*k}
        for k in 1..5 {
            for x in -2..15 {
                let conv = (1..=x.max(0))
                    .map(|y| heaviside_conv_pow(k, x - y).unwrap())
                    .fold(BigRational::zero(), |a, b| a + b);
                assert_eq!(heaviside_conv_pow(k + 1, x).unwrap(), conv);
            }
        }
    }

    #[test]
    fn differences_vanish_left_of_support() {
        let q = half();
        for n in 1..=5i64 {
            for m in 1..=5 {
                for j in 1..=n {
                    for y in -n - 4..=-n {
                        assert!(delta_w(&q, m, (j - 1) as i32, y).unwrap().is_zero());
                    }
                }
            }
        }
    }

    #[test]
    fn contour_examples() {
        let q = half();
        let cfg = ContourConfig::default_for(&q);
        assert!((delta_w_contour(&q, 2, 0, 2, &cfg).unwrap() - 3.0 / 16.0).abs() < 1e-12);
        assert!((delta_w_contour(&q, 1, 1, 0, &cfg).unwrap() + 0.25).abs() < 1e-12);
        assert!(delta_w_contour(&q, 3, -2, -1, &cfg).unwrap().abs() < 1e-12);
    }

    #[test]
    fn contour_matches_direct_on_grid() {
        for q in [third(), half(), GeometricParameter::from_ratio(2, 3).unwrap()] {
            let cfg = ContourConfig::default_for(&q);
            for m in 1..=5 {
                for k in -4..=4 {
                    for x in -3..=20 {
                        let direct = rational_to_f64(&delta_w(&q, m, k, x).unwrap());
                        let contour = delta_w_contour(&q, m, k, x, &cfg).unwrap();
                        assert!(
                            (direct - contour).abs() < 1e-10,
                            "{q:?} m={m} k={k} x={x}: {direct} vs {contour}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn contour_config_validation() {
        let q = half();
        assert!(ContourConfig::new(&q, 1.2, 1.5, 64).is_ok());
        assert!(ContourConfig::new(&q, 0.9, 1.5, 64).is_err());
        assert!(ContourConfig::new(&q, 1.5, 1.2, 64).is_err());
        assert!(ContourConfig::new(&q, 1.2, 2.0, 64).is_err());
        assert!(ContourConfig::new(&q, 1.2, 1.5, 15).is_err());
        assert!(ContourConfig::new(&q, 1.2, 1.5, 18).is_ok());
        assert!(ContourConfig::new(&q, 1.2, 1.5, 8).is_err());
    }
}
