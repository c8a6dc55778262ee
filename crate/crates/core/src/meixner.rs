//! The Meixner ensemble: `P[G(m,n) <= η]` as the mass of the box
//! `{0, ..., η+n-1}^n` under the measure proportional to
//! `Δ_n(x)^2 prod_j binom(x_j + m - n, x_j) q^{x_j}` on `N^n`.
//!
//! Two evaluators are provided. The brute-force one sums the box literally in
//! exact arithmetic. The Gram one uses Cauchy–Binet to reduce both the box sum
//! and the full-lattice normalization to `n x n` determinants of moments.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::contour::{circle_integral, QuadratureSettings};
use crate::detformulas::CdfQuery;
use crate::error::{Error, Result};
use crate::linalg::det_exact;
use crate::scalar::{rational_to_f64, ten_pow_neg};
use crate::weights::{binomial, delta_w, GeometricParameter};

/// Default cap on the number of terms in a brute-force box sum.
pub const DEFAULT_MAX_TERMS: u128 = 10_000_000;

/// Default working precision of the Gram route, in decimal digits.
pub const DEFAULT_DIGITS: u32 = 50;

/// Extra digits carried by the full-lattice moments beyond the requested ones.
const GUARD_DIGITS: u32 = 12;

/// `P[G(m,n) <= eta]` posed as a Meixner-ensemble box probability; the box is
/// `{0, ..., eta + n - 1}^n`. `eta = -1` is allowed and gives probability 0.
#[derive(Debug, Clone)]
pub struct MeixnerEnsembleQuery {
    pub q: GeometricParameter,
    pub m: usize,
    pub n: usize,
    pub eta: i64,
}

impl MeixnerEnsembleQuery {
    pub fn new(q: GeometricParameter, m: usize, n: usize, eta: i64) -> Result<Self> {
        if n == 0 || m < n {
            return Err(Error::InvalidParameter(format!("need m >= n >= 1, got m={m}, n={n}")));
        }
        if eta < -1 {
            return Err(Error::InvalidParameter(format!("eta must be >= -1, got {eta}")));
        }
        Ok(Self { q, m, n, eta })
    }

    /// Upper end `eta + n - 1` of the summation box.
    pub fn box_end(&self) -> i64 {
        self.eta + self.n as i64 - 1
    }

    /// Exponent `m - n` of the ensemble weight `binom(x + m - n, x) q^x`.
    pub fn weight_shift(&self) -> i64 {
        (self.m - self.n) as i64
    }
}

impl From<&CdfQuery> for MeixnerEnsembleQuery {
    fn from(cq: &CdfQuery) -> Self {
        Self {
            q: cq.q.clone(),
            m: cq.m,
            n: cq.n,
            eta: cq.eta,
        }
    }
}

/// `prod_{i<j} (x_j - x_i)`, the Vandermonde determinant `det(x_i^{j-1})`.
pub fn vandermonde(x: &[i64]) -> BigInt {
    let mut prod = BigInt::one();
    for j in 0..x.len() {
        for i in 0..j {
            prod *= BigInt::from(x[j] - x[i]);
        }
    }
    prod
}

/// `binom(x + shift, x) q^x` for `x >= 0`.
pub fn ensemble_weight(q: &GeometricParameter, shift: i64, x: i64) -> BigRational {
    if x < 0 {
        return BigRational::zero();
    }
    BigRational::from_integer(binomial(x + shift, x)) * num_traits::pow(q.rational().clone(), x as usize)
}

/// Literal sum of `Δ_n(x)^2 prod binom(x_j + shift, x_j) q^{x_j}` over
/// `{0, ..., end}^n`.
pub fn box_sum(q: &GeometricParameter, n: usize, shift: i64, end: i64) -> BigRational {
    if end < 0 {
        return BigRational::zero();
    }
    // With q = p/d every term is an integer over d^(n*end).
    let p = q.rational().numer().clone();
    let d = q.rational().denom().clone();
    let factor: Vec<BigInt> = (0..=end)
        .map(|x| {
            binomial(x + shift, x)
                * num_traits::pow(p.clone(), x as usize)
                * num_traits::pow(d.clone(), (end - x) as usize)
        })
        .collect();
    let mut total = BigInt::zero();
    let mut x = vec![0i64; n];
    loop {
        let v = vandermonde(&x);
        if !v.is_zero() {
            let weight = x.iter().fold(BigInt::one(), |acc, &xi| acc * &factor[xi as usize]);
            total += &v * &v * weight;
        }
        // odometer increment
        let Some(k) = (0..n).rev().find(|&k| x[k] < end) else {
            break;
        };
        x[k] += 1;
        x[k + 1..].iter_mut().for_each(|c| *c = 0);
    }
    BigRational::new(total, num_traits::pow(d, n * end as usize))
}

/// `sum_{x >= 0} x^k binom(x + shift, x) q^x` in exact arithmetic.
///
/// Writing the sum as `P_k(q) / (1 - q)^{shift+1+k}`, the operator `q d/dq`
/// gives `P_{k+1} = q (1 - q) P_k' + (shift + 1 + k) q P_k` with `P_0 = 1`.
pub fn full_moment_exact(q: &GeometricParameter, shift: i64, k: usize) -> BigRational {
    let mut poly: Vec<BigInt> = vec![BigInt::one()];
    for step in 0..k {
        let s = BigInt::from(shift + 1 + step as i64);
        let mut next = vec![BigInt::zero(); poly.len() + 1];
        for (deg, c) in poly.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            // q(1-q) * deg * c q^(deg-1) = deg c (q^deg - q^(deg+1))
            let dc = c * BigInt::from(deg);
            next[deg] += &dc;
            next[deg + 1] -= &dc;
            next[deg + 1] += c * &s;
        }
        poly = next;
    }
    let qr = q.rational();
    let value = poly
        .iter()
        .rev()
        .fold(BigRational::zero(), |acc, c| acc * qr + BigRational::from_integer(c.clone()));
    value / num_traits::pow(q.complement(), (shift + 1) as usize + k)
}

/// Normalization `Z = sum_{x in N^n} Δ_n(x)^2 prod binom(x_j + shift, x_j) q^{x_j}`,
/// obtained as `n! det(mu_{i+j})` from the exact full-lattice moments.
pub fn partition_function(q: &GeometricParameter, n: usize, shift: i64) -> BigRational {
    let moments: Vec<BigRational> = (0..2 * n - 1).map(|k| full_moment_exact(q, shift, k)).collect();
    let gram: Vec<Vec<BigRational>> = (0..n)
        .map(|i| (0..n).map(|j| moments[i + j].clone()).collect())
        .collect();
    let factorial: BigInt = (1..=n as i64).map(BigInt::from).product();
    det_exact(&gram) * BigRational::from_integer(factorial)
}

/// Exact Meixner-ensemble probability of the box by literal summation.
pub fn meixner_cdf_bruteforce(mq: &MeixnerEnsembleQuery) -> Result<BigRational> {
    meixner_cdf_bruteforce_capped(mq, DEFAULT_MAX_TERMS)
}

pub fn meixner_cdf_bruteforce_capped(mq: &MeixnerEnsembleQuery, cap: u128) -> Result<BigRational> {
    let side = (mq.box_end() + 1).max(0) as u128;
    let terms = side.checked_pow(mq.n as u32).unwrap_or(u128::MAX);
    if terms > cap {
        return Err(Error::StateSpaceTooLarge { states: terms, cap });
    }
    let shift = mq.weight_shift();
    let numerator = box_sum(&mq.q, mq.n, shift, mq.box_end());
    Ok(numerator / partition_function(&mq.q, mq.n, shift))
}

/// A value carried to a stated number of decimal digits.
#[derive(Debug, Clone, PartialEq)]
pub struct HighPrecisionValue {
    /// Exact rational approximation, rounded to `10^-digits`.
    pub value: BigRational,
    pub digits: u32,
}

impl HighPrecisionValue {
    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.value)
    }

    /// Fixed-point decimal rendering with `digits` fractional digits.
    pub fn to_decimal_string(&self) -> String {
        let scale = num_traits::pow(BigInt::from(10), self.digits as usize);
        let scaled = (&self.value * BigRational::from_integer(scale)).round().to_integer();
        let negative = scaled.is_negative();
        let digits = scaled.abs().to_string();
        let width = self.digits as usize + 1;
        let padded = format!("{digits:0>width$}");
        let (int_part, frac_part) = padded.split_at(padded.len() - self.digits as usize);
        format!("{}{int_part}.{frac_part}", if negative { "-" } else { "" })
    }
}

/// Rounds to the nearest multiple of `grid`.
fn round_to(value: &BigRational, grid: &BigRational) -> BigRational {
    (value / grid).round() * grid
}

/// `sum_{x >= 0} (x - center)^k binom(x + shift, x) q^x` summed until a
/// rigorous geometric bound on the remaining tail is below `eps`, then
/// rounded to the `eps` grid.
fn full_moment_truncated(
    q: &GeometricParameter,
    shift: i64,
    k: usize,
    center: &BigRational,
    eps: &BigRational,
) -> BigRational {
    let one = BigRational::one();
    let mut sum = BigRational::zero();
    let mut x: i64 = 0;
    loop {
        let xr = BigRational::from_integer(BigInt::from(x));
        sum += num_traits::pow(&xr - center, k) * ensemble_weight(q, shift, x);
        x += 1;
        // For x >= max(1, center) the unshifted terms t(x) = x^k binom(x+shift,x) q^x
        // dominate the shifted ones and have decreasing ratios, so the tail
        // from x is at most t(x) / (1 - ratio(x)).
        let xr = BigRational::from_integer(BigInt::from(x));
        if x % 8 == 0 && xr >= *center {
            let next = BigRational::from_integer(BigInt::from(x + 1));
            let ratio = num_traits::pow(&next / &xr, k) * BigRational::from_integer(BigInt::from(x + 1 + shift))
                / &next
                * q.rational();
            if ratio < one {
                let term = num_traits::pow(xr, k) * ensemble_weight(q, shift, x);
                if term / (&one - ratio) < *eps {
                    break;
                }
            }
        }
    }
    round_to(&sum, eps)
}

fn box_moment(q: &GeometricParameter, shift: i64, k: usize, center: &BigRational, end: i64) -> BigRational {
    (0..=end.max(-1))
        .map(|x| num_traits::pow(BigRational::from_integer(BigInt::from(x)) - center, k) * ensemble_weight(q, shift, x))
        .fold(BigRational::zero(), |a, b| a + b)
}

fn gram_ratio(mq: &MeixnerEnsembleQuery, extra_digits: u32, center: &BigRational) -> BigRational {
    let n = mq.n;
    let shift = mq.weight_shift();
    let end = mq.box_end();
    let eps = ten_pow_neg(extra_digits);
    let boxed: Vec<BigRational> = (0..2 * n - 1).map(|k| box_moment(&mq.q, shift, k, center, end)).collect();
    let full: Vec<BigRational> = (0..2 * n - 1)
        .map(|k| full_moment_truncated(&mq.q, shift, k, center, &eps))
        .collect();
    let hankel = |mu: &[BigRational]| -> Vec<Vec<BigRational>> {
        (0..n).map(|i| (0..n).map(|j| mu[i + j].clone()).collect()).collect()
    };
    det_exact(&hankel(&boxed)) / det_exact(&hankel(&full))
}

/// Meixner-ensemble probability through Cauchy–Binet: `det(M_box) / det(M_full)`
/// with Hankel moment matrices `M_ij = sum_x (x - c)^{i+j} binom(x+m-n, x) q^x`.
///
/// Full-lattice moments are truncated with a rigorous tail bound and rounded
/// to a grid finer than `10^-digits`; the ratio is formed at two grid sizes and
/// [`Error::PrecisionLoss`] is returned if they disagree at the requested
/// precision. With `centered`, `c = (eta + n - 1) / 2`, else `c = 0`.
pub fn meixner_cdf_gram(mq: &MeixnerEnsembleQuery, digits: u32, centered: bool) -> Result<HighPrecisionValue> {
    if digits == 0 {
        return Err(Error::InvalidParameter("precision must be at least one digit".into()));
    }
    if mq.box_end() < 0 {
        return Ok(HighPrecisionValue {
            value: BigRational::zero(),
            digits,
        });
    }
    let center = if centered {
        BigRational::new(BigInt::from(mq.box_end()), BigInt::from(2))
    } else {
        BigRational::zero()
    };
    let coarse = gram_ratio(mq, digits + GUARD_DIGITS, &center);
    let fine = gram_ratio(mq, digits + 2 * GUARD_DIGITS, &center);
    let tolerance = ten_pow_neg(digits + 1);
    let spread = (&coarse - &fine).abs();
    if spread > tolerance {
        return Err(Error::PrecisionLoss(format!(
            "Gram ratio moved by {:e} between working precisions; {digits} digits are not supported",
            rational_to_f64(&spread)
        )));
    }
    Ok(HighPrecisionValue {
        value: round_to(&fine, &ten_pow_neg(digits)),
        digits,
    })
}

/// The alternative form
/// `1/n! prod_{j<n} 1/j! sum_{y in {0..η+n-1}^n} Δ_n(y) det((-1)^{j-1} Δ^{j-1} w_m(y_i - n + 1))`.
///
/// The `1/n!` is the Cauchy–Binet factor from symmetrizing over all of
/// `{0..η+n-1}^n`.
pub fn cdf_vandermonde_form(cq: &CdfQuery) -> Result<BigRational> {
    let n = cq.n;
    let end = cq.eta + n as i64 - 1;
    let m = cq.m as i64;
    // column j of the determinant only depends on y_i, so tabulate it
    let table: Vec<Vec<BigRational>> = (0..=end)
        .map(|y| {
            (0..n)
                .map(|j| {
                    let v = delta_w(&cq.q, m, j as i32, y - n as i64 + 1)?;
                    Ok(if j % 2 == 1 { -v } else { v })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut total = BigRational::zero();
    let mut y = vec![0i64; n];
    loop {
        let v = vandermonde(&y);
        if !v.is_zero() {
            let rows: Vec<Vec<BigRational>> = y.iter().map(|&yi| table[yi as usize].clone()).collect();
            total += BigRational::from_integer(v) * det_exact(&rows);
        }
        let Some(k) = (0..n).rev().find(|&k| y[k] < end) else {
            break;
        };
        y[k] += 1;
        y[k + 1..].iter_mut().for_each(|c| *c = 0);
    }
    let norm: BigInt = (1..=n as i64)
        .map(|j| (1..j).map(BigInt::from).product::<BigInt>())
        .product::<BigInt>()
        * (1..=n as i64).map(BigInt::from).product::<BigInt>();
    Ok(total / BigRational::from_integer(norm))
}

/// Meixner polynomial `p_j(x) = (j!/2πi) ∮ (1 - z/q)^x / (1 - z)^{x+K} dz / z^{j+1}`
/// with `K = m - n + 1`, on a circle of radius `0 < radius < 1`.
///
/// The family is orthogonal on `N` for the weight `binom(x + K - 1, x) q^x`.
pub fn meixner_poly(
    q: &GeometricParameter,
    m: usize,
    n: usize,
    j: usize,
    x: i64,
    radius: f64,
    settings: &QuadratureSettings,
) -> Result<f64> {
    if n == 0 || m < n {
        return Err(Error::InvalidParameter(format!("need m >= n >= 1, got m={m}, n={n}")));
    }
    if !(radius > 0.0 && radius < 1.0) {
        return Err(Error::InvalidParameter(format!("radius must lie in (0, 1), got {radius}")));
    }
    if x < 0 {
        return Err(Error::InvalidParameter(format!("x must be nonnegative, got {x}")));
    }
    let k = (m - n + 1) as i32;
    let qf = q.value();
    let one = Complex64::new(1.0, 0.0);
    let x = x as i32;
    let integrand = |z: Complex64| (one - z / qf).powi(x) * (one - z).powi(-(x + k)) * z.powi(-(j as i32) - 1);
    let v = circle_integral(integrand, radius, settings)?;
    let factorial: f64 = (1..=j).map(|i| i as f64).product();
    Ok(factorial * v.value.re)
}

/// Radius used by default for [`meixner_poly`].
pub fn default_poly_radius(q: &GeometricParameter) -> f64 {
    0.5 * q.value()
}

/// Exact coefficient form of [`meixner_poly`]:
/// `j! sum_i binom(x, i) (-1/q)^i binom(x + K + j - i - 1, j - i)`.
pub fn meixner_poly_exact(q: &GeometricParameter, m: usize, n: usize, j: usize, x: i64) -> BigRational {
    let k = (m - n + 1) as i64;
    let neg_inv_q = -BigRational::one() / q.rational();
    let factorial: BigInt = (1..=j as i64).map(BigInt::from).product();
    let sum = (0..=j as i64)
        .map(|i| {
            BigRational::from_integer(binomial(x, i) * binomial(x + k + j as i64 - i - 1, j as i64 - i))
                * num_traits::pow(neg_inv_q.clone(), i as usize)
        })
        .fold(BigRational::zero(), |a, b| a + b);
    sum * BigRational::from_integer(factorial)
}

/// Number of terms the brute-force sum for `mq` visits.
pub fn bruteforce_terms(mq: &MeixnerEnsembleQuery) -> u128 {
    let side = (mq.box_end() + 1).max(0) as u128;
    side.checked_pow(mq.n as u32).unwrap_or(u128::MAX)
}
