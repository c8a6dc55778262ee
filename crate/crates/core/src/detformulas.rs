//! Determinantal formulas for the row-vector chain: the multi-step transition
//! kernel `det(Δ^{j-i} w_steps(y_j - x_i))`, the distribution function
//! `P[G(m,n) <= η] = det(Δ^{j-i-1} w_m(η+1))`, and the double-sum expression
//! for the joint law of two diagonal passage times.

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::linalg::{det_exact, det_f64};
use crate::lpp::{state_space_size, OrderedVector, StateSpace, DEFAULT_MAX_STATES};
use crate::weights::{delta_w, delta_w_f64, GeometricParameter};

/// Transition of the chain from `x` at time `l` to `y` at time `l + steps`.
#[derive(Debug, Clone)]
pub struct TransitionQuery {
    pub q: GeometricParameter,
    pub steps: usize,
    pub x: OrderedVector,
    pub y: OrderedVector,
}

impl TransitionQuery {
    pub fn new(q: GeometricParameter, steps: usize, x: OrderedVector, y: OrderedVector) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch(x.len(), y.len()));
        }
        if x.is_empty() {
            return Err(Error::InvalidParameter("empty state vector".into()));
        }
        Ok(Self { q, steps, x, y })
    }

    pub fn dimension(&self) -> usize {
        self.x.len()
    }
}

/// The matrix `(Δ^{j-i} w_steps(y_j - x_i))_{i,j}`; requires `steps >= 1`.
pub fn transition_matrix(tq: &TransitionQuery) -> Result<Vec<Vec<BigRational>>> {
    let n = tq.dimension();
    let (x, y) = (tq.x.entries(), tq.y.entries());
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| delta_w(&tq.q, tq.steps as i64, j as i32 - i as i32, y[j] - x[i]))
                .collect()
        })
        .collect()
}

/// `P[G(l + steps) = y | G(l) = x]` as an exact determinant; `steps = 0` is the
/// identity kernel.
pub fn transition_det(tq: &TransitionQuery) -> Result<BigRational> {
    if tq.steps == 0 {
        return Ok(if tq.x == tq.y {
            BigRational::one()
        } else {
            BigRational::zero()
        });
    }
    Ok(det_exact(&transition_matrix(tq)?))
}

/// Float layer of [`transition_det`].
pub fn transition_det_f64(tq: &TransitionQuery) -> Result<f64> {
    if tq.steps == 0 {
        return Ok(if tq.x == tq.y { 1.0 } else { 0.0 });
    }
    let n = tq.dimension();
    let (x, y) = (tq.x.entries(), tq.y.entries());
    let q = tq.q.value();
    let matrix = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| delta_w_f64(q, tq.steps as i64, j as i32 - i as i32, y[j] - x[i]))
                .collect()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(det_f64(matrix))
}

/// Query for `P[G(m, n) <= eta]` with `m >= n >= 1`.
#[derive(Debug, Clone)]
pub struct CdfQuery {
    pub q: GeometricParameter,
    pub m: usize,
    pub n: usize,
    pub eta: i64,
}

impl CdfQuery {
    pub fn new(q: GeometricParameter, m: usize, n: usize, eta: i64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if m < n {
            return Err(Error::InvalidParameter(format!(
                "the determinant formula needs m >= n, got m={m}, n={n}; swap them (the law is symmetric)"
            )));
        }
        if eta < 0 {
            return Err(Error::InvalidParameter(format!("eta must be nonnegative, got {eta}")));
        }
        Ok(Self { q, m, n, eta })
    }
}

/// The matrix `(Δ^{j-i-1} w_m(η+1))_{1<=i,j<=n}`.
pub fn cdf_matrix(cq: &CdfQuery) -> Result<Vec<Vec<BigRational>>> {
    (0..cq.n)
        .map(|i| {
            (0..cq.n)
                .map(|j| delta_w(&cq.q, cq.m as i64, j as i32 - i as i32 - 1, cq.eta + 1))
                .collect()
        })
        .collect()
}

/// `P[G(m, n) <= eta] = det(Δ^{j-i-1} w_m(η+1))`, exact.
pub fn cdf_det(cq: &CdfQuery) -> Result<BigRational> {
    Ok(det_exact(&cdf_matrix(cq)?))
}

/// Float layer of [`cdf_det`].
pub fn cdf_det_f64(cq: &CdfQuery) -> Result<f64> {
    let q = cq.q.value();
    let matrix = (0..cq.n)
        .map(|i| {
            (0..cq.n)
                .map(|j| delta_w_f64(q, cq.m as i64, j as i32 - i as i32 - 1, cq.eta + 1))
                .collect()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(det_f64(matrix))
}

/// Value of the truncated joint-distribution double sum.
#[derive(Debug, Clone, PartialEq)]
pub struct JointCdf {
    pub value: BigRational,
    /// Contribution of the terms whose largest coordinate equals the truncation.
    pub last_increment: BigRational,
    pub truncation: i64,
}

/// `P[G(m,m) <= η1, G(n,n) <= η2]` for `1 <= m < n` as the double sum over
/// `x, y in W_n` (with `x_m <= η1`, `y_n <= η2`) of
/// `det(Δ^{j-i} w_m(x_j)) det(Δ^{j-i} w_{n-m}(y_j - x_i))`.
///
/// Coordinates run over `[0, truncation]`: the first factor is the law of
/// `G(m)` started at the origin and vanishes for negative coordinates.
pub fn joint_cdf(
    q: &GeometricParameter,
    m: usize,
    n: usize,
    eta1: i64,
    eta2: i64,
    truncation: i64,
) -> Result<JointCdf> {
    joint_cdf_capped(q, m, n, eta1, eta2, truncation, DEFAULT_MAX_STATES)
}

pub fn joint_cdf_capped(
    q: &GeometricParameter,
    m: usize,
    n: usize,
    eta1: i64,
    eta2: i64,
    truncation: i64,
    cap: u128,
) -> Result<JointCdf> {
    if m == 0 || m >= n {
        return Err(Error::InvalidParameter(format!("need 1 <= m < n, got m={m}, n={n}")));
    }
    if eta1 < 0 || eta2 < 0 {
        return Err(Error::InvalidParameter("thresholds must be nonnegative".into()));
    }
    if truncation < eta1.max(eta2) {
        return Err(Error::InvalidParameter(format!(
            "truncation {truncation} must be at least max(eta1, eta2)"
        )));
    }
    // the double sum visits (states)^2 pairs
    let states = state_space_size(n, truncation);
    if states.saturating_mul(states) > cap {
        return Err(Error::StateSpaceTooLarge {
            states: states.saturating_mul(states),
            cap,
        });
    }
    let space = StateSpace::new(n, truncation, u128::MAX)?;
    let all = space.states();
    let origin = OrderedVector::zeros(n);
    let mut value = BigRational::zero();
    let mut boundary = BigRational::zero();
    for x in all.iter().filter(|x| x[m - 1] <= eta1) {
        let x = OrderedVector::new(x.clone())?;
        let first = transition_det(&TransitionQuery::new(q.clone(), m, origin.clone(), x.clone())?)?;
        if first.is_zero() {
            continue;
        }
        for y in all.iter().filter(|y| y[n - 1] <= eta2) {
            let y = OrderedVector::new(y.clone())?;
            let on_boundary = x.entries()[n - 1] == truncation || y.entries()[n - 1] == truncation;
            let second = transition_det(&TransitionQuery::new(q.clone(), n - m, x.clone(), y)?)?;
            let term = &first * second;
            if on_boundary {
                boundary += &term;
            }
            value += term;
        }
    }
    Ok(JointCdf {
        value,
        last_increment: boundary,
        truncation,
    })
}

/// `sum_{y in W_n, lo <= y, y_n <= truncation} T_a(x -> y) T_b(y -> z)` where
/// `lo = x_1`; below that the first factor vanishes.
pub fn chapman_kolmogorov_sum(
    q: &GeometricParameter,
    a: usize,
    b: usize,
    x: &OrderedVector,
    z: &OrderedVector,
    truncation: i64,
) -> Result<BigRational> {
    if x.len() != z.len() {
        return Err(Error::LengthMismatch(x.len(), z.len()));
    }
    let n = x.len();
    let lo = x.entries()[0];
    let mut total = BigRational::zero();
    if truncation < lo {
        return Ok(total);
    }
    let space = StateSpace::new(n, truncation - lo, u128::MAX)?;
    for shifted in space.states() {
        let y = OrderedVector::new(shifted.iter().map(|v| v + lo).collect())?;
        let first = transition_det(&TransitionQuery::new(q.clone(), a, x.clone(), y.clone())?)?;
        if first.is_zero() {
            continue;
        }
        let second = transition_det(&TransitionQuery::new(q.clone(), b, y, z.clone())?)?;
        total += first * second;
    }
    Ok(total)
}
