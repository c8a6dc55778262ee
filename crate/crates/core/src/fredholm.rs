//! Biorthogonal and Fredholm-determinant representations of
//! `P[G(m, n) <= η]`.
//!
//! With `K = m - n + 1`, the functions
//!
//! ```text
//! a_j(x) = ((q-1)/2πi) ∮_{|z|=r2} z^{x-1} (qz-1)^{j+K-1} / (z-1)^{j+1} dz
//! b_j(x) = (1/2πi)     ∮_{|w|=r1} (w-1)^j / (w^x (qw-1)^{j+K}) dw
//! ```
//!
//! are biorthogonal on `N`, the distribution function is the `n x n`
//! determinant `det(sum_{y=0}^{η+n} a_i(y) b_j(y))`, and equivalently the
//! Fredholm determinant `det(I - K_{m,n})` on `ℓ²({η+1, η+2, ...})` with the
//! double contour integral kernel
//!
//! ```text
//! K(x,y) = (1/(2πi)²) ∮dz/z ∮dw/w  w/(w-z) z^{x+n}/w^{y+n}
//!          (1-qz)^m (1-w)^n / ((1-z)^n (1-qw)^e)
//! ```
//!
//! where `e = m` ([`KernelVariant::Derivation`]). The variant with `e = n`
//! ([`KernelVariant::Printed`]) is kept for comparison only; it differs when
//! `m != n` and does not reproduce the distribution.

use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::contour::{circle_integral, circle_node, QuadratureSettings};
use crate::error::{Error, Result};
use crate::linalg::det_f64;
use crate::weights::{binomial, ContourConfig, GeometricParameter};

/// Largest truncation tried by [`cdf_fredholm`].
pub const MAX_TRUNCATION: usize = 2048;

/// Stopping threshold for truncation doubling in [`cdf_fredholm`].
pub const TRUNCATION_TOL: f64 = 1e-10;

/// Node cap for the double contour integrals behind kernel matrices.
pub const KERNEL_MAX_NODES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelVariant {
    /// Denominator `(1 - qw)^n`.
    Printed,
    /// Denominator `(1 - qw)^m`.
    Derivation,
}

impl fmt::Display for KernelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Printed => "printed",
            Self::Derivation => "derivation",
        })
    }
}

#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub q: GeometricParameter,
    pub m: usize,
    pub n: usize,
    pub variant: KernelVariant,
    pub cfg: ContourConfig,
}

impl KernelSpec {
    pub fn new(
        q: GeometricParameter,
        m: usize,
        n: usize,
        variant: KernelVariant,
        cfg: ContourConfig,
    ) -> Result<Self> {
        if n == 0 || m < n {
            return Err(Error::InvalidParameter(format!("need m >= n >= 1, got m={m}, n={n}")));
        }
        cfg.validate(&q)?;
        Ok(Self {
            q,
            m,
            n,
            variant,
            cfg,
        })
    }

    /// Derivation-variant spec with the default radii.
    pub fn standard(q: GeometricParameter, m: usize, n: usize) -> Result<Self> {
        let cfg = ContourConfig::default_for(&q);
        Self::new(q, m, n, KernelVariant::Derivation, cfg)
    }

    /// `K = m - n + 1`
    pub fn k(&self) -> i32 {
        (self.m - self.n + 1) as i32
    }

    fn w_exponent(&self) -> i32 {
        match self.variant {
            KernelVariant::Printed => self.n as i32,
            KernelVariant::Derivation => self.m as i32,
        }
    }
}

/// Index `0 <= j < n` of the biorthogonal families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiorthIndex(usize);

impl BiorthIndex {
    pub fn new(j: usize, n: usize) -> Result<Self> {
        if j >= n {
            return Err(Error::InvalidParameter(format!("index {j} out of range for n={n}")));
        }
        Ok(Self(j))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// `a_j(x)` by trapezoidal quadrature on `|z| = r2`.
pub fn a_fn(spec: &KernelSpec, j: BiorthIndex, x: i64) -> Result<f64> {
    let j = j.0 as i32;
    let k = spec.k();
    let q = spec.q.value();
    let one = Complex64::new(1.0, 0.0);
    let integrand =
        |z: Complex64| z.powi((x - 1) as i32) * (z * q - one).powi(j + k - 1) / (z - one).powi(j + 1);
    let v = circle_integral(integrand, spec.cfg.r2, &spec.cfg.quadrature())?;
    Ok((q - 1.0) * v.value.re)
}

/// `b_j(x)` by trapezoidal quadrature on `|w| = r1`.
pub fn b_fn(spec: &KernelSpec, j: BiorthIndex, x: i64) -> Result<f64> {
    let j = j.0 as i32;
    let k = spec.k();
    let q = spec.q.value();
    let one = Complex64::new(1.0, 0.0);
    let integrand = |w: Complex64| (w - one).powi(j) * w.powi(-(x as i32)) / (w * q - one).powi(j + k);
    let v = circle_integral(integrand, spec.cfg.r1, &spec.cfg.quadrature())?;
    Ok(v.value.re)
}

/// `binom(top, r)` for any integer `top`, `r >= 0`.
fn general_binomial(top: i64, r: i64) -> BigRational {
    let mut acc = BigRational::one();
    for i in 0..r {
        acc = acc * BigRational::from_integer(BigInt::from(top - i)) / BigRational::from_integer(BigInt::from(i + 1));
    }
    acc
}

/// `a_j(x)` exactly, as the sum of residues at `z = 1` and (for `x <= 0`) `z = 0`.
pub fn a_residue(q: &GeometricParameter, m: usize, n: usize, j: usize, x: i64) -> BigRational {
    let k = (m - n + 1) as i64;
    let e = j as i64 + k - 1;
    let qr = q.rational().clone();
    let qm1 = &qr - BigRational::one();
    // at z = 1 + u: [u^j] (1+u)^{x-1} (q-1+qu)^e
    let mut at_one = BigRational::zero();
    for r in 0..=j as i64 {
        let s = j as i64 - r;
        if s > e {
            continue;
        }
        at_one += general_binomial(x - 1, r)
            * BigRational::from_integer(binomial(e, s))
            * num_traits::pow(qr.clone(), s as usize)
            * num_traits::pow(qm1.clone(), (e - s) as usize);
    }
    // at z = 0: [z^{-x}] (qz-1)^e (z-1)^{-(j+1)}
    let mut at_zero = BigRational::zero();
    if x <= 0 {
        let t = -x;
        let sign = if (e + j as i64 + 1) % 2 == 0 { 1 } else { -1 };
        for i in 0..=t.min(e) {
            let term = BigRational::from_integer(binomial(e, i) * binomial(t - i + j as i64, j as i64))
                * num_traits::pow(-qr.clone(), i as usize);
            at_zero += term;
        }
        at_zero *= BigRational::from_integer(BigInt::from(sign));
    }
    qm1 * (at_one + at_zero)
}

/// `b_j(x)` exactly: the residue at `w = 0`, zero for `x <= 0` since the pole
/// at `1/q` lies outside the contour.
pub fn b_residue(q: &GeometricParameter, m: usize, n: usize, j: usize, x: i64) -> BigRational {
    if x <= 0 {
        return BigRational::zero();
    }
    let k = (m - n + 1) as i64;
    let order = j as i64 + k;
    let t = x - 1;
    let qr = q.rational().clone();
    // (w-1)^j (qw-1)^{-order} = (-1)^{j+order} (1-w)^j (1-qw)^{-order}
    let mut sum = BigRational::zero();
    for i in 0..=t.min(j as i64) {
        sum += BigRational::from_integer(binomial(j as i64, i) * binomial(t - i + order - 1, t - i))
            * num_traits::pow(-BigRational::one(), i as usize)
            * num_traits::pow(qr.clone(), (t - i) as usize);
    }
    if (j as i64 + order) % 2 == 0 {
        sum
    } else {
        -sum
    }
}

/// `c_{jl} = binom(n-l-1, j-l) H(j-l)`, the change of basis linking
/// `Δ^j w_m(y-n)` to `b_l(y)`.
pub fn c_matrix(n: usize) -> Vec<Vec<BigRational>> {
    (0..n)
        .map(|j| {
            (0..n)
                .map(|l| {
                    if j >= l {
                        BigRational::from_integer(binomial((n - l - 1) as i64, (j - l) as i64))
                    } else {
                        BigRational::zero()
                    }
                })
                .collect()
        })
        .collect()
}

/// Double trapezoidal rule for the kernel in spectral form.
///
/// On equispaced nodes `z_a = r2 ω^a`, `w_b = r1 ω^b` the Cauchy factor
/// `w_b / (w_b - z_a) = 1 / (1 - ρ ω^(a-b))`, `ρ = r2 / r1`, is circulant with
/// eigenvalues `λ_k = ρ^k / (1 - ρ^N)`, so the `N x N` node sum collapses to
/// `K(x, y) = N^-2 r2^x r1^-y sum_k λ_k F[x+k] G[y+k]`, where `F` and `G` are
/// discrete Fourier transforms of the single-variable factors.
struct SpectralKernel {
    nodes: usize,
    lambda: Vec<f64>,
    f: Vec<Complex64>,
    g: Vec<Complex64>,
    /// Mean moduli of the single-variable factors, for error scales.
    f_scale: f64,
    g_scale: f64,
}

impl SpectralKernel {
    fn new(spec: &KernelSpec, nodes: usize) -> Self {
        let q = spec.q.value();
        let n = spec.n as i32;
        let m = spec.m as i32;
        let e = spec.w_exponent();
        let one = Complex64::new(1.0, 0.0);
        let roots: Vec<Complex64> = (0..nodes).map(|j| circle_node(1.0, j, nodes)).collect();
        // z^n (1-qz)^m / (1-z)^n and w^-n (1-w)^n / (1-qw)^e on the circles
        let zf: Vec<Complex64> = roots
            .iter()
            .map(|&u| {
                let z = u * spec.cfg.r2;
                z.powi(n) * (one - z * q).powi(m) / (one - z).powi(n)
            })
            .collect();
        let wf: Vec<Complex64> = roots
            .iter()
            .map(|&u| {
                let w = u * spec.cfg.r1;
                w.powi(-n) * (one - w).powi(n) / (one - w * q).powi(e)
            })
            .collect();
        let dft = |vals: &[Complex64], sign: bool| -> Vec<Complex64> {
            (0..nodes)
                .into_par_iter()
                .map(|j| {
                    vals.iter()
                        .enumerate()
                        .map(|(a, v)| {
                            let r = roots[(a * j) % nodes];
                            v * if sign { r } else { r.conj() }
                        })
                        .sum()
                })
                .collect()
        };
        let rho = spec.cfg.r2 / spec.cfg.r1;
        let denom = 1.0 - rho.powi(nodes as i32);
        // stored twice over so that shifted windows need no wrap-around
        let doubled = |v: Vec<Complex64>| [v.as_slice(), v.as_slice()].concat();
        Self {
            nodes,
            lambda: (0..nodes).map(|k| rho.powi(k as i32) / denom).collect(),
            f: doubled(dft(&zf, true)),
            g: doubled(dft(&wf, false)),
            f_scale: zf.iter().map(|c| c.norm()).sum::<f64>() / nodes as f64,
            g_scale: wf.iter().map(|c| c.norm()).sum::<f64>() / nodes as f64,
        }
    }

    /// Unscaled `sum_k λ_k F[x+k] G[y+k] / N^2`.
    fn core(&self, x: i64, y: i64) -> f64 {
        let n = self.nodes;
        let xs = x.rem_euclid(n as i64) as usize;
        let ys = y.rem_euclid(n as i64) as usize;
        let acc: Complex64 = self.f[xs..xs + n]
            .iter()
            .zip(&self.g[ys..ys + n])
            .zip(&self.lambda)
            .map(|((f, g), l)| f * g * l)
            .sum();
        acc.re / (n * n) as f64
    }
}

/// Kernel block `(K(x, y))` for `x in xs`, `y in ys` at a fixed node count,
/// scaled by `rho^{y-x}` (a diagonal similarity, which leaves Fredholm
/// determinants unchanged). Also returns the per-entry error scale.
fn kernel_block_fixed(
    spec: &KernelSpec,
    xs: &[i64],
    ys: &[i64],
    nodes: usize,
    rho: f64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let sk = SpectralKernel::new(spec, nodes);
    let (r2, r1) = (spec.cfg.r2, spec.cfg.r1);
    let col_scale: Vec<f64> = ys.iter().map(|&y| (rho / r1).powi(y as i32)).collect();
    xs.par_iter()
        .map(|&x| {
            let row_scale = (r2 / rho).powi(x as i32);
            ys.iter()
                .zip(&col_scale)
                .map(|(&y, cs)| {
                    let s = row_scale * cs;
                    (s * sk.core(x, y), s * sk.f_scale * sk.g_scale)
                })
                .unzip::<f64, f64, Vec<f64>, Vec<f64>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .unzip()
}

/// Kernel block with node doubling until two successive node counts agree to
/// `rel_tol` relative to `max(|K|, integrand scale)` in every entry.
fn kernel_block(
    spec: &KernelSpec,
    xs: &[i64],
    ys: &[i64],
    rho: f64,
    settings: &QuadratureSettings,
) -> Result<Vec<Vec<f64>>> {
    let mut nodes = spec.cfg.nodes;
    let (mut prev, _) = kernel_block_fixed(spec, xs, ys, nodes, rho);
    let mut change = f64::INFINITY;
    while 2 * nodes <= KERNEL_MAX_NODES {
        nodes *= 2;
        let (next, scale) = kernel_block_fixed(spec, xs, ys, nodes, rho);
        let mut ok = true;
        change = 0.0;
        for ((pr, nr), sr) in prev.iter().zip(&next).zip(&scale) {
            for ((p, v), s) in pr.iter().zip(nr).zip(sr) {
                let d = (p - v).abs();
                change = change.max(d);
                if d > settings.rel_tol * v.abs().max(*s) {
                    ok = false;
                }
            }
        }
        if ok {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureNonConvergence {
        nodes,
        change,
        tolerance: settings.rel_tol,
    })
}

/// `K_{m,n}(x, y)` by double trapezoidal quadrature.
pub fn kernel_eval(spec: &KernelSpec, x: i64, y: i64) -> Result<f64> {
    let block = kernel_block(spec, &[x], &[y], 1.0, &QuadratureSettings::default())?;
    Ok(block[0][0])
}

/// `K_{m,n}(x, y)` for all pairs in `xs x ys`, sharing the node evaluations.
pub fn kernel_matrix(spec: &KernelSpec, xs: &[i64], ys: &[i64]) -> Result<Vec<Vec<f64>>> {
    kernel_block(spec, xs, ys, 1.0, &QuadratureSettings::default())
}

/// `det(sum_{y=0}^{η+n} a_i(y) b_j(y))_{0 <= i,j < n}`.
pub fn cdf_biorth(spec: &KernelSpec, eta: i64) -> Result<f64> {
    if eta < 0 {
        return Err(Error::InvalidParameter(format!("eta must be nonnegative, got {eta}")));
    }
    let n = spec.n;
    let ys: Vec<i64> = (0..=eta + n as i64).collect();
    let a = (0..n)
        .map(|i| ys.iter().map(|&y| a_fn(spec, BiorthIndex(i), y)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let b = (0..n)
        .map(|j| ys.iter().map(|&y| b_fn(spec, BiorthIndex(j), y)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let pairing = (0..n)
        .map(|i| (0..n).map(|j| a[i].iter().zip(&b[j]).map(|(u, v)| u * v).sum()).collect())
        .collect();
    Ok(det_f64(pairing))
}

/// `sum_{y=0}^{upto} a_j(y) b_k(y)` for all `j, k < n`.
pub fn biorth_pairing(spec: &KernelSpec, upto: i64) -> Result<Vec<Vec<f64>>> {
    let n = spec.n;
    let ys: Vec<i64> = (0..=upto).collect();
    let a = (0..n)
        .map(|i| ys.iter().map(|&y| a_fn(spec, BiorthIndex(i), y)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let b = (0..n)
        .map(|j| ys.iter().map(|&y| b_fn(spec, BiorthIndex(j), y)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok((0..n)
        .map(|i| (0..n).map(|j| a[i].iter().zip(&b[j]).map(|(u, v)| u * v).sum()).collect())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FredholmValue {
    pub value: f64,
    /// `|det at the final size - det at half that size|`.
    pub last_increment: f64,
    /// Number of lattice points `η+1, ..., η+size` in the final section.
    pub size: usize,
}

/// `det(I - K)` restricted to `{η+1, ..., η+size}`.
pub fn fredholm_section(spec: &KernelSpec, eta: i64, size: usize) -> Result<f64> {
    Ok(sections(spec, eta, size)?.1)
}

/// Determinants of the sections of size `size / 2` and `size`, sharing one
/// kernel block.
fn sections(spec: &KernelSpec, eta: i64, size: usize) -> Result<(f64, f64)> {
    let idx: Vec<i64> = (1..=size as i64).map(|i| eta + i).collect();
    // conjugating by diag(r2^x) keeps entries O(1) for large x
    let k = kernel_block(spec, &idx, &idx, spec.cfg.r2, &QuadratureSettings::default())?;
    let section = |len: usize| {
        let m = (0..len)
            .map(|i| (0..len).map(|j| if i == j { 1.0 } else { 0.0 } - k[i][j]).collect())
            .collect();
        det_f64(m)
    };
    Ok((section(size / 2), section(size)))
}

/// `det(I - K_{m,n})` on `ℓ²({η+1, η+2, ...})`: sections of size `trunc`,
/// `2 trunc`, ... until successive values differ by less than
/// [`TRUNCATION_TOL`].
pub fn cdf_fredholm(spec: &KernelSpec, eta: i64, trunc: usize) -> Result<FredholmValue> {
    if eta < 0 {
        return Err(Error::InvalidParameter(format!("eta must be nonnegative, got {eta}")));
    }
    if trunc == 0 {
        return Err(Error::InvalidParameter("truncation must be positive".into()));
    }
    let mut size = 2 * trunc.min(MAX_TRUNCATION / 2);
    let mut increment = f64::INFINITY;
    while size <= MAX_TRUNCATION {
        let (half, full) = sections(spec, eta, size)?;
        increment = (full - half).abs();
        if increment < TRUNCATION_TOL {
            return Ok(FredholmValue {
                value: full,
                last_increment: increment,
                size,
            });
        }
        size *= 2;
    }
    Err(Error::TruncationNonConvergence {
        size: size / 2,
        increment,
    })
}
