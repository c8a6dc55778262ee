//! Small dense determinants: fraction-free Bareiss elimination for the exact
//! layer, partially pivoted LU for the float layer.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Exact determinant of a square rational matrix.
///
/// Each row is scaled by the lcm of its denominators so that elimination runs
/// over integers; the scale factors are divided out at the end.
pub fn det_exact(matrix: &[Vec<BigRational>]) -> BigRational {
    let n = matrix.len();
    if n == 0 {
        return BigRational::one();
    }
    let mut scale = BigInt::one();
    let mut rows: Vec<Vec<BigInt>> = Vec::with_capacity(n);
    for row in matrix {
        assert_eq!(row.len(), n, "determinant of a non-square matrix");
        let lcm = row
            .iter()
            .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
        rows.push(
            row.iter()
                .map(|v| v.numer() * (&lcm / v.denom()))
                .collect(),
        );
        scale *= lcm;
    }
    BigRational::new(bareiss(rows), scale)
}

/// Bareiss elimination on an integer matrix. Every intermediate division is exact.
pub fn bareiss(mut a: Vec<Vec<BigInt>>) -> BigInt {
    let n = a.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut sign = false;
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                Some(r) => {
                    a.swap(k, r);
                    sign = !sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                a[i][j] = v / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    let d = a[n - 1][n - 1].clone();
    if sign {
        -d
    } else {
        d
    }
}

/// Determinant by LU with partial pivoting.
pub fn det_f64(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut det = 1.0;
    for k in 0..n {
        let (p, pivot) = (k..n)
            .map(|r| (r, a[r][k].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot == 0.0 {
            return 0.0;
        }
        if p != k {
            a.swap(p, k);
            det = -det;
        }
        let akk = a[k][k];
        det *= akk;
        for i in k + 1..n {
            let factor = a[i][k] / akk;
            if factor != 0.0 {
                for j in k + 1..n {
                    a[i][j] -= factor * a[k][j];
                }
            }
        }
    }
    det
}
