//! Small dense linear algebra for K x K systems (row-major storage).

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::math::sqrt;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n * n {
        return Err(invalid("solve: matrix and right-hand side disagree"));
    }
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .unwrap_or(col);
        if m[pivot * n + col].abs() < 1e-300 {
            return Err(Error::DegenerateConfusion("singular system".into()));
        }
        if pivot != col {
            for j in 0..n {
                m.swap(col * n + j, pivot * n + j);
            }
            x.swap(col, pivot);
        }
        let d = m[col * n + col];
        for i in col + 1..n {
            let f = m[i * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                m[i * n + j] -= f * m[col * n + j];
            }
            x[i] -= f * x[col];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= m[i * n + j] * x[j];
        }
        x[i] = s / m[i * n + i];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateConfusion("solve overflowed".into()));
    }
    Ok(x)
}

/// Singular values of a square matrix by one-sided Jacobi rotations,
/// sorted in decreasing order.
pub fn singular_values(a: &[f64], n: usize) -> Vec<f64> {
    // Work on columns: u[j] is column j.
    let mut u: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| a[i * n + j]).collect()).collect();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = u[p].iter().map(|x| x * x).sum();
                let beta: f64 = u[q].iter().map(|x| x * x).sum();
                let gamma: f64 = u[p].iter().zip(&u[q]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 || gamma.abs() <= 1e-15 * sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + sqrt(1.0 + zeta * zeta));
                let c = 1.0 / sqrt(1.0 + t * t);
                let s = c * t;
                let (lo, hi) = u.split_at_mut(q);
                for (a, b) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (x, y) = (*a, *b);
                    *a = c * x - s * y;
                    *b = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = u.iter().map(|c| sqrt(c.iter().map(|x| x * x).sum())).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn min_singular_value(a: &[f64], n: usize) -> f64 {
    singular_values(a, n).last().copied().unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = [0.9, 0.2, 0.1, 0.8];
        let x = solve(&a, &[0.55, 0.45]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-14 && (x[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn singular_system_is_rejected() {
        assert!(solve(&[1.0, 1.0, 1.0, 1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn two_by_two_singular_values_match_closed_form() {
        // sigma^2 are the eigenvalues of A^T A.
        let a = [0.9, 0.2, 0.1, 0.8];
        let (p, q, r) = (0.9f64 * 0.9 + 0.1 * 0.1, 0.9 * 0.2 + 0.1 * 0.8, 0.2f64 * 0.2 + 0.8 * 0.8);
        let tr = p + r;
        let det = p * r - q * q;
        let disc = (tr * tr / 4.0 - det).sqrt();
        let smin = (tr / 2.0 - disc).sqrt();
        let smax = (tr / 2.0 + disc).sqrt();
        let sv = singular_values(&a, 2);
        assert!((sv[0] - smax).abs() < 1e-12);
        assert!((sv[1] - smin).abs() < 1e-12);
        assert!((smin - 0.693_355).abs() < 1e-6);
    }

    #[test]
    fn rank_deficient_matrix_has_zero_singular_value() {
        let a = [0.5, 0.5, 0.5, 0.5];
        assert!(min_singular_value(&a, 2) < 1e-12);
    }
}
