//! Small dense symmetric-matrix kernels for velocity dimensions 1 through 3.
//!
//! Matrices are row-major `d * d` slices.

use crate::error::{Error, Result};

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &[f64], d: usize) -> Result<Vec<f64>> {
    debug_assert_eq!(a.len(), d * d);
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a[i * d + j];
            for k in 0..j {
                sum -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return Err(Error::InvalidCovariance);
                }
                l[i * d + i] = sum.sqrt();
            } else {
                l[i * d + j] = sum / l[j * d + j];
            }
        }
    }
    Ok(l)
}

/// `ln |A|` from its Cholesky factor.
pub fn log_det_from_cholesky(l: &[f64], d: usize) -> f64 {
    (0..d).map(|i| l[i * d + i].ln()).sum::<f64>() * 2.0
}

/// Squared Mahalanobis norm `xᵀ A⁻¹ x` given the Cholesky factor of `A`.
pub fn mahalanobis_sq(l: &[f64], d: usize, x: &[f64]) -> f64 {
    // forward substitution L y = x, result is |y|²
    let mut y = [0.0f64; 3];
    let mut acc = 0.0;
    for i in 0..d {
        let mut s = x[i];
        for k in 0..i {
            s -= l[i * d + k] * y[k];
        }
        y[i] = s / l[i * d + i];
        acc += y[i] * y[i];
    }
    acc
}

/// `y = L x` for a lower-triangular `L`.
pub fn lower_mul(l: &[f64], d: usize, x: &[f64], out: &mut [f64]) {
    for i in 0..d {
        out[i] = (0..=i).map(|k| l[i * d + k] * x[k]).sum();
    }
}

/// Solves `L y = x` for lower-triangular `L`.
pub fn lower_solve(l: &[f64], d: usize, x: &[f64], out: &mut [f64]) {
    for i in 0..d {
        let mut s = x[i];
        for k in 0..i {
            s -= l[i * d + k] * out[k];
        }
        out[i] = s / l[i * d + i];
    }
}

pub fn is_symmetric(a: &[f64], d: usize) -> bool {
    (0..d).all(|i| (0..i).all(|j| a[i * d + j] == a[j * d + i]))
}

pub fn trace(a: &[f64], d: usize) -> f64 {
    (0..d).map(|i| a[i * d + i]).sum()
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors stored as columns.
pub fn symmetric_eigen(a: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    for _sweep in 0..64 {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * d + j] * m[i * d + j])
            .sum();
        if off == 0.0 {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = m[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * d + q] - m[p * d + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let mkp = m[k * d + p];
                    let mkq = m[k * d + q];
                    m[k * d + p] = c * mkp - s * mkq;
                    m[k * d + q] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let mpk = m[p * d + k];
                    let mqk = m[q * d + k];
                    m[p * d + k] = c * mpk - s * mqk;
                    m[q * d + k] = s * mpk + c * mqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..d).map(|i| m[i * d + i]).collect(), v)
}

/// Raises every eigenvalue of `a` below `floor` to `floor`, in place.
///
/// Returns whether anything was clamped. The result is exactly symmetric.
pub fn clamp_eigenvalues(a: &mut [f64], d: usize, floor: f64) -> bool {
    if d == 1 {
        if a[0] < floor || !a[0].is_finite() {
            a[0] = floor;
            return true;
        }
        return false;
    }
    let (vals, vecs) = symmetric_eigen(a, d);
    if vals.iter().all(|&l| l >= floor) {
        return false;
    }
    let vals: Vec<f64> = vals.iter().map(|&l| l.max(floor)).collect();
    for i in 0..d {
        for j in i..d {
            let s: f64 = (0..d).map(|k| vecs[i * d + k] * vals[k] * vecs[j * d + k]).sum();
            a[i * d + j] = s;
            a[j * d + i] = s;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_reconstructs() {
        let a = [4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0];
        let l = cholesky(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
                assert!((s - a[i * 3 + j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2).is_err());
        assert!(cholesky(&[0.0], 1).is_err());
        assert!(cholesky(&[f64::NAN], 1).is_err());
    }

    #[test]
    fn eigen_of_diagonalizable() {
        let a = [2.0, 1.0, 1.0, 2.0];
        let (mut vals, _) = symmetric_eigen(&a, 2);
        vals.sort_by(f64::total_cmp);
        assert!((vals[0] - 1.0).abs() < 1e-14);
        assert!((vals[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn clamp_raises_small_eigenvalue_only() {
        let mut a = [1.0, 1.0, 1.0, 1.0];
        assert!(clamp_eigenvalues(&mut a, 2, 1e-3));
        let (mut vals, _) = symmetric_eigen(&a, 2);
        vals.sort_by(f64::total_cmp);
        assert!((vals[0] - 1e-3).abs() < 1e-12);
        assert!((vals[1] - 2.0).abs() < 1e-12);
        let mut b = [2.0, 0.0, 0.0, 3.0];
        assert!(!clamp_eigenvalues(&mut b, 2, 1e-3));
    }

    #[test]
    fn mahalanobis_matches_inverse() {
        let a = [2.0, 0.5, 0.5, 1.0];
        let l = cholesky(&a, 2).unwrap();
        let x = [1.0, -2.0];
        let det = 2.0 * 1.0 - 0.25;
        let inv = [1.0 / det, -0.5 / det, -0.5 / det, 2.0 / det];
        let direct = x[0] * (inv[0] * x[0] + inv[1] * x[1]) + x[1] * (inv[2] * x[0] + inv[3] * x[1]);
        assert!((mahalanobis_sq(&l, 2, &x) - direct).abs() < 1e-14);
        assert!((log_det_from_cholesky(&l, 2) - det.ln()).abs() < 1e-14);
    }
}
