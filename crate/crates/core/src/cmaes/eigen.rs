//! Cyclic Jacobi eigendecomposition for small symmetric matrices.
//!
//! Matrices are dense row-major `n*n` slices.

use super::CmaError;

const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_TOL: f64 = 1e-12;
const NEGATIVE_TOL: f64 = -1e-12;
/// Eigenvalues below this fraction of the largest one are raised to it.
pub(crate) const EIGEN_FLOOR: f64 = 1e-14;

/// `C = B * diag(D^2) * B^T` with `D` sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigen {
    /// Orthogonal, eigenvectors in columns, row-major.
    pub basis: Vec<f64>,
    /// Square roots of the eigenvalues.
    pub scale: Vec<f64>,
    /// Whether any eigenvalue was raised to the numerical floor.
    pub floored: bool,
}

/// Raw Jacobi eigenpairs, eigenvalues descending and unfloored.
pub fn symmetric_eigen(c: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>), CmaError> {
    assert_eq!(c.len(), n * n, "matrix must be n*n");
    let mut a = c.to_vec();
    let mut v = identity(n);

    let total: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= OFF_DIAGONAL_TOL * total {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let cos = 1.0 / (t * t + 1.0).sqrt();
                let sin = t * cos;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = cos * akp - sin * akq;
                    a[k * n + q] = sin * akp + cos * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = cos * apk - sin * aqk;
                    a[q * n + k] = sin * apk + cos * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = cos * vkp - sin * vkq;
                    v[k * n + q] = sin * vkp + cos * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(CmaError::EigenNonConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut basis = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            basis[row * n + col] = v[row * n + src];
        }
    }
    Ok((values, basis))
}

/// Decomposes a symmetric positive (semi)definite matrix.
///
/// Eigenvalues below `1e-14 * max` are floored; anything below `-1e-12`
/// is reported as loss of positive definiteness.
pub fn eigendecompose(c: &[f64], n: usize) -> Result<Eigen, CmaError> {
    let (mut values, basis) = symmetric_eigen(c, n)?;
    if let Some(&worst) = values.iter().find(|&&v| v < NEGATIVE_TOL) {
        return Err(CmaError::NotPositiveDefinite { eigenvalue: worst });
    }
    let max = values.first().copied().unwrap_or(0.0);
    if !(max > 0.0) || !max.is_finite() {
        return Err(CmaError::NotPositiveDefinite { eigenvalue: max });
    }
    let floor = EIGEN_FLOOR * max;
    let mut floored = false;
    for v in &mut values {
        if *v < floor {
            *v = floor;
            floored = true;
        }
    }
    Ok(Eigen {
        basis,
        scale: values.iter().map(|v| v.sqrt()).collect(),
        floored,
    })
}

pub(crate) fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

/// `B * diag(D^2) * B^T`, exactly symmetric.
pub fn reconstruct(basis: &[f64], scale: &[f64]) -> Vec<f64> {
    let n = scale.len();
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let s: f64 = (0..n)
                .map(|k| basis[i * n + k] * scale[k] * scale[k] * basis[j * n + k])
                .sum();
            c[i * n + j] = s;
            c[j * n + i] = s;
        }
    }
    c
}

/// Largest absolute elementwise difference.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
