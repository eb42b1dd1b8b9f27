//! Dense symmetric eigendecomposition by cyclic Jacobi rotations.
//!
//! Pool sizes are on the order of a hundred trees, so a dense O(n^3)
//! solver is the right tool; no sparse or iterative machinery.

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 64;

/// Full eigendecomposition of a symmetric matrix given as rows.
///
/// Returns eigenvalues in ascending order and, parallel to them, the
/// orthonormal eigenvectors (each a length-n vector).
pub fn eigensolve_symmetric(matrix: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = matrix.len();
    if n == 0 {
        return Err(Error::BadParam("eigensolve of an empty matrix".into()));
    }
    let mut scale = 0.0f64;
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != n {
            return Err(Error::BadParam("eigensolve input is not square".into()));
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::BadParam(
                    "eigensolve input has non-finite entries".into(),
                ));
            }
            let asym = (v - matrix[j][i]).abs();
            if asym > SYMMETRY_TOL {
                return Err(Error::Asymmetric(asym));
            }
            scale = scale.max(v.abs());
        }
    }

    // Work on a symmetrized copy so the tiny asymmetries allowed above
    // cannot accumulate.
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (matrix[i][j] + matrix[j][i])).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();

    let stop = 1e-14 * scale.max(1.0) * (n * n) as f64;
    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p][q].abs();
            }
        }
        if off <= stop {
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq.abs() <= f64::EPSILON * scale.max(1.0) {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = {
                    let t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Columns p and q of A.
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                // Rows p and q of A.
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                // Accumulate the rotation into V (columns p and q).
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]).then(i.cmp(&j)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i][i]).collect();
    let eigenvectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row][col]).collect())
        .collect();
    Ok((eigenvalues, eigenvectors))
}
