//! Dense helpers for the small (k <= a handful) covariance matrices.

pub(crate) type Matrix = Vec<Vec<f64>>;

/// `A diag(d) Aᵀ`.
pub(crate) fn sandwich(a: &Matrix, d: &[f64]) -> Matrix {
    let rows = a.len();
    let mut out = vec![vec![0.0; rows]; rows];
    for i in 0..rows {
        for j in 0..=i {
            let v: f64 = (0..d.len()).map(|c| a[i][c] * d[c] * a[j][c]).sum();
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
///
/// Returns `None` when a pivot falls below `1e-12 · max |A_ij|`.
pub(crate) fn solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if n == 0 || scale == 0.0 {
        return None;
    }
    let threshold = 1e-12 * scale;
    let mut m: Matrix = a.iter().zip(b).map(|(row, &bi)| {
        let mut r = row.clone();
        r.push(bi);
        r
    }).collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() <= threshold {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            if factor != 0.0 {
                for c in col..=n {
                    m[row][c] -= factor * m[col][c];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|c| m[row][c] * x[c]).sum();
        x[row] = (m[row][n] - tail) / m[row][row];
    }
    Some(x)
}

/// `xᵀ A⁻¹ x`.
pub(crate) fn inverse_quadratic_form(a: &Matrix, x: &[f64]) -> Option<f64> {
    let y = solve(a, x)?;
    Some(x.iter().zip(&y).map(|(p, q)| p * q).sum())
}
