//! Small dense helpers on top of nalgebra.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

pub fn zeros(r: usize, c: usize) -> Mat {
    Mat::zeros(r, c)
}

pub fn eye(n: usize) -> Mat {
    Mat::identity(n, n)
}

/// Builds a matrix from row-major nested rows. `cols` fixes the width when
/// there are no rows.
pub fn from_rows(rows: &[Vec<f64>], cols: Option<usize>) -> Result<Mat> {
    if rows.is_empty() {
        return Ok(zeros(0, cols.unwrap_or(0)));
    }
    let c = rows[0].len();
    if rows.iter().any(|r| r.len() != c) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    if let Some(expected) = cols {
        if expected != c {
            return Err(Error::Dimension(format!("expected {expected} columns, found {c}")));
        }
    }
    Ok(Mat::from_fn(rows.len(), c, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn hstack(parts: &[&Mat]) -> Result<Mat> {
    let rows = parts.first().map(|m| m.nrows()).unwrap_or(0);
    if parts.iter().any(|m| m.nrows() != rows) {
        return Err(Error::Dimension("hstack row mismatch".into()));
    }
    let cols = parts.iter().map(|m| m.ncols()).sum();
    let mut out = zeros(rows, cols);
    let mut c0 = 0;
    for m in parts {
        out.view_mut((0, c0), (rows, m.ncols())).copy_from(*m);
        c0 += m.ncols();
    }
    Ok(out)
}

pub fn vstack(parts: &[&Mat]) -> Result<Mat> {
    let cols = parts.first().map(|m| m.ncols()).unwrap_or(0);
    if parts.iter().any(|m| m.ncols() != cols) {
        return Err(Error::Dimension("vstack column mismatch".into()));
    }
    let rows = parts.iter().map(|m| m.nrows()).sum();
    let mut out = zeros(rows, cols);
    let mut r0 = 0;
    for m in parts {
        out.view_mut((r0, 0), (m.nrows(), cols)).copy_from(*m);
        r0 += m.nrows();
    }
    Ok(out)
}

pub fn block_diag(parts: &[&Mat]) -> Mat {
    let rows = parts.iter().map(|m| m.nrows()).sum();
    let cols = parts.iter().map(|m| m.ncols()).sum();
    let mut out = zeros(rows, cols);
    let (mut r0, mut c0) = (0, 0);
    for m in parts {
        out.view_mut((r0, c0), (m.nrows(), m.ncols())).copy_from(*m);
        r0 += m.nrows();
        c0 += m.ncols();
    }
    out
}

/// `I_k ⊗ m`.
pub fn kron_eye(k: usize, m: &Mat) -> Mat {
    let parts: Vec<&Mat> = std::iter::repeat_n(m, k).collect();
    block_diag(&parts)
}

pub fn mat_pow(m: &Mat, k: usize) -> Mat {
    let mut out = eye(m.nrows());
    for _ in 0..k {
        out = &out * m;
    }
    out
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Largest absolute entry, 0 for empty matrices.
pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Checks symmetry to `rel` relative tolerance and returns the averaged
/// matrix.
pub fn ingest_symmetric(m: &Mat, rel: f64, what: &str) -> Result<Mat> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!("{what} must be square, got {}x{}", m.nrows(), m.ncols())));
    }
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    let asym = max_abs(&(m - m.transpose()));
    if asym > rel * scale {
        return Err(Error::NotSymmetric(format!("{what} (asymmetry {asym:.3e})")));
    }
    Ok(symmetrize(m))
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = symmetrize(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn min_eig(m: &Mat) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}

pub fn max_eig(m: &Mat) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(f64::NEG_INFINITY)
}

pub fn spectral_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn spectral_radius(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// 2-norm condition number; infinite for singular matrices.
pub fn condition_number(m: &Mat) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.singular_values();
    let lo = sv.min();
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        sv.max() / lo
    }
}

/// Packs a symmetric matrix as its lower triangle in row-major order with
/// off-diagonal entries scaled by sqrt(2). The order coincides with the
/// upper triangle in column-major order used by PSD triangle cones.
pub fn svec(m: &Mat) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in 0..=i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out.push(if i == j { v } else { v * std::f64::consts::SQRT_2 });
        }
    }
    out
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64], n: usize) -> Mat {
    let mut m = zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in 0..=i {
            let x = if i == j { v[k] } else { v[k] / std::f64::consts::SQRT_2 };
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

/// Solves `K * M = Z` for K without forming an explicit inverse.
pub fn right_divide(z: &Mat, m: &Mat) -> Option<Mat> {
    let lu = m.transpose().lu();
    lu.solve(&z.transpose()).map(|k| k.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_roundtrip_and_inner_product() {
        let a = Mat::from_row_slice(3, 3, &[2.0, 1.0, -1.0, 1.0, 3.0, 0.5, -1.0, 0.5, 4.0]);
        let b = Mat::from_row_slice(3, 3, &[1.0, -2.0, 0.0, -2.0, 1.0, 1.0, 0.0, 1.0, 5.0]);
        assert!((smat(&svec(&a), 3) - &a).amax() < 1e-15);
        let ip: f64 = svec(&a).iter().zip(svec(&b)).map(|(x, y)| x * y).sum();
        assert!((ip - a.component_mul(&b).sum()).abs() < 1e-12);
    }

    #[test]
    fn kron_and_power() {
        let q = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let k = kron_eye(2, &q);
        assert_eq!(k.nrows(), 4);
        assert_eq!(k[(2, 3)], 2.0);
        assert_eq!(k[(0, 2)], 0.0);
        let a = Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 1.0]);
        assert_eq!(mat_pow(&a, 2), Mat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0]));
    }

    #[test]
    fn right_division() {
        let z = Mat::from_row_slice(1, 1, &[2.0]);
        let g = Mat::from_row_slice(1, 1, &[4.0]);
        assert_eq!(right_divide(&z, &g).unwrap()[(0, 0)], 0.5);
    }

    #[test]
    fn symmetric_ingest() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0 + 1e-12, 1.0]);
        assert!(ingest_symmetric(&m, 1e-10, "m").is_ok());
        let bad = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.1, 1.0]);
        assert!(ingest_symmetric(&bad, 1e-10, "m").is_err());
    }
}
