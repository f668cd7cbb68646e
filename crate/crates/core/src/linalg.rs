//! Small dense linear-algebra helpers shared by the kernel and filter code.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest absolute difference between `m` and its transpose.
pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Replaces `m` with `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub fn ensure_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("{what} contains non-finite entries")))
    }
}

pub fn ensure_square(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Inverse of a symmetric matrix, through Cholesky when it is positive
/// definite and LU otherwise. The result is symmetrized.
pub fn sym_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut inv = match m.clone().cholesky() {
        Some(chol) => chol.inverse(),
        None => m
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numeric("matrix is singular".into()))?,
    };
    symmetrize(&mut inv);
    ensure_finite(&inv, "inverse")?;
    Ok(inv)
}

/// Solves `a · x = b` for a general square `a`.
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "system has {} rows but right-hand side has {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Numeric("linear system is singular".into()))?;
    ensure_finite(&x, "solution")?;
    Ok(x)
}

/// Moore–Penrose pseudo-inverse with singular values below
/// `rel_tol · σ_max` treated as zero.
pub fn pinv(m: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(DMatrix::zeros(m.ncols(), m.nrows()));
    }
    let svd = m.clone().svd(true, true);
    let u = svd
        .u
        .as_ref()
        .ok_or_else(|| Error::Numeric("SVD did not produce U".into()))?;
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::Numeric("SVD did not produce Vᵀ".into()))?;
    let s_max = svd.singular_values.max();
    let cutoff = rel_tol * s_max;
    // V Σ⁺ Uᵀ: scale the rows of Vᵀ, then contract.
    let mut scaled = v_t.clone();
    for (r, &s) in svd.singular_values.iter().enumerate() {
        let inv = if s > cutoff { 1.0 / s } else { 0.0 };
        scaled.row_mut(r).scale_mut(inv);
    }
    let out = scaled.transpose() * u.transpose();
    ensure_finite(&out, "pseudo-inverse")?;
    Ok(out)
}

/// `U · diag(values) · Uᵀ`.
pub fn spectral_compose(vectors: &DMatrix<f64>, values: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = vectors.clone();
    for (c, &v) in values.iter().enumerate() {
        scaled.column_mut(c).scale_mut(v);
    }
    let mut out = scaled * vectors.transpose();
    symmetrize(&mut out);
    out
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

/// Horizontal concatenation `[a, b]`.
pub fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows(), "hstack row mismatch");
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}
