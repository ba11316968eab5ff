//! Dense decompositions backed by faer.

use faer::Mat;

use crate::error::{Error, Result};
use crate::C64;

pub(crate) struct Svd {
    pub u: Mat<C64>,
    /// Descending, length `min(rows, cols)`.
    pub sigma: Vec<f64>,
    pub v: Mat<C64>,
}

pub(crate) fn thin_svd(a: &Mat<C64>) -> Result<Svd> {
    let svd = a.thin_svd().map_err(|e| Error::Linalg(format!("svd did not converge: {e:?}")))?;
    let sigma = svd.S().column_vector().iter().map(|s| s.re).collect();
    Ok(Svd { u: svd.U().to_owned(), sigma, v: svd.V().to_owned() })
}

/// Singular values (length `cols`) and the full right singular basis.
/// Short matrices are padded with zero rows so that every column of `V`
/// is returned, the extra ones with zero singular value.
pub(crate) fn right_singular(a: &Mat<C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let (m, n) = (a.nrows(), a.ncols());
    let svd = if m >= n {
        thin_svd(a)?
    } else {
        let padded = Mat::from_fn(n, n, |i, j| if i < m { a[(i, j)] } else { C64::new(0.0, 0.0) });
        thin_svd(&padded)?
    };
    Ok((svd.sigma, svd.v))
}

/// Best rank-`rank` approximation and the Frobenius norm of what was removed.
pub(crate) fn truncate(a: &Mat<C64>, rank: usize) -> Result<(Mat<C64>, f64)> {
    let svd = thin_svd(a)?;
    let r = rank.min(svd.sigma.len());
    let tail = svd.sigma[r..].iter().map(|s| s * s).sum::<f64>().sqrt();
    let mut out = Mat::<C64>::zeros(a.nrows(), a.ncols());
    for k in 0..r {
        let s = svd.sigma[k];
        if s == 0.0 {
            continue;
        }
        for j in 0..a.ncols() {
            let vj = svd.v[(j, k)].conj() * s;
            for i in 0..a.nrows() {
                out[(i, j)] += svd.u[(i, k)] * vj;
            }
        }
    }
    Ok((out, tail))
}

/// Frobenius distance from `a` to the nearest rank-`rank` matrix.
pub(crate) fn rank_tail(a: &Mat<C64>, rank: usize) -> Result<f64> {
    let svd = thin_svd(a)?;
    let r = rank.min(svd.sigma.len());
    Ok(svd.sigma[r..].iter().map(|s| s * s).sum::<f64>().sqrt())
}

/// Minimum-norm least-squares solution of `a x = b` via the SVD, together
/// with the numerical rank used.
pub(crate) fn min_norm_solve(a: &Mat<C64>, b: &[C64]) -> Result<(Vec<C64>, usize)> {
    let (m, n) = (a.nrows(), a.ncols());
    if n == 0 {
        return Ok((Vec::new(), 0));
    }
    let svd = if m >= n {
        thin_svd(a)?
    } else {
        // short system: solve through the conjugate transpose
        thin_svd(&a.adjoint().to_owned()).map(|s| Svd { u: s.v, sigma: s.sigma, v: s.u })?
    };
    let s1 = svd.sigma.first().copied().unwrap_or(0.0);
    let tol = s1 * (m.max(n) as f64) * f64::EPSILON;
    let mut x = vec![C64::new(0.0, 0.0); n];
    let mut rank = 0;
    for (k, &s) in svd.sigma.iter().enumerate() {
        if s <= tol || s == 0.0 {
            continue;
        }
        rank += 1;
        let mut proj = C64::new(0.0, 0.0);
        for i in 0..m {
            proj += svd.u[(i, k)].conj() * b[i];
        }
        let coef = proj / s;
        for (j, xj) in x.iter_mut().enumerate() {
            *xj += svd.v[(j, k)] * coef;
        }
    }
    Ok((x, rank))
}
