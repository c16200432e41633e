//! Small complex linear-algebra toolkit on top of nalgebra.
//!
//! Everything here works on dense `DMatrix<Complex64>`; the problem sizes
//! are tiny (at most a few dozen rows) so clarity wins over blocking.

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Condition number above which Hermitian solves get ridge regularization.
pub const COND_LIMIT: f64 = 1e12;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

/// Hermitian part `(M + M^H)/2`.
pub fn herm(m: &CMat) -> CMat {
    (m + m.adjoint()) * c64(0.5, 0.0)
}

/// Squared Frobenius norm.
pub fn frob2(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn frob(m: &CMat) -> f64 {
    frob2(m).sqrt()
}

pub fn trace(m: &CMat) -> C64 {
    m.trace()
}

/// `Re tr(A^H B)`, the real inner product used by every gradient identity.
pub fn re_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Column-major vectorisation.
pub fn vec_of(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

pub fn unvec(v: &CVec, rows: usize, cols: usize) -> CMat {
    CMat::from_column_slice(rows, cols, v.as_slice())
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn herm_eigvals(m: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = herm(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

pub fn min_eig(m: &CMat) -> f64 {
    herm_eigvals(m).first().copied().unwrap_or(0.0)
}

fn chol_diag_ratio(l: &CMat) -> f64 {
    let d: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)].re.abs()).collect();
    let mx = d.iter().cloned().fold(0.0, f64::max);
    let mn = d.iter().cloned().fold(f64::INFINITY, f64::min);
    if mn <= 0.0 {
        f64::INFINITY
    } else {
        (mx / mn).powi(2)
    }
}

fn ridge(m: &CMat) -> CMat {
    let n = m.nrows().max(1) as f64;
    let eps = 1e-12 * (m.trace().re.abs() / n).max(f64::MIN_POSITIVE);
    m + CMat::identity(m.nrows(), m.ncols()) * c64(eps, 0.0)
}

/// Inverse of a Hermitian positive-definite matrix.
///
/// Uses a Cholesky factorisation; when it fails or the matrix is worse
/// conditioned than [`COND_LIMIT`], a ridge of `1e-12 * tr/n` is added.
pub fn herm_inv(m: &CMat) -> Result<CMat> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!("herm_inv on {}x{}", m.nrows(), m.ncols())));
    }
    if m.nrows() == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    let h = herm(m);
    if let Some(ch) = h.clone().cholesky() {
        let ratio = chol_diag_ratio(&ch.l());
        if ratio <= COND_LIMIT {
            return Ok(herm(&ch.inverse()));
        }
        warn!("ill-conditioned Hermitian inverse (estimate {ratio:.3e}); regularizing");
    } else {
        warn!("Cholesky failed in Hermitian inverse; regularizing");
    }
    let r = ridge(&h);
    r.cholesky()
        .map(|ch| herm(&ch.inverse()))
        .ok_or_else(|| Error::Numerical("matrix not positive definite after regularization".into()))
}

/// Natural log-determinant of a Hermitian positive-definite matrix.
pub fn logdet_herm(m: &CMat) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let h = herm(m);
    if let Some(ch) = h.clone().cholesky() {
        let l = ch.l();
        return Ok((0..l.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum());
    }
    let ev = herm_eigvals(&h);
    if ev.iter().any(|&e| e <= 0.0) {
        return Err(Error::Numerical(format!(
            "log-determinant of a non-positive-definite matrix (min eigenvalue {:.3e})",
            ev[0]
        )));
    }
    Ok(ev.iter().map(|e| e.ln()).sum())
}

pub fn log2det_herm(m: &CMat) -> Result<f64> {
    Ok(logdet_herm(m)? / std::f64::consts::LN_2)
}

/// Dense LU solve `A x = b`.
pub fn solve(a: &CMat, b: &CVec) -> Result<CVec> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Numerical("singular linear system".into()))
}

pub fn solve_mat(a: &CMat, b: &CMat) -> Result<CMat> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Numerical("singular linear system".into()))
}

/// Draw a matrix with i.i.d. `CN(mean, var)` entries.
pub fn cn_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, mean: C64, var: f64) -> CMat {
    let s = (var / 2.0).sqrt();
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        mean + c64(s * re, s * im)
    })
}

pub fn cn_vector<R: Rng + ?Sized>(rng: &mut R, n: usize, var: f64) -> CVec {
    let s = (var / 2.0).sqrt();
    CVec::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(s * re, s * im)
    })
}

pub fn cn_scalar<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(s * re, s * im)
}

/// Orthonormal basis of the column space of a tall matrix (thin QR).
pub fn orthonormalize(m: &CMat) -> CMat {
    m.clone().qr().q()
}

/// Right singular vectors (columns of `V`) sorted by decreasing singular value.
pub fn right_singular_vectors(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.ncols();
    // Eigen-decomposition of the Gram matrix keeps the full n x n basis
    // even when the matrix is wide or rank deficient.
    let gram = herm(&(m.adjoint() * m));
    let eig = gram.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let sv = idx.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
    let v = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
    (sv, v)
}

/// Orthonormal basis (as rows of the returned matrix) of the row space of `m`.
///
/// Singular values below `rel_tol * s_max` are treated as zero.
pub fn row_space_basis(m: &CMat, rel_tol: f64) -> CMat {
    let (sv, v) = right_singular_vectors(m);
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax <= 0.0 {
        return CMat::zeros(0, m.ncols());
    }
    let r = sv.iter().filter(|&&s| s > rel_tol * smax).count();
    v.columns(0, r).adjoint()
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}
