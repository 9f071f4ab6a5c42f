//! Generalised eigenvalue solvers for Krylov pencils: exact, regularised and
//! thresholded, plus the shifted bound functional `min_a E'(η, a)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::bases::KrylovMatrices;
use crate::error::{Error, Result};
use crate::linalg::hermitian_eigen;

/// Relative eigenvalue floor applied to the (shifted) overlap matrix.
pub const RELATIVE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Exact,
    Regularised,
    Thresholded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub e_min: f64,
    /// Unit-norm minimiser in the original basis.
    pub coefficients: DVector<Complex64>,
    pub eta: f64,
    pub method: Method,
    /// Number of overlap eigendirections kept.
    pub retained: usize,
    /// True when some direction fell below the floor or threshold.
    pub floor_triggered: bool,
}

/// Minimum eigenpair of `h a = E s a` restricted to eigendirections of `s`
/// whose eigenvalue satisfies `keep(λ, λ_max)`.
fn reduce(
    h: &DMatrix<Complex64>,
    s: &DMatrix<Complex64>,
    keep: impl Fn(f64, f64) -> bool,
) -> Result<(f64, DVector<Complex64>, usize, bool)> {
    let d = s.nrows();
    if d == 0 || h.nrows() != d || h.ncols() != d || s.ncols() != d {
        return Err(Error::InvalidArgument("pencil matrices must be square and equal size".into()));
    }
    if h.iter().chain(s.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("non-finite matrix entry".into()));
    }
    let (lam, v) = hermitian_eigen(s);
    let lam_max = lam[d - 1];
    let kept: Vec<usize> = (0..d).filter(|&i| lam_max > 0.0 && keep(lam[i], lam_max)).collect();
    if kept.is_empty() {
        return Err(Error::NoRetainedDirections { max_eigenvalue: lam_max });
    }
    let r = kept.len();
    let x = DMatrix::from_fn(d, r, |row, c| v[(row, kept[c])] / lam[kept[c]].sqrt());
    let reduced = x.adjoint() * h * &x;
    let (mu, y) = hermitian_eigen(&reduced);
    let mut a = &x * y.column(0);
    let n = a.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Numerical("degenerate minimiser".into()));
    }
    a /= Complex64::new(n, 0.0);
    Ok((mu[0], a, r, r < d))
}

fn shifted(m: &DMatrix<Complex64>, shift: f64) -> DMatrix<Complex64> {
    let mut out = m.clone();
    for i in 0..out.nrows() {
        out[(i, i)] += Complex64::new(shift, 0.0);
    }
    out
}

/// Minimum eigenvalue of `(h + c_h η) a = E (s + c_s η) a`.
pub fn solve_pencil(
    h: &DMatrix<Complex64>,
    s: &DMatrix<Complex64>,
    c_h: f64,
    c_s: f64,
    eta: f64,
) -> Result<Solution> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidArgument(format!("η = {eta} must be a non-negative number")));
    }
    let (e_min, a, retained, floor_triggered) =
        reduce(&shifted(h, c_h * eta), &shifted(s, c_s * eta), |l, lmax| l > RELATIVE_FLOOR * lmax)?;
    let method = if eta == 0.0 { Method::Exact } else { Method::Regularised };
    Ok(Solution { e_min, coefficients: a, eta, method, retained, floor_triggered })
}

/// Noiseless solve with only the relative floor applied.
pub fn solve_exact(km: &KrylovMatrices) -> Result<Solution> {
    solve_pencil(&km.h, &km.s, km.c_h, km.c_s, 0.0)
}

pub fn solve_regularised(km: &KrylovMatrices, eta: f64) -> Result<Solution> {
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!("η = {eta} must be positive")));
    }
    solve_pencil(&km.h, &km.s, km.c_h, km.c_s, eta)
}

/// Discards overlap eigendirections below `threshold`, no diagonal shift.
pub fn solve_thresholded_pencil(
    h: &DMatrix<Complex64>,
    s: &DMatrix<Complex64>,
    threshold: f64,
) -> Result<Solution> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} must be positive")));
    }
    let (e_min, a, retained, floor_triggered) = reduce(h, s, |l, _| l >= threshold)?;
    Ok(Solution { e_min, coefficients: a, eta: 0.0, method: Method::Thresholded, retained, floor_triggered })
}

pub fn solve_thresholded(km: &KrylovMatrices, threshold: f64) -> Result<Solution> {
    solve_thresholded_pencil(&km.h, &km.s, threshold)
}

/// `min_a (a†(H + 2C_H η)a) / (a†(S + 2C_S η)a)`.
pub fn min_e_prime(km: &KrylovMatrices, eta: f64) -> Result<f64> {
    Ok(solve_pencil(&km.h, &km.s, km.c_h, km.c_s, 2.0 * eta)?.e_min)
}

/// `(a†Ha, a†Sa)` for a coefficient vector.
pub fn quadratic_forms(km: &KrylovMatrices, a: &DVector<Complex64>) -> (f64, f64) {
    let ha = a.dotc(&(&km.h * a)).re;
    let sa = a.dotc(&(&km.s * a)).re;
    (ha, sa)
}
