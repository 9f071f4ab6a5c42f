//! Small dense linear-algebra and summation helpers.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending, vectors as columns.
pub fn hermitian_eigen(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let n = m.nrows();
    if m.iter().all(|z| z.im == 0.0) {
        let re = m.map(|z| z.re);
        let eig = SymmetricEigen::new(re);
        let order = ascending(eig.eigenvalues.as_slice());
        let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = DMatrix::from_fn(n, n, |r, c| Complex64::new(eig.eigenvectors[(r, order[c])], 0.0));
        return (vals, vecs);
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);
    let order = ascending(eig.eigenvalues.as_slice());
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    if m.iter().all(|z| z.im == 0.0) {
        let mut v: Vec<f64> = SymmetricEigen::new(m.map(|z| z.re)).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        return v;
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let mut v: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Spectral norm of a Hermitian matrix.
pub fn hermitian_norm(m: &DMatrix<Complex64>) -> f64 {
    let e = hermitian_eigenvalues(m);
    match (e.first(), e.last()) {
        (Some(a), Some(b)) => a.abs().max(b.abs()),
        _ => 0.0,
    }
}

fn ascending(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    idx
}

/// Neumaier compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = KahanSum::default();
    for x in xs {
        s.add(x);
    }
    s.value()
}

/// Chebyshev polynomial of the first kind by the three-term recurrence.
pub fn chebyshev_recurrence(n: usize, z: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => z,
        _ => {
            let (mut a, mut b) = (1.0, z);
            for _ in 1..n {
                let c = 2.0 * z * b - a;
                a = b;
                b = c;
            }
            b
        }
    }
}

/// `T_n(z)`, using `cos(n acos z)` inside [-1, 1] and `cosh(n acosh |z|)` outside.
pub fn chebyshev_t(n: usize, z: f64) -> f64 {
    if z.abs() <= 1.0 {
        return (n as f64 * z.acos()).cos();
    }
    let v = (n as f64 * z.abs().acosh()).cosh();
    if z < 0.0 && n % 2 == 1 {
        -v
    } else {
        v
    }
}

/// Real vector 2-norm of complex entries.
pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}
