//! Physicists' Hermite polynomials and their roots.

use nalgebra::{DMatrix, SymmetricEigen};

/// `H_n(u)` by `H_{n+1} = 2u H_n − 2n H_{n−1}`.
pub fn hermite(n: usize, u: f64) -> f64 {
    let (mut a, mut b) = (1.0, 2.0 * u);
    if n == 0 {
        return a;
    }
    for m in 1..n {
        let c = 2.0 * u * b - 2.0 * m as f64 * a;
        a = b;
        b = c;
    }
    b
}

/// Roots of `H_n`, ascending, from the eigenvalues of the symmetric Jacobi matrix.
pub fn hermite_roots(n: usize) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let mut j = DMatrix::zeros(n, n);
    for i in 1..n {
        let off = (i as f64 / 2.0).sqrt();
        j[(i, i - 1)] = off;
        j[(i - 1, i)] = off;
    }
    let mut roots: Vec<f64> = SymmetricEigen::new(j).eigenvalues.iter().copied().collect();
    roots.sort_by(f64::total_cmp);
    // a couple of Newton steps on the polynomial itself
    for r in &mut roots {
        for _ in 0..2 {
            let p = hermite(n, *r);
            let dp = 2.0 * n as f64 * hermite(n - 1, *r);
            if dp != 0.0 {
                *r -= p / dp;
            }
        }
    }
    roots
}

pub fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_orders() {
        for u in [-1.3, 0.0, 0.4, 2.0] {
            assert_eq!(hermite(0, u), 1.0);
            assert_eq!(hermite(1, u), 2.0 * u);
            assert!((hermite(2, u) - (4.0 * u * u - 2.0)).abs() < 1e-12);
            assert!((hermite(3, u) - (8.0 * u.powi(3) - 12.0 * u)).abs() < 1e-12);
        }
    }

    #[test]
    fn generating_function() {
        let (u, t) = (0.3f64, 0.2f64);
        let mut sum = 0.0;
        let mut fact = 1.0;
        for n in 0..=30 {
            if n > 0 {
                fact *= n as f64;
            }
            sum += hermite(n, u) * t.powi(n as i32) / fact;
        }
        let exact = (2.0 * u * t - t * t).exp();
        assert!(((sum - exact) / exact).abs() <= 1e-12);
    }

    #[test]
    fn roots_vanish() {
        for n in 1..=30 {
            let r = hermite_roots(n);
            assert_eq!(r.len(), n);
            for &x in &r {
                let scale = (2.0 * n as f64).sqrt().powi(n as i32).max(1.0);
                assert!(hermite(n, x).abs() / scale < 1e-8, "n={n} x={x}");
            }
            for w in r.windows(2) {
                assert!(w[0] < w[1]);
            }
        }
    }
}
