//! The seven Krylov basis families, their parameter selection, and exact
//! Krylov matrices built from a spectral decomposition.
//!
//! Every family is a scalar function `f_k(x)` of the shifted energy
//! `x = E − E_0`, so `H_kq = Σ_m w_m f_k(x_m)* E_m f_q(x_m)` and
//! `S_kq = Σ_m w_m f_k(x_m)* f_q(x_m)`.

use std::f64::consts::{E, PI, SQRT_2};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::SpectralDecomposition;
use crate::linalg::chebyshev_t;
use crate::mc_lcu::cost_c_ln;
use crate::quadrature::{integrate, Tolerance};
use crate::solver::solve_exact;
use crate::special::{hermite, hermite_roots};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    P,
    CP,
    GP,
    IP,
    ITE,
    RTE,
    F,
}

impl Family {
    pub const ALL: [Family; 7] = [Family::P, Family::CP, Family::GP, Family::IP, Family::ITE, Family::RTE, Family::F];

    pub fn name(self) -> &'static str {
        match self {
            Family::P => "P",
            Family::CP => "CP",
            Family::GP => "GP",
            Family::IP => "IP",
            Family::ITE => "ITE",
            Family::RTE => "RTE",
            Family::F => "F",
        }
    }

    pub fn structure(self) -> Structure {
        match self {
            Family::P | Family::GP | Family::IP | Family::ITE => Structure::RealHankel,
            Family::CP | Family::F => Structure::RealSymmetric,
            Family::RTE => Structure::HermitianToeplitz,
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown basis family '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    RealHankel,
    RealSymmetric,
    HermitianToeplitz,
    Dense,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub family: Family,
    pub d: usize,
    pub e0: f64,
    pub tau: Option<f64>,
    pub delta_t: Option<f64>,
    pub delta_e: Option<f64>,
    /// 1-norm of the Hamiltonian's Pauli coefficients.
    pub h_tot: f64,
    /// Per-function divisor; the GP cost integrals `c_k`, otherwise ones.
    pub rescale: Vec<f64>,
}

impl BasisSpec {
    fn plain(family: Family, d: usize, e0: f64, h_tot: f64) -> Self {
        Self { family, d, e0, tau: None, delta_t: None, delta_e: None, h_tot, rescale: vec![1.0; d] }
    }

    pub fn power(d: usize, e0: f64, h_tot: f64) -> Self {
        Self::plain(Family::P, d, e0, h_tot)
    }

    pub fn chebyshev(d: usize, h_tot: f64) -> Self {
        Self::plain(Family::CP, d, 0.0, h_tot)
    }

    /// Unrescaled Gaussian-power basis.
    pub fn gaussian_power(d: usize, e0: f64, tau: f64, h_tot: f64) -> Self {
        Self { tau: Some(tau), ..Self::plain(Family::GP, d, e0, h_tot) }
    }

    pub fn inverse_power(d: usize, e0: f64, h_tot: f64) -> Self {
        Self::plain(Family::IP, d, e0, h_tot)
    }

    pub fn imaginary_time(d: usize, e0: f64, tau: f64, h_tot: f64) -> Self {
        Self { tau: Some(tau), ..Self::plain(Family::ITE, d, e0, h_tot) }
    }

    pub fn real_time(d: usize, e0: f64, delta_t: f64, h_tot: f64) -> Self {
        Self { delta_t: Some(delta_t), ..Self::plain(Family::RTE, d, e0, h_tot) }
    }

    pub fn filter(d: usize, e0: f64, tau: f64, delta_e: f64, h_tot: f64) -> Self {
        Self { tau: Some(tau), delta_e: Some(delta_e), ..Self::plain(Family::F, d, e0, h_tot) }
    }

    /// GP basis divided by `c_k` at `N = ⌈4e·h_tot²τ²⌉`.
    pub fn gaussian_power_rescaled(d: usize, e0: f64, tau: f64, h_tot: f64) -> Result<Self> {
        let n = gp_min_steps(tau, h_tot);
        let rescale = (1..=d).map(|k| gp_cost_ck(k, tau, h_tot, n)).collect::<Result<Vec<_>>>()?;
        Ok(Self { rescale, ..Self::gaussian_power(d, e0, tau, h_tot) })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.d == 0 {
            return bad("subspace dimension must be at least 1".into());
        }
        if self.rescale.len() != self.d || self.rescale.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return bad("rescale needs d positive finite entries".into());
        }
        if !self.e0.is_finite() || !(self.h_tot > 0.0) {
            return bad("E_0 must be finite and h_tot positive".into());
        }
        let needs_tau = matches!(self.family, Family::GP | Family::ITE | Family::F);
        if needs_tau != self.tau.is_some() {
            return bad(format!("τ presence does not match family {}", self.family));
        }
        if let Some(t) = self.tau {
            if !(t > 0.0) || !t.is_finite() {
                return bad(format!("τ = {t} must be positive"));
            }
        }
        if (self.family == Family::RTE) != self.delta_t.is_some() {
            return bad("Δt is required exactly for RTE".into());
        }
        if (self.family == Family::F) != self.delta_e.is_some() {
            return bad("ΔE is required exactly for F".into());
        }
        Ok(())
    }

    fn raw(&self, k: usize, x: f64) -> Result<Complex64> {
        let n = (k - 1) as i32;
        let re = |v: f64| Ok(Complex64::new(v, 0.0));
        match self.family {
            Family::P => re(x.powi(n)),
            Family::CP => re(chebyshev_t(k - 1, x / self.h_tot)),
            Family::GP => {
                let t = self.tau.unwrap_or(0.0);
                re(x.powi(n) * (-0.5 * x * x * t * t).exp())
            }
            Family::IP => {
                if k > 1 && x.abs() < 1e-300 {
                    return Err(Error::Singular { x });
                }
                re(x.powi(-n))
            }
            Family::ITE => re((-self.tau.unwrap_or(0.0) * n as f64 * x).exp()),
            Family::RTE => {
                let dt = self.delta_t.unwrap_or(0.0);
                let phase = -x * dt * (k as f64 - (self.d as f64 + 1.0) / 2.0);
                Ok(Complex64::from_polar(1.0, phase))
            }
            Family::F => {
                let y = (x - self.delta_e.unwrap_or(0.0) * n as f64) * self.tau.unwrap_or(0.0);
                re(sinc(y))
            }
        }
    }
}

fn sinc(y: f64) -> f64 {
    if y.abs() < 1e-8 {
        1.0 - y * y / 6.0
    } else {
        y.sin() / y
    }
}

/// `f_k(x) / rescale_k` with `x = E − E_0` (CP takes `x = E`, since its `E_0` is 0).
pub fn eval_f(spec: &BasisSpec, k: usize, x: f64) -> Result<Complex64> {
    if k == 0 || k > spec.d {
        return Err(Error::InvalidArgument(format!("index {k} outside 1..={}", spec.d)));
    }
    Ok(spec.raw(k, x)? / spec.rescale[k - 1])
}

#[derive(Clone, Debug, PartialEq)]
pub struct KrylovMatrices {
    pub h: DMatrix<Complex64>,
    pub s: DMatrix<Complex64>,
    pub structure: Structure,
    pub c_h: f64,
    pub c_s: f64,
    /// Divisors applied to each basis function; structure checks undo them.
    pub rescale: Vec<f64>,
}

impl KrylovMatrices {
    pub fn d(&self) -> usize {
        self.h.nrows()
    }

    /// `m_kq · r_k · r_q`, i.e. the matrix before basis rescaling.
    pub fn unrescaled(&self, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        DMatrix::from_fn(m.nrows(), m.ncols(), |k, q| m[(k, q)] * self.rescale[k] * self.rescale[q])
    }

    /// Whether `m` (already unrescaled) has this pencil's structure within `tol`
    /// relative to its largest entry.
    pub fn has_structure(&self, m: &DMatrix<Complex64>, tol: f64) -> bool {
        check_structure(m, self.structure, tol)
    }
}

pub fn check_structure(m: &DMatrix<Complex64>, structure: Structure, tol: f64) -> bool {
    let d = m.nrows();
    let scale = m.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
    let close = |a: Complex64, b: Complex64| (a - b).norm() <= tol * scale;
    let herm = (0..d).all(|k| (0..d).all(|q| close(m[(k, q)], m[(q, k)].conj())));
    if !herm {
        return false;
    }
    match structure {
        Structure::Dense => true,
        Structure::RealSymmetric => m.iter().all(|z| z.im.abs() <= tol * scale),
        Structure::RealHankel => {
            m.iter().all(|z| z.im.abs() <= tol * scale)
                && (0..d).all(|k| (0..d).all(|q| k + q < d || close(m[(k, q)], m[(k + q - d + 1, d - 1)])))
                && (0..d).all(|k| (0..d).all(|q| k + q >= d || close(m[(k, q)], m[(0, k + q)])))
        }
        Structure::HermitianToeplitz => (0..d).all(|k| {
            (0..d).all(|q| {
                let (a, b) = if k >= q { (k - q, 0) } else { (0, q - k) };
                close(m[(k, q)], m[(a, b)])
            })
        }),
    }
}

/// Exact Krylov matrices from `(energy, weight)` pairs.
pub fn build_matrices(spec: &BasisSpec, sd: &SpectralDecomposition) -> Result<KrylovMatrices> {
    spec.validate()?;
    let d = spec.d;
    let mut h = DMatrix::<Complex64>::zeros(d, d);
    let mut s = DMatrix::<Complex64>::zeros(d, d);
    let mut f = vec![Complex64::new(0.0, 0.0); d];
    for &(e, w) in sd.active_levels() {
        let x = if spec.family == Family::CP { e } else { e - spec.e0 };
        for (k, fk) in f.iter_mut().enumerate() {
            *fk = eval_f(spec, k + 1, x)?;
        }
        for q in 0..d {
            let wq = f[q] * w;
            for k in 0..=q {
                let v = f[k].conj() * wq;
                s[(k, q)] += v;
                h[(k, q)] += v * e;
            }
        }
    }
    for q in 0..d {
        h[(q, q)].im = 0.0;
        s[(q, q)].im = 0.0;
        for k in 0..q {
            h[(q, k)] = h[(k, q)].conj();
            s[(q, k)] = s[(k, q)].conj();
        }
    }
    let (c_h, c_s) = if spec.family == Family::GP { (spec.h_tot, 1.0) } else { (1.0, 1.0) };
    Ok(KrylovMatrices { h, s, structure: spec.family.structure(), c_h, c_s, rescale: spec.rescale.clone() })
}

/// `E_min − E_g` of the noiseless pencil.
pub fn subspace_error(km: &KrylovMatrices, e_g: f64) -> Result<f64> {
    Ok(solve_exact(km)?.e_min - e_g)
}

/// `H_dd / S_dd − E_g` of the P basis with `E_0 = E_g + 1`.
pub fn power_projector_error(sd: &SpectralDecomposition, d: usize) -> f64 {
    let eg = sd.ground_energy();
    let p = 2 * (d as i32 - 1);
    let (mut num, mut den) = (0.0, 0.0);
    for &(e, w) in sd.active_levels() {
        let v = w * (e - eg - 1.0).powi(p);
        num += v * e;
        den += v;
    }
    num / den - eg
}

/// Energy error of the filter (GP, F: `f_1`) or projector (ITE: `f_d`) at `E_0 = E_g`.
pub fn filter_error(family: Family, sd: &SpectralDecomposition, d: usize, tau: f64) -> Result<f64> {
    let eg = sd.ground_energy();
    let weight = |x: f64| -> f64 {
        match family {
            Family::GP => (-x * x * tau * tau).exp(),
            Family::F => sinc(x * tau).powi(2),
            _ => (-2.0 * tau * (d as f64 - 1.0) * x).exp(),
        }
    };
    if !matches!(family, Family::GP | Family::F | Family::ITE) {
        return Err(Error::InvalidArgument(format!("no τ for family {family}")));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &(e, w) in sd.active_levels() {
        let v = w * weight(e - eg);
        num += v * (e - eg);
        den += v;
    }
    Ok(num / den)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TauChoice {
    pub tau: f64,
    /// Degenerate target (`eps_B ≤ 0`): the lower bound was returned.
    pub degenerate: bool,
    /// The root lay outside the admissible GP range and was clipped.
    pub clipped: bool,
}

/// Prior-energy uncertainty bounding the admissible GP `τ` from above.
pub const GP_PRIOR_UNCERTAINTY: f64 = 0.1;

pub fn gp_tau_range(d: usize) -> (f64, f64) {
    let lo = ((d as f64 - 1.0) / E).sqrt() * (1.0 + 1e-6);
    let hi = if d > 1 { (d as f64 - 1.0).sqrt() / GP_PRIOR_UNCERTAINTY } else { f64::INFINITY };
    (lo, hi)
}

/// Solves `filter_error(τ) = eps_b` by doubling then bisection.
pub fn select_tau(family: Family, sd: &SpectralDecomposition, d: usize, eps_b: f64) -> Result<TauChoice> {
    let (lo_bound, hi_bound) = gp_tau_range(d);
    if !(eps_b > 0.0) {
        return Ok(TauChoice { tau: lo_bound, degenerate: true, clipped: false });
    }
    let err = |t: f64| filter_error(family, sd, d, t);
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut tau = None;
    if err(0.0)? <= eps_b {
        tau = Some(0.0);
    } else {
        let mut n = 0;
        while err(hi)? > eps_b {
            lo = hi;
            hi *= 2.0;
            n += 1;
            if n > 200 {
                return Err(Error::Numerical("τ bracket not found".into()));
            }
        }
    }
    let tau = match tau {
        Some(t) => t,
        None => {
            for _ in 0..200 {
                if hi - lo <= 1e-10 * hi {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if err(mid)? > eps_b {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    };
    if family == Family::GP {
        let clipped_tau = tau.clamp(lo_bound, hi_bound.max(lo_bound));
        return Ok(TauChoice { tau: clipped_tau, degenerate: false, clipped: clipped_tau != tau });
    }
    Ok(TauChoice { tau, degenerate: false, clipped: false })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridChoice {
    pub value: f64,
    pub epsilon_k: f64,
}

/// Grid values searched for RTE (`Δt`) or F (`ΔE`).
pub fn parameter_grid(family: Family, d: usize) -> Result<Vec<f64>> {
    match family {
        Family::RTE => Ok((1..=100).map(|i| i as f64 * 2.0 * PI / 100.0).collect()),
        Family::F => Ok((1..=100).map(|i| i as f64 * 2.0 / (100.0 * d as f64)).collect()),
        other => Err(Error::InvalidArgument(format!("no grid parameter for {other}"))),
    }
}

/// Grid point minimising `ε_K`; ties go to the smallest value. F needs `tau`.
pub fn grid_search_param(
    family: Family,
    sd: &SpectralDecomposition,
    d: usize,
    h_tot: f64,
    tau: Option<f64>,
) -> Result<GridChoice> {
    let eg = sd.ground_energy();
    let mut best: Option<GridChoice> = None;
    for v in parameter_grid(family, d)? {
        let spec = match family {
            Family::RTE => BasisSpec::real_time(d, eg, v, h_tot),
            _ => BasisSpec::filter(d, eg, tau.ok_or_else(|| Error::InvalidArgument("F needs τ".into()))?, v, h_tot),
        };
        let eps = match build_matrices(&spec, sd).and_then(|km| subspace_error(&km, eg)) {
            Ok(e) => e,
            Err(_) => continue,
        };
        if best.is_none_or(|b| eps < b.epsilon_k) {
            best = Some(GridChoice { value: v, epsilon_k: eps });
        }
    }
    best.ok_or_else(|| Error::Numerical("every grid point failed".into()))
}

/// Smallest step count satisfying `N ≥ 4e·h_tot²τ²`.
pub fn gp_min_steps(tau: f64, h_tot: f64) -> u64 {
    (4.0 * E * h_tot * h_tot * tau * tau).ceil().max(1.0) as u64
}

/// Unnormalised density of the GP sampling variable `u = t/(√2τ)`:
/// `|H_{k−1}(u)| e^{−u²} / √π · c(√2τu/N)^N`.
pub fn gp_cost_density(k: usize, tau: f64, h_tot: f64, n_steps: u64, u: f64) -> f64 {
    let dt = SQRT_2 * tau * u / n_steps as f64;
    let ln = -u * u + n_steps as f64 * cost_c_ln(dt, h_tot);
    hermite(k - 1, u).abs() * ln.exp() / PI.sqrt()
}

/// Truncation point in `u` beyond which the cost density is negligible.
pub fn gp_cost_support(k: usize, tau: f64, h_tot: f64, n_steps: u64) -> f64 {
    let roots = hermite_roots(k - 1);
    let mut u = roots.last().copied().unwrap_or(0.0).max(1.0);
    let peak = (0..=200)
        .map(|i| gp_cost_density(k, tau, h_tot, n_steps, u * i as f64 / 200.0))
        .fold(0.0, f64::max);
    while gp_cost_density(k, tau, h_tot, n_steps, u) > 1e-18 * peak && u < 1e3 {
        u += 0.25;
    }
    u
}

/// Cost integral of the GP LCU representation with `N` evolution steps.
pub fn gp_cost_ck(k: usize, tau: f64, h_tot: f64, n_steps: u64) -> Result<f64> {
    if k == 0 || n_steps == 0 || !(tau > 0.0) || !(h_tot > 0.0) {
        return Err(Error::InvalidArgument("c_k needs k ≥ 1, N ≥ 1, τ > 0, h_tot > 0".into()));
    }
    let threshold = E * h_tot * h_tot * tau * tau;
    if (n_steps as f64) <= threshold {
        return Err(Error::Divergent { n_steps, threshold });
    }
    let upper = gp_cost_support(k, tau, h_tot, n_steps);
    let roots: Vec<f64> = hermite_roots(k - 1).into_iter().filter(|&r| r > 0.0).collect();
    let half = integrate(
        |u| gp_cost_density(k, tau, h_tot, n_steps, u),
        0.0,
        upper,
        &roots,
        Tolerance { abs: 0.0, rel: 1e-13, max_panels: 50_000 },
    );
    let n = (k - 1) as f64;
    let prefactor = (-(0.5 * n * 2f64.ln() + n * tau.ln())).exp();
    Ok(2.0 * half.value * prefactor)
}

/// Norm bound `((k−1)/(eτ²))^{(k−1)/2}` of the unrescaled GP function.
pub fn gp_norm_bound(k: usize, tau: f64) -> f64 {
    if k == 1 {
        return 1.0;
    }
    let n = (k - 1) as f64;
    (n / (E * tau * tau)).powf(0.5 * n)
}

/// Quadrature of the Fourier representation of `x^{k−1} e^{−x²τ²/2}`.
pub fn gp_fourier(k: usize, tau: f64, x: f64) -> Complex64 {
    let n = k - 1;
    let w = SQRT_2 * tau * x;
    let mut upper = 6.0f64.max(hermite_roots(n).last().copied().unwrap_or(0.0) + 1.0);
    while hermite(n, upper).abs() * (-upper * upper).exp() > 1e-20 {
        upper += 0.5;
    }
    let tol = Tolerance { abs: 1e-15, rel: 1e-13, max_panels: 50_000 };
    let re = integrate(|u| hermite(n, u) * (-u * u).exp() * (w * u).cos(), -upper, upper, &[], tol).value;
    let im = -integrate(|u| hermite(n, u) * (-u * u).exp() * (w * u).sin(), -upper, upper, &[], tol).value;
    let prefactor = Complex64::new(0.0, 1.0).powu(n as u32) / (2f64.powf(0.5 * n as f64) * tau.powi(n as i32) * PI.sqrt());
    prefactor * Complex64::new(re, im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::diagonalise;
    use crate::lattice::LatticeKind;
    use crate::models::{normalise, Model};
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn pair_sd() -> SpectralDecomposition {
        SpectralDecomposition::new(vec![-1.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], vec![1.0, 0.0, 0.0, 0.0]).unwrap()
    }

    fn chain6() -> &'static (SpectralDecomposition, f64) {
        static CELL: OnceLock<(SpectralDecomposition, f64)> = OnceLock::new();
        CELL.get_or_init(|| {
            let m = Model::heisenberg(LatticeKind::Chain, 6, None).unwrap();
            let norm = crate::exact::spectral_norm(&m.hamiltonian).unwrap();
            let h = normalise(&m.hamiltonian, norm).unwrap();
            (diagonalise(&h, &m.reference).unwrap(), h.h_tot())
        })
    }

    #[test]
    fn eval_examples() {
        let p = BasisSpec::power(3, 0.0, 1.0);
        assert_eq!(eval_f(&p, 1, 0.7).unwrap(), Complex64::new(1.0, 0.0));
        let tau = 1.7;
        let gp = BasisSpec::gaussian_power(3, 0.0, tau, 1.0);
        let x = SQRT_2 / tau;
        let want = 2.0 / (tau * tau) * (-1.0f64).exp();
        assert!((eval_f(&gp, 3, x).unwrap().re - want).abs() < 1e-14);
        let cp = BasisSpec::chebyshev(3, 2.0);
        assert!((eval_f(&cp, 3, 1.0).unwrap().re + 0.5).abs() < 1e-15);
        let ip = BasisSpec::inverse_power(3, 0.0, 1.0);
        assert!(matches!(eval_f(&ip, 2, 0.0), Err(Error::Singular { .. })));
        assert!(eval_f(&p, 4, 0.0).is_err());
    }

    #[test]
    fn validation() {
        let mut s = BasisSpec::gaussian_power(3, 0.0, 1.0, 1.0);
        assert!(s.validate().is_ok());
        s.tau = None;
        assert!(s.validate().is_err());
        assert!(BasisSpec::power(0, 0.0, 1.0).validate().is_err());
        let mut r = BasisSpec::real_time(2, 0.0, 0.1, 1.0);
        r.delta_t = None;
        assert!(r.validate().is_err());
    }

    #[test]
    fn one_dimensional_pencils() {
        let sd = chain6().0.clone();
        let mean = sd.mean_energy();
        for family in [Family::P, Family::CP, Family::IP, Family::ITE, Family::RTE] {
            let spec = match family {
                Family::ITE => BasisSpec::imaginary_time(1, sd.ground_energy(), 0.5, 1.0),
                Family::RTE => BasisSpec::real_time(1, sd.ground_energy(), 0.3, 1.0),
                Family::IP => BasisSpec::inverse_power(1, sd.ground_energy() - 1.0, 1.0),
                Family::CP => BasisSpec::chebyshev(1, 1.0),
                _ => BasisSpec::power(1, 0.0, 1.0),
            };
            let km = build_matrices(&spec, &sd).unwrap();
            assert!((km.s[(0, 0)].re - 1.0).abs() < 1e-12);
            assert!((km.h[(0, 0)].re - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_reference_gives_zero_error() {
        let sd = pair_sd();
        let km = build_matrices(&BasisSpec::power(2, 0.0, 1.0), &sd).unwrap();
        for k in 0..2 {
            for q in 0..2 {
                let sign = if (k + q) % 2 == 0 { 1.0 } else { -1.0 };
                assert!((km.s[(k, q)].re - sign).abs() < 1e-14);
            }
        }
        assert!(subspace_error(&km, -1.0).unwrap().abs() < 1e-10);
        let tau = select_tau(Family::GP, &sd, 4, 0.0).unwrap();
        assert!(tau.degenerate);
        assert!((tau.tau - (3.0 / E).sqrt() * (1.0 + 1e-6)).abs() < 1e-15);
    }

    #[test]
    fn structures_hold_per_family() {
        let (sd, h_tot) = chain6().clone();
        let eg = sd.ground_energy();
        let specs = [
            BasisSpec::power(5, eg + 1.0, h_tot),
            BasisSpec::chebyshev(5, h_tot),
            BasisSpec::gaussian_power_rescaled(5, eg + 0.03, 2.0, h_tot).unwrap(),
            BasisSpec::inverse_power(5, eg - 1.0, h_tot),
            BasisSpec::imaginary_time(5, eg, 0.8, h_tot),
            BasisSpec::real_time(5, eg, 0.7, h_tot),
            BasisSpec::filter(5, eg, 3.0, 0.05, h_tot),
        ];
        for spec in specs {
            let km = build_matrices(&spec, &sd).unwrap();
            let h = km.unrescaled(&km.h);
            let s = km.unrescaled(&km.s);
            assert!(km.has_structure(&h, 1e-12), "{}", spec.family);
            assert!(km.has_structure(&s, 1e-12), "{}", spec.family);
            let eig = crate::linalg::hermitian_eigenvalues(&km.s);
            assert!(eig[0] > -1e-10 * eig[eig.len() - 1]);
            let expect = if spec.family == Family::GP { (h_tot, 1.0) } else { (1.0, 1.0) };
            assert_eq!((km.c_h, km.c_s), expect);
        }
    }

    #[test]
    fn complete_space_has_zero_error() {
        let (sd, h_tot) = chain6().clone();
        let n_levels = sd.active_levels().len();
        let eg = sd.ground_energy();
        let km = build_matrices(&BasisSpec::real_time(n_levels, eg, 0.9, h_tot), &sd).unwrap();
        assert!(subspace_error(&km, eg).unwrap().abs() < 1e-8);
    }

    #[test]
    fn matrix_elements_match_statevector() {
        let m = Model::heisenberg(LatticeKind::Chain, 4, None).unwrap();
        let es = crate::exact::eigensystem(&m.hamiltonian).unwrap();
        let sd = es.decompose(m.reference.amplitudes()).unwrap();
        let h_tot = m.hamiltonian.h_tot();
        let eg = sd.ground_energy();
        let specs = [
            BasisSpec::gaussian_power(3, eg + 0.2, 0.4, h_tot),
            BasisSpec::real_time(3, eg, 0.3, h_tot),
            BasisSpec::chebyshev(3, h_tot),
        ];
        for spec in specs {
            let km = build_matrices(&spec, &sd).unwrap();
            let phi = m.reference.amplitudes();
            let vecs: Vec<Vec<Complex64>> = (1..=3)
                .map(|k| {
                    let shift = if spec.family == Family::CP { 0.0 } else { spec.e0 };
                    es.apply_function(|e| eval_f(&spec, k, e - shift).unwrap(), phi)
                })
                .collect();
            for k in 0..3 {
                let hk = m.hamiltonian.apply(&vecs[k]);
                for q in 0..3 {
                    let s = crate::linalg::inner(&vecs[k], &vecs[q]);
                    let h = crate::linalg::inner(&vecs[q], &hk).conj();
                    assert!((s - km.s[(k, q)]).norm() < 1e-10);
                    assert!((h - km.h[(k, q)]).norm() < 1e-10 * (1.0 + h.norm()));
                }
            }
        }
    }

    #[test]
    fn filter_error_monotone() {
        let (sd, _) = chain6().clone();
        for family in [Family::GP, Family::ITE] {
            let mut prev = f64::INFINITY;
            for i in 0..60 {
                let v = filter_error(family, &sd, 5, 0.25 * i as f64).unwrap();
                assert!(v <= prev + 1e-15);
                prev = v;
            }
        }
    }

    #[test]
    fn tau_selection_hits_target() {
        let (sd, _) = chain6().clone();
        let d = 4;
        let eps_b = power_projector_error(&sd, d);
        assert!(eps_b > 0.0);
        for family in [Family::GP, Family::ITE, Family::F] {
            let c = select_tau(family, &sd, d, eps_b).unwrap();
            if !c.clipped {
                let err = filter_error(family, &sd, d, c.tau).unwrap();
                assert!((err - eps_b).abs() < 1e-7 * eps_b.max(1e-3), "{family}: {err} vs {eps_b}");
            }
        }
    }

    #[test]
    fn grid_search_is_argmin() {
        let (sd, h_tot) = chain6().clone();
        let d = 3;
        let eg = sd.ground_energy();
        let best = grid_search_param(Family::RTE, &sd, d, h_tot, None).unwrap();
        for v in parameter_grid(Family::RTE, d).unwrap() {
            let km = build_matrices(&BasisSpec::real_time(d, eg, v, h_tot), &sd).unwrap();
            assert!(best.epsilon_k <= subspace_error(&km, eg).unwrap());
        }
        let grid = parameter_grid(Family::F, d).unwrap();
        assert!((grid[99] * d as f64 - 2.0).abs() < 1e-12 && (grid[0] * 100.0 * d as f64 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ck_first_order_limits() {
        let c = gp_cost_ck(1, 2.0, 1.0, 1_000_000_000).unwrap();
        assert!((c - 1.0).abs() < 1e-6);
        assert!(matches!(gp_cost_ck(1, 2.0, 1.0, 10), Err(Error::Divergent { .. })));
    }

    #[test]
    fn ck_bound_ratio_is_tau_independent() {
        // with N = 4e h²τ² the ratio only depends on k (up to ceiling effects)
        let a = gp_cost_ck(5, 3.0, 1.0, gp_min_steps(3.0, 1.0)).unwrap() / gp_norm_bound(5, 3.0);
        let b = gp_cost_ck(5, 7.0, 1.0, gp_min_steps(7.0, 1.0)).unwrap() / gp_norm_bound(5, 7.0);
        assert!((a - b).abs() < 1e-3 * a);
        assert!((1.0..=2.0).contains(&a));
    }

    #[test]
    fn fourier_identity_low_orders() {
        let tau = 2.0;
        for k in 1..=4 {
            for i in -10..=10 {
                let x = i as f64 / 10.0;
                let want = x.powi(k as i32 - 1) * (-0.5 * x * x * tau * tau).exp();
                let got = gp_fourier(k, tau, x);
                assert!((got.re - want).abs() < 1e-9 && got.im.abs() < 1e-9, "k={k} x={x}");
            }
        }
    }

    proptest! {
        #[test]
        fn gp_norm_bound_holds(k in 1usize..30, tau in 0.5f64..20.0, x in -2.0f64..2.0) {
            let spec = BasisSpec::gaussian_power(30, 0.0, tau, 1.0);
            let v = eval_f(&spec, k, x).unwrap().norm();
            prop_assert!(v <= gp_norm_bound(k, tau) * (1.0 + 1e-12));
        }

        #[test]
        fn family_names_round_trip(i in 0usize..7) {
            let f = Family::ALL[i];
            prop_assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
    }
}
