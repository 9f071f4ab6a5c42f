//! Measurement-cost model: regularisation parameter per protocol, the bound
//! equation for η, total measurement number and its three-factor split, and
//! the Chebyshev-times-Gaussian projector composition.

use serde::{Deserialize, Serialize};

use crate::bases::{build_matrices, gp_cost_ck, gp_min_steps, BasisSpec, KrylovMatrices, Structure};
use crate::error::{Error, Result};
use crate::exact::SpectralDecomposition;
use crate::linalg::{chebyshev_t, KahanSum};
use crate::solver::{min_e_prime, quadratic_forms, solve_exact};
use crate::special::ln_factorial;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    ImChebyshev,
    ImHoeffding,
    CmRealHankel,
    CmRealSymmetric,
    CmComplexToeplitz,
}

impl Protocol {
    pub const ALL: [Protocol; 5] = [
        Protocol::ImChebyshev,
        Protocol::ImHoeffding,
        Protocol::CmRealHankel,
        Protocol::CmRealSymmetric,
        Protocol::CmComplexToeplitz,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::ImChebyshev => "im_chebyshev",
            Protocol::ImHoeffding => "im_hoeffding",
            Protocol::CmRealHankel => "cm_real_hankel",
            Protocol::CmRealSymmetric => "cm_real_symmetric",
            Protocol::CmComplexToeplitz => "cm_complex_toeplitz",
        }
    }

    /// Collective protocol matching a matrix structure; independent otherwise.
    pub fn for_structure(structure: Structure) -> Self {
        match structure {
            Structure::RealHankel => Protocol::CmRealHankel,
            Structure::RealSymmetric => Protocol::CmRealSymmetric,
            Structure::HermitianToeplitz => Protocol::CmComplexToeplitz,
            Structure::Dense => Protocol::ImHoeffding,
        }
    }

    pub fn is_collective(self) -> bool {
        !matches!(self, Protocol::ImChebyshev | Protocol::ImHoeffding)
    }

    /// Whether the protocol can measure matrices of this structure.
    pub fn supports(self, structure: Structure) -> bool {
        match self {
            Protocol::ImChebyshev | Protocol::ImHoeffding => true,
            Protocol::CmRealHankel => structure == Structure::RealHankel,
            Protocol::CmRealSymmetric => matches!(structure, Structure::RealHankel | Structure::RealSymmetric),
            Protocol::CmComplexToeplitz => structure == Structure::HermitianToeplitz,
        }
    }

    pub fn alpha(self, kappa: f64) -> f64 {
        match self {
            Protocol::ImChebyshev => 256.0 / kappa,
            Protocol::ImHoeffding => 128.0 * (1.0 / kappa).ln(),
            Protocol::CmRealHankel | Protocol::CmComplexToeplitz => 64.0 * (1.0 / kappa).ln(),
            Protocol::CmRealSymmetric => 32.0 * (1.0 / kappa).ln(),
        }
    }

    pub fn beta(self, d: usize) -> f64 {
        let d = d as f64;
        match self {
            Protocol::ImChebyshev => d.powi(6),
            Protocol::ImHoeffding => d.powi(4),
            Protocol::CmRealHankel => d * (2.0 * d - 1.0),
            Protocol::CmRealSymmetric => d * d * (d + 1.0),
            Protocol::CmComplexToeplitz => (2.0 * d - 1.0).powi(2),
        }
    }

    /// Number of real quantities measured `M` times each.
    pub fn measured_quantities(self, d: usize) -> f64 {
        let d = d as f64;
        match self {
            Protocol::ImChebyshev | Protocol::ImHoeffding => 4.0 * d * d,
            Protocol::CmRealHankel | Protocol::CmComplexToeplitz => 2.0 * (2.0 * d - 1.0),
            Protocol::CmRealSymmetric => d * (d + 1.0),
        }
    }

    /// `η √M`, constant in `M` for every row.
    fn eta_scale(self, d: usize, kappa: f64) -> f64 {
        let d = d as f64;
        match self {
            Protocol::ImChebyshev => 2.0 * d * d / kappa.sqrt(),
            Protocol::ImHoeffding => (2.0 * d * d * (8.0 * d * d / kappa).ln()).sqrt(),
            Protocol::CmRealHankel | Protocol::CmRealSymmetric => (2.0 * d * (4.0 * d / kappa).ln()).sqrt(),
            Protocol::CmComplexToeplitz => (2.0 * (2.0 * d - 1.0) * (4.0 * d / kappa).ln()).sqrt(),
        }
    }

    /// Regularisation parameter for `M` measurements per quantity.
    pub fn eta_for(self, d: usize, m: f64, kappa: f64) -> Result<f64> {
        check_kappa(kappa)?;
        if !(m > 0.0) {
            return Err(Error::InvalidArgument(format!("M = {m} must be positive")));
        }
        Ok(self.eta_scale(d, kappa) / m.sqrt())
    }

    /// Measurements per quantity giving regularisation parameter `η`.
    pub fn m_for_eta(self, d: usize, kappa: f64, eta: f64) -> Result<f64> {
        check_kappa(kappa)?;
        check_eta(eta)?;
        Ok((self.eta_scale(d, kappa) / eta).powi(2))
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown protocol {s:?}")))
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("κ = {kappa} must lie in (0, 1)")))
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("η = {eta} must be positive")))
    }
}

/// `α(κ) β(d) / (16 η²)`.
pub fn m_tot(protocol: Protocol, d: usize, kappa: f64, eta: f64) -> Result<f64> {
    check_kappa(kappa)?;
    check_eta(eta)?;
    Ok(protocol.alpha(kappa) * protocol.beta(d) / (16.0 * eta * eta))
}

/// Total measurement number of the rescaled GP basis with `α = 16 ln(1/κ)`, `β = d(2d−1)`.
pub fn m_tot_gp(d: usize, kappa: f64, eta: f64) -> Result<f64> {
    check_kappa(kappa)?;
    check_eta(eta)?;
    let d = d as f64;
    Ok(16.0 * (1.0 / kappa).ln() * d * (2.0 * d - 1.0) / (16.0 * eta * eta))
}

/// `p_g² ε² / (16 ‖H‖² η²)`.
pub fn gamma(p_g: f64, epsilon: f64, h_norm: f64, eta: f64) -> f64 {
    (p_g * epsilon / (4.0 * h_norm * eta)).powi(2)
}

/// Root of `min E′(η) = E_g + ε` with `ε_K` the noiseless subspace error.
pub fn solve_eta(km: &KrylovMatrices, e_g: f64, epsilon: f64) -> Result<f64> {
    let target = e_g + epsilon;
    if !(target < 0.0) {
        return Err(Error::Precondition(format!("E_g + ε = {target} must be negative")));
    }
    let e_min = solve_exact(km)?.e_min;
    if !(target > e_min) {
        return Err(Error::NoSolution { epsilon, subspace_error: e_min - e_g });
    }
    let f = |eta: f64| min_e_prime(km, eta).map(|v| v - target);
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut n = 0;
    while f(hi)? < 0.0 {
        lo = hi;
        hi *= 2.0;
        n += 1;
        if n > 200 {
            return Err(Error::Numerical("η bracket not found".into()));
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-16_f64.max(1e-15 * hi) {
            break;
        }
        let v = f(mid)?;
        if v == 0.0 {
            return Ok(mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (f(lo)?, f(hi)?);
    Ok(if lo > 0.0 && flo.abs() < fhi.abs() { lo } else { hi })
}

/// Bound-equation solution for `d = 1` with an exact ground-state projector.
pub fn ideal_projector_eta(p_g: f64, e_g: f64, epsilon: f64, c_h: f64, c_s: f64) -> f64 {
    p_g * epsilon / (2.0 * (c_h - c_s * (e_g + epsilon)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub protocol: Protocol,
    pub d: usize,
    pub eta: f64,
    pub epsilon: f64,
    pub epsilon_k: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub beta: f64,
    pub m_tot: f64,
    /// Measurements per measured quantity.
    pub m_per_quantity: f64,
    pub gamma: f64,
    pub p_g: f64,
    pub spectral_norm: f64,
    pub factor1: f64,
}

impl CostReport {
    /// Solves for η and assembles every cost quantity.
    pub fn new(
        protocol: Protocol,
        km: &KrylovMatrices,
        e_g: f64,
        epsilon: f64,
        kappa: f64,
        p_g: f64,
        spectral_norm: f64,
    ) -> Result<Self> {
        if !protocol.supports(km.structure) {
            return Err(Error::StructureMismatch {
                protocol: protocol.name().into(),
                structure: format!("{:?}", km.structure),
            });
        }
        let d = km.d();
        let eta = solve_eta(km, e_g, epsilon)?;
        let epsilon_k = solve_exact(km)?.e_min - e_g;
        Self::from_eta(protocol, d, eta, epsilon, epsilon_k, kappa, p_g, spectral_norm)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_eta(
        protocol: Protocol,
        d: usize,
        eta: f64,
        epsilon: f64,
        epsilon_k: f64,
        kappa: f64,
        p_g: f64,
        spectral_norm: f64,
    ) -> Result<Self> {
        if !(p_g > 0.0) || !(epsilon > 0.0) || !(spectral_norm > 0.0) {
            return Err(Error::InvalidArgument("p_g, ε and ‖H‖ must be positive".into()));
        }
        let alpha = protocol.alpha(kappa);
        let beta = protocol.beta(d);
        Ok(Self {
            protocol,
            d,
            eta,
            epsilon,
            epsilon_k,
            kappa,
            alpha,
            beta,
            m_tot: m_tot(protocol, d, kappa, eta)?,
            m_per_quantity: protocol.m_for_eta(d, kappa, eta)?,
            gamma: gamma(p_g, epsilon, spectral_norm, eta),
            p_g,
            spectral_norm,
            factor1: alpha * spectral_norm.powi(2) / (p_g * epsilon).powi(2),
        })
    }

    /// `(α‖H‖²/(p_g²ε²), β, γ)`, whose product is `M_tot`.
    pub fn factor_cost(&self) -> (f64, f64, f64) {
        (self.factor1, self.beta, self.gamma)
    }

    /// Largest relative violation of `M_tot = αβ/(16η²) = factor1·β·γ`.
    pub fn identity_residual(&self) -> f64 {
        let direct = self.alpha * self.beta / (16.0 * self.eta * self.eta);
        let factored = self.factor1 * self.beta * self.gamma;
        ((self.m_tot - direct) / self.m_tot).abs().max(((self.m_tot - factored) / self.m_tot).abs())
    }

    pub fn identities_hold(&self, tol: f64) -> bool {
        self.m_tot.is_finite() && self.m_tot > 0.0 && self.identity_residual() <= tol
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallEta {
    pub gamma: f64,
    pub u: f64,
    /// `(C_H + ‖H‖C_S) ε / (2‖H‖(ε − ε_K))`.
    pub u_bound: f64,
    /// Linearised root `(E_g + ε − E_min) / s`.
    pub eta: f64,
}

/// First-order-in-η estimate of γ at the unshifted minimiser.
pub fn gamma_small_eta(km: &KrylovMatrices, e_g: f64, epsilon: f64, p_g: f64, h_norm: f64) -> Result<SmallEta> {
    let sol = solve_exact(km)?;
    let eps_k = sol.e_min - e_g;
    if !(epsilon > eps_k) {
        return Err(Error::NoSolution { epsilon, subspace_error: eps_k });
    }
    let a = &sol.coefficients;
    let (ha, sa) = quadratic_forms(km, a);
    let aa = a.norm_squared();
    let rq = ha / sa;
    let gap = e_g + epsilon - sol.e_min;
    let u = epsilon * (km.c_h - km.c_s * rq).abs() / (2.0 * h_norm * gap.abs());
    let u_bound = (km.c_h + h_norm * km.c_s) * epsilon / (2.0 * h_norm * (epsilon - eps_k));
    let slope = 2.0 * aa / sa * (km.c_h - km.c_s * rq);
    Ok(SmallEta { gamma: (u * p_g * aa / sa).powi(2), u, u_bound, eta: gap / slope })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectorReport {
    pub n: usize,
    pub tau: f64,
    pub gap: f64,
    pub z1: f64,
    pub t_n_z1: f64,
    /// Power-series coefficients of `T_n(Z)` in `(H − E_g)/‖H‖`.
    pub b: Vec<f64>,
    pub a: Vec<f64>,
    pub c: Vec<f64>,
    pub omega_norm: f64,
    /// `2 / (z_1ⁿ + z_1⁻ⁿ)`.
    pub omega_bound: f64,
    /// `(a†a)²`.
    pub gamma: f64,
    pub gamma_bound: f64,
    /// Energy error of the composed operator applied to the reference.
    pub composed_error: f64,
    /// Energy error of the Gaussian factor alone.
    pub gaussian_error: f64,
}

/// Largest degree for which the alternating sums defining `b_l` stay accurate.
pub const MAX_PROJECTOR_DEGREE: usize = 30;

/// Coefficients `b_l` of `T_n(1 − (y − s)) = Σ b_l yˡ` with `s = (E_2 − E_0)/‖H‖`.
pub fn chebyshev_power_coefficients(n: usize, s: f64) -> Result<Vec<f64>> {
    if n > MAX_PROJECTOR_DEGREE {
        return Err(Error::InvalidArgument(format!("degree {n} above {MAX_PROJECTOR_DEGREE}")));
    }
    if n == 0 {
        return Ok(vec![1.0]);
    }
    let shift = -s;
    let mut b = Vec::with_capacity(n + 1);
    for l in 0..=n {
        let mut acc = KahanSum::default();
        for m in l..=n {
            let ln_mag = (n as f64).ln() + m as f64 * 2f64.ln() + ln_factorial(n + m - 1)
                - ln_factorial(n - m)
                - ln_factorial(2 * m)
                + ln_factorial(m)
                - ln_factorial(m - l)
                - ln_factorial(l);
            let mut term = ln_mag.exp() * if m % 2 == 0 { 1.0 } else { -1.0 };
            let p = (m - l) as i32;
            if p > 0 {
                term *= shift.powi(p);
            }
            acc.add(term);
        }
        b.push(acc.value());
    }
    Ok(b)
}

/// `n^{2l} T_n(z_1) / l!`, a bound on `|b_l|` from the log-derivative of `T_n` at `z ≥ 1`.
pub fn power_coefficient_bound(n: usize, l: usize, t_n_z1: f64) -> f64 {
    ((2 * l) as f64 * (n.max(1) as f64).ln() - ln_factorial(l)).exp() * t_n_z1
}

/// Composes `T_n(Z)/T_n(z_1) · e^{−(H−E_g)²τ²/2}` from the rescaled GP basis with `d = n + 1`.
pub fn compose_projector(n: usize, sd: &SpectralDecomposition, tau: f64, h_tot: f64) -> Result<ProjectorReport> {
    let h_norm = sd.max_abs_energy();
    let gap = sd.gap();
    if !(gap > 0.0) {
        return Err(Error::Precondition("projector needs a finite gap".into()));
    }
    let ratio = (n as f64).powi(3) / (std::f64::consts::E * h_norm * h_norm * tau * tau);
    if n > 0 && ratio >= 1.0 {
        return Err(Error::Precondition(format!("τ = {tau} too small for degree {n}: n³/(e‖H‖²τ²) = {ratio}")));
    }
    let eg = sd.ground_energy();
    let z1 = 1.0 + gap / h_norm;
    let t_n_z1 = chebyshev_t(n, z1);
    let b = chebyshev_power_coefficients(n, gap / h_norm)?;
    let steps = gp_min_steps(tau, h_tot);
    let c = (1..=n + 1).map(|k| gp_cost_ck(k, tau, h_tot, steps)).collect::<Result<Vec<_>>>()?;
    let a: Vec<f64> =
        (0..=n).map(|i| c[i] * b[i] / (t_n_z1 * h_norm.powi(i as i32))).collect();
    let aa: f64 = a.iter().map(|x| x * x).sum();
    let z_of = |e: f64| 1.0 - (e - eg - gap) / h_norm;
    let omega_norm = sd
        .energies()
        .iter()
        .filter(|&&e| e - eg > crate::exact::DEGENERACY_TOL)
        .map(|&e| (chebyshev_t(n, z_of(e)) / t_n_z1).abs())
        .fold(0.0, f64::max);
    let omega_bound = 2.0 / (z1.powi(n as i32) + z1.powi(-(n as i32)));
    let error_of = |weight: &dyn Fn(f64) -> f64| {
        let (mut num, mut den) = (0.0, 0.0);
        for &(e, w) in sd.active_levels() {
            let v = w * weight(e).powi(2);
            num += v * (e - eg);
            den += v;
        }
        num / den
    };
    let gauss = |e: f64| (-0.5 * (e - eg).powi(2) * tau * tau).exp();
    let composed_error = error_of(&|e| chebyshev_t(n, z_of(e)) / t_n_z1 * gauss(e));
    let gaussian_error = error_of(&gauss);
    Ok(ProjectorReport {
        n,
        tau,
        gap,
        z1,
        t_n_z1,
        b,
        a,
        c,
        omega_norm,
        omega_bound,
        gamma: aa * aa,
        gamma_bound: 4.0 / (1.0 - ratio),
        composed_error,
        gaussian_error,
    })
}

/// Krylov matrices of the rescaled GP basis whose solution reproduces the composed projector.
pub fn projector_matrices(n: usize, sd: &SpectralDecomposition, tau: f64, h_tot: f64) -> Result<KrylovMatrices> {
    let spec = BasisSpec::gaussian_power_rescaled(n + 1, sd.ground_energy(), tau, h_tot)?;
    build_matrices(&spec, sd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::Structure;
    use crate::linalg::chebyshev_recurrence;
    use nalgebra::{DMatrix, DVector};
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn scalar_pencil(p_g: f64, e_g: f64) -> KrylovMatrices {
        KrylovMatrices {
            h: DMatrix::from_element(1, 1, c(p_g * e_g)),
            s: DMatrix::from_element(1, 1, c(p_g)),
            structure: Structure::RealHankel,
            c_h: 1.0,
            c_s: 1.0,
            rescale: vec![1.0],
        }
    }

    #[test]
    fn table_rows() {
        let eta = Protocol::ImChebyshev.eta_for(5, 1e6, 0.1).unwrap();
        assert!((eta - 50.0 / 1e5f64.sqrt()).abs() < 1e-15);
        assert!((eta - 0.15811).abs() < 1e-5);
        let eta = Protocol::ImHoeffding.eta_for(2, 800.0, 0.08).unwrap();
        assert!((eta - (0.01 * 400f64.ln()).sqrt()).abs() < 1e-15);
        assert!((eta - 0.24478).abs() < 1e-5);
        let m = m_tot(Protocol::ImChebyshev, 5, 0.1, 0.01).unwrap();
        assert!((m / 2.5e10 - 1.0).abs() < 1e-12);
        assert!((Protocol::CmRealHankel.alpha(0.1) - 64.0 * 10f64.ln()).abs() < 1e-12);
        assert_eq!(Protocol::CmRealHankel.beta(5), 45.0);
        assert_eq!(Protocol::CmComplexToeplitz.beta(5), 81.0);
        assert_eq!(Protocol::CmRealSymmetric.beta(5), 150.0);
        assert!(Protocol::ImChebyshev.eta_for(2, 1.0, 1.0).is_err());
    }

    #[test]
    fn chebyshev_row_round_trips() {
        for d in 1..8 {
            let eta = 0.0137;
            let m = m_tot(Protocol::ImChebyshev, d, 0.1, eta).unwrap();
            let per = m / Protocol::ImChebyshev.measured_quantities(d);
            let back = Protocol::ImChebyshev.eta_for(d, per, 0.1).unwrap();
            assert!((back - eta).abs() < 1e-9 * eta);
        }
    }

    #[test]
    fn protocol_names_parse() {
        for p in Protocol::ALL {
            assert_eq!(p.name().parse::<Protocol>().unwrap(), p);
            assert_eq!(serde_json::to_string(&p).unwrap(), format!("\"{}\"", p.name()));
        }
        assert!("cm".parse::<Protocol>().is_err());
    }

    #[test]
    fn ideal_projector_root() {
        for (p_g, e_g, eps) in [(0.3, -1.0, 0.01), (0.9, -0.7, 0.2), (0.05, -1.0, 1e-4)] {
            let km = scalar_pencil(p_g, e_g);
            let eta = solve_eta(&km, e_g, eps).unwrap();
            let want = ideal_projector_eta(p_g, e_g, eps, 1.0, 1.0);
            assert!((eta - want).abs() < 1e-10 * want, "{eta} vs {want}");
            assert!((min_e_prime(&km, eta).unwrap() - e_g - eps).abs() < 1e-12);
        }
        // at E_g = −‖H‖ and small ε the root tends to p_g ε / (4‖H‖)
        let eta = solve_eta(&scalar_pencil(0.5, -1.0), -1.0, 1e-8).unwrap();
        assert!((eta / (0.5e-8 / 4.0) - 1.0).abs() < 1e-7);
        assert!((gamma(0.5, 1e-8, 1.0, 0.5e-8 / 4.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn solve_eta_preconditions() {
        let km = scalar_pencil(0.5, -1.0);
        assert!(matches!(solve_eta(&km, -1.0, 1.5), Err(Error::Precondition(_))));
        let two = KrylovMatrices {
            h: DMatrix::from_row_slice(2, 2, &[c(-0.5), c(-0.1), c(-0.1), c(0.2)]),
            s: DMatrix::identity(2, 2),
            structure: Structure::RealHankel,
            c_h: 1.0,
            c_s: 1.0,
            rescale: vec![1.0; 2],
        };
        let e_min = solve_exact(&two).unwrap().e_min;
        assert!(matches!(solve_eta(&two, e_min - 0.01, 0.005), Err(Error::NoSolution { .. })));
        let eta = solve_eta(&two, e_min - 0.01, 0.01 + 1e-9).unwrap();
        assert!(eta < 1e-6);
    }

    #[test]
    fn small_eta_ideal_case() {
        let km = scalar_pencil(0.4, -1.0);
        let s = gamma_small_eta(&km, -1.0, 1e-3, 0.4, 1.0).unwrap();
        assert!((s.gamma - 1.0).abs() < 1e-12);
        assert!((s.u - 1.0).abs() < 1e-12 && s.u <= s.u_bound + 1e-12);
    }

    #[test]
    fn small_eta_grows_near_singular_overlap() {
        let mut prev = 0.0;
        for delta in [1e-1f64, 1e-2, 1e-3, 1e-4] {
            // two nearly parallel basis vectors over a two-level spectrum
            let v1 = [1.0f64, 0.0];
            let v2 = [(1.0 - delta * delta).sqrt(), delta];
            let (w, e) = ([0.5, 0.5], [-1.0, 0.5]);
            let f = [v1, v2];
            let s = DMatrix::from_fn(2, 2, |k, q| c((0..2).map(|m| w[m] * f[k][m] * f[q][m]).sum()));
            let h = DMatrix::from_fn(2, 2, |k, q| c((0..2).map(|m| w[m] * e[m] * f[k][m] * f[q][m]).sum()));
            let km = KrylovMatrices { h, s, structure: Structure::Dense, c_h: 1.0, c_s: 1.0, rescale: vec![1.0; 2] };
            let g = gamma_small_eta(&km, -1.0, 0.05, 0.5, 1.0).unwrap().gamma;
            assert!(g > prev);
            prev = g;
        }
    }

    #[test]
    fn report_identities() {
        let km = scalar_pencil(0.3, -1.0);
        for p in [Protocol::ImChebyshev, Protocol::CmRealHankel, Protocol::CmRealSymmetric] {
            let r = CostReport::new(p, &km, -1.0, 0.02, 0.1, 0.3, 1.0).unwrap();
            assert!(r.identities_hold(1e-12));
            let (f1, b, g) = r.factor_cost();
            assert!((f1 * b * g / r.m_tot - 1.0).abs() < 1e-12);
            let half = CostReport::from_eta(p, 1, r.eta, 0.02, 0.0, 0.1, 0.15, 1.0).unwrap();
            assert!((half.factor1 / r.factor1 - 4.0).abs() < 1e-12);
        }
        assert!(matches!(
            CostReport::new(Protocol::CmComplexToeplitz, &km, -1.0, 0.02, 0.1, 0.3, 1.0),
            Err(Error::StructureMismatch { .. })
        ));
    }

    #[test]
    fn gp_optimised_total() {
        let base = m_tot(Protocol::CmRealHankel, 4, 0.1, 0.01).unwrap();
        assert!((m_tot_gp(4, 0.1, 0.01).unwrap() * 4.0 / base - 1.0).abs() < 1e-12);
    }

    /// Direct polynomial expansion of `T_n(1 − (y − s))` by the recurrence on coefficient vectors.
    fn expanded(n: usize, s: f64) -> Vec<f64> {
        let z = [1.0 + s, -1.0];
        let mul = |p: &[f64]| {
            let mut out = vec![0.0; p.len() + 1];
            for (i, &v) in p.iter().enumerate() {
                out[i] += z[0] * v;
                out[i + 1] += z[1] * v;
            }
            out
        };
        let mut prev = vec![1.0];
        let mut cur = vec![1.0 + s, -1.0];
        if n == 0 {
            return prev;
        }
        for _ in 1..n {
            let mut next = mul(&cur);
            for (i, x) in next.iter_mut().enumerate() {
                *x = 2.0 * *x - prev.get(i).copied().unwrap_or(0.0);
            }
            prev = cur;
            cur = next;
        }
        cur
    }

    #[test]
    fn power_coefficients_match_recurrence() {
        for n in 0..=12 {
            for s in [0.0, 0.05, 0.3] {
                let b = chebyshev_power_coefficients(n, s).unwrap();
                let want = expanded(n, s);
                for (l, (x, y)) in b.iter().zip(&want).enumerate() {
                    assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0), "n={n} s={s} l={l}: {x} vs {y}");
                    assert!(x.abs() <= power_coefficient_bound(n, l, chebyshev_t(n, 1.0 + s)) * (1.0 + 1e-12));
                }
            }
        }
        assert!(chebyshev_power_coefficients(31, 0.1).is_err());
    }

    #[test]
    fn first_order_coefficient_exceeds_linear_bound() {
        // b_1 = −T_n′(1) = −n² at zero gap, so |b_1| ≤ n·T_n(1) fails for n ≥ 2
        for n in 2..=8 {
            let b = chebyshev_power_coefficients(n, 0.0).unwrap();
            assert!((b[1] + (n * n) as f64).abs() < 1e-9);
            assert!(b[1].abs() > n as f64);
        }
    }

    #[test]
    fn chebyshev_forms_agree() {
        for n in 0..=60 {
            for z in [1.001, 1.2, -1.5, 3.0] {
                let (a, b) = (chebyshev_t(n, z), chebyshev_recurrence(n, z));
                assert!((a - b).abs() <= 1e-10 * b.abs());
            }
        }
    }

    #[test]
    fn bare_gaussian_projector() {
        let sd = SpectralDecomposition::new(vec![-1.0, -0.4, 0.2, 1.0], vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        let r = compose_projector(0, &sd, 3.0, 1.5).unwrap();
        assert_eq!(r.b, vec![1.0]);
        assert_eq!(r.a.len(), 1);
        assert!((r.a[0] - r.c[0]).abs() < 1e-15 && r.gamma <= r.gamma_bound);
        assert!((r.composed_error - r.gaussian_error).abs() < 1e-15);
        let r = compose_projector(3, &sd, 6.0, 1.5).unwrap();
        assert!(r.omega_norm <= r.omega_bound);
        assert!(r.composed_error <= r.gaussian_error);
        assert!(r.gamma <= r.gamma_bound);
        assert!(matches!(compose_projector(3, &sd, 1.0, 1.5), Err(Error::Precondition(_))));
    }

    #[test]
    fn composed_coefficients_solve_projector() {
        let sd = SpectralDecomposition::new(vec![-1.0, -0.4, 0.2, 1.0], vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        let (n, tau, h_tot) = (2, 4.0, 1.2);
        let r = compose_projector(n, &sd, tau, h_tot).unwrap();
        let km = projector_matrices(n, &sd, tau, h_tot).unwrap();
        let a = DVector::from_iterator(n + 1, r.a.iter().map(|&x| c(x)));
        let (ha, sa) = quadratic_forms(&km, &a);
        assert!((ha / sa - sd.ground_energy() - r.composed_error).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn eta_is_inverse_root_m(p in 0usize..5, d in 1usize..12, m in 1.0f64..1e9, kappa in 0.001f64..0.9) {
            let p = Protocol::ALL[p];
            let e1 = p.eta_for(d, m, kappa).unwrap();
            let e4 = p.eta_for(d, 4.0 * m, kappa).unwrap();
            prop_assert!((e1 / e4 - 2.0).abs() < 1e-12);
            let back = p.m_for_eta(d, kappa, e1).unwrap();
            prop_assert!((back / m - 1.0).abs() < 1e-12);
            let q1 = m_tot(p, d, kappa, e1).unwrap();
            let q2 = m_tot(p, d, kappa, 2.0 * e1).unwrap();
            prop_assert!((q1 / q2 - 4.0).abs() < 1e-12);
        }

        #[test]
        fn gamma_scaling(p_g in 1e-3f64..1.0, eps in 1e-6f64..0.5, eta in 1e-8f64..1.0) {
            let g = gamma(p_g, eps, 1.0, eta);
            prop_assert!((g / gamma(p_g, eps, 1.0, 2.0 * eta) - 4.0).abs() < 1e-10);
            prop_assert!((gamma(p_g, eps, 1.0, p_g * eps / 4.0) - 1.0).abs() < 1e-12);
        }
    }
}
