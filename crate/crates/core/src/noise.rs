//! Gaussian statistical-noise model for measured Krylov matrices, empirical
//! necessary measurement numbers, and sufficiency checks of the cost theory.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bases::{KrylovMatrices, Structure};
use crate::cost::{solve_eta, Protocol};
use crate::error::{Error, Result};
use crate::solver::{solve_regularised, solve_thresholded};

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseDraw {
    pub h_hat: DMatrix<Complex64>,
    pub s_hat: DMatrix<Complex64>,
    pub protocol: Protocol,
    pub m: f64,
    pub seed: u64,
}

impl NoiseDraw {
    /// Noisy matrices with the shift constants of the noiseless pencil.
    pub fn pencil(&self, km: &KrylovMatrices) -> KrylovMatrices {
        KrylovMatrices { h: self.h_hat.clone(), s: self.s_hat.clone(), ..km.clone() }
    }
}

/// Independent stream `index` of the generator seeded by `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn normal(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    z * std
}

/// Hermitian noise matrix with the correlation pattern of the protocol.
fn noise_matrix(d: usize, protocol: Protocol, std: f64, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let mut m = DMatrix::<Complex64>::zeros(d, d);
    match protocol {
        Protocol::CmRealHankel => {
            let g: Vec<f64> = (0..2 * d - 1).map(|_| normal(rng, std)).collect();
            for k in 0..d {
                for q in 0..d {
                    m[(k, q)] = Complex64::new(g[k + q], 0.0);
                }
            }
        }
        Protocol::CmRealSymmetric => {
            for q in 0..d {
                for k in 0..=q {
                    let v = Complex64::new(normal(rng, std), 0.0);
                    m[(k, q)] = v;
                    m[(q, k)] = v;
                }
            }
        }
        Protocol::CmComplexToeplitz => {
            let mut t = vec![Complex64::new(normal(rng, std), 0.0)];
            for _ in 1..d {
                t.push(Complex64::new(normal(rng, std), normal(rng, std)));
            }
            for k in 0..d {
                for q in k..d {
                    m[(k, q)] = t[q - k];
                    m[(q, k)] = t[q - k].conj();
                }
            }
        }
        Protocol::ImChebyshev | Protocol::ImHoeffding => {
            for q in 0..d {
                m[(q, q)] = Complex64::new(normal(rng, std), 0.0);
                for k in 0..q {
                    let v = Complex64::new(normal(rng, std), normal(rng, std));
                    m[(k, q)] = v;
                    m[(q, k)] = v.conj();
                }
            }
        }
    }
    m
}

/// Adds Gaussian noise of standard deviation `C/√M` per measured real quantity.
pub fn draw_noisy(km: &KrylovMatrices, protocol: Protocol, m: f64, seed: u64) -> Result<NoiseDraw> {
    draw_with(km, protocol, m, seed, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn draw_with(km: &KrylovMatrices, protocol: Protocol, m: f64, seed: u64, rng: &mut ChaCha8Rng) -> Result<NoiseDraw> {
    if !(m > 0.0) {
        return Err(Error::InvalidArgument(format!("M = {m} must be positive")));
    }
    if !protocol.supports(km.structure) {
        return Err(Error::StructureMismatch {
            protocol: protocol.name().into(),
            structure: format!("{:?}", km.structure),
        });
    }
    let d = km.d();
    let root = m.sqrt();
    let h_hat = &km.h + noise_matrix(d, protocol, km.c_h / root, rng);
    let s_hat = &km.s + noise_matrix(d, protocol, km.c_s / root, rng);
    Ok(NoiseDraw { h_hat, s_hat, protocol, m, seed })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaRule {
    /// Regularised solve with the protocol's tabulated η.
    Tabulated,
    /// Thresholded solve discarding overlap eigenvalues below `10 C_S / √M`.
    Threshold10,
}

impl EtaRule {
    pub fn name(self) -> &'static str {
        match self {
            EtaRule::Tabulated => "tabulated",
            EtaRule::Threshold10 => "threshold10",
        }
    }
}

/// Output energy of one noisy trial, `None` if the solve failed.
fn trial_energy(km: &KrylovMatrices, protocol: Protocol, m: f64, kappa: f64, rule: EtaRule, seed: u64, trial: u64) -> Result<Option<f64>> {
    let draw = draw_with(km, protocol, m, seed, &mut stream(seed, trial))?;
    let noisy = draw.pencil(km);
    let sol = match rule {
        EtaRule::Tabulated => solve_regularised(&noisy, protocol.eta_for(km.d(), m, kappa)?),
        EtaRule::Threshold10 => solve_thresholded(&noisy, 10.0 * km.c_s / m.sqrt()),
    };
    Ok(sol.ok().map(|s| s.e_min))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub m: f64,
    pub successes: usize,
    pub trials: usize,
    /// Per-trial output energies; `None` where the solver found no direction.
    pub energies: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NecessaryM {
    /// Smallest sufficient grid point; `None` if the ceiling was reached.
    pub m_necessary: Option<f64>,
    pub epsilon: f64,
    pub kappa: f64,
    pub trials: usize,
    pub rule: EtaRule,
    pub grid: Vec<GridPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub m_min: f64,
    pub m_max: f64,
    pub ratio: f64,
    pub seed: u64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { m_min: 1.0, m_max: 1e24, ratio: 10f64.sqrt(), seed: 0 }
    }
}

/// Successes needed out of `trials` for failure probability at most `κ`.
pub fn pass_bar(kappa: f64, trials: usize) -> usize {
    ((1.0 - kappa) * trials as f64 - 1e-9).ceil() as usize
}

/// Scans a geometric `M` grid upward for the first point where at least
/// `(1−κ)·trials` outputs land within `ε` of `E_g`.
#[allow(clippy::too_many_arguments)]
pub fn necessary_measurement(
    km: &KrylovMatrices,
    protocol: Protocol,
    e_g: f64,
    epsilon: f64,
    kappa: f64,
    trials: usize,
    rule: EtaRule,
    scan: ScanConfig,
) -> Result<NecessaryM> {
    if trials == 0 || !(epsilon > 0.0) || !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::InvalidArgument("need trials ≥ 1, ε > 0, κ in (0, 1)".into()));
    }
    if !(scan.ratio > 1.0) || !(scan.m_min > 0.0) || !(scan.m_max >= scan.m_min) {
        return Err(Error::InvalidArgument("scan grid needs ratio > 1 and 0 < m_min ≤ m_max".into()));
    }
    if !protocol.supports(km.structure) {
        return Err(Error::StructureMismatch { protocol: protocol.name().into(), structure: format!("{:?}", km.structure) });
    }
    let bar = pass_bar(kappa, trials);
    let mut grid = Vec::new();
    let mut m_necessary = None;
    let mut i = 0;
    loop {
        let m = scan.m_min * scan.ratio.powi(i);
        if m > scan.m_max * (1.0 + 1e-12) {
            break;
        }
        let point_seed = scan.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let energies = (0..trials as u64)
            .into_par_iter()
            .map(|t| trial_energy(km, protocol, m, kappa, rule, point_seed, t))
            .collect::<Result<Vec<_>>>()?;
        let successes = energies.iter().filter(|e| e.is_some_and(|e| (e - e_g).abs() <= epsilon)).count();
        grid.push(GridPoint { m, successes, trials, energies });
        if successes >= bar {
            m_necessary = Some(m);
            break;
        }
        i += 1;
    }
    Ok(NecessaryM { m_necessary, epsilon, kappa, trials, rule, grid })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sufficiency {
    pub eta: f64,
    pub m: f64,
    pub trials: usize,
    /// Trials with `Ê ∈ [E_g, E_g + ε]`.
    pub in_window: usize,
    /// Trials with `Ê ≥ E_g`.
    pub variational: usize,
    pub energies: Vec<Option<f64>>,
}

impl Sufficiency {
    pub fn fraction_in_window(&self) -> f64 {
        self.in_window as f64 / self.trials as f64
    }

    pub fn fraction_variational(&self) -> f64 {
        self.variational as f64 / self.trials as f64
    }
}

/// Runs trials at the measurement number predicted by the cost theory.
pub fn sufficiency_check(
    km: &KrylovMatrices,
    protocol: Protocol,
    e_g: f64,
    epsilon: f64,
    kappa: f64,
    trials: usize,
    seed: u64,
) -> Result<Sufficiency> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let eta = solve_eta(km, e_g, epsilon)?;
    let m = protocol.m_for_eta(km.d(), kappa, eta)?;
    let energies = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<Option<f64>> {
            let draw = draw_with(km, protocol, m, seed, &mut stream(seed, t))?;
            Ok(solve_regularised(&draw.pencil(km), eta).ok().map(|s| s.e_min))
        })
        .collect::<Result<Vec<_>>>()?;
    let in_window = energies.iter().filter(|e| e.is_some_and(|e| e >= e_g && e <= e_g + epsilon)).count();
    let variational = energies.iter().filter(|e| e.is_some_and(|e| e >= e_g)).count();
    Ok(Sufficiency { eta, m, trials, in_window, variational, energies })
}

/// Whether `m - reference` has the correlation pattern of a structure, up to rounding.
pub fn noise_has_structure(m: &DMatrix<Complex64>, reference: &DMatrix<Complex64>, structure: Structure) -> bool {
    crate::bases::check_structure(&(m - reference), structure, 1e-12)
}
