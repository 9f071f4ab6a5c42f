//! Monte Carlo evaluation of LCU expressions: the leading-order-rotation
//! expansion of real-time evolution, importance sampling of the GP integral
//! representation, and simulated Hadamard tests.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rand::Rng;

use crate::bases::{gp_cost_ck, gp_cost_density, gp_cost_support, gp_min_steps};
use crate::error::{Error, Result};
use crate::linalg::{inner, norm};
use crate::models::ReferenceState;
use crate::pauli::{PauliString, PauliSum};
use crate::special::hermite;

/// `c(Δt) = √(1+h²Δt²) + e^{h|Δt|} − 1 − h|Δt|`.
pub fn cost_c(dt: f64, h_tot: f64) -> f64 {
    let x = h_tot * dt.abs();
    (1.0 + x * x).sqrt() + (x.exp_m1() - x)
}

/// `ln c(Δt)`, accurate for small steps.
pub fn cost_c_ln(dt: f64, h_tot: f64) -> f64 {
    let x = h_tot * dt.abs();
    let excess = x * x / ((1.0 + x * x).sqrt() + 1.0) + (x.exp_m1() - x);
    excess.ln_1p()
}

/// Probability of the rotation branch.
pub fn prob_leading(dt: f64, h_tot: f64) -> f64 {
    let x = h_tot * dt.abs();
    (1.0 + x * x).sqrt() / cost_c(dt, h_tot)
}

/// Probability of the Taylor-tail branch.
pub fn prob_tail(dt: f64, h_tot: f64) -> f64 {
    let x = h_tot * dt.abs();
    (x.exp_m1() - x) / cost_c(dt, h_tot)
}

/// Rotation angle `arctan(h_tot Δt)`.
pub fn rotation_angle(dt: f64, h_tot: f64) -> f64 {
    (h_tot * dt).atan()
}

/// `β_j(Δt) = |h_j| Δt / sin φ`, with the `Δt → 0` limit `|h_j| / h_tot`.
pub fn rotation_weight(h_j: f64, dt: f64, h_tot: f64) -> f64 {
    let x = h_tot * dt;
    if x.abs() < 1e-8 {
        return h_j.abs() / h_tot * (1.0 + 0.5 * x * x);
    }
    h_j.abs() * dt / rotation_angle(dt, h_tot).sin()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Factor {
    /// `e^{−iθσ}`.
    Rotation { theta: f64, pauli: PauliString },
    /// Phase-free Pauli string.
    Pauli(PauliString),
}

impl Factor {
    fn apply(&self, state: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        match *self {
            Factor::Pauli(p) => p.apply_in_place(state),
            Factor::Rotation { theta, pauli } => {
                if theta == 0.0 {
                    return;
                }
                scratch.clear();
                scratch.extend_from_slice(state);
                pauli.apply_in_place(scratch);
                let (c, s) = (theta.cos(), theta.sin());
                let mis = Complex64::new(0.0, -s);
                for (a, b) in state.iter_mut().zip(scratch.iter()) {
                    *a = *a * c + b * mis;
                }
            }
        }
    }

    fn adjoint(&self) -> Self {
        match *self {
            Factor::Rotation { theta, pauli } => Factor::Rotation { theta: -theta, pauli },
            p => p,
        }
    }
}

/// A sampled term `q_s U_s` together with its importance weight `q_s / Pr(s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LcuTerm {
    /// The LCU coefficient of the sampled unitary.
    pub coefficient: Complex64,
    /// Coefficient divided by the sampling probability; its modulus is the cost factor.
    pub weight: Complex64,
    /// `U = F_0 F_1 ⋯`; applied to a state right to left.
    pub factors: Vec<Factor>,
}

impl LcuTerm {
    pub fn identity() -> Self {
        Self { coefficient: Complex64::new(1.0, 0.0), weight: Complex64::new(1.0, 0.0), factors: Vec::new() }
    }

    /// `U |ψ⟩`.
    pub fn apply(&self, state: &[Complex64]) -> Vec<Complex64> {
        let mut out = state.to_vec();
        let mut scratch = Vec::with_capacity(state.len());
        for f in self.factors.iter().rev() {
            f.apply(&mut out, &mut scratch);
        }
        out
    }

    /// `U† |ψ⟩`.
    pub fn apply_adjoint(&self, state: &[Complex64]) -> Vec<Complex64> {
        let mut out = state.to_vec();
        let mut scratch = Vec::with_capacity(state.len());
        for f in &self.factors {
            f.adjoint().apply(&mut out, &mut scratch);
        }
        out
    }

    fn then(&mut self, other: LcuTerm) {
        self.coefficient *= other.coefficient;
        self.weight *= other.weight;
        self.factors.extend(other.factors);
    }
}

/// Alias table over `|h_j|` is unnecessary at these sizes; a cumulative scan suffices.
fn pick_term<R: Rng + ?Sized>(h: &PauliSum, rng: &mut R) -> usize {
    let target = rng.random::<f64>() * h.h_tot();
    let mut acc = 0.0;
    for (j, (c, _)) in h.terms().iter().enumerate() {
        acc += c.abs();
        if target < acc {
            return j;
        }
    }
    h.len() - 1
}

/// Draws `k ≥ 2` with probability `∝ λ^k / k!` by sequential inversion.
fn truncated_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<usize> {
    let tail = lambda.exp_m1() - lambda;
    if !(tail > 0.0) {
        return Err(Error::Numerical(format!("Poisson tail vanishes at λ = {lambda}")));
    }
    let mut u = rng.random::<f64>() * tail;
    let mut term = lambda * lambda / 2.0;
    let mut k = 2;
    while u >= term && k < 1_000_000 {
        u -= term;
        k += 1;
        term *= lambda / k as f64;
        if term == 0.0 {
            break;
        }
    }
    Ok(k)
}

/// One leading-order-rotation step for `e^{−iHΔt}`.
pub fn lor_sample<R: Rng + ?Sized>(h: &PauliSum, dt: f64, rng: &mut R) -> Result<LcuTerm> {
    if !dt.is_finite() {
        return Err(Error::InvalidArgument("time step must be finite".into()));
    }
    let h_tot = h.h_tot();
    let c = cost_c(dt, h_tot);
    if rng.random::<f64>() < prob_leading(dt, h_tot) {
        let j = pick_term(h, rng);
        let (h_j, sigma) = h.terms()[j];
        let theta = h_j.signum() * rotation_angle(dt, h_tot);
        let beta = rotation_weight(h_j, dt, h_tot);
        return Ok(LcuTerm {
            coefficient: Complex64::new(beta, 0.0),
            weight: Complex64::new(c, 0.0),
            factors: vec![Factor::Rotation { theta, pauli: sigma }],
        });
    }
    let k = truncated_poisson(h_tot * dt.abs(), rng)?;
    let mut product = PauliString::IDENTITY;
    let mut coefficient = Complex64::new(1.0, 0.0);
    let mut phase = Complex64::new(1.0, 0.0);
    let minus_i = Complex64::new(0.0, -1.0);
    for a in 1..=k {
        let j = pick_term(h, rng);
        let (h_j, sigma) = h.terms()[j];
        coefficient *= minus_i * (h_j * dt) / a as f64;
        phase *= minus_i * (h_j * dt).signum();
        product = product.mul(&sigma);
    }
    let folded = product.phase();
    Ok(LcuTerm {
        coefficient: coefficient * folded,
        weight: phase * folded * c,
        factors: vec![Factor::Pauli(product.canonical())],
    })
}

/// `N` leading-order-rotation steps of `e^{−iHt}`.
pub fn rte_sample<R: Rng + ?Sized>(h: &PauliSum, n_steps: u64, t: f64, rng: &mut R) -> Result<LcuTerm> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("step count must be at least 1".into()));
    }
    let dt = t / n_steps as f64;
    let mut term = LcuTerm::identity();
    for _ in 0..n_steps {
        term.then(lor_sample(h, dt, rng)?);
    }
    Ok(term)
}

/// Tabulated inverse CDF of the GP time density for one basis index.
#[derive(Clone, Debug)]
struct TimeTable {
    u: Vec<f64>,
    cdf: Vec<f64>,
}

pub const TIME_GRID_POINTS: usize = 4096;

/// Samples GP basis functions `f_k`, `k = 1..=k_max`, via their LCU integral.
#[derive(Clone, Debug)]
pub struct GpSampler {
    pub tau: f64,
    pub e0: f64,
    pub h_tot: f64,
    pub n_steps: u64,
    costs: Vec<f64>,
    tables: Vec<TimeTable>,
}

impl GpSampler {
    pub fn new(tau: f64, e0: f64, h_tot: f64, n_steps: u64, k_max: usize) -> Result<Self> {
        if n_steps < gp_min_steps(tau, h_tot) {
            return Err(Error::Precondition(format!(
                "N = {n_steps} below ⌈4e·h_tot²τ²⌉ = {}",
                gp_min_steps(tau, h_tot)
            )));
        }
        let mut costs = Vec::with_capacity(k_max);
        let mut tables = Vec::with_capacity(k_max);
        for k in 1..=k_max {
            costs.push(gp_cost_ck(k, tau, h_tot, n_steps)?);
            let upper = gp_cost_support(k, tau, h_tot, n_steps);
            let u: Vec<f64> = (0..TIME_GRID_POINTS)
                .map(|i| -upper + 2.0 * upper * i as f64 / (TIME_GRID_POINTS - 1) as f64)
                .collect();
            let dens: Vec<f64> = u.iter().map(|&x| gp_cost_density(k, tau, h_tot, n_steps, x)).collect();
            let mut cdf = vec![0.0; TIME_GRID_POINTS];
            for i in 1..TIME_GRID_POINTS {
                cdf[i] = cdf[i - 1] + 0.5 * (dens[i] + dens[i - 1]) * (u[i] - u[i - 1]);
            }
            let total = cdf[TIME_GRID_POINTS - 1];
            for v in &mut cdf {
                *v /= total;
            }
            tables.push(TimeTable { u, cdf });
        }
        Ok(Self { tau, e0, h_tot, n_steps, costs, tables })
    }

    pub fn k_max(&self) -> usize {
        self.costs.len()
    }

    /// Cost integral `c_k` used for normalisation.
    pub fn cost(&self, k: usize) -> f64 {
        self.costs[k - 1]
    }

    /// Evolution time `t` drawn from `p_{τ,k}`.
    pub fn sample_time<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> f64 {
        let table = &self.tables[k - 1];
        let r: f64 = rng.random();
        let i = table.cdf.partition_point(|&c| c < r).clamp(1, TIME_GRID_POINTS - 1);
        let (c0, c1) = (table.cdf[i - 1], table.cdf[i]);
        let frac = if c1 > c0 { (r - c0) / (c1 - c0) } else { 0.5 };
        let u = table.u[i - 1] + frac * (table.u[i] - table.u[i - 1]);
        SQRT_2 * self.tau * u
    }

    /// CDF of the tabulated time distribution at `t`.
    pub fn time_cdf(&self, k: usize, t: f64) -> f64 {
        let table = &self.tables[k - 1];
        let u = t / (SQRT_2 * self.tau);
        let i = table.u.partition_point(|&x| x < u);
        if i == 0 {
            return 0.0;
        }
        if i >= TIME_GRID_POINTS {
            return 1.0;
        }
        let frac = (u - table.u[i - 1]) / (table.u[i] - table.u[i - 1]);
        table.cdf[i - 1] + frac * (table.cdf[i] - table.cdf[i - 1])
    }

    /// Draws one term of the LCU expression of `f_k`.
    pub fn basis_gen<R: Rng + ?Sized>(&self, h: &PauliSum, k: usize, rng: &mut R) -> Result<LcuTerm> {
        if k == 0 || k > self.k_max() {
            return Err(Error::InvalidArgument(format!("index {k} outside 1..={}", self.k_max())));
        }
        let t = self.sample_time(k, rng);
        let mut term = rte_sample(h, self.n_steps, t, rng)?;
        let n = (k - 1) as i32;
        let u = t / (SQRT_2 * self.tau);
        let g = (-0.5 * t * t / (self.tau * self.tau)).exp() / (self.tau * (2.0 * PI).sqrt());
        let scale = 2f64.powf(0.5 * n as f64) * self.tau.powi(n);
        let prefactor = Complex64::new(0.0, 1.0).powi(n) * (hermite(k - 1, u) * g / scale)
            * Complex64::from_polar(1.0, self.e0 * t);
        term.coefficient *= prefactor;
        let phase = if prefactor.norm() > 0.0 { prefactor / prefactor.norm() } else { Complex64::new(1.0, 0.0) };
        let rte_scale = term.weight.norm();
        let weight_phase = if rte_scale > 0.0 { term.weight / rte_scale } else { Complex64::new(1.0, 0.0) };
        term.weight = weight_phase * phase * self.cost(k);
        Ok(term)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HadamardOutcome {
    pub mu_x: i8,
    pub mu_y: i8,
}

/// `⟨φ| (left)† right |φ⟩` after applying the sampled unitaries.
fn overlap(left: &[Complex64], right: &[Complex64]) -> Result<Complex64> {
    for v in [left, right] {
        let drift = (norm(v) - 1.0).abs();
        if drift > 1e-9 {
            return Err(Error::NonUnitary { drift });
        }
    }
    Ok(inner(left, right))
}

/// Samples the two ancilla outcomes of a Hadamard test with `⟨φ|U|φ⟩ = z`.
pub fn hadamard_shots<R: Rng + ?Sized>(z: Complex64, rng: &mut R) -> HadamardOutcome {
    let mu_x = if rng.random::<f64>() < 0.5 * (1.0 + z.re) { 1 } else { -1 };
    let mu_y = if rng.random::<f64>() < 0.5 * (1.0 + z.im) { 1 } else { -1 };
    HadamardOutcome { mu_x, mu_y }
}

/// Hadamard test of a sampled unitary on the reference state.
pub fn hadamard_test<R: Rng + ?Sized>(reference: &ReferenceState, term: &LcuTerm, rng: &mut R) -> Result<HadamardOutcome> {
    let phi = reference.amplitudes();
    let z = overlap(phi, &term.apply(phi))?;
    Ok(hadamard_shots(z, rng))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntryKind {
    H,
    S,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntryEstimate {
    pub value: Complex64,
    pub m: u64,
    pub cost_factor: f64,
    /// Sample variance of the per-shot variable `C_A e^{iθ}(μ^X + iμ^Y)`.
    pub shot_variance: f64,
}

/// Monte Carlo estimate of `H_kq` or `S_kq` of the unrescaled GP basis.
#[allow(clippy::too_many_arguments)]
pub fn estimate_entry<R: Rng + ?Sized>(
    kind: EntryKind,
    sampler: &GpSampler,
    k: usize,
    q: usize,
    h: &PauliSum,
    reference: &ReferenceState,
    m: u64,
    rng: &mut R,
) -> Result<EntryEstimate> {
    if m == 0 {
        return Err(Error::InvalidArgument("shot count must be positive".into()));
    }
    if reference.amplitudes().len() != h.dim() {
        return Err(Error::InvalidArgument("reference dimension mismatch".into()));
    }
    let cost_factor = match kind {
        EntryKind::H => h.h_tot() * sampler.cost(k) * sampler.cost(q),
        EntryKind::S => sampler.cost(k) * sampler.cost(q),
    };
    let phi = reference.amplitudes();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut sum_sq = 0.0;
    for _ in 0..m {
        let (sign, sigma) = match kind {
            EntryKind::H => {
                let (c, p) = h.terms()[pick_term(h, rng)];
                (c.signum(), Some(p))
            }
            EntryKind::S => (1.0, None),
        };
        let vk = sampler.basis_gen(h, k, rng)?;
        let vq = sampler.basis_gen(h, q, rng)?;
        let left = vk.apply(phi);
        let mut right = vq.apply(phi);
        if let Some(p) = sigma {
            p.apply_in_place(&mut right);
        }
        let z = overlap(&left, &right)?;
        let shots = hadamard_shots(z, rng);
        let w = vk.weight.conj() * vq.weight * sign;
        let phase = if w.norm() > 0.0 { w / w.norm() } else { Complex64::new(1.0, 0.0) };
        let x = phase * Complex64::new(shots.mu_x as f64, shots.mu_y as f64) * cost_factor;
        sum += x;
        sum_sq += x.norm_sqr();
    }
    let mf = m as f64;
    let value = sum / mf;
    let shot_variance = if m > 1 { (sum_sq - mf * value.norm_sqr()) / (mf - 1.0) } else { 0.0 };
    Ok(EntryEstimate { value, m, cost_factor, shot_variance })
}
