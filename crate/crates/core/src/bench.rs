//! Benchmark harness: instance preparation and admission, per-family
//! parameter choice, and the record producers behind each CLI command.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bases::{
    build_matrices, grid_search_param, power_projector_error, select_tau, subspace_error, BasisSpec, Family,
    KrylovMatrices,
};
use crate::cost::{compose_projector, m_tot, solve_eta, CostReport, Protocol};
use crate::error::{Error, Result};
use crate::exact::{cached_diagonalise, diagonalise, SpectralDecomposition};
use crate::lattice::LatticeKind;
use crate::models::{normalise, LatticeConfig, ModelConfig, ModelKind, ReferenceState};
use crate::noise::{necessary_measurement, stream, EtaRule, NecessaryM, ScanConfig};
use crate::pauli::PauliSum;

/// Lowest admitted P-basis subspace error.
pub const MIN_SUBSPACE_ERROR: f64 = 1e-9;
/// Highest admitted P-basis subspace error.
pub const MAX_SUBSPACE_ERROR: f64 = 1e-2;
/// Lowest admitted ground-state overlap.
pub const MIN_OVERLAP: f64 = 1e-3;
/// Half-width of the band of GP reference energies.
pub const E0_BAND: f64 = 0.1;

/// A model normalised to `‖H‖₂ = 1` with its reference spectral decomposition.
#[derive(Clone, Debug)]
pub struct PreparedModel {
    pub config: ModelConfig,
    pub hamiltonian: PauliSum,
    pub reference: ReferenceState,
    /// Spectral norm before normalisation.
    pub raw_norm: f64,
    pub sd: SpectralDecomposition,
}

impl PreparedModel {
    pub fn h_tot(&self) -> f64 {
        self.hamiltonian.h_tot()
    }

    pub fn e_g(&self) -> f64 {
        self.sd.ground_energy()
    }

    pub fn label(&self) -> String {
        model_label(&self.config)
    }
}

pub fn model_label(config: &ModelConfig) -> String {
    let model = match config.model {
        ModelKind::Heisenberg => "heisenberg",
        ModelKind::Hubbard => "hubbard",
    };
    let lattice = match config.lattice.kind {
        LatticeKind::Chain => "chain",
        LatticeKind::Ladder => "ladder",
        LatticeKind::RandomGraph => "random",
    };
    match config.lattice.seed {
        Some(s) if config.lattice.kind == LatticeKind::RandomGraph => {
            format!("{model}-{lattice}-{}-s{s}", config.lattice.size)
        }
        _ => format!("{model}-{lattice}-{}", config.lattice.size),
    }
}

/// Builds, normalises and diagonalises a model, optionally through an on-disk cache.
pub fn prepare_model(config: &ModelConfig, cache_dir: Option<&Path>) -> Result<PreparedModel> {
    let model = config.build()?;
    let key = format!("{}|J={}|U={:?}|v1", model_label(config), config.j, config.u);
    let raw = match cache_dir {
        Some(dir) => cached_diagonalise(dir, &key, &model.hamiltonian, &model.reference)?,
        None => diagonalise(&model.hamiltonian, &model.reference)?,
    };
    let raw_norm = raw.max_abs_energy();
    let sd = raw.scaled(1.0 / raw_norm)?;
    let hamiltonian = normalise(&model.hamiltonian, raw_norm)?;
    Ok(PreparedModel { config: config.clone(), hamiltonian, reference: model.reference, raw_norm, sd })
}

pub fn standard_config(model: ModelKind, kind: LatticeKind, size: usize, seed: Option<u64>) -> ModelConfig {
    ModelConfig { model, lattice: LatticeConfig { kind, size, seed }, j: 1.0, u: None }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Admission {
    pub d: usize,
    pub epsilon_k_p: f64,
    pub p_g: f64,
    pub admitted: bool,
    pub reason: Option<String>,
}

/// P-basis subspace error with `E_0 = E_g + 1`.
pub fn power_subspace_error(pm: &PreparedModel, d: usize) -> Result<f64> {
    let km = build_matrices(&BasisSpec::power(d, pm.e_g() + 1.0, pm.h_tot()), &pm.sd)?;
    subspace_error(&km, pm.e_g())
}

pub fn admit(pm: &PreparedModel, d: usize) -> Result<Admission> {
    let eps = power_subspace_error(pm, d)?;
    let p_g = pm.sd.p_g();
    let reason = if p_g < MIN_OVERLAP {
        Some(format!("p_g = {p_g:.3e} below {MIN_OVERLAP:e}"))
    } else if eps < MIN_SUBSPACE_ERROR {
        Some(format!("ε_K(P) = {eps:.3e} below {MIN_SUBSPACE_ERROR:e}"))
    } else if eps > MAX_SUBSPACE_ERROR {
        Some(format!("ε_K(P) = {eps:.3e} above {MAX_SUBSPACE_ERROR:e}"))
    } else {
        None
    };
    Ok(Admission { d, epsilon_k_p: eps, p_g, admitted: reason.is_none(), reason })
}

/// Basis of one family with its parameters chosen for an instance.
#[derive(Clone, Debug)]
pub struct FamilySetup {
    pub family: Family,
    pub spec: BasisSpec,
    pub km: KrylovMatrices,
    pub epsilon_k: f64,
    /// τ hit the admissible range boundary (GP only).
    pub tau_clipped: bool,
}

/// Chooses `E_0`, `τ`, `Δt`, `ΔE` for a family; `gp_e0` overrides the GP reference energy.
pub fn configure_family(family: Family, pm: &PreparedModel, d: usize, gp_e0: Option<f64>) -> Result<FamilySetup> {
    let eg = pm.e_g();
    let h_tot = pm.h_tot();
    let sd = &pm.sd;
    let eps_b = || power_projector_error(sd, d);
    let mut tau_clipped = false;
    let spec = match family {
        Family::P => BasisSpec::power(d, eg + 1.0, h_tot),
        Family::CP => BasisSpec::chebyshev(d, h_tot),
        Family::IP => BasisSpec::inverse_power(d, eg - 1.0, h_tot),
        Family::GP => {
            let choice = select_tau(Family::GP, sd, d, eps_b())?;
            tau_clipped = choice.clipped;
            BasisSpec::gaussian_power_rescaled(d, gp_e0.unwrap_or(eg), choice.tau, h_tot)?
        }
        Family::ITE => BasisSpec::imaginary_time(d, eg, select_tau(Family::ITE, sd, d, eps_b())?.tau, h_tot),
        Family::RTE => BasisSpec::real_time(d, eg, grid_search_param(Family::RTE, sd, d, h_tot, None)?.value, h_tot),
        Family::F => {
            let tau = select_tau(Family::F, sd, d, eps_b())?.tau;
            let de = grid_search_param(Family::F, sd, d, h_tot, Some(tau))?.value;
            BasisSpec::filter(d, eg, tau, de, h_tot)
        }
    };
    let km = build_matrices(&spec, sd)?;
    let epsilon_k = subspace_error(&km, eg)?;
    Ok(FamilySetup { family, spec, km, epsilon_k, tau_clipped })
}

/// GP reference energy drawn uniformly from `[E_g − 0.1, E_g + 0.1]`.
pub fn random_gp_e0(e_g: f64, seed: u64, index: u64) -> f64 {
    e_g + stream(seed, index).random_range(-E0_BAND..=E0_BAND)
}

/// Bench outcome for one family at one target error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub family: Family,
    pub d: usize,
    pub epsilon: f64,
    pub epsilon_k: f64,
    pub epsilon_k_p: f64,
    pub p_g: f64,
    pub e0: f64,
    pub tau: Option<f64>,
    pub delta_t: Option<f64>,
    pub delta_e: Option<f64>,
    pub protocol: Protocol,
    pub eta: Option<f64>,
    /// `+∞` when the target error is below the family's subspace error.
    pub gamma: f64,
    pub m_tot: Option<f64>,
    pub status: String,
    pub identities_ok: bool,
}

/// Solves the bound equation for one family and assembles its cost record.
pub fn run_record(
    instance: &str,
    setup: &FamilySetup,
    pm: &PreparedModel,
    epsilon: f64,
    epsilon_k_p: f64,
    kappa: f64,
) -> RunRecord {
    let protocol = Protocol::for_structure(setup.km.structure);
    let p_g = pm.sd.p_g();
    let mut rec = RunRecord {
        instance: instance.to_string(),
        family: setup.family,
        d: setup.spec.d,
        epsilon,
        epsilon_k: setup.epsilon_k,
        epsilon_k_p,
        p_g,
        e0: setup.spec.e0,
        tau: setup.spec.tau,
        delta_t: setup.spec.delta_t,
        delta_e: setup.spec.delta_e,
        protocol,
        eta: None,
        gamma: f64::INFINITY,
        m_tot: None,
        status: String::new(),
        identities_ok: true,
    };
    match CostReport::new(protocol, &setup.km, pm.e_g(), epsilon, kappa, p_g, 1.0) {
        Ok(report) => {
            rec.identities_ok = report.identities_hold(1e-9);
            rec.eta = Some(report.eta);
            rec.gamma = report.gamma;
            rec.m_tot = Some(report.m_tot);
            rec.status = if rec.identities_ok { "ok".into() } else { "identity_failure".into() };
        }
        Err(Error::NoSolution { .. }) => rec.status = "below_subspace_error".into(),
        Err(e) => rec.status = format!("error: {e}"),
    }
    rec
}

/// Instances of one model and lattice kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSet {
    pub model: ModelKind,
    pub lattice: LatticeKind,
    pub size: usize,
    #[serde(default = "default_d_min")]
    pub d_min: usize,
    #[serde(default = "default_d_max")]
    pub d_max: usize,
    /// Number of random graphs; ignored for chains and ladders.
    #[serde(default = "default_graphs")]
    pub graphs: usize,
}

fn default_d_min() -> usize {
    2
}

fn default_d_max() -> usize {
    30
}

fn default_graphs() -> usize {
    10
}

/// `(config, d)` pairs of a model set; random graphs get one random `d` each.
pub fn expand_set(set: &ModelSet, seed: u64, set_index: u64) -> Vec<(ModelConfig, usize)> {
    if set.d_min == 0 || set.d_max < set.d_min {
        return Vec::new();
    }
    match set.lattice {
        LatticeKind::RandomGraph => {
            let mut rng = stream(seed, 1_000 + set_index);
            (0..set.graphs)
                .map(|_| {
                    let graph_seed: u64 = rng.random();
                    let d = rng.random_range(set.d_min..=set.d_max);
                    (standard_config(set.model, set.lattice, set.size, Some(graph_seed)), d)
                })
                .collect()
        }
        _ => {
            let cfg = standard_config(set.model, set.lattice, set.size, None);
            (set.d_min..=set.d_max).map(|d| (cfg.clone(), d)).collect()
        }
    }
}

/// Reference instance set: ten-qubit Heisenberg and Hubbard models on chains and ladders.
pub fn default_sets(graphs: usize) -> Vec<ModelSet> {
    let mut out = Vec::new();
    for (model, size) in [(ModelKind::Heisenberg, 10), (ModelKind::Hubbard, 5)] {
        for lattice in [LatticeKind::Chain, LatticeKind::Ladder, LatticeKind::RandomGraph] {
            out.push(ModelSet { model, lattice, size, d_min: 2, d_max: 30, graphs });
        }
    }
    out
}

/// Records of the overhead distribution at `ε = 2ε_K(P)`; skipped instances return their admission.
/// Instance label with its admission result.
pub type AdmissionEntry = (String, Admission);

pub fn distribution(
    sets: &[ModelSet],
    families: &[Family],
    kappa: f64,
    seed: u64,
    cache_dir: Option<&Path>,
) -> Result<(Vec<RunRecord>, Vec<AdmissionEntry>)> {
    let mut jobs: Vec<(ModelConfig, usize)> = Vec::new();
    for (i, set) in sets.iter().enumerate() {
        jobs.extend(expand_set(set, seed, i as u64));
    }
    let mut models: Vec<(String, PreparedModel)> = Vec::new();
    for (cfg, _) in &jobs {
        let label = model_label(cfg);
        if !models.iter().any(|(l, _)| *l == label) {
            models.push((label, prepare_model(cfg, cache_dir)?));
        }
    }
    let results = jobs
        .par_iter()
        .enumerate()
        .map(|(index, (cfg, d))| -> Result<(Vec<RunRecord>, (String, Admission))> {
            let label = model_label(cfg);
            let pm = &models.iter().find(|(l, _)| *l == label).expect("model prepared").1;
            let instance = format!("{label}-d{d}");
            let adm = admit(pm, *d)?;
            if !adm.admitted {
                return Ok((Vec::new(), (instance, adm)));
            }
            let epsilon = 2.0 * adm.epsilon_k_p;
            let e0 = random_gp_e0(pm.e_g(), seed, index as u64);
            let mut recs = Vec::new();
            for &family in families {
                let gp_e0 = (family == Family::GP).then_some(e0);
                match configure_family(family, pm, *d, gp_e0) {
                    Ok(setup) => recs.push(run_record(&instance, &setup, pm, epsilon, adm.epsilon_k_p, kappa)),
                    Err(e) => recs.push(failed_record(&instance, family, *d, epsilon, &adm, e)),
                }
            }
            Ok((recs, (instance, adm)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::new();
    let mut admissions = Vec::new();
    for (r, a) in results {
        records.extend(r);
        admissions.push(a);
    }
    Ok((records, admissions))
}

fn failed_record(instance: &str, family: Family, d: usize, epsilon: f64, adm: &Admission, e: Error) -> RunRecord {
    RunRecord {
        instance: instance.to_string(),
        family,
        d,
        epsilon,
        epsilon_k: f64::NAN,
        epsilon_k_p: adm.epsilon_k_p,
        p_g: adm.p_g,
        e0: f64::NAN,
        tau: None,
        delta_t: None,
        delta_e: None,
        protocol: Protocol::for_structure(family.structure()),
        eta: None,
        gamma: f64::INFINITY,
        m_tot: None,
        status: format!("error: {e}"),
        identities_ok: true,
    }
}

/// Median with `+∞` entries kept in the ordering.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 || v[n / 2].is_infinite() {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Per-family `γ` statistics over a record set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub family: Family,
    pub instances: usize,
    pub median_gamma: f64,
    pub max_gamma: f64,
    pub fraction_below_100: f64,
}

pub fn summarise(records: &[RunRecord], families: &[Family]) -> Vec<FamilySummary> {
    families
        .iter()
        .map(|&family| {
            let g: Vec<f64> = records.iter().filter(|r| r.family == family).map(|r| r.gamma).collect();
            let below = g.iter().filter(|&&x| x <= 100.0).count();
            FamilySummary {
                family,
                instances: g.len(),
                median_gamma: median(&g),
                max_gamma: g.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                fraction_below_100: if g.is_empty() { f64::NAN } else { below as f64 / g.len() as f64 },
            }
        })
        .collect()
}

/// One point of an error-versus-overhead curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub family: Family,
    /// `E_0 − E_g` for GP rows; zero otherwise.
    pub e0_offset: f64,
    pub epsilon: f64,
    pub epsilon_k: f64,
    pub eta: Option<f64>,
    pub gamma: f64,
}

/// GP reference-energy offsets `iδE` for `i ∈ {−50, −9..9, 50}`, `δE = 0.002`.
pub fn curve_e0_offsets() -> Vec<f64> {
    let mut v = vec![-50];
    v.extend(-9..=9);
    v.push(50);
    v.into_iter().map(|i| i as f64 * 0.002).collect()
}

/// Log-spaced target errors.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()).collect()
}

fn curve_rows(setup: &FamilySetup, pm: &PreparedModel, epsilons: &[f64], e0_offset: f64) -> Vec<CurvePoint> {
    epsilons
        .iter()
        .map(|&epsilon| {
            let eta = solve_eta(&setup.km, pm.e_g(), epsilon).ok();
            CurvePoint {
                family: setup.family,
                e0_offset,
                epsilon,
                epsilon_k: setup.epsilon_k,
                eta,
                gamma: eta.map_or(f64::INFINITY, |eta| crate::cost::gamma(pm.sd.p_g(), epsilon, 1.0, eta)),
            }
        })
        .collect()
}

/// `γ(ε)` for every family; GP additionally over the band of reference energies.
pub fn curve(pm: &PreparedModel, d: usize, families: &[Family], epsilons: &[f64]) -> Result<Vec<CurvePoint>> {
    let eg = pm.e_g();
    let mut jobs: Vec<(Family, f64)> = families.iter().map(|&f| (f, 0.0)).collect();
    if families.contains(&Family::GP) {
        jobs.extend(curve_e0_offsets().into_iter().filter(|&o| o != 0.0).map(|o| (Family::GP, o)));
    }
    let rows = jobs
        .par_iter()
        .map(|&(family, offset)| -> Result<Vec<CurvePoint>> {
            let gp_e0 = (family == Family::GP).then_some(eg + offset);
            let setup = configure_family(family, pm, d, gp_e0)?;
            Ok(curve_rows(&setup, pm, epsilons, offset))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Total measurement number against target error at one `d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub family: Family,
    pub d: usize,
    pub epsilon: f64,
    pub epsilon_k: f64,
    pub m_tot: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub family: Family,
    pub d: usize,
    pub epsilon_k: f64,
    pub eps_lo: f64,
    pub eps_hi: f64,
    pub slope: f64,
    pub points: usize,
}

/// Lower edge of the converged range, in units of the subspace error.
pub const CONVERGED_FACTOR: f64 = 100.0;
/// Upper edge of the converged range.
pub const CONVERGED_MAX: f64 = 1e-2;

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Lower edge of the converged range `[max(100 ε_K, 10⁻⁹), 10⁻²]`; errors without a full decade.
pub fn converged_floor(setup: &FamilySetup) -> Result<f64> {
    let eps_lo = (CONVERGED_FACTOR * setup.epsilon_k.max(0.0)).max(MIN_SUBSPACE_ERROR);
    if eps_lo * 10.0 > CONVERGED_MAX {
        return Err(Error::Precondition(format!(
            "{}: subspace error {:.3e} leaves no converged decade",
            setup.family, setup.epsilon_k
        )));
    }
    Ok(eps_lo)
}

fn fit_rows(setup: &FamilySetup, eps_lo: f64, rows: Vec<ScalingPoint>) -> (Vec<ScalingPoint>, ScalingFit) {
    let x: Vec<f64> = rows.iter().map(|r| (1.0 / r.epsilon).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.m_tot.ln()).collect();
    let fit = ScalingFit {
        family: setup.family,
        d: setup.spec.d,
        epsilon_k: setup.epsilon_k,
        eps_lo,
        eps_hi: CONVERGED_MAX,
        slope: if rows.len() >= 2 { fit_slope(&x, &y) } else { f64::NAN },
        points: rows.len(),
    };
    (rows, fit)
}

/// Sufficient `M_tot(ε)` from the bound equation over the converged range, with its log-log slope.
pub fn scaling(setup: &FamilySetup, pm: &PreparedModel, kappa: f64, points: usize) -> Result<(Vec<ScalingPoint>, ScalingFit)> {
    let eps_lo = converged_floor(setup)?;
    let protocol = Protocol::for_structure(setup.km.structure);
    let d = setup.spec.d;
    let mut rows = Vec::new();
    for epsilon in log_grid(eps_lo, CONVERGED_MAX, points) {
        let eta = solve_eta(&setup.km, pm.e_g(), epsilon)?;
        rows.push(ScalingPoint { family: setup.family, d, epsilon, epsilon_k: setup.epsilon_k, m_tot: m_tot(protocol, d, kappa, eta)? });
    }
    Ok(fit_rows(setup, eps_lo, rows))
}

/// Settings of a necessary-measurement scan over target errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalScan {
    pub kappa: f64,
    pub trials: usize,
    pub points: usize,
    pub rule: EtaRule,
    /// Geometric step of the measurement grid.
    pub ratio: f64,
    pub seed: u64,
}

/// Necessary `M_tot(ε)` from noise simulation over the converged range, with its log-log slope.
///
/// Targets are visited from large to small; each scan starts two grid steps below the previous result.
pub fn empirical_scaling(setup: &FamilySetup, pm: &PreparedModel, scan: EmpiricalScan) -> Result<(Vec<ScalingPoint>, ScalingFit)> {
    let eps_lo = converged_floor(setup)?;
    let protocol = Protocol::for_structure(setup.km.structure);
    let d = setup.spec.d;
    let quantities = protocol.measured_quantities(d);
    let mut rows = Vec::new();
    let mut m_start = 1.0;
    for (i, epsilon) in log_grid(eps_lo, CONVERGED_MAX, scan.points).into_iter().rev().enumerate() {
        let grid = ScanConfig { m_min: m_start, m_max: 1e24, ratio: scan.ratio, seed: scan.seed ^ (i as u64) << 32 };
        let r = necessary_measurement(&setup.km, protocol, pm.e_g(), epsilon, scan.kappa, scan.trials, scan.rule, grid)?;
        let Some(m) = r.m_necessary else { break };
        rows.push(ScalingPoint { family: setup.family, d, epsilon, epsilon_k: setup.epsilon_k, m_tot: m * quantities });
        m_start = (m / (scan.ratio * scan.ratio)).max(1.0);
    }
    rows.reverse();
    Ok(fit_rows(setup, eps_lo, rows))
}

/// Largest admitted `d` in `d_range` whose family subspace error leaves a converged decade.
pub fn largest_converged_d(pm: &PreparedModel, family: Family, d_range: std::ops::RangeInclusive<usize>) -> Result<Option<FamilySetup>> {
    for d in d_range.rev() {
        if !admit(pm, d)?.admitted {
            continue;
        }
        let setup = match configure_family(family, pm, d, None) {
            Ok(s) => s,
            Err(_) => continue,
        };
        if (CONVERGED_FACTOR * setup.epsilon_k).max(MIN_SUBSPACE_ERROR) * 10.0 <= CONVERGED_MAX {
            return Ok(Some(setup));
        }
    }
    Ok(None)
}

/// Necessary measurement numbers of every family under one solve rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NecessaryRecord {
    pub family: Family,
    pub rule: EtaRule,
    pub protocol: Protocol,
    pub epsilon: f64,
    pub epsilon_k: f64,
    /// Per measured quantity; `None` if the grid ceiling was reached.
    pub m_necessary: Option<f64>,
    /// `m_necessary` times the number of measured quantities.
    pub m_total: Option<f64>,
}

/// Full scan of one family under one rule.
pub type FamilyScan = (Family, NecessaryM);

#[allow(clippy::too_many_arguments)]
pub fn necessary_sweep(
    pm: &PreparedModel,
    d: usize,
    families: &[Family],
    epsilon: f64,
    kappa: f64,
    trials: usize,
    rules: &[EtaRule],
    scan: ScanConfig,
) -> Result<(Vec<NecessaryRecord>, Vec<FamilyScan>)> {
    let mut records = Vec::new();
    let mut details = Vec::new();
    for &family in families {
        let setup = configure_family(family, pm, d, None)?;
        let protocol = Protocol::for_structure(setup.km.structure);
        for &rule in rules {
            let r = necessary_measurement(&setup.km, protocol, pm.e_g(), epsilon, kappa, trials, rule, scan)?;
            let q = protocol.measured_quantities(d);
            records.push(NecessaryRecord {
                family,
                rule,
                protocol,
                epsilon,
                epsilon_k: setup.epsilon_k,
                m_necessary: r.m_necessary,
                m_total: r.m_necessary.map(|m| m * q),
            });
            details.push((family, r));
        }
    }
    Ok((records, details))
}

/// Projector composition summary for one degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectorRecord {
    pub n: usize,
    pub tau: f64,
    /// `n³/(e‖H‖²τ²)`.
    pub ratio: f64,
    pub omega_norm: f64,
    pub omega_bound: f64,
    /// `a†a` of the composed coefficient vector.
    pub coefficient_norm: f64,
    /// `(a†a)²`.
    pub gamma: f64,
    pub gamma_bound: f64,
    /// `max_l |b_l| / (nˡ T_n(z₁))`.
    pub linear_bound_ratio: f64,
    /// `max_l |b_l| / (n^{2l} T_n(z₁)/l!)`.
    pub factorial_bound_ratio: f64,
    pub composed_error: f64,
    pub gaussian_error: f64,
}

/// `τ` with `n³/(e‖H‖²τ²) = ratio`.
pub fn projector_tau(n: usize, ratio: f64) -> f64 {
    ((n.max(1) as f64).powi(3) / (std::f64::consts::E * ratio)).sqrt()
}

pub fn projector_record(pm: &PreparedModel, n: usize, tau: f64) -> Result<ProjectorRecord> {
    let r = compose_projector(n, &pm.sd, tau, pm.h_tot())?;
    let linear = r
        .b
        .iter()
        .enumerate()
        .map(|(l, b)| b.abs() / ((n as f64).powi(l as i32) * r.t_n_z1))
        .fold(0.0, f64::max);
    let factorial = r
        .b
        .iter()
        .enumerate()
        .map(|(l, b)| b.abs() / crate::cost::power_coefficient_bound(n, l, r.t_n_z1))
        .fold(0.0, f64::max);
    let h_norm = pm.sd.max_abs_energy();
    Ok(ProjectorRecord {
        n,
        tau,
        ratio: (n as f64).powi(3) / (std::f64::consts::E * h_norm * h_norm * tau * tau),
        omega_norm: r.omega_norm,
        omega_bound: r.omega_bound,
        coefficient_norm: r.a.iter().map(|x| x * x).sum(),
        gamma: r.gamma,
        gamma_bound: r.gamma_bound,
        linear_bound_ratio: linear,
        factorial_bound_ratio: factorial,
        composed_error: r.composed_error,
        gaussian_error: r.gaussian_error,
    })
}

/// One cost report row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub family: Family,
    pub protocol: Protocol,
    pub d: usize,
    pub epsilon: f64,
    pub epsilon_k: f64,
    pub eta: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub m_tot: Option<f64>,
    pub m_per_quantity: Option<f64>,
    pub gamma: f64,
    pub identity_residual: Option<f64>,
    pub identities_ok: bool,
    pub status: String,
}

/// Cost reports per family and target error; optionally for every supported protocol.
pub fn cost_rows(
    pm: &PreparedModel,
    d: usize,
    families: &[Family],
    epsilons: &[f64],
    kappa: f64,
    all_protocols: bool,
) -> Result<Vec<CostRow>> {
    let mut rows = Vec::new();
    for &family in families {
        let setup = configure_family(family, pm, d, None)?;
        let protocols: Vec<Protocol> = if all_protocols {
            Protocol::ALL.into_iter().filter(|p| p.supports(setup.km.structure)).collect()
        } else {
            vec![Protocol::for_structure(setup.km.structure)]
        };
        for protocol in protocols {
            for &epsilon in epsilons {
                let mut row = CostRow {
                    family,
                    protocol,
                    d,
                    epsilon,
                    epsilon_k: setup.epsilon_k,
                    eta: None,
                    alpha: None,
                    beta: None,
                    m_tot: None,
                    m_per_quantity: None,
                    gamma: f64::INFINITY,
                    identity_residual: None,
                    identities_ok: true,
                    status: "ok".into(),
                };
                match CostReport::new(protocol, &setup.km, pm.e_g(), epsilon, kappa, pm.sd.p_g(), 1.0) {
                    Ok(r) => {
                        row.eta = Some(r.eta);
                        row.alpha = Some(r.alpha);
                        row.beta = Some(r.beta);
                        row.m_tot = Some(r.m_tot);
                        row.m_per_quantity = Some(r.m_per_quantity);
                        row.gamma = r.gamma;
                        row.identity_residual = Some(r.identity_residual());
                        row.identities_ok = r.identities_hold(1e-9);
                        if !row.identities_ok {
                            row.status = "identity_failure".into();
                        }
                    }
                    Err(Error::NoSolution { .. }) => row.status = "below_subspace_error".into(),
                    Err(e) => row.status = format!("error: {e}"),
                }
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

/// Monte Carlo estimate of one GP matrix entry against its exact value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub kind: String,
    pub k: usize,
    pub q: usize,
    pub n_steps: u64,
    pub shots: u64,
    pub estimate_re: f64,
    pub estimate_im: f64,
    pub exact_re: f64,
    pub exact_im: f64,
    pub cost_factor: f64,
    pub shot_variance: f64,
    /// `|estimate − exact|` in standard errors.
    pub deviation: f64,
    /// Second central moment of the per-shot variable over `2C²`.
    pub variance_ratio: f64,
}

/// Estimates every `H_kq`, `S_kq` with `k, q ≤ k_max` of the GP basis at `E_0 = E_g`.
pub fn mc_rows(pm: &PreparedModel, tau: f64, shots: u64, k_max: usize, seed: u64) -> Result<Vec<McRow>> {
    use crate::mc_lcu::{estimate_entry, EntryKind, GpSampler};
    let h_tot = pm.h_tot();
    let e0 = pm.e_g();
    let n_steps = crate::bases::gp_min_steps(tau, h_tot);
    let sampler = GpSampler::new(tau, e0, h_tot, n_steps, k_max)?;
    let km = build_matrices(&BasisSpec::gaussian_power(k_max, e0, tau, h_tot), &pm.sd)?;
    let mut jobs = Vec::new();
    for kind in [EntryKind::H, EntryKind::S] {
        for k in 1..=k_max {
            for q in 1..=k_max {
                jobs.push((kind, k, q));
            }
        }
    }
    jobs.par_iter()
        .enumerate()
        .map(|(i, &(kind, k, q))| {
            let mut rng = stream(seed, i as u64);
            let est = estimate_entry(kind, &sampler, k, q, &pm.hamiltonian, &pm.reference, shots, &mut rng)?;
            let (label, exact) = match kind {
                EntryKind::H => ("H", km.h[(k - 1, q - 1)]),
                EntryKind::S => ("S", km.s[(k - 1, q - 1)]),
            };
            let m = shots as f64;
            let se = (est.shot_variance / m).sqrt();
            Ok(McRow {
                kind: label.into(),
                k,
                q,
                n_steps,
                shots,
                estimate_re: est.value.re,
                estimate_im: est.value.im,
                exact_re: exact.re,
                exact_im: exact.im,
                cost_factor: est.cost_factor,
                shot_variance: est.shot_variance,
                deviation: if se > 0.0 { (est.value - exact).norm() / se } else { 0.0 },
                variance_ratio: est.shot_variance * (m - 1.0).max(0.0) / m / (2.0 * est.cost_factor.powi(2)),
            })
        })
        .collect()
}
