//! Heisenberg and Hubbard Hamiltonians, their reference states and the JSON
//! model description.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeKind, LatticeSpec};
use crate::pauli::{PauliOperator, PauliString, PauliSum, MAX_QUBITS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Heisenberg,
    Hubbard,
}

/// Normalised state vector over `2^n` basis states.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceState {
    amplitudes: Vec<Complex64>,
}

impl ReferenceState {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if !amplitudes.len().is_power_of_two() {
            return Err(Error::InvalidArgument(format!("state length {} is not a power of two", amplitudes.len())));
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("state norm {norm} is not 1")));
        }
        Ok(Self { amplitudes })
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let mut v = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        *v.get_mut(index).ok_or_else(|| Error::InvalidArgument("basis index out of range".into()))? =
            Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes: v })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn n_qubits(&self) -> usize {
        self.amplitudes.len().trailing_zeros() as usize
    }
}

pub fn build_heisenberg(lattice: &LatticeSpec, j: f64) -> Result<PauliSum> {
    lattice.validate()?;
    if !(j > 0.0) {
        return Err(Error::InvalidModel(format!("coupling J = {j} must be positive")));
    }
    if lattice.size > MAX_QUBITS {
        return Err(Error::InvalidModel(format!("{} spins exceed {MAX_QUBITS}", lattice.size)));
    }
    let mut terms = Vec::with_capacity(3 * lattice.edges.len());
    for &(a, b) in &lattice.edges {
        terms.push((j, PauliString::x(a).mul(&PauliString::x(b))));
        terms.push((j, PauliString::y(a).mul(&PauliString::y(b))));
        terms.push((j, PauliString::z(a).mul(&PauliString::z(b))));
    }
    PauliSum::new(lattice.size, terms)
}

/// Qubit carrying spin `spin` (0 up, 1 down) of `site`.
pub fn mode_index(site: usize, spin: usize) -> usize {
    2 * site + spin
}

/// Jordan–Wigner image of the creation operator on `mode`.
pub fn creation(mode: usize) -> PauliOperator {
    let string = PauliString::new(0, (1u64 << mode) - 1, 0);
    let half = Complex64::new(0.5, 0.0);
    let x = PauliOperator::term(half, string.mul(&PauliString::x(mode)));
    let y = PauliOperator::term(Complex64::new(0.0, -0.5), string.mul(&PauliString::y(mode)));
    x.add(&y)
}

pub fn annihilation(mode: usize) -> PauliOperator {
    creation(mode).adjoint()
}

pub fn build_hubbard(lattice: &LatticeSpec, j: f64, u: f64) -> Result<PauliSum> {
    lattice.validate()?;
    if !j.is_finite() || !u.is_finite() {
        return Err(Error::InvalidModel("non-finite Hubbard parameters".into()));
    }
    let n_qubits = 2 * lattice.size;
    if n_qubits > MAX_QUBITS {
        return Err(Error::InvalidModel(format!("{n_qubits} qubits exceed {MAX_QUBITS}")));
    }
    let mut h = PauliOperator::zero();
    let hop = Complex64::new(-j, 0.0);
    for &(a, b) in &lattice.edges {
        for spin in 0..2 {
            let (p, q) = (mode_index(a, spin), mode_index(b, spin));
            let t = creation(p).mul(&annihilation(q));
            h = h.add(&t.add(&t.adjoint()).scale(hop));
        }
    }
    let half = PauliOperator::identity().scale(Complex64::new(-0.5, 0.0));
    for site in 0..lattice.size {
        let up = mode_index(site, 0);
        let dn = mode_index(site, 1);
        let n_up = creation(up).mul(&annihilation(up)).add(&half);
        let n_dn = creation(dn).mul(&annihilation(dn)).add(&half);
        h = h.add(&n_up.mul(&n_dn).scale(Complex64::new(u, 0.0)));
    }
    h.pruned(1e-14).into_pauli_sum(n_qubits, 1e-12)
}

/// Divides every coefficient by `spectral_norm`.
pub fn normalise(h: &PauliSum, spectral_norm: f64) -> Result<PauliSum> {
    if !(spectral_norm > 0.0) || !spectral_norm.is_finite() {
        return Err(Error::InvalidArgument(format!("spectral norm {spectral_norm} must be positive")));
    }
    if spectral_norm == 1.0 {
        return Ok(h.clone());
    }
    Ok(h.scaled(1.0 / spectral_norm))
}

/// Singlets on qubit pairs (0,1), (2,3), ...
pub fn singlet_pairs(n_spins: usize) -> Result<ReferenceState> {
    if n_spins == 0 || n_spins % 2 == 1 {
        return Err(Error::InvalidModel(format!("pairing needs an even spin count, got {n_spins}")));
    }
    if n_spins > 30 {
        return Err(Error::DimensionOverflow { n_qubits: n_spins, limit: 30 });
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = vec![Complex64::new(1.0, 0.0)];
    for _ in 0..n_spins / 2 {
        // |0⟩_i|1⟩_j has index 0b10 in the two-qubit block, |1⟩_i|0⟩_j has 0b01.
        let pair = [0.0, -r, r, 0.0];
        let mut next = vec![Complex64::new(0.0, 0.0); amps.len() * 4];
        for (hi, &p) in pair.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (lo, &a) in amps.iter().enumerate() {
                next[(hi * amps.len()) | lo] = a * p;
            }
        }
        amps = next;
    }
    Ok(ReferenceState { amplitudes: amps })
}

/// One-particle hopping matrix `T_ij = −J · (number of edges between i and j)`.
pub fn hopping_matrix(lattice: &LatticeSpec, j: f64) -> DMatrix<f64> {
    let mut t = DMatrix::zeros(lattice.size, lattice.size);
    for &(a, b) in &lattice.edges {
        t[(a, b)] -= j;
        t[(b, a)] -= j;
    }
    t
}

/// Applies `a†_mode` to a statevector.
pub fn apply_creation(mode: usize, state: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); state.len()];
    let bit = 1usize << mode;
    let below = bit - 1;
    for (b, &amp) in state.iter().enumerate() {
        if b & bit != 0 || amp == Complex64::new(0.0, 0.0) {
            continue;
        }
        let sign = if (b & below).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        out[b | bit] += amp * sign;
    }
    out
}

/// Half-filled Slater determinant of the non-interacting ground state:
/// `ceil(n/2)` spin-up and `floor(n/2)` spin-down electrons in the lowest orbitals.
pub fn hartree_fock(lattice: &LatticeSpec, j: f64) -> Result<ReferenceState> {
    lattice.validate()?;
    let n_qubits = 2 * lattice.size;
    if n_qubits > 30 {
        return Err(Error::DimensionOverflow { n_qubits, limit: 30 });
    }
    let eig = SymmetricEigen::new(hopping_matrix(lattice, j));
    let mut order: Vec<usize> = (0..lattice.size).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let n_up = lattice.size.div_ceil(2);
    let n_dn = lattice.size / 2;

    let mut state = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
    state[0] = Complex64::new(1.0, 0.0);
    for (spin, count) in [(0usize, n_up), (1usize, n_dn)] {
        for &orb in order.iter().take(count) {
            let mut next = vec![Complex64::new(0.0, 0.0); state.len()];
            for site in 0..lattice.size {
                let c = eig.eigenvectors[(site, orb)];
                if c == 0.0 {
                    continue;
                }
                let part = apply_creation(mode_index(site, spin), &state);
                for (n, p) in next.iter_mut().zip(part) {
                    *n += p * c;
                }
            }
            state = next;
        }
    }
    let norm = state.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Err(Error::Numerical("Slater determinant vanished".into()));
    }
    for a in &mut state {
        *a /= norm;
    }
    Ok(ReferenceState { amplitudes: state })
}

pub fn reference_state(model: ModelKind, lattice: &LatticeSpec) -> Result<ReferenceState> {
    match model {
        ModelKind::Heisenberg => singlet_pairs(lattice.size),
        ModelKind::Hubbard => hartree_fock(lattice, 1.0),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub kind: LatticeKind,
    pub size: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// JSON model description: `{model, lattice: {kind, size, seed}, J, U}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub model: ModelKind,
    pub lattice: LatticeConfig,
    #[serde(rename = "J", default = "one")]
    pub j: f64,
    #[serde(rename = "U", default)]
    pub u: Option<f64>,
}

fn one() -> f64 {
    1.0
}

/// A Hamiltonian before normalisation together with its reference state.
#[derive(Clone, Debug)]
pub struct Model {
    pub kind: ModelKind,
    pub lattice: LatticeSpec,
    pub hamiltonian: PauliSum,
    pub reference: ReferenceState,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn lattice(&self) -> Result<LatticeSpec> {
        if self.lattice.size > MAX_QUBITS {
            return Err(Error::InvalidLattice(format!("size {} too large", self.lattice.size)));
        }
        LatticeSpec::build(self.lattice.kind, self.lattice.size, self.lattice.seed)
    }

    pub fn build(&self) -> Result<Model> {
        let lattice = self.lattice()?;
        let (hamiltonian, reference) = match self.model {
            ModelKind::Heisenberg => {
                (build_heisenberg(&lattice, self.j)?, singlet_pairs(lattice.size)?)
            }
            ModelKind::Hubbard => {
                let u = self.u.unwrap_or(self.j);
                (build_hubbard(&lattice, self.j, u)?, hartree_fock(&lattice, self.j)?)
            }
        };
        Ok(Model { kind: self.model, lattice, hamiltonian, reference })
    }
}

impl Model {
    pub fn heisenberg(kind: LatticeKind, size: usize, seed: Option<u64>) -> Result<Self> {
        ModelConfig {
            model: ModelKind::Heisenberg,
            lattice: LatticeConfig { kind, size, seed },
            j: 1.0,
            u: None,
        }
        .build()
    }

    pub fn hubbard(kind: LatticeKind, size: usize, seed: Option<u64>) -> Result<Self> {
        ModelConfig {
            model: ModelKind::Hubbard,
            lattice: LatticeConfig { kind, size, seed },
            j: 1.0,
            u: Some(1.0),
        }
        .build()
    }
}
