//! Dense exact diagonalisation, reference-state weights, a Lanczos oracle and
//! a binary cache for spectral decompositions.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, inner, norm};
use crate::models::ReferenceState;
use crate::pauli::PauliSum;

pub const DENSE_QUBIT_LIMIT: usize = 14;

/// Energies closer than this are treated as one level.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Eigenvalues with reference weights `w_m = |⟨ψ_m|φ⟩|²`, ascending in energy.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition {
    energies: Vec<f64>,
    weights: Vec<f64>,
    levels: Vec<(f64, f64)>,
}

impl SpectralDecomposition {
    pub fn new(energies: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if energies.is_empty() || energies.len() != weights.len() {
            return Err(Error::InvalidArgument("energies and weights must be non-empty and equal length".into()));
        }
        if energies.iter().chain(&weights).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite spectral data".into()));
        }
        if energies.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument("energies not ascending".into()));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidArgument("negative weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        let mut levels: Vec<(f64, f64)> = Vec::new();
        for (&e, &w) in energies.iter().zip(&weights) {
            match levels.last_mut() {
                Some((le, lw)) if (e - *le).abs() <= 1e-13 => *lw += w,
                _ => levels.push((e, w)),
            }
        }
        levels.retain(|&(_, w)| w > 1e-30);
        Ok(Self { energies, weights, levels })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn ground_energy(&self) -> f64 {
        self.energies[0]
    }

    /// Total weight on the (possibly degenerate) ground level.
    pub fn p_g(&self) -> f64 {
        let eg = self.ground_energy();
        self.energies
            .iter()
            .zip(&self.weights)
            .take_while(|(&e, _)| e - eg <= DEGENERACY_TOL)
            .map(|(_, &w)| w)
            .sum()
    }

    /// Distance from the ground level to the next distinct level; 0 for a flat spectrum.
    pub fn gap(&self) -> f64 {
        let eg = self.ground_energy();
        self.energies.iter().find(|&&e| e - eg > DEGENERACY_TOL).map_or(0.0, |&e| e - eg)
    }

    pub fn max_abs_energy(&self) -> f64 {
        self.energies[0].abs().max(self.energies[self.energies.len() - 1].abs())
    }

    /// `(energy, weight)` with exact degeneracies merged and zero weights dropped.
    pub fn active_levels(&self) -> &[(f64, f64)] {
        &self.levels
    }

    /// `⟨φ|H|φ⟩`.
    pub fn mean_energy(&self) -> f64 {
        self.levels.iter().map(|&(e, w)| e * w).sum()
    }

    /// Same spectrum with every energy multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::InvalidArgument("scale factor must be positive".into()));
        }
        Self::new(self.energies.iter().map(|e| e * factor).collect(), self.weights.clone())
    }
}

/// One symmetry block of the Hamiltonian with its eigenpairs.
#[derive(Clone, Debug)]
pub struct Block {
    pub indices: Vec<usize>,
    pub energies: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

/// Full eigendecomposition split into blocks of the computational-basis graph.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    pub dim: usize,
    pub blocks: Vec<Block>,
}

impl Eigensystem {
    pub fn energies(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.blocks.iter().flat_map(|b| b.energies.iter().copied()).collect();
        e.sort_by(f64::total_cmp);
        e
    }

    /// `f(H)|ψ⟩` through the eigenbasis.
    pub fn apply_function<F: Fn(f64) -> Complex64>(&self, f: F, state: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
        for b in &self.blocks {
            let local = DVector::from_iterator(b.indices.len(), b.indices.iter().map(|&i| state[i]));
            let coeffs = b.vectors.adjoint() * local;
            let scaled = DVector::from_iterator(
                coeffs.len(),
                coeffs.iter().zip(&b.energies).map(|(c, &e)| c * f(e)),
            );
            let back = &b.vectors * scaled;
            for (k, &i) in b.indices.iter().enumerate() {
                out[i] = back[k];
            }
        }
        out
    }

    /// Pairs `(E_m, |⟨ψ_m|φ⟩|²)` sorted by energy.
    pub fn decompose(&self, reference: &[Complex64]) -> Result<SpectralDecomposition> {
        if reference.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "reference has {} amplitudes, Hamiltonian dimension is {}",
                reference.len(),
                self.dim
            )));
        }
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(self.dim);
        for b in &self.blocks {
            let local = DVector::from_iterator(b.indices.len(), b.indices.iter().map(|&i| reference[i]));
            let overlaps = b.vectors.adjoint() * local;
            for (o, &e) in overlaps.iter().zip(&b.energies) {
                pairs.push((e, o.norm_sqr()));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let (energies, weights) = pairs.into_iter().map(|(e, w)| (e, w / total)).unzip();
        SpectralDecomposition::new(energies, weights)
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Basis-state components connected by nonzero off-diagonal elements.
fn components(h: &PauliSum) -> Vec<Vec<usize>> {
    let dim = h.dim();
    let mut by_flip: std::collections::BTreeMap<u64, Vec<(f64, crate::pauli::PauliString)>> = Default::default();
    for &(c, p) in h.terms() {
        if p.x_mask != 0 {
            by_flip.entry(p.x_mask).or_default().push((c, p));
        }
    }
    let mut parent: Vec<usize> = (0..dim).collect();
    for (x, terms) in &by_flip {
        for b in 0..dim {
            let c = b ^ *x as usize;
            if c < b {
                continue;
            }
            let amp: Complex64 = terms.iter().map(|(coef, p)| p.apply_to_basis(b).0 * *coef).sum();
            if amp.norm() > 1e-14 {
                let (ra, rb) = (find(&mut parent, b), find(&mut parent, c));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for b in 0..dim {
        let r = find(&mut parent, b);
        groups.entry(r).or_default().push(b);
    }
    groups.into_values().collect()
}

fn check_dim(h: &PauliSum) -> Result<()> {
    if h.n_qubits() > DENSE_QUBIT_LIMIT {
        return Err(Error::DimensionOverflow { n_qubits: h.n_qubits(), limit: DENSE_QUBIT_LIMIT });
    }
    Ok(())
}

pub fn eigensystem(h: &PauliSum) -> Result<Eigensystem> {
    check_dim(h)?;
    let dim = h.dim();
    let blocks = components(h)
        .into_par_iter()
        .map(|indices| {
            let n = indices.len();
            let pos: std::collections::HashMap<usize, usize> =
                indices.iter().enumerate().map(|(k, &i)| (i, k)).collect();
            let mut m = DMatrix::<Complex64>::zeros(n, n);
            for (col, &b) in indices.iter().enumerate() {
                for &(c, p) in h.terms() {
                    let (amp, r) = p.apply_to_basis(b);
                    if let Some(&row) = pos.get(&r) {
                        m[(row, col)] += amp * c;
                    }
                }
            }
            let (energies, vectors) = hermitian_eigen(&m);
            Block { indices, energies, vectors }
        })
        .collect();
    Ok(Eigensystem { dim, blocks })
}

pub fn diagonalise(h: &PauliSum, reference: &ReferenceState) -> Result<SpectralDecomposition> {
    eigensystem(h)?.decompose(reference.amplitudes())
}

/// `max |E_m|`.
pub fn spectral_norm(h: &PauliSum) -> Result<f64> {
    let e = eigensystem(h)?.energies();
    Ok(e[0].abs().max(e[e.len() - 1].abs()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LanczosResult {
    /// Ascending Ritz values of the tridiagonal matrix.
    pub ritz_values: Vec<f64>,
    /// Krylov dimension actually reached.
    pub dimension: usize,
    /// Set when the residual fell below `1e-13` before the requested dimension.
    pub breakdown: bool,
}

/// Lanczos with full (two-pass) reorthogonalisation started from `reference`.
pub fn lanczos_ritz(h: &PauliSum, reference: &ReferenceState, d: usize) -> Result<LanczosResult> {
    if d == 0 {
        return Err(Error::InvalidArgument("Lanczos dimension must be at least 1".into()));
    }
    let start = reference.amplitudes();
    if start.len() != h.dim() {
        return Err(Error::InvalidArgument("reference dimension mismatch".into()));
    }
    let n0 = norm(start);
    if n0 == 0.0 {
        return Err(Error::InvalidArgument("reference has zero norm".into()));
    }
    let mut basis: Vec<Vec<Complex64>> = vec![start.iter().map(|a| a / n0).collect()];
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let mut breakdown = false;
    loop {
        let j = basis.len() - 1;
        let mut w = h.apply(&basis[j]);
        alpha.push(inner(&basis[j], &w).re);
        for _ in 0..2 {
            for v in &basis {
                let proj = inner(v, &w);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= proj * vi;
                }
            }
        }
        if basis.len() == d {
            break;
        }
        let b = norm(&w);
        if b < 1e-13 {
            breakdown = true;
            break;
        }
        beta.push(b);
        basis.push(w.into_iter().map(|x| x / b).collect());
    }
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |r, c| {
        if r == c {
            alpha[r]
        } else if r + 1 == c {
            beta[r]
        } else if c + 1 == r {
            beta[c]
        } else {
            0.0
        }
    });
    let mut ritz_values: Vec<f64> = t.symmetric_eigenvalues().iter().copied().collect();
    ritz_values.sort_by(f64::total_cmp);
    Ok(LanczosResult { ritz_values, dimension: m, breakdown })
}

const CACHE_MAGIC: &[u8; 8] = b"QKSDSPEC";
const CACHE_VERSION: u32 = 1;

/// Serialises a decomposition with the key of the model that produced it.
pub fn encode_cache(key: u64, sd: &SpectralDecomposition) -> Vec<u8> {
    let n = sd.dim();
    let mut out = Vec::with_capacity(28 + 16 * n);
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&key.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for x in sd.energies().iter().chain(sd.weights()) {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_cache(bytes: &[u8]) -> Result<(u64, SpectralDecomposition)> {
    let take = |at: usize, len: usize| -> Result<&[u8]> {
        bytes
            .get(at..at.checked_add(len).ok_or_else(|| Error::Parse("length overflow".into()))?)
            .ok_or_else(|| Error::Parse("truncated cache".into()))
    };
    if take(0, 8)? != CACHE_MAGIC {
        return Err(Error::Parse("bad cache magic".into()));
    }
    let version = u32::from_le_bytes(take(8, 4)?.try_into().expect("4 bytes"));
    if version != CACHE_VERSION {
        return Err(Error::Parse(format!("unsupported cache version {version}")));
    }
    let key = u64::from_le_bytes(take(12, 8)?.try_into().expect("8 bytes"));
    let n = u64::from_le_bytes(take(20, 8)?.try_into().expect("8 bytes"));
    let n = usize::try_from(n).map_err(|_| Error::Parse("length overflow".into()))?;
    let body = n.checked_mul(16).ok_or_else(|| Error::Parse("length overflow".into()))?;
    let data = take(28, body)?;
    if bytes.len() != 28 + body {
        return Err(Error::Parse("trailing bytes in cache".into()));
    }
    let floats: Vec<f64> = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let (e, w) = floats.split_at(n);
    let sd = SpectralDecomposition::new(e.to_vec(), w.to_vec()).map_err(|e| Error::Parse(e.to_string()))?;
    Ok((key, sd))
}

/// 64-bit FNV-1a, stable across platforms and releases.
pub fn cache_key(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Loads a cached decomposition or computes and stores it.
pub fn cached_diagonalise(
    dir: &Path,
    key_text: &str,
    h: &PauliSum,
    reference: &ReferenceState,
) -> Result<SpectralDecomposition> {
    let key = cache_key(key_text);
    let path = dir.join(format!("{key:016x}.spec"));
    if let Ok(bytes) = std::fs::read(&path) {
        if let Ok((k, sd)) = decode_cache(&bytes) {
            if k == key {
                return Ok(sd);
            }
        }
    }
    let sd = diagonalise(h, reference)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::Numerical(format!("cache dir: {e}")))?;
    std::fs::write(&path, encode_cache(key, &sd)).map_err(|e| Error::Numerical(format!("cache write: {e}")))?;
    Ok(sd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{LatticeKind, LatticeSpec};
    use crate::models::{build_heisenberg, normalise, singlet_pairs, Model};
    use crate::pauli::PauliString;
    use proptest::prelude::*;

    #[test]
    fn single_z() {
        let h = PauliSum::new(1, vec![(1.0, PauliString::z(0))]).unwrap();
        let sd = diagonalise(&h, &ReferenceState::basis(1, 0).unwrap()).unwrap();
        assert_eq!(sd.energies(), &[-1.0, 1.0]);
        assert_eq!(sd.weights(), &[0.0, 1.0]);
        assert_eq!(sd.p_g(), 0.0);
        assert_eq!(spectral_norm(&h).unwrap(), 1.0);
    }

    #[test]
    fn heisenberg_pair() {
        let h = build_heisenberg(&LatticeSpec::chain(2).unwrap(), 1.0).unwrap();
        assert!((spectral_norm(&h).unwrap() - 3.0).abs() < 1e-12);
        let hn = normalise(&h, 3.0).unwrap();
        let sd = diagonalise(&hn, &singlet_pairs(2).unwrap()).unwrap();
        assert!((sd.ground_energy() + 1.0).abs() < 1e-12);
        assert!((sd.p_g() - 1.0).abs() < 1e-12);
        assert!((sd.gap() - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn overflow_rejected() {
        let h = PauliSum::new(15, vec![(1.0, PauliString::z(14))]).unwrap();
        assert!(matches!(spectral_norm(&h), Err(Error::DimensionOverflow { .. })));
    }

    #[test]
    fn blocks_match_dense_spectrum() {
        let m = Model::hubbard(LatticeKind::Chain, 3, None).unwrap();
        let block = eigensystem(&m.hamiltonian).unwrap().energies();
        let dense = crate::linalg::hermitian_eigenvalues(&m.hamiltonian.to_dense());
        for (a, b) in block.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn reconstruction_reproduces_h_phi() {
        let m = Model::heisenberg(LatticeKind::Ladder, 8, None).unwrap();
        let es = eigensystem(&m.hamiltonian).unwrap();
        let phi = m.reference.amplitudes();
        let via_spectrum = es.apply_function(|e| Complex64::new(e, 0.0), phi);
        let direct = m.hamiltonian.apply(phi);
        let diff: f64 = via_spectrum.iter().zip(&direct).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(diff < 1e-9);
    }

    #[test]
    fn lanczos_small_cases() {
        let h = build_heisenberg(&LatticeSpec::chain(2).unwrap(), 1.0).unwrap();
        let phi = ReferenceState::new(vec![
            Complex64::new(0.6, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.8),
            Complex64::new(0.0, 0.0),
        ])
        .unwrap();
        let r1 = lanczos_ritz(&h, &phi, 1).unwrap();
        let mean: f64 = inner(phi.amplitudes(), &h.apply(phi.amplitudes())).re;
        assert!((r1.ritz_values[0] - mean).abs() < 1e-14);
        let full = lanczos_ritz(&h, &phi, 4).unwrap();
        assert!(full.breakdown);
        let sd = diagonalise(&h, &phi).unwrap();
        let reachable: Vec<f64> = sd.active_levels().iter().map(|l| l.0).collect();
        for (a, b) in full.ritz_values.iter().zip(&reachable) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn lanczos_interlaces_and_bounded() {
        let m = Model::heisenberg(LatticeKind::Chain, 8, None).unwrap();
        let sd = diagonalise(&m.hamiltonian, &m.reference).unwrap();
        let mut prev: Option<Vec<f64>> = None;
        for d in 1..=8 {
            let r = lanczos_ritz(&m.hamiltonian, &m.reference, d).unwrap().ritz_values;
            assert!(r[0] >= sd.ground_energy() - 1e-10);
            if let Some(p) = &prev {
                assert!(r[0] <= p[0] + 1e-12);
                for i in 0..p.len() {
                    assert!(r[i] <= p[i] + 1e-10 && p[i] <= r[i + 1] + 1e-10);
                }
            }
            prev = Some(r);
        }
    }

    #[test]
    fn cache_round_trip_and_rejects_garbage() {
        let sd = SpectralDecomposition::new(vec![-1.0, 0.5], vec![0.25, 0.75]).unwrap();
        let bytes = encode_cache(42, &sd);
        assert_eq!(decode_cache(&bytes).unwrap(), (42, sd));
        assert!(decode_cache(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_cache(b"QKSDSPEC").is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_cache(&bad).is_err());
    }

    #[test]
    fn cache_on_disk() {
        let dir = std::env::temp_dir().join(format!("qksd-cache-test-{}", std::process::id()));
        let m = Model::heisenberg(LatticeKind::Chain, 4, None).unwrap();
        let a = cached_diagonalise(&dir, "chain-4", &m.hamiltonian, &m.reference).unwrap();
        let b = cached_diagonalise(&dir, "chain-4", &m.hamiltonian, &m.reference).unwrap();
        assert_eq!(a, b);
        std::fs::remove_dir_all(&dir).ok();
    }

    proptest! {
        #[test]
        fn decode_never_panics(data in proptest::collection::vec(any::<u8>(), 0..200)) {
            let _ = decode_cache(&data);
        }

        #[test]
        fn weights_sum_to_one(seed in 0u64..50) {
            let m = Model::heisenberg(LatticeKind::RandomGraph, 6, Some(seed)).unwrap();
            let sd = diagonalise(&m.hamiltonian, &m.reference).unwrap();
            let total: f64 = sd.weights().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
            prop_assert!(sd.energies().windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn normalised_chain_has_unit_norm() {
        let m = Model::heisenberg(LatticeKind::Chain, 10, None).unwrap();
        let norm = spectral_norm(&m.hamiltonian).unwrap();
        let hn = normalise(&m.hamiltonian, norm).unwrap();
        let sd = diagonalise(&hn, &m.reference).unwrap();
        assert!((sd.max_abs_energy() - 1.0).abs() < 1e-12);
        assert!(sd.p_g() > 1e-3);
    }
}
