//! Pauli strings, real-coefficient Pauli sums and complex Pauli operators.
//!
//! A [`PauliString`] stores one bit per qubit in an X mask and a Z mask; a
//! qubit with both bits set carries a `Y`. Qubit `q` is bit `q` of a
//! computational-basis index, so `|b⟩` with `b = 0b10` has qubit 1 in `|1⟩`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 64;

fn i_pow(k: u8) -> Complex64 {
    match k & 3 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Tensor product of single-qubit Paulis with a phase in {+1, +i, -1, -i}.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    pub x_mask: u64,
    pub z_mask: u64,
    /// Phase as a power of `i`, always reduced mod 4.
    phase: u8,
}

impl PauliString {
    pub const IDENTITY: PauliString = PauliString { x_mask: 0, z_mask: 0, phase: 0 };

    pub fn new(x_mask: u64, z_mask: u64, phase: u8) -> Self {
        Self { x_mask, z_mask, phase: phase & 3 }
    }

    pub fn identity() -> Self {
        Self::IDENTITY
    }

    pub fn x(qubit: usize) -> Self {
        Self::new(1 << qubit, 0, 0)
    }

    pub fn y(qubit: usize) -> Self {
        Self::new(1 << qubit, 1 << qubit, 0)
    }

    pub fn z(qubit: usize) -> Self {
        Self::new(0, 1 << qubit, 0)
    }

    /// Parses labels such as `"XIZY"`; character `q` acts on qubit `q`.
    pub fn from_label(label: &str) -> Result<Self> {
        if label.len() > MAX_QUBITS {
            return Err(Error::Parse(format!("label longer than {MAX_QUBITS} qubits")));
        }
        let mut s = Self::IDENTITY;
        for (q, ch) in label.chars().enumerate() {
            let p = match ch {
                'I' => continue,
                'X' => Self::x(q),
                'Y' => Self::y(q),
                'Z' => Self::z(q),
                other => return Err(Error::Parse(format!("unknown Pauli '{other}'"))),
            };
            s = s.mul(&p);
        }
        Ok(s)
    }

    pub fn phase_power(&self) -> u8 {
        self.phase
    }

    pub fn phase(&self) -> Complex64 {
        i_pow(self.phase)
    }

    /// Same operator with the phase stripped; always Hermitian.
    pub fn canonical(&self) -> Self {
        Self::new(self.x_mask, self.z_mask, 0)
    }

    pub fn is_identity(&self) -> bool {
        self.x_mask == 0 && self.z_mask == 0
    }

    pub fn is_hermitian(&self) -> bool {
        self.phase & 1 == 0
    }

    pub fn weight(&self) -> u32 {
        (self.x_mask | self.z_mask).count_ones()
    }

    /// Highest qubit index touched, plus one.
    pub fn support_len(&self) -> usize {
        let m = self.x_mask | self.z_mask;
        (u64::BITS - m.leading_zeros()) as usize
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.x_mask, self.z_mask, (4 - self.phase) & 3)
    }

    /// Operator product `self · other`.
    pub fn mul(&self, other: &Self) -> Self {
        let (x1, z1, x2, z2) = (self.x_mask, self.z_mask, other.x_mask, other.z_mask);
        let x3 = x1 ^ x2;
        let z3 = z1 ^ z2;
        // P(x,z) = i^{xz} X^x Z^z on each qubit; moving Z^{z1} past X^{x2} costs (-1)^{z1 x2}.
        let k = (x1 & z1).count_ones() as i64 + (x2 & z2).count_ones() as i64
            + 2 * (z1 & x2).count_ones() as i64
            - (x3 & z3).count_ones() as i64;
        let phase = (self.phase as i64 + other.phase as i64 + k).rem_euclid(4) as u8;
        Self::new(x3, z3, phase)
    }

    pub fn commutes_with(&self, other: &Self) -> bool {
        let a = (self.x_mask & other.z_mask).count_ones() + (self.z_mask & other.x_mask).count_ones();
        a.is_multiple_of(2)
    }

    /// `P|b⟩ = amplitude · |b'⟩`.
    #[inline]
    pub fn apply_to_basis(&self, b: usize) -> (Complex64, usize) {
        let b64 = b as u64;
        let sign = (b64 & self.z_mask).count_ones() & 1;
        let k = self.phase as u32 + (self.x_mask & self.z_mask).count_ones() + 2 * sign;
        (i_pow((k & 3) as u8), (b64 ^ self.x_mask) as usize)
    }

    /// `out += coeff · P · state`.
    pub fn apply_add(&self, coeff: Complex64, state: &[Complex64], out: &mut [Complex64]) {
        let n_y = (self.x_mask & self.z_mask).count_ones();
        let base = i_pow(((self.phase as u32 + n_y) & 3) as u8) * coeff;
        let neg = -base;
        let x = self.x_mask as usize;
        let z = self.z_mask as usize;
        for (b, amp) in state.iter().enumerate() {
            if amp.re == 0.0 && amp.im == 0.0 {
                continue;
            }
            let f = if (b & z).count_ones() & 1 == 1 { neg } else { base };
            out[b ^ x] += f * amp;
        }
    }

    /// In-place `state ← P · state`.
    pub fn apply_in_place(&self, state: &mut [Complex64]) {
        let n_y = (self.x_mask & self.z_mask).count_ones();
        let base = i_pow(((self.phase as u32 + n_y) & 3) as u8);
        let x = self.x_mask as usize;
        let z = self.z_mask as usize;
        let factor = |b: usize| if (b & z).count_ones() & 1 == 1 { -base } else { base };
        if x == 0 {
            for (b, amp) in state.iter_mut().enumerate() {
                *amp *= factor(b);
            }
            return;
        }
        for b in 0..state.len() {
            let c = b ^ x;
            if b < c {
                let (ab, ac) = (state[b], state[c]);
                state[c] = factor(b) * ab;
                state[b] = factor(c) * ac;
            }
        }
    }

    pub fn to_dense(&self, n_qubits: usize) -> DMatrix<Complex64> {
        let dim = 1usize << n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for b in 0..dim {
            let (amp, c) = self.apply_to_basis(b);
            m[(c, b)] = amp;
        }
        m
    }

    pub fn label(&self, n_qubits: usize) -> String {
        (0..n_qubits)
            .map(|q| match ((self.x_mask >> q) & 1, (self.z_mask >> q) & 1) {
                (0, 0) => 'I',
                (1, 0) => 'X',
                (0, 1) => 'Z',
                _ => 'Y',
            })
            .collect()
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let phase = ["+", "+i", "-", "-i"][self.phase as usize];
        write!(f, "{phase}{}", self.label(self.support_len().max(1)))
    }
}

/// Hermitian operator `Σ_j h_j σ_j` with real coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<(f64, PauliString)>,
    h_tot: f64,
}

impl PauliSum {
    /// Strings are stored phase-free; a `-1` phase is folded into the coefficient.
    pub fn new(n_qubits: usize, terms: Vec<(f64, PauliString)>) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::InvalidArgument(format!("qubit count {n_qubits} out of range")));
        }
        let mut out = Vec::with_capacity(terms.len());
        for (c, p) in terms {
            if !c.is_finite() {
                return Err(Error::InvalidArgument("non-finite coefficient".into()));
            }
            if !p.is_hermitian() {
                return Err(Error::InvalidArgument(format!("{p:?} is not Hermitian")));
            }
            if p.support_len() > n_qubits {
                return Err(Error::InvalidArgument(format!("{p:?} acts outside {n_qubits} qubits")));
            }
            let sign = if p.phase_power() == 2 { -1.0 } else { 1.0 };
            out.push((sign * c, p.canonical()));
        }
        let h_tot = out.iter().map(|(c, _)| c.abs()).sum();
        Ok(Self { n_qubits, terms: out, h_tot })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// 1-norm of the coefficients.
    pub fn h_tot(&self) -> f64 {
        self.h_tot
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let terms: Vec<_> = self.terms.iter().map(|&(c, p)| (c * factor, p)).collect();
        let h_tot = terms.iter().map(|(c, _)| c.abs()).sum();
        Self { n_qubits: self.n_qubits, terms, h_tot }
    }

    /// `H |ψ⟩`.
    pub fn apply(&self, state: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); state.len()];
        for &(c, p) in &self.terms {
            p.apply_add(Complex64::new(c, 0.0), state, &mut out);
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for b in 0..dim {
            for &(c, p) in &self.terms {
                let (amp, r) = p.apply_to_basis(b);
                m[(r, b)] += amp * c;
            }
        }
        m
    }

    /// True when every matrix element in the computational basis is real.
    pub fn is_real(&self) -> bool {
        // A Hermitian string is real iff it has an even number of Y factors.
        self.terms.iter().all(|(_, p)| (p.x_mask & p.z_mask).count_ones() % 2 == 0)
    }
}

/// Operator with complex coefficients, kept in canonical (phase-free) form.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PauliOperator {
    terms: BTreeMap<(u64, u64), Complex64>,
}

impl PauliOperator {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::term(Complex64::new(1.0, 0.0), PauliString::IDENTITY)
    }

    pub fn term(coeff: Complex64, p: PauliString) -> Self {
        let mut op = Self::zero();
        op.add_term(coeff, p);
        op
    }

    pub fn add_term(&mut self, coeff: Complex64, p: PauliString) {
        let c = coeff * p.phase();
        *self.terms.entry((p.x_mask, p.z_mask)).or_insert(Complex64::new(0.0, 0.0)) += c;
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&(x, z), &c) in &other.terms {
            *out.terms.entry((x, z)).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { terms: self.terms.iter().map(|(&k, &c)| (k, c * s)).collect() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (&(x1, z1), &c1) in &self.terms {
            let p1 = PauliString::new(x1, z1, 0);
            for (&(x2, z2), &c2) in &other.terms {
                let p = p1.mul(&PauliString::new(x2, z2, 0));
                out.add_term(c1 * c2, p);
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self { terms: self.terms.iter().map(|(&k, &c)| (k, c.conj())).collect() }
    }

    /// Drops terms with `|c| ≤ tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        Self { terms: self.terms.iter().filter(|(_, c)| c.norm() > tol).map(|(&k, &c)| (k, c)).collect() }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Complex64, PauliString)> + '_ {
        self.terms.iter().map(|(&(x, z), &c)| (c, PauliString::new(x, z, 0)))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn apply(&self, state: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); state.len()];
        for (c, p) in self.iter() {
            p.apply_add(c, state, &mut out);
        }
        out
    }

    /// Converts to a Hermitian [`PauliSum`]; fails if any coefficient has an
    /// imaginary part above `tol`.
    pub fn into_pauli_sum(self, n_qubits: usize, tol: f64) -> Result<PauliSum> {
        let mut terms = Vec::new();
        for (c, p) in self.iter() {
            if c.im.abs() > tol {
                return Err(Error::InvalidModel(format!(
                    "operator is not Hermitian: {p:?} has coefficient {c}"
                )));
            }
            if c.re.abs() > tol {
                terms.push((c.re, p));
            }
        }
        PauliSum::new(n_qubits, terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn dense_single(ch: char) -> DMatrix<Complex64> {
        let z = c(0.0, 0.0);
        let o = c(1.0, 0.0);
        let i = c(0.0, 1.0);
        match ch {
            'I' => DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
            'X' => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
            'Y' => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
            _ => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        }
    }

    /// Kronecker product with qubit 0 as the least significant index bit.
    fn dense_from_label(label: &str) -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(1, 1, c(1.0, 0.0));
        for ch in label.chars() {
            m = dense_single(ch).kronecker(&m);
        }
        m
    }

    #[test]
    fn single_qubit_products() {
        let x = PauliString::x(0);
        let y = PauliString::y(0);
        let z = PauliString::z(0);
        // XY = iZ, YZ = iX, ZX = iY
        assert_eq!(x.mul(&y), PauliString::new(0, 1, 1));
        assert_eq!(y.mul(&z), PauliString::new(1, 0, 1));
        assert_eq!(z.mul(&x), PauliString::new(1, 1, 1));
        assert_eq!(y.mul(&x), PauliString::new(0, 1, 3));
        assert_eq!(x.mul(&x), PauliString::IDENTITY);
        assert_eq!(y.mul(&y), PauliString::IDENTITY);
    }

    #[test]
    fn dense_matches_kronecker() {
        for label in ["XIZY", "YYII", "ZXYX", "IIII"] {
            let p = PauliString::from_label(label).unwrap();
            let a = p.to_dense(4);
            let b = dense_from_label(label);
            assert!((a - b).norm() < 1e-14, "{label}");
        }
    }

    #[test]
    fn heisenberg_pair_spectrum() {
        let h = PauliSum::new(
            2,
            vec![
                (1.0, PauliString::from_label("XX").unwrap()),
                (1.0, PauliString::from_label("YY").unwrap()),
                (1.0, PauliString::from_label("ZZ").unwrap()),
            ],
        )
        .unwrap();
        assert_eq!(h.h_tot(), 3.0);
        assert!(h.is_real());
        let m = h.to_dense();
        let eig = nalgebra::SymmetricEigen::new(m);
        let mut e: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expect = [-3.0, 1.0, 1.0, 1.0];
        for (a, b) in e.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let p = PauliString::new(1, 0, 1);
        assert!(PauliSum::new(1, vec![(1.0, p)]).is_err());
        assert!(PauliSum::new(1, vec![(1.0, PauliString::x(3))]).is_err());
    }

    #[test]
    fn minus_phase_folds_into_coefficient() {
        let p = PauliString::new(1, 0, 2);
        let h = PauliSum::new(1, vec![(0.5, p)]).unwrap();
        assert_eq!(h.terms()[0], (-0.5, PauliString::x(0)));
        assert_eq!(h.h_tot(), 0.5);
    }

    fn arb_string(n: usize) -> impl Strategy<Value = PauliString> {
        let m = (1u64 << n) - 1;
        (any::<u64>(), any::<u64>(), 0u8..4).prop_map(move |(x, z, p)| PauliString::new(x & m, z & m, p))
    }

    proptest! {
        #[test]
        fn product_matches_dense(a in arb_string(3), b in arb_string(3)) {
            let lhs = a.mul(&b).to_dense(3);
            let rhs = a.to_dense(3) * b.to_dense(3);
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }

        #[test]
        fn in_place_matches_dense(p in arb_string(3), seed in any::<u64>()) {
            let mut v: Vec<Complex64> = (0..8)
                .map(|i| {
                    let t = (seed.wrapping_mul(6364136223846793005).wrapping_add(i * 1442695040888963407)) >> 11;
                    c((t % 1000) as f64 / 500.0 - 1.0, ((t / 1000) % 1000) as f64 / 500.0 - 1.0)
                })
                .collect();
            let expect = p.to_dense(3) * nalgebra::DVector::from_vec(v.clone());
            p.apply_in_place(&mut v);
            for (a, b) in v.iter().zip(expect.iter()) {
                prop_assert!((a - b).norm() < 1e-12);
            }
        }

        #[test]
        fn adjoint_is_inverse(p in arb_string(4)) {
            prop_assert_eq!(p.mul(&p.adjoint()), PauliString::IDENTITY);
        }
    }

    #[test]
    fn operator_algebra_cancels() {
        // (X + iY)(X - iY) / 4 = (1 + Z)/2 on one qubit
        let a = PauliOperator::term(c(0.5, 0.0), PauliString::x(0))
            .add(&PauliOperator::term(c(0.0, 0.5), PauliString::y(0)));
        let prod = a.mul(&a.adjoint()).pruned(1e-15);
        let h = prod.into_pauli_sum(1, 1e-12).unwrap();
        let d = h.to_dense();
        assert!((d[(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(d[(1, 1)].norm() < 1e-14);
    }
}
