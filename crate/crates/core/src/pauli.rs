//! Phase-tracked n-qubit Pauli algebra and weighted Pauli observables.
//!
//! A [`PauliString`] stores the symplectic bit pair `(x, z)` packed into one
//! machine word each, plus a power of `i`:
//!
//! ```text
//! operator = i^phase_exp · Π_j X^{x_j} Z^{z_j}
//! ```
//!
//! with the site product ordered left-to-right (qubit 0 leftmost in the text
//! form). The canonical Hermitian letters are `I = (0,0)`, `X = (1,0)`,
//! `Z = (0,1)` and `Y = (1,1)` with `phase_exp = 1`, so the stored operator
//! equals `Y` exactly.
//!
//! All values are immutable; everything here is safe to share across workers.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Widest Pauli string representable with single-word bit vectors.
pub const MAX_QUBITS: usize = 64;

const I_POWERS: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

/// `i^k` for `k` taken mod 4.
pub fn i_power(k: u8) -> Complex64 {
    I_POWERS[(k % 4) as usize]
}

/// Single-qubit Pauli letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PauliLetter {
    I,
    X,
    Y,
    Z,
}

impl PauliLetter {
    pub fn bits(self) -> (bool, bool) {
        match self {
            PauliLetter::I => (false, false),
            PauliLetter::X => (true, false),
            PauliLetter::Y => (true, true),
            PauliLetter::Z => (false, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => PauliLetter::I,
            (true, false) => PauliLetter::X,
            (true, true) => PauliLetter::Y,
            (false, true) => PauliLetter::Z,
        }
    }

    pub fn to_char(self) -> char {
        match self {
            PauliLetter::I => 'I',
            PauliLetter::X => 'X',
            PauliLetter::Y => 'Y',
            PauliLetter::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Result<Self> {
        match c.to_ascii_uppercase() {
            'I' => Ok(PauliLetter::I),
            'X' => Ok(PauliLetter::X),
            'Y' => Ok(PauliLetter::Y),
            'Z' => Ok(PauliLetter::Z),
            other => Err(Error::Parse(format!("unknown Pauli letter '{other}'"))),
        }
    }
}

/// Phase-free hash/order key of a Pauli string: the `(x, z)` bit pair only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliKey {
    pub x: u64,
    pub z: u64,
}

/// An n-qubit Pauli operator with tracked global phase.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_qubits: u32,
    x_bits: u64,
    z_bits: u64,
    phase_exp: u8,
}

fn bit_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl PauliString {
    /// Identity operator on `n` qubits.
    pub fn identity(n: usize) -> Self {
        assert!((1..=MAX_QUBITS).contains(&n), "qubit count {n} out of range");
        PauliString {
            n_qubits: n as u32,
            x_bits: 0,
            z_bits: 0,
            phase_exp: 0,
        }
    }

    /// Single canonical letter at `qubit`, identity elsewhere.
    pub fn single(n: usize, qubit: usize, letter: PauliLetter) -> Self {
        let mut p = PauliString::identity(n);
        assert!(qubit < n, "qubit {qubit} out of range for {n} qubits");
        let (x, z) = letter.bits();
        p.x_bits |= (x as u64) << qubit;
        p.z_bits |= (z as u64) << qubit;
        if letter == PauliLetter::Y {
            p.phase_exp = 1;
        }
        p
    }

    /// Canonical Hermitian operator (tensor product of letters) for a key.
    pub fn canonical(n: usize, key: PauliKey) -> Self {
        let mask = bit_mask(n);
        debug_assert_eq!(key.x & !mask, 0);
        debug_assert_eq!(key.z & !mask, 0);
        let y_count = (key.x & key.z).count_ones() as u8;
        PauliString {
            n_qubits: n as u32,
            x_bits: key.x & mask,
            z_bits: key.z & mask,
            phase_exp: y_count % 4,
        }
    }

    pub fn from_letters(letters: &[PauliLetter]) -> Self {
        let n = letters.len();
        let mut p = PauliString::identity(n);
        for (q, letter) in letters.iter().enumerate() {
            let (x, z) = letter.bits();
            p.x_bits |= (x as u64) << q;
            p.z_bits |= (z as u64) << q;
        }
        p.phase_exp = ((p.x_bits & p.z_bits).count_ones() % 4) as u8;
        p
    }

    /// Raw constructor from packed bits; bits outside the first `n` are rejected.
    pub fn from_bits(n: usize, x_bits: u64, z_bits: u64, phase_exp: u8) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&n) {
            return Err(Error::TooManyQubits(n));
        }
        let mask = bit_mask(n);
        if x_bits & !mask != 0 || z_bits & !mask != 0 {
            return Err(Error::QubitOutOfRange {
                index: 63 - (x_bits | z_bits).leading_zeros() as usize,
                n_qubits: n,
            });
        }
        Ok(PauliString {
            n_qubits: n as u32,
            x_bits,
            z_bits,
            phase_exp: phase_exp % 4,
        })
    }

    /// Unchecked constructor for internal conjugation kernels.
    pub(crate) fn from_raw(n_qubits: u32, x_bits: u64, z_bits: u64, phase_exp: u8) -> Self {
        debug_assert!(x_bits & !bit_mask(n_qubits as usize) == 0);
        debug_assert!(z_bits & !bit_mask(n_qubits as usize) == 0);
        PauliString {
            n_qubits,
            x_bits,
            z_bits,
            phase_exp: phase_exp % 4,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits as usize
    }

    pub fn x_bits(&self) -> u64 {
        self.x_bits
    }

    pub fn z_bits(&self) -> u64 {
        self.z_bits
    }

    pub fn phase_exp(&self) -> u8 {
        self.phase_exp
    }

    pub fn x_bit(&self, qubit: usize) -> bool {
        (self.x_bits >> qubit) & 1 != 0
    }

    pub fn z_bit(&self, qubit: usize) -> bool {
        (self.z_bits >> qubit) & 1 != 0
    }

    pub fn letter(&self, qubit: usize) -> PauliLetter {
        PauliLetter::from_bits(self.x_bit(qubit), self.z_bit(qubit))
    }

    pub fn key(&self) -> PauliKey {
        PauliKey {
            x: self.x_bits,
            z: self.z_bits,
        }
    }

    /// Qubits on which the operator acts nontrivially.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        let mask = self.x_bits | self.z_bits;
        (0..self.n_qubits as usize).filter(move |q| (mask >> q) & 1 != 0)
    }

    pub fn support_size(&self) -> usize {
        (self.x_bits | self.z_bits).count_ones() as usize
    }

    pub fn is_identity_support(&self) -> bool {
        self.x_bits == 0 && self.z_bits == 0
    }

    pub fn has_phase(&self) -> bool {
        self.phase_exp != 0
    }

    /// Drops the global phase, keeping the bare `X^x Z^z` product.
    pub fn phase_free(&self) -> Self {
        PauliString {
            phase_exp: 0,
            ..*self
        }
    }

    /// Multiplies the tracked phase by `i^k`.
    pub fn mul_i(&self, k: u8) -> Self {
        PauliString {
            phase_exp: (self.phase_exp + k) % 4,
            ..*self
        }
    }

    fn y_count(&self) -> u8 {
        ((self.x_bits & self.z_bits).count_ones() % 4) as u8
    }

    /// Power `k` such that `self = i^k · canonical(key)`.
    pub fn phase_rel_canonical(&self) -> u8 {
        (self.phase_exp + 4 - self.y_count()) % 4
    }

    /// `i^k` such that `self = factor · canonical(key)`.
    pub fn phase_factor_rel_canonical(&self) -> Complex64 {
        i_power(self.phase_rel_canonical())
    }

    pub fn adjoint(&self) -> Self {
        // (i^p X^x Z^z)† = i^{-p} (-1)^{|x∧z|} X^x Z^z
        let flips = 2 * ((self.x_bits & self.z_bits).count_ones() % 2) as u8;
        PauliString {
            phase_exp: ((4 - self.phase_exp) + flips) % 4,
            ..*self
        }
    }

    pub fn is_hermitian(&self) -> bool {
        *self == self.adjoint()
    }

    fn check_dims(&self, other: &PauliString) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch(
                self.n_qubits(),
                other.n_qubits(),
            ));
        }
        Ok(())
    }

    /// Operator product `self · other` with accumulated phase.
    pub fn multiply(&self, other: &PauliString) -> Result<PauliString> {
        self.check_dims(other)?;
        // Z^z1 X^x2 = (-1)^{|z1∧x2|} X^x2 Z^z1
        let swaps = (self.z_bits & other.x_bits).count_ones() % 2;
        Ok(PauliString {
            n_qubits: self.n_qubits,
            x_bits: self.x_bits ^ other.x_bits,
            z_bits: self.z_bits ^ other.z_bits,
            phase_exp: (self.phase_exp + other.phase_exp + 2 * swaps as u8) % 4,
        })
    }

    /// True iff the operators commute; parity of per-site anticommutations.
    pub fn commutes(&self, other: &PauliString) -> Result<bool> {
        self.check_dims(other)?;
        let anti = (self.x_bits & other.z_bits).count_ones()
            + (self.z_bits & other.x_bits).count_ones();
        Ok(anti.is_multiple_of(2))
    }

    /// `⟨b|self|b⟩` for a computational basis state with occupation bits `b`.
    ///
    /// Zero unless the x-part vanishes; otherwise `i^p (-1)^{⟨z,b⟩}`.
    pub fn basis_expectation(&self, basis: u64) -> Complex64 {
        if self.x_bits != 0 {
            return Complex64::new(0.0, 0.0);
        }
        let sign = (self.z_bits & basis).count_ones() % 2;
        i_power(self.phase_exp + 2 * sign as u8)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase_rel_canonical() {
            0 => "+",
            1 => "+i",
            2 => "-",
            3 => "-i",
            _ => unreachable!(),
        };
        write!(f, "{prefix}")?;
        for q in 0..self.n_qubits() {
            write!(f, "{}", self.letter(q).to_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Parses the text form, e.g. `+XIZY`, `-iZZ`, `YY` (sign optional).
    fn from_str(s: &str) -> Result<Self> {
        let mut rest = s.trim();
        let mut phase = 0u8;
        if let Some(r) = rest.strip_prefix('-') {
            phase = 2;
            rest = r;
        } else if let Some(r) = rest.strip_prefix('+') {
            rest = r;
        }
        // An 'i' prefix is only the imaginary unit if letters follow it.
        if rest.len() > 1 && (rest.starts_with('i') && !rest[1..].starts_with('i'))
        {
            phase = (phase + 1) % 4;
            rest = &rest[1..];
        }
        if rest.is_empty() {
            return Err(Error::Parse(format!("no Pauli letters in '{s}'")));
        }
        if rest.len() > MAX_QUBITS {
            return Err(Error::TooManyQubits(rest.len()));
        }
        let letters: Result<Vec<PauliLetter>> = rest.chars().map(PauliLetter::from_char).collect();
        Ok(PauliString::from_letters(&letters?).mul_i(phase))
    }
}

/// Weighted sum of phase-free Pauli operators, `O = Σ_Q a_Q Q`.
///
/// Keys hash on the `(x, z)` bit pair only; any tracked phase of an added
/// term is folded into its coefficient. Zero-coefficient terms are pruned.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliObservable {
    n_qubits: u32,
    terms: BTreeMap<PauliKey, Complex64>,
}

impl PauliObservable {
    pub fn zero(n: usize) -> Self {
        assert!((1..=MAX_QUBITS).contains(&n), "qubit count {n} out of range");
        PauliObservable {
            n_qubits: n as u32,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PauliString, Complex64)>,
    {
        let mut o = PauliObservable::zero(n);
        for (p, c) in terms {
            o.add_term(&p, c)?;
        }
        Ok(o)
    }

    /// Magnetization observable `M_Z = Σ_i Z_i`.
    pub fn z_magnetization(n: usize) -> Self {
        let mut o = PauliObservable::zero(n);
        for q in 0..n {
            o.add_term(
                &PauliString::single(n, q, PauliLetter::Z),
                Complex64::new(1.0, 0.0),
            )
            .expect("dimensions match by construction");
        }
        o
    }

    /// Single canonical Pauli with unit coefficient.
    pub fn single(p: &PauliString) -> Self {
        let mut o = PauliObservable::zero(p.n_qubits());
        o.add_term(p, Complex64::new(1.0, 0.0)).unwrap();
        o
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits as usize
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Adds `coeff · p`, folding `p`'s phase into the coefficient.
    pub fn add_term(&mut self, p: &PauliString, coeff: Complex64) -> Result<()> {
        if p.n_qubits() != self.n_qubits() {
            return Err(Error::DimensionMismatch(self.n_qubits(), p.n_qubits()));
        }
        let folded = coeff * p.phase_factor_rel_canonical();
        let entry = self.terms.entry(p.key()).or_insert(Complex64::new(0.0, 0.0));
        *entry += folded;
        if entry.re == 0.0 && entry.im == 0.0 {
            self.terms.remove(&p.key());
        }
        Ok(())
    }

    pub fn add(&self, other: &PauliObservable) -> Result<PauliObservable> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch(
                self.n_qubits(),
                other.n_qubits(),
            ));
        }
        let mut out = self.clone();
        for (key, c) in &other.terms {
            let entry = out.terms.entry(*key).or_insert(Complex64::new(0.0, 0.0));
            *entry += c;
            if entry.re == 0.0 && entry.im == 0.0 {
                out.terms.remove(key);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, factor: Complex64) -> PauliObservable {
        if factor.re == 0.0 && factor.im == 0.0 {
            return PauliObservable::zero(self.n_qubits());
        }
        PauliObservable {
            n_qubits: self.n_qubits,
            terms: self.terms.iter().map(|(k, c)| (*k, c * factor)).collect(),
        }
    }

    /// Terms in deterministic (key-ordered) iteration order.
    pub fn terms(&self) -> impl Iterator<Item = (PauliKey, Complex64)> + '_ {
        self.terms.iter().map(|(k, c)| (*k, *c))
    }

    /// Terms as canonical Hermitian Pauli strings.
    pub fn term_paulis(&self) -> impl Iterator<Item = (PauliString, Complex64)> + '_ {
        let n = self.n_qubits();
        self.terms
            .iter()
            .map(move |(k, c)| (PauliString::canonical(n, *k), *c))
    }

    pub fn coefficient(&self, key: PauliKey) -> Complex64 {
        self.terms
            .get(&key)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }
}
