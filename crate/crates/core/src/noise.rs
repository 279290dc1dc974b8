//! Pauli noise channels, the hardware-inspired two-qubit noise profile,
//! channel inverses and Heisenberg damping factors.
//!
//! A channel is an ordered composition of single-Pauli factors,
//! `∘_k (w_k · id + (1-w_k) · P_k · P_k†)`. Its adjoint action on a Pauli
//! observable is a pure scalar (the damping factor), which is what the
//! stabilizer engine uses for exact noisy evaluation.

use std::collections::BTreeMap;

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::pauli::{PauliKey, PauliLetter, PauliString};

/// One factor `w · id + (1-w) · P · P†` of a composed Pauli channel.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseFactor {
    pub pauli: PauliString,
    pub w: f64,
}

/// Sequential composition of single-Pauli noise factors.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliNoiseChannel {
    n_qubits: usize,
    factors: Vec<NoiseFactor>,
}

impl PauliNoiseChannel {
    pub fn identity(n: usize) -> Self {
        PauliNoiseChannel {
            n_qubits: n,
            factors: Vec::new(),
        }
    }

    pub fn from_factors<I>(n: usize, factors: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PauliString, f64)>,
    {
        let mut ch = PauliNoiseChannel::identity(n);
        for (p, w) in factors {
            ch.push_factor(p, w)?;
        }
        Ok(ch)
    }

    /// Appends a factor; the factor Pauli's phase is irrelevant under
    /// conjugation and is dropped.
    pub fn push_factor(&mut self, pauli: PauliString, w: f64) -> Result<()> {
        if pauli.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch(self.n_qubits, pauli.n_qubits()));
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidProbability(w));
        }
        self.factors.push(NoiseFactor {
            pauli: pauli.phase_free(),
            w,
        });
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn factors(&self) -> &[NoiseFactor] {
        &self.factors
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    /// True when the channel acts as the identity.
    pub fn is_trivial(&self) -> bool {
        self.factors
            .iter()
            .all(|f| f.w == 1.0 || f.pauli.is_identity_support())
    }

    /// Scalar by which the adjoint action maps `q ↦ factor · q`:
    /// `Π_k (w_k + (1-w_k) s_k)` with `s_k = ±1` by commutation.
    pub fn damping_factor(&self, q: &PauliString) -> Result<f64> {
        let mut acc = 1.0;
        for f in &self.factors {
            if !f.pauli.commutes(q)? {
                acc *= 2.0 * f.w - 1.0;
            }
        }
        Ok(acc)
    }

    /// Signed Pauli mixture realizing the channel inverse.
    ///
    /// Per factor, `inverse = (w/(2w-1)) id - ((1-w)/(2w-1)) P·P†`; factors
    /// compose and the product expands to a flat signed mixture.
    pub fn invert(&self) -> Result<SignedPauliMixture> {
        let mut terms: BTreeMap<PauliKey, f64> = BTreeMap::new();
        terms.insert(PauliString::identity(self.n_qubits).key(), 1.0);
        for f in &self.factors {
            if (f.w - 0.5).abs() < 1e-12 {
                return Err(Error::NonInvertibleChannel);
            }
            let alpha = f.w / (2.0 * f.w - 1.0);
            let beta = -(1.0 - f.w) / (2.0 * f.w - 1.0);
            let mut next: BTreeMap<PauliKey, f64> = BTreeMap::new();
            for (key, c) in &terms {
                let p = PauliString::canonical(self.n_qubits, *key);
                *next.entry(*key).or_insert(0.0) += c * alpha;
                let shifted = p.multiply(&f.pauli)?.key();
                *next.entry(shifted).or_insert(0.0) += c * beta;
            }
            terms = next;
        }
        Ok(SignedPauliMixture {
            n_qubits: self.n_qubits,
            terms: terms
                .into_iter()
                .filter(|(_, c)| *c != 0.0)
                .map(|(k, c)| (PauliString::canonical(self.n_qubits, k), c))
                .collect(),
        })
    }
}

/// Affine combination of Pauli conjugation channels with possibly negative
/// coefficients; coefficients sum to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedPauliMixture {
    n_qubits: usize,
    terms: Vec<(PauliString, f64)>,
}

impl SignedPauliMixture {
    pub fn identity(n: usize) -> Self {
        SignedPauliMixture {
            n_qubits: n,
            terms: vec![(PauliString::identity(n), 1.0)],
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(PauliString, f64)] {
        &self.terms
    }

    pub fn coefficient_sum(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c).sum()
    }

    /// Scalar of the adjoint action on a Pauli observable,
    /// `Σ_i c_i s_i` with `s_i = ±1` by commutation.
    pub fn damping_factor(&self, q: &PauliString) -> Result<f64> {
        let mut acc = 0.0;
        for (p, c) in &self.terms {
            acc += if p.commutes(q)? { *c } else { -*c };
        }
        Ok(acc)
    }
}

/// Axis-aligned noise `ρ ↦ (1-γ)ρ + γ PρP†` as a single-factor channel.
pub fn axis_noise(axis: &PauliString, gamma: f64) -> Result<PauliNoiseChannel> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidProbability(gamma));
    }
    PauliNoiseChannel::from_factors(axis.n_qubits(), [(*axis, 1.0 - gamma)])
}

/// Hardware-inspired noise strengths: correlated ZZ dephasing after each
/// two-qubit gate plus independent single-qubit X/Y/Z errors on both
/// participating qubits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HardwareNoiseProfile {
    pub gamma_zz: f64,
    pub gamma_x: f64,
    pub gamma_y: f64,
    pub gamma_z: f64,
}

impl HardwareNoiseProfile {
    pub fn new(gamma_zz: f64, gamma_x: f64, gamma_y: f64, gamma_z: f64) -> Result<Self> {
        for g in [gamma_zz, gamma_x, gamma_y, gamma_z] {
            if !(0.0..=0.5).contains(&g) {
                return Err(Error::InvalidProbability(g));
            }
        }
        Ok(HardwareNoiseProfile {
            gamma_zz,
            gamma_x,
            gamma_y,
            gamma_z,
        })
    }

    pub fn noiseless() -> Self {
        HardwareNoiseProfile {
            gamma_zz: 0.0,
            gamma_x: 0.0,
            gamma_y: 0.0,
            gamma_z: 0.0,
        }
    }

    /// Enhanced two-qubit dephasing point used by the stock experiments.
    pub fn enhanced_dephasing() -> Self {
        HardwareNoiseProfile {
            gamma_zz: 1e-3,
            gamma_x: 2e-3,
            gamma_y: 2e-3,
            gamma_z: 2e-3,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.gamma_zz == 0.0 && self.gamma_x == 0.0 && self.gamma_y == 0.0 && self.gamma_z == 0.0
    }

    /// The seven-factor channel following a two-qubit gate on `(a, b)`.
    pub fn two_qubit_channel(&self, n: usize, a: usize, b: usize) -> PauliNoiseChannel {
        let mut zz = PauliString::single(n, a, PauliLetter::Z);
        zz = zz
            .multiply(&PauliString::single(n, b, PauliLetter::Z))
            .expect("same width");
        let mut ch = PauliNoiseChannel::identity(n);
        ch.push_factor(zz, 1.0 - self.gamma_zz).unwrap();
        for q in [a, b] {
            ch.push_factor(PauliString::single(n, q, PauliLetter::X), 1.0 - self.gamma_x)
                .unwrap();
            ch.push_factor(PauliString::single(n, q, PauliLetter::Y), 1.0 - self.gamma_y)
                .unwrap();
            ch.push_factor(PauliString::single(n, q, PauliLetter::Z), 1.0 - self.gamma_z)
                .unwrap();
        }
        ch
    }
}

/// Attaches the hardware profile: a noise slot after each two-qubit gate
/// (CZ, CNOT, CZ_X, or a two-qubit rotation). Single-qubit gates and Pauli
/// insertions receive no noise.
pub fn attach_profile(circuit: &Circuit, profile: &HardwareNoiseProfile) -> Result<Circuit> {
    if circuit.has_noise() {
        return Err(Error::InvalidArgument(
            "circuit already carries noise slots".into(),
        ));
    }
    let n = circuit.n_qubits();
    let mut out = circuit.clone();
    for (pos, gate) in circuit.gates().iter().enumerate() {
        if let Some((a, b)) = gate.two_qubit_pair() {
            out.set_noise(pos, profile.two_qubit_channel(n, a, b))?;
        }
    }
    Ok(out)
}

/// Attaches axis-aligned noise of strength `gamma` after every rotation gate.
pub fn attach_axis_noise(circuit: &Circuit, gamma: f64) -> Result<Circuit> {
    if circuit.has_noise() {
        return Err(Error::InvalidArgument(
            "circuit already carries noise slots".into(),
        ));
    }
    let mut out = circuit.clone();
    for (pos, gate) in circuit.gates().iter().enumerate() {
        if let Gate::Rotation { axis, .. } = gate {
            out.set_noise(pos, axis_noise(axis, gamma)?)?;
        }
    }
    Ok(out)
}

/// Attaches one given channel after each rotation gate, in order.
pub fn attach_per_rotation(
    circuit: &Circuit,
    channels: &[PauliNoiseChannel],
) -> Result<Circuit> {
    if circuit.has_noise() {
        return Err(Error::InvalidArgument(
            "circuit already carries noise slots".into(),
        ));
    }
    let rotations = circuit.rotation_positions();
    if rotations.len() != channels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} channels for {} rotation layers",
            channels.len(),
            rotations.len()
        )));
    }
    let mut out = circuit.clone();
    for (pos, ch) in rotations.into_iter().zip(channels.iter()) {
        if ch.n_qubits() != circuit.n_qubits() {
            return Err(Error::DimensionMismatch(circuit.n_qubits(), ch.n_qubits()));
        }
        out.set_noise(pos, ch.clone())?;
    }
    Ok(out)
}
