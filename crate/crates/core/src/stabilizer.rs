//! Stabilizer tableau simulation and exact Pauli-observable expectations
//! for Clifford circuits.
//!
//! Multi-term observables are evaluated by Heisenberg back-propagation
//! rather than forward tableau measurement: each term makes one pass through
//! the gate list, and noise slots contribute scalar damping factors, so the
//! noisy Clifford expectation is exact (no sampling).

use num_complex::Complex64;

use crate::circuit::{clifford_rotation_index, Circuit, Gate};
use crate::error::{Error, Result};
use crate::pauli::{PauliObservable, PauliString};

/// `U q U†` for a named Clifford / Clifford-angle rotation / insertion gate.
pub fn conjugate(q: &PauliString, gate: &Gate) -> Result<PauliString> {
    conjugate_impl(q, gate, false)
}

/// `U† q U`, the adjoint direction used by Heisenberg back-propagation.
pub fn conjugate_adjoint(q: &PauliString, gate: &Gate) -> Result<PauliString> {
    conjugate_impl(q, gate, true)
}

fn conjugate_impl(q: &PauliString, gate: &Gate, adjoint: bool) -> Result<PauliString> {
    let n = q.n_qubits() as u32;
    let (x, z, p) = (q.x_bits(), q.z_bits(), q.phase_exp());
    let bit = |bits: u64, q: usize| (bits >> q) & 1;
    Ok(match gate {
        Gate::H(t) => {
            let xq = bit(x, *t);
            let zq = bit(z, *t);
            let nx = (x & !(1 << t)) | (zq << t);
            let nz = (z & !(1 << t)) | (xq << t);
            PauliString::from_raw(n, nx, nz, p + 2 * (xq & zq) as u8)
        }
        Gate::S(t) => {
            // S: X ↦ i·XZ;  S†: X ↦ -i·XZ (phase -i ≡ i^3).
            let xq = bit(x, *t);
            let nz = z ^ (xq << t);
            let dp = if adjoint { 3 } else { 1 };
            PauliString::from_raw(n, x, nz, p + (dp * xq as u8))
        }
        Gate::X(t) => PauliString::from_raw(n, x, z, p + 2 * bit(z, *t) as u8),
        Gate::Z(t) => PauliString::from_raw(n, x, z, p + 2 * bit(x, *t) as u8),
        Gate::Y(t) => {
            PauliString::from_raw(n, x, z, p + 2 * (bit(x, *t) ^ bit(z, *t)) as u8)
        }
        Gate::Cnot { control, target } => {
            let nx = x ^ (bit(x, *control) << target);
            let nz = z ^ (bit(z, *target) << control);
            PauliString::from_raw(n, nx, nz, p)
        }
        Gate::Cz(a, b) => {
            let xa = bit(x, *a);
            let xb = bit(x, *b);
            let nz = z ^ (xb << a) ^ (xa << b);
            PauliString::from_raw(n, x, nz, p + 2 * (xa & xb) as u8)
        }
        Gate::CzX(a, b) => {
            let za = bit(z, *a);
            let zb = bit(z, *b);
            let nx = x ^ (zb << a) ^ (za << b);
            PauliString::from_raw(n, nx, z, p + 2 * (za & zb) as u8)
        }
        Gate::Insertion(pauli) => {
            let sign = if pauli.commutes(q)? { 0 } else { 2 };
            q.mul_i(sign)
        }
        Gate::Rotation { axis, angle } => {
            let Some(k) = clifford_rotation_index(*angle) else {
                return Err(Error::NonClifford(format!(
                    "rotation angle {angle} is not a multiple of π/2"
                )));
            };
            let k = if adjoint { (4 - k) % 4 } else { k };
            rotation_conjugate_forward(q, axis, k)?
        }
    })
}

/// `U q U†` for `U = e^{-i(kπ/2)·axis/2}`: commuting Paulis are fixed;
/// anticommuting ones map to `cosθ·q + i·sinθ·q·axis`.
fn rotation_conjugate_forward(q: &PauliString, axis: &PauliString, k: u8) -> Result<PauliString> {
    if k == 0 || axis.commutes(q)? {
        return Ok(*q);
    }
    Ok(match k {
        1 => q.multiply(axis)?.mul_i(1),
        2 => q.mul_i(2),
        3 => q.multiply(axis)?.mul_i(3),
        _ => unreachable!(),
    })
}

/// Pure stabilizer state as n stabilizer and n destabilizer generators.
#[derive(Clone, Debug)]
pub struct StabilizerTableau {
    n_qubits: usize,
    stabilizers: Vec<PauliString>,
    destabilizers: Vec<PauliString>,
}

impl StabilizerTableau {
    /// Computational basis state; bit `i` of `basis` is qubit i's occupation.
    pub fn new_basis(n: usize, basis: u64) -> Self {
        let mut stabilizers = Vec::with_capacity(n);
        let mut destabilizers = Vec::with_capacity(n);
        for q in 0..n {
            let sign = (2 * ((basis >> q) & 1)) as u8;
            stabilizers.push(PauliString::from_raw(n as u32, 0, 1 << q, sign));
            destabilizers.push(PauliString::from_raw(n as u32, 1 << q, 0, 0));
        }
        StabilizerTableau {
            n_qubits: n,
            stabilizers,
            destabilizers,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn stabilizers(&self) -> &[PauliString] {
        &self.stabilizers
    }

    pub fn destabilizers(&self) -> &[PauliString] {
        &self.destabilizers
    }

    /// Conjugates every generator by the gate. Errors on non-Clifford gates.
    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        for g in self.stabilizers.iter_mut().chain(self.destabilizers.iter_mut()) {
            *g = conjugate(g, gate)?;
        }
        Ok(())
    }

    pub fn apply_circuit(&mut self, circuit: &Circuit) -> Result<()> {
        for gate in circuit.gates() {
            self.apply_gate(gate)?;
        }
        Ok(())
    }

    /// Expectation of a single Pauli; exactly -1, 0 or +1 for a Hermitian
    /// operator on a stabilizer state.
    pub fn pauli_expectation(&self, p: &PauliString) -> Result<f64> {
        if p.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch(self.n_qubits, p.n_qubits()));
        }
        for s in &self.stabilizers {
            if !s.commutes(p)? {
                return Ok(0.0);
            }
        }
        // p commutes with the full stabilizer group, so it equals a product
        // of generators up to phase; the destabilizer pairing selects them.
        let mut acc = PauliString::identity(self.n_qubits);
        for (d, s) in self.destabilizers.iter().zip(&self.stabilizers) {
            if !d.commutes(p)? {
                acc = acc.multiply(s)?;
            }
        }
        debug_assert_eq!(acc.key(), p.key(), "commutant element outside group span");
        let delta = (p.phase_exp() + 4 - acc.phase_exp()) % 4;
        match delta {
            0 => Ok(1.0),
            2 => Ok(-1.0),
            _ => Err(Error::InvalidArgument(format!(
                "expectation of non-Hermitian Pauli {p}"
            ))),
        }
    }
}

/// Exact per-term values of `o` back-propagated through `c` onto the basis
/// state, with each noise slot contributing its damping factor. Returned
/// values lie in [-1, 1] and pair with `o.terms()` order; the observable
/// value is the coefficient-weighted sum.
pub fn heisenberg_term_values(
    c: &Circuit,
    o: &PauliObservable,
    initial: u64,
) -> Result<Vec<f64>> {
    heisenberg_term_values_with_pattern(c, None, o, initial)
}

/// Like [`heisenberg_term_values`], but injects one insertion per rotation
/// gate on the fly — equivalent to evaluating
/// `c.apply_insertion_pattern(pattern)` without materializing it.
pub fn heisenberg_term_values_with_pattern(
    c: &Circuit,
    pattern: Option<&crate::circuit::InsertionPattern>,
    o: &PauliObservable,
    initial: u64,
) -> Result<Vec<f64>> {
    if o.n_qubits() != c.n_qubits() {
        return Err(Error::DimensionMismatch(c.n_qubits(), o.n_qubits()));
    }
    let n = c.n_qubits();
    let n_rotations = c.rotation_count();
    if let Some(p) = pattern {
        if p.len() != n_rotations {
            return Err(Error::InvalidArgument(format!(
                "pattern length {} for {} rotation layers",
                p.len(),
                n_rotations
            )));
        }
    }
    let mut values = Vec::with_capacity(o.n_terms());
    for (key, _) in o.terms() {
        let mut q = PauliString::canonical(n, key);
        let mut damping = 1.0;
        let mut rotation_idx = n_rotations;
        for (gate, slot) in c.gates().iter().zip(c.noise_slots().iter()).rev() {
            // Forward order at a rotation is gate, noise, insertion; walking
            // backward the insertion acts first.
            if let (Gate::Rotation { .. }, Some(p)) = (gate, pattern) {
                rotation_idx -= 1;
                let ins = &p.paulis()[rotation_idx];
                if !ins.commutes(&q)? {
                    q = q.mul_i(2);
                }
            }
            if let Some(channel) = slot {
                damping *= channel.damping_factor(&q)?;
            }
            q = conjugate_adjoint(&q, gate)?;
        }
        let t = q.basis_expectation(initial) * damping;
        debug_assert!(t.im.abs() < 1e-9, "imaginary residue {}", t.im);
        values.push(t.re);
    }
    Ok(values)
}

fn combine(o: &PauliObservable, values: &[f64]) -> f64 {
    let total: Complex64 = o
        .terms()
        .zip(values)
        .map(|((_, coeff), &v)| coeff * v)
        .sum();
    debug_assert!(total.im.abs() < 1e-9, "imaginary residue {}", total.im);
    total.re
}

/// Noiseless Clifford expectation `Σ_Q a_Q ⟨Q⟩` on a basis input state.
pub fn expectation(c: &Circuit, o: &PauliObservable, initial: u64) -> Result<f64> {
    if c.has_noise() {
        return Err(Error::InvalidArgument(
            "circuit carries noise; use heisenberg_noisy_expectation".into(),
        ));
    }
    Ok(combine(o, &heisenberg_term_values(c, o, initial)?))
}

/// Exact noisy Clifford expectation: back-propagation with damping factors.
pub fn heisenberg_noisy_expectation(
    c: &Circuit,
    o: &PauliObservable,
    initial: u64,
) -> Result<f64> {
    Ok(combine(o, &heisenberg_term_values(c, o, initial)?))
}

/// Expectation of a Clifford configuration of a parameterized circuit,
/// evaluated directly from the layer structure without materializing the
/// substituted gate list. Optional per-layer channels damp the observable
/// right after each layer's rotation (before its insertion).
pub fn config_expectation(
    pc: &crate::circuit::ParamCircuit,
    config: &[u8],
    layer_noise: Option<&[crate::noise::PauliNoiseChannel]>,
    o: &PauliObservable,
    initial: u64,
) -> Result<f64> {
    if config.len() != pc.n_layers() {
        return Err(Error::InvalidArgument(format!(
            "configuration length {} for {} layers",
            config.len(),
            pc.n_layers()
        )));
    }
    if let Some(chs) = layer_noise {
        if chs.len() != pc.n_layers() {
            return Err(Error::InvalidArgument(format!(
                "{} noise channels for {} layers",
                chs.len(),
                pc.n_layers()
            )));
        }
    }
    let n = pc.n_qubits();
    if o.n_qubits() != n {
        return Err(Error::DimensionMismatch(n, o.n_qubits()));
    }
    let mut total = Complex64::new(0.0, 0.0);
    for (key, coeff) in o.terms() {
        let mut q = PauliString::canonical(n, key);
        let mut damping = 1.0;
        for gate in pc.suffix().iter().rev() {
            q = conjugate_adjoint(&q, gate)?;
        }
        for l in (0..pc.n_layers()).rev() {
            let layer = &pc.layers()[l];
            if let Some(p) = &layer.insertion {
                if !p.commutes(&q)? {
                    q = q.mul_i(2);
                }
            }
            if let Some(chs) = layer_noise {
                damping *= chs[l].damping_factor(&q)?;
            }
            // Adjoint of the rotation at k·π/2 is the rotation at -k·π/2.
            q = rotation_conjugate_forward(&q, &layer.axis, (4 - config[l] % 4) % 4)?;
            for gate in layer.prefix.iter().rev() {
                q = conjugate_adjoint(&q, gate)?;
            }
        }
        let t = q.basis_expectation(initial) * damping;
        total += coeff * t;
    }
    debug_assert!(total.im.abs() < 1e-9, "imaginary residue {}", total.im);
    Ok(total.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_structured_family, CliffordConfiguration};
    use crate::noise::{attach_per_rotation, axis_noise};
    use crate::pauli::PauliLetter;
    use std::f64::consts::FRAC_PI_2;

    fn pauli(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn h_turns_z_into_x() {
        let mut t = StabilizerTableau::new_basis(1, 0);
        t.apply_gate(&Gate::H(0)).unwrap();
        assert_eq!(t.stabilizers()[0], pauli("X"));
        assert_eq!(t.pauli_expectation(&pauli("X")).unwrap(), 1.0);
        assert_eq!(t.pauli_expectation(&pauli("Z")).unwrap(), 0.0);
    }

    #[test]
    fn s_turns_x_into_y() {
        let mut t = StabilizerTableau::new_basis(1, 0);
        t.apply_gate(&Gate::H(0)).unwrap();
        t.apply_gate(&Gate::S(0)).unwrap();
        assert_eq!(t.stabilizers()[0], pauli("Y"));
        assert_eq!(t.pauli_expectation(&pauli("Y")).unwrap(), 1.0);
    }

    #[test]
    fn bell_state_correlations() {
        let mut t = StabilizerTableau::new_basis(2, 0);
        t.apply_gate(&Gate::H(0)).unwrap();
        t.apply_gate(&Gate::Cnot {
            control: 0,
            target: 1,
        })
        .unwrap();
        assert_eq!(t.pauli_expectation(&pauli("XX")).unwrap(), 1.0);
        assert_eq!(t.pauli_expectation(&pauli("ZZ")).unwrap(), 1.0);
        assert_eq!(t.pauli_expectation(&pauli("YY")).unwrap(), -1.0);
        assert_eq!(t.pauli_expectation(&pauli("ZI")).unwrap(), 0.0);
    }

    #[test]
    fn basis_sign_tracking() {
        let t = StabilizerTableau::new_basis(2, 0b10);
        assert_eq!(t.pauli_expectation(&pauli("ZI")).unwrap(), 1.0);
        assert_eq!(t.pauli_expectation(&pauli("IZ")).unwrap(), -1.0);
    }

    #[test]
    fn empty_circuit_magnetization() {
        let n = 5;
        let c = Circuit::new(n, vec![]).unwrap();
        let o = PauliObservable::z_magnetization(n);
        assert_eq!(expectation(&c, &o, 0).unwrap(), n as f64);
    }

    #[test]
    fn conjugation_respects_s_adjoint_pair() {
        for s in ["+X", "+Y", "+Z"] {
            let q = pauli(s);
            let forward = conjugate(&q, &Gate::S(0)).unwrap();
            let back = conjugate_adjoint(&forward, &Gate::S(0)).unwrap();
            assert_eq!(back, q);
        }
    }

    #[test]
    fn czx_matches_hadamard_sandwich() {
        use crate::seeding;
        let mut rng = seeding::stream(3, seeding::purpose::TEST, 0, 0);
        for _ in 0..200 {
            let q = crate::circuit::random_clifford_circuit(2, 1, &mut rng);
            let _ = q; // just advance the stream
            let p = {
                use rand::Rng;
                let x = rng.random::<u64>() & 0b11;
                let z = rng.random::<u64>() & 0b11;
                PauliString::canonical(2, crate::pauli::PauliKey { x, z })
            };
            let direct = conjugate(&p, &Gate::CzX(0, 1)).unwrap();
            let mut sandwich = p;
            for g in [
                Gate::H(0),
                Gate::H(1),
                Gate::Cz(0, 1),
                Gate::H(0),
                Gate::H(1),
            ] {
                sandwich = conjugate(&sandwich, &g).unwrap();
            }
            assert_eq!(direct, sandwich);
        }
    }

    #[test]
    fn rotation_at_pi_equals_pauli_conjugation() {
        let axis = pauli("X");
        let q = pauli("Z");
        let rot = conjugate(
            &q,
            &Gate::Rotation {
                axis,
                angle: 2.0 * FRAC_PI_2,
            },
        )
        .unwrap();
        let ins = conjugate(&q, &Gate::Insertion(axis)).unwrap();
        assert_eq!(rot, ins);
    }

    #[test]
    fn non_clifford_rotation_rejected() {
        let mut t = StabilizerTableau::new_basis(1, 0);
        let g = Gate::Rotation {
            axis: pauli("Z"),
            angle: 0.3,
        };
        assert!(matches!(t.apply_gate(&g), Err(Error::NonClifford(_))));
    }

    #[test]
    fn structured_family_cancellation_config() {
        // θ=0, φ=π/4 has angles ±π/4: not Clifford. The configuration that
        // mirrors the cancellation with k_l π/2 angles (all k equal in
        // mirrored pairs) keeps ⟨Z_1⟩ = 1.
        let d = 3;
        let pc = build_structured_family(d, 0.0, std::f64::consts::FRAC_PI_4).unwrap();
        let k = CliffordConfiguration::new(
            (0..2 * d).map(|l| if l < d { 1 } else { 3 }).collect(),
        )
        .unwrap();
        let c = pc.substitute(&k).unwrap();
        let o = PauliObservable::single(&PauliString::single(pc.n_qubits(), 0, PauliLetter::Z));
        assert_eq!(expectation(&c, &o, 0).unwrap(), 1.0);
    }

    #[test]
    fn noisy_heisenberg_two_rotation_fixture() {
        // Clifford point θ=φ=π/2 of the two-rotation single-qubit circuit
        // with axis noises γ1, γ2: ⟨X+Z⟩ = (1-2γ1)(1-2γ2).
        let (g1, g2) = (0.07, 0.11);
        let c = Circuit::new(
            1,
            vec![
                Gate::Rotation {
                    axis: pauli("X"),
                    angle: FRAC_PI_2,
                },
                Gate::Rotation {
                    axis: pauli("Z"),
                    angle: FRAC_PI_2,
                },
            ],
        )
        .unwrap();
        let noisy = attach_per_rotation(
            &c,
            &[
                axis_noise(&pauli("X"), g1).unwrap(),
                axis_noise(&pauli("Z"), g2).unwrap(),
            ],
        )
        .unwrap();
        let o = PauliObservable::from_terms(
            1,
            [
                (pauli("X"), Complex64::new(1.0, 0.0)),
                (pauli("Z"), Complex64::new(1.0, 0.0)),
            ],
        )
        .unwrap();
        let got = heisenberg_noisy_expectation(&noisy, &o, 0).unwrap();
        let want = (1.0 - 2.0 * g1) * (1.0 - 2.0 * g2);
        assert!((got - want).abs() < 1e-12);

        // Zeroing the noise reproduces the noiseless value exactly.
        let clean = expectation(&c, &o, 0).unwrap();
        let renoised = attach_per_rotation(
            &c,
            &[
                axis_noise(&pauli("X"), 0.0).unwrap(),
                axis_noise(&pauli("Z"), 0.0).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(
            heisenberg_noisy_expectation(&renoised, &o, 0).unwrap(),
            clean
        );
    }
}
