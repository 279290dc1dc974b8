//! Sparse Pauli dynamics: Heisenberg-picture observable propagation with
//! weight-ranked path truncation under a maximum path budget.
//!
//! The evolved observable is maintained as a sparse sum `Σ a_Q Q` of
//! weighted Pauli paths. Clifford gates conjugate every path; a rotation
//! about axis `P` leaves commuting paths untouched and mixes each
//! anticommuting path `Q` with its partner `PQ`. After every rotation the
//! set is truncated to `m_max` paths by descending weight magnitude.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::pauli::{i_power, PauliKey, PauliObservable, PauliString};
use crate::stabilizer::conjugate_adjoint;

/// Deterministic ordering rule for discarding equal-magnitude paths.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TieBreak {
    /// Prefer keeping paths with lexicographically smaller `(x, z)` keys.
    #[default]
    KeyLexicographic,
}

/// Maximum live path count and the tie-break rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TruncationPolicy {
    pub m_max: usize,
    pub tie_break: TieBreak,
}

impl TruncationPolicy {
    pub fn new(m_max: usize) -> Result<Self> {
        if m_max == 0 {
            return Err(Error::InvalidArgument("m_max must be positive".into()));
        }
        Ok(TruncationPolicy {
            m_max,
            tie_break: TieBreak::KeyLexicographic,
        })
    }

    /// No truncation in practice.
    pub fn unlimited() -> Self {
        TruncationPolicy {
            m_max: usize::MAX,
            tie_break: TieBreak::KeyLexicographic,
        }
    }
}

/// Sparse evolved observable: phase-free Pauli keys with complex weights.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliPathSet {
    n_qubits: usize,
    paths: BTreeMap<PauliKey, Complex64>,
}

impl PauliPathSet {
    pub fn from_observable(o: &PauliObservable) -> Self {
        PauliPathSet {
            n_qubits: o.n_qubits(),
            paths: o.terms().filter(|(_, c)| c.norm_sqr() > 0.0).collect(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn weight(&self, key: PauliKey) -> Complex64 {
        self.paths.get(&key).copied().unwrap_or(Complex64::ZERO)
    }

    pub fn paths(&self) -> impl Iterator<Item = (PauliKey, Complex64)> + '_ {
        self.paths.iter().map(|(k, w)| (*k, *w))
    }

    /// `Σ |a_Q|²`; invariant under rotations without truncation.
    pub fn weight_norm_sqr(&self) -> f64 {
        self.paths.values().map(|w| w.norm_sqr()).sum()
    }

    /// Overlap with a computational basis state: only Z/I-support paths
    /// contribute.
    pub fn basis_expectation(&self, basis: u64) -> Complex64 {
        let n = self.n_qubits;
        self.paths
            .iter()
            .map(|(key, w)| w * PauliString::canonical(n, *key).basis_expectation(basis))
            .sum()
    }

    fn truncate(&mut self, policy: &TruncationPolicy) {
        if self.paths.len() <= policy.m_max {
            return;
        }
        let mut entries: Vec<(PauliKey, Complex64)> =
            self.paths.iter().map(|(k, w)| (*k, *w)).collect();
        // Descending |weight|; ties keep the lexicographically smaller key.
        entries.sort_unstable_by(|(ka, wa), (kb, wb)| {
            wb.norm_sqr()
                .partial_cmp(&wa.norm_sqr())
                .expect("weights are finite")
                .then_with(|| ka.cmp(kb))
        });
        entries.truncate(policy.m_max);
        self.paths = entries.into_iter().collect();
    }

    fn prune_zeros(&mut self) {
        self.paths.retain(|_, w| w.norm_sqr() > 0.0);
    }
}

/// Splits `θ = residual + k·π/2 (mod 2π)` with `|residual| ≤ π/4`; a
/// boundary residual of exactly π/4 resolves toward the smaller `k`.
pub fn split_angle(theta: f64) -> (f64, u8) {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let k0 = (theta / half_pi).floor();
    let r0 = theta - k0 * half_pi;
    let r1 = r0 - half_pi;
    let (residual, k) = if r0 <= -r1 { (r0, k0) } else { (r1, k0 + 1.0) };
    (residual, (k as i64).rem_euclid(4) as u8)
}

/// Conjugates every path by the gate's adjoint action `C†QC`; the path
/// count never changes.
pub fn propagate_clifford(ps: &PauliPathSet, gate: &Gate) -> Result<PauliPathSet> {
    if !gate.is_clifford() {
        return Err(Error::NonClifford(format!("{gate:?}")));
    }
    let n = ps.n_qubits;
    let mut paths = BTreeMap::new();
    for (key, w) in &ps.paths {
        let q = PauliString::canonical(n, *key);
        let image = conjugate_adjoint(&q, gate)?;
        let weight = w * image.phase_factor_rel_canonical();
        paths.insert(image.key(), weight);
    }
    Ok(PauliPathSet {
        n_qubits: n,
        paths,
    })
}

/// Heisenberg update under `e^{-iθ·axis/2}`: commuting paths are unchanged;
/// an anticommuting path `Q` contributes `cosθ·Q + i·sinθ·(axis·Q)`.
/// Colliding keys merge before the set is truncated to `m_max`.
pub fn propagate_rotation(
    ps: &PauliPathSet,
    axis: &PauliString,
    theta: f64,
    policy: &TruncationPolicy,
) -> Result<PauliPathSet> {
    let n = ps.n_qubits;
    if axis.n_qubits() != n {
        return Err(Error::DimensionMismatch(n, axis.n_qubits()));
    }
    let (sin, cos) = theta.sin_cos();
    let mut paths: BTreeMap<PauliKey, Complex64> = BTreeMap::new();
    for (key, w) in &ps.paths {
        let q = PauliString::canonical(n, *key);
        if axis.commutes(&q)? {
            *paths.entry(*key).or_insert(Complex64::ZERO) += w;
        } else {
            *paths.entry(*key).or_insert(Complex64::ZERO) += w * cos;
            let product = axis.multiply(&q)?;
            let phase = i_power(1 + product.phase_rel_canonical());
            *paths.entry(product.key()).or_insert(Complex64::ZERO) += w * sin * phase;
        }
    }
    let mut out = PauliPathSet {
        n_qubits: n,
        paths,
    };
    out.prune_zeros();
    out.truncate(policy);
    Ok(out)
}

/// Full SPD run record: the expectation plus live path counts observed
/// after each rotation (post-truncation), in back-propagation order.
#[derive(Clone, Debug)]
pub struct SpdRun {
    pub value: f64,
    pub path_counts: Vec<usize>,
    pub peak_paths: usize,
}

/// Back-propagates `o` through the circuit and contracts with the basis
/// state. Rotations split into a Clifford part and a residual `|θ'| ≤ π/4`;
/// truncation fires only after rotations.
pub fn spd_run(
    c: &Circuit,
    o: &PauliObservable,
    initial: u64,
    policy: &TruncationPolicy,
) -> Result<SpdRun> {
    if c.has_noise() {
        return Err(Error::InvalidArgument(
            "sparse Pauli dynamics runs noiseless circuits".into(),
        ));
    }
    if o.n_qubits() != c.n_qubits() {
        return Err(Error::DimensionMismatch(c.n_qubits(), o.n_qubits()));
    }
    let mut ps = PauliPathSet::from_observable(o);
    let mut counts = Vec::with_capacity(c.rotation_count());
    let mut peak = ps.n_paths();
    for gate in c.gates().iter().rev() {
        match gate {
            Gate::Rotation { axis, angle } => {
                let (residual, k) = split_angle(*angle);
                if k != 0 {
                    let clifford_part = Gate::Rotation {
                        axis: *axis,
                        angle: k as f64 * std::f64::consts::FRAC_PI_2,
                    };
                    ps = propagate_clifford(&ps, &clifford_part)?;
                }
                ps = propagate_rotation(&ps, axis, residual, policy)?;
                counts.push(ps.n_paths());
                peak = peak.max(ps.n_paths());
            }
            g => {
                ps = propagate_clifford(&ps, g)?;
            }
        }
    }
    let total = ps.basis_expectation(initial);
    if total.im.abs() >= 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "imaginary residue {} in SPD expectation",
            total.im
        )));
    }
    Ok(SpdRun {
        value: total.re,
        path_counts: counts,
        peak_paths: peak,
    })
}

/// Expectation value alone.
pub fn spd_expectation(
    c: &Circuit,
    o: &PauliObservable,
    initial: u64,
    policy: &TruncationPolicy,
) -> Result<f64> {
    Ok(spd_run(c, o, initial, policy)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_structured_family, random_clifford_circuit};
    use crate::dense::statevector_expectation;
    use crate::pauli::PauliLetter;
    use crate::seeding;
    use crate::stabilizer;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn pauli(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn single_obs(s: &str) -> PauliObservable {
        PauliObservable::single(&pauli(s))
    }

    #[test]
    fn split_angle_cases() {
        assert_eq!(split_angle(0.0), (0.0, 0));
        let (r, k) = split_angle(FRAC_PI_2);
        assert!(r.abs() < 1e-15);
        assert_eq!(k, 1);
        let (r, k) = split_angle(0.9);
        assert_eq!(k, 1);
        assert!((r - (0.9 - FRAC_PI_2)).abs() < 1e-15);
        assert!(r.abs() <= FRAC_PI_4 + 1e-12);
        // Boundary resolves toward the smaller k.
        let (r, k) = split_angle(FRAC_PI_4);
        assert_eq!(k, 0);
        assert!((r - FRAC_PI_4).abs() < 1e-15);
        // Exhaustive constraint check on a grid.
        for i in -40..40 {
            let theta = i as f64 * 0.17;
            let (r, k) = split_angle(theta);
            assert!(r.abs() <= FRAC_PI_4 + 1e-12, "θ={theta}");
            let rebuilt = r + k as f64 * FRAC_PI_2;
            let diff = (theta - rebuilt).rem_euclid(std::f64::consts::TAU);
            assert!(diff < 1e-9 || (std::f64::consts::TAU - diff) < 1e-9);
        }
    }

    #[test]
    fn clifford_propagation_examples() {
        let ps = PauliPathSet::from_observable(&single_obs("Z"));
        let out = propagate_clifford(&ps, &Gate::H(0)).unwrap();
        assert_eq!(out.n_paths(), 1);
        assert!((out.weight(pauli("X").key()) - Complex64::ONE).norm() < 1e-15);

        let ps = PauliPathSet::from_observable(&single_obs("XI"));
        let out = propagate_clifford(&ps, &Gate::Cz(0, 1)).unwrap();
        assert!((out.weight(pauli("XZ").key()) - Complex64::ONE).norm() < 1e-15);
    }

    #[test]
    fn rotation_update_matches_dense_conjugation() {
        // Back-propagating Z through R_X(θ) gives cosθ·Z + sinθ·Y.
        let theta = 0.37;
        let ps = PauliPathSet::from_observable(&single_obs("Z"));
        let out =
            propagate_rotation(&ps, &pauli("X"), theta, &TruncationPolicy::unlimited()).unwrap();
        assert_eq!(out.n_paths(), 2);
        assert!((out.weight(pauli("Z").key()).re - theta.cos()).abs() < 1e-15);
        assert!((out.weight(pauli("Y").key()).re - theta.sin()).abs() < 1e-15);
        // ℓ2 norm of the weights is preserved.
        assert!((out.weight_norm_sqr() - 1.0).abs() < 1e-14);

        // Commuting axis leaves the set untouched.
        let out =
            propagate_rotation(&ps, &pauli("Z"), theta, &TruncationPolicy::unlimited()).unwrap();
        assert_eq!(out.n_paths(), 1);
        assert!((out.weight(pauli("Z").key()) - Complex64::ONE).norm() < 1e-15);
    }

    #[test]
    fn zero_angle_is_identity() {
        let ps = PauliPathSet::from_observable(&single_obs("Y"));
        let out = propagate_rotation(&ps, &pauli("X"), 0.0, &TruncationPolicy::unlimited()).unwrap();
        assert_eq!(out, ps);
    }

    #[test]
    fn clifford_circuit_is_exact_and_matches_stabilizer() {
        let mut rng = seeding::stream(21, seeding::purpose::TEST, 0, 0);
        for _ in 0..20 {
            let c = random_clifford_circuit(5, 30, &mut rng);
            let o = PauliObservable::z_magnetization(5);
            let spd = spd_expectation(&c, &o, 3, &TruncationPolicy::unlimited()).unwrap();
            let stab = stabilizer::expectation(&c, &o, 3).unwrap();
            assert!((spd - stab).abs() < 1e-12);
        }
    }

    #[test]
    fn untruncated_matches_dense_on_rotation_circuits() {
        let mut rng = seeding::stream(22, seeding::purpose::TEST, 0, 0);
        for _ in 0..10 {
            let c = crate::circuit::random_rotation_circuit(5, 20, 8, &mut rng);
            let o = PauliObservable::z_magnetization(5);
            let spd = spd_expectation(&c, &o, 0, &TruncationPolicy::unlimited()).unwrap();
            let dense = statevector_expectation(&c, &o, 0).unwrap();
            assert!((spd - dense).abs() < 1e-10, "{spd} vs {dense}");
        }
    }

    #[test]
    fn structured_family_doubles_paths_per_block() {
        let d = 6;
        let pc = build_structured_family(d, 0.0, FRAC_PI_4).unwrap();
        let n = pc.n_qubits();
        let o = PauliObservable::single(&PauliString::single(n, 0, PauliLetter::Z));
        let policy = TruncationPolicy::new(1 << d).unwrap();
        let run = spd_run(&pc.to_circuit(), &o, 0, &policy).unwrap();
        assert!((run.value - 1.0).abs() < 1e-10);
        // Path count doubles through the first D back-propagated blocks.
        for (i, count) in run.path_counts.iter().take(d).enumerate() {
            assert_eq!(*count, 1 << (i + 1));
        }
        assert_eq!(run.peak_paths, 1 << d);
        // At the peak all weights share magnitude 2^{-D/2}.
        let mut ps = PauliPathSet::from_observable(&o);
        let gates: Vec<Gate> = pc.to_circuit().gates().to_vec();
        let mut rotations = 0;
        for gate in gates.iter().rev() {
            match gate {
                Gate::Rotation { axis, angle } => {
                    let (residual, k) = split_angle(*angle);
                    if k != 0 {
                        ps = propagate_clifford(
                            &ps,
                            &Gate::Rotation {
                                axis: *axis,
                                angle: k as f64 * FRAC_PI_2,
                            },
                        )
                        .unwrap();
                    }
                    ps = propagate_rotation(&ps, axis, residual, &policy).unwrap();
                    rotations += 1;
                    if rotations == d {
                        break;
                    }
                }
                g => ps = propagate_clifford(&ps, g).unwrap(),
            }
        }
        let expect = 2f64.powf(-(d as f64) / 2.0);
        for (_, w) in ps.paths() {
            assert!((w.norm() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn truncation_shrinks_and_keeps_largest() {
        let theta = 0.4; // cos > sin: the partner path is the smaller one
        let ps = PauliPathSet::from_observable(&single_obs("Z"));
        let out = propagate_rotation(&ps, &pauli("X"), theta, &TruncationPolicy::new(1).unwrap())
            .unwrap();
        assert_eq!(out.n_paths(), 1);
        assert!((out.weight(pauli("Z").key()).re - theta.cos()).abs() < 1e-15);
    }

    #[test]
    fn d_one_exact_with_two_paths() {
        let pc = build_structured_family(1, 0.0, FRAC_PI_4).unwrap();
        let o = PauliObservable::single(&PauliString::single(3, 0, PauliLetter::Z));
        let run = spd_run(
            &pc.to_circuit(),
            &o,
            0,
            &TruncationPolicy::new(2).unwrap(),
        )
        .unwrap();
        assert!((run.value - 1.0).abs() < 1e-12);
    }
}
