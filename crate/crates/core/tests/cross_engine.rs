//! Cross-validation of the stabilizer, dense and sparse-Pauli engines on
//! random circuits, plus the structural invariants that tie them together.

use ndecs_core::circuit::{
    build_trotter_ising, compile_native, random_clifford_circuit, random_rotation_circuit,
    CliffordConfiguration, InsertionPattern,
};
use ndecs_core::dense;
use ndecs_core::noise::{attach_profile, HardwareNoiseProfile};
use ndecs_core::pauli::{PauliKey, PauliObservable, PauliString};
use ndecs_core::seeding::{self, purpose};
use ndecs_core::spd::{spd_expectation, TruncationPolicy};
use ndecs_core::stabilizer::{self, StabilizerTableau};
use rand::Rng;

fn random_observable<R: Rng>(n: usize, terms: usize, rng: &mut R) -> PauliObservable {
    let mask = if n >= 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut o = PauliObservable::zero(n);
    for _ in 0..terms {
        let key = PauliKey {
            x: rng.random::<u64>() & mask,
            z: rng.random::<u64>() & mask,
        };
        o.add_term(
            &PauliString::canonical(n, key),
            num_complex::Complex64::new(rng.random_range(-1.0..1.0), 0.0),
        )
        .unwrap();
    }
    o
}

#[test]
fn stabilizer_tableau_matches_dense_on_random_cliffords() {
    let mut rng = seeding::stream(101, purpose::TEST, 0, 0);
    for trial in 0..40 {
        let n = rng.random_range(2..=6);
        let c = random_clifford_circuit(n, 25, &mut rng);
        let initial = rng.random::<u64>() & ((1 << n) - 1);
        let o = random_observable(n, 4, &mut rng);

        let mut tableau = StabilizerTableau::new_basis(n, initial);
        tableau.apply_circuit(&c).unwrap();
        let from_tableau: f64 = o
            .term_paulis()
            .map(|(p, coeff)| coeff.re * tableau.pauli_expectation(&p).unwrap())
            .sum();

        let backprop = stabilizer::expectation(&c, &o, initial).unwrap();
        let dense_val = dense::statevector_expectation(&c, &o, initial).unwrap();
        assert!(
            (from_tableau - dense_val).abs() < 1e-10,
            "trial {trial}: tableau {from_tableau} vs dense {dense_val}"
        );
        assert!((backprop - dense_val).abs() < 1e-10);
    }
}

#[test]
fn untruncated_spd_matches_dense_on_mixed_circuits() {
    let mut rng = seeding::stream(102, purpose::TEST, 0, 0);
    for _ in 0..15 {
        let n = rng.random_range(2..=6);
        let c = random_rotation_circuit(n, 15, 6, &mut rng);
        let o = random_observable(n, 3, &mut rng);
        let spd = spd_expectation(&c, &o, 0, &TruncationPolicy::unlimited()).unwrap();
        let dense_val = dense::statevector_expectation(&c, &o, 0).unwrap();
        assert!((spd - dense_val).abs() < 1e-10, "{spd} vs {dense_val}");
    }
}

#[test]
fn noisy_heisenberg_matches_exhaustive_dense() {
    let mut rng = seeding::stream(103, purpose::TEST, 0, 0);
    let profile = HardwareNoiseProfile::new(0.01, 0.004, 0.006, 0.008).unwrap();
    let mut checked = 0;
    for _ in 0..40 {
        let n = rng.random_range(2..=5);
        let c = random_clifford_circuit(n, 12, &mut rng);
        let noisy = attach_profile(&c, &profile).unwrap();
        let sites: usize = noisy
            .noise_slots()
            .iter()
            .flatten()
            .map(|ch| ch.factors().len())
            .sum();
        if sites > 15 {
            continue;
        }
        let o = random_observable(n, 3, &mut rng);
        let heis = stabilizer::heisenberg_noisy_expectation(&noisy, &o, 0).unwrap();
        let dense_val =
            dense::noisy_expectation(&noisy, &o, 0, &dense::DeviceEmulatorConfig::exact(0))
                .unwrap();
        assert!((heis - dense_val).abs() < 1e-10, "{heis} vs {dense_val}");
        checked += 1;
    }
    assert!(checked >= 5);
}

#[test]
fn substitution_layouts_and_noise_slots_are_angle_independent() {
    let pc = compile_native(&build_trotter_ising(4, 2, 1.0, -1.0, 1.0).unwrap()).unwrap();
    let profile = HardwareNoiseProfile::enhanced_dephasing();
    let mut rng = seeding::stream(104, purpose::TEST, 0, 0);
    let reference = attach_profile(
        &pc.substitute(&CliffordConfiguration::zeros(pc.n_layers()))
            .unwrap(),
        &profile,
    )
    .unwrap();
    for _ in 0..5 {
        let ks: Vec<u8> = (0..pc.n_layers()).map(|_| rng.random_range(0..4)).collect();
        let other = attach_profile(
            &pc.substitute(&CliffordConfiguration::new(ks).unwrap()).unwrap(),
            &profile,
        )
        .unwrap();
        assert_eq!(reference.layout_signature(), other.layout_signature());
        assert_eq!(reference.noise_slots(), other.noise_slots());
    }
}

#[test]
fn native_compilation_preserves_the_unitary() {
    let pc = build_trotter_ising(4, 1, 1.0, -1.0, 1.0).unwrap();
    let native = compile_native(&pc).unwrap();
    let a = dense::circuit_unitary(&pc.to_circuit()).unwrap();
    let b = dense::circuit_unitary(&native.to_circuit()).unwrap();
    let diff = (&a - &b).map(|c| c.norm());
    assert!(diff.max() < 1e-12, "unitaries differ by {}", diff.max());
}

#[test]
fn insertion_pattern_identity_leaves_channel_unchanged() {
    let pc = build_trotter_ising(4, 1, 1.0, -1.0, 1.0).unwrap();
    let c = pc.to_circuit();
    let o = PauliObservable::z_magnetization(4);
    let base = dense::statevector_expectation(&c, &o, 0).unwrap();
    let inserted = c
        .apply_insertion_pattern(&InsertionPattern::identity(c.rotation_count(), 4))
        .unwrap();
    let with_ins = dense::statevector_expectation(&inserted, &o, 0).unwrap();
    assert!((base - with_ins).abs() < 1e-14);
}

#[test]
fn pattern_injection_matches_materialized_insertions() {
    let pc = build_trotter_ising(3, 1, 1.0, -1.0, 1.0).unwrap();
    let mut rng = seeding::stream(105, purpose::TEST, 0, 0);
    let config: Vec<u8> = (0..pc.n_layers()).map(|_| rng.random_range(0..4)).collect();
    let clifford = pc
        .substitute(&CliffordConfiguration::new(config).unwrap())
        .unwrap();
    let noisy = attach_profile(&clifford, &HardwareNoiseProfile::new(0.03, 0.01, 0.02, 0.04).unwrap()).unwrap();
    let o = PauliObservable::z_magnetization(3);
    for _ in 0..10 {
        let paulis: Vec<PauliString> = (0..noisy.rotation_count())
            .map(|_| {
                let key = PauliKey {
                    x: rng.random::<u64>() & 0b111,
                    z: rng.random::<u64>() & 0b111,
                };
                PauliString::canonical(3, key)
            })
            .collect();
        let pattern = InsertionPattern::new(paulis);
        let injected =
            stabilizer::heisenberg_term_values_with_pattern(&noisy, Some(&pattern), &o, 0)
                .unwrap();
        let materialized = stabilizer::heisenberg_term_values(
            &noisy.apply_insertion_pattern(&pattern).unwrap(),
            &o,
            0,
        )
        .unwrap();
        for (a, b) in injected.iter().zip(&materialized) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
