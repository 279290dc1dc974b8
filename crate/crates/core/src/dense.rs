//! Exact statevector/superoperator oracle and the emulated noisy device.
//!
//! The device emulation samples (or exhaustively enumerates) Pauli-error
//! configurations across the circuit's noise slots, runs an exact statevector
//! per trajectory, averages the per-term expectations with their
//! probabilities, and finally perturbs each Pauli term with binomial shot
//! noise. Global phases are discarded; expectations are real parts with the
//! imaginary residue asserted small.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::noise::{PauliNoiseChannel, SignedPauliMixture};
use crate::pauli::{i_power, PauliKey, PauliObservable, PauliString};
use crate::seeding;

/// Memory guard for statevector simulation.
pub const DENSE_MAX_QUBITS: usize = 20;
/// Width guard for transfer-matrix construction (4^n × 4^n entries).
pub const PTM_MAX_QUBITS: usize = 3;
/// Error-configuration count above which the device samples trajectories.
pub const EXHAUSTIVE_CONFIG_LIMIT: u64 = 1 << 16;
/// Default Monte Carlo trajectory count.
pub const DEFAULT_TRAJECTORIES: u64 = 2048;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Exact n-qubit state, amplitudes indexed by basis occupation bits.
#[derive(Clone, Debug)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new_basis(n: usize, basis: u64) -> Result<Self> {
        if n > DENSE_MAX_QUBITS {
            return Err(Error::WidthGuard(n));
        }
        let mut amps = vec![ZERO; 1 << n];
        amps[basis as usize] = ONE;
        Ok(StateVector { n_qubits: n, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn pauli_phase(p: &PauliString, basis: u64) -> Complex64 {
        let sign = (p.z_bits() & basis).count_ones() % 2;
        i_power(p.phase_exp() + 2 * sign as u8)
    }

    /// Applies `P|ψ⟩` in place.
    pub fn apply_pauli(&mut self, p: &PauliString) {
        let x = p.x_bits();
        if x == 0 {
            for (b, amp) in self.amps.iter_mut().enumerate() {
                *amp *= Self::pauli_phase(p, b as u64);
            }
            return;
        }
        let pivot = 1u64 << x.trailing_zeros();
        for b in 0..self.amps.len() as u64 {
            if b & pivot != 0 {
                continue;
            }
            let b2 = b ^ x;
            let (pa, pb) = (Self::pauli_phase(p, b), Self::pauli_phase(p, b2));
            let (ua, ub) = (self.amps[b as usize], self.amps[b2 as usize]);
            // P|b⟩ = ph(b)|b⊕x⟩, so the new amplitude at b comes from b2.
            self.amps[b as usize] = pb * ub;
            self.amps[b2 as usize] = pa * ua;
        }
    }

    fn apply_rotation(&mut self, axis: &PauliString, angle: f64) {
        let c = Complex64::new((angle / 2.0).cos(), 0.0);
        let ms = Complex64::new(0.0, -(angle / 2.0).sin());
        let x = axis.x_bits();
        if x == 0 {
            for (b, amp) in self.amps.iter_mut().enumerate() {
                *amp *= c + ms * Self::pauli_phase(axis, b as u64);
            }
            return;
        }
        let pivot = 1u64 << x.trailing_zeros();
        for b in 0..self.amps.len() as u64 {
            if b & pivot != 0 {
                continue;
            }
            let b2 = b ^ x;
            let (pa, pb) = (Self::pauli_phase(axis, b), Self::pauli_phase(axis, b2));
            let (ua, ub) = (self.amps[b as usize], self.amps[b2 as usize]);
            self.amps[b as usize] = c * ua + ms * pb * ub;
            self.amps[b2 as usize] = c * ub + ms * pa * ua;
        }
    }

    pub fn apply_gate(&mut self, gate: &Gate) {
        let len = self.amps.len() as u64;
        match gate {
            Gate::H(q) => {
                let m = 1u64 << q;
                let s = std::f64::consts::FRAC_1_SQRT_2;
                for b in 0..len {
                    if b & m != 0 {
                        continue;
                    }
                    let (a0, a1) = (self.amps[b as usize], self.amps[(b | m) as usize]);
                    self.amps[b as usize] = (a0 + a1) * s;
                    self.amps[(b | m) as usize] = (a0 - a1) * s;
                }
            }
            Gate::S(q) => {
                let m = 1u64 << q;
                let i = Complex64::new(0.0, 1.0);
                for b in 0..len {
                    if b & m != 0 {
                        self.amps[b as usize] *= i;
                    }
                }
            }
            Gate::X(q) => self.apply_pauli(&PauliString::from_raw(
                self.n_qubits as u32,
                1 << q,
                0,
                0,
            )),
            Gate::Y(q) => self.apply_pauli(&PauliString::from_raw(
                self.n_qubits as u32,
                1 << q,
                1 << q,
                1,
            )),
            Gate::Z(q) => self.apply_pauli(&PauliString::from_raw(
                self.n_qubits as u32,
                0,
                1 << q,
                0,
            )),
            Gate::Cz(a, b) => {
                let m = (1u64 << a) | (1u64 << b);
                for idx in 0..len {
                    if idx & m == m {
                        self.amps[idx as usize] = -self.amps[idx as usize];
                    }
                }
            }
            Gate::Cnot { control, target } => {
                let mc = 1u64 << control;
                let mt = 1u64 << target;
                for b in 0..len {
                    if b & mc != 0 && b & mt == 0 {
                        self.amps.swap(b as usize, (b | mt) as usize);
                    }
                }
            }
            Gate::CzX(a, b) => {
                for g in [
                    Gate::H(*a),
                    Gate::H(*b),
                    Gate::Cz(*a, *b),
                    Gate::H(*a),
                    Gate::H(*b),
                ] {
                    self.apply_gate(&g);
                }
            }
            Gate::Rotation { axis, angle } => self.apply_rotation(axis, *angle),
            Gate::Insertion(p) => self.apply_pauli(p),
        }
    }

    /// `⟨ψ|P|ψ⟩` (complex in general; real for Hermitian operators).
    pub fn pauli_expectation(&self, p: &PauliString) -> Complex64 {
        let x = p.x_bits();
        let mut acc = ZERO;
        for b in 0..self.amps.len() as u64 {
            let target = (b ^ x) as usize;
            acc += self.amps[target].conj() * Self::pauli_phase(p, b) * self.amps[b as usize];
        }
        acc
    }

    pub fn expectation(&self, o: &PauliObservable) -> f64 {
        let n = self.n_qubits;
        let total: Complex64 = o
            .terms()
            .map(|(key, coeff)| coeff * self.pauli_expectation(&PauliString::canonical(n, key)))
            .sum();
        debug_assert!(total.im.abs() < 1e-9, "imaginary residue {}", total.im);
        total.re
    }
}

/// Runs the noiseless circuit exactly.
pub fn run_statevector(c: &Circuit, initial: u64) -> Result<StateVector> {
    if c.has_noise() {
        return Err(Error::InvalidArgument(
            "circuit carries noise; use noisy_expectation".into(),
        ));
    }
    let mut state = StateVector::new_basis(c.n_qubits(), initial)?;
    for gate in c.gates() {
        state.apply_gate(gate);
    }
    Ok(state)
}

/// Exact noiseless expectation via the statevector.
pub fn statevector_expectation(c: &Circuit, o: &PauliObservable, initial: u64) -> Result<f64> {
    Ok(run_statevector(c, initial)?.expectation(o))
}

/// Trajectory policy of the device emulator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trajectories {
    /// Enumerate every error configuration with its product probability.
    Exhaustive,
    /// Monte Carlo over the given number of sampled trajectories.
    Sampled(u64),
}

/// Shot allocation across the terms of a sum observable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ShotMode {
    /// Every Pauli term is measured with the full shot budget.
    #[default]
    PerTerm,
    /// The budget is split evenly across terms.
    Shared,
}

/// Emulated-device settings: measurement shots, trajectory policy, seed.
#[derive(Clone, Copy, Debug)]
pub struct DeviceEmulatorConfig {
    /// `None` emulates an infinite-shot (exact) readout.
    pub shots: Option<u64>,
    pub shot_mode: ShotMode,
    pub trajectories: Trajectories,
    pub seed: u64,
}

impl DeviceEmulatorConfig {
    pub fn exact(seed: u64) -> Self {
        DeviceEmulatorConfig {
            shots: None,
            shot_mode: ShotMode::PerTerm,
            trajectories: Trajectories::Exhaustive,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(0) = self.shots {
            return Err(Error::InvalidArgument("need at least one shot".into()));
        }
        if let Trajectories::Sampled(0) = self.trajectories {
            return Err(Error::InvalidArgument(
                "need at least one trajectory".into(),
            ));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        DeviceEmulatorConfig { seed, ..*self }
    }
}

/// One potential error: a gate position, the factor Pauli, its firing
/// probability `1 - w`.
#[derive(Clone)]
struct ErrorSite {
    position: usize,
    pauli: PauliString,
    fire_prob: f64,
}

fn error_sites(c: &Circuit) -> Vec<ErrorSite> {
    let mut sites = Vec::new();
    for (pos, slot) in c.noise_slots().iter().enumerate() {
        if let Some(ch) = slot {
            for f in ch.factors() {
                if f.w < 1.0 && !f.pauli.is_identity_support() {
                    sites.push(ErrorSite {
                        position: pos,
                        pauli: f.pauli,
                        fire_prob: 1.0 - f.w,
                    });
                }
            }
        }
    }
    sites
}

/// Picks the stock trajectory policy for a circuit: exhaustive enumeration
/// while the error-configuration count stays within
/// [`EXHAUSTIVE_CONFIG_LIMIT`], Monte Carlo with `samples` otherwise.
pub fn auto_trajectories(c: &Circuit, samples: u64) -> Trajectories {
    let f = error_sites(c).len() as u32;
    if f < 64 && (1u64 << f) <= EXHAUSTIVE_CONFIG_LIMIT {
        Trajectories::Exhaustive
    } else {
        Trajectories::Sampled(samples)
    }
}

fn run_trajectory(
    c: &Circuit,
    initial: u64,
    sites: &[ErrorSite],
    fires: &[bool],
    o: &PauliObservable,
) -> Result<Vec<f64>> {
    let mut state = StateVector::new_basis(c.n_qubits(), initial)?;
    let mut site_idx = 0usize;
    for (pos, gate) in c.gates().iter().enumerate() {
        state.apply_gate(gate);
        while site_idx < sites.len() && sites[site_idx].position == pos {
            if fires[site_idx] {
                state.apply_pauli(&sites[site_idx].pauli);
            }
            site_idx += 1;
        }
    }
    let n = c.n_qubits();
    Ok(o.terms()
        .map(|(key, _)| {
            let v = state.pauli_expectation(&PauliString::canonical(n, key));
            debug_assert!(v.im.abs() < 1e-9);
            v.re
        })
        .collect())
}

/// Exact (infinite-shot) per-term noisy expectations under the configured
/// trajectory policy; values pair with `o.terms()` order.
pub fn noisy_term_expectations(
    c: &Circuit,
    o: &PauliObservable,
    initial: u64,
    cfg: &DeviceEmulatorConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if o.n_qubits() != c.n_qubits() {
        return Err(Error::DimensionMismatch(c.n_qubits(), o.n_qubits()));
    }
    let sites = error_sites(c);
    if sites.is_empty() {
        return run_trajectory(c, initial, &sites, &[], o);
    }
    match cfg.trajectories {
        Trajectories::Exhaustive => {
            let f = sites.len();
            if f >= 24 {
                return Err(Error::InvalidArgument(format!(
                    "{f} error sites is too many for exhaustive enumeration"
                )));
            }
            let mut totals = vec![0.0; o.n_terms()];
            let mut fires = vec![false; f];
            for mask in 0..(1u64 << f) {
                let mut weight = 1.0;
                for (i, site) in sites.iter().enumerate() {
                    fires[i] = (mask >> i) & 1 != 0;
                    weight *= if fires[i] {
                        site.fire_prob
                    } else {
                        1.0 - site.fire_prob
                    };
                }
                if weight == 0.0 {
                    continue;
                }
                let vals = run_trajectory(c, initial, &sites, &fires, o)?;
                for (t, v) in totals.iter_mut().zip(vals) {
                    *t += weight * v;
                }
            }
            Ok(totals)
        }
        Trajectories::Sampled(m) => {
            let per: Vec<Vec<f64>> = (0..m)
                .into_par_iter()
                .map(|t| {
                    let mut rng = seeding::stream(cfg.seed, seeding::purpose::TRAJECTORY, t, 0);
                    let fires: Vec<bool> = sites
                        .iter()
                        .map(|s| rng.random::<f64>() < s.fire_prob)
                        .collect();
                    run_trajectory(c, initial, &sites, &fires, o)
                })
                .collect::<Result<_>>()?;
            let mut totals = vec![0.0; o.n_terms()];
            for vals in &per {
                for (t, v) in totals.iter_mut().zip(vals) {
                    *t += v;
                }
            }
            for t in &mut totals {
                *t /= m as f64;
            }
            Ok(totals)
        }
    }
}

/// Replaces an exact Pauli expectation with the mean of `shots` projective
/// ±1 outcomes, i.e. a rescaled binomial draw.
pub fn shot_perturb<R: Rng>(value: f64, shots: u64, rng: &mut R) -> f64 {
    let p = ((1.0 + value.clamp(-1.0, 1.0)) / 2.0).clamp(0.0, 1.0);
    let draw = Binomial::new(shots, p).expect("valid binomial").sample(rng);
    2.0 * draw as f64 / shots as f64 - 1.0
}

pub(crate) fn shots_per_term(shots: u64, mode: ShotMode, n_terms: usize) -> u64 {
    match mode {
        ShotMode::PerTerm => shots,
        ShotMode::Shared => (shots / n_terms.max(1) as u64).max(1),
    }
}

fn apply_shot_noise(
    values: &mut [f64],
    cfg: &DeviceEmulatorConfig,
) {
    if let Some(shots) = cfg.shots {
        let budget = shots_per_term(shots, cfg.shot_mode, values.len());
        for (idx, v) in values.iter_mut().enumerate() {
            let mut rng = seeding::stream(cfg.seed, seeding::purpose::SHOTS, idx as u64, 0);
            *v = shot_perturb(*v, budget, &mut rng);
        }
    }
}

/// Emulated noisy-device measurement of `⟨O⟩` for the circuit.
pub fn noisy_expectation(
    c: &Circuit,
    o: &PauliObservable,
    initial: u64,
    cfg: &DeviceEmulatorConfig,
) -> Result<f64> {
    let mut values = noisy_term_expectations(c, o, initial, cfg)?;
    apply_shot_noise(&mut values, cfg);
    let total: Complex64 = o
        .terms()
        .zip(&values)
        .map(|((_, coeff), &v)| coeff * v)
        .sum();
    debug_assert!(total.im.abs() < 1e-9);
    Ok(total.re)
}

/// Exact noisy expectation by density-operator evolution; a small-n oracle
/// for validating the trajectory average.
pub fn density_noisy_expectation(c: &Circuit, o: &PauliObservable, initial: u64) -> Result<f64> {
    let n = c.n_qubits();
    if n > 10 {
        return Err(Error::WidthGuard(n));
    }
    let dim = 1usize << n;
    let mut rho = DMatrix::<Complex64>::zeros(dim, dim);
    rho[(initial as usize, initial as usize)] = ONE;
    for (gate, slot) in c.gates().iter().zip(c.noise_slots()) {
        let u = gate_matrix(gate, n)?;
        rho = &u * rho * u.adjoint();
        if let Some(ch) = slot {
            for f in ch.factors() {
                let p = pauli_matrix(&f.pauli)?;
                rho = rho.scale(f.w) + (&p * rho * p.adjoint()).scale(1.0 - f.w);
            }
        }
    }
    let mut total = ZERO;
    for (key, coeff) in o.terms() {
        let pm = pauli_matrix(&PauliString::canonical(n, key))?;
        let val: Complex64 = (pm * &rho).diagonal().iter().sum();
        total += coeff * val;
    }
    debug_assert!(total.im.abs() < 1e-9);
    Ok(total.re)
}

/// Dense unitary of a gate, built column-by-column from the statevector.
pub fn gate_matrix(gate: &Gate, n: usize) -> Result<DMatrix<Complex64>> {
    if n > 12 {
        return Err(Error::WidthGuard(n));
    }
    let dim = 1usize << n;
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for b in 0..dim {
        let mut state = StateVector::new_basis(n, b as u64)?;
        state.apply_gate(gate);
        for (r, amp) in state.amplitudes().iter().enumerate() {
            m[(r, b)] = *amp;
        }
    }
    Ok(m)
}

/// Dense matrix of a Pauli operator including its tracked phase.
pub fn pauli_matrix(p: &PauliString) -> Result<DMatrix<Complex64>> {
    let n = p.n_qubits();
    if n > 12 {
        return Err(Error::WidthGuard(n));
    }
    let dim = 1usize << n;
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for b in 0..dim as u64 {
        m[((b ^ p.x_bits()) as usize, b as usize)] = StateVector::pauli_phase(p, b);
    }
    Ok(m)
}

/// Full circuit unitary (noiseless circuits only).
pub fn circuit_unitary(c: &Circuit) -> Result<DMatrix<Complex64>> {
    let n = c.n_qubits();
    if n > 12 {
        return Err(Error::WidthGuard(n));
    }
    if c.has_noise() {
        return Err(Error::InvalidArgument(
            "circuit carries noise; no unitary exists".into(),
        ));
    }
    let dim = 1usize << n;
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for b in 0..dim {
        let mut state = StateVector::new_basis(n, b as u64)?;
        for gate in c.gates() {
            state.apply_gate(gate);
        }
        for (r, amp) in state.amplitudes().iter().enumerate() {
            m[(r, b)] = *amp;
        }
    }
    Ok(m)
}

/// Canonical Pauli basis enumeration for PTM indexing: qubit q contributes
/// the base-4 digit at position q with 0→I, 1→X, 2→Y, 3→Z.
pub fn pauli_basis(n: usize) -> Vec<PauliString> {
    let mut out = Vec::with_capacity(1 << (2 * n));
    for idx in 0..(1usize << (2 * n)) {
        let mut x = 0u64;
        let mut z = 0u64;
        for q in 0..n {
            match (idx >> (2 * q)) & 3 {
                0 => {}
                1 => x |= 1 << q,
                2 => {
                    x |= 1 << q;
                    z |= 1 << q;
                }
                _ => z |= 1 << q,
            }
        }
        out.push(PauliString::canonical(n, PauliKey { x, z }));
    }
    out
}

/// Real transfer matrix in the normalized Pauli basis:
/// `mat[i][j] = Tr[P_i ℰ(P_j)] / 2^n`.
#[derive(Clone, Debug)]
pub struct PauliTransferMatrix {
    n_qubits: usize,
    pub mat: DMatrix<f64>,
}

impl PauliTransferMatrix {
    pub fn identity(n: usize) -> Result<Self> {
        Self::guard(n)?;
        Ok(PauliTransferMatrix {
            n_qubits: n,
            mat: DMatrix::identity(1 << (2 * n), 1 << (2 * n)),
        })
    }

    fn guard(n: usize) -> Result<()> {
        if n > PTM_MAX_QUBITS {
            return Err(Error::WidthGuard(n));
        }
        Ok(())
    }

    /// Builds the PTM of an arbitrary channel given as a density-matrix map.
    pub fn from_channel<F>(n: usize, channel: F) -> Result<Self>
    where
        F: Fn(&DMatrix<Complex64>) -> DMatrix<Complex64>,
    {
        Self::guard(n)?;
        let basis = pauli_basis(n);
        let dim = basis.len();
        let norm = 1.0 / (1 << n) as f64;
        let mut mat = DMatrix::<f64>::zeros(dim, dim);
        for (j, pj) in basis.iter().enumerate() {
            let image = channel(&pauli_matrix(pj)?);
            for (i, pi) in basis.iter().enumerate() {
                let t: Complex64 = (pauli_matrix(pi)? * &image).diagonal().iter().sum();
                debug_assert!(t.im.abs() < 1e-10);
                mat[(i, j)] = t.re * norm;
            }
        }
        Ok(PauliTransferMatrix { n_qubits: n, mat })
    }

    pub fn from_unitary(n: usize, u: &DMatrix<Complex64>) -> Result<Self> {
        Self::from_channel(n, |rho| u * rho * u.adjoint())
    }

    pub fn from_gate(gate: &Gate, n: usize) -> Result<Self> {
        let u = gate_matrix(gate, n)?;
        Self::from_unitary(n, &u)
    }

    /// PTM of the rotation `e^{-iθ·axis/2}` on the axis's native width.
    pub fn from_rotation(axis: &PauliString, angle: f64) -> Result<Self> {
        Self::from_gate(
            &Gate::Rotation {
                axis: *axis,
                angle,
            },
            axis.n_qubits(),
        )
    }

    pub fn from_noise_channel(ch: &PauliNoiseChannel) -> Result<Self> {
        let factors = ch.factors().to_vec();
        Self::from_channel(ch.n_qubits(), move |rho| {
            let mut out = rho.clone();
            for f in &factors {
                let p = pauli_matrix(&f.pauli).expect("guarded width");
                out = out.scale(f.w) + (&p * out * p.adjoint()).scale(1.0 - f.w);
            }
            out
        })
    }

    pub fn from_signed_mixture(m: &SignedPauliMixture) -> Result<Self> {
        let terms = m.terms().to_vec();
        Self::from_channel(m.n_qubits(), move |rho| {
            let mut out = DMatrix::<Complex64>::zeros(rho.nrows(), rho.ncols());
            for (p, c) in &terms {
                let pm = pauli_matrix(p).expect("guarded width");
                out += (&pm * rho * pm.adjoint()).scale(*c);
            }
            out
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// `self ∘ other` as maps (matrix product).
    pub fn compose(&self, other: &PauliTransferMatrix) -> PauliTransferMatrix {
        PauliTransferMatrix {
            n_qubits: self.n_qubits,
            mat: &self.mat * &other.mat,
        }
    }

    pub fn linear_combination(parts: &[(f64, &PauliTransferMatrix)]) -> PauliTransferMatrix {
        let first = parts[0].1;
        let mut mat = DMatrix::<f64>::zeros(first.mat.nrows(), first.mat.ncols());
        for (c, p) in parts {
            mat += p.mat.scale(*c);
        }
        PauliTransferMatrix {
            n_qubits: first.n_qubits,
            mat,
        }
    }

    pub fn max_abs_diff(&self, other: &PauliTransferMatrix) -> f64 {
        (&self.mat - &other.mat).abs().max()
    }

    /// Trace preservation shows as an exact identity row for the I component.
    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        let row = self.mat.row(0);
        row.iter()
            .enumerate()
            .all(|(j, &v)| (v - if j == 0 { 1.0 } else { 0.0 }).abs() <= tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_structured_family, build_trotter_ising};
    use crate::noise::{attach_per_rotation, axis_noise, attach_profile, HardwareNoiseProfile};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn pauli(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn hadamard_on_zero() {
        let c = Circuit::new(1, vec![Gate::H(0)]).unwrap();
        let s = run_statevector(&c, 0).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amplitudes()[0] - Complex64::new(r, 0.0)).norm() < 1e-15);
        assert!((s.amplitudes()[1] - Complex64::new(r, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn trotter_state_stays_normalized() {
        let pc = build_trotter_ising(4, 2, 1.0, -1.0, 1.0).unwrap();
        let s = run_statevector(&pc.to_circuit(), 0).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn structured_family_is_identity_at_cancellation_point() {
        let pc = build_structured_family(2, 0.0, FRAC_PI_4).unwrap();
        let s = run_statevector(&pc.to_circuit(), 0).unwrap();
        assert!((s.amplitudes()[0] - ONE).norm() < 1e-10);
        for amp in &s.amplitudes()[1..] {
            assert!(amp.norm() < 1e-10);
        }
        // Perturbed angles break the cancellation.
        let pc = build_structured_family(2, 0.1, FRAC_PI_4).unwrap();
        let o = PauliObservable::single(&PauliString::single(5, 0, crate::pauli::PauliLetter::Z));
        let val = statevector_expectation(&pc.to_circuit(), &o, 0).unwrap();
        assert!((val - 1.0).abs() > 1e-3);
    }

    #[test]
    fn structured_family_unitary_is_identity_upto_d5() {
        for d in 1..=5 {
            let pc = build_structured_family(d, 0.0, FRAC_PI_4).unwrap();
            let u = circuit_unitary(&pc.to_circuit()).unwrap();
            let dim = u.nrows();
            let diff = (&u - DMatrix::<Complex64>::identity(dim, dim)).map(|c| c.norm());
            assert!(diff.max() < 1e-10, "D={d} deviates by {}", diff.max());
        }
    }

    #[test]
    fn compiled_trotter_matches_uncompiled() {
        let pc = build_trotter_ising(4, 1, 1.0, -1.0, 1.0).unwrap();
        let native = crate::circuit::compile_native(&pc).unwrap();
        let o = PauliObservable::z_magnetization(4);
        let a = statevector_expectation(&pc.to_circuit(), &o, 0).unwrap();
        let b = statevector_expectation(&native.to_circuit(), &o, 0).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn compiled_rzz_equals_direct_unitary() {
        let theta = 0.7;
        let axis = pauli("ZZ");
        let direct = gate_matrix(&Gate::Rotation { axis, angle: theta }, 2).unwrap();
        let compiled = Circuit::new(
            2,
            vec![
                Gate::H(1),
                Gate::Cz(0, 1),
                Gate::H(1),
                Gate::Rotation {
                    axis: pauli("IZ"),
                    angle: theta,
                },
                Gate::H(1),
                Gate::Cz(0, 1),
                Gate::H(1),
            ],
        )
        .unwrap();
        let u = circuit_unitary(&compiled).unwrap();
        let diff = (&u - &direct).map(|c| c.norm());
        assert!(diff.max() < 1e-12);
    }

    #[test]
    fn two_rotation_noisy_expectation_formulas() {
        // Two-rotation single-qubit circuit with axis noise after each gate.
        let grid = [0.3, 1.1, 2.4];
        for &theta in &grid {
            for &phi in &grid {
                let (g1, g2) = (0.05, 0.08);
                let base = Circuit::new(
                    1,
                    vec![
                        Gate::Rotation {
                            axis: pauli("X"),
                            angle: theta,
                        },
                        Gate::Rotation {
                            axis: pauli("Z"),
                            angle: phi,
                        },
                    ],
                )
                .unwrap();
                let noisy = attach_per_rotation(
                    &base,
                    &[
                        axis_noise(&pauli("X"), g1).unwrap(),
                        axis_noise(&pauli("Z"), g2).unwrap(),
                    ],
                )
                .unwrap();
                let o = PauliObservable::from_terms(
                    1,
                    [(pauli("X"), ONE), (pauli("Z"), ONE)],
                )
                .unwrap();
                let cfg = DeviceEmulatorConfig::exact(0);
                let got = noisy_expectation(&noisy, &o, 0, &cfg).unwrap();
                let want = (1.0 - 2.0 * g1) * (1.0 - 2.0 * g2) * theta.sin() * phi.sin()
                    + (1.0 - 2.0 * g1) * theta.cos();
                assert!((got - want).abs() < 1e-12, "θ={theta} φ={phi}: {got} vs {want}");

                // With X and Z insertions after the noisy rotations the Z
                // component flips sign.
                let pattern = crate::circuit::InsertionPattern::new(vec![pauli("X"), pauli("Z")]);
                let inserted = noisy.apply_insertion_pattern(&pattern).unwrap();
                let got = noisy_expectation(&inserted, &o, 0, &cfg).unwrap();
                let want = (1.0 - 2.0 * g1) * (1.0 - 2.0 * g2) * theta.sin() * phi.sin()
                    - (1.0 - 2.0 * g1) * theta.cos();
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exhaustive_matches_density_oracle() {
        let mut rng = crate::seeding::stream(5, crate::seeding::purpose::TEST, 0, 0);
        let mut checked = 0;
        for trial in 0..40 {
            let c = crate::circuit::random_rotation_circuit(3, 4, 2, &mut rng);
            let noisy = attach_profile(&c, &HardwareNoiseProfile::new(0.05, 0.02, 0.03, 0.04).unwrap()).unwrap();
            let sites: usize = noisy
                .noise_slots()
                .iter()
                .flatten()
                .map(|ch| ch.factors().iter().filter(|f| f.w < 1.0).count())
                .sum();
            if sites > 16 {
                continue;
            }
            let o = PauliObservable::z_magnetization(3);
            let cfg = DeviceEmulatorConfig::exact(trial);
            let a = noisy_expectation(&noisy, &o, 0, &cfg).unwrap();
            let b = density_noisy_expectation(&noisy, &o, 0).unwrap();
            assert!((a - b).abs() < 1e-12, "trial {trial}: {a} vs {b}");
            checked += 1;
        }
        assert!(checked >= 3, "only {checked} circuits were small enough");
    }

    #[test]
    fn shot_noise_is_unbiased() {
        let c = Circuit::new(1, vec![Gate::Rotation { axis: pauli("X"), angle: 0.9 }]).unwrap();
        let o = PauliObservable::single(&pauli("Z"));
        let exact = statevector_expectation(&c, &o, 0).unwrap();
        let shots = 1024u64;
        let reps = 4000;
        let mut sum = 0.0;
        for seed in 0..reps {
            let cfg = DeviceEmulatorConfig {
                shots: Some(shots),
                shot_mode: ShotMode::PerTerm,
                trajectories: Trajectories::Exhaustive,
                seed,
            };
            sum += noisy_expectation(&c, &o, 0, &cfg).unwrap();
        }
        let mean = sum / reps as f64;
        let sigma = ((1.0 - exact * exact) / shots as f64).sqrt() / (reps as f64).sqrt();
        assert!(
            (mean - exact).abs() < 3.0 * sigma + 1e-3,
            "mean {mean} vs exact {exact}"
        );
    }

    #[test]
    fn sampled_trajectories_agree_with_exhaustive_within_error() {
        let pc = build_trotter_ising(3, 1, 1.0, -1.0, 1.0).unwrap();
        let noisy = attach_profile(
            &pc.to_circuit(),
            &HardwareNoiseProfile::new(0.02, 0.01, 0.01, 0.01).unwrap(),
        )
        .unwrap();
        let o = PauliObservable::z_magnetization(3);
        let exact = noisy_expectation(&noisy, &o, 0, &DeviceEmulatorConfig::exact(0)).unwrap();
        let cfg = DeviceEmulatorConfig {
            shots: None,
            shot_mode: ShotMode::PerTerm,
            trajectories: Trajectories::Sampled(20000),
            seed: 11,
        };
        let sampled = noisy_expectation(&noisy, &o, 0, &cfg).unwrap();
        assert!((sampled - exact).abs() < 0.05, "{sampled} vs {exact}");
    }

    #[test]
    fn ptm_identity_gate() {
        let ptm = PauliTransferMatrix::from_gate(&Gate::Rotation { axis: pauli("Z"), angle: 0.0 }, 1).unwrap();
        assert!(ptm.max_abs_diff(&PauliTransferMatrix::identity(1).unwrap()) < 1e-14);
        assert!(ptm.is_trace_preserving(1e-14));
    }

    #[test]
    fn ptm_composition_matches_circuit() {
        let h = PauliTransferMatrix::from_gate(&Gate::H(0), 1).unwrap();
        let s = PauliTransferMatrix::from_gate(&Gate::S(0), 1).unwrap();
        let both = s.compose(&h);
        let c = Circuit::new(1, vec![Gate::H(0), Gate::S(0)]).unwrap();
        let u = circuit_unitary(&c).unwrap();
        let direct = PauliTransferMatrix::from_unitary(1, &u).unwrap();
        assert!(both.max_abs_diff(&direct) < 1e-13);
    }

    #[test]
    fn inverse_channel_ptm_is_identity() {
        let ch = crate::noise::PauliNoiseChannel::from_factors(
            2,
            [(pauli("ZZ"), 0.93), (pauli("XI"), 0.88)],
        )
        .unwrap();
        let inv = ch.invert().unwrap();
        let p1 = PauliTransferMatrix::from_noise_channel(&ch).unwrap();
        let p2 = PauliTransferMatrix::from_signed_mixture(&inv).unwrap();
        let both = p2.compose(&p1);
        assert!(both.max_abs_diff(&PauliTransferMatrix::identity(2).unwrap()) < 1e-12);
    }

    #[test]
    fn rotation_at_half_pi_is_clifford_conjugation() {
        // Angle π about the axis equals conjugation by the axis Pauli.
        let axis = pauli("X");
        let rot = PauliTransferMatrix::from_rotation(&axis, 2.0 * FRAC_PI_2).unwrap();
        let conj = PauliTransferMatrix::from_channel(1, |rho| {
            let x = pauli_matrix(&pauli("X")).unwrap();
            &x * rho * x.adjoint()
        })
        .unwrap();
        assert!(rot.max_abs_diff(&conj) < 1e-13);
    }
}
