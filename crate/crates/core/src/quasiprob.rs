//! Clifford decompositions of Pauli rotations, their noisy counterparts with
//! the critical noise rate, and the structure-preserving Monte Carlo (SPMC)
//! estimators.
//!
//! A rotation channel decomposes over the four Clifford rotations
//! `{R_P(kπ/2)}` with coefficients whose ℓ1-norm `|sinθ|+|cosθ|` is minimal;
//! composing axis-aligned noise into the gate before decomposing shrinks the
//! ℓ1-norm to `max[1, (1-2γ)(|sinθ|+|cosθ|)]`, reaching 1 at the critical
//! noise rate. The SPMC estimator samples one Clifford angle index per layer
//! from the normalized coefficient magnitudes, so every sampled circuit
//! shares the target's gate layout.
//!
//! The general layer-wise static Monte Carlo estimator, when each layer's
//! stabilizer-preserving decomposition is the robustness-optimal one, draws
//! from exactly these distributions with the same `Π_l ℓ1^{(l)}` prefactor;
//! [`spmc_estimate`] therefore *is* that estimator for this decomposition
//! family, and no separate code path exists for it.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;

use crate::circuit::ParamCircuit;
use crate::error::{Error, Result};
use crate::noise::PauliNoiseChannel;
use crate::pauli::PauliObservable;
use crate::seeding;
use crate::stabilizer::config_expectation;

/// Quasiprobability coefficients over the four Clifford rotation angles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateDecomposition {
    /// Coefficient a_k of the `kπ/2` rotation channel, k = 0..3.
    pub a: [f64; 4],
    /// Exactly `Σ_k |a_k|`.
    pub l1: f64,
}

impl GateDecomposition {
    fn new(a: [f64; 4]) -> Self {
        let l1 = a.iter().map(|c| c.abs()).sum();
        GateDecomposition { a, l1 }
    }

    pub fn coefficient_sum(&self) -> f64 {
        self.a.iter().sum()
    }

    /// Sampling probabilities `|a_k| / ℓ1`.
    pub fn probabilities(&self) -> [f64; 4] {
        let mut p = [0.0; 4];
        for (pk, ak) in p.iter_mut().zip(&self.a) {
            *pk = ak.abs() / self.l1;
        }
        p
    }

    /// Draws an angle index with probability `|a_k|/ℓ1`; returns the index
    /// and the coefficient's sign (+1 for zero coefficients, which have zero
    /// draw probability).
    pub fn sample<R: Rng>(&self, rng: &mut R) -> (u8, f64) {
        let u: f64 = rng.random::<f64>() * self.l1;
        let mut acc = 0.0;
        for (k, ak) in self.a.iter().enumerate() {
            acc += ak.abs();
            if u < acc {
                return (k as u8, if *ak < 0.0 { -1.0 } else { 1.0 });
            }
        }
        // Fell off the end through rounding; take the last nonzero entry.
        let k = (0..4).rev().find(|&k| self.a[k] != 0.0).unwrap_or(3);
        (k as u8, if self.a[k] < 0.0 { -1.0 } else { 1.0 })
    }
}

/// Minimal-ℓ1 Clifford decomposition of the rotation channel `R_P(θ)` over
/// `{R_P(kπ/2)}`, with `ℓ1 = |sinθ| + |cosθ|`.
pub fn optimal_decomposition(theta: f64) -> GateDecomposition {
    noisy_decomposition(theta, 0.0).expect("zero noise rate is valid")
}

/// Decomposition of the composite noisy rotation — axis-aligned noise of
/// strength `gamma` following `R_P(θ)` — whose ℓ1-norm is
/// `max[1, (1-2γ)(|sinθ|+|cosθ|)]`.
pub fn noisy_decomposition(theta: f64, gamma: f64) -> Result<GateDecomposition> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidProbability(gamma));
    }
    let (s, c) = theta.sin_cos();
    let denom = 2.0 * (s.abs() + c.abs());
    let shrink = 1.0 - 2.0 * gamma;
    Ok(GateDecomposition::new([
        c.abs() / denom + shrink * c / 2.0,
        s.abs() / denom + shrink * s / 2.0,
        c.abs() / denom - shrink * c / 2.0,
        s.abs() / denom - shrink * s / 2.0,
    ]))
}

/// Noise rate beyond which the noisy rotation becomes a convex Clifford
/// mixture: `γ_c = (1 - 1/(|sinθ|+|cosθ|)) / 2`, clipped to [0, 1/2).
pub fn critical_noise(theta: f64) -> f64 {
    let l1 = theta.sin().abs() + theta.cos().abs();
    (0.5 * (1.0 - 1.0 / l1)).clamp(0.0, 0.5 - f64::EPSILON)
}

/// Three-term decomposition of `R_Z(θ)` over the I, Z and S gate channels;
/// minimal ℓ1 on θ ∈ [0, π/4].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThreeTermDecomposition {
    pub c_identity: f64,
    pub c_z: f64,
    pub c_s: f64,
}

impl ThreeTermDecomposition {
    pub fn l1(&self) -> f64 {
        self.c_identity.abs() + self.c_z.abs() + self.c_s.abs()
    }

    pub fn coefficient_sum(&self) -> f64 {
        self.c_identity + self.c_z + self.c_s
    }
}

pub fn three_term_decomposition(theta: f64) -> ThreeTermDecomposition {
    let (s, c) = theta.sin_cos();
    ThreeTermDecomposition {
        c_identity: (1.0 + c - s) / 2.0,
        c_z: (1.0 - c - s) / 2.0,
        c_s: s,
    }
}

/// Layer-wise theoretical Monte Carlo cost factor
/// `Π_l (|sinθ_l| + |cosθ_l|)²` of a parameterized circuit.
pub fn smc_prefactor(pc: &ParamCircuit) -> f64 {
    pc.angles()
        .iter()
        .map(|a| a.sin().abs() + a.cos().abs())
        .product::<f64>()
        .powi(2)
}

/// Like [`smc_prefactor`], but greedily merges adjacent same-axis rotations
/// (e.g. the touching half-steps of a second-order Trotter product) before
/// taking the product, since a merged rotation decomposes strictly cheaper
/// than its parts.
pub fn smc_prefactor_merged(pc: &ParamCircuit) -> f64 {
    let mut open: Vec<(crate::pauli::PauliString, f64)> = Vec::new();
    let mut log_product = 0.0;
    let close = |entry: (crate::pauli::PauliString, f64)| {
        let (_, angle) = entry;
        (angle.sin().abs() + angle.cos().abs()).ln()
    };
    for (layer, &angle) in pc.layers().iter().zip(pc.angles()) {
        if !layer.prefix.is_empty() {
            for entry in open.drain(..) {
                log_product += close(entry);
            }
        } else {
            let mut kept = Vec::with_capacity(open.len());
            for entry in open.drain(..) {
                if entry.0.commutes(&layer.axis).unwrap_or(false) {
                    kept.push(entry);
                } else {
                    log_product += close(entry);
                }
            }
            open = kept;
        }
        if let Some(entry) = open.iter_mut().find(|(axis, _)| axis.key() == layer.axis.key()) {
            entry.1 += angle;
        } else {
            open.push((layer.axis, angle));
        }
    }
    for entry in open {
        log_product += close(entry);
    }
    (2.0 * log_product).exp()
}

/// Robustness of magic of a single-qubit state: `max(1, |x|+|y|+|z|)`.
pub fn single_qubit_robustness(bloch: (f64, f64, f64)) -> Result<f64> {
    let (x, y, z) = bloch;
    let norm2 = x * x + y * y + z * z;
    if norm2 > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "non-physical Bloch vector, |r|^2 = {norm2}"
        )));
    }
    Ok(1.0f64.max(x.abs() + y.abs() + z.abs()))
}

/// Decomposition cache keyed by `(angle mod 2π, γ)` quantized at 1e-15.
#[derive(Default)]
pub struct DecompCache {
    map: HashMap<(u64, u64), GateDecomposition>,
}

impl DecompCache {
    pub fn new() -> Self {
        DecompCache::default()
    }

    fn quantize(x: f64) -> u64 {
        (x.rem_euclid(std::f64::consts::TAU) / 1e-15).round() as u64
    }

    pub fn noisy(&mut self, theta: f64, gamma: f64) -> Result<GateDecomposition> {
        let key = (Self::quantize(theta), (gamma / 1e-15).round() as u64);
        if let Some(d) = self.map.get(&key) {
            return Ok(*d);
        }
        let d = noisy_decomposition(theta, gamma)?;
        self.map.insert(key, d);
        Ok(d)
    }

    pub fn optimal(&mut self, theta: f64) -> GateDecomposition {
        self.noisy(theta, 0.0).expect("zero noise rate is valid")
    }
}

/// Online mean/variance accumulator with deterministic merging.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&self, other: &RunningStats) -> RunningStats {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        RunningStats {
            n,
            mean: self.mean + delta * other.n as f64 / n as f64,
            m2: self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64,
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.std_dev() / (self.n as f64).sqrt()
        }
    }
}

/// Monte Carlo estimate with its scaled standard error and ℓ1 prefactor.
#[derive(Clone, Copy, Debug)]
pub struct EstimatorResult {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub l1_prefactor: f64,
}

impl EstimatorResult {
    /// `M · Var(estimate)`; tracks the squared ℓ1 prefactor when the signed
    /// trajectory values have unit variance.
    pub fn empirical_variance_prefactor(&self) -> f64 {
        self.n_samples as f64 * self.std_error * self.std_error
    }
}

const SPMC_BATCH: u64 = 4096;

fn spmc_run(
    pc: &ParamCircuit,
    decomps: &[GateDecomposition],
    residual_noise: Option<&[PauliNoiseChannel]>,
    o: &PauliObservable,
    initial: u64,
    samples: u64,
    seed: u64,
) -> Result<EstimatorResult> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let prefactor: f64 = decomps.iter().map(|d| d.l1).product();
    let n_batches = samples.div_ceil(SPMC_BATCH);
    let batch_stats: Vec<Result<RunningStats>> = (0..n_batches)
        .into_par_iter()
        .map(|batch| {
            let mut rng = seeding::stream(seed, seeding::purpose::SPMC, batch, 0);
            let mut stats = RunningStats::default();
            let lo = batch * SPMC_BATCH;
            let hi = (lo + SPMC_BATCH).min(samples);
            let mut ks = vec![0u8; decomps.len()];
            for _ in lo..hi {
                let mut sign = 1.0;
                for (k, d) in ks.iter_mut().zip(decomps) {
                    let (idx, s) = d.sample(&mut rng);
                    *k = idx;
                    sign *= s;
                }
                let value = config_expectation(pc, &ks, residual_noise, o, initial)?;
                stats.push(sign * value);
            }
            Ok(stats)
        })
        .collect();
    let mut total = RunningStats::default();
    for s in batch_stats {
        total = total.merge(&s?);
    }
    Ok(EstimatorResult {
        value: prefactor * total.mean(),
        std_error: prefactor * total.std_error(),
        n_samples: total.count(),
        l1_prefactor: prefactor,
    })
}

/// SPMC estimate of the noiseless expectation: per layer, draw an angle
/// index with probability `|a_k|/ℓ1`, evaluate the resulting Clifford
/// circuit on the stabilizer engine, track the sign product, and scale by
/// the ℓ1 prefactor.
pub fn spmc_estimate(
    pc: &ParamCircuit,
    o: &PauliObservable,
    initial: u64,
    samples: u64,
    seed: u64,
) -> Result<EstimatorResult> {
    let mut cache = DecompCache::new();
    let decomps: Vec<GateDecomposition> =
        pc.angles().iter().map(|&a| cache.optimal(a)).collect();
    spmc_run(pc, &decomps, None, o, initial, samples, seed)
}

/// SPMC estimate of the noisy expectation under per-layer Pauli noise.
///
/// The axis-aligned component of each layer's channel folds into the noisy
/// decomposition; remaining factors that commute with the rotation axis are
/// kept and contribute exact damping factors per trajectory. A non-axis
/// factor anticommuting with the axis is rejected.
pub fn noisy_spmc_estimate(
    pc: &ParamCircuit,
    layer_noise: &[PauliNoiseChannel],
    o: &PauliObservable,
    initial: u64,
    samples: u64,
    seed: u64,
) -> Result<EstimatorResult> {
    if layer_noise.len() != pc.n_layers() {
        return Err(Error::InvalidArgument(format!(
            "{} noise channels for {} layers",
            layer_noise.len(),
            pc.n_layers()
        )));
    }
    let n = pc.n_qubits();
    let mut cache = DecompCache::new();
    let mut decomps = Vec::with_capacity(pc.n_layers());
    let mut residuals = Vec::with_capacity(pc.n_layers());
    for (layer, (channel, &angle)) in pc
        .layers()
        .iter()
        .zip(layer_noise.iter().zip(pc.angles()))
    {
        let mut flip = 0.0; // accumulated axis-flip probability
        let mut residual = PauliNoiseChannel::identity(n);
        for f in channel.factors() {
            if f.pauli.key() == layer.axis.key() {
                let g = 1.0 - f.w;
                flip = flip * (1.0 - g) + (1.0 - flip) * g;
            } else if f.pauli.commutes(&layer.axis)? {
                residual.push_factor(f.pauli, f.w)?;
            } else {
                return Err(Error::InvalidNoise(format!(
                    "factor {} anticommutes with rotation axis {}",
                    f.pauli, layer.axis
                )));
            }
        }
        decomps.push(cache.noisy(angle, flip)?);
        residuals.push(residual);
    }
    spmc_run(pc, &decomps, Some(&residuals), o, initial, samples, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_trotter_ising, CliffordConfiguration};
    use crate::dense::{
        pauli_matrix, statevector_expectation, PauliTransferMatrix,
    };
    use crate::noise::axis_noise;
    use crate::pauli::{PauliLetter, PauliString};
    use crate::stabilizer;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn pauli(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn optimal_decomposition_fixed_points() {
        let d = optimal_decomposition(0.0);
        assert_eq!(d.a, [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(d.l1, 1.0);

        let d = optimal_decomposition(FRAC_PI_4);
        let expect = [
            0.25 + FRAC_PI_4.cos() / 2.0,
            0.25 + FRAC_PI_4.sin() / 2.0,
            0.25 - FRAC_PI_4.cos() / 2.0,
            0.25 - FRAC_PI_4.sin() / 2.0,
        ];
        for (got, want) in d.a.iter().zip(&expect) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!((d.l1 - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn decomposition_sums_and_l1_formula() {
        for i in 0..64 {
            let theta = i as f64 / 64.0 * 2.0 * PI;
            let d = optimal_decomposition(theta);
            assert!((d.coefficient_sum() - 1.0).abs() < 1e-13);
            assert!((d.l1 - (theta.sin().abs() + theta.cos().abs())).abs() < 1e-14);
        }
    }

    #[test]
    fn clifford_decomposition_identity_via_ptm() {
        for &axis_s in &["Z", "XZ"] {
            let axis = pauli(axis_s);
            let cliffs: Vec<PauliTransferMatrix> = (0..4)
                .map(|k| {
                    PauliTransferMatrix::from_rotation(&axis, k as f64 * FRAC_PI_2).unwrap()
                })
                .collect();
            for i in 0..8 {
                let theta = i as f64 / 8.0 * 2.0 * PI + 0.13;
                let d = optimal_decomposition(theta);
                let combo = PauliTransferMatrix::linear_combination(&[
                    (d.a[0], &cliffs[0]),
                    (d.a[1], &cliffs[1]),
                    (d.a[2], &cliffs[2]),
                    (d.a[3], &cliffs[3]),
                ]);
                let target = PauliTransferMatrix::from_rotation(&axis, theta).unwrap();
                assert!(combo.max_abs_diff(&target) < 1e-12, "axis {axis_s} θ={theta}");
            }
        }
    }

    #[test]
    fn three_term_identity() {
        let d = three_term_decomposition(0.0);
        assert_eq!((d.c_identity, d.c_z, d.c_s), (1.0, 0.0, 0.0));

        let id = PauliTransferMatrix::identity(1).unwrap();
        let zc = PauliTransferMatrix::from_channel(1, |rho| {
            let z = pauli_matrix(&pauli("Z")).unwrap();
            &z * rho * z.adjoint()
        })
        .unwrap();
        let sc = PauliTransferMatrix::from_gate(&crate::circuit::Gate::S(0), 1).unwrap();
        for i in 0..9 {
            let theta = i as f64 / 8.0 * FRAC_PI_4;
            let d = three_term_decomposition(theta);
            assert!((d.coefficient_sum() - 1.0).abs() < 1e-14);
            let combo = PauliTransferMatrix::linear_combination(&[
                (d.c_identity, &id),
                (d.c_z, &zc),
                (d.c_s, &sc),
            ]);
            let target = PauliTransferMatrix::from_rotation(&pauli("Z"), theta).unwrap();
            assert!(combo.max_abs_diff(&target) < 1e-12);
        }
        // At π/4 the three-term ℓ1 meets the four-term optimum.
        let b = three_term_decomposition(FRAC_PI_4);
        assert!((b.l1() - optimal_decomposition(FRAC_PI_4).l1).abs() < 1e-12);
    }

    #[test]
    fn noisy_decomposition_reduces_and_convexifies() {
        for i in 0..16 {
            let theta = 0.05 + i as f64 / 16.0 * 2.0 * PI;
            assert_eq!(noisy_decomposition(theta, 0.0).unwrap(), optimal_decomposition(theta));
            let gc = critical_noise(theta);
            if i % 3 == 0 {
                assert!((critical_noise(theta)
                    - 0.5 * (1.0 - 1.0 / (theta.sin().abs() + theta.cos().abs())))
                .abs()
                    < 1e-15);
            }
            for gamma in [gc, gc + 0.01, 0.3] {
                let d = noisy_decomposition(theta, gamma).unwrap();
                let want =
                    1.0f64.max((1.0 - 2.0 * gamma) * (theta.sin().abs() + theta.cos().abs()));
                assert!((d.l1 - want).abs() < 1e-13);
                if gamma >= gc {
                    assert!((d.l1 - 1.0).abs() < 1e-13);
                    assert!(d.a.iter().all(|&a| a >= -1e-12));
                }
            }
        }
        assert_eq!(critical_noise(0.0), 0.0);
        assert!((critical_noise(FRAC_PI_4) - 0.5 * (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn noisy_decomposition_channel_identity() {
        // Σ a_k PTM(R(kπ/2)) equals PTM(E_P(γ) ∘ R(θ)).
        let axis = pauli("Z");
        let cliffs: Vec<PauliTransferMatrix> = (0..4)
            .map(|k| PauliTransferMatrix::from_rotation(&axis, k as f64 * FRAC_PI_2).unwrap())
            .collect();
        for &(theta, gamma) in &[(FRAC_PI_4, 0.1), (1.2, 0.02), (2.9, 0.2)] {
            let d = noisy_decomposition(theta, gamma).unwrap();
            let combo = PauliTransferMatrix::linear_combination(&[
                (d.a[0], &cliffs[0]),
                (d.a[1], &cliffs[1]),
                (d.a[2], &cliffs[2]),
                (d.a[3], &cliffs[3]),
            ]);
            let noise = PauliTransferMatrix::from_noise_channel(
                &axis_noise(&axis, gamma).unwrap(),
            )
            .unwrap();
            let rot = PauliTransferMatrix::from_rotation(&axis, theta).unwrap();
            let target = noise.compose(&rot);
            assert!(combo.max_abs_diff(&target) < 1e-12);
        }
    }

    #[test]
    fn robustness_formula() {
        assert_eq!(single_qubit_robustness((0.0, 0.0, 1.0)).unwrap(), 1.0);
        assert!(single_qubit_robustness((1.0, 1.0, 0.0)).is_err());
        for i in 0..32 {
            let theta = i as f64 / 32.0 * 2.0 * PI;
            // R_Z(θ)|+⟩ has Bloch vector (cosθ, sinθ, 0).
            let r = single_qubit_robustness((theta.cos(), theta.sin(), 0.0)).unwrap();
            assert!((r - optimal_decomposition(theta).l1).abs() < 1e-14);
        }
    }

    #[test]
    fn smc_prefactors_for_the_reference_circuit() {
        let pc = build_trotter_ising(16, 5, 1.0, -1.0, 1.0).unwrap();
        // Layer-wise closed form recomputed independently.
        let l1h = 0.2f64.sin().abs() + 0.2f64.cos().abs();
        let l1f = 0.4f64.sin().abs() + 0.4f64.cos().abs();
        let layerwise = (l1h.powi(160) * l1f.powi(80)).powi(2);
        assert!((smc_prefactor(&pc) / layerwise - 1.0).abs() < 1e-10);
        // Merging the touching X half-steps: per qubit two halves plus N-1
        // full steps, and the ZZ rotations unchanged.
        let merged = (l1h.powi(32) * l1f.powi(64) * l1f.powi(80)).powi(2);
        let got = smc_prefactor_merged(&pc);
        assert!((got / merged - 1.0).abs() < 1e-10, "{got} vs {merged}");
        assert!((got / 2.46e38 - 1.0).abs() < 0.01);
    }

    #[test]
    fn spmc_on_clifford_circuit_is_exact() {
        let mut pc = build_trotter_ising(3, 1, 1.0, -1.0, 1.0).unwrap();
        pc.set_angles(vec![FRAC_PI_2; 9]).unwrap();
        let o = PauliObservable::z_magnetization(3);
        let est = spmc_estimate(&pc, &o, 0, 64, 7).unwrap();
        let truth = statevector_expectation(&pc.to_circuit(), &o, 0).unwrap();
        assert!((est.value - truth).abs() < 1e-12);
        assert_eq!(est.std_error, 0.0);
        assert!((est.l1_prefactor - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spmc_is_unbiased_over_many_runs() {
        let pc = build_trotter_ising(3, 1, 1.0, -1.0, 1.0).unwrap();
        let o = PauliObservable::z_magnetization(3);
        let truth = statevector_expectation(&pc.to_circuit(), &o, 0).unwrap();
        let runs = 200;
        let m = 2000;
        let mut mean_of_means = 0.0;
        let mut se_sum_sqr = 0.0;
        for r in 0..runs {
            let est = spmc_estimate(&pc, &o, 0, m, 50_000 + r).unwrap();
            mean_of_means += est.value;
            se_sum_sqr += est.std_error * est.std_error;
        }
        mean_of_means /= runs as f64;
        // σ of the grand mean from the per-run standard errors.
        let sigma = (se_sum_sqr / (runs * runs) as f64).sqrt();
        assert!(
            (mean_of_means - truth).abs() < 4.0 * sigma,
            "{mean_of_means} vs {truth} (σ {sigma})"
        );
    }

    #[test]
    fn spmc_matches_dense_on_small_trotter() {
        let pc = build_trotter_ising(3, 1, 1.0, -1.0, 1.0).unwrap();
        let o = PauliObservable::z_magnetization(3);
        let truth = statevector_expectation(&pc.to_circuit(), &o, 0).unwrap();
        let est = spmc_estimate(&pc, &o, 0, 200_000, 3).unwrap();
        assert!(
            (est.value - truth).abs() < 4.0 * est.std_error,
            "{} vs {truth} (se {})",
            est.value,
            est.std_error
        );
    }

    #[test]
    fn config_expectation_matches_substitution() {
        let pc = build_trotter_ising(4, 1, 1.0, -1.0, 1.0).unwrap();
        let o = PauliObservable::z_magnetization(4);
        let mut rng = seeding::stream(9, seeding::purpose::TEST, 1, 0);
        for _ in 0..20 {
            let ks: Vec<u8> = (0..pc.n_layers()).map(|_| rng.random_range(0..4)).collect();
            let direct = config_expectation(&pc, &ks, None, &o, 0).unwrap();
            let circuit = pc
                .substitute(&CliffordConfiguration::new(ks.clone()).unwrap())
                .unwrap();
            let materialized = stabilizer::expectation(&circuit, &o, 0).unwrap();
            assert!((direct - materialized).abs() < 1e-12);
        }
    }

    #[test]
    fn noisy_spmc_reduces_to_noiseless_at_zero_gamma() {
        let pc = build_trotter_ising(3, 1, 1.0, -1.0, 1.0).unwrap();
        let o = PauliObservable::z_magnetization(3);
        let channels: Vec<PauliNoiseChannel> = pc
            .layers()
            .iter()
            .map(|l| axis_noise(&l.axis, 0.0).unwrap())
            .collect();
        let a = spmc_estimate(&pc, &o, 0, 5000, 13).unwrap();
        let b = noisy_spmc_estimate(&pc, &channels, &o, 0, 5000, 13).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.l1_prefactor, b.l1_prefactor);
    }

    #[test]
    fn noisy_spmc_above_critical_noise_has_unit_prefactor() {
        let pc = build_trotter_ising(3, 1, 1.0, -1.0, 1.0).unwrap();
        let o = PauliObservable::z_magnetization(3);
        let channels: Vec<PauliNoiseChannel> = pc
            .layers()
            .iter()
            .zip(pc.angles())
            .map(|(l, &a)| axis_noise(&l.axis, critical_noise(a) + 0.01).unwrap())
            .collect();
        let est = noisy_spmc_estimate(&pc, &channels, &o, 0, 2000, 1).unwrap();
        assert!((est.l1_prefactor - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_spmc_rejects_anticommuting_off_axis_factors() {
        let pc = build_trotter_ising(3, 1, 1.0, -1.0, 1.0).unwrap();
        let o = PauliObservable::z_magnetization(3);
        let n = pc.n_qubits();
        let mut channels: Vec<PauliNoiseChannel> = pc
            .layers()
            .iter()
            .map(|l| axis_noise(&l.axis, 0.01).unwrap())
            .collect();
        // First layer rotates about X on qubit 0; a Z factor there
        // anticommutes with the axis.
        channels[0]
            .push_factor(PauliString::single(n, 0, PauliLetter::Z), 0.99)
            .unwrap();
        assert!(matches!(
            noisy_spmc_estimate(&pc, &channels, &o, 0, 100, 0),
            Err(Error::InvalidNoise(_))
        ));
    }

    #[test]
    fn noisy_spmc_matches_exhaustive_dense() {
        // Two-layer, two-qubit circuit with axis noise plus a commuting
        // extra factor; compare against the exact noisy expectation.
        use crate::circuit::Layer;
        let n = 2;
        let axis1 = pauli("XI");
        let axis2 = pauli("ZZ");
        let pc = ParamCircuit::new(
            n,
            vec![Layer::bare(axis1), Layer::bare(axis2)],
            vec![],
            vec![0.9, -1.3],
        )
        .unwrap();
        let o = PauliObservable::from_terms(
            2,
            [
                (pauli("ZI"), num_complex::Complex64::new(1.0, 0.0)),
                (pauli("XX"), num_complex::Complex64::new(0.5, 0.0)),
            ],
        )
        .unwrap();
        let mut ch1 = axis_noise(&axis1, 0.08).unwrap();
        ch1.push_factor(pauli("XI"), 0.93).unwrap(); // extra axis factor folds in
        let mut ch2 = axis_noise(&axis2, 0.05).unwrap();
        ch2.push_factor(pauli("IZ"), 0.9).unwrap(); // commutes with ZZ

        let est =
            noisy_spmc_estimate(&pc, &[ch1.clone(), ch2.clone()], &o, 0, 400_000, 5).unwrap();

        let noisy = crate::noise::attach_per_rotation(&pc.to_circuit(), &[ch1, ch2]).unwrap();
        let exact = crate::dense::noisy_expectation(
            &noisy,
            &o,
            0,
            &crate::dense::DeviceEmulatorConfig::exact(0),
        )
        .unwrap();
        assert!(
            (est.value - exact).abs() < 3.5 * est.std_error,
            "{} vs {exact} (se {})",
            est.value,
            est.std_error
        );
    }
}
