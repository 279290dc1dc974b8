//! The NDE-CS learning protocol.
//!
//! The target circuit's expectation is approximated by a sparse linear
//! combination of Clifford-configuration expectations. Configurations are
//! sampled from the quasiprobability magnitudes and kept only when they
//! contribute to the observable; the combination coefficients are then
//! learned from noisy-device data — the target and every retained Clifford
//! configuration are measured under shared random Pauli insertion patterns,
//! one linear equation per pattern — and finally reused against noiseless
//! stabilizer expectations.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use std::collections::HashSet;

use crate::circuit::{Circuit, CliffordConfiguration, InsertionPattern, ParamCircuit};
use crate::dense;
use crate::dense::DeviceEmulatorConfig;
use crate::error::{Error, Result};
use crate::noise::{attach_axis_noise, attach_per_rotation, attach_profile, HardwareNoiseProfile,
    PauliNoiseChannel};
use crate::pauli::{PauliKey, PauliObservable, PauliString};
use crate::quasiprob::{DecompCache, GateDecomposition};
use crate::seeding::{self, child_seed, purpose};
use crate::stabilizer;

/// How noise is attached to materialized circuits.
#[derive(Clone, Debug)]
pub enum NoiseAttachment {
    None,
    /// Hardware profile: a channel after each two-qubit gate.
    Profile(HardwareNoiseProfile),
    /// Axis-aligned noise of one strength after every rotation.
    AxisAligned(f64),
    /// One arbitrary Pauli channel after each rotation layer.
    PerLayer(Vec<PauliNoiseChannel>),
}

impl NoiseAttachment {
    pub fn attach(&self, c: &Circuit) -> Result<Circuit> {
        match self {
            NoiseAttachment::None => Ok(c.clone()),
            NoiseAttachment::Profile(p) => attach_profile(c, p),
            NoiseAttachment::AxisAligned(gamma) => attach_axis_noise(c, *gamma),
            NoiseAttachment::PerLayer(chs) => attach_per_rotation(c, chs),
        }
    }
}

/// A target: parameterized circuit, its device noise, observable and input.
#[derive(Clone, Debug)]
pub struct Instance {
    pub circuit: ParamCircuit,
    pub noise: NoiseAttachment,
    pub observable: PauliObservable,
    pub initial: u64,
}

/// Constraint applied while sampling Clifford configurations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ConstraintMode {
    #[default]
    None,
    /// Mirrored layers (l and L+1-l) share one angle index; keeps the
    /// block-structured family's Clifford expectations nonzero.
    Mirror,
}

/// Retained Clifford configurations (the index set of the sparse
/// decomposition); deduplicated, each with a nonzero noiseless stabilizer
/// expectation for the target observable and input.
#[derive(Clone, Debug)]
pub struct ConfigSample {
    configs: Vec<CliffordConfiguration>,
    pub requested: usize,
    pub budget_exhausted: bool,
}

impl ConfigSample {
    pub fn from_configs(configs: Vec<CliffordConfiguration>) -> Self {
        let requested = configs.len();
        ConfigSample {
            configs,
            requested,
            budget_exhausted: false,
        }
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn configs(&self) -> &[CliffordConfiguration] {
        &self.configs
    }

    /// Restriction to the first `m` configurations.
    pub fn truncated(&self, m: usize) -> ConfigSample {
        ConfigSample {
            configs: self.configs[..m.min(self.configs.len())].to_vec(),
            requested: m,
            budget_exhausted: self.budget_exhausted && m >= self.configs.len(),
        }
    }
}

fn draw_config<R: Rng>(
    decomps: &[GateDecomposition],
    mode: ConstraintMode,
    rng: &mut R,
) -> CliffordConfiguration {
    let l = decomps.len();
    let mut ks = vec![0u8; l];
    match mode {
        ConstraintMode::None => {
            for (k, d) in ks.iter_mut().zip(decomps) {
                *k = d.sample(rng).0;
            }
        }
        ConstraintMode::Mirror => {
            for left in 0..l / 2 {
                let right = l - 1 - left;
                // Joint draw over the shared index, weighted by the product
                // of the paired layers' coefficient magnitudes.
                let weights: [f64; 4] = std::array::from_fn(|k| {
                    decomps[left].a[k].abs() * decomps[right].a[k].abs()
                });
                let total: f64 = weights.iter().sum();
                let mut u = rng.random::<f64>() * total;
                let mut pick = 3;
                for (k, w) in weights.iter().enumerate() {
                    if u < *w {
                        pick = k;
                        break;
                    }
                    u -= w;
                }
                ks[left] = pick as u8;
                ks[right] = pick as u8;
            }
        }
    }
    CliffordConfiguration::new(ks).expect("indices drawn in range")
}

/// Samples `m_c` distinct Clifford configurations with per-layer probability
/// proportional to the decomposition magnitudes `|a_k|`, discarding
/// configurations whose noiseless stabilizer expectation is exactly zero.
/// Gives up after `100·m_c` draws, returning fewer (flagged) if at least one
/// configuration was retained.
pub fn sample_configs(
    pc: &ParamCircuit,
    o: &PauliObservable,
    initial: u64,
    m_c: usize,
    mode: ConstraintMode,
    seed: u64,
) -> Result<ConfigSample> {
    if m_c == 0 {
        return Err(Error::InvalidArgument(
            "need at least one configuration".into(),
        ));
    }
    if mode == ConstraintMode::Mirror && !pc.n_layers().is_multiple_of(2) {
        return Err(Error::InvalidArgument(
            "mirror constraint needs an even layer count".into(),
        ));
    }
    let mut cache = DecompCache::new();
    let decomps: Vec<GateDecomposition> =
        pc.angles().iter().map(|&a| cache.optimal(a)).collect();
    let mut rng = seeding::stream(seed, purpose::CONFIG_SAMPLING, 0, 0);
    let mut seen: HashSet<CliffordConfiguration> = HashSet::new();
    let mut retained = Vec::with_capacity(m_c);
    let budget = 100 * m_c;
    let mut attempts = 0;
    while retained.len() < m_c && attempts < budget {
        attempts += 1;
        let config = draw_config(&decomps, mode, &mut rng);
        if !seen.insert(config.clone()) {
            continue;
        }
        let value = stabilizer::config_expectation(pc, config.indices(), None, o, initial)?;
        if value != 0.0 {
            retained.push(config);
        }
    }
    if retained.is_empty() {
        return Err(Error::BudgetExhausted(format!(
            "no configuration with nonzero expectation found in {budget} draws"
        )));
    }
    let budget_exhausted = retained.len() < m_c;
    Ok(ConfigSample {
        configs: retained,
        requested: m_c,
        budget_exhausted,
    })
}

/// Samples `m_p` deduplicated insertion patterns; each layer's Pauli is
/// uniform over the n-qubit Pauli strings, and the all-identity pattern is
/// always included first so the un-inserted target equation is in the
/// system.
pub fn sample_patterns(
    layers: usize,
    n_qubits: usize,
    m_p: usize,
    seed: u64,
) -> Vec<InsertionPattern> {
    let mut rng = seeding::stream(seed, purpose::PATTERN_SAMPLING, 0, 0);
    let mask = if n_qubits >= 64 {
        u64::MAX
    } else {
        (1u64 << n_qubits) - 1
    };
    let mut out = vec![InsertionPattern::identity(layers, n_qubits)];
    let mut seen: HashSet<InsertionPattern> = out.iter().cloned().collect();
    let budget = 1000 * m_p.max(1);
    let mut attempts = 0;
    while out.len() < m_p && attempts < budget {
        attempts += 1;
        let paulis: Vec<PauliString> = (0..layers)
            .map(|_| {
                let x = rng.random::<u64>() & mask;
                let z = rng.random::<u64>() & mask;
                PauliString::canonical(n_qubits, PauliKey { x, z })
            })
            .collect();
        let pattern = InsertionPattern::new(paulis);
        if seen.insert(pattern.clone()) {
            out.push(pattern);
        }
    }
    out
}

/// Linear system from noisy-device data: one row per insertion pattern.
/// `design[p][k]` holds the noisy expectation of Clifford configuration `k`
/// under pattern `p`; `rhs[p]` the noisy target expectation under `p`.
#[derive(Clone, Debug)]
pub struct FitProblem {
    pub design: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub patterns: Vec<InsertionPattern>,
    /// Emulated circuit evaluations performed: `(M_C + 1) · M_P`.
    pub device_calls: u64,
}

fn combine_terms(o: &PauliObservable, values: &[f64]) -> f64 {
    o.terms()
        .zip(values)
        .map(|((_, coeff), &v)| (coeff * v).re)
        .sum()
}

/// One emulated measurement of a noisy Clifford circuit: exact Heisenberg
/// per-term values plus binomial shot noise.
fn measure_basis_circuit(
    noisy: &Circuit,
    pattern: &InsertionPattern,
    o: &PauliObservable,
    initial: u64,
    device: &DeviceEmulatorConfig,
    seed_a: u64,
    seed_b: u64,
) -> Result<f64> {
    let mut values =
        stabilizer::heisenberg_term_values_with_pattern(noisy, Some(pattern), o, initial)?;
    if let Some(shots) = device.shots {
        let budget = dense::shots_per_term(shots, device.shot_mode, values.len());
        let mut rng = seeding::stream(device.seed, purpose::DEVICE_BASIS, seed_a, seed_b);
        for v in values.iter_mut() {
            *v = dense::shot_perturb(*v, budget, &mut rng);
        }
    }
    Ok(combine_terms(o, &values))
}

/// Collects the fit data: for every insertion pattern, one noisy target
/// measurement (dense device emulation) and one noisy measurement per
/// retained Clifford configuration — `(M_C + 1) · M_P` circuit evaluations.
pub fn collect_data(
    instance: &Instance,
    configs: &ConfigSample,
    patterns: &[InsertionPattern],
    device: &DeviceEmulatorConfig,
) -> Result<FitProblem> {
    device.validate()?;
    if configs.is_empty() {
        return Err(Error::InvalidArgument("no configurations to fit".into()));
    }
    let o = &instance.observable;
    let initial = instance.initial;
    let m_p = patterns.len();
    let m_c = configs.len();

    let target_noisy = instance.noise.attach(&instance.circuit.to_circuit())?;
    let rhs_entries: Vec<Result<f64>> = patterns
        .par_iter()
        .enumerate()
        .map(|(p_idx, pattern)| {
            let with_pattern = target_noisy.apply_insertion_pattern(pattern)?;
            let cfg = device.with_seed(child_seed(device.seed, purpose::DEVICE_TARGET, p_idx as u64));
            dense::noisy_expectation(&with_pattern, o, initial, &cfg)
        })
        .collect();
    let mut rhs = DVector::zeros(m_p);
    for (i, v) in rhs_entries.into_iter().enumerate() {
        rhs[i] = v?;
    }

    let noisy_configs: Vec<Circuit> = configs
        .configs()
        .par_iter()
        .map(|k| instance.noise.attach(&instance.circuit.substitute(k)?))
        .collect::<Result<_>>()?;
    let entries: Vec<Result<f64>> = (0..m_p * m_c)
        .into_par_iter()
        .map(|flat| {
            let p_idx = flat / m_c;
            let k_idx = flat % m_c;
            measure_basis_circuit(
                &noisy_configs[k_idx],
                &patterns[p_idx],
                o,
                initial,
                device,
                p_idx as u64,
                k_idx as u64,
            )
        })
        .collect();
    let mut design = DMatrix::zeros(m_p, m_c);
    for (flat, v) in entries.into_iter().enumerate() {
        design[(flat / m_c, flat % m_c)] = v?;
    }

    Ok(FitProblem {
        design,
        rhs,
        patterns: patterns.to_vec(),
        device_calls: ((m_c + 1) * m_p) as u64,
    })
}

/// Least-squares options: relative singular-value cutoff and ridge strength.
#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    pub sv_cutoff_rel: f64,
    pub ridge: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            sv_cutoff_rel: 1e-10,
            ridge: 0.0,
        }
    }
}

/// Learned coefficients and the data-side residual norm.
#[derive(Clone, Debug)]
pub struct CoefficientVector {
    pub b: DVector<f64>,
    pub residual_norm: f64,
}

/// Minimum-norm least-squares solution of `design·b ≈ rhs` by SVD with a
/// relative singular-value cutoff.
pub fn fit_coefficients(problem: &FitProblem) -> Result<CoefficientVector> {
    fit_coefficients_with(problem, FitOptions::default())
}

pub fn fit_coefficients_with(
    problem: &FitProblem,
    opts: FitOptions,
) -> Result<CoefficientVector> {
    let design = &problem.design;
    let svd = design.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let smax = svd.singular_values.max();
    if smax.is_nan() || smax <= 0.0 {
        return Err(Error::DegenerateSystem("all-zero design matrix".into()));
    }
    let cutoff = opts.sv_cutoff_rel * smax;
    let mut b = DVector::zeros(design.ncols());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff {
            continue;
        }
        let gain = s / (s * s + opts.ridge);
        let coeff = u.column(i).dot(&problem.rhs) * gain;
        b += vt.row(i).transpose() * coeff;
    }
    let residual_norm = (design * &b - &problem.rhs).norm();
    Ok(CoefficientVector { b, residual_norm })
}

/// Reconstructed noiseless estimate with optional error metrics.
#[derive(Clone, Copy, Debug)]
pub struct NdecsEstimate {
    pub value: f64,
    pub eps_abs: Option<f64>,
    pub eps_rel: Option<f64>,
}

impl NdecsEstimate {
    fn with_truth(value: f64, truth: Option<f64>) -> Self {
        let eps_abs = truth.map(|t| (value - t).abs());
        let eps_rel = match (eps_abs, truth) {
            (Some(abs), Some(t)) if t != 0.0 => Some(abs / t.abs()),
            _ => None,
        };
        NdecsEstimate {
            value,
            eps_abs,
            eps_rel,
        }
    }
}

/// `Σ_k b_k · ⟨O⟩_k` over the noiseless stabilizer expectations of the
/// retained configurations.
pub fn reconstruct(
    coeffs: &CoefficientVector,
    configs: &ConfigSample,
    pc: &ParamCircuit,
    o: &PauliObservable,
    initial: u64,
    truth: Option<f64>,
) -> Result<NdecsEstimate> {
    if coeffs.b.len() != configs.len() {
        return Err(Error::InvalidArgument(format!(
            "{} coefficients for {} configurations",
            coeffs.b.len(),
            configs.len()
        )));
    }
    let clean_values: Vec<f64> = configs
        .configs()
        .par_iter()
        .map(|k| stabilizer::config_expectation(pc, k.indices(), None, o, initial))
        .collect::<Result<_>>()?;
    let value = coeffs
        .b
        .iter()
        .zip(&clean_values)
        .map(|(b, v)| b * v)
        .sum();
    Ok(NdecsEstimate::with_truth(value, truth))
}

/// Summary of one full protocol run.
#[derive(Clone, Debug)]
pub struct ProtocolRun {
    pub estimate: NdecsEstimate,
    pub n_configs: usize,
    pub n_patterns: usize,
    pub device_calls: u64,
    pub fit_residual: f64,
    pub budget_exhausted: bool,
}

/// Runs the full pipeline: sample configurations and patterns, collect
/// noisy data, fit, reconstruct.
pub fn run(
    instance: &Instance,
    m_c: usize,
    m_p: usize,
    mode: ConstraintMode,
    device: &DeviceEmulatorConfig,
    seed: u64,
    truth: Option<f64>,
) -> Result<ProtocolRun> {
    let configs = sample_configs(
        &instance.circuit,
        &instance.observable,
        instance.initial,
        m_c,
        mode,
        seed,
    )?;
    let patterns =
        sample_patterns(instance.circuit.n_layers(), instance.circuit.n_qubits(), m_p, seed);
    let device = device.with_seed(child_seed(seed, purpose::DEVICE_TARGET, 0xD0));
    let problem = collect_data(instance, &configs, &patterns, &device)?;
    let coeffs = fit_coefficients(&problem)?;
    let estimate = reconstruct(
        &coeffs,
        &configs,
        &instance.circuit,
        &instance.observable,
        instance.initial,
        truth,
    )?;
    Ok(ProtocolRun {
        estimate,
        n_configs: configs.len(),
        n_patterns: patterns.len(),
        device_calls: problem.device_calls,
        fit_residual: coeffs.residual_norm,
        budget_exhausted: configs.budget_exhausted,
    })
}

/// Every insertion pattern over `layers` layers of n-qubit Paulis.
pub fn enumerate_patterns(layers: usize, n_qubits: usize) -> Result<Vec<InsertionPattern>> {
    let bits = 2 * n_qubits * layers;
    if bits > 14 {
        return Err(Error::InvalidArgument(format!(
            "4^{} insertion patterns is too many to enumerate",
            n_qubits * layers
        )));
    }
    let per_layer = dense::pauli_basis(n_qubits);
    let total = per_layer.len().pow(layers as u32);
    let mut out = Vec::with_capacity(total);
    for mut idx in 0..total {
        let mut paulis = Vec::with_capacity(layers);
        for _ in 0..layers {
            paulis.push(per_layer[idx % per_layer.len()]);
            idx /= per_layer.len();
        }
        out.push(InsertionPattern::new(paulis));
    }
    Ok(out)
}

/// Every Clifford configuration of `layers` layers.
pub fn enumerate_configs(layers: usize) -> Result<Vec<CliffordConfiguration>> {
    if layers > 7 {
        return Err(Error::InvalidArgument(format!(
            "4^{layers} configurations is too many to enumerate"
        )));
    }
    let total = 4usize.pow(layers as u32);
    let mut out = Vec::with_capacity(total);
    for mut idx in 0..total {
        let mut ks = Vec::with_capacity(layers);
        for _ in 0..layers {
            ks.push((idx % 4) as u8);
            idx /= 4;
        }
        out.push(CliffordConfiguration::new(ks).expect("digits in range"));
    }
    Ok(out)
}

/// Outcome of the Pauli-insertion transfer check on a small circuit.
#[derive(Clone, Debug)]
pub struct TransferOracleReport {
    pub pass: bool,
    pub fit_residual: f64,
    /// |reconstruction - noiseless truth| from coefficients fitted on exact
    /// noisy data over exhaustive insertion patterns.
    pub noiseless_error: f64,
    /// Residual of the channel-inverse telescoping identity evaluated
    /// numerically via the signed-mixture expansion.
    pub telescoping_error: f64,
    pub n_patterns: usize,
    pub n_configs: usize,
}

const TRANSFER_ORACLE_TOL: f64 = 1e-8;

/// Builds exact (shot-free, trajectory-exhaustive) noisy data over all
/// insertion patterns and the full configuration set, fits, and checks that
/// the fitted coefficients reproduce the noiseless expectation. Additionally
/// expands each channel inverse as a signed Pauli mixture and verifies the
/// telescoping identity that underpins the transfer.
pub fn insertion_transfer_oracle(
    pc: &ParamCircuit,
    layer_noise: &[PauliNoiseChannel],
    o: &PauliObservable,
    initial: u64,
) -> Result<TransferOracleReport> {
    let n = pc.n_qubits();
    let layers = pc.n_layers();
    let patterns = enumerate_patterns(layers, n)?;
    let configs = ConfigSample::from_configs(enumerate_configs(layers)?);
    let instance = Instance {
        circuit: pc.clone(),
        noise: NoiseAttachment::PerLayer(layer_noise.to_vec()),
        observable: o.clone(),
        initial,
    };
    let device = DeviceEmulatorConfig::exact(0);
    let problem = collect_data(&instance, &configs, &patterns, &device)?;
    let coeffs = fit_coefficients(&problem)?;
    let truth = dense::statevector_expectation(&pc.to_circuit(), o, initial)?;
    let estimate = reconstruct(&coeffs, &configs, pc, o, initial, Some(truth))?;
    let noiseless_error = estimate.eps_abs.unwrap_or(f64::INFINITY);

    // Telescoping: Tr[O C(θ) ρ] = Σ_r (Π p_{l,r_l}) · (noisy value with the
    // inverse-expansion Pauli insertions).
    let mixtures: Vec<crate::noise::SignedPauliMixture> = layer_noise
        .iter()
        .map(|ch| ch.invert())
        .collect::<Result<_>>()?;
    let noisy_target = instance.noise.attach(&pc.to_circuit())?;
    let mut combo = vec![0usize; layers];
    let mut telescoped = 0.0;
    loop {
        let mut weight = 1.0;
        let mut paulis = Vec::with_capacity(layers);
        for (l, &r) in combo.iter().enumerate() {
            let (p, c) = mixtures[l].terms()[r];
            weight *= c;
            paulis.push(p);
        }
        let pattern = InsertionPattern::new(paulis);
        let with_pattern = noisy_target.apply_insertion_pattern(&pattern)?;
        telescoped += weight * dense::noisy_expectation(&with_pattern, o, initial, &device)?;

        // Advance the mixed-radix counter.
        let mut l = 0;
        loop {
            if l == layers {
                break;
            }
            combo[l] += 1;
            if combo[l] < mixtures[l].terms().len() {
                break;
            }
            combo[l] = 0;
            l += 1;
        }
        if l == layers {
            break;
        }
    }
    let telescoping_error = (telescoped - truth).abs();

    Ok(TransferOracleReport {
        pass: noiseless_error <= TRANSFER_ORACLE_TOL && telescoping_error <= TRANSFER_ORACLE_TOL,
        fit_residual: coeffs.residual_norm,
        noiseless_error,
        telescoping_error,
        n_patterns: patterns.len(),
        n_configs: configs.len(),
    })
}

/// The no-insertion counterexample: fitting a single configuration against
/// the single all-identity pattern satisfies the noisy relation while
/// violating the noiseless identity.
#[derive(Clone, Debug)]
pub struct CounterexampleReport {
    pub fitted_b0: f64,
    pub noisy_residual: f64,
    pub noiseless_violation: f64,
}

pub fn insertion_transfer_counterexample(
    pc: &ParamCircuit,
    layer_noise: &[PauliNoiseChannel],
    o: &PauliObservable,
    initial: u64,
) -> Result<CounterexampleReport> {
    let configs = ConfigSample::from_configs(vec![CliffordConfiguration::zeros(pc.n_layers())]);
    let patterns = vec![InsertionPattern::identity(pc.n_layers(), pc.n_qubits())];
    let instance = Instance {
        circuit: pc.clone(),
        noise: NoiseAttachment::PerLayer(layer_noise.to_vec()),
        observable: o.clone(),
        initial,
    };
    let problem = collect_data(&instance, &configs, &patterns, &DeviceEmulatorConfig::exact(0))?;
    let coeffs = fit_coefficients(&problem)?;
    let truth = dense::statevector_expectation(&pc.to_circuit(), o, initial)?;
    let estimate = reconstruct(&coeffs, &configs, pc, o, initial, Some(truth))?;
    Ok(CounterexampleReport {
        fitted_b0: coeffs.b[0],
        noisy_residual: coeffs.residual_norm,
        noiseless_violation: estimate.eps_abs.unwrap_or(f64::INFINITY),
    })
}
