//! Experiment runners: the NDE-CS (M_C, M_P) error grid, SPMC convergence
//! fits, NDE-CS vs. SMC scaling, and SPD path-budget scaling.
//!
//! Every runner consumes a [`Manifest`] and emits result tables: a raw table
//! with one row per repeat/grid cell and a summary table with aggregates.
//! Rows carry the manifest hash and root seed; rerunning a manifest
//! reproduces every column except the wall-clock timings.

use std::time::Instant;

use ndecs_core::circuit::ParamCircuit;
use ndecs_core::dense;
use ndecs_core::pauli::PauliObservable;
use ndecs_core::protocol::{
    self, collect_data, fit_coefficients, reconstruct, FitProblem, Instance,
};
use ndecs_core::quasiprob::{self, smc_prefactor, smc_prefactor_merged, spmc_estimate};
use ndecs_core::seeding::{child_seed, purpose};
use ndecs_core::spd::{spd_run, TruncationPolicy};

use crate::manifest::{CircuitFamily, Manifest, TruthSource};
use crate::plot;
use crate::table::{fmt_f64, ResultTable};
use crate::{CliError, Result};

/// Output bundle of one experiment command.
pub struct ExperimentOutput {
    pub tables: Vec<ResultTable>,
    pub plots: Vec<(String, String)>,
    pub notes: Vec<String>,
}

impl ExperimentOutput {
    fn new() -> Self {
        ExperimentOutput {
            tables: Vec::new(),
            plots: Vec::new(),
            notes: Vec::new(),
        }
    }
}

fn resolve_truth(
    manifest: &Manifest,
    pc: &ParamCircuit,
    o: &PauliObservable,
) -> Result<f64> {
    match manifest.truth {
        TruthSource::Dense => {
            Ok(dense::statevector_expectation(&pc.to_circuit(), o, 0)?)
        }
        TruthSource::AnalyticIdentity => {
            if manifest.circuit.family != CircuitFamily::Structured
                || manifest.circuit.theta != 0.0
            {
                return Err(CliError::Manifest(
                    "analytic-identity truth applies to the structured family at theta = 0".into(),
                ));
            }
            Ok(1.0)
        }
        TruthSource::UntruncatedSpd => Ok(ndecs_core::spd::spd_expectation(
            &pc.to_circuit(),
            o,
            0,
            &TruncationPolicy::unlimited(),
        )?),
    }
}

/// Raw-row schema shared by the protocol experiments.
const NDECS_COLUMNS: [&str; 12] = [
    "manifest_hash",
    "seed",
    "m_c",
    "m_p",
    "n",
    "n_or_d",
    "value",
    "truth",
    "eps_abs",
    "eps_rel",
    "device_calls",
    "wall_seconds",
];

/// NDE-CS error grid over (M_C, M_P) with per-cell means over repeats.
///
/// Within one repeat the maximal configuration and pattern sets are sampled
/// once and measured once; a grid cell reuses the leading (m_c, m_p) block
/// of that data. Each cell's `device_calls` column reports the protocol
/// cost `(M_C+1)·M_P` of a standalone run.
pub fn run_ndecs_grid(manifest: &Manifest) -> Result<ExperimentOutput> {
    manifest.validate()?;
    let hash = format!("{:016x}", manifest.hash());
    let pc = manifest.circuit.build(None, None, None)?;
    let o = manifest.circuit.observable(&pc);
    let truth = resolve_truth(manifest, &pc, &o)?;
    let n = pc.n_qubits();
    let n_or_d = manifest
        .circuit
        .steps
        .or(manifest.circuit.d)
        .unwrap_or_default();
    let max_mc = *manifest.grid.mc.iter().max().unwrap();
    let max_mp = *manifest.grid.mp.iter().max().unwrap();
    let instance = Instance {
        circuit: pc.clone(),
        noise: manifest.noise.attachment()?,
        observable: o.clone(),
        initial: 0,
    };
    let probe_noisy = instance.noise.attach(&pc.to_circuit())?;

    let mut raw = ResultTable::new("ndecs-grid-raw", &NDECS_COLUMNS);
    let mut cells: Vec<Vec<(f64, f64)>> =
        vec![vec![(0.0, 0.0); manifest.grid.mp.len()]; manifest.grid.mc.len()];

    for rep in 0..manifest.repeats {
        let rep_seed = child_seed(manifest.seed, purpose::REPEAT, rep as u64);
        let t_rep = Instant::now();
        let configs = protocol::sample_configs(
            &pc,
            &o,
            0,
            max_mc,
            manifest.circuit.constraint(),
            rep_seed,
        )?;
        let patterns = protocol::sample_patterns(pc.n_layers(), n, max_mp, rep_seed);
        let device = manifest.device.config_for(&probe_noisy, rep_seed);
        let problem = collect_data(&instance, &configs, &patterns, &device)?;

        for (i, &mc) in manifest.grid.mc.iter().enumerate() {
            for (j, &mp) in manifest.grid.mp.iter().enumerate() {
                let t_cell = Instant::now();
                let mc_used = mc.min(configs.len());
                let mp_used = mp.min(patterns.len());
                let sub = FitProblem {
                    design: problem.design.view((0, 0), (mp_used, mc_used)).into_owned(),
                    rhs: problem.rhs.rows(0, mp_used).into_owned(),
                    patterns: patterns[..mp_used].to_vec(),
                    device_calls: ((mc_used + 1) * mp_used) as u64,
                };
                let coeffs = fit_coefficients(&sub)?;
                let est = reconstruct(
                    &coeffs,
                    &configs.truncated(mc_used),
                    &pc,
                    &o,
                    0,
                    Some(truth),
                )?;
                let (eps_abs, eps_rel) = (
                    est.eps_abs.unwrap_or(f64::NAN),
                    est.eps_rel.unwrap_or(f64::NAN),
                );
                cells[i][j].0 += eps_abs;
                cells[i][j].1 += eps_rel;
                raw.push(vec![
                    hash.clone(),
                    rep_seed.to_string(),
                    mc_used.to_string(),
                    mp_used.to_string(),
                    n.to_string(),
                    n_or_d.to_string(),
                    fmt_f64(est.value),
                    fmt_f64(truth),
                    fmt_f64(eps_abs),
                    fmt_f64(eps_rel),
                    sub.device_calls.to_string(),
                    format!("{:.3}", t_cell.elapsed().as_secs_f64()),
                ]);
            }
        }
        let _ = t_rep;
    }

    let mut summary = ResultTable::new(
        "ndecs-grid-summary",
        &[
            "manifest_hash",
            "m_c",
            "m_p",
            "repeats",
            "mean_eps_abs",
            "mean_eps_rel",
            "device_calls",
        ],
    );
    let reps = manifest.repeats as f64;
    let mut heat: Vec<Vec<f64>> = Vec::new();
    for (i, &mc) in manifest.grid.mc.iter().enumerate() {
        let mut heat_row = Vec::new();
        for (j, &mp) in manifest.grid.mp.iter().enumerate() {
            let mean_abs = cells[i][j].0 / reps;
            let mean_rel = cells[i][j].1 / reps;
            heat_row.push(mean_rel);
            summary.push(vec![
                hash.clone(),
                mc.to_string(),
                mp.to_string(),
                manifest.repeats.to_string(),
                fmt_f64(mean_abs),
                fmt_f64(mean_rel),
                ((mc + 1) * mp).to_string(),
            ]);
        }
        heat.push(heat_row);
    }

    let mut out = ExperimentOutput::new();
    out.plots.push((
        "ndecs-grid-eps-rel".into(),
        plot::heatmap_svg(
            &format!("mean relative error, n={n}"),
            &manifest.grid.mp.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            &manifest.grid.mc.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            &heat,
            true,
        ),
    ));
    out.notes.push(format!(
        "truth = {truth:.6} ({:?}), layers = {}",
        manifest.truth,
        pc.n_layers()
    ));
    out.tables.push(raw);
    out.tables.push(summary);
    Ok(out)
}

/// Least-squares slope of y against x.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}

/// SPMC convergence: mean relative error against sample count, with the
/// log–log slope, the extrapolated sample count at the target error, and
/// the closed-form cost prefactors (layer-wise and with touching same-axis
/// rotations merged) for both the run circuit and the 16-qubit, 5-step
/// reference circuit.
pub fn run_smc_convergence(manifest: &Manifest) -> Result<ExperimentOutput> {
    manifest.validate()?;
    let hash = format!("{:016x}", manifest.hash());
    let pc = manifest.circuit.build(None, None, None)?;
    let o = manifest.circuit.observable(&pc);
    let truth = resolve_truth(manifest, &pc, &o)?;
    let n = pc.n_qubits();

    let mut raw = ResultTable::new(
        "smc-convergence-raw",
        &[
            "manifest_hash",
            "seed",
            "m_samples",
            "n",
            "value",
            "std_error",
            "truth",
            "eps_rel",
            "wall_seconds",
        ],
    );
    let mut points = Vec::new();
    for (mi, &m) in manifest.grid.m.iter().enumerate() {
        let mut mean_abs_rel = 0.0;
        for rep in 0..manifest.repeats {
            let t0 = Instant::now();
            let seed = child_seed(manifest.seed, purpose::REPEAT, (mi * manifest.repeats + rep) as u64);
            let est = spmc_estimate(&pc, &o, 0, m, seed)?;
            let eps_rel = ((est.value - truth) / truth).abs();
            mean_abs_rel += eps_rel;
            raw.push(vec![
                hash.clone(),
                seed.to_string(),
                m.to_string(),
                n.to_string(),
                fmt_f64(est.value),
                fmt_f64(est.std_error),
                fmt_f64(truth),
                fmt_f64(eps_rel),
                format!("{:.3}", t0.elapsed().as_secs_f64()),
            ]);
        }
        points.push((m as f64, mean_abs_rel / manifest.repeats as f64));
    }

    let log_points: Vec<(f64, f64)> = points.iter().map(|&(m, e)| (m.ln(), e.ln())).collect();
    let (slope, intercept) = linear_fit(&log_points);
    let target = manifest.grid.target_eps_rel;
    // ln(eps) = intercept + slope ln(M)  =>  M* at the target error.
    let m_star = ((target.ln() - intercept) / slope).exp();

    let reference = ndecs_core::circuit::build_trotter_ising(16, 5, 1.0, -1.0, 1.0)?;
    let mut summary = ResultTable::new(
        "smc-convergence-summary",
        &[
            "manifest_hash",
            "n",
            "repeats",
            "slope",
            "target_eps_rel",
            "extrapolated_m",
            "prefactor_layerwise",
            "prefactor_merged",
            "prefactor_layerwise_16x5",
            "prefactor_merged_16x5",
        ],
    );
    summary.push(vec![
        hash,
        n.to_string(),
        manifest.repeats.to_string(),
        fmt_f64(slope),
        fmt_f64(target),
        fmt_f64(m_star),
        fmt_f64(smc_prefactor(&pc)),
        fmt_f64(smc_prefactor_merged(&pc)),
        fmt_f64(smc_prefactor(&reference)),
        fmt_f64(smc_prefactor_merged(&reference)),
    ]);

    let mut out = ExperimentOutput::new();
    out.plots.push((
        "smc-convergence".into(),
        plot::line_plot_svg(
            &format!("SPMC convergence, n={n} (slope {slope:.3})"),
            "samples",
            "relative error",
            &[("mean |eps_rel|".into(), points)],
            true,
            true,
        ),
    ));
    out.notes.push(format!(
        "slope {slope:.4}, extrapolated samples at eps_rel={target}: {m_star:.3e}"
    ));
    out.tables.push(raw);
    out.tables.push(summary);
    Ok(out)
}

/// Device-call scaling of NDE-CS against the closed-form SMC sample count
/// `Π(|sinθ|+|cosθ|)² ε⁻²`, over a grid of circuit sizes and depths. For
/// each instance the (M_C, M_P) diagonal is walked in increasing cost order
/// until the mean relative error reaches the target; unreachable targets
/// flag the row.
pub fn run_scaling_compare(manifest: &Manifest) -> Result<ExperimentOutput> {
    manifest.validate()?;
    let hash = format!("{:016x}", manifest.hash());
    let target = manifest.grid.target_eps_rel;
    let cells: Vec<(usize, usize)> = {
        let mut v: Vec<(usize, usize)> = manifest
            .grid
            .mc
            .iter()
            .zip(&manifest.grid.mp)
            .map(|(&a, &b)| (a, b))
            .collect();
        v.sort_by_key(|&(mc, mp)| (mc + 1) * mp);
        v
    };

    let mut raw = ResultTable::new("scaling-compare-raw", &NDECS_COLUMNS);
    let mut summary = ResultTable::new(
        "scaling-compare-summary",
        &[
            "manifest_hash",
            "n",
            "steps",
            "target_eps_rel",
            "ndecs_device_calls",
            "ndecs_mean_eps_rel",
            "reached",
            "smc_theoretical_samples",
        ],
    );
    let mut series: Vec<(String, Vec<(f64, f64)>)> = vec![
        ("NDE-CS device calls".into(), Vec::new()),
        ("SMC theoretical".into(), Vec::new()),
    ];

    for &n in &manifest.grid.n_list {
        for &steps in &manifest.grid.steps_list {
            let pc = manifest.circuit.build(Some(n), Some(steps), None)?;
            let o = manifest.circuit.observable(&pc);
            let truth = resolve_truth(manifest, &pc, &o)?;
            let smc_count = smc_theoretical_samples(&pc, target);
            let instance = Instance {
                circuit: pc.clone(),
                noise: manifest.noise.attachment()?,
                observable: o.clone(),
                initial: 0,
            };
            let probe_noisy = instance.noise.attach(&pc.to_circuit())?;

            let mut reached = false;
            let mut used_calls = 0u64;
            let mut best_eps = f64::INFINITY;
            for &(mc, mp) in &cells {
                let mut mean_rel = 0.0;
                for rep in 0..manifest.repeats {
                    let t0 = Instant::now();
                    let seed = child_seed(
                        manifest.seed,
                        purpose::REPEAT,
                        ((n * 1000 + steps) * 101 + rep) as u64,
                    );
                    let device = manifest.device.config_for(&probe_noisy, seed);
                    let run = protocol::run(
                        &instance,
                        mc,
                        mp,
                        manifest.circuit.constraint(),
                        &device,
                        seed,
                        Some(truth),
                    )?;
                    let eps_rel = run.estimate.eps_rel.unwrap_or(f64::NAN);
                    mean_rel += eps_rel;
                    raw.push(vec![
                        hash.clone(),
                        seed.to_string(),
                        mc.to_string(),
                        mp.to_string(),
                        n.to_string(),
                        steps.to_string(),
                        fmt_f64(run.estimate.value),
                        fmt_f64(truth),
                        fmt_f64(run.estimate.eps_abs.unwrap_or(f64::NAN)),
                        fmt_f64(eps_rel),
                        run.device_calls.to_string(),
                        format!("{:.3}", t0.elapsed().as_secs_f64()),
                    ]);
                }
                mean_rel /= manifest.repeats as f64;
                used_calls = ((mc + 1) * mp) as u64;
                best_eps = best_eps.min(mean_rel);
                if mean_rel <= target {
                    reached = true;
                    break;
                }
            }
            summary.push(vec![
                hash.clone(),
                n.to_string(),
                steps.to_string(),
                fmt_f64(target),
                used_calls.to_string(),
                fmt_f64(best_eps),
                reached.to_string(),
                fmt_f64(smc_count),
            ]);
            series[0].1.push((steps as f64, used_calls as f64));
            series[1].1.push((steps as f64, smc_count));
        }
    }

    let mut out = ExperimentOutput::new();
    out.plots.push((
        "scaling-compare".into(),
        plot::line_plot_svg(
            &format!("cost to reach eps_rel = {target}"),
            "Trotter steps",
            "evaluations",
            &series,
            false,
            true,
        ),
    ));
    out.tables.push(raw);
    out.tables.push(summary);
    Ok(out)
}

/// SPD cost scaling on the structured family: relative error per
/// (D, m_max), the minimal path budget reaching fixed error thresholds, and
/// the slope of log2(budget at 10%) against the qubit number.
pub fn run_spd_scaling(manifest: &Manifest) -> Result<ExperimentOutput> {
    manifest.validate()?;
    let hash = format!("{:016x}", manifest.hash());
    let thresholds = [0.8, 0.6, 0.4, 0.1, 0.01];

    let mut raw = ResultTable::new(
        "spd-scaling-raw",
        &[
            "manifest_hash",
            "d",
            "n",
            "m_max",
            "value",
            "truth",
            "eps_rel",
            "peak_paths",
            "wall_seconds",
        ],
    );
    let mut threshold_table = ResultTable::new(
        "spd-scaling-thresholds",
        &[
            "manifest_hash",
            "d",
            "n",
            "threshold",
            "m_max_needed",
            "reached",
        ],
    );
    let mut at_ten_percent: Vec<(f64, f64)> = Vec::new();
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();

    for &d in &manifest.grid.d_list {
        let pc = manifest.circuit.build(None, None, Some(d))?;
        let o = manifest.circuit.observable(&pc);
        let n = pc.n_qubits();
        let truth = resolve_truth(manifest, &pc, &o)?;
        let circuit = pc.to_circuit();
        let mut curve = Vec::new();
        let mut epsilons = Vec::new();
        for &m_max in &manifest.grid.m_max {
            let t0 = Instant::now();
            let run = spd_run(&circuit, &o, 0, &TruncationPolicy::new(m_max)?)?;
            let eps_rel = ((run.value - truth) / truth).abs();
            epsilons.push((m_max, eps_rel));
            curve.push((m_max as f64, eps_rel.max(1e-16)));
            raw.push(vec![
                hash.clone(),
                d.to_string(),
                n.to_string(),
                m_max.to_string(),
                fmt_f64(run.value),
                fmt_f64(truth),
                fmt_f64(eps_rel),
                run.peak_paths.to_string(),
                format!("{:.3}", t0.elapsed().as_secs_f64()),
            ]);
        }
        for &thr in &thresholds {
            let hit = epsilons.iter().find(|&&(_, e)| e <= thr);
            threshold_table.push(vec![
                hash.clone(),
                d.to_string(),
                n.to_string(),
                fmt_f64(thr),
                hit.map(|&(m, _)| m.to_string()).unwrap_or_else(|| "-".into()),
                hit.is_some().to_string(),
            ]);
            if thr == 0.1 {
                if let Some(&(m, _)) = hit {
                    at_ten_percent.push((n as f64, (m as f64).log2()));
                }
            }
        }
        series.push((format!("n={n}"), curve));
    }

    let (slope, _) = if at_ten_percent.len() >= 2 {
        linear_fit(&at_ten_percent)
    } else {
        (f64::NAN, f64::NAN)
    };
    let mut summary = ResultTable::new(
        "spd-scaling-summary",
        &["manifest_hash", "threshold", "log2_mmax_slope_vs_n", "points"],
    );
    summary.push(vec![
        hash,
        fmt_f64(0.1),
        fmt_f64(slope),
        at_ten_percent.len().to_string(),
    ]);

    let mut out = ExperimentOutput::new();
    out.plots.push((
        "spd-scaling".into(),
        plot::line_plot_svg(
            "SPD relative error vs path budget",
            "m_max",
            "relative error",
            &series,
            true,
            true,
        ),
    ));
    out.notes.push(format!(
        "log2(m_max at 10%) slope vs n: {slope:.4} over {} sizes",
        at_ten_percent.len()
    ));
    out.tables.push(raw);
    out.tables.push(threshold_table);
    out.tables.push(summary);
    Ok(out)
}

/// Theoretical SMC sample count at a target relative error.
pub fn smc_theoretical_samples(pc: &ParamCircuit, target_eps_rel: f64) -> f64 {
    quasiprob::smc_prefactor(pc) / (target_eps_rel * target_eps_rel)
}
