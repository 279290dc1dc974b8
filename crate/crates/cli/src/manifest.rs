//! Experiment manifests: a TOML file pins the circuit family, noise profile,
//! device emulation settings, parameter grids, repeat count and root seed,
//! so every result table is reproducible from the manifest alone.

use serde::{Deserialize, Serialize};
use std::path::Path;

use ndecs_core::circuit::{build_structured_family, build_trotter_ising, compile_native, ParamCircuit};
use ndecs_core::dense::{auto_trajectories, DeviceEmulatorConfig, ShotMode, Trajectories};
use ndecs_core::noise::HardwareNoiseProfile;
use ndecs_core::pauli::{PauliLetter, PauliObservable, PauliString};
use ndecs_core::protocol::{ConstraintMode, NoiseAttachment};

use crate::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    NdecsGrid,
    SmcConvergence,
    ScalingCompare,
    SpdScaling,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CircuitFamily {
    TrotterIsing,
    Structured,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSpec {
    pub family: CircuitFamily,
    #[serde(default)]
    pub n: Option<usize>,
    /// Trotter step count N.
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default = "one")]
    pub j: f64,
    #[serde(default = "minus_one")]
    pub h: f64,
    #[serde(default = "one")]
    pub t: f64,
    /// Compile rotations into the native {R_Z, CZ, H} basis.
    #[serde(default = "default_true")]
    pub native: bool,
    /// Structured-family block count D (n = 2D + 1).
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub theta: f64,
    #[serde(default = "quarter_pi")]
    pub phi: f64,
}

fn one() -> f64 {
    1.0
}
fn minus_one() -> f64 {
    -1.0
}
fn quarter_pi() -> f64 {
    std::f64::consts::FRAC_PI_4
}
fn default_true() -> bool {
    true
}

impl CircuitSpec {
    /// Builds the parameterized circuit for given size overrides.
    pub fn build(&self, n: Option<usize>, steps: Option<usize>, d: Option<usize>) -> Result<ParamCircuit> {
        match self.family {
            CircuitFamily::TrotterIsing => {
                let n = n
                    .or(self.n)
                    .ok_or_else(|| CliError::Manifest("circuit.n is required".into()))?;
                let steps = steps
                    .or(self.steps)
                    .ok_or_else(|| CliError::Manifest("circuit.steps is required".into()))?;
                let pc = build_trotter_ising(n, steps, self.j, self.h, self.t)?;
                Ok(if self.native { compile_native(&pc)? } else { pc })
            }
            CircuitFamily::Structured => {
                let d = d
                    .or(self.d)
                    .ok_or_else(|| CliError::Manifest("circuit.d is required".into()))?;
                Ok(build_structured_family(d, self.theta, self.phi)?)
            }
        }
    }

    /// The family's stock observable: the magnetization `M_Z` for the Ising
    /// circuits, `Z_1` for the structured family.
    pub fn observable(&self, pc: &ParamCircuit) -> PauliObservable {
        match self.family {
            CircuitFamily::TrotterIsing => PauliObservable::z_magnetization(pc.n_qubits()),
            CircuitFamily::Structured => PauliObservable::single(&PauliString::single(
                pc.n_qubits(),
                0,
                PauliLetter::Z,
            )),
        }
    }

    pub fn constraint(&self) -> ConstraintMode {
        match self.family {
            CircuitFamily::TrotterIsing => ConstraintMode::None,
            CircuitFamily::Structured => ConstraintMode::Mirror,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default = "default_gamma_zz")]
    pub gamma_zz: f64,
    #[serde(default = "default_gamma_1q")]
    pub gamma_x: f64,
    #[serde(default = "default_gamma_1q")]
    pub gamma_y: f64,
    #[serde(default = "default_gamma_1q")]
    pub gamma_z: f64,
    /// Axis-aligned per-rotation noise instead of the two-qubit profile.
    #[serde(default)]
    pub axis_gamma: Option<f64>,
}

fn default_gamma_zz() -> f64 {
    1e-3
}
fn default_gamma_1q() -> f64 {
    2e-3
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            gamma_zz: default_gamma_zz(),
            gamma_x: default_gamma_1q(),
            gamma_y: default_gamma_1q(),
            gamma_z: default_gamma_1q(),
            axis_gamma: None,
        }
    }
}

impl NoiseSpec {
    pub fn attachment(&self) -> Result<NoiseAttachment> {
        if let Some(gamma) = self.axis_gamma {
            return Ok(NoiseAttachment::AxisAligned(gamma));
        }
        let profile = HardwareNoiseProfile::new(self.gamma_zz, self.gamma_x, self.gamma_y, self.gamma_z)?;
        Ok(if profile.is_noiseless() {
            NoiseAttachment::None
        } else {
            NoiseAttachment::Profile(profile)
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    /// Measurement shots per circuit evaluation; omit for exact readout.
    #[serde(default = "default_shots")]
    pub shots: Option<u64>,
    /// "auto" | "exhaustive" | a sample count.
    #[serde(default)]
    pub trajectories: TrajectorySpec,
    #[serde(default = "default_traj_samples")]
    pub samples: u64,
    /// "per-term" (default) or "shared" shot allocation across observable terms.
    #[serde(default)]
    pub shot_mode: ShotModeSpec,
}

fn default_shots() -> Option<u64> {
    Some(1 << 14)
}
fn default_traj_samples() -> u64 {
    ndecs_core::dense::DEFAULT_TRAJECTORIES
}

impl Default for DeviceSpec {
    fn default() -> Self {
        DeviceSpec {
            shots: default_shots(),
            trajectories: TrajectorySpec::Auto,
            samples: default_traj_samples(),
            shot_mode: ShotModeSpec::PerTerm,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectorySpec {
    #[default]
    Auto,
    Exhaustive,
    Sampled,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShotModeSpec {
    #[default]
    PerTerm,
    Shared,
}

impl DeviceSpec {
    /// Resolves the trajectory policy against a concrete noisy circuit and
    /// pins the full emulator configuration.
    pub fn config_for(&self, noisy_circuit: &ndecs_core::circuit::Circuit, seed: u64) -> DeviceEmulatorConfig {
        let trajectories = match self.trajectories {
            TrajectorySpec::Auto => auto_trajectories(noisy_circuit, self.samples),
            TrajectorySpec::Exhaustive => Trajectories::Exhaustive,
            TrajectorySpec::Sampled => Trajectories::Sampled(self.samples),
        };
        DeviceEmulatorConfig {
            shots: self.shots,
            shot_mode: match self.shot_mode {
                ShotModeSpec::PerTerm => ShotMode::PerTerm,
                ShotModeSpec::Shared => ShotMode::Shared,
            },
            trajectories,
            seed,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Clifford-configuration counts M_C.
    #[serde(default)]
    pub mc: Vec<usize>,
    /// Insertion-pattern counts M_P.
    #[serde(default)]
    pub mp: Vec<usize>,
    /// Monte Carlo sample counts M.
    #[serde(default)]
    pub m: Vec<u64>,
    /// SPD path budgets.
    #[serde(default)]
    pub m_max: Vec<usize>,
    /// Structured-family block counts.
    #[serde(default)]
    pub d_list: Vec<usize>,
    /// Qubit counts for scaling comparisons.
    #[serde(default)]
    pub n_list: Vec<usize>,
    /// Trotter step counts for scaling comparisons.
    #[serde(default)]
    pub steps_list: Vec<usize>,
    /// Target relative error for scaling comparisons and extrapolations.
    #[serde(default = "default_target")]
    pub target_eps_rel: f64,
}

fn default_target() -> f64 {
    0.01
}

/// Where the ground truth for error metrics comes from; always explicit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthSource {
    #[default]
    Dense,
    /// The structured family's exact cancellation point: truth = 1.
    AnalyticIdentity,
    UntruncatedSpd,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub kind: ExperimentKind,
    pub seed: u64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub truth: TruthSource,
    pub circuit: CircuitSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub device: DeviceSpec,
    #[serde(default)]
    pub grid: GridSpec,
}

fn default_repeats() -> usize {
    20
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path)?;
        Manifest::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Manifest> {
        toml::from_str(text).map_err(|e| CliError::Manifest(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("manifest serializes")
    }

    /// FNV-1a hash of the canonical TOML form; stamped on every result row.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_toml().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(CliError::Manifest("repeats must be at least 1".into()));
        }
        let nonempty = |name: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(CliError::Manifest(format!("grid.{name} must be nonempty")))
            }
        };
        match self.kind {
            ExperimentKind::NdecsGrid => {
                nonempty("mc", !self.grid.mc.is_empty())?;
                nonempty("mp", !self.grid.mp.is_empty())?;
            }
            ExperimentKind::SmcConvergence => nonempty("m", !self.grid.m.is_empty())?,
            ExperimentKind::ScalingCompare => {
                nonempty("n_list", !self.grid.n_list.is_empty())?;
                nonempty("steps_list", !self.grid.steps_list.is_empty())?;
                nonempty("mc", !self.grid.mc.is_empty())?;
                nonempty("mp", !self.grid.mp.is_empty())?;
            }
            ExperimentKind::SpdScaling => {
                nonempty("d_list", !self.grid.d_list.is_empty())?;
                nonempty("m_max", !self.grid.m_max.is_empty())?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
kind = "ndecs-grid"
seed = 17
repeats = 20

[circuit]
family = "trotter-ising"
n = 8
steps = 3

[noise]
gamma_zz = 1e-3
gamma_x = 2e-3
gamma_y = 2e-3
gamma_z = 2e-3

[device]
shots = 16384

[grid]
mc = [25, 50, 100, 200, 400]
mp = [5, 10, 20, 40, 80]
"#;

    #[test]
    fn parses_and_hashes_stably() {
        let m = Manifest::parse(EXAMPLE).unwrap();
        m.validate().unwrap();
        assert_eq!(m.kind, ExperimentKind::NdecsGrid);
        assert_eq!(m.hash(), Manifest::parse(EXAMPLE).unwrap().hash());
        assert_eq!(m.circuit.build(None, None, None).unwrap().n_layers(), 72);
        assert_eq!(m.device.shots, Some(16384));
    }

    #[test]
    fn structured_defaults() {
        let m = Manifest::parse(
            r#"
kind = "spd-scaling"
seed = 1
[circuit]
family = "structured"
d = 4
[grid]
d_list = [4]
m_max = [2, 4]
"#,
        )
        .unwrap();
        m.validate().unwrap();
        let pc = m.circuit.build(None, None, None).unwrap();
        assert_eq!(pc.n_qubits(), 9);
        assert_eq!(m.circuit.observable(&pc).n_terms(), 1);
        assert!(matches!(m.circuit.constraint(), ConstraintMode::Mirror));
    }

    #[test]
    fn rejects_unknown_fields() {
        assert!(Manifest::parse("kind = \"ndecs-grid\"\nseed = 1\nbogus = 2\n[circuit]\nfamily = \"structured\"").is_err());
    }
}
