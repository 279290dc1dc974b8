//! Layered circuit IR and builders for the benchmark circuit families.
//!
//! A [`ParamCircuit`] keeps the symbolic layer structure — a Clifford prefix
//! plus one Pauli rotation per layer, with trailing Cliffords in a suffix —
//! together with a current angle vector. Substituting a
//! [`CliffordConfiguration`] (one angle index `k ∈ {0,1,2,3}` per layer,
//! fixing the angle to `kπ/2`) produces an immutable [`Circuit`] with the
//! exact same gate layout. Pauli insertion patterns append one Pauli gate
//! after each layer's rotation; when the circuit executes noisily the
//! insertion acts after that rotation's noise slot.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::noise::PauliNoiseChannel;
use crate::pauli::{PauliLetter, PauliString};

/// Tolerance for snapping rotation angles to Clifford multiples of π/2.
pub const CLIFFORD_ANGLE_TOL: f64 = 1e-12;

/// If `angle` is within [`CLIFFORD_ANGLE_TOL`] of `kπ/2`, returns `k mod 4`.
pub fn clifford_rotation_index(angle: f64) -> Option<u8> {
    let k = (angle / FRAC_PI_2).round();
    if (angle - k * FRAC_PI_2).abs() < CLIFFORD_ANGLE_TOL {
        Some(((k as i64).rem_euclid(4)) as u8)
    } else {
        None
    }
}

/// One circuit gate.
#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    H(usize),
    S(usize),
    X(usize),
    Y(usize),
    Z(usize),
    Cz(usize, usize),
    Cnot { control: usize, target: usize },
    /// Controlled-Z in the X basis: `(H⊗H)·CZ·(H⊗H)`, kept as the named
    /// composite and expanded only at engine boundaries.
    CzX(usize, usize),
    Rotation { axis: PauliString, angle: f64 },
    Insertion(PauliString),
}

impl Gate {
    pub fn rotation(axis: PauliString, angle: f64) -> Gate {
        Gate::Rotation { axis, angle }
    }

    /// Qubits named by the gate (rotations/insertions report their support).
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::H(q) | Gate::S(q) | Gate::X(q) | Gate::Y(q) | Gate::Z(q) => vec![*q],
            Gate::Cz(a, b) | Gate::CzX(a, b) => vec![*a, *b],
            Gate::Cnot { control, target } => vec![*control, *target],
            Gate::Rotation { axis, .. } => axis.support().collect(),
            Gate::Insertion(p) => p.support().collect(),
        }
    }

    /// The qubit pair of a two-qubit gate (CZ, CNOT, CZ_X, or a rotation
    /// supported on exactly two qubits). Insertions never count.
    pub fn two_qubit_pair(&self) -> Option<(usize, usize)> {
        match self {
            Gate::Cz(a, b) | Gate::CzX(a, b) => Some((*a, *b)),
            Gate::Cnot { control, target } => Some((*control, *target)),
            Gate::Rotation { axis, .. } => {
                let mut it = axis.support();
                match (it.next(), it.next(), it.next()) {
                    (Some(a), Some(b), None) => Some((a, b)),
                    _ => None,
                }
            }
            _ => None,
        }
    }

    pub fn is_clifford(&self) -> bool {
        match self {
            Gate::Rotation { angle, .. } => clifford_rotation_index(*angle).is_some(),
            _ => true,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        for q in self.qubits() {
            if q >= n {
                return Err(Error::QubitOutOfRange {
                    index: q,
                    n_qubits: n,
                });
            }
        }
        match self {
            Gate::Cz(a, b) | Gate::CzX(a, b) if a == b => Err(Error::InvalidArgument(
                "two-qubit gate targets must be distinct".into(),
            )),
            Gate::Cnot { control, target } if control == target => Err(Error::InvalidArgument(
                "two-qubit gate targets must be distinct".into(),
            )),
            Gate::Rotation { axis, .. } => {
                if axis.n_qubits() != n {
                    return Err(Error::DimensionMismatch(n, axis.n_qubits()));
                }
                if axis.phase_rel_canonical() != 0 {
                    return Err(Error::InvalidArgument(format!(
                        "rotation axis {axis} carries a phase"
                    )));
                }
                if axis.is_identity_support() {
                    return Err(Error::UnsupportedAxis("identity axis".into()));
                }
                Ok(())
            }
            Gate::Insertion(p) => {
                if p.n_qubits() != n {
                    return Err(Error::DimensionMismatch(n, p.n_qubits()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Text form, one gate per line; angles rendered with full precision.
    fn to_line(&self) -> String {
        match self {
            Gate::H(q) => format!("H {q}"),
            Gate::S(q) => format!("S {q}"),
            Gate::X(q) => format!("X {q}"),
            Gate::Y(q) => format!("Y {q}"),
            Gate::Z(q) => format!("Z {q}"),
            Gate::Cz(a, b) => format!("CZ {a} {b}"),
            Gate::Cnot { control, target } => format!("CNOT {control} {target}"),
            Gate::CzX(a, b) => format!("CZX {a} {b}"),
            Gate::Rotation { axis, angle } => {
                let mut s = String::from("ROT +");
                let support: Vec<usize> = axis.support().collect();
                for &q in &support {
                    s.push(axis.letter(q).to_char());
                }
                for &q in &support {
                    write!(s, " {q}").unwrap();
                }
                write!(s, " {angle:?}").unwrap();
                s
            }
            Gate::Insertion(p) => format!("INS {p}"),
        }
    }

    /// Layout descriptor with the angle masked; used for structural equality.
    pub fn layout_signature(&self) -> String {
        match self {
            Gate::Rotation { axis, .. } => {
                let line = Gate::Rotation {
                    axis: *axis,
                    angle: 0.0,
                }
                .to_line();
                line.rsplit_once(' ').map(|(head, _)| head.to_string()).unwrap_or(line)
            }
            other => other.to_line(),
        }
    }
}

/// One rotation layer: Clifford prefix, rotation axis, optional insertion.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub prefix: Vec<Gate>,
    pub axis: PauliString,
    pub insertion: Option<PauliString>,
}

impl Layer {
    pub fn bare(axis: PauliString) -> Layer {
        Layer {
            prefix: Vec::new(),
            axis,
            insertion: None,
        }
    }

    pub fn with_prefix(prefix: Vec<Gate>, axis: PauliString) -> Layer {
        Layer {
            prefix,
            axis,
            insertion: None,
        }
    }
}

/// Parameterized layered circuit: Clifford prefix + Pauli rotation per layer,
/// a trailing Clifford suffix, and the current angle vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamCircuit {
    n_qubits: usize,
    layers: Vec<Layer>,
    suffix: Vec<Gate>,
    angles: Vec<f64>,
}

impl ParamCircuit {
    pub fn new(
        n_qubits: usize,
        layers: Vec<Layer>,
        suffix: Vec<Gate>,
        angles: Vec<f64>,
    ) -> Result<Self> {
        if angles.len() != layers.len() {
            return Err(Error::InvalidArgument(format!(
                "{} angles for {} layers",
                angles.len(),
                layers.len()
            )));
        }
        for layer in &layers {
            for g in &layer.prefix {
                g.validate(n_qubits)?;
                if matches!(g, Gate::Rotation { .. } | Gate::Insertion(_)) {
                    return Err(Error::InvalidArgument(
                        "layer prefixes hold named Clifford gates only".into(),
                    ));
                }
            }
            Gate::Rotation {
                axis: layer.axis,
                angle: 0.0,
            }
            .validate(n_qubits)?;
            if let Some(p) = &layer.insertion {
                Gate::Insertion(*p).validate(n_qubits)?;
            }
        }
        for g in &suffix {
            g.validate(n_qubits)?;
        }
        Ok(ParamCircuit {
            n_qubits,
            layers,
            suffix,
            angles,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn suffix(&self) -> &[Gate] {
        &self.suffix
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn set_angles(&mut self, angles: Vec<f64>) -> Result<()> {
        if angles.len() != self.layers.len() {
            return Err(Error::InvalidArgument(format!(
                "{} angles for {} layers",
                angles.len(),
                self.layers.len()
            )));
        }
        self.angles = angles;
        Ok(())
    }

    /// Materializes the circuit at the given per-layer angles.
    pub fn circuit_with_angles(&self, angles: &[f64]) -> Result<Circuit> {
        if angles.len() != self.layers.len() {
            return Err(Error::InvalidArgument(format!(
                "{} angles for {} layers",
                angles.len(),
                self.layers.len()
            )));
        }
        let mut gates = Vec::new();
        for (layer, &angle) in self.layers.iter().zip(angles) {
            gates.extend(layer.prefix.iter().cloned());
            gates.push(Gate::Rotation {
                axis: layer.axis,
                angle,
            });
            if let Some(p) = &layer.insertion {
                gates.push(Gate::Insertion(*p));
            }
        }
        gates.extend(self.suffix.iter().cloned());
        Circuit::new(self.n_qubits, gates)
    }

    /// Concrete circuit at the stored angle vector.
    pub fn to_circuit(&self) -> Circuit {
        self.circuit_with_angles(&self.angles.clone())
            .expect("stored angles match layer count")
    }

    /// Replaces every rotation angle by `k_l · π/2`, yielding an entirely
    /// Clifford circuit with identical gate layout.
    pub fn substitute(&self, config: &CliffordConfiguration) -> Result<Circuit> {
        if config.len() != self.layers.len() {
            return Err(Error::InvalidArgument(format!(
                "configuration length {} for {} layers",
                config.len(),
                self.layers.len()
            )));
        }
        let angles: Vec<f64> = config.indices().iter().map(|&k| k as f64 * FRAC_PI_2).collect();
        self.circuit_with_angles(&angles)
    }

    /// Appends one insertion per layer, immediately after the rotation
    /// (after that layer's noise slot when executing noisily).
    pub fn apply_insertion_pattern(&self, pattern: &InsertionPattern) -> Result<ParamCircuit> {
        if pattern.len() != self.layers.len() {
            return Err(Error::InvalidArgument(format!(
                "pattern length {} for {} layers",
                pattern.len(),
                self.layers.len()
            )));
        }
        let mut out = self.clone();
        for (layer, p) in out.layers.iter_mut().zip(pattern.paulis()) {
            if p.n_qubits() != self.n_qubits {
                return Err(Error::DimensionMismatch(self.n_qubits, p.n_qubits()));
            }
            if layer.insertion.is_some() {
                return Err(Error::InvalidArgument(
                    "layer already carries an insertion".into(),
                ));
            }
            layer.insertion = Some(PauliString::canonical(self.n_qubits, p.key()));
        }
        Ok(out)
    }
}

/// A choice `k ∈ {0,1,2,3}^L` fixing every rotation angle to `k_l·π/2`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CliffordConfiguration {
    indices: Vec<u8>,
}

impl CliffordConfiguration {
    pub fn new(indices: Vec<u8>) -> Result<Self> {
        if indices.iter().any(|&k| k > 3) {
            return Err(Error::InvalidArgument(
                "configuration entries must lie in {0,1,2,3}".into(),
            ));
        }
        Ok(CliffordConfiguration { indices })
    }

    pub fn zeros(len: usize) -> Self {
        CliffordConfiguration {
            indices: vec![0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[u8] {
        &self.indices
    }
}

/// One Pauli insertion per rotation layer.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct InsertionPattern {
    paulis: Vec<PauliString>,
}

impl InsertionPattern {
    pub fn new(paulis: Vec<PauliString>) -> Self {
        InsertionPattern {
            paulis: paulis
                .into_iter()
                .map(|p| PauliString::canonical(p.n_qubits(), p.key()))
                .collect(),
        }
    }

    pub fn identity(layers: usize, n_qubits: usize) -> Self {
        InsertionPattern {
            paulis: vec![PauliString::identity(n_qubits); layers],
        }
    }

    pub fn len(&self) -> usize {
        self.paulis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paulis.is_empty()
    }

    pub fn paulis(&self) -> &[PauliString] {
        &self.paulis
    }

    pub fn is_identity(&self) -> bool {
        self.paulis.iter().all(|p| p.is_identity_support())
    }
}

/// Concrete gate list with an optional noise channel per gate position.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    noise: Vec<Option<PauliNoiseChannel>>,
}

impl Circuit {
    pub fn new(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        for g in &gates {
            g.validate(n_qubits)?;
        }
        let noise = vec![None; gates.len()];
        Ok(Circuit {
            n_qubits,
            gates,
            noise,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn noise_slots(&self) -> &[Option<PauliNoiseChannel>] {
        &self.noise
    }

    pub fn has_noise(&self) -> bool {
        self.noise.iter().any(|s| s.is_some())
    }

    pub fn set_noise(&mut self, position: usize, channel: PauliNoiseChannel) -> Result<()> {
        if position >= self.gates.len() {
            return Err(Error::InvalidArgument(format!(
                "gate position {position} out of range"
            )));
        }
        if channel.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch(self.n_qubits, channel.n_qubits()));
        }
        self.noise[position] = Some(channel);
        Ok(())
    }

    pub fn clear_noise(&mut self) {
        for slot in &mut self.noise {
            *slot = None;
        }
    }

    pub fn is_clifford(&self) -> bool {
        self.gates.iter().all(Gate::is_clifford)
    }

    pub fn rotation_positions(&self) -> Vec<usize> {
        self.gates
            .iter()
            .enumerate()
            .filter(|(_, g)| matches!(g, Gate::Rotation { .. }))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn rotation_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| matches!(g, Gate::Rotation { .. }))
            .count()
    }

    /// Appends one insertion gate after each rotation (and after that
    /// rotation's noise slot, since the slot is bound to the gate).
    pub fn apply_insertion_pattern(&self, pattern: &InsertionPattern) -> Result<Circuit> {
        if pattern.len() != self.rotation_count() {
            return Err(Error::InvalidArgument(format!(
                "pattern length {} for {} rotation layers",
                pattern.len(),
                self.rotation_count()
            )));
        }
        let mut gates = Vec::with_capacity(self.gates.len() + pattern.len());
        let mut noise = Vec::with_capacity(self.gates.len() + pattern.len());
        let mut next = 0;
        for (gate, slot) in self.gates.iter().zip(self.noise.iter()) {
            let is_rotation = matches!(gate, Gate::Rotation { .. });
            gates.push(gate.clone());
            noise.push(slot.clone());
            if is_rotation {
                let p = pattern.paulis()[next];
                if p.n_qubits() != self.n_qubits {
                    return Err(Error::DimensionMismatch(self.n_qubits, p.n_qubits()));
                }
                gates.push(Gate::Insertion(PauliString::canonical(self.n_qubits, p.key())));
                noise.push(None);
                next += 1;
            }
        }
        Ok(Circuit {
            n_qubits: self.n_qubits,
            gates,
            noise,
        })
    }

    /// Gate layout with rotation angles masked; two circuits produced from
    /// the same skeleton compare equal regardless of angle substitutions.
    pub fn layout_signature(&self) -> Vec<String> {
        self.gates.iter().map(Gate::layout_signature).collect()
    }

    /// Line-oriented text form with a versioned header. Noise slots are not
    /// representable; serialize the noiseless skeleton and record the noise
    /// profile alongside.
    pub fn to_text(&self) -> Result<String> {
        if self.has_noise() {
            return Err(Error::InvalidArgument(
                "cannot serialize a circuit with attached noise".into(),
            ));
        }
        let mut out = format!("circuit v1 {}\n", self.n_qubits);
        for g in &self.gates {
            out.push_str(&g.to_line());
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Circuit> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty circuit text".into()))?;
        let mut parts = header.split_whitespace();
        match (parts.next(), parts.next()) {
            (Some("circuit"), Some("v1")) => {}
            _ => return Err(Error::Parse(format!("bad circuit header '{header}'"))),
        }
        let n: usize = parts
            .next()
            .ok_or_else(|| Error::Parse("header missing qubit count".into()))?
            .parse()
            .map_err(|_| Error::Parse("bad qubit count".into()))?;
        let mut gates = Vec::new();
        for line in lines {
            gates.push(parse_gate_line(line.trim(), n)?);
        }
        Circuit::new(n, gates)
    }
}

fn parse_gate_line(line: &str, n: usize) -> Result<Gate> {
    let mut parts = line.split_whitespace();
    let op = parts
        .next()
        .ok_or_else(|| Error::Parse(format!("empty gate line '{line}'")))?;
    let parse_q = |tok: Option<&str>| -> Result<usize> {
        tok.ok_or_else(|| Error::Parse(format!("missing qubit in '{line}'")))?
            .parse()
            .map_err(|_| Error::Parse(format!("bad qubit index in '{line}'")))
    };
    match op {
        "H" => Ok(Gate::H(parse_q(parts.next())?)),
        "S" => Ok(Gate::S(parse_q(parts.next())?)),
        "X" => Ok(Gate::X(parse_q(parts.next())?)),
        "Y" => Ok(Gate::Y(parse_q(parts.next())?)),
        "Z" => Ok(Gate::Z(parse_q(parts.next())?)),
        "CZ" => Ok(Gate::Cz(parse_q(parts.next())?, parse_q(parts.next())?)),
        "CNOT" => Ok(Gate::Cnot {
            control: parse_q(parts.next())?,
            target: parse_q(parts.next())?,
        }),
        "CZX" => Ok(Gate::CzX(parse_q(parts.next())?, parse_q(parts.next())?)),
        "ROT" => {
            let spec = parts
                .next()
                .ok_or_else(|| Error::Parse(format!("ROT missing axis in '{line}'")))?;
            let letters_str = spec
                .strip_prefix('+')
                .ok_or_else(|| Error::Parse(format!("ROT axis must carry a '+' prefix: '{line}'")))?;
            let letters: Result<Vec<PauliLetter>> =
                letters_str.chars().map(PauliLetter::from_char).collect();
            let letters = letters?;
            let rest: Vec<&str> = parts.collect();
            if rest.len() != letters.len() + 1 {
                return Err(Error::Parse(format!(
                    "ROT wants {} qubit indices and an angle: '{line}'",
                    letters.len()
                )));
            }
            let mut axis = PauliString::identity(n);
            for (letter, tok) in letters.iter().zip(&rest) {
                let q: usize = tok
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad qubit index in '{line}'")))?;
                if q >= n {
                    return Err(Error::QubitOutOfRange {
                        index: q,
                        n_qubits: n,
                    });
                }
                axis = axis
                    .multiply(&PauliString::single(n, q, *letter))
                    .expect("same width");
            }
            let angle: f64 = rest
                .last()
                .unwrap()
                .parse()
                .map_err(|_| Error::Parse(format!("bad angle in '{line}'")))?;
            Ok(Gate::Rotation { axis, angle })
        }
        "INS" => {
            let spec = parts
                .next()
                .ok_or_else(|| Error::Parse(format!("INS missing Pauli in '{line}'")))?;
            let p: PauliString = spec.parse()?;
            if p.n_qubits() != n {
                return Err(Error::DimensionMismatch(n, p.n_qubits()));
            }
            Ok(Gate::Insertion(PauliString::canonical(n, p.key())))
        }
        other => Err(Error::Parse(format!("unknown gate '{other}'"))),
    }
}

/// Second-order Trotterized transverse-field Ising evolution on a ring.
///
/// Per step: X rotations with the half-step angle `T·h/N` on every site, ZZ
/// rotations with angle `-2·J·T/N` on every ring edge, then the X rotations
/// again — `3nN` rotation layers in total.
pub fn build_trotter_ising(n: usize, steps: usize, j: f64, h: f64, t: f64) -> Result<ParamCircuit> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "ring topology needs n >= 3, got {n}"
        )));
    }
    if steps < 1 {
        return Err(Error::InvalidArgument("need at least one Trotter step".into()));
    }
    let x_half = t * h / steps as f64;
    let zz_angle = -2.0 * j * t / steps as f64;
    let mut layers = Vec::with_capacity(3 * n * steps);
    let mut angles = Vec::with_capacity(3 * n * steps);
    for _ in 0..steps {
        for q in 0..n {
            layers.push(Layer::bare(PauliString::single(n, q, PauliLetter::X)));
            angles.push(x_half);
        }
        for i in 0..n {
            let a = i;
            let b = (i + 1) % n;
            let axis = PauliString::single(n, a, PauliLetter::Z)
                .multiply(&PauliString::single(n, b, PauliLetter::Z))
                .expect("same width");
            layers.push(Layer::bare(axis));
            angles.push(zz_angle);
        }
        for q in 0..n {
            layers.push(Layer::bare(PauliString::single(n, q, PauliLetter::X)));
            angles.push(x_half);
        }
    }
    ParamCircuit::new(n, layers, Vec::new(), angles)
}

/// Rewrites every rotation over the native base `{R_Z, CZ, H}`:
/// `R_X = H·R_Z·H` and `R_ZZ` via CZ-conjugated single-qubit `R_Z`. The gate
/// layout is identical across all angle substitutions.
pub fn compile_native(pc: &ParamCircuit) -> Result<ParamCircuit> {
    let n = pc.n_qubits();
    let mut layers = Vec::with_capacity(pc.n_layers());
    let mut carry: Vec<Gate> = Vec::new();
    for layer in pc.layers() {
        if layer.insertion.is_some() {
            return Err(Error::InvalidArgument(
                "compile before applying insertion patterns".into(),
            ));
        }
        let mut prefix = std::mem::take(&mut carry);
        prefix.extend(layer.prefix.iter().cloned());
        let support: Vec<usize> = layer.axis.support().collect();
        let letters: Vec<PauliLetter> = support.iter().map(|&q| layer.axis.letter(q)).collect();
        let axis = match (support.as_slice(), letters.as_slice()) {
            ([q], [PauliLetter::Z]) => PauliString::single(n, *q, PauliLetter::Z),
            ([q], [PauliLetter::X]) => {
                prefix.push(Gate::H(*q));
                carry.push(Gate::H(*q));
                PauliString::single(n, *q, PauliLetter::Z)
            }
            ([a, b], [PauliLetter::Z, PauliLetter::Z]) => {
                prefix.push(Gate::H(*b));
                prefix.push(Gate::Cz(*a, *b));
                prefix.push(Gate::H(*b));
                carry.push(Gate::H(*b));
                carry.push(Gate::Cz(*a, *b));
                carry.push(Gate::H(*b));
                PauliString::single(n, *b, PauliLetter::Z)
            }
            _ => {
                return Err(Error::UnsupportedAxis(format!(
                    "native compilation handles X, Z and ZZ axes, got {}",
                    layer.axis
                )))
            }
        };
        layers.push(Layer::with_prefix(prefix, axis));
    }
    let mut suffix = carry;
    suffix.extend(pc.suffix().iter().cloned());
    ParamCircuit::new(n, layers, suffix, pc.angles().to_vec())
}

/// Structured block family on `n = 2D+1` qubits: `2D` blocks of
/// `CZ_X · CZ · R_Y(·) · CZ · CZ_X` touching qubit 0 and one qubit pair,
/// with angle `θ+φ` in the first `D` blocks and `θ-φ` in the mirrored last
/// `D` blocks. At `θ=0, φ=π/4` the blocks telescope to the identity.
pub fn build_structured_family(d: usize, theta: f64, phi: f64) -> Result<ParamCircuit> {
    if d < 1 {
        return Err(Error::InvalidArgument("need at least one block".into()));
    }
    let n = 2 * d + 1;
    if n > crate::pauli::MAX_QUBITS {
        return Err(Error::TooManyQubits(n));
    }
    let axis = PauliString::single(n, 0, PauliLetter::Y);
    let mut layers = Vec::with_capacity(2 * d);
    let mut angles = Vec::with_capacity(2 * d);
    let mut carry: Vec<Gate> = Vec::new();
    for block in 1..=(2 * d) {
        let m = if block <= d { block } else { 2 * d + 1 - block };
        // Qubit 1-based labels (1, 2m) and (1, 2m+1) map to (0, 2m-1), (0, 2m).
        let cz = Gate::Cz(0, 2 * m - 1);
        let czx = Gate::CzX(0, 2 * m);
        let mut prefix = std::mem::take(&mut carry);
        prefix.push(czx.clone());
        prefix.push(cz.clone());
        carry.push(cz);
        carry.push(czx);
        layers.push(Layer::with_prefix(prefix, axis));
        angles.push(if block <= d { theta + phi } else { theta - phi });
    }
    ParamCircuit::new(n, layers, carry, angles)
}

/// Uniformly random Clifford circuit over the named gate set, with rotation
/// gates snapped to multiples of π/2 and occasional Pauli insertions.
pub fn random_clifford_circuit<R: Rng>(n: usize, n_gates: usize, rng: &mut R) -> Circuit {
    let mut gates = Vec::with_capacity(n_gates);
    for _ in 0..n_gates {
        gates.push(random_clifford_gate(n, rng));
    }
    Circuit::new(n, gates).expect("generated gates are valid")
}

fn random_pauli<R: Rng>(n: usize, rng: &mut R) -> PauliString {
    loop {
        let mask = if n >= 64 { u64::MAX } else { (1u64 << n) - 1 };
        let x = rng.random::<u64>() & mask;
        let z = rng.random::<u64>() & mask;
        if x | z != 0 {
            return PauliString::canonical(n, crate::pauli::PauliKey { x, z });
        }
    }
}

fn random_clifford_gate<R: Rng>(n: usize, rng: &mut R) -> Gate {
    let q = rng.random_range(0..n);
    let mut q2 = rng.random_range(0..n);
    while n > 1 && q2 == q {
        q2 = rng.random_range(0..n);
    }
    match rng.random_range(0..10u8) {
        0 => Gate::H(q),
        1 => Gate::S(q),
        2 => Gate::X(q),
        3 => Gate::Y(q),
        4 => Gate::Z(q),
        5 => Gate::Cz(q.min(q2), q.max(q2)),
        6 => Gate::Cnot {
            control: q,
            target: q2,
        },
        7 => Gate::CzX(q.min(q2), q.max(q2)),
        8 => {
            let k = rng.random_range(0..4u8);
            Gate::Rotation {
                axis: random_pauli(n, rng),
                angle: k as f64 * FRAC_PI_2,
            }
        }
        _ => Gate::Insertion(random_pauli(n, rng)),
    }
}

/// Random circuit mixing Clifford gates with arbitrary-angle Pauli rotations.
pub fn random_rotation_circuit<R: Rng>(
    n: usize,
    n_cliffords: usize,
    n_rotations: usize,
    rng: &mut R,
) -> Circuit {
    let mut gates = Vec::with_capacity(n_cliffords + n_rotations);
    let mut rotations_left = n_rotations;
    let mut cliffords_left = n_cliffords;
    while rotations_left + cliffords_left > 0 {
        let pick_rotation = if cliffords_left == 0 {
            true
        } else if rotations_left == 0 {
            false
        } else {
            rng.random_range(0..(rotations_left + cliffords_left)) < rotations_left
        };
        if pick_rotation {
            // Low-weight axes keep untruncated path growth manageable.
            let axis = loop {
                let p = random_pauli(n, rng);
                if p.support_size() <= 2 {
                    break p;
                }
            };
            gates.push(Gate::Rotation {
                axis,
                angle: rng.random_range(-3.2..3.2),
            });
            rotations_left -= 1;
        } else {
            gates.push(random_clifford_gate(n, rng));
            cliffords_left -= 1;
        }
    }
    Circuit::new(n, gates).expect("generated gates are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding;

    #[test]
    fn trotter_layer_count_and_angles() {
        let pc = build_trotter_ising(16, 5, 1.0, -1.0, 1.0).unwrap();
        assert_eq!(pc.n_layers(), 240);
        let mut saw_zz = false;
        for (layer, &angle) in pc.layers().iter().zip(pc.angles()) {
            if layer.axis.support_size() == 2 {
                assert!((angle - (-0.4)).abs() < 1e-15);
                saw_zz = true;
            } else {
                assert!((angle - (-0.2)).abs() < 1e-15);
            }
        }
        assert!(saw_zz);
    }

    #[test]
    fn trotter_small_ordering() {
        let pc = build_trotter_ising(3, 1, 1.0, -1.0, 1.0).unwrap();
        assert_eq!(pc.n_layers(), 9);
        let weights: Vec<usize> = pc.layers().iter().map(|l| l.axis.support_size()).collect();
        assert_eq!(weights, vec![1, 1, 1, 2, 2, 2, 1, 1, 1]);
        for layer in &pc.layers()[..3] {
            assert_eq!(layer.axis.letter(layer.axis.support().next().unwrap()), PauliLetter::X);
        }
    }

    #[test]
    fn trotter_zero_time_is_identity_angles() {
        let pc = build_trotter_ising(4, 2, 1.0, -1.0, 0.0).unwrap();
        assert!(pc.angles().iter().all(|&a| a == 0.0));
    }

    #[test]
    fn trotter_rejects_small_rings() {
        assert!(build_trotter_ising(2, 1, 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn structured_family_shape() {
        let pc = build_structured_family(4, 0.0, std::f64::consts::FRAC_PI_4).unwrap();
        assert_eq!(pc.n_qubits(), 9);
        assert_eq!(pc.n_layers(), 8);
        for layer in pc.layers() {
            assert_eq!(layer.axis.letter(0), PauliLetter::Y);
        }
        // Mirrored blocks share qubit pairs: block d and 2D+1-d.
        let pair = |l: usize| {
            pc.layers()[l]
                .prefix
                .iter()
                .filter_map(Gate::two_qubit_pair)
                .collect::<Vec<_>>()
        };
        // Later blocks carry the closing gates of the previous block in their
        // prefix; compare the final two entries (this block's own opener).
        let own = |l: usize| {
            let p = pair(l);
            p[p.len() - 2..].to_vec()
        };
        assert_eq!(own(3), own(4));
        assert_eq!(own(0), own(7));
    }

    #[test]
    fn substitution_preserves_layout() {
        let pc = build_trotter_ising(4, 1, 1.0, -1.0, 1.0).unwrap();
        let c0 = pc
            .substitute(&CliffordConfiguration::zeros(pc.n_layers()))
            .unwrap();
        let c1 = pc
            .substitute(&CliffordConfiguration::new(vec![1; pc.n_layers()]).unwrap())
            .unwrap();
        assert_eq!(c0.layout_signature(), c1.layout_signature());
        assert_eq!(c0.len(), c1.len());
        assert!(c0.is_clifford() && c1.is_clifford());
        let theta = pc.to_circuit();
        assert_eq!(theta.layout_signature(), c0.layout_signature());
    }

    #[test]
    fn substitution_checks_length() {
        let pc = build_trotter_ising(3, 1, 1.0, -1.0, 1.0).unwrap();
        assert!(pc.substitute(&CliffordConfiguration::zeros(3)).is_err());
    }

    #[test]
    fn insertion_pattern_on_circuit() {
        let pc = build_trotter_ising(3, 1, 1.0, -1.0, 1.0).unwrap();
        let circuit = pc.to_circuit();
        let pattern = InsertionPattern::identity(9, 3);
        let inserted = circuit.apply_insertion_pattern(&pattern).unwrap();
        assert_eq!(inserted.len(), circuit.len() + 9);
        // Every rotation is immediately followed by its insertion.
        for (i, g) in inserted.gates().iter().enumerate() {
            if matches!(g, Gate::Rotation { .. }) {
                assert!(matches!(inserted.gates()[i + 1], Gate::Insertion(_)));
            }
        }
        assert!(circuit
            .apply_insertion_pattern(&InsertionPattern::identity(3, 3))
            .is_err());
    }

    #[test]
    fn compile_native_layout_is_angle_independent() {
        let pc = build_trotter_ising(4, 2, 1.0, -1.0, 1.0).unwrap();
        let native = compile_native(&pc).unwrap();
        assert_eq!(native.n_layers(), pc.n_layers());
        for layer in native.layers() {
            assert_eq!(layer.axis.support_size(), 1);
            let q = layer.axis.support().next().unwrap();
            assert_eq!(layer.axis.letter(q), PauliLetter::Z);
        }
        let a = native
            .substitute(&CliffordConfiguration::zeros(native.n_layers()))
            .unwrap();
        let b = native
            .substitute(&CliffordConfiguration::new(vec![2; native.n_layers()]).unwrap())
            .unwrap();
        assert_eq!(a.layout_signature(), b.layout_signature());
    }

    #[test]
    fn serialization_round_trip() {
        let mut rng = seeding::stream(11, seeding::purpose::TEST, 0, 0);
        let circuit = random_clifford_circuit(5, 30, &mut rng);
        let text = circuit.to_text().unwrap();
        let back = Circuit::from_text(&text).unwrap();
        assert_eq!(circuit, back);

        let pc = build_trotter_ising(4, 1, 1.0, -1.0, 1.0).unwrap();
        let c = pc.to_circuit();
        assert_eq!(Circuit::from_text(&c.to_text().unwrap()).unwrap(), c);
    }

    #[test]
    fn serialization_rejects_noisy_circuits() {
        let pc = build_trotter_ising(3, 1, 1.0, -1.0, 1.0).unwrap();
        let c = crate::noise::attach_profile(
            &pc.to_circuit(),
            &crate::noise::HardwareNoiseProfile::enhanced_dephasing(),
        )
        .unwrap();
        assert!(c.to_text().is_err());
    }

    #[test]
    fn rotation_axis_must_be_canonical() {
        // -iY axis (phase-free bits of Y) is rejected.
        let axis = PauliString::from_bits(1, 1, 1, 0).unwrap();
        assert!(Circuit::new(1, vec![Gate::Rotation { axis, angle: 0.3 }]).is_err());
        let y: PauliString = "+Y".parse().unwrap();
        assert!(Circuit::new(1, vec![Gate::Rotation { axis: y, angle: 0.3 }]).is_ok());
    }

    #[test]
    fn clifford_angle_snapping() {
        assert_eq!(clifford_rotation_index(0.0), Some(0));
        assert_eq!(clifford_rotation_index(FRAC_PI_2), Some(1));
        assert_eq!(clifford_rotation_index(-FRAC_PI_2), Some(3));
        assert_eq!(clifford_rotation_index(2.0 * std::f64::consts::PI), Some(0));
        assert_eq!(clifford_rotation_index(0.3), None);
        assert_eq!(clifford_rotation_index(FRAC_PI_2 + 5e-13), Some(1));
    }
}
