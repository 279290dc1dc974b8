//! Classical simulation toolkit for non-Clifford quantum circuits.
//!
//! The crate is organized around a phase-tracked Pauli algebra ([`pauli`])
//! shared by every engine:
//!
//! - [`circuit`]: layered circuit IR (Clifford prefix + Pauli rotation per
//!   layer) with builders for Trotterized Ising rings and a structured
//!   CZ/CZ_X block family, native-basis compilation, Clifford configuration
//!   substitution and Pauli insertion patterns.
//! - [`noise`]: composed single-Pauli noise channels, the hardware-inspired
//!   two-qubit noise profile, channel inverses and Heisenberg damping factors.
//! - [`stabilizer`]: tableau simulation and exact noisy/noiseless Pauli
//!   observable expectations for Clifford circuits via back-propagation.
//! - [`dense`]: exact statevector oracle, Pauli transfer matrices, and the
//!   emulated noisy device (error trajectories plus finite-shot noise).
//! - [`quasiprob`]: Clifford decompositions of Pauli rotations, noisy
//!   decompositions with their critical noise rate, and the
//!   structure-preserving Monte Carlo (SPMC) estimators.
//! - [`protocol`]: the NDE-CS learning protocol — configuration sampling,
//!   insertion patterns, noisy data collection, least-squares coefficient
//!   fitting, noiseless reconstruction and the exactness oracle for the
//!   Pauli-insertion transfer theorem.
//! - [`spd`]: sparse Pauli dynamics comparator with weight-ranked path
//!   truncation under a maximum path budget.

pub mod circuit;
pub mod dense;
pub mod error;
pub mod noise;
pub mod pauli;
pub mod protocol;
pub mod quasiprob;
pub mod seeding;
pub mod spd;
pub mod stabilizer;

pub use error::{Error, Result};
