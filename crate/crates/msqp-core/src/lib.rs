//! Simulator and pulse compiler for the elementary unit of a molecular spin
//! quantum processor: two spin-S molecular qudits coupled to a frequency-tunable
//! superconducting resonator.
//!
//! The crate is organized bottom-up:
//!
//! - [`spins`]: single-qudit operators, energies and spin–photon couplings
//! - [`composite`]: the truncated qudit ⊗ qudit ⊗ photon product space and the
//!   full time-dependent Hamiltonian
//! - [`schedule`]: piecewise classical controls (drive pulses, resonator detuning)
//! - [`lindblad`]: master-equation integration with pure dephasing and photon loss
//! - [`compiler`]: Givens/QR decomposition of single-qudit unitaries into pulses
//! - [`gates`]: two-qudit entangling gate schedulers (resonant controlled-phase,
//!   dispersive iSWAP) and their calibration routines
//! - [`readout`]: dispersive-shift estimates and resonant photon-emission readout
//! - [`experiments`]: end-to-end benchmark scenarios with CSV output
//! - [`config`]: TOML configuration schema and run manifests
//!
//! Units: Hamiltonian entries are linear frequencies in GHz (ħ = 1), time is in
//! ns, and the 2π converting frequencies to angular rates is applied only inside
//! the integrator.

pub mod circuit;
pub mod compiler;
pub mod composite;
pub mod config;
pub mod error;
pub mod experiments;
pub mod gates;
pub mod linalg;
pub mod lindblad;
pub mod readout;
pub mod schedule;
pub mod spins;
pub mod units;

pub use error::{Error, Result};
