//! Quench dynamics and thermalization of Rydberg-blockaded spin chains.
//!
//! The crate simulates a chain of two-level atoms with repulsive van der
//! Waals interactions, suddenly driven at `t = 0` by a resonant Rabi field.
//! It covers the full pipeline from chain geometry to the classical master
//! equation that the relaxation of occupation probabilities obeys:
//!
//! - [`geometry`]: linear/zigzag chain construction, interaction matrices,
//!   blockade radius.
//! - [`census`]: enumeration and transfer-matrix counting of the
//!   blockade-allowed (low-energy) spin configurations.
//! - [`hamiltonian`]: the Ising-like spin-1/2 Hamiltonian in the 2^N product
//!   basis, dense and matrix-free.
//! - [`statevec`]: pure-state quench evolution (dense eigendecomposition or
//!   Krylov propagation) and observable extraction.
//! - [`lindblad`]: open-system evolution with individual and collective
//!   dephasing, plus Monte-Carlo averaging over Lorentzian parameter noise.
//! - [`mps`]: TEBD evolution of matrix product states with a second-order
//!   Suzuki-Trotter split and variational compression.
//! - [`master_eq`]: detailed-balance construction, early-time rate fitting,
//!   and integration of the birth-death master equation.
//! - [`analysis`]: dominant-frequency extraction, scaling-law fits, and
//!   eigenstate-thermalization diagnostics.
//! - [`config`] and [`runner`]: batch configuration, run orchestration, and
//!   reproducibility manifests backing the `rydsim` CLI.
//!
//! All numerics are generic over the floating-point scalar through
//! [`scalar::Real`]; `f64` aliases for the main types live at the crate
//! root.
//!
//! Units: time in μs, energies as angular frequencies in rad/μs (ħ = 1).
//! Configuration files accept ordinary frequencies in MHz and convert on
//! ingestion.

pub mod analysis;
pub mod census;
pub mod config;
pub mod geometry;
pub mod hamiltonian;
pub mod lindblad;
pub mod master_eq;
pub mod mps;
mod numeric;
pub mod runner;
pub mod scalar;
pub mod statevec;

pub use scalar::Real;

/// Single-precision complex amplitude.
pub type C32 = num_complex::Complex<f32>;
/// Double-precision complex amplitude.
pub type C64 = num_complex::Complex<f64>;

/// Double-precision aliases for the main domain types.
pub type ChainGeometry64 = geometry::ChainGeometry<f64>;
pub type InteractionMatrix64 = geometry::InteractionMatrix<f64>;
pub type SpinSystem64 = hamiltonian::SpinSystem<f64>;
// TODO: restore once the evolution modules land in this change series.
// pub type ObservableTrace64 = statevec::ObservableTrace<f64>;
// pub type SteadyState64 = statevec::SteadyState<f64>;
// pub type NoiseModel64 = lindblad::NoiseModel<f64>;
// pub type MasterEquationModel64 = master_eq::MasterEquationModel<f64>;
// pub type BalanceRatios64 = master_eq::BalanceRatios<f64>;
