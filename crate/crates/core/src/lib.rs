//! Simulation engine for a dephasing qubit probe coupled to an XXZ spin-1/2 chain.
//!
//! The physical setup is a finite XXZ Heisenberg chain with open boundaries,
//! probed by a single qubit that couples longitudinally to one chain spin.
//! Because the coupling commutes with the qubit Hamiltonian the qubit undergoes
//! pure dephasing: its off-diagonal density-matrix element factorizes into a
//! trivial phase times an overlap of two chain states evolved under slightly
//! different ("branch") Hamiltonians.  Everything in this crate exists to
//! compute, approximate, or analyze that overlap:
//!
//! * [`model`] — chain/probe parameters and symbolic operator term lists,
//! * [`exact`] — dense / Krylov exact diagonalization backends (small chains),
//! * [`mps`] — matrix-product-state DMRG ground search and TDVP time evolution,
//! * [`tcl`] — second-order time-convolutionless master-equation integrator,
//! * [`analytic`] — closed-form free-fermion and strong-coupling references,
//! * [`analysis`] — recoherence-time, frequency, and trace-comparison tools,
//! * [`verify`] — the cross-backend validation suite used by the CLI and tests.

// Force linkage of the BLAS backend used by ndarray's matrix products.
extern crate blas_src;

pub mod analysis;
pub mod analytic;
pub mod exact;
pub mod krylov;
pub mod model;
pub mod mps;
pub mod tcl;
pub mod trace;
pub mod verify;

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
