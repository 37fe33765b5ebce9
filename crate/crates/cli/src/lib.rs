//! Command-line front end for the spin-probe decoherence engine.
//!
//! The library half hosts everything the binary does — configuration
//! resolution, backend dispatch, artifact writing, sweep orchestration and the
//! verification battery — so integration tests can drive the same code paths
//! in-process.

pub mod backend;
pub mod commands;
pub mod config;
pub mod determinism;
pub mod output;
pub mod sweep;
