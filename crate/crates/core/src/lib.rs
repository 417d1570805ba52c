//! Deterministic multichannel active noise control simulation.
//!
//! This crate simulates networks of ANC nodes, each pairing a noise source
//! path with an adaptive control filter, coupled through an acoustic plant
//! with configurable inter-node crosstalk. It provides:
//!
//! * [`signals`]: reference noise generators (multitone, band-limited
//!   noise, WAV files) with deterministic seeding,
//! * [`acoustics`]: streaming FIR plant simulation, path synthesis, and a
//!   text format for saving and loading path sets,
//! * [`controllers`]: the adaptive algorithms, from independent per-node
//!   filtered-reference LMS through the self-boosted weight-constrained
//!   variant, plus centralized multiple-error baselines,
//! * [`metrics`]: residual noise level, average noise suppression, and
//!   Welch power spectra,
//! * [`harness`]: scenario configuration, the sample-by-sample simulation
//!   loop, parameter sweeps, and CSV/JSON export.
//!
//! Everything is deterministic: a scenario config plus its seeds fully
//! determines every output byte.

pub mod acoustics;
pub mod controllers;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod signals;

pub use acoustics::{Convolver, DelayLine, FirResponse, PathSet, Plant};
pub use controllers::{
    BoostRecord, CentralizedController, CollocatedController, NodeController,
};
pub use error::{AncError, Result};
pub use harness::{run_scenario, RunTrace, ScenarioConfig};
pub use metrics::{AnseBlock, Spectrum};
pub use signals::{Signal, ToneSpec};
