//! Scenario configuration, simulation runner, sweeps, and export.
//!
//! The flow is: parse a TOML scenario ([`config`]), optionally edit it
//! with dotted-key overrides, execute it sample by sample ([`runner`]),
//! and persist the trace as CSV plus a JSON manifest ([`export`]).
//! [`sweep`](mod@crate::harness::sweep) runs a grid of overrides against
//! one template and tabulates the outcomes.

pub mod config;
pub mod export;
pub mod runner;
pub mod sweep;

pub use config::{
    apply_override, config_from_table, load_config, load_config_table, parse_config_table,
    parse_set_arg, Algorithm, AlphaSpec, EstimateSpec, NoiseSpec, OutputSection, PathSpec,
    ReferenceMode, ScenarioConfig, ScenarioSection,
};
pub use export::{export_trace, write_sweep_csv};
pub use runner::{
    run_scenario, AnseRow, BoostEvent, PlantFault, RnlRow, RunSeeds, RunTrace, SampleLog,
    MU_NORM_EPS,
};
pub use sweep::{sweep, SweepGrid, SweepRow, DEFAULT_MAX_CELLS};
