//! Command-line front end for the multichannel ANC simulator.
//!
//! Exit codes: 0 on success, 2 for configuration or validation problems,
//! 3 when a `run` finished but a controller diverged (so CI can spot
//! instability), 1 for other runtime failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use anc_core::acoustics::{load_paths, make_estimates, save_paths, synth_paths, PathSynthSpec};
use anc_core::error::AncError;
use anc_core::harness::{
    apply_override, config_from_table, export_trace, load_config_table, parse_set_arg,
    run_scenario, sweep, write_sweep_csv, RunTrace, SweepGrid,
};

#[derive(Parser)]
#[command(
    name = "anc-lab",
    version,
    about = "Deterministic multichannel active-noise-control experiments",
    long_about = "Runs scenario files describing a network of ANC nodes over a simulated \
                  acoustic plant, and writes suppression curves, residual levels, boost \
                  events, and spectra as CSV for plotting."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and export its trace.
    Run {
        /// Scenario TOML file.
        scenario: PathBuf,
        /// Output directory; defaults to runs/ plus the scenario stem.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dotted-key config override, e.g. --set scenario.mu_bar=0.05.
        /// May be given multiple times; applied in order.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run a grid of overrides against one scenario template.
    Sweep {
        /// Scenario TOML file used as the template.
        scenario: PathBuf,
        /// Grid TOML file: an axes table of override arrays.
        #[arg(long)]
        grid: PathBuf,
        /// Output directory; defaults to runs/ plus the scenario stem
        /// and a -sweep suffix.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides applied to the template before the grid.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Also export the full trace of every cell under the output
        /// directory.
        #[arg(long)]
        traces: bool,
    },
    /// Create or examine acoustic path files.
    Paths {
        #[command(subcommand)]
        action: PathsCommand,
    },
}

#[derive(Subcommand)]
enum PathsCommand {
    /// Synthesize a random plant and write it as a path file.
    Synth {
        /// Output path file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        nodes: usize,
        #[arg(long, default_value_t = 16_000)]
        sample_rate_hz: u32,
        #[arg(long, default_value_t = 64)]
        primary_len: usize,
        #[arg(long, default_value_t = 64)]
        secondary_len: usize,
        #[arg(long, default_value_t = 4)]
        delay_min: usize,
        #[arg(long, default_value_t = 8)]
        delay_max: usize,
        #[arg(long, default_value_t = 0.05)]
        decay_rate: f64,
        /// Crosstalk energy relative to the unit-energy self paths.
        #[arg(long, default_value_t = 0.5)]
        coupling_gain: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also store secondary-path models with this many taps.
        #[arg(long)]
        model_taps: Option<usize>,
        /// Relative energy error of the stored models.
        #[arg(long, default_value_t = 0.0, requires = "model_taps")]
        mismatch: f64,
        #[arg(long, default_value_t = 0, requires = "model_taps")]
        estimate_seed: u64,
    },
    /// Print a summary of a path file.
    Inspect {
        /// Path file to read.
        file: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

/// Configuration and input-format problems exit 2; everything else
/// unexpected exits 1.
fn exit_code_for(e: &AncError) -> u8 {
    match e {
        AncError::Config(_)
        | AncError::Dimension(_)
        | AncError::NyquistViolation { .. }
        | AncError::InvalidBand { .. }
        | AncError::WaveFormat(_)
        | AncError::PathFile(_)
        | AncError::CenterFile(_) => 2,
        _ => 1,
    }
}

fn dispatch(command: Command) -> Result<ExitCode, AncError> {
    match command {
        Command::Run { scenario, out, set } => cmd_run(&scenario, out, &set),
        Command::Sweep { scenario, grid, out, set, traces } => {
            cmd_sweep(&scenario, &grid, out, &set, traces)
        }
        Command::Paths { action } => cmd_paths(action),
    }
}

/// Parses a scenario file and applies --set overrides.
fn load_overridden(
    scenario: &Path,
    set: &[String],
) -> Result<anc_core::ScenarioConfig, AncError> {
    let mut table = load_config_table(scenario)?;
    for arg in set {
        let (key, value) = parse_set_arg(arg)?;
        apply_override(&mut table, &key, value)?;
    }
    config_from_table(table)
}

fn scenario_stem(scenario: &Path) -> String {
    scenario
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string())
}

fn base_dir(scenario: &Path) -> &Path {
    match scenario.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent,
        _ => Path::new("."),
    }
}

fn describe_outcome(trace: &RunTrace) {
    println!(
        "simulated {} of {} samples at {} Hz for {} nodes",
        trace.simulated_samples, trace.planned_samples, trace.sample_rate_hz, trace.nodes
    );
    match trace.final_anse_db() {
        Some(db) => println!("final block suppression: {db:.2} dB"),
        None => println!("run too short for a complete suppression block"),
    }
    if !trace.boosts.is_empty() {
        println!("boost events: {}", trace.boosts.len());
    }
    for (k, at) in trace.diverged.iter().enumerate() {
        if let Some(sample) = at {
            println!("node {} DIVERGED at sample {sample}", k + 1);
        }
    }
    if let Some(fault) = trace.plant_fault {
        println!(
            "plant fault: non-finite control from source {} at sample {}",
            fault.source + 1,
            fault.sample
        );
    }
}

fn cmd_run(
    scenario: &Path,
    out: Option<PathBuf>,
    set: &[String],
) -> Result<ExitCode, AncError> {
    let cfg = load_overridden(scenario, set)?;
    let trace = run_scenario(&cfg, base_dir(scenario))?;
    let out_dir =
        out.unwrap_or_else(|| PathBuf::from("runs").join(scenario_stem(scenario)));
    let written = export_trace(&trace, &cfg, &out_dir)?;
    describe_outcome(&trace);
    for path in &written {
        println!("wrote {}", path.display());
    }
    if trace.any_diverged() {
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(
    scenario: &Path,
    grid_file: &Path,
    out: Option<PathBuf>,
    set: &[String],
    traces: bool,
) -> Result<ExitCode, AncError> {
    let mut table = load_config_table(scenario)?;
    for arg in set {
        let (key, value) = parse_set_arg(arg)?;
        apply_override(&mut table, &key, value)?;
    }
    // Surface template problems before the grid multiplies them.
    config_from_table(table.clone())?;
    let grid = SweepGrid::from_file(grid_file)?;
    let out_dir =
        out.unwrap_or_else(|| PathBuf::from("runs").join(scenario_stem(scenario) + "-sweep"));
    std::fs::create_dir_all(&out_dir)?;
    let trace_dir = traces.then(|| out_dir.clone());
    let rows = sweep(&table, base_dir(scenario), &grid, trace_dir.as_deref())?;
    let summary = out_dir.join("sweep.csv");
    write_sweep_csv(&rows, &summary)?;
    for row in &rows {
        let final_db = row
            .final_anse_db
            .map_or_else(|| "-".to_string(), |db| format!("{db:.2} dB"));
        let mark = if row.diverged { " DIVERGED" } else { "" };
        println!("cell {:>3}  {final_db:>10}  {}{mark}", row.cell, row.overrides);
    }
    println!("wrote {}", summary.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_paths(action: PathsCommand) -> Result<ExitCode, AncError> {
    match action {
        PathsCommand::Synth {
            out,
            nodes,
            sample_rate_hz,
            primary_len,
            secondary_len,
            delay_min,
            delay_max,
            decay_rate,
            coupling_gain,
            seed,
            model_taps,
            mismatch,
            estimate_seed,
        } => {
            let spec = PathSynthSpec {
                nodes,
                primary_len,
                secondary_len,
                delay_min,
                delay_max,
                decay_rate,
                coupling_gain,
            };
            let mut paths = synth_paths(&spec, seed)?;
            if let Some(taps) = model_taps {
                make_estimates(&mut paths, taps, mismatch, estimate_seed)?;
            }
            save_paths(&paths, sample_rate_hz, &out)?;
            println!(
                "wrote {} node plant ({} primary taps, {} secondary taps{}) to {}",
                nodes,
                primary_len,
                secondary_len,
                model_taps.map_or(String::new(), |t| format!(", {t} model taps")),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        PathsCommand::Inspect { file } => {
            let (paths, sample_rate_hz) = load_paths(&file)?;
            let k = paths.nodes();
            println!("{}: {k} nodes at {sample_rate_hz} Hz", file.display());
            println!(
                "primary {} taps, secondary {} taps, models {}",
                paths.primary[0].len(),
                paths.secondary[0][0].len(),
                if paths.estimates.is_empty() {
                    "absent".to_string()
                } else {
                    format!("{} taps", paths.estimates[0].len())
                }
            );
            for sensor in 0..k {
                let cross: f64 = (0..k)
                    .filter(|&source| source != sensor)
                    .map(|source| paths.secondary[sensor][source].energy())
                    .sum();
                println!(
                    "node {}: primary energy {:.4}, self path energy {:.4}, crosstalk energy {:.4}",
                    sensor + 1,
                    paths.primary[sensor].energy(),
                    paths.secondary[sensor][sensor].energy(),
                    cross
                );
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
