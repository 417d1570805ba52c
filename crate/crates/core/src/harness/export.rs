//! Trace persistence: CSV files plus a JSON run manifest.
//!
//! All numeric CSV fields use Rust's shortest round-trip float formatting,
//! so re-importing a column reproduces the in-memory values exactly and
//! identical traces serialize to identical bytes. Node columns are
//! 1-based, matching the node numbering in path files.
//!
//! Files written by [`export_trace`]:
//!
//! * `anse.csv`: `block_index,time_s,anse_db,anse_node_1..K`
//! * `events.csv`: `sample,node,old_eta_min,new_eta_min`
//! * `rnl.csv`: `window_index,time_s,rnl_db_node_1..K`
//! * `spectrum.csv`: `freq_hz,psd_db_node_1..K` (skipped when the stored
//!   error tail is shorter than one spectrum segment)
//! * `samples.csv`: per-sample streams (only with `store_samples = true`)
//! * `manifest.json`: config echo, seeds, resolved steps, and outcome

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{AncError, Result};
use crate::harness::config::ScenarioConfig;
use crate::harness::runner::RunTrace;
use crate::harness::sweep::SweepRow;
use crate::metrics::power_spectrum;

/// Quotes a field if it holds a comma, quote, or line break.
pub fn csv_field(text: &str) -> String {
    if text.contains(['"', ',', '\n', '\r']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

fn node_columns(prefix: &str, nodes: usize) -> String {
    (1..=nodes).map(|k| format!(",{prefix}_{k}")).collect()
}

fn push_floats(line: &mut String, values: &[f64]) {
    for v in values {
        write!(line, ",{v}").expect("writing to a string cannot fail");
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content)?;
    Ok(())
}

/// Suppression per block: one row per complete block.
pub fn write_anse_csv(trace: &RunTrace, path: &Path) -> Result<()> {
    let mut out = format!("block_index,time_s,anse_db{}\n", node_columns("anse_node", trace.nodes));
    for row in &trace.anse {
        let mut line = format!("{},{},{}", row.block_index, row.time_s, row.anse_db);
        push_floats(&mut line, &row.per_node_db);
        out.push_str(&line);
        out.push('\n');
    }
    write_file(path, &out)
}

/// Center replacements: one row per boost event, in order of occurrence.
pub fn write_events_csv(trace: &RunTrace, path: &Path) -> Result<()> {
    let mut out = String::from("sample,node,old_eta_min,new_eta_min\n");
    for event in &trace.boosts {
        writeln!(
            out,
            "{},{},{},{}",
            event.sample,
            event.node + 1,
            event.old_eta_min,
            event.new_eta_min
        )
        .expect("writing to a string cannot fail");
    }
    write_file(path, &out)
}

/// Windowed average residual noise level per node.
pub fn write_rnl_csv(trace: &RunTrace, path: &Path) -> Result<()> {
    let mut out = format!("window_index,time_s{}\n", node_columns("rnl_db_node", trace.nodes));
    for row in &trace.rnl {
        let mut line = format!("{},{}", row.window_index, row.time_s);
        push_floats(&mut line, &row.per_node_db);
        out.push_str(&line);
        out.push('\n');
    }
    write_file(path, &out)
}

/// Welch spectra of the stored error tails. Returns false (writing
/// nothing) when the tail is shorter than one segment.
pub fn write_spectrum_csv(trace: &RunTrace, cfg: &ScenarioConfig, path: &Path) -> Result<bool> {
    let segment = cfg.output.spectrum_segment;
    if trace.e_tail.iter().any(|tail| tail.len() < segment) {
        return Ok(false);
    }
    let spectra = trace
        .e_tail
        .iter()
        .map(|tail| {
            power_spectrum(tail, trace.sample_rate_hz, segment, cfg.output.spectrum_overlap)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = format!("freq_hz{}\n", node_columns("psd_db_node", trace.nodes));
    let dbs: Vec<Vec<f64>> = spectra.iter().map(|s| s.psd_db()).collect();
    for (b, &freq) in spectra[0].freq_hz.iter().enumerate() {
        let mut line = format!("{freq}");
        for db in &dbs {
            write!(line, ",{}", db[b]).expect("writing to a string cannot fail");
        }
        out.push_str(&line);
        out.push('\n');
    }
    write_file(path, &out)?;
    Ok(true)
}

/// Full per-sample streams. Returns false when the trace kept none.
pub fn write_samples_csv(trace: &RunTrace, path: &Path) -> Result<bool> {
    let Some(log) = &trace.samples else {
        return Ok(false);
    };
    let mut out = format!(
        "sample,time_s{}{}{}{}\n",
        node_columns("x_node", trace.nodes),
        node_columns("d_node", trace.nodes),
        node_columns("e_node", trace.nodes),
        node_columns("y_node", trace.nodes)
    );
    for n in 0..trace.simulated_samples {
        let mut line = format!("{},{}", n, n as f64 / trace.sample_rate_hz as f64);
        for stream in [&log.x, &log.d, &log.e, &log.y] {
            for node in stream {
                write!(line, ",{}", node[n]).expect("writing to a string cannot fail");
            }
        }
        out.push_str(&line);
        out.push('\n');
    }
    write_file(path, &out)?;
    Ok(true)
}

/// Reproducibility record: the full config echoed as TOML, every seed,
/// the resolved per-source steps, and how the run ended.
pub fn write_manifest(trace: &RunTrace, cfg: &ScenarioConfig, path: &Path) -> Result<()> {
    let manifest = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config_toml": cfg.to_toml_string()?,
        "seeds": trace.seeds,
        "resolved_mu": trace.resolved_mu,
        "sensor_sigma": trace.sensor_sigma,
        "nodes": trace.nodes,
        "sample_rate_hz": trace.sample_rate_hz,
        "planned_samples": trace.planned_samples,
        "simulated_samples": trace.simulated_samples,
        "final_anse_db": trace.final_anse_db(),
        "diverged": trace.diverged,
        "plant_fault": trace.plant_fault,
        "boost_counts": trace.boost_counts,
    });
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| AncError::Config(format!("cannot serialize manifest: {e}")))?;
    write_file(path, &format!("{text}\n"))
}

/// Writes every applicable file for one run into `out_dir` (created if
/// missing) and returns the paths written.
pub fn export_trace(trace: &RunTrace, cfg: &ScenarioConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let anse = out_dir.join("anse.csv");
    write_anse_csv(trace, &anse)?;
    written.push(anse);

    let events = out_dir.join("events.csv");
    write_events_csv(trace, &events)?;
    written.push(events);

    let rnl = out_dir.join("rnl.csv");
    write_rnl_csv(trace, &rnl)?;
    written.push(rnl);

    let spectrum = out_dir.join("spectrum.csv");
    if write_spectrum_csv(trace, cfg, &spectrum)? {
        written.push(spectrum);
    }

    let samples = out_dir.join("samples.csv");
    if write_samples_csv(trace, &samples)? {
        written.push(samples);
    }

    let manifest = out_dir.join("manifest.json");
    write_manifest(trace, cfg, &manifest)?;
    written.push(manifest);

    Ok(written)
}

/// One row per sweep cell: `cell,overrides,final_anse_db,diverged,boosts`.
pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut out = String::from("cell,overrides,final_anse_db,diverged,boosts\n");
    for row in rows {
        let final_db = row.final_anse_db.map_or(String::new(), |v| v.to_string());
        writeln!(
            out,
            "{},{},{},{},{}",
            row.cell,
            csv_field(&row.overrides),
            final_db,
            row.diverged,
            row.boosts
        )
        .expect("writing to a string cannot fail");
    }
    write_file(path, &out)
}
