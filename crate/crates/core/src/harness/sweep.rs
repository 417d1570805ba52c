//! Parameter sweeps over a scenario template.
//!
//! A grid file lists override axes and an optional cell cap:
//!
//! ```toml
//! max_cells = 64              # optional, default 256
//!
//! [axes]
//! "scenario.mu_bar" = [0.05, 0.1, 0.2]
//! "scenario.alpha" = [0.0, 100.0]
//! ```
//!
//! Axis keys are the same dotted config keys the CLI's `--set` accepts.
//! The sweep runs the Cartesian product: axes are ordered by key, the last
//! axis varies fastest, and every cell applies its overrides to a copy of
//! the template before validation. Cells are independent runs and execute
//! in parallel; results come back in cell order regardless.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{AncError, Result};
use crate::harness::config::{apply_override, config_from_table};
use crate::harness::export::export_trace;
use crate::harness::runner::run_scenario;

/// Default refusal threshold for grid size.
pub const DEFAULT_MAX_CELLS: usize = 256;

/// A parsed grid: sorted override axes plus the cell cap.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    axes: Vec<(String, Vec<toml::Value>)>,
    max_cells: usize,
}

impl SweepGrid {
    /// Parses the grid document described in the module docs.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = text
            .parse::<toml::Table>()
            .map_err(|e| AncError::Config(format!("invalid grid TOML: {e}")))?;
        let max_cells = match table.remove("max_cells") {
            None => DEFAULT_MAX_CELLS,
            Some(toml::Value::Integer(n)) if n > 0 => n as usize,
            Some(other) => {
                return Err(AncError::Config(format!(
                    "max_cells must be a positive integer, got {other}"
                )))
            }
        };
        let axes_table = match table.remove("axes") {
            Some(toml::Value::Table(t)) => t,
            Some(_) => return Err(AncError::Config("axes must be a table of arrays".into())),
            None => toml::Table::new(),
        };
        if let Some(stray) = table.keys().next() {
            return Err(AncError::Config(format!(
                "unknown grid key '{stray}' (expected max_cells and [axes])"
            )));
        }
        let mut axes = Vec::with_capacity(axes_table.len());
        for (key, value) in axes_table {
            let toml::Value::Array(values) = value else {
                return Err(AncError::Config(format!(
                    "axis '{key}' must be an array of values"
                )));
            };
            if values.is_empty() {
                return Err(AncError::Config(format!("axis '{key}' is empty")));
            }
            axes.push((key, values));
        }
        axes.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(SweepGrid { axes, max_cells })
    }

    /// Reads and parses a grid file.
    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Total cell count; an axis-free grid has exactly one cell.
    pub fn n_cells(&self) -> Result<usize> {
        let mut cells = 1usize;
        for (key, values) in &self.axes {
            cells = cells.checked_mul(values.len()).ok_or_else(|| {
                AncError::Config(format!("grid overflows at axis '{key}'"))
            })?;
        }
        if cells > self.max_cells {
            return Err(AncError::Config(format!(
                "grid has {cells} cells, above the cap of {} (raise max_cells to allow it)",
                self.max_cells
            )));
        }
        Ok(cells)
    }

    /// The overrides for one cell, in axis order; the last axis varies
    /// fastest across consecutive cell indices.
    pub fn cell_overrides(&self, cell: usize) -> Vec<(String, toml::Value)> {
        let mut remaining = cell;
        let mut overrides = vec![None; self.axes.len()];
        for (slot, (key, values)) in overrides.iter_mut().zip(&self.axes).rev() {
            *slot = Some((key.clone(), values[remaining % values.len()].clone()));
            remaining /= values.len();
        }
        overrides.into_iter().map(|o| o.expect("every slot filled")).collect()
    }
}

/// Summary of one sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cell: usize,
    /// `key=value` pairs joined with ';'; values are TOML literals, so
    /// each pair is reusable as a `--set` argument.
    pub overrides: String,
    /// Mean suppression of the last complete block; absent for runs too
    /// short to complete one.
    pub final_anse_db: Option<f64>,
    pub diverged: bool,
    /// Total boost events across nodes.
    pub boosts: u64,
}

/// Runs every cell of the grid against the template config. When
/// `trace_dir` is given, each cell's full trace lands in
/// `trace_dir/cell_NNN/`. Rows return in cell order.
pub fn sweep(
    template: &toml::Table,
    base_dir: &Path,
    grid: &SweepGrid,
    trace_dir: Option<&Path>,
) -> Result<Vec<SweepRow>> {
    let n_cells = grid.n_cells()?;
    if let Some(dir) = trace_dir {
        std::fs::create_dir_all(dir)?;
    }
    (0..n_cells)
        .into_par_iter()
        .map(|cell| {
            let overrides = grid.cell_overrides(cell);
            let mut table = template.clone();
            for (key, value) in &overrides {
                apply_override(&mut table, key, value.clone())?;
            }
            let cfg = config_from_table(table)
                .map_err(|e| AncError::Config(format!("cell {cell}: {e}")))?;
            let trace = run_scenario(&cfg, base_dir)?;
            if let Some(dir) = trace_dir {
                export_trace(&trace, &cfg, &dir.join(format!("cell_{cell:03}")))?;
            }
            Ok(SweepRow {
                cell,
                overrides: overrides
                    .iter()
                    .map(|(key, value)| format!("{key}={value}"))
                    .collect::<Vec<_>>()
                    .join(";"),
                final_anse_db: trace.final_anse_db(),
                diverged: trace.any_diverged(),
                boosts: trace.boosts.len() as u64,
            })
        })
        .collect()
}
