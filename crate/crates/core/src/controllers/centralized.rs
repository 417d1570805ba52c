//! Centralized multiple-error controllers.
//!
//! Unlike the per-node controller, a centralized controller adapts every
//! control filter from every error sensor at once, using the full matrix of
//! secondary-path models. Two flavors:
//!
//! * [`CentralizedController`]: one shared reference drives all sources.
//!   Each source filter is updated with the sum over error channels of that
//!   channel's filtered reference,
//!
//!   ```text
//!   w_k += mu_k * sum_m e_m * xf_mk,    xf_mk = model[m][k] * x
//!   ```
//!
//! * [`CollocatedController`]: every node contributes its own reference.
//!   Each source holds one sub-filter per reference, their outputs sum, and
//!   each sub-filter is updated from the matching filtered reference
//!   `model[m][k] * x_j`.
//!
//! Divergence is handled at controller granularity: the update couples all
//! filters, so a non-finite output or error freezes the whole controller.

use crate::acoustics::{dot, DelayLine, FirResponse};
use crate::error::{AncError, Result};

fn validate_model_matrix(models: &[Vec<FirResponse>]) -> Result<usize> {
    let n_sensors = models.len();
    if n_sensors == 0 {
        return Err(AncError::Dimension("model matrix is empty".into()));
    }
    for (m, row) in models.iter().enumerate() {
        if row.len() != n_sensors {
            return Err(AncError::Dimension(format!(
                "model matrix row {m} has {} entries, expected {n_sensors}",
                row.len()
            )));
        }
    }
    Ok(n_sensors)
}

fn validate_mu(mu: &[f64], n_sources: usize) -> Result<()> {
    if mu.len() != n_sources {
        return Err(AncError::Dimension(format!(
            "{} step sizes for {n_sources} sources",
            mu.len()
        )));
    }
    for &m in mu {
        if !(m.is_finite() && m >= 0.0) {
            return Err(AncError::Config(format!(
                "step size must be finite and nonnegative, got {m}"
            )));
        }
    }
    Ok(())
}

/// Multiple-error adaptive controller fed by one shared reference.
#[derive(Debug, Clone)]
pub struct CentralizedController {
    /// Control filters, indexed by source.
    weights: Vec<Vec<f64>>,
    mu: Vec<f64>,
    /// `models[m][k]` estimates the path from source `k` to sensor `m`.
    models: Vec<Vec<FirResponse>>,
    x_line: DelayLine,
    model_line: DelayLine,
    /// `fref[m][k]` holds the recent samples of `models[m][k] * x`.
    fref: Vec<Vec<DelayLine>>,
    diverged_at: Option<usize>,
    processed: usize,
}

impl CentralizedController {
    pub fn new(n_taps: usize, models: Vec<Vec<FirResponse>>, mu: Vec<f64>) -> Result<Self> {
        if n_taps == 0 {
            return Err(AncError::Config("control filter needs at least one tap".into()));
        }
        let n = validate_model_matrix(&models)?;
        validate_mu(&mu, n)?;
        let model_depth = models
            .iter()
            .flat_map(|row| row.iter().map(FirResponse::len))
            .max()
            .expect("matrix is non-empty");
        let fref = (0..n)
            .map(|_| (0..n).map(|_| DelayLine::new(n_taps)).collect())
            .collect();
        Ok(CentralizedController {
            weights: vec![vec![0.0; n_taps]; n],
            mu,
            models,
            x_line: DelayLine::new(n_taps),
            model_line: DelayLine::new(model_depth),
            fref,
            diverged_at: None,
            processed: 0,
        })
    }

    pub fn nodes(&self) -> usize {
        self.weights.len()
    }

    pub fn n_taps(&self) -> usize {
        self.weights[0].len()
    }

    pub fn weights(&self, source: usize) -> &[f64] {
        &self.weights[source]
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn diverged_at(&self) -> Option<usize> {
        self.diverged_at
    }

    /// Consumes this sample's shared reference and fills `y` with one
    /// control output per source. A diverged controller emits zeros.
    pub fn outputs(&mut self, x: f64, y: &mut [f64]) {
        assert_eq!(y.len(), self.nodes(), "output slice size");
        self.processed += 1;
        if self.diverged_at.is_some() {
            y.fill(0.0);
            return;
        }
        self.x_line.push(x);
        self.model_line.push(x);
        let hist = self.model_line.history();
        for (row, lines) in self.models.iter().zip(self.fref.iter_mut()) {
            for (model, line) in row.iter().zip(lines.iter_mut()) {
                line.push(dot(&model.taps, &hist[..model.len()]));
            }
        }
        let x_hist = self.x_line.history();
        let mut finite = true;
        for (yk, w) in y.iter_mut().zip(&self.weights) {
            *yk = dot(w, x_hist);
            finite &= yk.is_finite();
        }
        if !finite {
            self.diverged_at = Some(self.processed - 1);
            y.fill(0.0);
        }
    }

    /// Applies one multiple-error update from this sample's sensor errors.
    /// Call exactly once after each `outputs`. Non-finite errors freeze the
    /// controller without touching the weights.
    pub fn adapt(&mut self, e: &[f64]) {
        assert_eq!(e.len(), self.nodes(), "error slice size");
        assert!(self.processed > 0, "adapt before the first outputs call");
        if self.diverged_at.is_some() {
            return;
        }
        if e.iter().any(|v| !v.is_finite()) {
            self.diverged_at = Some(self.processed - 1);
            return;
        }
        for (sensor_lines, &em) in self.fref.iter().zip(e) {
            for ((w, line), &mu_k) in self.weights.iter_mut().zip(sensor_lines).zip(&self.mu) {
                let mu_e = mu_k * em;
                for (wi, &xf) in w.iter_mut().zip(line.history()) {
                    *wi += mu_e * xf;
                }
            }
        }
    }
}

/// Multiple-error adaptive controller with one reference per node and one
/// sub-filter per (source, reference) pair.
#[derive(Debug, Clone)]
pub struct CollocatedController {
    /// `weights[k][j]` is source `k`'s sub-filter on reference `j`.
    weights: Vec<Vec<Vec<f64>>>,
    mu: Vec<f64>,
    models: Vec<Vec<FirResponse>>,
    x_lines: Vec<DelayLine>,
    model_lines: Vec<DelayLine>,
    /// `fref[m][k][j]` holds the recent samples of `models[m][k] * x_j`.
    fref: Vec<Vec<Vec<DelayLine>>>,
    diverged_at: Option<usize>,
    processed: usize,
}

impl CollocatedController {
    pub fn new(n_taps: usize, models: Vec<Vec<FirResponse>>, mu: Vec<f64>) -> Result<Self> {
        if n_taps == 0 {
            return Err(AncError::Config("control filter needs at least one tap".into()));
        }
        let n = validate_model_matrix(&models)?;
        validate_mu(&mu, n)?;
        let model_depth = models
            .iter()
            .flat_map(|row| row.iter().map(FirResponse::len))
            .max()
            .expect("matrix is non-empty");
        let fref = (0..n)
            .map(|_| {
                (0..n)
                    .map(|_| (0..n).map(|_| DelayLine::new(n_taps)).collect())
                    .collect()
            })
            .collect();
        Ok(CollocatedController {
            weights: vec![vec![vec![0.0; n_taps]; n]; n],
            mu,
            models,
            x_lines: (0..n).map(|_| DelayLine::new(n_taps)).collect(),
            model_lines: (0..n).map(|_| DelayLine::new(model_depth)).collect(),
            fref,
            diverged_at: None,
            processed: 0,
        })
    }

    pub fn nodes(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self, source: usize, reference: usize) -> &[f64] {
        &self.weights[source][reference]
    }

    pub fn diverged_at(&self) -> Option<usize> {
        self.diverged_at
    }

    /// Consumes this sample's per-node references and fills `y` with one
    /// control output per source, each the sum of its sub-filter outputs.
    pub fn outputs(&mut self, x: &[f64], y: &mut [f64]) {
        let n = self.nodes();
        assert_eq!(x.len(), n, "reference slice size");
        assert_eq!(y.len(), n, "output slice size");
        self.processed += 1;
        if self.diverged_at.is_some() {
            y.fill(0.0);
            return;
        }
        for ((line, model_line), &xj) in self.x_lines.iter_mut().zip(&mut self.model_lines).zip(x) {
            line.push(xj);
            model_line.push(xj);
        }
        for (row, sensor_lines) in self.models.iter().zip(self.fref.iter_mut()) {
            for (model, source_lines) in row.iter().zip(sensor_lines.iter_mut()) {
                for (line, model_line) in source_lines.iter_mut().zip(&self.model_lines) {
                    line.push(dot(&model.taps, &model_line.history()[..model.len()]));
                }
            }
        }
        let mut finite = true;
        for (yk, subs) in y.iter_mut().zip(&self.weights) {
            let mut acc = 0.0;
            for (w, line) in subs.iter().zip(&self.x_lines) {
                acc += dot(w, line.history());
            }
            *yk = acc;
            finite &= acc.is_finite();
        }
        if !finite {
            self.diverged_at = Some(self.processed - 1);
            y.fill(0.0);
        }
    }

    /// Applies one multiple-error update across all sub-filters. Call
    /// exactly once after each `outputs`.
    pub fn adapt(&mut self, e: &[f64]) {
        assert_eq!(e.len(), self.nodes(), "error slice size");
        assert!(self.processed > 0, "adapt before the first outputs call");
        if self.diverged_at.is_some() {
            return;
        }
        if e.iter().any(|v| !v.is_finite()) {
            self.diverged_at = Some(self.processed - 1);
            return;
        }
        for (sensor_lines, &em) in self.fref.iter().zip(e) {
            for ((subs, source_lines), &mu_k) in
                self.weights.iter_mut().zip(sensor_lines).zip(&self.mu)
            {
                let mu_e = mu_k * em;
                for (w, line) in subs.iter_mut().zip(source_lines) {
                    for (wi, &xf) in w.iter_mut().zip(line.history()) {
                        *wi += mu_e * xf;
                    }
                }
            }
        }
    }
}
