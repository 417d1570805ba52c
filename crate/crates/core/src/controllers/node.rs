//! Per-node adaptive controller.
//!
//! A node owns one adaptive FIR control filter driven by its own reference
//! and error signals, with no visibility into other nodes. Four adaptation
//! variants share a single update expression,
//!
//! ```text
//! w[i] += mu * e * x'[i] + mu * alpha * (center[i] - w[i])
//! ```
//!
//! so the documented reductions between them hold exactly:
//!
//! * plain filtered-reference LMS: alpha = 0,
//! * leaky: penalty toward an all-zero center,
//! * weight-constrained: penalty toward a fixed center filter,
//! * self-boosted weight-constrained: the center is replaced by the current
//!   filter whenever a residual-noise window strictly improves on the best
//!   window seen so far.

use crate::acoustics::{dot, DelayLine};
use crate::error::{AncError, Result};
use crate::metrics::rnl;

/// A center replacement: the windowed average residual noise level strictly
/// beat the previous best.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostRecord {
    /// Sample index at which the window closed.
    pub sample: usize,
    pub old_eta_min: f64,
    pub new_eta_min: f64,
}

/// Residual-noise bookkeeping for the self-boost schedule.
#[derive(Debug, Clone)]
struct BoostState {
    window_len: usize,
    acc: f64,
    count: usize,
    eta_min: f64,
    events: u64,
}

/// One node's adaptive control filter and its local state.
#[derive(Debug, Clone)]
pub struct NodeController {
    weights: Vec<f64>,
    center: Vec<f64>,
    mu: f64,
    alpha: f64,
    model: Vec<f64>,
    x_line: DelayLine,
    model_line: DelayLine,
    fref_line: DelayLine,
    boost: Option<BoostState>,
    diverged_at: Option<usize>,
    processed: usize,
}

impl NodeController {
    fn new_inner(
        n_taps: usize,
        model: Vec<f64>,
        mu: f64,
        alpha: f64,
        center: Vec<f64>,
        boost_window: Option<usize>,
    ) -> Result<Self> {
        if n_taps == 0 {
            return Err(AncError::Config("control filter needs at least one tap".into()));
        }
        if model.is_empty() || model.iter().any(|t| !t.is_finite()) {
            return Err(AncError::Config(
                "secondary-path model must be non-empty with finite taps".into(),
            ));
        }
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(AncError::Config(format!(
                "step size must be finite and nonnegative, got {mu}"
            )));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(AncError::Config(format!(
                "penalty factor must be finite and nonnegative, got {alpha}"
            )));
        }
        if center.len() != n_taps {
            return Err(AncError::Dimension(format!(
                "center filter has {} taps, control filter has {n_taps}",
                center.len()
            )));
        }
        if center.iter().any(|w| !w.is_finite()) {
            return Err(AncError::Config("center filter must have finite weights".into()));
        }
        if boost_window == Some(0) {
            return Err(AncError::Config("boost window must cover at least one sample".into()));
        }
        let model_len = model.len();
        Ok(NodeController {
            weights: vec![0.0; n_taps],
            center,
            mu,
            alpha,
            model,
            x_line: DelayLine::new(n_taps),
            model_line: DelayLine::new(model_len),
            fref_line: DelayLine::new(n_taps),
            boost: boost_window.map(|window_len| BoostState {
                window_len,
                acc: 0.0,
                count: 0,
                eta_min: f64::INFINITY,
                events: 0,
            }),
            diverged_at: None,
            processed: 0,
        })
    }

    /// Plain filtered-reference LMS.
    pub fn fxlms(n_taps: usize, model: Vec<f64>, mu: f64) -> Result<Self> {
        let center = vec![0.0; n_taps];
        Self::new_inner(n_taps, model, mu, 0.0, center, None)
    }

    /// Leaky variant: weight-constrained toward a permanently zero center.
    pub fn leaky(n_taps: usize, model: Vec<f64>, mu: f64, alpha: f64) -> Result<Self> {
        let center = vec![0.0; n_taps];
        Self::new_inner(n_taps, model, mu, alpha, center, None)
    }

    /// Weight-constrained variant with a fixed center filter.
    pub fn wcfxlms(
        n_taps: usize,
        model: Vec<f64>,
        mu: f64,
        alpha: f64,
        center: Vec<f64>,
    ) -> Result<Self> {
        Self::new_inner(n_taps, model, mu, alpha, center, None)
    }

    /// Self-boosted variant. `boost_window` is the residual-noise window in
    /// samples; `None` means the window never closes and the center stays
    /// fixed, which reduces to the weight-constrained variant.
    pub fn sb_wcfxlms(
        n_taps: usize,
        model: Vec<f64>,
        mu: f64,
        alpha: f64,
        center: Vec<f64>,
        boost_window: Option<usize>,
    ) -> Result<Self> {
        Self::new_inner(n_taps, model, mu, alpha, center, boost_window)
    }

    /// Consumes this sample's reference and returns the control output
    /// w . [x(n) .. x(n-N+1)]. Also advances the filtered-reference line
    /// used by the next `adapt` call. A diverged node emits zero.
    pub fn output(&mut self, x: f64) -> f64 {
        self.processed += 1;
        if self.diverged_at.is_some() {
            return 0.0;
        }
        self.x_line.push(x);
        self.model_line.push(x);
        let filtered = dot(&self.model, self.model_line.history());
        self.fref_line.push(filtered);
        let y = dot(&self.weights, self.x_line.history());
        if !y.is_finite() {
            self.diverged_at = Some(self.processed - 1);
            return 0.0;
        }
        y
    }

    /// Applies the weight update for this sample's error, then runs the
    /// boost bookkeeping. Call exactly once after each `output`. Returns
    /// the boost record when the closing window strictly improved on the
    /// best seen. A non-finite error freezes the node instead of updating.
    pub fn adapt(&mut self, e: f64) -> Option<BoostRecord> {
        assert!(self.processed > 0, "adapt before the first output call");
        if self.diverged_at.is_some() {
            return None;
        }
        let n = self.processed - 1;
        if !e.is_finite() {
            self.diverged_at = Some(n);
            return None;
        }

        let mu_e = self.mu * e;
        let mu_a = self.mu * self.alpha;
        let fref = self.fref_line.history();
        for ((w, &c), &xf) in self.weights.iter_mut().zip(&self.center).zip(fref) {
            *w += mu_e * xf + mu_a * (c - *w);
        }

        let boost = self.boost.as_mut()?;
        boost.acc += rnl(e);
        boost.count += 1;
        if boost.count < boost.window_len {
            return None;
        }
        let eta_bar = boost.acc / boost.window_len as f64;
        boost.acc = 0.0;
        boost.count = 0;
        if eta_bar < boost.eta_min {
            let old_eta_min = boost.eta_min;
            boost.eta_min = eta_bar;
            boost.events += 1;
            self.center.copy_from_slice(&self.weights);
            return Some(BoostRecord {
                sample: n,
                old_eta_min,
                new_eta_min: eta_bar,
            });
        }
        None
    }

    pub fn n_taps(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Best windowed average residual noise level so far; infinite before
    /// the first closed window or without a boost schedule.
    pub fn eta_min(&self) -> f64 {
        self.boost.as_ref().map_or(f64::INFINITY, |b| b.eta_min)
    }

    /// Number of center replacements so far.
    pub fn boost_count(&self) -> u64 {
        self.boost.as_ref().map_or(0, |b| b.events)
    }

    /// Sample index at which this node froze, if it did.
    pub fn diverged_at(&self) -> Option<usize> {
        self.diverged_at
    }
}
