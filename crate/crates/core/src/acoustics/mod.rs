//! Streaming acoustic plant and FIR building blocks.
//!
//! The plant propagates each node's reference x_k through its primary path
//! to the disturbance d_k, and every source's control output y_m through the
//! secondary-path matrix to the error sensors:
//!
//! ```text
//! d_k(n) = (p_k * x_k)(n)
//! e_k(n) = d_k(n) - sum over m of (s_km * y_m)(n)
//! ```
//!
//! where s_km is the response from source m to sensor k and * is linear
//! convolution. The diagonal terms are the self paths each controller
//! models; the off-diagonal terms couple the nodes and appear at sensor k
//! as interference the local controller cannot predict from its own
//! signals.

mod pathfile;
mod synth;

pub use pathfile::{load_center_filters, load_paths, save_center_filters, save_paths};
pub use synth::{make_estimate_matrix, make_estimates, synth_paths, PathSynthSpec};

use crate::error::{AncError, Result};

/// Dot product with four parallel accumulators. The summation order is
/// fixed, so results are reproducible run to run; the split accumulators
/// keep long FIR dots from serializing on a single add chain.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot operands must have equal length");
    let mut chunks_a = a.chunks_exact(4);
    let mut chunks_b = b.chunks_exact(4);
    let mut acc = [0.0_f64; 4];
    for (ca, cb) in (&mut chunks_a).zip(&mut chunks_b) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    let mut tail = 0.0;
    for (x, y) in chunks_a.remainder().iter().zip(chunks_b.remainder()) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Fixed-depth history of the most recent inputs, newest first.
///
/// Backed by a double-length buffer with every sample written twice, so the
/// current history is always one contiguous slice and dot products never
/// wrap.
#[derive(Debug, Clone)]
pub struct DelayLine {
    buf: Vec<f64>,
    depth: usize,
    pos: usize,
}

impl DelayLine {
    pub fn new(depth: usize) -> Self {
        assert!(depth >= 1, "delay line needs at least one slot");
        DelayLine {
            buf: vec![0.0; 2 * depth],
            depth,
            pos: 0,
        }
    }

    /// Inserts the newest sample, dropping the oldest.
    pub fn push(&mut self, x: f64) {
        self.pos = if self.pos == 0 { self.depth - 1 } else { self.pos - 1 };
        self.buf[self.pos] = x;
        self.buf[self.pos + self.depth] = x;
    }

    /// History ordered newest first: `history()[j]` is the input from j
    /// steps ago, zero before anything was pushed.
    pub fn history(&self) -> &[f64] {
        &self.buf[self.pos..self.pos + self.depth]
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Clears the history to zeros.
    pub fn reset(&mut self) {
        self.buf.fill(0.0);
        self.pos = 0;
    }
}

/// Streaming FIR convolution: a delay line sized to the response length.
#[derive(Debug, Clone)]
pub struct Convolver {
    line: DelayLine,
}

impl Convolver {
    pub fn new(n_taps: usize) -> Self {
        Convolver {
            line: DelayLine::new(n_taps),
        }
    }

    /// Pushes one input sample and returns the convolution output at that
    /// sample: sum over j of `taps[j]` * input(n - j).
    pub fn step(&mut self, taps: &[f64], x: f64) -> f64 {
        self.line.push(x);
        dot(taps, self.line.history())
    }

    pub fn reset(&mut self) {
        self.line.reset();
    }
}

/// Finite impulse response coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct FirResponse {
    pub taps: Vec<f64>,
}

impl FirResponse {
    /// Validating constructor for responses from untrusted sources: at
    /// least one tap, all taps finite.
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(AncError::Dimension("impulse response has no taps".into()));
        }
        if let Some(bad) = taps.iter().position(|t| !t.is_finite()) {
            return Err(AncError::Dimension(format!(
                "impulse response tap {bad} is not finite"
            )));
        }
        Ok(FirResponse { taps })
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Sum of squared taps.
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }
}

/// Full plant wiring: primary paths per node, the K x K secondary-path
/// matrix with `secondary[k][m]` the response from source m to sensor k,
/// and the per-node models of the diagonal secondary paths used by the
/// controllers. `estimates` may be empty until the models are built.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub primary: Vec<FirResponse>,
    pub secondary: Vec<Vec<FirResponse>>,
    pub estimates: Vec<FirResponse>,
}

impl PathSet {
    pub fn nodes(&self) -> usize {
        self.primary.len()
    }

    /// Checks dimensional consistency: a square secondary matrix matching
    /// the primary count, uniform tap counts within each path family, and
    /// either no estimates or one per node.
    pub fn validate(&self) -> Result<()> {
        let k = self.primary.len();
        if k == 0 {
            return Err(AncError::Dimension("path set has no nodes".into()));
        }
        if self.secondary.len() != k {
            return Err(AncError::Dimension(format!(
                "secondary matrix has {} rows for {k} nodes",
                self.secondary.len()
            )));
        }
        for (i, row) in self.secondary.iter().enumerate() {
            if row.len() != k {
                return Err(AncError::Dimension(format!(
                    "secondary row {i} has {} entries for {k} nodes",
                    row.len()
                )));
            }
        }
        let primary_len = self.primary[0].len();
        if self.primary.iter().any(|p| p.len() != primary_len) {
            return Err(AncError::Dimension(
                "primary paths have mixed tap counts".into(),
            ));
        }
        let secondary_len = self.secondary[0][0].len();
        if self
            .secondary
            .iter()
            .flatten()
            .any(|s| s.len() != secondary_len)
        {
            return Err(AncError::Dimension(
                "secondary paths have mixed tap counts".into(),
            ));
        }
        if !self.estimates.is_empty() {
            if self.estimates.len() != k {
                return Err(AncError::Dimension(format!(
                    "{} estimates for {k} nodes",
                    self.estimates.len()
                )));
            }
            let estimate_len = self.estimates[0].len();
            if self.estimates.iter().any(|e| e.len() != estimate_len) {
                return Err(AncError::Dimension(
                    "estimates have mixed tap counts".into(),
                ));
            }
        }
        for path in self
            .primary
            .iter()
            .chain(self.secondary.iter().flatten())
            .chain(self.estimates.iter())
        {
            if path.is_empty() || path.taps.iter().any(|t| !t.is_finite()) {
                return Err(AncError::Dimension(
                    "paths must be non-empty with finite taps".into(),
                ));
            }
        }
        Ok(())
    }

    /// Extracts node k as a standalone single-node plant: its primary path,
    /// self secondary path, and model.
    pub fn single_node(&self, k: usize) -> PathSet {
        PathSet {
            primary: vec![self.primary[k].clone()],
            secondary: vec![vec![self.secondary[k][k].clone()]],
            estimates: if self.estimates.is_empty() {
                Vec::new()
            } else {
                vec![self.estimates[k].clone()]
            },
        }
    }
}

/// Streaming plant state. One instance per run; `step` advances plant time
/// by one sample for all nodes at once.
#[derive(Debug, Clone)]
pub struct Plant {
    paths: PathSet,
    x_lines: Vec<Convolver>,
    y_lines: Vec<DelayLine>,
    fault: Option<usize>,
}

impl Plant {
    pub fn new(paths: PathSet) -> Result<Self> {
        paths.validate()?;
        let k = paths.nodes();
        let primary_len = paths.primary[0].len();
        let secondary_len = paths.secondary[0][0].len();
        Ok(Plant {
            paths,
            x_lines: vec![Convolver::new(primary_len); k],
            y_lines: vec![DelayLine::new(secondary_len); k],
            fault: None,
        })
    }

    pub fn nodes(&self) -> usize {
        self.paths.nodes()
    }

    pub fn paths(&self) -> &PathSet {
        &self.paths
    }

    /// Source index that first delivered a non-finite control sample, if
    /// any. Once set, the plant refuses further steps.
    pub fn fault(&self) -> Option<usize> {
        self.fault
    }

    /// Advances one sample: consumes each node's reference x and each
    /// source's control output y, writes the per-node disturbances and
    /// errors. A non-finite control sample marks the plant faulted and
    /// returns an error without advancing state, leaving the trace so far
    /// intact.
    pub fn step(&mut self, x: &[f64], y: &[f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
        let k = self.nodes();
        assert_eq!(x.len(), k, "reference sample count");
        assert_eq!(y.len(), k, "control sample count");
        assert_eq!(d.len(), k, "disturbance buffer size");
        assert_eq!(e.len(), k, "error buffer size");
        if let Some(source_index) = self.fault {
            return Err(AncError::NonFiniteControl { source_index });
        }
        if let Some(source_index) = y.iter().position(|v| !v.is_finite()) {
            self.fault = Some(source_index);
            return Err(AncError::NonFiniteControl { source_index });
        }

        for (line, &ym) in self.y_lines.iter_mut().zip(y) {
            line.push(ym);
        }
        for kk in 0..k {
            d[kk] = self.x_lines[kk].step(&self.paths.primary[kk].taps, x[kk]);
            let mut anti = 0.0;
            for m in 0..k {
                anti += dot(&self.paths.secondary[kk][m].taps, self.y_lines[m].history());
            }
            e[kk] = d[kk] - anti;
        }
        Ok(())
    }

    /// Interference at sensor k from every other source, evaluated on the
    /// current control histories (after `step`). Diagnostic only; the
    /// controllers never see this value.
    pub fn crosstalk(&self, k: usize) -> f64 {
        (0..self.nodes())
            .filter(|&m| m != k)
            .map(|m| dot(&self.paths.secondary[k][m].taps, self.y_lines[m].history()))
            .sum()
    }

    /// Clears all delay lines and the fault flag.
    pub fn reset(&mut self) {
        for line in &mut self.x_lines {
            line.reset();
        }
        for line in &mut self.y_lines {
            line.reset();
        }
        self.fault = None;
    }
}

/// Interference at sensor k from all sources other than k, evaluated at the
/// last sample of the given per-source control histories. Offline
/// counterpart of [`Plant::crosstalk`] for post-run analysis.
pub fn crosstalk_interference(paths: &PathSet, y_histories: &[Vec<f64>], k: usize) -> f64 {
    assert_eq!(y_histories.len(), paths.nodes(), "one history per source");
    let n = y_histories.first().map_or(0, Vec::len);
    if n == 0 {
        return 0.0;
    }
    (0..paths.nodes())
        .filter(|&m| m != k)
        .map(|m| {
            let taps = &paths.secondary[k][m].taps;
            let history = &y_histories[m];
            taps.iter()
                .take(n)
                .enumerate()
                .map(|(j, &t)| t * history[n - 1 - j])
                .sum::<f64>()
        })
        .sum()
}
