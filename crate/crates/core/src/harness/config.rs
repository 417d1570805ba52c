//! Scenario configuration.
//!
//! A scenario is one TOML file with four or five sections:
//!
//! ```toml
//! [scenario]
//! nodes = 4
//! algorithm = "sb-wcfxlms"
//! duration_s = 30.0
//! alpha = 100.0                 # scalar, or one value per node
//!
//! [noise]
//! kind = "multitone"            # or "bandlimited" / "wavefile"
//! frequencies_hz = [300.0, 400.0, 500.0, 600.0, 700.0]
//!
//! [paths]
//! source = "synth"              # or "file"
//! coupling_gain = 0.8
//! seed = 7
//!
//! [estimates]                   # optional: secondary-path model quality
//! mismatch = 0.05
//! seed = 11
//!
//! [output]                      # optional: trace/export settings
//! anse_block_s = 1.0
//! ```
//!
//! Everything except `nodes`, `algorithm`, `duration_s`, and the noise and
//! paths sections has a default. Values can be overridden from the command
//! line with dotted keys (`--set scenario.mu_bar=0.05`); overrides edit the
//! parsed TOML before validation, so they are equivalent to editing the
//! file. Relative file references (wave files, path files, center filters)
//! resolve against the directory containing the scenario file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AncError, Result};

fn default_sample_rate() -> u32 {
    16_000
}

fn default_control_taps() -> usize {
    512
}

fn default_model_taps() -> usize {
    256
}

fn default_mu_bar() -> f64 {
    0.1
}

fn default_one_second() -> f64 {
    1.0
}

fn default_target_rms() -> f64 {
    1.0
}

fn default_path_len() -> usize {
    64
}

fn default_delay_min() -> usize {
    4
}

fn default_delay_max() -> usize {
    8
}

fn default_decay_rate() -> f64 {
    0.05
}

fn default_coupling_gain() -> f64 {
    0.5
}

fn default_spectrum_segment() -> usize {
    4096
}

fn default_spectrum_overlap() -> f64 {
    0.5
}

fn default_spectrum_tail_s() -> f64 {
    4.0
}

/// Which adaptive algorithm drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Independent per-node filtered-reference LMS.
    DecentralizedFxlms,
    /// Per-node leaky variant; `alpha` sets the leak strength.
    Leaky,
    /// Per-node weight-constrained variant with a fixed center filter.
    Wcfxlms,
    /// Per-node weight-constrained variant with self-boosted centers.
    SbWcfxlms,
    /// Multiple-error controller on one shared reference.
    Centralized,
    /// Multiple-error controller with per-node references and one
    /// sub-filter per (source, reference) pair.
    CollocatedCentralized,
}

impl Algorithm {
    /// Per-node algorithms adapt each filter from local signals only.
    pub fn is_per_node(self) -> bool {
        !matches!(self, Algorithm::Centralized | Algorithm::CollocatedCentralized)
    }

    /// Whether the weight penalty (`alpha`) participates in the update.
    pub fn uses_alpha(self) -> bool {
        matches!(self, Algorithm::Leaky | Algorithm::Wcfxlms | Algorithm::SbWcfxlms)
    }

    /// Whether a center filter (from file or boosting) is meaningful.
    pub fn uses_center(self) -> bool {
        matches!(self, Algorithm::Wcfxlms | Algorithm::SbWcfxlms)
    }
}

/// How reference signals reach the nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceMode {
    /// Every node sees the identical reference stream.
    SharedSingle,
    /// Each node has its own reference: the same deterministic signal for
    /// tonal and file noise, independently seeded noise for band-limited
    /// noise.
    PerNode,
}

impl Default for ReferenceMode {
    fn default() -> Self {
        ReferenceMode::SharedSingle
    }
}

/// Weight-penalty factor: one value for all nodes or one per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Scalar(f64),
    PerNode(Vec<f64>),
}

impl Default for AlphaSpec {
    fn default() -> Self {
        AlphaSpec::Scalar(0.0)
    }
}

impl AlphaSpec {
    /// Expands to one value per node, broadcasting a scalar.
    pub fn resolve(&self, nodes: usize) -> Result<Vec<f64>> {
        let values = match self {
            AlphaSpec::Scalar(a) => vec![*a; nodes],
            AlphaSpec::PerNode(list) => {
                if list.len() != nodes {
                    return Err(AncError::Config(format!(
                        "alpha lists {} values for {nodes} nodes",
                        list.len()
                    )));
                }
                list.clone()
            }
        };
        for &a in &values {
            if !(a.is_finite() && a >= 0.0) {
                return Err(AncError::Config(format!(
                    "alpha must be finite and nonnegative, got {a}"
                )));
            }
        }
        Ok(values)
    }
}

/// The `[scenario]` section: dimensions, algorithm, and adaptation knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub nodes: usize,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub reference_mode: ReferenceMode,
    #[serde(default = "default_sample_rate")]
    pub sample_rate_hz: u32,
    /// Control filter length N.
    #[serde(default = "default_control_taps")]
    pub control_taps: usize,
    /// Secondary-path model length L.
    #[serde(default = "default_model_taps")]
    pub model_taps: usize,
    /// Normalized step size; the per-node step is
    /// `mu_bar / (N * filtered-reference power + 1e-12)`.
    #[serde(default = "default_mu_bar")]
    pub mu_bar: f64,
    #[serde(default)]
    pub alpha: AlphaSpec,
    /// Self-boost window in seconds; `inf` disables boosting.
    #[serde(default = "default_one_second")]
    pub boost_interval_s: f64,
    pub duration_s: f64,
    /// Windowed average residual-noise reporting interval.
    #[serde(default = "default_one_second")]
    pub rnl_interval_s: f64,
    /// Error-microphone measurement noise, as a signal-to-noise ratio in
    /// dB relative to each node's disturbance level over the opening two
    /// seconds. Omit (or set `inf`) for noiseless microphones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensor_snr_db: Option<f64>,
    /// Initial center filters for the weight-constrained variants,
    /// written by `save_center_filters`. Defaults to all-zero centers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_file: Option<String>,
}

/// The `[noise]` section: what the nodes are asked to cancel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseSpec {
    /// Sum of fixed sinusoids.
    Multitone {
        frequencies_hz: Vec<f64>,
        /// Per-tone amplitudes; defaults to 1 each.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        amplitudes: Option<Vec<f64>>,
        /// Per-tone phases in radians; defaults to 0 each.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phases_rad: Option<Vec<f64>>,
    },
    /// Band-limited Gaussian noise.
    Bandlimited {
        low_hz: f64,
        high_hz: f64,
        #[serde(default = "default_target_rms")]
        target_rms: f64,
        seed: u64,
    },
    /// First channel of a PCM16 or float32 WAV file, which must match the
    /// scenario sample rate and cover the full duration.
    Wavefile { file: String },
}

/// The `[paths]` section: where the acoustic plant comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum PathSpec {
    /// Random exponentially decaying FIR paths; see `synth_paths`.
    Synth {
        #[serde(default = "default_path_len")]
        primary_len: usize,
        #[serde(default = "default_path_len")]
        secondary_len: usize,
        #[serde(default = "default_delay_min")]
        delay_min: usize,
        #[serde(default = "default_delay_max")]
        delay_max: usize,
        #[serde(default = "default_decay_rate")]
        decay_rate: f64,
        /// Energy of each crosstalk path relative to the unit-energy self
        /// paths; 0 decouples the nodes.
        #[serde(default = "default_coupling_gain")]
        coupling_gain: f64,
        #[serde(default)]
        seed: u64,
    },
    /// A path file written by `save_paths`, whose sample rate must match
    /// the scenario.
    File { file: String },
}

/// The `[estimates]` section: quality of the secondary-path models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSpec {
    /// Relative energy of the perturbation added to the truncated true
    /// path; 0 gives the exact truncation.
    #[serde(default)]
    pub mismatch: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for EstimateSpec {
    fn default() -> Self {
        EstimateSpec { mismatch: 0.0, seed: 0 }
    }
}

/// The `[output]` section: what the trace keeps and how spectra are made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Keep every per-sample d/e/y value in memory and export samples.csv.
    /// Off by default; a long run stores only blocks and windows.
    #[serde(default)]
    pub store_samples: bool,
    #[serde(default = "default_one_second")]
    pub anse_block_s: f64,
    #[serde(default = "default_spectrum_segment")]
    pub spectrum_segment: usize,
    #[serde(default = "default_spectrum_overlap")]
    pub spectrum_overlap: f64,
    /// How many trailing seconds of error signal feed the spectrum.
    #[serde(default = "default_spectrum_tail_s")]
    pub spectrum_tail_s: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            store_samples: false,
            anse_block_s: default_one_second(),
            spectrum_segment: default_spectrum_segment(),
            spectrum_overlap: default_spectrum_overlap(),
            spectrum_tail_s: default_spectrum_tail_s(),
        }
    }
}

/// One complete scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub noise: NoiseSpec,
    pub paths: PathSpec,
    /// Absent means exact truncation models. When the path file already
    /// carries models, the section must stay absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimates: Option<EstimateSpec>,
    #[serde(default)]
    pub output: OutputSection,
}

impl ScenarioConfig {
    /// Checks every cross-field rule that deserialization cannot. File
    /// contents are checked later, at resolution time.
    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        if s.nodes == 0 {
            return Err(AncError::Config("nodes must be at least 1".into()));
        }
        if s.sample_rate_hz == 0 {
            return Err(AncError::Config("sample_rate_hz must be positive".into()));
        }
        if s.control_taps == 0 || s.model_taps == 0 {
            return Err(AncError::Config("control_taps and model_taps must be positive".into()));
        }
        if !(s.mu_bar.is_finite() && s.mu_bar >= 0.0) {
            return Err(AncError::Config(format!(
                "mu_bar must be finite and nonnegative, got {}",
                s.mu_bar
            )));
        }
        s.alpha.resolve(s.nodes)?;
        if !(s.boost_interval_s > 0.0) {
            return Err(AncError::Config(format!(
                "boost_interval_s must be positive, got {}",
                s.boost_interval_s
            )));
        }
        if !(s.duration_s.is_finite() && s.duration_s >= 0.0) {
            return Err(AncError::Config(format!(
                "duration_s must be finite and nonnegative, got {}",
                s.duration_s
            )));
        }
        if !(s.rnl_interval_s.is_finite() && s.rnl_interval_s > 0.0) {
            return Err(AncError::Config(format!(
                "rnl_interval_s must be positive and finite, got {}",
                s.rnl_interval_s
            )));
        }
        if s.boost_interval_s.is_finite()
            && (s.boost_interval_s * s.sample_rate_hz as f64).round() < 1.0
        {
            return Err(AncError::Config(
                "boost_interval_s is shorter than one sample".into(),
            ));
        }
        if (s.rnl_interval_s * s.sample_rate_hz as f64).round() < 1.0 {
            return Err(AncError::Config("rnl_interval_s is shorter than one sample".into()));
        }
        if let Some(snr) = s.sensor_snr_db {
            if snr.is_nan() || snr == f64::NEG_INFINITY {
                return Err(AncError::Config(format!(
                    "sensor_snr_db must be a real level (or inf for none), got {snr}"
                )));
            }
        }
        match s.algorithm {
            Algorithm::Centralized => {
                if s.reference_mode != ReferenceMode::SharedSingle {
                    return Err(AncError::Config(
                        "the centralized algorithm requires reference_mode = \"shared-single\""
                            .into(),
                    ));
                }
            }
            Algorithm::CollocatedCentralized => {
                if s.reference_mode != ReferenceMode::PerNode {
                    return Err(AncError::Config(
                        "the collocated-centralized algorithm requires reference_mode = \"per-node\""
                            .into(),
                    ));
                }
            }
            _ => {}
        }
        if s.center_file.is_some() && !s.algorithm.uses_center() {
            return Err(AncError::Config(
                "center_file only applies to wcfxlms and sb-wcfxlms".into(),
            ));
        }
        match &self.noise {
            NoiseSpec::Multitone { frequencies_hz, amplitudes, phases_rad } => {
                if frequencies_hz.is_empty() {
                    return Err(AncError::Config("multitone noise needs at least one tone".into()));
                }
                for (name, list) in [("amplitudes", amplitudes), ("phases_rad", phases_rad)] {
                    if let Some(list) = list {
                        if list.len() != frequencies_hz.len() {
                            return Err(AncError::Config(format!(
                                "{name} lists {} values for {} tones",
                                list.len(),
                                frequencies_hz.len()
                            )));
                        }
                    }
                }
            }
            NoiseSpec::Bandlimited { low_hz, high_hz, target_rms, .. } => {
                if !(low_hz.is_finite() && high_hz.is_finite() && *low_hz > 0.0 && high_hz > low_hz)
                {
                    return Err(AncError::Config(format!(
                        "band edges must satisfy 0 < low < high, got [{low_hz}, {high_hz}]"
                    )));
                }
                if !(target_rms.is_finite() && *target_rms >= 0.0) {
                    return Err(AncError::Config(format!(
                        "target_rms must be finite and nonnegative, got {target_rms}"
                    )));
                }
            }
            NoiseSpec::Wavefile { .. } => {}
        }
        if let PathSpec::Synth {
            primary_len,
            secondary_len,
            delay_min,
            delay_max,
            decay_rate,
            coupling_gain,
            ..
        } = &self.paths
        {
            crate::acoustics::PathSynthSpec {
                nodes: s.nodes,
                primary_len: *primary_len,
                secondary_len: *secondary_len,
                delay_min: *delay_min,
                delay_max: *delay_max,
                decay_rate: *decay_rate,
                coupling_gain: *coupling_gain,
            }
            .validate()?;
        }
        if let Some(est) = &self.estimates {
            if !(est.mismatch.is_finite() && est.mismatch >= 0.0) {
                return Err(AncError::Config(format!(
                    "estimate mismatch must be finite and nonnegative, got {}",
                    est.mismatch
                )));
            }
        }
        let out = &self.output;
        if !(out.anse_block_s.is_finite() && out.anse_block_s > 0.0) {
            return Err(AncError::Config(format!(
                "anse_block_s must be positive and finite, got {}",
                out.anse_block_s
            )));
        }
        if (out.anse_block_s * s.sample_rate_hz as f64).round() < 1.0 {
            return Err(AncError::Config("anse_block_s is shorter than one sample".into()));
        }
        if out.spectrum_segment < 8 {
            return Err(AncError::Config(format!(
                "spectrum_segment must be at least 8 samples, got {}",
                out.spectrum_segment
            )));
        }
        if !(out.spectrum_overlap >= 0.0 && out.spectrum_overlap < 1.0) {
            return Err(AncError::Config(format!(
                "spectrum_overlap must lie in [0, 1), got {}",
                out.spectrum_overlap
            )));
        }
        if !(out.spectrum_tail_s.is_finite() && out.spectrum_tail_s >= 0.0) {
            return Err(AncError::Config(format!(
                "spectrum_tail_s must be finite and nonnegative, got {}",
                out.spectrum_tail_s
            )));
        }
        Ok(())
    }

    /// Per-node penalty factors.
    pub fn alphas(&self) -> Result<Vec<f64>> {
        self.scenario.alpha.resolve(self.scenario.nodes)
    }

    /// Serializes back to TOML, e.g. for the run manifest.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| AncError::Config(format!("cannot serialize config: {e}")))
    }
}

/// Parses a TOML document into a raw table, keeping it editable for
/// overrides.
pub fn parse_config_table(text: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>()
        .map_err(|e| AncError::Config(format!("invalid TOML: {e}")))
}

/// Reads a scenario file into a raw table.
pub fn load_config_table(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path)?;
    parse_config_table(&text)
}

/// Converts an override-edited table into a validated config.
pub fn config_from_table(table: toml::Table) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| AncError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Loads and validates a scenario file with no overrides.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    config_from_table(load_config_table(path)?)
}

/// Splits a `key=value` override argument. The value is parsed as a TOML
/// value; text that does not parse as one (say, a bare algorithm name) is
/// taken as a string.
pub fn parse_set_arg(arg: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = arg.split_once('=').ok_or_else(|| {
        AncError::Config(format!("override '{arg}' is not of the form key=value"))
    })?;
    let key = key.trim();
    if key.is_empty() {
        return Err(AncError::Config(format!("override '{arg}' has an empty key")));
    }
    Ok((key.to_string(), parse_override_value(raw.trim())))
}

fn parse_override_value(raw: &str) -> toml::Value {
    if let Ok(mut table) = format!("v = {raw}").parse::<toml::Table>() {
        if let Some(value) = table.remove("v") {
            return value;
        }
    }
    toml::Value::String(raw.to_string())
}

/// Sets a dotted key like `scenario.mu_bar` in a raw config table,
/// creating intermediate tables as needed. Unknown keys surface later as
/// deserialization errors.
pub fn apply_override(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts = key.split('.').peekable();
    let mut current = table;
    loop {
        let part = parts.next().expect("split yields at least one part");
        if part.is_empty() {
            return Err(AncError::Config(format!("override key '{key}' has an empty segment")));
        }
        if parts.peek().is_none() {
            current.insert(part.to_string(), value);
            return Ok(());
        }
        current = current
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                AncError::Config(format!("override key '{key}': '{part}' is not a table"))
            })?;
    }
}
