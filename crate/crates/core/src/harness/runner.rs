//! Deterministic scenario execution.
//!
//! [`run_scenario`] resolves a validated config into concrete signals,
//! paths, models, and controllers, then advances plant time one sample at
//! a time: reference in, control outputs, plant propagation, adaptation,
//! metric accumulation. Given equal configs the resulting [`RunTrace`] is
//! identical down to the last bit; every random choice flows from a seed
//! recorded in the trace.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::acoustics::{
    load_center_filters, load_paths, make_estimate_matrix, make_estimates, synth_paths, Convolver,
    FirResponse, PathSet, PathSynthSpec, Plant,
};
use crate::controllers::{CentralizedController, CollocatedController, NodeController};
use crate::error::{AncError, Result};
use crate::harness::config::{Algorithm, NoiseSpec, PathSpec, ReferenceMode, ScenarioConfig};
use crate::metrics::{anse_from_power, rnl};
use crate::signals::{gen_bandlimited_noise, gen_multitone, load_wave_file, ToneSpec};

/// Divisor floor for the power-normalized step size.
pub const MU_NORM_EPS: f64 = 1e-12;

/// Seconds of reference measured for step normalization (capped at the run
/// length).
const MU_POWER_PREFIX_S: f64 = 2.0;

/// Salt separating the sensor-noise stream from every reference stream,
/// which derive from the plain noise seed plus the node index.
const SENSOR_SEED_SALT: u64 = 0x53454e534f525f4e;

/// Every seed a run consumed. `None` means that stage had no randomness:
/// deterministic noise, file-loaded paths, or file-loaded models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RunSeeds {
    pub noise: Option<u64>,
    pub paths: Option<u64>,
    pub estimates: Option<u64>,
}

/// One completed suppression block.
#[derive(Debug, Clone, PartialEq)]
pub struct AnseRow {
    pub block_index: usize,
    /// Time at the end of the block, in seconds.
    pub time_s: f64,
    /// Mean over nodes of the per-node dB ratios.
    pub anse_db: f64,
    pub per_node_db: Vec<f64>,
    /// True when the disturbance power in the block was exactly zero.
    pub degenerate: bool,
}

/// One completed residual-noise window: per-node average of
/// `10 log10(e^2 + eps)` over the window.
#[derive(Debug, Clone, PartialEq)]
pub struct RnlRow {
    pub window_index: usize,
    /// Time at the end of the window, in seconds.
    pub time_s: f64,
    pub per_node_db: Vec<f64>,
}

/// One center replacement, tagged with the node that boosted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostEvent {
    pub sample: usize,
    pub node: usize,
    pub old_eta_min: f64,
    pub new_eta_min: f64,
}

/// A non-finite control sample reached the plant; the run stopped at
/// `sample` without advancing plant time further.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PlantFault {
    pub sample: usize,
    pub source: usize,
}

/// Full per-sample streams, kept only when the config asks for them.
/// Indexed `[node][sample]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleLog {
    pub x: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub nodes: usize,
    pub sample_rate_hz: u32,
    pub planned_samples: usize,
    /// Equal to `planned_samples` unless a plant fault stopped the run.
    pub simulated_samples: usize,
    pub anse_block_len: usize,
    pub anse: Vec<AnseRow>,
    pub rnl_window_len: usize,
    pub rnl: Vec<RnlRow>,
    pub boosts: Vec<BoostEvent>,
    pub boost_counts: Vec<u64>,
    /// Final best windowed residual level per node; infinite when no
    /// window closed or the algorithm does not boost.
    pub eta_min: Vec<f64>,
    /// Per node: the sample at which it froze, if it did.
    pub diverged: Vec<Option<usize>>,
    pub plant_fault: Option<PlantFault>,
    pub resolved_mu: Vec<f64>,
    /// Per-node sensor-noise standard deviation; `None` when the
    /// microphones are noiseless.
    pub sensor_sigma: Option<Vec<f64>>,
    pub seeds: RunSeeds,
    /// Trailing error samples per node, chronological, for spectra.
    pub e_tail: Vec<Vec<f64>>,
    pub samples: Option<SampleLog>,
}

impl RunTrace {
    /// Mean suppression of the last complete block.
    pub fn final_anse_db(&self) -> Option<f64> {
        self.anse.last().map(|row| row.anse_db)
    }

    /// True when any node froze or the plant faulted.
    pub fn any_diverged(&self) -> bool {
        self.plant_fault.is_some() || self.diverged.iter().any(Option::is_some)
    }
}

/// Reference streams for all nodes.
enum References {
    /// Every node reads the same stream.
    Shared(Vec<f64>),
    /// One stream per node.
    PerNode(Vec<Vec<f64>>),
}

impl References {
    fn node(&self, k: usize) -> &[f64] {
        match self {
            References::Shared(x) => x,
            References::PerNode(xs) => &xs[k],
        }
    }
}

fn resolve_noise(
    cfg: &ScenarioConfig,
    base_dir: &Path,
    n_samples: usize,
) -> Result<(References, Option<u64>)> {
    let s = &cfg.scenario;
    match &cfg.noise {
        NoiseSpec::Multitone { frequencies_hz, amplitudes, phases_rad } => {
            let tones: Vec<ToneSpec> = frequencies_hz
                .iter()
                .enumerate()
                .map(|(i, &frequency_hz)| ToneSpec {
                    frequency_hz,
                    amplitude: amplitudes.as_ref().map_or(1.0, |a| a[i]),
                    phase_rad: phases_rad.as_ref().map_or(0.0, |p| p[i]),
                })
                .collect();
            let signal = gen_multitone(&tones, s.sample_rate_hz, n_samples)?;
            Ok((References::Shared(signal.samples), None))
        }
        NoiseSpec::Bandlimited { low_hz, high_hz, target_rms, seed } => {
            let gen = |seed: u64| -> Result<Vec<f64>> {
                Ok(gen_bandlimited_noise(
                    *low_hz,
                    *high_hz,
                    s.sample_rate_hz,
                    n_samples,
                    seed,
                    *target_rms,
                )?
                .samples)
            };
            let refs = match s.reference_mode {
                ReferenceMode::SharedSingle => References::Shared(gen(*seed)?),
                ReferenceMode::PerNode => References::PerNode(
                    (0..s.nodes)
                        .map(|k| gen(seed.wrapping_add(k as u64)))
                        .collect::<Result<_>>()?,
                ),
            };
            Ok((refs, Some(*seed)))
        }
        NoiseSpec::Wavefile { file } => {
            let signal = load_wave_file(&base_dir.join(file))?;
            if signal.sample_rate_hz != s.sample_rate_hz {
                return Err(AncError::Config(format!(
                    "wave file is sampled at {} Hz, scenario expects {} Hz",
                    signal.sample_rate_hz, s.sample_rate_hz
                )));
            }
            if signal.samples.len() < n_samples {
                return Err(AncError::Config(format!(
                    "wave file provides {} samples, the run needs {n_samples}",
                    signal.samples.len()
                )));
            }
            let mut samples = signal.samples;
            samples.truncate(n_samples);
            Ok((References::Shared(samples), None))
        }
    }
}

/// Loads or synthesizes the plant and guarantees `paths.estimates` is
/// filled, one model per node. Returns the paths seed and estimate seed
/// actually consumed.
fn resolve_paths(
    cfg: &ScenarioConfig,
    base_dir: &Path,
) -> Result<(PathSet, Option<u64>, Option<u64>)> {
    let s = &cfg.scenario;
    match &cfg.paths {
        PathSpec::Synth {
            primary_len,
            secondary_len,
            delay_min,
            delay_max,
            decay_rate,
            coupling_gain,
            seed,
        } => {
            let spec = PathSynthSpec {
                nodes: s.nodes,
                primary_len: *primary_len,
                secondary_len: *secondary_len,
                delay_min: *delay_min,
                delay_max: *delay_max,
                decay_rate: *decay_rate,
                coupling_gain: *coupling_gain,
            };
            let mut paths = synth_paths(&spec, *seed)?;
            let est = cfg.estimates.unwrap_or_default();
            make_estimates(&mut paths, s.model_taps, est.mismatch, est.seed)?;
            Ok((paths, Some(*seed), Some(est.seed)))
        }
        PathSpec::File { file } => {
            let (mut paths, file_rate) = load_paths(&base_dir.join(file))?;
            if file_rate != s.sample_rate_hz {
                return Err(AncError::Config(format!(
                    "path file is sampled at {file_rate} Hz, scenario expects {} Hz",
                    s.sample_rate_hz
                )));
            }
            if paths.nodes() != s.nodes {
                return Err(AncError::Config(format!(
                    "path file describes {} nodes, scenario expects {}",
                    paths.nodes(),
                    s.nodes
                )));
            }
            if paths.estimates.is_empty() {
                let est = cfg.estimates.unwrap_or_default();
                make_estimates(&mut paths, s.model_taps, est.mismatch, est.seed)?;
                Ok((paths, None, Some(est.seed)))
            } else {
                if cfg.estimates.is_some() {
                    return Err(AncError::Config(
                        "path file already provides secondary-path models; drop the [estimates] section"
                            .into(),
                    ));
                }
                if paths.estimates[0].len() != s.model_taps {
                    return Err(AncError::Config(format!(
                        "path file models have {} taps, model_taps is {}",
                        paths.estimates[0].len(),
                        s.model_taps
                    )));
                }
                Ok((paths, None, None))
            }
        }
    }
}

fn resolve_centers(cfg: &ScenarioConfig, base_dir: &Path) -> Result<Option<Vec<Vec<f64>>>> {
    let s = &cfg.scenario;
    let Some(file) = &s.center_file else {
        return Ok(None);
    };
    let centers = load_center_filters(&base_dir.join(file))?;
    if centers.len() != s.nodes {
        return Err(AncError::Config(format!(
            "center file holds {} filters, scenario expects {}",
            centers.len(),
            s.nodes
        )));
    }
    if centers[0].len() != s.control_taps {
        return Err(AncError::Config(format!(
            "center filters have {} taps, control_taps is {}",
            centers[0].len(),
            s.control_taps
        )));
    }
    Ok(Some(centers))
}

/// Mean square of `taps * xs` over the whole slice.
fn filtered_power(taps: &[f64], xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut conv = Convolver::new(taps.len());
    let mut acc = 0.0;
    for &x in xs {
        let v = conv.step(taps, x);
        acc += v * v;
    }
    acc / xs.len() as f64
}

/// Seeded measurement noise added to every error microphone.
struct SensorNoise {
    /// Per-node standard deviation; disturbance prefix RMS scaled down by
    /// the configured signal-to-noise ratio.
    sigma: Vec<f64>,
    rng: ChaCha8Rng,
}

impl SensorNoise {
    /// Adds one fresh noise sample per node. Draws in node order from a
    /// single stream, so a run's noise realization depends only on the
    /// seed, the node count, and how many samples ran.
    fn perturb(&mut self, e: &mut [f64]) {
        for (ek, &sigma) in e.iter_mut().zip(&self.sigma) {
            let white: f64 = StandardNormal.sample(&mut self.rng);
            *ek += sigma * white;
        }
    }
}

/// Builds the sensor-noise source, or `None` when the config disables it
/// (absent or infinite SNR). The noise level is anchored to each node's
/// control-free disturbance over the same prefix the step normalization
/// measures, so the configured ratio describes the scene the controller
/// first encounters.
fn build_sensor_noise(
    cfg: &ScenarioConfig,
    paths: &PathSet,
    refs: &References,
    n_samples: usize,
    noise_seed: Option<u64>,
) -> Option<SensorNoise> {
    let s = &cfg.scenario;
    let snr_db = s.sensor_snr_db.filter(|snr| snr.is_finite())?;
    let prefix = n_samples.min((MU_POWER_PREFIX_S * s.sample_rate_hz as f64).round() as usize);
    let scale = 10f64.powf(-snr_db / 20.0);
    let sigma = (0..s.nodes)
        .map(|k| {
            let d_power = filtered_power(&paths.primary[k].taps, &refs.node(k)[..prefix]);
            d_power.sqrt() * scale
        })
        .collect();
    let seed = SENSOR_SEED_SALT ^ noise_seed.unwrap_or(0).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    Some(SensorNoise { sigma, rng: ChaCha8Rng::seed_from_u64(seed) })
}

/// Power-normalized step per source: `mu_bar / (N * P + eps)` where P is
/// the total filtered-reference power reaching that source's update (one
/// term per error channel for the multiple-error controllers).
fn resolve_mu(
    cfg: &ScenarioConfig,
    paths: &PathSet,
    est_matrix: Option<&[Vec<FirResponse>]>,
    refs: &References,
    n_samples: usize,
) -> Vec<f64> {
    let s = &cfg.scenario;
    let prefix = n_samples.min((MU_POWER_PREFIX_S * s.sample_rate_hz as f64).round() as usize);
    let n_taps = s.control_taps as f64;
    (0..s.nodes)
        .map(|k| {
            let power = match est_matrix {
                None => filtered_power(&paths.estimates[k].taps, &refs.node(k)[..prefix]),
                Some(matrix) => match s.algorithm {
                    Algorithm::CollocatedCentralized => (0..s.nodes)
                        .map(|m| {
                            (0..s.nodes)
                                .map(|j| {
                                    filtered_power(&matrix[m][k].taps, &refs.node(j)[..prefix])
                                })
                                .sum::<f64>()
                        })
                        .sum(),
                    _ => (0..s.nodes)
                        .map(|m| filtered_power(&matrix[m][k].taps, &refs.node(0)[..prefix]))
                        .sum(),
                },
            };
            s.mu_bar / (n_taps * power + MU_NORM_EPS)
        })
        .collect()
}

enum Bank {
    Nodes(Vec<NodeController>),
    Central(CentralizedController),
    Collocated(CollocatedController),
}

fn build_bank(
    cfg: &ScenarioConfig,
    paths: &PathSet,
    est_matrix: Option<Vec<Vec<FirResponse>>>,
    centers: Option<Vec<Vec<f64>>>,
    mu: &[f64],
) -> Result<Bank> {
    let s = &cfg.scenario;
    let n = s.control_taps;
    let alphas = cfg.alphas()?;
    let boost_window = if s.boost_interval_s.is_finite() {
        Some((s.boost_interval_s * s.sample_rate_hz as f64).round() as usize)
    } else {
        None
    };
    let center_for = |k: usize| -> Vec<f64> {
        centers.as_ref().map_or_else(|| vec![0.0; n], |c| c[k].clone())
    };
    let model_for = |k: usize| paths.estimates[k].taps.clone();
    match s.algorithm {
        Algorithm::DecentralizedFxlms => Ok(Bank::Nodes(
            (0..s.nodes)
                .map(|k| NodeController::fxlms(n, model_for(k), mu[k]))
                .collect::<Result<_>>()?,
        )),
        Algorithm::Leaky => Ok(Bank::Nodes(
            (0..s.nodes)
                .map(|k| NodeController::leaky(n, model_for(k), mu[k], alphas[k]))
                .collect::<Result<_>>()?,
        )),
        Algorithm::Wcfxlms => Ok(Bank::Nodes(
            (0..s.nodes)
                .map(|k| NodeController::wcfxlms(n, model_for(k), mu[k], alphas[k], center_for(k)))
                .collect::<Result<_>>()?,
        )),
        Algorithm::SbWcfxlms => Ok(Bank::Nodes(
            (0..s.nodes)
                .map(|k| {
                    NodeController::sb_wcfxlms(
                        n,
                        model_for(k),
                        mu[k],
                        alphas[k],
                        center_for(k),
                        boost_window,
                    )
                })
                .collect::<Result<_>>()?,
        )),
        Algorithm::Centralized => Ok(Bank::Central(CentralizedController::new(
            n,
            est_matrix.expect("matrix built for centralized algorithms"),
            mu.to_vec(),
        )?)),
        Algorithm::CollocatedCentralized => Ok(Bank::Collocated(CollocatedController::new(
            n,
            est_matrix.expect("matrix built for centralized algorithms"),
            mu.to_vec(),
        )?)),
    }
}

/// Runs one scenario to completion. Relative file references resolve
/// against `base_dir`, normally the directory containing the scenario
/// file. Divergence is recorded in the trace, never returned as an error.
pub fn run_scenario(cfg: &ScenarioConfig, base_dir: &Path) -> Result<RunTrace> {
    cfg.validate()?;
    let s = &cfg.scenario;
    let k_nodes = s.nodes;
    let fs = s.sample_rate_hz;
    let planned = (s.duration_s * fs as f64).round() as usize;

    let (paths, paths_seed, est_seed) = resolve_paths(cfg, base_dir)?;
    let est_matrix = if s.algorithm.is_per_node() {
        None
    } else {
        let est = cfg.estimates.unwrap_or_default();
        Some(make_estimate_matrix(&paths, s.model_taps, est.mismatch, est.seed)?)
    };
    let (refs, noise_seed) = resolve_noise(cfg, base_dir, planned)?;
    let centers = resolve_centers(cfg, base_dir)?;
    let mu = resolve_mu(cfg, &paths, est_matrix.as_deref(), &refs, planned);
    let mut sensor = build_sensor_noise(cfg, &paths, &refs, planned, noise_seed);
    let mut bank = build_bank(cfg, &paths, est_matrix, centers, &mu)?;
    let mut plant = Plant::new(paths)?;

    let anse_block_len = (cfg.output.anse_block_s * fs as f64).round() as usize;
    let rnl_window_len = (s.rnl_interval_s * fs as f64).round() as usize;
    let tail_cap = planned.min((cfg.output.spectrum_tail_s * fs as f64).round() as usize);

    let mut x = vec![0.0; k_nodes];
    let mut y = vec![0.0; k_nodes];
    let mut d = vec![0.0; k_nodes];
    let mut e = vec![0.0; k_nodes];

    let mut anse = Vec::new();
    let mut e_pow = vec![0.0; k_nodes];
    let mut d_pow = vec![0.0; k_nodes];
    let mut block_fill = 0usize;

    let mut rnl_rows = Vec::new();
    let mut rnl_acc = vec![0.0; k_nodes];
    let mut rnl_fill = 0usize;

    let mut boosts: Vec<BoostEvent> = Vec::new();
    let mut tails: Vec<Vec<f64>> = vec![Vec::with_capacity(tail_cap); k_nodes];
    let mut samples = cfg.output.store_samples.then(SampleLog::default);
    if let Some(log) = &mut samples {
        log.x = vec![Vec::with_capacity(planned); k_nodes];
        log.d = vec![Vec::with_capacity(planned); k_nodes];
        log.e = vec![Vec::with_capacity(planned); k_nodes];
        log.y = vec![Vec::with_capacity(planned); k_nodes];
    }

    let mut plant_fault = None;
    let mut simulated = 0usize;
    for n in 0..planned {
        for (k, xk) in x.iter_mut().enumerate() {
            *xk = refs.node(k)[n];
        }
        match &mut bank {
            Bank::Nodes(nodes) => {
                for (node, (yk, &xk)) in nodes.iter_mut().zip(y.iter_mut().zip(&x)) {
                    *yk = node.output(xk);
                }
            }
            Bank::Central(c) => c.outputs(x[0], &mut y),
            Bank::Collocated(c) => c.outputs(&x, &mut y),
        }
        match plant.step(&x, &y, &mut d, &mut e) {
            Ok(()) => {}
            Err(AncError::NonFiniteControl { source_index }) => {
                plant_fault = Some(PlantFault { sample: n, source: source_index });
                break;
            }
            Err(other) => return Err(other),
        }
        if let Some(sensor) = &mut sensor {
            sensor.perturb(&mut e);
        }
        match &mut bank {
            Bank::Nodes(nodes) => {
                for (k, (node, &ek)) in nodes.iter_mut().zip(&e).enumerate() {
                    if let Some(record) = node.adapt(ek) {
                        boosts.push(BoostEvent {
                            sample: record.sample,
                            node: k,
                            old_eta_min: record.old_eta_min,
                            new_eta_min: record.new_eta_min,
                        });
                    }
                }
            }
            Bank::Central(c) => c.adapt(&e),
            Bank::Collocated(c) => c.adapt(&e),
        }

        for k in 0..k_nodes {
            e_pow[k] += e[k] * e[k];
            d_pow[k] += d[k] * d[k];
            rnl_acc[k] += rnl(e[k]);
        }
        block_fill += 1;
        if block_fill == anse_block_len {
            let block = anse_from_power(&e_pow, &d_pow);
            anse.push(AnseRow {
                block_index: anse.len(),
                time_s: (n + 1) as f64 / fs as f64,
                anse_db: block.mean_db,
                per_node_db: block.per_node_db,
                degenerate: block.degenerate,
            });
            e_pow.fill(0.0);
            d_pow.fill(0.0);
            block_fill = 0;
        }
        rnl_fill += 1;
        if rnl_fill == rnl_window_len {
            rnl_rows.push(RnlRow {
                window_index: rnl_rows.len(),
                time_s: (n + 1) as f64 / fs as f64,
                per_node_db: rnl_acc.iter().map(|a| a / rnl_window_len as f64).collect(),
            });
            rnl_acc.fill(0.0);
            rnl_fill = 0;
        }
        if tail_cap > 0 {
            let slot = n % tail_cap;
            for (tail, &ek) in tails.iter_mut().zip(&e) {
                if tail.len() < tail_cap {
                    tail.push(ek);
                } else {
                    tail[slot] = ek;
                }
            }
        }
        if let Some(log) = &mut samples {
            for k in 0..k_nodes {
                log.x[k].push(x[k]);
                log.d[k].push(d[k]);
                log.e[k].push(e[k]);
                log.y[k].push(y[k]);
            }
        }
        simulated = n + 1;
    }

    if tail_cap > 0 && simulated > tail_cap {
        let oldest = simulated % tail_cap;
        for tail in &mut tails {
            tail.rotate_left(oldest);
        }
    }

    let diverged: Vec<Option<usize>> = match &bank {
        Bank::Nodes(nodes) => nodes.iter().map(NodeController::diverged_at).collect(),
        Bank::Central(c) => vec![c.diverged_at(); k_nodes],
        Bank::Collocated(c) => vec![c.diverged_at(); k_nodes],
    };
    let (boost_counts, eta_min) = match &bank {
        Bank::Nodes(nodes) => (
            nodes.iter().map(NodeController::boost_count).collect(),
            nodes.iter().map(NodeController::eta_min).collect(),
        ),
        _ => (vec![0; k_nodes], vec![f64::INFINITY; k_nodes]),
    };

    Ok(RunTrace {
        nodes: k_nodes,
        sample_rate_hz: fs,
        planned_samples: planned,
        simulated_samples: simulated,
        anse_block_len,
        anse,
        rnl_window_len,
        rnl: rnl_rows,
        boosts,
        boost_counts,
        eta_min,
        diverged,
        plant_fault,
        resolved_mu: mu,
        sensor_sigma: sensor.map(|s| s.sigma),
        seeds: RunSeeds { noise: noise_seed, paths: paths_seed, estimates: est_seed },
        e_tail: tails,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{apply_override, config_from_table, parse_config_table};

    fn base_table(algorithm: &str, duration_s: f64) -> toml::Table {
        let text = format!(
            r#"
                [scenario]
                nodes = 2
                algorithm = "{algorithm}"
                duration_s = {duration_s}
                sample_rate_hz = 4000
                control_taps = 64
                model_taps = 32
                alpha = 50.0
                boost_interval_s = 0.25

                [noise]
                kind = "multitone"
                frequencies_hz = [350.0, 450.0]

                [paths]
                source = "synth"
                primary_len = 24
                secondary_len = 24
                delay_min = 2
                delay_max = 6
                coupling_gain = 0.2
                seed = 9
            "#
        );
        parse_config_table(&text).unwrap()
    }

    fn config(algorithm: &str, duration_s: f64) -> ScenarioConfig {
        config_from_table(base_table(algorithm, duration_s)).unwrap()
    }

    fn run(cfg: &ScenarioConfig) -> RunTrace {
        run_scenario(cfg, Path::new(".")).unwrap()
    }

    #[test]
    fn zero_duration_run_produces_an_empty_trace() {
        let trace = run(&config("sb-wcfxlms", 0.0));
        assert_eq!(trace.planned_samples, 0);
        assert_eq!(trace.simulated_samples, 0);
        assert!(trace.anse.is_empty());
        assert!(trace.rnl.is_empty());
        assert!(trace.boosts.is_empty());
        assert!(!trace.any_diverged());
        assert!(trace.final_anse_db().is_none());
    }

    #[test]
    fn identical_configs_produce_identical_traces() {
        let cfg = config("sb-wcfxlms", 1.0);
        assert_eq!(run(&cfg), run(&cfg));
    }

    #[test]
    fn block_and_window_counts_follow_the_configured_intervals() {
        let mut table = base_table("sb-wcfxlms", 1.6);
        apply_override(&mut table, "scenario.rnl_interval_s", toml::Value::Float(0.5)).unwrap();
        apply_override(&mut table, "output.anse_block_s", toml::Value::Float(0.25)).unwrap();
        let trace = run(&config_from_table(table).unwrap());
        // 1.6 s at 4 kHz: 6 complete 0.25-s blocks plus a remainder block
        // never emitted, and 3 complete 0.5-s windows.
        assert_eq!(trace.anse.len(), 6);
        assert_eq!(trace.rnl.len(), 3);
        assert_eq!(trace.anse_block_len, 1000);
        assert_eq!(trace.rnl_window_len, 2000);
        assert!((trace.anse[0].time_s - 0.25).abs() < 1e-12);
        assert!((trace.rnl[2].time_s - 1.5).abs() < 1e-12);
    }

    #[test]
    fn boost_events_chain_eta_min_downward() {
        let trace = run(&config("sb-wcfxlms", 2.0));
        assert!(!trace.boosts.is_empty(), "a converging run must boost");
        for (k, events) in (0..trace.nodes)
            .map(|k| (k, trace.boosts.iter().filter(|b| b.node == k).collect::<Vec<_>>()))
        {
            let mut last = f64::INFINITY;
            for event in &events {
                assert_eq!(event.old_eta_min, last, "node {k} chain broken");
                assert!(event.new_eta_min < event.old_eta_min);
                last = event.new_eta_min;
            }
            if !events.is_empty() {
                assert_eq!(trace.eta_min[k], last);
            }
            assert_eq!(trace.boost_counts[k], events.len() as u64);
        }
    }

    #[test]
    fn tonal_noise_is_suppressed_within_two_seconds() {
        let trace = run(&config("sb-wcfxlms", 2.0));
        let final_db = trace.final_anse_db().unwrap();
        assert!(final_db < -10.0, "final suppression only reached {final_db} dB");
        assert!(!trace.any_diverged());
    }

    #[test]
    fn per_sample_log_is_kept_only_on_request() {
        let mut table = base_table("sb-wcfxlms", 0.5);
        apply_override(&mut table, "output.store_samples", toml::Value::Boolean(true)).unwrap();
        let logged = run(&config_from_table(table).unwrap());
        let log = logged.samples.as_ref().unwrap();
        assert_eq!(log.e[0].len(), logged.simulated_samples);
        assert_eq!(log.d[1].len(), logged.simulated_samples);

        let plain = run(&config("sb-wcfxlms", 0.5));
        assert!(plain.samples.is_none());
    }

    #[test]
    fn error_equals_disturbance_when_the_step_is_zero() {
        let mut table = base_table("decentralized-fxlms", 0.5);
        apply_override(&mut table, "scenario.mu_bar", toml::Value::Float(0.0)).unwrap();
        apply_override(&mut table, "output.store_samples", toml::Value::Boolean(true)).unwrap();
        let trace = run(&config_from_table(table).unwrap());
        let log = trace.samples.as_ref().unwrap();
        for k in 0..trace.nodes {
            assert_eq!(log.e[k], log.d[k], "node {k} emitted control with mu 0");
            assert!(log.y[k].iter().all(|&v| v == 0.0));
        }
        for row in &trace.anse {
            assert!(row.anse_db.abs() < 1e-9, "zero control must sit at 0 dB");
        }
    }

    #[test]
    fn sensor_noise_floors_suppression_at_the_configured_ratio() {
        // With the control loop frozen (mu 0) and noise as strong as the
        // disturbance (0 dB SNR), block error power is disturbance power
        // plus an equal noise power: ANSE settles near +3.01 dB.
        let mut table = base_table("decentralized-fxlms", 2.0);
        apply_override(&mut table, "scenario.mu_bar", toml::Value::Float(0.0)).unwrap();
        apply_override(&mut table, "scenario.sensor_snr_db", toml::Value::Float(0.0)).unwrap();
        let trace = run(&config_from_table(table).unwrap());
        let sigma = trace.sensor_sigma.as_ref().unwrap();
        assert_eq!(sigma.len(), trace.nodes);
        assert!(sigma.iter().all(|&s| s > 0.0));
        let final_db = trace.final_anse_db().unwrap();
        assert!(
            (final_db - 3.01).abs() < 0.5,
            "0 dB SNR should double the block power, got {final_db} dB"
        );
    }

    #[test]
    fn sensor_noise_draws_identically_across_reruns() {
        let mut table = base_table("sb-wcfxlms", 1.0);
        apply_override(&mut table, "scenario.sensor_snr_db", toml::Value::Float(20.0)).unwrap();
        let cfg = config_from_table(table).unwrap();
        assert_eq!(run(&cfg), run(&cfg));
    }

    #[test]
    fn infinite_snr_matches_the_noiseless_run_bitwise() {
        let mut table = base_table("sb-wcfxlms", 1.0);
        apply_override(
            &mut table,
            "scenario.sensor_snr_db",
            toml::Value::Float(f64::INFINITY),
        )
        .unwrap();
        let silenced = run(&config_from_table(table).unwrap());
        let plain = run(&config("sb-wcfxlms", 1.0));
        assert!(silenced.sensor_sigma.is_none());
        assert_eq!(silenced.anse, plain.anse);
        assert_eq!(silenced.e_tail, plain.e_tail);
    }

    #[test]
    fn the_error_tail_holds_the_last_samples_in_order() {
        let mut table = base_table("sb-wcfxlms", 0.5);
        apply_override(&mut table, "output.store_samples", toml::Value::Boolean(true)).unwrap();
        apply_override(&mut table, "output.spectrum_tail_s", toml::Value::Float(0.1)).unwrap();
        let trace = run(&config_from_table(table).unwrap());
        let log = trace.samples.as_ref().unwrap();
        let tail_len = (0.1f64 * 4000.0).round() as usize;
        for k in 0..trace.nodes {
            assert_eq!(trace.e_tail[k].len(), tail_len);
            let expected = &log.e[k][log.e[k].len() - tail_len..];
            assert_eq!(trace.e_tail[k], expected, "node {k} tail out of order");
        }
    }

    #[test]
    fn all_algorithms_run_clean_on_a_mild_scenario() {
        for algorithm in
            ["decentralized-fxlms", "leaky", "wcfxlms", "sb-wcfxlms", "centralized"]
        {
            let trace = run(&config(algorithm, 0.5));
            assert_eq!(trace.simulated_samples, 2000, "{algorithm} stopped early");
            assert!(!trace.any_diverged(), "{algorithm} diverged");
        }
        let mut table = base_table("collocated-centralized", 0.5);
        apply_override(&mut table, "scenario.reference_mode", "per-node".into()).unwrap();
        let trace = run(&config_from_table(table).unwrap());
        assert!(!trace.any_diverged(), "collocated-centralized diverged");
    }

    #[test]
    fn decentralized_nodes_match_standalone_single_node_runs() {
        // With zero coupling each node of a 2-node run must reproduce the
        // corresponding single-node run exactly: same plant seed, same
        // reference, no interaction.
        let mut coupled = base_table("sb-wcfxlms", 0.5);
        apply_override(&mut coupled, "paths.coupling_gain", toml::Value::Float(0.0)).unwrap();
        apply_override(&mut coupled, "output.store_samples", toml::Value::Boolean(true)).unwrap();
        let cfg = config_from_table(coupled).unwrap();
        let trace = run(&cfg);

        let paths = match resolve_paths(&cfg, Path::new(".")) {
            Ok((paths, _, _)) => paths,
            Err(e) => panic!("resolve failed: {e}"),
        };
        for k in 0..2 {
            let single = paths.single_node(k);
            let dir = tempfile::tempdir().unwrap();
            let file = dir.path().join("single.txt");
            crate::acoustics::save_paths(&single, 4000, &file).unwrap();

            let mut table = base_table("sb-wcfxlms", 0.5);
            apply_override(&mut table, "scenario.nodes", toml::Value::Integer(1)).unwrap();
            apply_override(&mut table, "paths.source", "file".into()).unwrap();
            apply_override(&mut table, "paths.file", file.to_str().unwrap().into()).unwrap();
            for stale in ["primary_len", "secondary_len", "delay_min", "delay_max",
                          "decay_rate", "coupling_gain", "seed"]
            {
                table["paths"].as_table_mut().unwrap().remove(stale);
            }
            apply_override(&mut table, "output.store_samples", toml::Value::Boolean(true))
                .unwrap();
            let single_trace = run(&config_from_table(table).unwrap());

            let log = trace.samples.as_ref().unwrap();
            let single_log = single_trace.samples.as_ref().unwrap();
            assert_eq!(log.e[k], single_log.e[0], "node {k} error stream differs");
            assert_eq!(log.y[k], single_log.y[0], "node {k} control stream differs");
        }
    }
}
