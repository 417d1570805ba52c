//! Reference and disturbance waveforms: deterministic multi-tone sums,
//! seeded band-limited noise, and mono wave-file ingestion.
//!
//! Amplitudes are dimensionless with a nominal full scale of one. Every
//! generator is a pure function of its arguments, seeds included, so equal
//! inputs produce bit-identical output.

use std::f64::consts::PI;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::acoustics::Convolver;
use crate::error::{AncError, Result};

/// Filter order of the band-pass FIR used by the band-limited noise
/// generator (windowed-sinc design, Hamming window, order + 1 taps).
pub const BANDPASS_ORDER: usize = 512;

/// A sampled waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl Signal {
    /// Root mean square amplitude, zero for an empty signal.
    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let power: f64 = self.samples.iter().map(|s| s * s).sum();
        (power / self.samples.len() as f64).sqrt()
    }
}

/// One sinusoidal component of a multi-tone source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneSpec {
    pub frequency_hz: f64,
    pub amplitude: f64,
    pub phase_rad: f64,
}

impl ToneSpec {
    /// Unit-amplitude, zero-phase tone.
    pub fn unit(frequency_hz: f64) -> Self {
        ToneSpec {
            frequency_hz,
            amplitude: 1.0,
            phase_rad: 0.0,
        }
    }
}

/// Sum of sinusoids: `samples[n]` = sum over tones of amp * sin(2 pi f n / fs + phase).
///
/// Every tone frequency must lie strictly inside (0, fs/2).
pub fn gen_multitone(tones: &[ToneSpec], sample_rate_hz: u32, n_samples: usize) -> Result<Signal> {
    if sample_rate_hz == 0 {
        return Err(AncError::Config("sample rate must be positive".into()));
    }
    let nyquist = sample_rate_hz as f64 / 2.0;
    for tone in tones {
        if !(tone.frequency_hz > 0.0 && tone.frequency_hz < nyquist) {
            return Err(AncError::NyquistViolation {
                freq_hz: tone.frequency_hz,
                nyquist_hz: nyquist,
            });
        }
        if !tone.amplitude.is_finite() || !tone.phase_rad.is_finite() {
            return Err(AncError::Config(format!(
                "tone at {} Hz has a non-finite amplitude or phase",
                tone.frequency_hz
            )));
        }
    }
    let mut samples = vec![0.0; n_samples];
    for tone in tones {
        let step = 2.0 * PI * tone.frequency_hz / sample_rate_hz as f64;
        for (n, s) in samples.iter_mut().enumerate() {
            *s += tone.amplitude * (step * n as f64 + tone.phase_rad).sin();
        }
    }
    Ok(Signal {
        samples,
        sample_rate_hz,
    })
}

/// Seeded Gaussian noise shaped by a linear-phase band-pass FIR and rescaled
/// to `target_rms`. Requires 0 < low_hz < high_hz < fs/2.
///
/// The returned stream starts at the filter's startup transient; over the
/// signal lengths used in simulations the transient is a negligible
/// fraction of the total energy.
pub fn gen_bandlimited_noise(
    low_hz: f64,
    high_hz: f64,
    sample_rate_hz: u32,
    n_samples: usize,
    seed: u64,
    target_rms: f64,
) -> Result<Signal> {
    if sample_rate_hz == 0 {
        return Err(AncError::Config("sample rate must be positive".into()));
    }
    let nyquist = sample_rate_hz as f64 / 2.0;
    if !(low_hz > 0.0 && low_hz < high_hz && high_hz < nyquist) {
        return Err(AncError::InvalidBand {
            low_hz,
            high_hz,
            sample_rate_hz,
        });
    }
    if !(target_rms.is_finite() && target_rms >= 0.0) {
        return Err(AncError::Config(format!(
            "target_rms must be finite and nonnegative, got {target_rms}"
        )));
    }

    let taps = bandpass_taps(low_hz, high_hz, sample_rate_hz, BANDPASS_ORDER);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut conv = Convolver::new(taps.len());
    let mut samples: Vec<f64> = (0..n_samples)
        .map(|_| {
            let white: f64 = StandardNormal.sample(&mut rng);
            conv.step(&taps, white)
        })
        .collect();

    let power: f64 = samples.iter().map(|s| s * s).sum();
    if power > 0.0 {
        let scale = target_rms / (power / n_samples as f64).sqrt();
        for s in &mut samples {
            *s *= scale;
        }
    }
    Ok(Signal {
        samples,
        sample_rate_hz,
    })
}

/// Windowed-sinc band-pass design: difference of two low-pass prototypes
/// under a Hamming window. `order` must be even so the response stays
/// symmetric around a whole-sample group delay of order/2.
pub fn bandpass_taps(low_hz: f64, high_hz: f64, sample_rate_hz: u32, order: usize) -> Vec<f64> {
    assert!(order >= 2 && order % 2 == 0, "band-pass order must be even");
    let fs = sample_rate_hz as f64;
    let fl = low_hz / fs;
    let fh = high_hz / fs;
    let mid = order as f64 / 2.0;
    (0..=order)
        .map(|j| {
            let t = j as f64 - mid;
            let ideal = 2.0 * fh * sinc(2.0 * fh * t) - 2.0 * fl * sinc(2.0 * fl * t);
            let window = 0.54 - 0.46 * (2.0 * PI * j as f64 / order as f64).cos();
            ideal * window
        })
        .collect()
}

fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        (PI * t).sin() / (PI * t)
    }
}

/// Reads a RIFF/WAVE file: 16-bit integer or 32-bit float PCM, first channel
/// only. Integer samples are normalized by 2^15 to nominal full scale.
pub fn load_wave_file(path: &Path) -> Result<Signal> {
    let mut reader = hound::WavReader::open(path).map_err(|e| AncError::WaveFormat(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels == 0 {
        return Err(AncError::WaveFormat("file declares zero channels".into()));
    }
    let channels = spec.channels as usize;

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| AncError::WaveFormat(e.to_string()))?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| AncError::WaveFormat(e.to_string()))?,
        (format, bits) => {
            return Err(AncError::WaveFormat(format!(
                "unsupported encoding: {bits}-bit {format:?}; expected 16-bit integer or 32-bit float"
            )));
        }
    };
    if interleaved.len() % channels != 0 {
        return Err(AncError::WaveFormat(
            "sample count is not a whole number of frames".into(),
        ));
    }

    let samples = interleaved.iter().step_by(channels).copied().collect();
    Ok(Signal {
        samples,
        sample_rate_hz: spec.sample_rate,
    })
}
