//! Quantitative evaluation: residual noise level, block cancellation
//! ratios, and Welch spectral estimation.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{AncError, Result};

/// Floor added to squared amplitudes before taking logs, keeping an exact
/// zero at a finite -200 dB instead of negative infinity.
pub const RNL_EPS: f64 = 1e-20;

/// Residual noise level of one error sample, in dB.
pub fn rnl(e: f64) -> f64 {
    10.0 * (e * e + RNL_EPS).log10()
}

/// Mean of one window of per-sample residual noise levels. Callers pass
/// complete windows; an empty window is a caller bug.
pub fn avg_rnl(window: &[f64]) -> f64 {
    assert!(!window.is_empty(), "residual noise window must not be empty");
    window.iter().sum::<f64>() / window.len() as f64
}

/// One block of the cancellation time series: for each node the dB ratio of
/// residual to disturbance power over the block, and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct AnseBlock {
    pub mean_db: f64,
    pub per_node_db: Vec<f64>,
    /// Set when some node's disturbance power was exactly zero and the
    /// epsilon floor decided the ratio.
    pub degenerate: bool,
}

/// Cancellation ratio from per-node mean-square powers.
pub fn anse_from_power(e_power: &[f64], d_power: &[f64]) -> AnseBlock {
    assert!(
        !e_power.is_empty() && e_power.len() == d_power.len(),
        "need one residual and one disturbance power per node"
    );
    let mut per_node_db = Vec::with_capacity(e_power.len());
    let mut degenerate = false;
    for (&ep, &dp) in e_power.iter().zip(d_power) {
        if dp == 0.0 {
            degenerate = true;
        }
        per_node_db.push(10.0 * ((ep + RNL_EPS) / (dp + RNL_EPS)).log10());
    }
    let mean_db = per_node_db.iter().sum::<f64>() / per_node_db.len() as f64;
    AnseBlock {
        mean_db,
        per_node_db,
        degenerate,
    }
}

/// Cancellation ratio over one block of samples: `e[k]` and `d[k]` hold
/// node k's residual and disturbance for the block, equal lengths pairwise.
pub fn anse_block(e: &[&[f64]], d: &[&[f64]]) -> AnseBlock {
    assert!(
        !e.is_empty() && e.len() == d.len(),
        "need one residual and one disturbance block per node"
    );
    let mean_square = |block: &[f64]| -> f64 {
        assert!(!block.is_empty(), "blocks must not be empty");
        block.iter().map(|v| v * v).sum::<f64>() / block.len() as f64
    };
    let e_power: Vec<f64> = e.iter().map(|block| mean_square(block)).collect();
    let d_power: Vec<f64> = d
        .iter()
        .enumerate()
        .map(|(k, block)| {
            assert_eq!(block.len(), e[k].len(), "node {k} block lengths differ");
            mean_square(block)
        })
        .collect();
    anse_from_power(&e_power, &d_power)
}

/// One-sided power spectral density estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freq_hz: Vec<f64>,
    /// Linear power density per hertz.
    pub psd: Vec<f64>,
}

impl Spectrum {
    /// PSD in dB with the standard epsilon floor.
    pub fn psd_db(&self) -> Vec<f64> {
        self.psd.iter().map(|&p| 10.0 * (p + RNL_EPS).log10()).collect()
    }
}

/// Welch-averaged periodogram: Hann window, `overlap` as a fraction of the
/// segment in [0, 1), one-sided density normalization. Bin spacing is
/// fs / segment_len.
pub fn power_spectrum(
    samples: &[f64],
    sample_rate_hz: u32,
    segment_len: usize,
    overlap: f64,
) -> Result<Spectrum> {
    if sample_rate_hz == 0 {
        return Err(AncError::Spectrum("sample rate must be positive".into()));
    }
    if segment_len < 8 {
        return Err(AncError::Spectrum(format!(
            "segment length {segment_len} is too short (minimum 8)"
        )));
    }
    if segment_len > samples.len() {
        return Err(AncError::Spectrum(format!(
            "segment length {segment_len} exceeds signal length {}",
            samples.len()
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(AncError::Spectrum(format!(
            "overlap {overlap} must lie in [0, 1)"
        )));
    }

    let window: Vec<f64> = (0..segment_len)
        .map(|j| {
            0.5 * (1.0
                - (2.0 * std::f64::consts::PI * j as f64 / (segment_len - 1) as f64).cos())
        })
        .collect();
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let hop = ((segment_len as f64) * (1.0 - overlap)).round().max(1.0) as usize;

    let fft = FftPlanner::new().plan_fft_forward(segment_len);
    let n_bins = segment_len / 2 + 1;
    let mut acc = vec![0.0_f64; n_bins];
    let mut buf = vec![Complex::new(0.0, 0.0); segment_len];
    let mut n_segments = 0_usize;
    let mut start = 0_usize;
    while start + segment_len <= samples.len() {
        for (j, slot) in buf.iter_mut().enumerate() {
            *slot = Complex::new(samples[start + j] * window[j], 0.0);
        }
        fft.process(&mut buf);
        for (b, a) in acc.iter_mut().enumerate() {
            *a += buf[b].norm_sqr();
        }
        n_segments += 1;
        start += hop;
    }
    debug_assert!(n_segments >= 1, "length check guarantees one segment");

    let fs = f64::from(sample_rate_hz);
    let scale = 1.0 / (fs * window_power * n_segments as f64);
    let nyquist_bin = segment_len % 2 == 0;
    let psd: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(b, &a)| {
            let one_sided = if b == 0 || (nyquist_bin && b == n_bins - 1) {
                1.0
            } else {
                2.0
            };
            a * scale * one_sided
        })
        .collect();
    let freq_hz: Vec<f64> = (0..n_bins)
        .map(|b| b as f64 * fs / segment_len as f64)
        .collect();
    Ok(Spectrum { freq_hz, psd })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn residual_noise_level_reference_points() {
        assert!((rnl(1.0) - 0.0).abs() < 1e-12);
        assert!((rnl(10.0) - 20.0).abs() < 1e-12);
        assert!((rnl(0.0) - (-200.0)).abs() < 1e-12);
    }

    #[test]
    fn window_average_is_the_arithmetic_mean() {
        assert_eq!(avg_rnl(&[-20.0; 64]), -20.0);
        let half_and_half: Vec<f64> = std::iter::repeat(-10.0)
            .take(32)
            .chain(std::iter::repeat(-30.0).take(32))
            .collect();
        assert!((avg_rnl(&half_and_half) - (-20.0)).abs() < 1e-12);
    }

    #[test]
    fn window_means_compose_over_equal_windows() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(2);
        let a: Vec<f64> = (0..128).map(|_| rng.gen_range(-40.0..0.0)).collect();
        let b: Vec<f64> = (0..128).map(|_| rng.gen_range(-40.0..0.0)).collect();
        let joined: Vec<f64> = a.iter().chain(&b).copied().collect();
        let mean_of_means = (avg_rnl(&a) + avg_rnl(&b)) / 2.0;
        assert!((avg_rnl(&joined) - mean_of_means).abs() < 1e-12);
    }

    #[test]
    fn equal_blocks_give_zero_db() {
        let block = [0.5, -0.25, 0.125, 1.0];
        let result = anse_block(&[&block, &block], &[&block, &block]);
        assert!(result.mean_db.abs() < 1e-12, "mean {}", result.mean_db);
        assert!(!result.degenerate);
    }

    #[test]
    fn tenfold_amplitude_reduction_is_minus_twenty_db() {
        let d = [1.0, -2.0, 0.5, 0.25];
        let e: Vec<f64> = d.iter().map(|v| v / 10.0).collect();
        let result = anse_block(&[&e], &[&d]);
        assert!((result.mean_db + 20.0).abs() < 1e-9, "mean {}", result.mean_db);
    }

    #[test]
    fn node_ratios_average_in_the_db_domain() {
        // Ratios 0.01 and 1 average to (-20 + 0) / 2 = -10 dB.
        let d = [2.0, -1.0, 0.5];
        let e_tenth: Vec<f64> = d.iter().map(|v| v / 10.0).collect();
        let result = anse_block(&[&e_tenth, &d], &[&d, &d]);
        assert!((result.mean_db + 10.0).abs() < 1e-9, "mean {}", result.mean_db);
    }

    #[test]
    fn all_zero_disturbance_is_flagged_degenerate() {
        let zeros = [0.0; 8];
        let e = [0.1; 8];
        let result = anse_block(&[&e], &[&zeros]);
        assert!(result.degenerate);
        assert!(result.mean_db > 0.0);
    }

    #[test]
    fn anse_is_scale_invariant() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let d: Vec<f64> = (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let e: Vec<f64> = (0..256).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let base = anse_block(&[&e], &[&d]);
        let scale = 37.5;
        let e_scaled: Vec<f64> = e.iter().map(|v| v * scale).collect();
        let d_scaled: Vec<f64> = d.iter().map(|v| v * scale).collect();
        let scaled = anse_block(&[&e_scaled], &[&d_scaled]);
        assert!(
            (base.mean_db - scaled.mean_db).abs() < 1e-9,
            "{} vs {}",
            base.mean_db,
            scaled.mean_db
        );
    }

    #[test]
    fn tone_at_a_bin_center_stands_far_above_the_floor() {
        // 625 Hz at 16 kHz lands exactly on bin 160 of a 4096-point segment.
        let fs = 16000;
        let n = 1 << 14;
        let samples: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 625.0 * i as f64 / fs as f64).sin())
            .collect();
        let spec = power_spectrum(&samples, fs, 4096, 0.5).unwrap();
        let db = spec.psd_db();
        let peak_bin = 160;
        assert!((spec.freq_hz[peak_bin] - 625.0).abs() < 1e-9);
        let mut sorted = db.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = sorted[sorted.len() / 2];
        assert!(
            db[peak_bin] - median >= 40.0,
            "peak {} dB vs median {} dB",
            db[peak_bin],
            median
        );
    }

    #[test]
    fn white_noise_spectrum_is_flat_within_three_db() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(4);
        let samples: Vec<f64> = (0..(1 << 17))
            .map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng))
            .collect();
        let spec = power_spectrum(&samples, 16000, 4096, 0.5).unwrap();
        let db = spec.psd_db();
        // Skip the outermost bins where the one-sided scaling differs.
        let interior = &db[3..db.len() - 3];
        let mut sorted = interior.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = sorted[sorted.len() / 2];
        for (b, &v) in interior.iter().enumerate() {
            assert!(
                (v - median).abs() <= 3.0,
                "bin {}: {v} dB vs median {median} dB",
                b + 3
            );
        }
    }

    #[test]
    fn zero_signal_has_zero_power_everywhere() {
        let spec = power_spectrum(&vec![0.0; 8192], 16000, 1024, 0.5).unwrap();
        assert!(spec.psd.iter().all(|&p| p == 0.0));
        assert!(spec.psd_db().iter().all(|&v| (v + 200.0).abs() < 1e-12));
    }

    #[test]
    fn integrated_density_approximates_signal_power() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(8);
        let samples: Vec<f64> = (0..(1 << 15)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let power = samples.iter().map(|v| v * v).sum::<f64>() / samples.len() as f64;
        let spec = power_spectrum(&samples, 16000, 4096, 0.5).unwrap();
        let bin_width = spec.freq_hz[1] - spec.freq_hz[0];
        let integrated: f64 = spec.psd.iter().map(|p| p * bin_width).sum();
        assert!(
            (integrated / power - 1.0).abs() < 0.05,
            "integrated {integrated} vs power {power}"
        );
    }

    #[test]
    fn degenerate_spectrum_requests_are_rejected() {
        let samples = vec![0.0; 64];
        assert!(matches!(
            power_spectrum(&samples, 16000, 4, 0.5),
            Err(AncError::Spectrum(_))
        ));
        assert!(matches!(
            power_spectrum(&samples, 16000, 128, 0.5),
            Err(AncError::Spectrum(_))
        ));
        assert!(matches!(
            power_spectrum(&samples, 16000, 32, 1.0),
            Err(AncError::Spectrum(_))
        ));
        assert!(matches!(
            power_spectrum(&samples, 0, 32, 0.5),
            Err(AncError::Spectrum(_))
        ));
    }
}
