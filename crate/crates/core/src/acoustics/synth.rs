//! Synthetic plant generation and secondary-path model construction.
//!
//! Real measured responses are often unavailable, so the toolkit builds
//! exponentially decaying random FIRs: a random leading delay, Gaussian
//! taps shaped by exp(-decay_rate * j), unit energy on the primary paths
//! and the secondary diagonal, and off-diagonal energy scaled by a
//! coupling gain. Models of the diagonal paths are truncations of the true
//! responses with an optional seeded perturbation of prescribed relative
//! energy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{FirResponse, PathSet};
use crate::error::{AncError, Result};

/// Shape parameters for a synthetic plant.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSynthSpec {
    pub nodes: usize,
    pub primary_len: usize,
    pub secondary_len: usize,
    /// Inclusive bounds on the random leading delay, in samples.
    pub delay_min: usize,
    pub delay_max: usize,
    /// Exponential decay rate per tap after the delay.
    pub decay_rate: f64,
    /// Energy of each off-diagonal secondary path relative to unit diagonal
    /// energy. Zero produces a fully decoupled plant.
    pub coupling_gain: f64,
}

impl PathSynthSpec {
    /// Checks the parameter ranges; `synth_paths` calls this itself, so a
    /// direct call is only needed to validate early.
    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 {
            return Err(AncError::Config("synthetic plant needs at least one node".into()));
        }
        if self.primary_len == 0 || self.secondary_len == 0 {
            return Err(AncError::Config("path lengths must be at least one tap".into()));
        }
        if self.delay_min > self.delay_max {
            return Err(AncError::Config(format!(
                "delay_min {} exceeds delay_max {}",
                self.delay_min, self.delay_max
            )));
        }
        if self.delay_max >= self.primary_len || self.delay_max >= self.secondary_len {
            return Err(AncError::Config(format!(
                "delay_max {} leaves no taps after the delay (primary {}, secondary {})",
                self.delay_max, self.primary_len, self.secondary_len
            )));
        }
        if !(self.decay_rate.is_finite() && self.decay_rate >= 0.0) {
            return Err(AncError::Config(format!(
                "decay_rate must be finite and nonnegative, got {}",
                self.decay_rate
            )));
        }
        if !(self.coupling_gain.is_finite() && self.coupling_gain >= 0.0) {
            return Err(AncError::Config(format!(
                "coupling_gain must be finite and nonnegative, got {}",
                self.coupling_gain
            )));
        }
        Ok(())
    }
}

/// One random path: `delay` leading zeros, then Gaussian taps shaped by the
/// exponential envelope, rescaled to the requested total energy.
fn random_path(spec_len: usize, delay: usize, decay_rate: f64, target_energy: f64, rng: &mut ChaCha8Rng) -> FirResponse {
    let mut taps = vec![0.0; spec_len];
    for (j, tap) in taps[delay..].iter_mut().enumerate() {
        let white: f64 = StandardNormal.sample(rng);
        *tap = white * (-decay_rate * j as f64).exp();
    }
    let energy: f64 = taps.iter().map(|t| t * t).sum();
    if energy > 0.0 {
        let scale = (target_energy / energy).sqrt();
        for tap in &mut taps {
            *tap *= scale;
        }
    }
    FirResponse { taps }
}

/// Builds a deterministic synthetic plant. Draw order is fixed (primary
/// paths by node, then the secondary matrix row by row), so one seed pins
/// every coefficient. Off-diagonal draws are consumed even at zero
/// coupling, which keeps the diagonal identical across coupling settings.
pub fn synth_paths(spec: &PathSynthSpec, seed: u64) -> Result<PathSet> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = spec.nodes;

    let primary: Vec<FirResponse> = (0..k)
        .map(|_| {
            let delay = rng.gen_range(spec.delay_min..=spec.delay_max);
            random_path(spec.primary_len, delay, spec.decay_rate, 1.0, &mut rng)
        })
        .collect();

    let secondary: Vec<Vec<FirResponse>> = (0..k)
        .map(|sensor| {
            (0..k)
                .map(|source| {
                    let delay = rng.gen_range(spec.delay_min..=spec.delay_max);
                    let target_energy = if sensor == source {
                        1.0
                    } else {
                        spec.coupling_gain
                    };
                    random_path(spec.secondary_len, delay, spec.decay_rate, target_energy, &mut rng)
                })
                .collect()
        })
        .collect();

    let paths = PathSet {
        primary,
        secondary,
        estimates: Vec::new(),
    };
    paths.validate()?;
    Ok(paths)
}

/// Truncates `path` to `model_len` taps (zero-padding if the model is
/// longer) and, for a positive `mismatch`, adds a seeded Gaussian
/// perturbation scaled so that the perturbation energy is exactly
/// `mismatch` times the truncation energy.
fn perturbed_truncation(
    path: &FirResponse,
    model_len: usize,
    mismatch: f64,
    rng: &mut ChaCha8Rng,
) -> FirResponse {
    let mut taps: Vec<f64> = path.taps.iter().copied().take(model_len).collect();
    taps.resize(model_len, 0.0);
    if mismatch > 0.0 {
        let noise: Vec<f64> = (0..model_len).map(|_| StandardNormal.sample(rng)).collect();
        let base_energy: f64 = taps.iter().map(|t| t * t).sum();
        let noise_energy: f64 = noise.iter().map(|t| t * t).sum();
        if base_energy > 0.0 && noise_energy > 0.0 {
            let scale = (mismatch * base_energy / noise_energy).sqrt();
            for (tap, white) in taps.iter_mut().zip(&noise) {
                *tap += scale * white;
            }
        }
    }
    FirResponse { taps }
}

fn validate_model_request(model_len: usize, mismatch: f64) -> Result<()> {
    if model_len == 0 {
        return Err(AncError::Config("model length must be at least one tap".into()));
    }
    if !(mismatch.is_finite() && mismatch >= 0.0) {
        return Err(AncError::Config(format!(
            "mismatch must be finite and nonnegative, got {mismatch}"
        )));
    }
    Ok(())
}

/// Fills `paths.estimates` with per-node models of the diagonal secondary
/// paths. A zero mismatch consumes no randomness and yields the exact
/// truncation.
pub fn make_estimates(paths: &mut PathSet, model_len: usize, mismatch: f64, seed: u64) -> Result<()> {
    validate_model_request(model_len, mismatch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    paths.estimates = (0..paths.nodes())
        .map(|k| perturbed_truncation(&paths.secondary[k][k], model_len, mismatch, &mut rng))
        .collect();
    Ok(())
}

/// Models for every entry of the secondary matrix, row by row, for
/// controllers that use all cross paths. Indexed like `paths.secondary`:
/// `result[k][m]` models the path from source m to sensor k.
pub fn make_estimate_matrix(
    paths: &PathSet,
    model_len: usize,
    mismatch: f64,
    seed: u64,
) -> Result<Vec<Vec<FirResponse>>> {
    validate_model_request(model_len, mismatch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..paths.nodes())
        .map(|k| {
            (0..paths.nodes())
                .map(|m| perturbed_truncation(&paths.secondary[k][m], model_len, mismatch, &mut rng))
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustics::crosstalk_interference;

    fn spec(nodes: usize, coupling_gain: f64) -> PathSynthSpec {
        PathSynthSpec {
            nodes,
            primary_len: 64,
            secondary_len: 64,
            delay_min: 2,
            delay_max: 10,
            decay_rate: 0.05,
            coupling_gain,
        }
    }

    #[test]
    fn same_seed_reproduces_the_same_plant() {
        let a = synth_paths(&spec(3, 0.7), 99).unwrap();
        let b = synth_paths(&spec(3, 0.7), 99).unwrap();
        assert_eq!(a, b);
        let c = synth_paths(&spec(3, 0.7), 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn diagonal_paths_have_unit_energy() {
        let paths = synth_paths(&spec(4, 0.3), 5).unwrap();
        for k in 0..4 {
            assert!((paths.primary[k].energy() - 1.0).abs() < 1e-12);
            assert!((paths.secondary[k][k].energy() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn coupling_gain_sets_off_diagonal_energy() {
        let paths = synth_paths(&spec(3, 1.0), 8).unwrap();
        for k in 0..3 {
            for m in 0..3 {
                if k != m {
                    assert!(
                        (paths.secondary[k][m].energy() - 1.0).abs() < 1e-12,
                        "path ({k},{m})"
                    );
                }
            }
        }
    }

    #[test]
    fn zero_coupling_decouples_the_plant() {
        let paths = synth_paths(&spec(3, 0.0), 8).unwrap();
        for k in 0..3 {
            for m in 0..3 {
                if k != m {
                    assert_eq!(paths.secondary[k][m].energy(), 0.0, "path ({k},{m})");
                }
            }
        }
        let histories = vec![vec![1.0, -1.0, 0.5]; 3];
        for k in 0..3 {
            assert_eq!(crosstalk_interference(&paths, &histories, k), 0.0);
        }
    }

    #[test]
    fn coupling_setting_does_not_disturb_the_diagonal() {
        let weak = synth_paths(&spec(3, 0.0), 21).unwrap();
        let strong = synth_paths(&spec(3, 0.9), 21).unwrap();
        for k in 0..3 {
            assert_eq!(weak.primary[k], strong.primary[k]);
            assert_eq!(weak.secondary[k][k], strong.secondary[k][k]);
        }
    }

    #[test]
    fn leading_delays_stay_inside_the_requested_range() {
        let s = spec(4, 0.5);
        let paths = synth_paths(&s, 17).unwrap();
        for path in paths.primary.iter().chain(paths.secondary.iter().flatten()) {
            let first_nonzero = path.taps.iter().position(|&t| t != 0.0).unwrap();
            assert!(
                (s.delay_min..=s.delay_max).contains(&first_nonzero),
                "leading delay {first_nonzero}"
            );
        }
    }

    #[test]
    fn exact_model_of_an_equal_length_path_is_the_path_itself() {
        let mut paths = synth_paths(&spec(2, 0.4), 3).unwrap();
        make_estimates(&mut paths, 64, 0.0, 1).unwrap();
        for k in 0..2 {
            assert_eq!(paths.estimates[k], paths.secondary[k][k]);
        }
    }

    #[test]
    fn shorter_model_is_an_exact_truncation() {
        let mut paths = synth_paths(&spec(2, 0.4), 3).unwrap();
        make_estimates(&mut paths, 32, 0.0, 1).unwrap();
        for k in 0..2 {
            assert_eq!(paths.estimates[k].len(), 32);
            assert_eq!(paths.estimates[k].taps[..], paths.secondary[k][k].taps[..32]);
        }
    }

    #[test]
    fn mismatch_sets_the_relative_model_error_energy() {
        let mut paths = synth_paths(&spec(2, 0.4), 3).unwrap();
        make_estimates(&mut paths, 64, 0.1, 9).unwrap();
        for k in 0..2 {
            let truth = &paths.secondary[k][k];
            let error_energy: f64 = paths.estimates[k]
                .taps
                .iter()
                .zip(&truth.taps)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let ratio = error_energy / truth.energy();
            assert!(
                (ratio - 0.1).abs() <= 0.1 * 0.2,
                "node {k}: relative error energy {ratio}"
            );
        }
    }

    #[test]
    fn estimate_matrix_covers_every_path_with_the_diagonal_truncated() {
        let paths = synth_paths(&spec(3, 0.6), 4).unwrap();
        let matrix = make_estimate_matrix(&paths, 32, 0.0, 1).unwrap();
        assert_eq!(matrix.len(), 3);
        for k in 0..3 {
            assert_eq!(matrix[k].len(), 3);
            for m in 0..3 {
                assert_eq!(matrix[k][m].taps[..], paths.secondary[k][m].taps[..32]);
            }
        }
    }

    #[test]
    fn invalid_synthesis_parameters_are_rejected() {
        assert!(synth_paths(&PathSynthSpec { nodes: 0, ..spec(1, 0.0) }, 1).is_err());
        assert!(synth_paths(&PathSynthSpec { delay_min: 11, delay_max: 10, ..spec(2, 0.0) }, 1).is_err());
        assert!(synth_paths(&PathSynthSpec { delay_max: 64, ..spec(2, 0.0) }, 1).is_err());
        assert!(synth_paths(&PathSynthSpec { coupling_gain: -0.1, ..spec(2, 0.0) }, 1).is_err());
        let mut paths = synth_paths(&spec(2, 0.0), 1).unwrap();
        assert!(make_estimates(&mut paths, 0, 0.0, 1).is_err());
        assert!(make_estimates(&mut paths, 16, -1.0, 1).is_err());
    }
}
