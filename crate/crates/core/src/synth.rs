//! Ground-truth system generation for testing fits and allocators without
//! measured data.
//!
//! Surfaces are drawn from configurable parameter ranges; rate tuples are
//! drawn so their sums cover `[0.5 * rate_min, 1.5 * rate_max]` uniformly,
//! wider than the target-rate range so windowed fits have support on both
//! sides. The split of each sum across streams is uniform on the simplex.

use crate::error::{Error, Result};
use crate::fit::MeasuredSample;
use crate::model::{evaluate_surface, DistortionSurface, RateVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Inclusive `(low, high)` range of one scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRange {
    pub low: f64,
    pub high: f64,
}

impl ParamRange {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !(low.is_finite() && high.is_finite() && low <= high) {
            return Err(Error::InvalidInput(format!(
                "range must satisfy low <= high, got ({low}, {high})"
            )));
        }
        Ok(Self { low, high })
    }

    fn sample(&self, rng: &mut ChaCha20Rng) -> f64 {
        if self.low == self.high {
            self.low
        } else {
            rng.gen_range(self.low..self.high)
        }
    }
}

/// Recipe for one synthetic system.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_streams: usize,
    pub n_tasks: usize,
    pub gamma_range: ParamRange,
    pub alpha_range: ParamRange,
    pub beta_range: ParamRange,
    /// Target total-rate range `(rate_min, rate_max)`; sums are sampled on
    /// `[0.5 * rate_min, 1.5 * rate_max]`.
    pub rate_range: ParamRange,
    pub n_samples: usize,
    /// Noise half-width as a fraction of each task's distortion range.
    pub noise_fraction: f64,
    pub seed: u64,
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.n_streams == 0 || self.n_tasks == 0 {
            return Err(Error::InvalidInput(
                "system needs at least one stream and one task".into(),
            ));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidInput("n_samples must be at least 1".into()));
        }
        if !(self.noise_fraction.is_finite() && self.noise_fraction >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "noise fraction must be nonnegative, got {}",
                self.noise_fraction
            )));
        }
        if self.gamma_range.low < 0.0 {
            return Err(Error::InvalidInput("gamma range must be nonnegative".into()));
        }
        if self.alpha_range.low <= 0.0 || self.beta_range.low <= 0.0 {
            return Err(Error::InvalidInput(
                "alpha and beta ranges must be positive".into(),
            ));
        }
        if self.rate_range.low <= 0.0 {
            return Err(Error::InvalidInput("rate range must be positive".into()));
        }
        Ok(())
    }
}

/// Draws the ground-truth surfaces and the measured samples of one system.
/// Deterministic given the seed. With zero noise the samples lie exactly on
/// the surfaces; otherwise each task's distortions get additive noise
/// uniform on `[-m, m]` with `m = noise_fraction * (task distortion range)`,
/// clipped so distortions stay nonnegative.
pub fn generate_system(spec: &SynthSpec) -> Result<(Vec<DistortionSurface>, Vec<MeasuredSample>)> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);

    let surfaces: Vec<DistortionSurface> = (0..spec.n_tasks)
        .map(|_| {
            let gamma = spec.gamma_range.sample(&mut rng);
            let alphas: Vec<f64> = (0..spec.n_streams)
                .map(|_| spec.alpha_range.sample(&mut rng))
                .collect();
            let betas: Vec<f64> = (0..spec.n_streams)
                .map(|_| spec.beta_range.sample(&mut rng))
                .collect();
            DistortionSurface::new(gamma, alphas, betas)
        })
        .collect::<Result<_>>()?;

    let sum_lo = 0.5 * spec.rate_range.low;
    let sum_hi = 1.5 * spec.rate_range.high;
    let mut rate_tuples = Vec::with_capacity(spec.n_samples);
    for _ in 0..spec.n_samples {
        let sum = rng.gen_range(sum_lo..=sum_hi);
        // Uniform simplex split via normalized unit exponentials.
        let raw: Vec<f64> = (0..spec.n_streams)
            .map(|_| -(1.0 - rng.gen::<f64>()).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        rate_tuples.push(RateVector::new(
            raw.iter().map(|&x| sum * x / total).collect(),
        )?);
    }

    let clean: Vec<Vec<f64>> = rate_tuples
        .iter()
        .map(|r| {
            surfaces
                .iter()
                .map(|s| evaluate_surface(s, r))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut samples = Vec::with_capacity(spec.n_samples);
    if spec.noise_fraction == 0.0 {
        for (rates, dists) in rate_tuples.into_iter().zip(clean) {
            samples.push(MeasuredSample::new(rates, dists)?);
        }
    } else {
        let mut magnitudes = vec![0.0; spec.n_tasks];
        for (i, m) in magnitudes.iter_mut().enumerate() {
            let lo = clean.iter().map(|d| d[i]).fold(f64::INFINITY, f64::min);
            let hi = clean.iter().map(|d| d[i]).fold(f64::NEG_INFINITY, f64::max);
            *m = spec.noise_fraction * (hi - lo);
        }
        for (rates, dists) in rate_tuples.into_iter().zip(clean) {
            let noisy: Vec<f64> = dists
                .iter()
                .zip(&magnitudes)
                .map(|(&d, &m)| {
                    let noise = if m > 0.0 { rng.gen_range(-m..=m) } else { 0.0 };
                    (d + noise).max(0.0)
                })
                .collect();
            samples.push(MeasuredSample::new(rates, noisy)?);
        }
    }

    Ok((surfaces, samples))
}
