//! Shared fixtures for the benchmark targets.

use rdalloc_core::fit::MeasuredSample;
use rdalloc_core::model::DistortionSurface;
use rdalloc_core::synth::{generate_system, ParamRange, SynthSpec};

/// A deterministic synthetic system for benchmarking.
pub fn fixture(n_streams: usize, n_tasks: usize, n_samples: usize, seed: u64)
    -> (Vec<DistortionSurface>, Vec<MeasuredSample>)
{
    let spec = SynthSpec {
        n_streams,
        n_tasks,
        gamma_range: ParamRange::new(0.0, 10.0).unwrap(),
        alpha_range: ParamRange::new(1.0, 30.0).unwrap(),
        beta_range: ParamRange::new(0.01, 0.08).unwrap(),
        rate_range: ParamRange::new(50.0, 150.0).unwrap(),
        n_samples,
        noise_fraction: 0.0,
        seed,
    };
    generate_system(&spec).unwrap()
}
