//! Least-squares fitting of the exponential distortion-rate surface to
//! measured samples.
//!
//! The fitter is a damped Gauss-Newton (Levenberg-Marquardt) loop over the
//! parameters `(gamma, log alpha_j, log beta_j)`. Optimizing the logs keeps
//! `alpha` and `beta` strictly positive without constrained steps; `gamma`
//! is fitted unconstrained. The Jacobian is analytic. Because sums of
//! exponentials are multimodal in the decay rates, the fit restarts from
//! several perturbed initializations and keeps the lowest-cost result.

use crate::error::{Error, Result};
use crate::model::{DistortionSurface, RateVector, LN_2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Default lower multiplier of the fitting window around a target rate.
pub const DEFAULT_WINDOW_LOW: f64 = 0.75;
/// Default upper multiplier of the fitting window around a target rate.
pub const DEFAULT_WINDOW_HIGH: f64 = 1.25;

/// One measured observation: a rate tuple and the distortion of each task
/// at those rates (percent-drop units).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredSample {
    rates: RateVector,
    distortions: Vec<f64>,
}

impl MeasuredSample {
    pub fn new(rates: RateVector, distortions: Vec<f64>) -> Result<Self> {
        if distortions.is_empty() {
            return Err(Error::InvalidInput(
                "sample must carry at least one task distortion".into(),
            ));
        }
        for (i, &d) in distortions.iter().enumerate() {
            if !d.is_finite() || d < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "distortion {i} must be finite and nonnegative, got {d}"
                )));
            }
        }
        Ok(Self { rates, distortions })
    }

    pub fn rates(&self) -> &RateVector {
        &self.rates
    }

    pub fn distortions(&self) -> &[f64] {
        &self.distortions
    }
}

/// Knobs of the Levenberg-Marquardt loop and its multistart wrapper.
#[derive(Debug, Clone)]
pub struct FitConfig {
    /// Iteration cap for one start.
    pub max_iterations: usize,
    /// Initial damping factor.
    pub damping_init: f64,
    /// Damping multiplier applied when a step is rejected.
    pub damping_up: f64,
    /// Damping multiplier applied when a step is accepted.
    pub damping_down: f64,
    /// Relative cost-change threshold that counts as converged.
    pub convergence_tol: f64,
    /// Number of starts; the first uses the unperturbed initialization.
    pub multistart_count: usize,
    /// Seed for the multistart perturbations; fits are deterministic given it.
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            damping_init: 1e-3,
            damping_up: 10.0,
            damping_down: 0.1,
            convergence_tol: 1e-10,
            multistart_count: 8,
            seed: 0,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.max_iterations == 0
            || self.multistart_count == 0
            || !positive(self.damping_init)
            || !positive(self.damping_up)
            || !positive(self.damping_down)
            || !positive(self.convergence_tol)
        {
            return Err(Error::InvalidInput(
                "fit configuration values must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of a surface fit.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub surface: DistortionSurface,
    /// Coefficient of determination, `1 - SS_res / SS_tot`.
    pub r_squared: f64,
    /// Arithmetic mean of (measured - predicted).
    pub mean_residual: f64,
    /// Per-sample residuals (measured - predicted), in sample order.
    pub residuals: Vec<f64>,
    pub n_samples_used: usize,
    /// Iterations taken by the winning start.
    pub iterations: usize,
    pub converged: bool,
}

/// Keeps the samples whose rate sums fall in the closed interval
/// `[low_mult * total_rate, high_mult * total_rate]`, preserving order.
pub fn window_samples_with(
    samples: &[MeasuredSample],
    total_rate: f64,
    low_mult: f64,
    high_mult: f64,
) -> Result<Vec<MeasuredSample>> {
    if !(total_rate.is_finite() && total_rate > 0.0) {
        return Err(Error::NonPositiveTotalRate(total_rate));
    }
    if !(low_mult > 0.0 && high_mult >= low_mult) {
        return Err(Error::InvalidInput(format!(
            "window multipliers must satisfy 0 < low <= high, got ({low_mult}, {high_mult})"
        )));
    }
    let lo = low_mult * total_rate;
    let hi = high_mult * total_rate;
    Ok(samples
        .iter()
        .filter(|s| {
            let sum = s.rates().total();
            sum >= lo && sum <= hi
        })
        .cloned()
        .collect())
}

/// [`window_samples_with`] at the default 0.75-1.25 window.
pub fn window_samples(samples: &[MeasuredSample], total_rate: f64) -> Result<Vec<MeasuredSample>> {
    window_samples_with(samples, total_rate, DEFAULT_WINDOW_LOW, DEFAULT_WINDOW_HIGH)
}

/// Coefficient of multiple determination, `1 - SS_res / SS_tot`.
///
/// Rejects empty or mismatched inputs and constant `measured` (zero total
/// variance makes the ratio undefined).
pub fn r_squared(measured: &[f64], predicted: &[f64]) -> Result<f64> {
    if measured.is_empty() {
        return Err(Error::InvalidInput("empty measurement vector".into()));
    }
    if measured.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: measured.len(),
            actual: predicted.len(),
        });
    }
    let mean = measured.iter().sum::<f64>() / measured.len() as f64;
    let ss_tot: f64 = measured.iter().map(|m| (m - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ZeroTotalVariance);
    }
    let ss_res: f64 = measured
        .iter()
        .zip(predicted)
        .map(|(m, p)| (m - p).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Fits one task's surface to the samples and reports fit quality.
///
/// Requires at least `2N + 2` samples for `N` streams (the model has
/// `2N + 1` unknowns). Non-convergence within the iteration budget is
/// reported through `converged = false`, not as an error.
pub fn fit_surface(
    samples: &[MeasuredSample],
    task_index: usize,
    config: &FitConfig,
) -> Result<FitReport> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 4, got: 0 });
    }
    let n_streams = samples[0].rates().len();
    let n_tasks = samples[0].distortions().len();
    if task_index >= n_tasks {
        return Err(Error::InvalidInput(format!(
            "task index {task_index} out of range for {n_tasks} tasks"
        )));
    }
    for s in samples {
        if s.rates().len() != n_streams {
            return Err(Error::DimensionMismatch {
                expected: n_streams,
                actual: s.rates().len(),
            });
        }
        if s.distortions().len() != n_tasks {
            return Err(Error::DimensionMismatch {
                expected: n_tasks,
                actual: s.distortions().len(),
            });
        }
    }
    let needed = 2 * n_streams + 2;
    if samples.len() < needed {
        return Err(Error::TooFewSamples {
            needed,
            got: samples.len(),
        });
    }

    let rates: Vec<&[f64]> = samples.iter().map(|s| s.rates().rates()).collect();
    let measured: Vec<f64> = samples.iter().map(|s| s.distortions()[task_index]).collect();

    let d_min = measured.iter().cloned().fold(f64::INFINITY, f64::min);
    let d_max = measured.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if d_max == d_min {
        return Err(Error::ZeroTotalVariance);
    }

    // Heuristic start: offset at the observed floor, amplitude split evenly
    // across streams, decay set to halve a term over each stream's span.
    let mut beta0 = vec![0.0; n_streams];
    for j in 0..n_streams {
        let r_min = rates.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
        let r_max = rates.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
        let span = if r_max > r_min { r_max - r_min } else { r_max.max(1.0) };
        beta0[j] = LN_2 / span;
    }
    let gamma0 = d_min;
    let alpha0 = (d_max - d_min) / n_streams as f64;

    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut best: Option<LmRun> = None;
    for start in 0..config.multistart_count {
        let mut params = LmParams {
            gamma: gamma0,
            log_alpha: vec![alpha0.ln(); n_streams],
            log_beta: beta0.iter().map(|b| b.ln()).collect(),
        };
        if start > 0 {
            // Multiplicative perturbations, log-uniform in [0.25, 4].
            let factor = |rng: &mut ChaCha20Rng| {
                let u: f64 = rng.gen();
                0.25 * 16f64.powf(u)
            };
            params.gamma *= factor(&mut rng);
            for v in params.log_alpha.iter_mut().chain(params.log_beta.iter_mut()) {
                *v += factor(&mut rng).ln();
            }
        }
        let run = lm_minimize(&rates, &measured, params, config);
        let better = match &best {
            None => true,
            Some(b) => run.cost < b.cost,
        };
        if better {
            best = Some(run);
        }
    }
    let best = best.expect("multistart_count >= 1");

    let surface = DistortionSurface::new(
        best.params.gamma,
        best.params.log_alpha.iter().map(|u| u.exp()).collect(),
        best.params.log_beta.iter().map(|v| v.exp()).collect(),
    )?;
    let predicted: Vec<f64> = rates.iter().map(|r| predict(&best.params, r)).collect();
    let residuals: Vec<f64> = measured
        .iter()
        .zip(&predicted)
        .map(|(m, p)| m - p)
        .collect();
    let mean_residual = residuals.iter().sum::<f64>() / residuals.len() as f64;
    let r2 = r_squared(&measured, &predicted)?;

    Ok(FitReport {
        surface,
        r_squared: r2,
        mean_residual,
        residuals,
        n_samples_used: samples.len(),
        iterations: best.iterations,
        converged: best.converged,
    })
}

#[derive(Debug, Clone)]
struct LmParams {
    gamma: f64,
    log_alpha: Vec<f64>,
    log_beta: Vec<f64>,
}

struct LmRun {
    params: LmParams,
    cost: f64,
    iterations: usize,
    converged: bool,
}

fn predict(p: &LmParams, rates: &[f64]) -> f64 {
    let mut d = p.gamma;
    for (j, &r) in rates.iter().enumerate() {
        d += p.log_alpha[j].exp() * (-p.log_beta[j].exp() * r).exp2();
    }
    d
}

fn cost_of(p: &LmParams, rates: &[&[f64]], measured: &[f64]) -> f64 {
    rates
        .iter()
        .zip(measured)
        .map(|(r, m)| {
            let e = m - predict(p, r);
            e * e
        })
        .sum()
}

#[allow(clippy::needless_range_loop)]
fn lm_minimize(rates: &[&[f64]], measured: &[f64], init: LmParams, config: &FitConfig) -> LmRun {
    let n_streams = init.log_alpha.len();
    let n_params = 2 * n_streams + 1;
    let mut params = init;
    let mut cost = cost_of(&params, rates, measured);
    let mut damping = config.damping_init;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..config.max_iterations {
        iterations = iter + 1;

        // Normal equations J^T J and J^T e for residuals e = measured - model.
        let mut jtj = vec![vec![0.0; n_params]; n_params];
        let mut jte = vec![0.0; n_params];
        for (r, &m) in rates.iter().zip(measured) {
            let mut row = vec![0.0; n_params];
            row[0] = 1.0; // d model / d gamma
            let mut model = params.gamma;
            for j in 0..n_streams {
                let alpha = params.log_alpha[j].exp();
                let beta = params.log_beta[j].exp();
                let term = alpha * (-beta * r[j]).exp2();
                model += term;
                row[1 + j] = term; // d model / d log alpha_j
                row[1 + n_streams + j] = -LN_2 * r[j] * beta * term; // d model / d log beta_j
            }
            let e = m - model;
            for a in 0..n_params {
                jte[a] += row[a] * e;
                for b in a..n_params {
                    jtj[a][b] += row[a] * row[b];
                }
            }
        }
        for a in 0..n_params {
            for b in 0..a {
                jtj[a][b] = jtj[b][a];
            }
        }

        // Marquardt scaling: damp the diagonal.
        let mut system = jtj.clone();
        for a in 0..n_params {
            system[a][a] += damping * jtj[a][a].max(1e-12);
        }

        let mut step = match solve_linear(system, jte.clone()) {
            Some(s) => s,
            None => {
                damping *= config.damping_up;
                continue;
            }
        };

        // Cap the log-parameter movement per iteration; an uncapped
        // Gauss-Newton step on a flat direction can otherwise drive a
        // stream's amplitude to zero in one jump, after which its Jacobian
        // column vanishes and the stream never recovers.
        let log_step_max = step[1..]
            .iter()
            .fold(0.0f64, |acc, s| acc.max(s.abs()));
        if log_step_max > 5.0 {
            let scale = 5.0 / log_step_max;
            for s in &mut step {
                *s *= scale;
            }
        }

        let clamp = |v: f64| v.clamp(-60.0, 60.0);
        let trial = LmParams {
            gamma: params.gamma + step[0],
            log_alpha: (0..n_streams)
                .map(|j| clamp(params.log_alpha[j] + step[1 + j]))
                .collect(),
            log_beta: (0..n_streams)
                .map(|j| clamp(params.log_beta[j] + step[1 + n_streams + j]))
                .collect(),
        };
        let trial_cost = cost_of(&trial, rates, measured);

        let rel_change = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
        if trial_cost.is_finite() && trial_cost < cost {
            params = trial;
            cost = trial_cost;
            damping = (damping * config.damping_down).max(1e-300);
            if rel_change < config.convergence_tol || cost == 0.0 {
                converged = true;
                break;
            }
        } else {
            // A rejected step that barely moves the cost means the
            // remaining improvement is below tolerance.
            if trial_cost.is_finite() && rel_change.abs() < config.convergence_tol {
                converged = true;
                break;
            }
            damping *= config.damping_up;
            if !damping.is_finite() {
                break;
            }
        }
    }

    LmRun {
        params,
        cost,
        iterations,
        converged,
    }
}

/// Gaussian elimination with partial pivoting; `None` on a singular system.
#[allow(clippy::needless_range_loop)]
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
        if !x[col].is_finite() {
            return None;
        }
    }
    Some(x)
}
