//! Bit allocators: the closed-form single-task water-filling solution, the
//! scalarize-first and fit-first multi-task pipelines, and the equal /
//! proportional baseline splits.
//!
//! For a single surface the optimum has the reverse water-filling form
//!
//! ```text
//! R_j* = (1/beta_j) * [ log2(ln2 * alpha_j * beta_j) - log2(lambda) ]+
//! ```
//!
//! where the water level `log2(lambda)` is fixed by spending the whole
//! budget over the streams with positive rate. Streams whose marginal value
//! at zero rate already sits below the water level get nothing.

use crate::error::{Error, Result};
use crate::fit::{fit_surface, window_samples, FitConfig, MeasuredSample};
use crate::model::{
    evaluate_surface, Allocation, DistortionSurface, RateVector, TaskWeights, LN_2,
};

/// Per-stream side data used by the proportional baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamMeta {
    element_counts: Vec<u64>,
    element_variances: Vec<f64>,
}

impl StreamMeta {
    pub fn new(element_counts: Vec<u64>, element_variances: Vec<f64>) -> Result<Self> {
        if element_counts.is_empty() || element_counts.len() != element_variances.len() {
            return Err(Error::DimensionMismatch {
                expected: element_counts.len(),
                actual: element_variances.len(),
            });
        }
        if element_counts.contains(&0) {
            return Err(Error::InvalidInput("element counts must be positive".into()));
        }
        if element_variances.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::InvalidInput(
                "element variances must be positive".into(),
            ));
        }
        Ok(Self {
            element_counts,
            element_variances,
        })
    }

    pub fn element_counts(&self) -> &[u64] {
        &self.element_counts
    }

    pub fn element_variances(&self) -> &[f64] {
        &self.element_variances
    }
}

/// log2 of the zero-rate marginal value `ln2 * alpha_j * beta_j` per stream.
fn marginal_log2(surface: &DistortionSurface) -> Vec<f64> {
    surface
        .alphas()
        .iter()
        .zip(surface.betas())
        .map(|(&a, &b)| (LN_2 * a * b).log2())
        .collect()
}

/// Water level and rates for a fixed active set, spending the budget exactly.
///
/// Both water-filling entry points funnel through here so they produce
/// bit-identical results once they agree on the active set.
fn solve_on_active(
    surface: &DistortionSurface,
    active: &[usize],
    total_rate: f64,
) -> (f64, Vec<f64>) {
    let c = marginal_log2(surface);
    let betas = surface.betas();
    let mut inv_beta_sum = 0.0;
    let mut weighted_c_sum = 0.0;
    for &j in active {
        inv_beta_sum += 1.0 / betas[j];
        weighted_c_sum += c[j] / betas[j];
    }
    let water_level = (weighted_c_sum - total_rate) / inv_beta_sum;
    let mut rates = vec![0.0; surface.n_streams()];
    for &j in active {
        rates[j] = ((c[j] - water_level) / betas[j]).max(0.0);
    }
    (water_level, rates)
}

fn finish_allocation(
    surface: &DistortionSurface,
    water_level: f64,
    rates: Vec<f64>,
) -> Result<Allocation> {
    let rates = RateVector::new(rates)?;
    let active_set: Vec<usize> = rates
        .rates()
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > 0.0)
        .map(|(j, _)| j)
        .collect();
    let achieved = vec![evaluate_surface(surface, &rates)?];
    Ok(Allocation {
        rates,
        water_level_log2: water_level,
        active_set,
        achieved_distortions: achieved,
    })
}

/// Closed-form single-task allocation.
///
/// Streams sorted by their zero-rate marginal admit a prefix structure: the
/// optimal active set is the longest prefix whose water level stays below
/// every member's marginal. The scan below finds it in one pass.
pub fn waterfill_closed_form(surface: &DistortionSurface, total_rate: f64) -> Result<Allocation> {
    if !(total_rate.is_finite() && total_rate > 0.0) {
        return Err(Error::NonPositiveTotalRate(total_rate));
    }
    let c = marginal_log2(surface);
    let betas = surface.betas();
    let mut order: Vec<usize> = (0..surface.n_streams()).collect();
    order.sort_by(|&i, &j| c[j].partial_cmp(&c[i]).unwrap_or(std::cmp::Ordering::Equal));

    let mut inv_beta_sum = 0.0;
    let mut weighted_c_sum = 0.0;
    let mut best_len = 1;
    for (len, &j) in order.iter().enumerate() {
        inv_beta_sum += 1.0 / betas[j];
        weighted_c_sum += c[j] / betas[j];
        let level = (weighted_c_sum - total_rate) / inv_beta_sum;
        if c[j] > level {
            best_len = len + 1;
        }
    }
    let mut active: Vec<usize> = order[..best_len].to_vec();
    active.sort_unstable();
    let (water_level, rates) = solve_on_active(surface, &active, total_rate);
    finish_allocation(surface, water_level, rates)
}

/// Iterative realization of the same contract: start with every stream
/// active, deactivate those whose bracket goes negative, recompute, repeat.
/// Stabilizes in at most N passes and matches [`waterfill_closed_form`]
/// exactly.
pub fn active_set_waterfill(surface: &DistortionSurface, total_rate: f64) -> Result<Allocation> {
    if !(total_rate.is_finite() && total_rate > 0.0) {
        return Err(Error::NonPositiveTotalRate(total_rate));
    }
    let c = marginal_log2(surface);
    let mut active: Vec<usize> = (0..surface.n_streams()).collect();
    loop {
        let (level, _) = solve_on_active(surface, &active, total_rate);
        let keep: Vec<usize> = active.iter().cloned().filter(|&j| c[j] >= level).collect();
        if keep.len() == active.len() {
            // Streams sitting exactly at the water level carry zero rate;
            // drop them so the reported active set holds positive rates only.
            let positive: Vec<usize> = active.iter().cloned().filter(|&j| c[j] > level).collect();
            if positive.len() != active.len() && !positive.is_empty() {
                active = positive;
            }
            break;
        }
        active = keep;
    }
    let (water_level, rates) = solve_on_active(surface, &active, total_rate);
    finish_allocation(surface, water_level, rates)
}

/// Weighted-sum pipeline that combines measured distortions first:
/// `D_t = sum_i w_i D_i` per sample, one surface fitted to `D_t` over the
/// windowed samples, then the closed-form allocation of that surface.
pub fn scalarize_first(
    samples: &[MeasuredSample],
    weights: &TaskWeights,
    total_rate: f64,
    config: &FitConfig,
) -> Result<Allocation> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 4, got: 0 });
    }
    let n_tasks = samples[0].distortions().len();
    if n_tasks < 2 {
        return Err(Error::InvalidInput(
            "scalarize-first needs at least two task distortions per sample".into(),
        ));
    }
    if weights.len() != n_tasks {
        return Err(Error::DimensionMismatch {
            expected: n_tasks,
            actual: weights.len(),
        });
    }
    let windowed = window_samples(samples, total_rate)?;
    let scalarized: Vec<MeasuredSample> = windowed
        .iter()
        .map(|s| {
            let dt: f64 = s
                .distortions()
                .iter()
                .zip(weights.weights())
                .map(|(d, w)| d * w)
                .sum();
            MeasuredSample::new(s.rates().clone(), vec![dt])
        })
        .collect::<Result<_>>()?;
    let report = fit_surface(&scalarized, 0, config)?;
    waterfill_closed_form(&report.surface, total_rate)
}

/// Negative marginal of the weighted objective along stream `j`:
/// `phi_j(r) = ln2 * sum_i w_i alpha_ij beta_ij 2^(-beta_ij r)`.
fn weighted_marginal(surfaces: &[DistortionSurface], weights: &[f64], j: usize, r: f64) -> f64 {
    LN_2 * surfaces
        .iter()
        .zip(weights)
        .map(|(s, &w)| w * s.alphas()[j] * s.betas()[j] * (-s.betas()[j] * r).exp2())
        .sum::<f64>()
}

/// Rate at which stream `j`'s marginal equals `lambda`, clipped at zero.
fn rate_for_level(
    surfaces: &[DistortionSurface],
    weights: &[f64],
    j: usize,
    lambda: f64,
    total_rate: f64,
) -> f64 {
    if weighted_marginal(surfaces, weights, j, 0.0) <= lambda {
        return 0.0;
    }
    let mut hi = total_rate;
    let mut doubles = 0;
    while weighted_marginal(surfaces, weights, j, hi) > lambda && doubles < 64 {
        hi *= 2.0;
        doubles += 1;
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if weighted_marginal(surfaces, weights, j, mid) > lambda {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Minimizes the weighted sum of the task surfaces over the budget simplex.
///
/// The objective is separable per stream with strictly decreasing marginals,
/// so the solver runs nested bisection: the inner solve inverts each
/// stream's marginal at a trial water level, the outer solve adjusts the
/// level (in log2 space) until the rates spend the budget.
pub fn fit_first(
    surfaces: &[DistortionSurface],
    weights: &TaskWeights,
    total_rate: f64,
) -> Result<Allocation> {
    if surfaces.is_empty() {
        return Err(Error::InvalidInput("need at least one surface".into()));
    }
    if !(total_rate.is_finite() && total_rate > 0.0) {
        return Err(Error::NonPositiveTotalRate(total_rate));
    }
    let n = surfaces[0].n_streams();
    for s in surfaces {
        if s.n_streams() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: s.n_streams(),
            });
        }
    }
    if weights.len() != surfaces.len() {
        return Err(Error::DimensionMismatch {
            expected: surfaces.len(),
            actual: weights.len(),
        });
    }
    let w = weights.weights();

    // Bracket the water level: at max_j phi_j(0) nothing is funded, at
    // min_j phi_j(R_t) every stream wants the whole budget.
    let mut level_lo = f64::INFINITY;
    let mut level_hi = f64::NEG_INFINITY;
    for j in 0..n {
        level_lo = level_lo.min(weighted_marginal(surfaces, w, j, total_rate));
        level_hi = level_hi.max(weighted_marginal(surfaces, w, j, 0.0));
    }
    let mut lo = level_lo.log2();
    let mut hi = level_hi.log2();

    let sum_at = |log_lambda: f64| -> f64 {
        let lambda = log_lambda.exp2();
        (0..n)
            .map(|j| rate_for_level(surfaces, w, j, lambda, total_rate))
            .sum()
    };

    for _ in 0..110 {
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()).max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if sum_at(mid) > total_rate {
            // Water level too low; rates overspend.
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let water_level = 0.5 * (lo + hi);
    let lambda = water_level.exp2();
    let rates: Vec<f64> = (0..n)
        .map(|j| rate_for_level(surfaces, w, j, lambda, total_rate))
        .collect();
    let rates = RateVector::new(rates)?;
    let active_set: Vec<usize> = rates
        .rates()
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > 0.0)
        .map(|(j, _)| j)
        .collect();
    let achieved: Vec<f64> = surfaces
        .iter()
        .map(|s| evaluate_surface(s, &rates))
        .collect::<Result<_>>()?;
    Ok(Allocation {
        rates,
        water_level_log2: water_level,
        active_set,
        achieved_distortions: achieved,
    })
}

/// Method 1: every stream gets `total_rate / N`.
pub fn baseline_equal(n_streams: usize, total_rate: f64) -> Result<RateVector> {
    if n_streams == 0 {
        return Err(Error::InvalidInput("need at least one stream".into()));
    }
    if !(total_rate.is_finite() && total_rate > 0.0) {
        return Err(Error::NonPositiveTotalRate(total_rate));
    }
    RateVector::new(vec![total_rate / n_streams as f64; n_streams])
}

/// Methods 2 and 3: rates proportional to a per-stream quantity (element
/// count or element variance).
pub fn baseline_proportional(quantities: &[f64], total_rate: f64) -> Result<RateVector> {
    if quantities.is_empty() {
        return Err(Error::InvalidInput("need at least one stream".into()));
    }
    if !(total_rate.is_finite() && total_rate > 0.0) {
        return Err(Error::NonPositiveTotalRate(total_rate));
    }
    if quantities.iter().any(|&q| !(q.is_finite() && q > 0.0)) {
        return Err(Error::InvalidInput(
            "proportional quantities must be positive".into(),
        ));
    }
    let sum: f64 = quantities.iter().sum();
    RateVector::new(quantities.iter().map(|q| total_rate * q / sum).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn surface(gamma: f64, alphas: &[f64], betas: &[f64]) -> DistortionSurface {
        DistortionSurface::new(gamma, alphas.to_vec(), betas.to_vec()).unwrap()
    }

    #[test]
    fn single_stream_takes_full_budget() {
        let s = surface(0.0, &[3.0], &[0.7]);
        let a = waterfill_closed_form(&s, 5.0).unwrap();
        assert_eq!(a.rates.rates(), &[5.0]);
        assert_eq!(a.active_set, vec![0]);
    }

    #[test]
    fn symmetric_streams_split_evenly() {
        let s = surface(1.0, &[2.0, 2.0], &[0.4, 0.4]);
        let a = waterfill_closed_form(&s, 9.0).unwrap();
        assert_relative_eq!(a.rates.rates()[0], 4.5, max_relative = 1e-12);
        assert_relative_eq!(a.rates.rates()[1], 4.5, max_relative = 1e-12);
    }

    #[test]
    fn clipping_boundary_case() {
        // alpha=(4,1), beta=(1,1), R_t=2: stream 2's marginal exactly touches
        // the water level, so it gets zero rate.
        let s = surface(0.0, &[4.0, 1.0], &[1.0, 1.0]);
        let a = waterfill_closed_form(&s, 2.0).unwrap();
        assert_relative_eq!(a.rates.rates()[0], 2.0, max_relative = 1e-12);
        assert_eq!(a.rates.rates()[1], 0.0);
        assert_relative_eq!(a.water_level_log2, LN_2.log2(), max_relative = 1e-12);
        assert_eq!(a.active_set, vec![0]);

        // 1-D grid-search oracle along the budget line at step 1e-4.
        let mut best = f64::INFINITY;
        for i in 0..=20_000 {
            let r1 = i as f64 * 1e-4;
            let r = RateVector::new(vec![r1, 2.0 - r1]).unwrap();
            best = best.min(evaluate_surface(&s, &r).unwrap());
        }
        assert!(a.achieved_distortions[0] <= best + 1e-9);
    }

    #[test]
    fn active_set_matches_closed_form_exactly() {
        let cases = [
            surface(0.0, &[4.3, 1.1], &[0.9, 1.2]),
            surface(0.0, &[4.0, 1.05, 0.013], &[1.0, 0.97, 1.06]),
            surface(2.0, &[9.0, 0.3, 1.7], &[0.03, 0.8, 0.11]),
        ];
        for s in &cases {
            for rt in [0.51, 2.7, 31.0, 420.0] {
                let a = waterfill_closed_form(s, rt).unwrap();
                let b = active_set_waterfill(s, rt).unwrap();
                assert_eq!(a, b, "mismatch for rt={rt}");
            }
        }
    }

    #[test]
    fn weak_stream_deactivated() {
        let s = surface(0.0, &[4.0, 1.0, 0.01], &[1.0, 1.0, 1.0]);
        let a = active_set_waterfill(&s, 2.0).unwrap();
        assert_relative_eq!(a.rates.rates()[0], 2.0, max_relative = 1e-12);
        assert_eq!(a.rates.rates()[1], 0.0);
        assert_eq!(a.rates.rates()[2], 0.0);

        // Grid-search oracle over the 2-simplex at step 1e-3 of the budget.
        let step = 2.0 * 1e-3;
        let mut best = f64::INFINITY;
        let mut i = 0.0;
        while i <= 2.0 + 1e-12 {
            let mut j = 0.0;
            while i + j <= 2.0 + 1e-12 {
                let r = RateVector::new(vec![i, j, (2.0 - i - j).max(0.0)]).unwrap();
                best = best.min(evaluate_surface(&s, &r).unwrap());
                j += step;
            }
            i += step;
        }
        assert!(a.achieved_distortions[0] <= best + 1e-9);
    }

    #[test]
    fn generous_budget_keeps_all_streams() {
        let s = surface(0.0, &[4.0, 1.0, 0.2], &[1.0, 1.0, 1.0]);
        let a = waterfill_closed_form(&s, 50.0).unwrap();
        assert_eq!(a.active_set, vec![0, 1, 2]);
        assert!(a.rates.rates().iter().all(|&r| r > 0.0));
    }

    #[test]
    fn budget_spent_exactly() {
        let s = surface(1.5, &[7.0, 2.0, 0.5], &[0.02, 0.09, 0.31]);
        for rt in [1.0, 17.0, 230.0] {
            let a = waterfill_closed_form(&s, rt).unwrap();
            assert_relative_eq!(a.rates.total(), rt, max_relative = 1e-9);
        }
    }

    #[test]
    fn rejects_nonpositive_budget() {
        let s = surface(0.0, &[1.0], &[1.0]);
        assert!(matches!(
            waterfill_closed_form(&s, 0.0),
            Err(Error::NonPositiveTotalRate(_))
        ));
        assert!(matches!(
            fit_first(&[s], &TaskWeights::uniform(1).unwrap(), -1.0),
            Err(Error::NonPositiveTotalRate(_))
        ));
    }

    #[test]
    fn fit_first_single_task_matches_waterfill() {
        let s = surface(2.0, &[9.0, 0.3, 1.7], &[0.03, 0.8, 0.11]);
        let w = TaskWeights::uniform(1).unwrap();
        for rt in [0.5, 20.0, 300.0] {
            let a = waterfill_closed_form(&s, rt).unwrap();
            let b = fit_first(std::slice::from_ref(&s), &w, rt).unwrap();
            for (x, y) in a.rates.rates().iter().zip(b.rates.rates()) {
                assert!((x - y).abs() <= 1e-9 * rt, "rt={rt}: {x} vs {y}");
            }
            assert_relative_eq!(b.rates.total(), rt, max_relative = 1e-9);
        }
    }

    #[test]
    fn fit_first_one_hot_collapses_to_single_task() {
        let s1 = surface(1.0, &[8.0, 2.0], &[0.05, 0.02]);
        let s2 = surface(0.5, &[3.0, 6.0], &[0.01, 0.07]);
        let rt = 120.0;
        for (i, s) in [&s1, &s2].iter().enumerate() {
            let w = TaskWeights::one_hot(2, i).unwrap();
            let got = fit_first(&[s1.clone(), s2.clone()], &w, rt).unwrap();
            let want = waterfill_closed_form(s, rt).unwrap();
            for (x, y) in got.rates.rates().iter().zip(want.rates.rates()) {
                assert!((x - y).abs() <= 1e-8 * rt, "task {i}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn scalarize_first_identical_tasks_matches_single_task() {
        // Two identical task columns: the scalarized pipeline must reproduce
        // the single-task answer for any weights.
        let truth = surface(2.0, &[8.0, 3.0], &[0.02, 0.05]);
        let rt = 100.0;
        let mut samples = Vec::new();
        for i in 0..12 {
            for j in 0..12 {
                let r = RateVector::new(vec![i as f64 * 150.0 / 11.0, j as f64 * 150.0 / 11.0])
                    .unwrap();
                let d = evaluate_surface(&truth, &r).unwrap();
                samples.push(MeasuredSample::new(r, vec![d, d]).unwrap());
            }
        }
        let w = TaskWeights::new(vec![0.3, 0.7]).unwrap();
        let got = scalarize_first(&samples, &w, rt, &FitConfig::default()).unwrap();
        let want = waterfill_closed_form(&truth, rt).unwrap();
        for (x, y) in got.rates.rates().iter().zip(want.rates.rates()) {
            assert!((x - y).abs() <= 1e-3 * rt, "{x} vs {y}");
        }
    }

    #[test]
    fn baseline_equal_cases() {
        assert_eq!(baseline_equal(2, 50.0).unwrap().rates(), &[25.0, 25.0]);
        assert_eq!(baseline_equal(2, 1000.0).unwrap().rates(), &[500.0, 500.0]);
        assert_eq!(baseline_equal(3, 3.0).unwrap().rates(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn baseline_proportional_cases() {
        // 28*28*128 : 28*28*32 = 4 : 1.
        let counts = [(28 * 28 * 128) as f64, (28 * 28 * 32) as f64];
        assert_eq!(
            baseline_proportional(&counts, 50.0).unwrap().rates(),
            &[40.0, 10.0]
        );
        assert_eq!(
            baseline_proportional(&counts, 100.0).unwrap().rates(),
            &[80.0, 20.0]
        );
        assert_eq!(
            baseline_proportional(&[3.0, 1.0], 4.0).unwrap().rates(),
            &[3.0, 1.0]
        );
        assert!(baseline_proportional(&[1.0, 0.0], 4.0).is_err());
    }

    #[test]
    fn stream_meta_validation() {
        assert!(StreamMeta::new(vec![1, 2], vec![0.5, 1.5]).is_ok());
        assert!(StreamMeta::new(vec![0, 2], vec![0.5, 1.5]).is_err());
        assert!(StreamMeta::new(vec![1, 2], vec![0.5]).is_err());
        assert!(StreamMeta::new(vec![1, 2], vec![0.5, -0.1]).is_err());
    }
}
