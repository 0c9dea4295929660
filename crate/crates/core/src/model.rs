//! Domain types and the pure evaluation math the rest of the crate builds on.
//!
//! A task's quality loss is expressed as a percentage drop relative to its
//! uncompressed baseline, and the dependence of that loss on the per-stream
//! bit rates is modeled by a sum of decaying exponentials:
//!
//! ```text
//! D(R_1, ..., R_N) = gamma + sum_j alpha_j * 2^(-beta_j * R_j)
//! ```
//!
//! with `alpha_j > 0` and `beta_j > 0`, which makes every surface strictly
//! decreasing and strictly convex in each rate. Rates are in Kbits per
//! tensor by convention; nothing enforces the unit.
//!
//! All types are immutable values and all operations are pure functions.

use crate::error::{Error, Result};

/// Natural log of 2, used by marginal-rate formulas throughout.
pub const LN_2: f64 = std::f64::consts::LN_2;

/// Baseline and compressed accuracy of one task, in the task's native units
/// (percent, dB, pixels, ...).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyPair {
    baseline: f64,
    compressed: f64,
}

impl AccuracyPair {
    /// The baseline must be nonzero; the relative drop divides by it.
    pub fn new(baseline: f64, compressed: f64) -> Result<Self> {
        if baseline == 0.0 || !baseline.is_finite() || !compressed.is_finite() {
            return Err(Error::ZeroBaselineAccuracy);
        }
        Ok(Self {
            baseline,
            compressed,
        })
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    pub fn compressed(&self) -> f64 {
        self.compressed
    }
}

/// Percentage drop in task performance caused by feature compression:
/// `|baseline - compressed| / baseline * 100`.
///
/// Zero exactly when the compressed accuracy matches the baseline, and
/// growing as the two diverge. The absolute value makes metrics that
/// improve upward (accuracy, PSNR) and downward (RMSE) behave uniformly.
pub fn task_distortion(pair: &AccuracyPair) -> f64 {
    (pair.baseline - pair.compressed).abs() / pair.baseline * 100.0
}

/// Nonnegative bit rates for the N streams of a system, Kbits per tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct RateVector {
    rates: Vec<f64>,
}

impl RateVector {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::InvalidInput("rate vector must be nonempty".into()));
        }
        for (j, &r) in rates.iter().enumerate() {
            if !r.is_finite() || r < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "rate {j} must be finite and nonnegative, got {r}"
                )));
            }
        }
        Ok(Self { rates })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    /// Sum of all components.
    pub fn total(&self) -> f64 {
        self.rates.iter().sum()
    }
}

/// One task's distortion-rate surface: offset `gamma` plus one exponential
/// term per stream.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionSurface {
    gamma: f64,
    alphas: Vec<f64>,
    betas: Vec<f64>,
}

impl DistortionSurface {
    /// `alphas` and `betas` must have equal nonzero length and be strictly
    /// positive; that is what makes the surface convex and monotonically
    /// decreasing.
    pub fn new(gamma: f64, alphas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidInput(
                "surface must have at least one stream".into(),
            ));
        }
        if alphas.len() != betas.len() {
            return Err(Error::DimensionMismatch {
                expected: alphas.len(),
                actual: betas.len(),
            });
        }
        if !gamma.is_finite() {
            return Err(Error::InvalidInput(format!("gamma must be finite, got {gamma}")));
        }
        for (j, (&a, &b)) in alphas.iter().zip(&betas).enumerate() {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "alpha {j} must be positive, got {a}"
                )));
            }
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "beta {j} must be positive, got {b}"
                )));
            }
        }
        Ok(Self {
            gamma,
            alphas,
            betas,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// Number of streams N.
    pub fn n_streams(&self) -> usize {
        self.alphas.len()
    }
}

fn check_dims(surface: &DistortionSurface, rates: &RateVector) -> Result<()> {
    if surface.n_streams() != rates.len() {
        return Err(Error::DimensionMismatch {
            expected: surface.n_streams(),
            actual: rates.len(),
        });
    }
    Ok(())
}

/// Surface value `gamma + sum_j alpha_j * 2^(-beta_j * r_j)`.
pub fn evaluate_surface(surface: &DistortionSurface, rates: &RateVector) -> Result<f64> {
    check_dims(surface, rates)?;
    let mut d = surface.gamma;
    for ((&a, &b), &r) in surface.alphas.iter().zip(&surface.betas).zip(rates.rates()) {
        d += a * (-b * r).exp2();
    }
    Ok(d)
}

/// Gradient of the surface: component `j` is
/// `-ln(2) * alpha_j * beta_j * 2^(-beta_j * r_j)`, strictly negative.
pub fn surface_gradient(surface: &DistortionSurface, rates: &RateVector) -> Result<Vec<f64>> {
    check_dims(surface, rates)?;
    Ok(surface
        .alphas
        .iter()
        .zip(&surface.betas)
        .zip(rates.rates())
        .map(|((&a, &b), &r)| -LN_2 * a * b * (-b * r).exp2())
        .collect())
}

/// Nonnegative task weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskWeights {
    weights: Vec<f64>,
}

impl TaskWeights {
    /// Each weight must be nonnegative and the sum must be 1 within 1e-9.
    /// Zero weights are allowed; they select weakly Pareto-optimal points
    /// rather than the guaranteed Pareto-optimal ones of strictly positive
    /// weights.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidWeights("weight vector must be nonempty".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidWeights(format!(
                    "weight {i} must be finite and nonnegative, got {w}"
                )));
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidWeights(format!(
                "weights must sum to 1 within 1e-9, got {sum}"
            )));
        }
        Ok(Self { weights })
    }

    /// Equal weights `1/k` for `k` tasks.
    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidWeights("weight vector must be nonempty".into()));
        }
        Self::new(vec![1.0 / k as f64; k])
    }

    /// All weight on task `i`.
    pub fn one_hot(k: usize, i: usize) -> Result<Self> {
        if i >= k {
            return Err(Error::InvalidWeights(format!(
                "one-hot index {i} out of range for {k} tasks"
            )));
        }
        let mut w = vec![0.0; k];
        w[i] = 1.0;
        Self::new(w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// A multi-task allocation instance: one surface per task, all over the same
/// N streams, plus the total rate budget and optional task weights.
#[derive(Debug, Clone)]
pub struct AllocationProblem {
    surfaces: Vec<DistortionSurface>,
    total_rate: f64,
    weights: Option<TaskWeights>,
}

impl AllocationProblem {
    pub fn new(
        surfaces: Vec<DistortionSurface>,
        total_rate: f64,
        weights: Option<TaskWeights>,
    ) -> Result<Self> {
        if surfaces.is_empty() {
            return Err(Error::InvalidInput("need at least one surface".into()));
        }
        let n = surfaces[0].n_streams();
        for s in &surfaces[1..] {
            if s.n_streams() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: s.n_streams(),
                });
            }
        }
        if !(total_rate.is_finite() && total_rate > 0.0) {
            return Err(Error::NonPositiveTotalRate(total_rate));
        }
        if let Some(w) = &weights {
            if w.len() != surfaces.len() {
                return Err(Error::DimensionMismatch {
                    expected: surfaces.len(),
                    actual: w.len(),
                });
            }
        }
        Ok(Self {
            surfaces,
            total_rate,
            weights,
        })
    }

    pub fn surfaces(&self) -> &[DistortionSurface] {
        &self.surfaces
    }

    pub fn total_rate(&self) -> f64 {
        self.total_rate
    }

    pub fn weights(&self) -> Option<&TaskWeights> {
        self.weights.as_ref()
    }

    pub fn n_streams(&self) -> usize {
        self.surfaces[0].n_streams()
    }

    pub fn n_tasks(&self) -> usize {
        self.surfaces.len()
    }
}

/// Result of an allocation solve: the rates, the water level `log2(lambda)`,
/// the set of streams that received positive rate, and the per-task
/// distortions achieved at those rates.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub rates: RateVector,
    pub water_level_log2: f64,
    pub active_set: Vec<usize>,
    pub achieved_distortions: Vec<f64>,
}

impl Allocation {
    /// Scalarized distortion `sum_i w_i * D_i` at the allocated rates.
    pub fn scalarized_distortion(&self, weights: &TaskWeights) -> Result<f64> {
        if weights.len() != self.achieved_distortions.len() {
            return Err(Error::DimensionMismatch {
                expected: self.achieved_distortions.len(),
                actual: weights.len(),
            });
        }
        Ok(self
            .achieved_distortions
            .iter()
            .zip(weights.weights())
            .map(|(d, w)| d * w)
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn surface(gamma: f64, alphas: &[f64], betas: &[f64]) -> DistortionSurface {
        DistortionSurface::new(gamma, alphas.to_vec(), betas.to_vec()).unwrap()
    }

    #[test]
    fn task_distortion_identity_case() {
        let pair = AccuracyPair::new(80.0, 80.0).unwrap();
        assert_eq!(task_distortion(&pair), 0.0);
    }

    #[test]
    fn task_distortion_direct_substitution() {
        let pair = AccuracyPair::new(80.0, 60.0).unwrap();
        assert_eq!(task_distortion(&pair), 25.0);
    }

    #[test]
    fn task_distortion_rmse_style_pair() {
        // Hand arithmetic: |7.80 - 16.43| / 7.80 * 100 = 863/7.8
        let pair = AccuracyPair::new(7.80, 16.43).unwrap();
        assert_relative_eq!(task_distortion(&pair), 110.64102564102564, max_relative = 1e-12);
    }

    #[test]
    fn task_distortion_rejects_zero_baseline() {
        assert_eq!(
            AccuracyPair::new(0.0, 1.0).unwrap_err(),
            Error::ZeroBaselineAccuracy
        );
    }

    #[test]
    fn task_distortion_strictly_increases_with_gap() {
        let base = 80.0;
        let mut last = -1.0;
        for gap in [0.0, 0.5, 1.0, 5.0, 20.0] {
            let d = task_distortion(&AccuracyPair::new(base, base - gap).unwrap());
            assert!(d > last);
            last = d;
        }
    }

    #[test]
    fn evaluate_surface_unit_terms() {
        let s = surface(0.0, &[1.0, 1.0], &[1.0, 1.0]);
        let r = RateVector::new(vec![0.0, 0.0]).unwrap();
        assert_eq!(evaluate_surface(&s, &r).unwrap(), 2.0);
    }

    #[test]
    fn evaluate_surface_hand_case() {
        // gamma=5, terms 4*2^-2 = 1 and 2*2^-1 = 1.
        let s = surface(5.0, &[4.0, 2.0], &[1.0, 0.5]);
        let r = RateVector::new(vec![2.0, 2.0]).unwrap();
        let d = evaluate_surface(&s, &r).unwrap();
        assert_relative_eq!(d, 7.0, max_relative = 1e-14);
        // Independent scalar-exponential route: a * 2^x via powf.
        let oracle = 5.0 + 4.0 * 2f64.powf(-2.0) + 2.0 * 2f64.powf(-0.5 * 2.0);
        assert_relative_eq!(d, oracle, max_relative = 1e-14);
    }

    #[test]
    fn evaluate_surface_monotone_limit() {
        let s = surface(0.0, &[1.0], &[1.0]);
        let r = RateVector::new(vec![1e6]).unwrap();
        assert!(evaluate_surface(&s, &r).unwrap().abs() < 1e-12);
    }

    #[test]
    fn evaluate_surface_dimension_mismatch() {
        let s = surface(0.0, &[1.0, 1.0], &[1.0, 1.0]);
        let r = RateVector::new(vec![1.0]).unwrap();
        assert!(matches!(
            evaluate_surface(&s, &r),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gradient_at_zero_rate() {
        let s = surface(0.0, &[1.0], &[1.0]);
        let r = RateVector::new(vec![0.0]).unwrap();
        let g = surface_gradient(&s, &r).unwrap();
        assert_relative_eq!(g[0], -LN_2, max_relative = 1e-15);
    }

    #[test]
    fn gradient_equal_marginals_case() {
        // alpha=(4,1), beta=(1,1) at r=(2,0): both components -ln 2.
        let s = surface(0.0, &[4.0, 1.0], &[1.0, 1.0]);
        let r = RateVector::new(vec![2.0, 0.0]).unwrap();
        let g = surface_gradient(&s, &r).unwrap();
        assert_relative_eq!(g[0], -LN_2, max_relative = 1e-14);
        assert_relative_eq!(g[1], -LN_2, max_relative = 1e-14);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let s = surface(2.0, &[3.0, 0.8], &[0.9, 0.3]);
        let r = vec![1.3, 0.7];
        let g = surface_gradient(&s, &RateVector::new(r.clone()).unwrap()).unwrap();
        let h = 1e-5;
        for j in 0..2 {
            let mut hi = r.clone();
            let mut lo = r.clone();
            hi[j] += h;
            lo[j] -= h;
            let fd = (evaluate_surface(&s, &RateVector::new(hi).unwrap()).unwrap()
                - evaluate_surface(&s, &RateVector::new(lo).unwrap()).unwrap())
                / (2.0 * h);
            assert_relative_eq!(g[j], fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn surface_rejects_nonpositive_parameters() {
        assert!(DistortionSurface::new(0.0, vec![0.0], vec![1.0]).is_err());
        assert!(DistortionSurface::new(0.0, vec![1.0], vec![-0.1]).is_err());
        assert!(DistortionSurface::new(0.0, vec![1.0, 2.0], vec![1.0]).is_err());
    }

    #[test]
    fn rate_vector_rejects_negative() {
        assert!(RateVector::new(vec![1.0, -0.5]).is_err());
        assert!(RateVector::new(vec![]).is_err());
    }

    #[test]
    fn weights_validation() {
        assert!(TaskWeights::new(vec![0.5, 0.5]).is_ok());
        assert!(TaskWeights::new(vec![0.5, 0.6]).is_err());
        assert!(TaskWeights::new(vec![1.1, -0.1]).is_err());
        let u = TaskWeights::uniform(3).unwrap();
        assert_relative_eq!(u.weights()[0], 1.0 / 3.0);
        let oh = TaskWeights::one_hot(3, 2).unwrap();
        assert_eq!(oh.weights(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn problem_requires_consistent_streams() {
        let s1 = surface(0.0, &[1.0, 1.0], &[1.0, 1.0]);
        let s2 = surface(0.0, &[1.0], &[1.0]);
        assert!(AllocationProblem::new(vec![s1.clone(), s2], 10.0, None).is_err());
        assert!(AllocationProblem::new(vec![s1.clone()], 0.0, None).is_err());
        let w = TaskWeights::uniform(2).unwrap();
        assert!(AllocationProblem::new(vec![s1], 10.0, Some(w)).is_err());
    }
}
