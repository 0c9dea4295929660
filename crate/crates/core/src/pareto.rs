//! Pareto-set machinery for multi-task systems.
//!
//! Two shapes admit analytic treatment:
//!
//! * **2 streams, k tasks** — each task has a unique minimizer along the
//!   budget line; the Pareto set is exactly the segment between the smallest
//!   and largest first-stream minimizers.
//! * **3 streams, 2 tasks** — the stationary-point equations cannot be
//!   solved in closed form, but the admissible weight ratios bound each
//!   rate between closed-form extrema. The resulting box, intersected with
//!   the budget plane, is a polygon that contains every Pareto-optimal
//!   point (it is a bound, not the exact set).
//!
//! A seeded weight sweep and a brute-force dominance check round out the
//! toolkit for shapes with no analytic characterization.

use crate::alloc::fit_first;
use crate::error::{Error, Result};
use crate::model::{DistortionSurface, RateVector, TaskWeights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// The analytic Pareto set of a 2-stream system: a segment of the budget
/// line, plus the per-task line minimizers that generate it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoSegment {
    pub total_rate: f64,
    /// Endpoint with the smallest first-stream rate.
    pub endpoint_low: RateVector,
    /// Endpoint with the largest first-stream rate.
    pub endpoint_high: RateVector,
    pub per_task_minimizers: Vec<RateVector>,
}

impl ParetoSegment {
    /// Whether the segment collapses to a single point (identical or
    /// coinciding task minimizers).
    pub fn is_degenerate(&self) -> bool {
        self.endpoint_low.rates()[0] == self.endpoint_high.rates()[0]
    }
}

/// Componentwise rate bounds for a 3-stream 2-task system.
#[derive(Debug, Clone, PartialEq)]
pub struct RateBox {
    mins: [f64; 3],
    maxs: [f64; 3],
}

impl RateBox {
    pub fn new(mins: [f64; 3], maxs: [f64; 3]) -> Result<Self> {
        for j in 0..3 {
            if !(mins[j].is_finite() && maxs[j].is_finite()) || mins[j] < 0.0 || mins[j] > maxs[j]
            {
                return Err(Error::InvalidInput(format!(
                    "box bounds for rate {j} must satisfy 0 <= min <= max, got [{}, {}]",
                    mins[j], maxs[j]
                )));
            }
        }
        Ok(Self { mins, maxs })
    }

    pub fn mins(&self) -> &[f64; 3] {
        &self.mins
    }

    pub fn maxs(&self) -> &[f64; 3] {
        &self.maxs
    }

    /// Box membership with a tolerance on every face.
    pub fn contains(&self, point: &[f64], tol: f64) -> bool {
        point.len() == 3
            && (0..3).all(|j| point[j] >= self.mins[j] - tol && point[j] <= self.maxs[j] + tol)
    }
}

/// The rate-box / budget-plane intersection polygon bounding the Pareto set
/// of a 3-stream 2-task system.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoBound {
    pub rate_box: RateBox,
    pub total_rate: f64,
    /// Polygon vertices on the budget plane, counterclockwise as seen from
    /// the positive side of the plane normal.
    pub polygon_vertices: Vec<RateVector>,
}

impl ParetoBound {
    /// Whether an on-plane point lies inside the bound within `tol`.
    pub fn contains(&self, point: &RateVector, tol: f64) -> bool {
        let on_plane = (point.total() - self.total_rate).abs() <= tol.max(1e-9 * self.total_rate);
        on_plane && self.rate_box.contains(point.rates(), tol)
    }
}

/// One sampled Pareto-optimal solution from a weight sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoSample {
    pub weights: TaskWeights,
    pub rates: RateVector,
    pub distortions: Vec<f64>,
}

fn require_two_streams(surface: &DistortionSurface) -> Result<()> {
    if surface.n_streams() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: surface.n_streams(),
        });
    }
    Ok(())
}

/// Minimizer of one task's distortion along the budget line of a 2-stream
/// system:
///
/// ```text
/// R_1 = [ log2(a_1 b_1) - log2(a_2 b_2) + b_2 R_t ] / (b_1 + b_2)
/// ```
///
/// clipped to `[0, R_t]`. The restriction of the surface to the line is
/// strictly convex, so when the stationary point falls outside the line the
/// constrained minimum sits at the violated end.
pub fn per_task_line_minimizer_2stream(
    surface: &DistortionSurface,
    total_rate: f64,
) -> Result<RateVector> {
    require_two_streams(surface)?;
    if !(total_rate.is_finite() && total_rate > 0.0) {
        return Err(Error::NonPositiveTotalRate(total_rate));
    }
    let a = surface.alphas();
    let b = surface.betas();
    let r1 = ((a[0] * b[0]).log2() - (a[1] * b[1]).log2() + b[1] * total_rate) / (b[0] + b[1]);
    let r1 = r1.clamp(0.0, total_rate);
    RateVector::new(vec![r1, total_rate - r1])
}

/// The Pareto segment of a 2-stream k-task system: the stretch of the
/// budget line between the smallest and largest per-task minimizers.
pub fn pareto_segment_2xk(
    surfaces: &[DistortionSurface],
    total_rate: f64,
) -> Result<ParetoSegment> {
    if surfaces.is_empty() {
        return Err(Error::InvalidInput("need at least one surface".into()));
    }
    let minimizers: Vec<RateVector> = surfaces
        .iter()
        .map(|s| per_task_line_minimizer_2stream(s, total_rate))
        .collect::<Result<_>>()?;
    let r1_min = minimizers
        .iter()
        .map(|m| m.rates()[0])
        .fold(f64::INFINITY, f64::min);
    let r1_max = minimizers
        .iter()
        .map(|m| m.rates()[0])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ParetoSegment {
        total_rate,
        endpoint_low: RateVector::new(vec![r1_min, total_rate - r1_min])?,
        endpoint_high: RateVector::new(vec![r1_max, total_rate - r1_max])?,
        per_task_minimizers: minimizers,
    })
}

fn require_3x2(surfaces: &[DistortionSurface]) -> Result<()> {
    if surfaces.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: surfaces.len(),
        });
    }
    for s in surfaces {
        if s.n_streams() != 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                actual: s.n_streams(),
            });
        }
    }
    Ok(())
}

/// Admissible weight ratio `w_1 / w_2` implied by the stationary-point
/// equations of a 3-stream 2-task system at first and third rates
/// `(r_1, r_3)`:
///
/// ```text
/// -( a_{2,1} b_{2,1} 2^(-b_{2,1} r_1) - a_{2,3} b_{2,3} 2^(-b_{2,3} r_3) )
///  / ( a_{1,1} b_{1,1} 2^(-b_{1,1} r_1) - a_{1,3} b_{1,3} 2^(-b_{1,3} r_3) )
/// ```
///
/// A positive value marks a KKT-admissible pair. A zero denominator (the
/// first task's marginals balance exactly) yields an infinite ratio under
/// IEEE semantics; it is the boundary of the admissible region, not an
/// error.
pub fn weight_ratio_3x2(surfaces: &[DistortionSurface], r1: f64, r3: f64) -> Result<f64> {
    require_3x2(surfaces)?;
    if !r1.is_finite() || !r3.is_finite() {
        return Err(Error::InvalidInput("rates must be finite".into()));
    }
    let marginal = |s: &DistortionSurface, j: usize, r: f64| {
        s.alphas()[j] * s.betas()[j] * (-s.betas()[j] * r).exp2()
    };
    let numerator = marginal(&surfaces[1], 0, r1) - marginal(&surfaces[1], 2, r3);
    let denominator = marginal(&surfaces[0], 0, r1) - marginal(&surfaces[0], 2, r3);
    Ok(-numerator / denominator)
}

/// Stationary first-stream candidate for `rate_index`, pairing it against
/// each of the other two streams through one task's marginal balance.
///
/// Balancing rate `j` with rate `m` through task `t` pins
/// `R_m = [log2(a_{t,m} b_{t,m}) - log2(a_{t,j} b_{t,j}) + b_{t,j} R_j] / b_{t,m}`;
/// substituting both balances into the budget plane and solving for `R_j`
/// gives the closed form below. The four task combinations produce the four
/// extremum candidates per rate.
fn stationary_rate_3x2(
    surfaces: &[DistortionSurface],
    total_rate: f64,
    rate_index: usize,
    task_a: usize,
    task_b: usize,
) -> f64 {
    let others: [usize; 2] = match rate_index {
        0 => [1, 2],
        1 => [0, 2],
        _ => [0, 1],
    };
    let log_marginal =
        |t: usize, j: usize| (surfaces[t].alphas()[j] * surfaces[t].betas()[j]).log2();
    let beta = |t: usize, j: usize| surfaces[t].betas()[j];

    let mut numerator = total_rate;
    let mut denominator = 1.0;
    for (&m, &t) in others.iter().zip(&[task_a, task_b]) {
        numerator -= (log_marginal(t, m) - log_marginal(t, rate_index)) / beta(t, m);
        denominator += beta(t, rate_index) / beta(t, m);
    }
    numerator / denominator
}

/// Closed-form extrema of each rate for a 3-stream 2-task system.
///
/// For every rate, the four stationary candidates (one per task pairing)
/// are combined as `min{candidates, R_t}` and `max{candidates, 0}`, then
/// clipped into `[0, R_t]`.
pub fn rate_extrema_3x2(surfaces: &[DistortionSurface], total_rate: f64) -> Result<RateBox> {
    require_3x2(surfaces)?;
    if !(total_rate.is_finite() && total_rate > 0.0) {
        return Err(Error::NonPositiveTotalRate(total_rate));
    }
    let mut mins = [0.0; 3];
    let mut maxs = [0.0; 3];
    for j in 0..3 {
        let candidates: Vec<f64> = [(1, 1), (0, 1), (1, 0), (0, 0)]
            .iter()
            .map(|&(ta, tb)| stationary_rate_3x2(surfaces, total_rate, j, ta, tb))
            .collect();
        let lo = candidates.iter().cloned().fold(total_rate, f64::min);
        let hi = candidates.iter().cloned().fold(0.0, f64::max);
        mins[j] = lo.clamp(0.0, total_rate);
        maxs[j] = hi.clamp(0.0, total_rate);
    }
    RateBox::new(mins, maxs)
}

/// Vertices of the intersection between a rate box and the budget plane,
/// ordered counterclockwise; between one (degenerate) and six vertices.
///
/// The budget triangle is clipped successively by the six box half-spaces;
/// duplicate and collinear vertices are merged at `1e-9 * total_rate`.
pub fn bound_polygon_3x2(rate_box: &RateBox, total_rate: f64) -> Result<ParetoBound> {
    if !(total_rate.is_finite() && total_rate > 0.0) {
        return Err(Error::NonPositiveTotalRate(total_rate));
    }
    if rate_box.maxs.iter().any(|&m| m > total_rate) {
        return Err(Error::InvalidInput(
            "box bounds must not exceed the total rate".into(),
        ));
    }

    let mut polygon: Vec<[f64; 3]> = vec![
        [total_rate, 0.0, 0.0],
        [0.0, total_rate, 0.0],
        [0.0, 0.0, total_rate],
    ];
    let eps = 1e-12 * total_rate;
    for j in 0..3 {
        polygon = clip_half_space(&polygon, j, rate_box.mins[j], true, eps);
        polygon = clip_half_space(&polygon, j, rate_box.maxs[j], false, eps);
        if polygon.is_empty() {
            return Err(Error::EmptyIntersection);
        }
    }

    let merged = merge_vertices(polygon, 1e-9 * total_rate);
    if merged.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let oriented = orient_ccw(merged);
    let vertices = oriented
        .into_iter()
        .map(|v| RateVector::new(v.iter().map(|&x| x.max(0.0)).collect()))
        .collect::<Result<Vec<_>>>()?;

    Ok(ParetoBound {
        rate_box: rate_box.clone(),
        total_rate,
        polygon_vertices: vertices,
    })
}

/// Sutherland-Hodgman pass against `p[axis] >= bound` (or `<=` when
/// `lower` is false).
fn clip_half_space(
    polygon: &[[f64; 3]],
    axis: usize,
    bound: f64,
    lower: bool,
    eps: f64,
) -> Vec<[f64; 3]> {
    let inside = |p: &[f64; 3]| {
        if lower {
            p[axis] >= bound - eps
        } else {
            p[axis] <= bound + eps
        }
    };
    let mut out = Vec::with_capacity(polygon.len() + 1);
    for i in 0..polygon.len() {
        let a = polygon[i];
        let b = polygon[(i + 1) % polygon.len()];
        let a_in = inside(&a);
        let b_in = inside(&b);
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let denom = b[axis] - a[axis];
            let t = if denom.abs() < f64::MIN_POSITIVE {
                0.0
            } else {
                ((bound - a[axis]) / denom).clamp(0.0, 1.0)
            };
            let mut p = [0.0; 3];
            for k in 0..3 {
                p[k] = a[k] + t * (b[k] - a[k]);
            }
            p[axis] = bound;
            out.push(p);
        }
    }
    out
}

fn merge_vertices(polygon: Vec<[f64; 3]>, tol: f64) -> Vec<[f64; 3]> {
    let dist = |a: &[f64; 3], b: &[f64; 3]| {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    };
    // Drop consecutive duplicates (including the closing edge).
    let mut dedup: Vec<[f64; 3]> = Vec::with_capacity(polygon.len());
    for v in polygon {
        if dedup.last().is_none_or(|last| dist(last, &v) > tol) {
            dedup.push(v);
        }
    }
    while dedup.len() > 1 && dist(&dedup[0], dedup.last().unwrap()) <= tol {
        dedup.pop();
    }
    // Drop vertices collinear with their neighbors.
    loop {
        let n = dedup.len();
        if n < 3 {
            break;
        }
        let mut removed = false;
        for i in 0..n {
            let prev = dedup[(i + n - 1) % n];
            let cur = dedup[i];
            let next = dedup[(i + 1) % n];
            let u = [cur[0] - prev[0], cur[1] - prev[1], cur[2] - prev[2]];
            let v = [next[0] - prev[0], next[1] - prev[1], next[2] - prev[2]];
            let cross = [
                u[1] * v[2] - u[2] * v[1],
                u[2] * v[0] - u[0] * v[2],
                u[0] * v[1] - u[1] * v[0],
            ];
            let area = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
            let base = (v[0].powi(2) + v[1].powi(2) + v[2].powi(2)).sqrt();
            if base > 0.0 && area / base <= tol {
                dedup.remove(i);
                removed = true;
                break;
            }
        }
        if !removed {
            break;
        }
    }
    dedup
}

/// Reverses the vertex order if the polygon normal points against the
/// budget-plane normal `(1, 1, 1)`.
fn orient_ccw(mut polygon: Vec<[f64; 3]>) -> Vec<[f64; 3]> {
    if polygon.len() < 3 {
        return polygon;
    }
    let mut normal = [0.0; 3];
    for i in 0..polygon.len() {
        let a = polygon[i];
        let b = polygon[(i + 1) % polygon.len()];
        normal[0] += (a[1] - b[1]) * (a[2] + b[2]);
        normal[1] += (a[2] - b[2]) * (a[0] + b[0]);
        normal[2] += (a[0] - b[0]) * (a[1] + b[1]);
    }
    if normal.iter().sum::<f64>() < 0.0 {
        polygon.reverse();
    }
    polygon
}

/// Sweeps the Pareto set by solving the weighted problem at `n_samples`
/// strictly positive weight vectors drawn uniformly from the simplex
/// interior (symmetric Dirichlet, floored at 1e-9). Deterministic given the
/// seed; samples are returned in draw order.
pub fn sample_pareto_by_weights(
    surfaces: &[DistortionSurface],
    total_rate: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<ParetoSample>> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be at least 1".into()));
    }
    if surfaces.is_empty() {
        return Err(Error::InvalidInput("need at least one surface".into()));
    }
    let k = surfaces.len();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        // Normalized unit exponentials give a uniform simplex draw; the
        // floor keeps every weight strictly positive.
        let mut raw: Vec<f64> = (0..k)
            .map(|_| -(1.0 - rng.gen::<f64>()).ln())
            .collect();
        let sum: f64 = raw.iter().sum();
        for w in &mut raw {
            *w = (*w / sum).max(1e-9);
        }
        let sum: f64 = raw.iter().sum();
        for w in &mut raw {
            *w /= sum;
        }
        let weights = TaskWeights::new(raw)?;
        let allocation = fit_first(surfaces, &weights, total_rate)?;
        samples.push(ParetoSample {
            weights,
            rates: allocation.rates,
            distortions: allocation.achieved_distortions,
        });
    }
    Ok(samples)
}

/// Dominance notion used by [`dominance_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DominanceMode {
    /// A candidate is flagged iff no other is at least as good everywhere
    /// and strictly better somewhere.
    Pareto,
    /// A candidate is flagged iff no other is strictly better everywhere.
    WeakPareto,
}

/// Brute-force nondomination flags: `true` at index `i` iff no other
/// candidate dominates candidate `i` under the chosen mode.
pub fn dominance_check(distortions: &[Vec<f64>], mode: DominanceMode) -> Result<Vec<bool>> {
    if distortions.is_empty() {
        return Ok(Vec::new());
    }
    let k = distortions[0].len();
    if k == 0 {
        return Err(Error::InvalidInput("empty distortion vectors".into()));
    }
    for d in distortions {
        if d.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: d.len(),
            });
        }
    }
    let dominates = |a: &[f64], b: &[f64]| match mode {
        DominanceMode::Pareto => {
            a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
        }
        DominanceMode::WeakPareto => a.iter().zip(b).all(|(x, y)| x < y),
    };
    Ok((0..distortions.len())
        .map(|i| {
            !(0..distortions.len())
                .any(|j| j != i && dominates(&distortions[j], &distortions[i]))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{evaluate_surface, surface_gradient, LN_2};
    use approx::assert_relative_eq;

    fn surface(gamma: f64, alphas: &[f64], betas: &[f64]) -> DistortionSurface {
        DistortionSurface::new(gamma, alphas.to_vec(), betas.to_vec()).unwrap()
    }

    fn line_point(r1: f64, rt: f64) -> RateVector {
        RateVector::new(vec![r1, rt - r1]).unwrap()
    }

    #[test]
    fn line_minimizer_symmetric_case() {
        let s = surface(0.0, &[2.0, 2.0], &[0.5, 0.5]);
        let m = per_task_line_minimizer_2stream(&s, 8.0).unwrap();
        assert_relative_eq!(m.rates()[0], 4.0, max_relative = 1e-12);
        assert_relative_eq!(m.rates()[1], 4.0, max_relative = 1e-12);
    }

    #[test]
    fn line_minimizer_hand_case() {
        // R_1 = (log2 8 - log2 1 + 4) / 2 = 3.5.
        let s = surface(0.0, &[8.0, 1.0], &[1.0, 1.0]);
        let m = per_task_line_minimizer_2stream(&s, 4.0).unwrap();
        assert_relative_eq!(m.rates()[0], 3.5, max_relative = 1e-12);
        assert_relative_eq!(m.rates()[1], 0.5, max_relative = 1e-12);

        // 1-D grid-search oracle at step 1e-4.
        let mut best_r1 = f64::NAN;
        let mut best = f64::INFINITY;
        for i in 0..=40_000 {
            let r1 = i as f64 * 1e-4;
            let d = evaluate_surface(&s, &line_point(r1, 4.0)).unwrap();
            if d < best {
                best = d;
                best_r1 = r1;
            }
        }
        assert!((best_r1 - 3.5).abs() <= 1e-4 + 1e-12);
    }

    #[test]
    fn line_minimizer_clips_to_boundary() {
        let s = surface(0.0, &[1024.0, 1.0], &[1.0, 1.0]);
        let m = per_task_line_minimizer_2stream(&s, 4.0).unwrap();
        assert_eq!(m.rates(), &[4.0, 0.0]);

        let mut best_r1 = f64::NAN;
        let mut best = f64::INFINITY;
        for i in 0..=40_000 {
            let r1 = i as f64 * 1e-4;
            let d = evaluate_surface(&s, &line_point(r1, 4.0)).unwrap();
            if d < best {
                best = d;
                best_r1 = r1;
            }
        }
        assert_eq!(best_r1, 4.0);
    }

    #[test]
    fn line_minimizer_requires_two_streams() {
        let s = surface(0.0, &[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]);
        assert!(per_task_line_minimizer_2stream(&s, 4.0).is_err());
    }

    #[test]
    fn segment_single_task_degenerates() {
        let s = surface(0.0, &[8.0, 1.0], &[1.0, 1.0]);
        let seg = pareto_segment_2xk(std::slice::from_ref(&s), 4.0).unwrap();
        assert!(seg.is_degenerate());
        assert_eq!(seg.endpoint_low, seg.endpoint_high);
        assert_eq!(seg.per_task_minimizers.len(), 1);
    }

    #[test]
    fn segment_identical_tasks_degenerates() {
        let s = surface(1.0, &[5.0, 2.0], &[0.3, 0.4]);
        let seg = pareto_segment_2xk(&[s.clone(), s], 10.0).unwrap();
        assert!(seg.is_degenerate());
    }

    #[test]
    fn segment_reconstructed_from_published_endpoints() {
        // Build two tasks whose line minimizers sit at R_1 = 548.70 and
        // 616.72 for R_t = 1000, then recover the segment endpoints
        // (548.70, 451.30) and (616.72, 383.28).
        let rt = 1000.0;
        let beta = 0.01;
        let task_for = |r1: f64| {
            let log_ratio = 2.0 * beta * r1 - beta * rt;
            surface(0.0, &[log_ratio.exp2(), 1.0], &[beta, beta])
        };
        let seg =
            pareto_segment_2xk(&[task_for(548.70), task_for(616.72)], rt).unwrap();
        assert_relative_eq!(seg.endpoint_low.rates()[0], 548.70, max_relative = 1e-9);
        assert_relative_eq!(seg.endpoint_low.rates()[1], 451.30, max_relative = 1e-9);
        assert_relative_eq!(seg.endpoint_high.rates()[0], 616.72, max_relative = 1e-9);
        assert_relative_eq!(seg.endpoint_high.rates()[1], 383.28, max_relative = 1e-9);
    }

    fn sample_3x2() -> Vec<DistortionSurface> {
        vec![
            surface(1.0, &[9.0, 4.0, 2.5], &[0.020, 0.035, 0.050]),
            surface(0.5, &[3.0, 7.0, 5.0], &[0.045, 0.015, 0.030]),
        ]
    }

    #[test]
    fn weight_ratio_identical_tasks_is_minus_one() {
        let s = surface(1.0, &[9.0, 4.0, 2.5], &[0.02, 0.035, 0.05]);
        let surfaces = vec![s.clone(), s];
        for (r1, r3) in [(10.0, 40.0), (0.0, 5.0), (80.0, 3.0)] {
            let ratio = weight_ratio_3x2(&surfaces, r1, r3).unwrap();
            assert_relative_eq!(ratio, -1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn weight_ratio_matches_gradient_reevaluation() {
        use rand::Rng;
        let surfaces = sample_3x2();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..100 {
            let r1: f64 = rng.gen_range(0.0..120.0);
            let r3: f64 = rng.gen_range(0.0..120.0);
            let ratio = weight_ratio_3x2(&surfaces, r1, r3).unwrap();
            // Independent route through the surface gradient.
            let rv = RateVector::new(vec![r1, 0.0, r3]).unwrap();
            let g1 = surface_gradient(&surfaces[0], &rv).unwrap();
            let g2 = surface_gradient(&surfaces[1], &rv).unwrap();
            let oracle = -((-g2[0] / LN_2) - (-g2[2] / LN_2)) / ((-g1[0] / LN_2) - (-g1[2] / LN_2));
            assert_relative_eq!(ratio, oracle, max_relative = 1e-12);
        }
    }

    #[test]
    fn weight_ratio_zero_denominator_is_unbounded() {
        // Task 1 symmetric in streams 1 and 3: its marginal difference
        // vanishes on the diagonal r1 = r3.
        let t1 = surface(0.0, &[4.0, 1.0, 4.0], &[0.1, 0.1, 0.1]);
        let t2 = surface(0.0, &[5.0, 1.0, 2.0], &[0.08, 0.1, 0.12]);
        let ratio = weight_ratio_3x2(&[t1, t2], 10.0, 10.0).unwrap();
        assert!(ratio.is_infinite());
    }

    #[test]
    fn extrema_degenerate_for_identical_tasks() {
        let s = surface(1.0, &[9.0, 4.0, 2.5], &[0.020, 0.035, 0.050]);
        let rt = 150.0;
        let rate_box = rate_extrema_3x2(&[s.clone(), s.clone()], rt).unwrap();
        for j in 0..3 {
            assert_relative_eq!(rate_box.mins()[j], rate_box.maxs()[j], max_relative = 1e-9);
        }
        // The degenerate point is the single-task optimum on the plane.
        let opt = crate::alloc::waterfill_closed_form(&s, rt).unwrap();
        for j in 0..3 {
            assert_relative_eq!(rate_box.mins()[j], opt.rates.rates()[j], max_relative = 1e-6);
        }
    }

    #[test]
    fn pure_task_candidate_matches_one_hot_solve() {
        let surfaces = sample_3x2();
        let rt = 150.0;
        // The (task 1, task 1) candidate for each rate is the stationary
        // point of task 1 alone on the plane; with an interior solution it
        // must match the weighted solver at a one-hot weight.
        let sol = fit_first(&surfaces, &TaskWeights::one_hot(2, 0).unwrap(), rt).unwrap();
        assert!(sol.rates.rates().iter().all(|&r| r > 0.0), "need interior solution");
        for j in 0..3 {
            let candidate = stationary_rate_3x2(&surfaces, rt, j, 0, 0);
            assert_relative_eq!(candidate, sol.rates.rates()[j], max_relative = 1e-6);
        }
    }

    #[test]
    fn extrema_box_is_clipped_and_ordered() {
        let surfaces = sample_3x2();
        for rt in [5.0, 80.0, 400.0] {
            let rate_box = rate_extrema_3x2(&surfaces, rt).unwrap();
            for j in 0..3 {
                assert!(rate_box.mins()[j] >= 0.0);
                assert!(rate_box.mins()[j] <= rate_box.maxs()[j]);
                assert!(rate_box.maxs()[j] <= rt);
            }
        }
    }

    #[test]
    fn polygon_of_unconstrained_box_is_the_full_triangle() {
        let rt = 12.0;
        let rate_box = RateBox::new([0.0; 3], [rt; 3]).unwrap();
        let bound = bound_polygon_3x2(&rate_box, rt).unwrap();
        assert_eq!(bound.polygon_vertices.len(), 3);
        for v in &bound.polygon_vertices {
            assert_relative_eq!(v.total(), rt, max_relative = 1e-12);
            assert_eq!(v.rates().iter().filter(|&&x| x == 0.0).count(), 2);
        }
    }

    #[test]
    fn polygon_of_centered_box_is_a_hexagon() {
        let rt = 9.0;
        let c = rt / 3.0;
        let eps = 0.5;
        let rate_box = RateBox::new([c - eps; 3], [c + eps; 3]).unwrap();
        let bound = bound_polygon_3x2(&rate_box, rt).unwrap();
        assert_eq!(bound.polygon_vertices.len(), 6);

        // Membership oracle: on-plane points are inside the polygon iff
        // they are inside the box.
        for i in 0..60 {
            for j in 0..(60 - i) {
                let r1 = rt * i as f64 / 60.0;
                let r2 = rt * j as f64 / 60.0;
                let p = [r1, r2, rt - r1 - r2];
                let in_box = bound.rate_box.contains(&p, 1e-12);
                let in_poly = point_in_polygon_2d(&bound.polygon_vertices, &p);
                assert_eq!(in_box, in_poly, "disagreement at {p:?}");
            }
        }
    }

    #[test]
    fn polygon_degenerate_point() {
        let rt = 10.0;
        let p = rt / 3.0;
        let rate_box = RateBox::new([p; 3], [p; 3]).unwrap();
        let bound = bound_polygon_3x2(&rate_box, rt).unwrap();
        assert_eq!(bound.polygon_vertices.len(), 1);
        assert_relative_eq!(bound.polygon_vertices[0].total(), rt, max_relative = 1e-9);
    }

    #[test]
    fn polygon_reports_empty_intersection() {
        // Box capped far below the plane.
        let rate_box = RateBox::new([0.0; 3], [1.0; 3]).unwrap();
        assert_eq!(
            bound_polygon_3x2(&rate_box, 10.0).unwrap_err(),
            Error::EmptyIntersection
        );
    }

    /// Planar point-in-convex-polygon via the (R1, R2) projection, which
    /// preserves orientation for polygons on the budget plane.
    fn point_in_polygon_2d(vertices: &[RateVector], p: &[f64; 3]) -> bool {
        let n = vertices.len();
        if n < 3 {
            return false;
        }
        for i in 0..n {
            let a = vertices[i].rates();
            let b = vertices[(i + 1) % n].rates();
            let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
            if cross < -1e-9 {
                return false;
            }
        }
        true
    }

    #[test]
    fn weight_sweep_identical_tasks_repeats_common_optimum() {
        let s = surface(1.0, &[5.0, 2.0], &[0.3, 0.4]);
        let samples = sample_pareto_by_weights(&[s.clone(), s.clone()], 10.0, 5, 3).unwrap();
        let reference = crate::alloc::waterfill_closed_form(&s, 10.0).unwrap();
        for sample in &samples {
            for (a, b) in sample.rates.rates().iter().zip(reference.rates.rates()) {
                assert!((a - b).abs() < 1e-6 * 10.0);
            }
        }
    }

    #[test]
    fn weight_sweep_is_deterministic() {
        let surfaces = vec![
            surface(0.0, &[5.0, 2.0], &[0.3, 0.4]),
            surface(1.0, &[1.5, 6.0], &[0.2, 0.5]),
        ];
        let a = sample_pareto_by_weights(&surfaces, 10.0, 8, 42).unwrap();
        let b = sample_pareto_by_weights(&surfaces, 10.0, 8, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn weight_sweep_stays_in_segment() {
        let surfaces = vec![
            surface(0.0, &[5.0, 2.0], &[0.3, 0.4]),
            surface(1.0, &[1.5, 6.0], &[0.2, 0.5]),
        ];
        let rt = 10.0;
        let seg = pareto_segment_2xk(&surfaces, rt).unwrap();
        let samples = sample_pareto_by_weights(&surfaces, rt, 50, 5).unwrap();
        let lo = seg.endpoint_low.rates()[0] - 1e-6 * rt;
        let hi = seg.endpoint_high.rates()[0] + 1e-6 * rt;
        for s in &samples {
            let r1 = s.rates.rates()[0];
            assert!(r1 >= lo && r1 <= hi, "r1 = {r1} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn dominance_flags_ordered_pair() {
        let flags = dominance_check(
            &[vec![1.0, 1.0], vec![2.0, 2.0]],
            DominanceMode::Pareto,
        )
        .unwrap();
        assert_eq!(flags, vec![true, false]);
    }

    #[test]
    fn dominance_identical_points_all_nondominated() {
        let flags = dominance_check(
            &[vec![3.0, 4.0], vec![3.0, 4.0], vec![3.0, 4.0]],
            DominanceMode::Pareto,
        )
        .unwrap();
        assert_eq!(flags, vec![true, true, true]);
    }

    #[test]
    fn weak_dominance_requires_strict_everywhere() {
        // (1, 2) strongly dominates (1, 3) but does not weakly dominate it.
        let strong = dominance_check(
            &[vec![1.0, 2.0], vec![1.0, 3.0]],
            DominanceMode::Pareto,
        )
        .unwrap();
        let weak = dominance_check(
            &[vec![1.0, 2.0], vec![1.0, 3.0]],
            DominanceMode::WeakPareto,
        )
        .unwrap();
        assert_eq!(strong, vec![true, false]);
        assert_eq!(weak, vec![true, true]);
    }

    #[test]
    fn dominance_grid_matches_segment() {
        let surfaces = vec![
            surface(0.0, &[5.0, 2.0], &[0.3, 0.4]),
            surface(1.0, &[1.5, 6.0], &[0.2, 0.5]),
        ];
        let rt = 10.0;
        let seg = pareto_segment_2xk(&surfaces, rt).unwrap();
        let n = 1000;
        let step = rt / n as f64;
        let grid: Vec<Vec<f64>> = (0..=n)
            .map(|i| {
                let r = line_point(i as f64 * step, rt);
                surfaces
                    .iter()
                    .map(|s| evaluate_surface(s, &r).unwrap())
                    .collect()
            })
            .collect();
        let flags = dominance_check(&grid, DominanceMode::Pareto).unwrap();
        let lo = seg.endpoint_low.rates()[0];
        let hi = seg.endpoint_high.rates()[0];
        for (i, &flag) in flags.iter().enumerate() {
            let r1 = i as f64 * step;
            if r1 >= lo + step && r1 <= hi - step {
                assert!(flag, "interior point r1 = {r1} flagged dominated");
            }
            if r1 <= lo - step || r1 >= hi + step {
                assert!(!flag, "outside point r1 = {r1} flagged nondominated");
            }
        }
    }
}
