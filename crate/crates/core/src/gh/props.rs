//! Finite-scale checks of the elementary pointed-GH propositions.

use serde::{Deserialize, Serialize};

use super::{gh_brute_force, gh_upper_bound_with, EpsGrid, GhError, PointedMap, Result, SearchOptions};
use crate::metric::{geodesic_distances, FiniteMetricSpace, RiemannianSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleRecord {
    pub d12: f64,
    pub d23: f64,
    pub d13: f64,
    pub hypothesis_met: bool,
    /// `2 (d12 + d23)`.
    pub sum_bound: f64,
    /// `2 max(d12, d23)`.
    pub max_bound: f64,
    pub sum_margin: f64,
    pub max_margin: f64,
    /// Sum reading holds (vacuously true when the hypothesis fails).
    pub pass: bool,
}

/// Approximate triangle inequality with factor 2, checked by brute force.
/// Only the sum reading is asserted; the max reading is recorded.
pub fn check_triangle_factor2(
    x1: &FiniteMetricSpace,
    x2: &FiniteMetricSpace,
    x3: &FiniteMetricSpace,
    grid: &EpsGrid,
) -> Result<TriangleRecord> {
    let d12 = gh_brute_force(x1, x2, grid)?.upper;
    let d23 = gh_brute_force(x2, x3, grid)?.upper;
    let d13 = gh_brute_force(x1, x3, grid)?.upper;
    let hypothesis_met = d12 <= 0.5 && d23 <= 0.5;
    let sum_bound = 2.0 * (d12 + d23);
    let max_bound = 2.0 * d12.max(d23);
    Ok(TriangleRecord {
        d12,
        d23,
        d13,
        hypothesis_met,
        sum_bound,
        max_bound,
        sum_margin: sum_bound - d13,
        max_margin: max_bound - d13,
        pass: !hypothesis_met || d13 <= sum_bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsCloseRecord {
    pub delta: f64,
    pub upper: f64,
    /// `2 δ^{1/4} (1+δ)^{1/2}`.
    pub bound: f64,
    pub grid_slack: f64,
    pub margin: f64,
    pub pass: bool,
}

/// Uniformly equivalent metrics on one grid give GH-close samples.
///
/// The metric hypothesis `(1+δ)⁻¹ g <= h <= (1+δ) g` is checked in its
/// edge-length form: every edge ratio lies in `[(1+δ)^{-1/2}, (1+δ)^{1/2}]`.
pub fn verify_metrics_close_bound(
    sample: &RiemannianSample,
    perturbed: &RiemannianSample,
    delta: f64,
    budget: u64,
    seed: u64,
) -> Result<MetricsCloseRecord> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(GhError::Usage(format!("delta must be nonnegative, got {delta}")));
    }
    if !sample.same_grid(perturbed) {
        return Err(GhError::Hypothesis("samples do not share a grid".into()));
    }
    let hi = (1.0 + delta).sqrt();
    let lo = 1.0 / hi;
    // ratios are formed from independently rounded square roots
    let fuzz = 1e-12;
    for (e, (&a, &b)) in sample.edge_lengths().iter().zip(perturbed.edge_lengths()).enumerate() {
        let ratio = b / a;
        if ratio < lo * (1.0 - fuzz) || ratio > hi * (1.0 + fuzz) {
            return Err(GhError::Hypothesis(format!(
                "edge {e} ratio {ratio} outside [{lo}, {hi}]"
            )));
        }
    }
    let x = geodesic_distances(sample, 0)?;
    let y = geodesic_distances(perturbed, 0)?;
    let n = x.len();
    let opts =
        SearchOptions::new(budget, seed).with_hints(vec![PointedMap::identity(n)], vec![PointedMap::identity(n)]);
    let est = gh_upper_bound_with(&x, &y, &opts)?;
    let grid_slack = sample.grid_slack().max(perturbed.grid_slack());
    let bound = 2.0 * delta.powf(0.25) * (1.0 + delta).sqrt();
    let margin = bound + grid_slack - est.upper;
    Ok(MetricsCloseRecord {
        delta,
        upper: est.upper,
        bound,
        grid_slack,
        margin,
        pass: margin >= 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociativityRecord {
    pub pair_distances: Vec<f64>,
    pub hypothesis_met: bool,
    /// Distance between the last elements, standing in for the limits.
    pub limit_distance: f64,
    /// `4ε + slack`.
    pub bound: f64,
    pub pass: bool,
}

/// Evidence check: if every pair is within ε, the proxy limits (last
/// elements) are within 4ε.
pub fn check_associativity(
    xs: &[FiniteMetricSpace],
    xs_prime: &[FiniteMetricSpace],
    eps: f64,
    slack: f64,
    grid: &EpsGrid,
) -> Result<AssociativityRecord> {
    if xs.is_empty() || xs.len() != xs_prime.len() {
        return Err(GhError::Usage("sequences must be nonempty and of equal length".into()));
    }
    let pair_distances = xs
        .iter()
        .zip(xs_prime)
        .map(|(a, b)| gh_brute_force(a, b, grid).map(|e| e.upper))
        .collect::<Result<Vec<f64>>>()?;
    let hypothesis_met = pair_distances.iter().all(|&d| d <= eps);
    let limit_distance = gh_brute_force(xs.last().unwrap(), xs_prime.last().unwrap(), grid)?.upper;
    let bound = 4.0 * eps + slack;
    Ok(AssociativityRecord {
        pair_distances,
        hypothesis_met,
        limit_distance,
        bound,
        pass: !hypothesis_met || limit_distance <= bound,
    })
}
