//! Diagonal metrics `a(r) dr² + b(r) ds²` on the torus `[0,2π)²`.
//!
//! The Gauss curvature is evaluated in conservative form
//!
//! ```text
//! K = -(1 / (2 sqrt(ab))) ∂_r( ∂_r b / sqrt(ab) )
//! ```
//!
//! with the flux `∂_r b / sqrt(ab)` taken at half-integer nodes. The
//! discrete total curvature `Σ K sqrt(ab) h` then telescopes to zero, and for
//! `a ≡ 1`, `b = f²` the stencil is exactly `-Δ_h f / f`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{rk4_step, substeps, FlowError, FlowState, FlowTrace, Result};
use crate::metric::{sample_diagonal_torus, RiemannianSample};

pub const MIN_RADIAL_POINTS: usize = 16;

/// Curvature level treated as blowup.
const BLOWUP: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpedSurfaceMetric {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl WarpedSurfaceMetric {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(FlowError::Domain(format!(
                "coefficient arrays have lengths {} and {}",
                a.len(),
                b.len()
            )));
        }
        if a.len() < MIN_RADIAL_POINTS {
            return Err(FlowError::Domain(format!(
                "n_r = {} is below the minimum of {MIN_RADIAL_POINTS}",
                a.len()
            )));
        }
        if let Some(bad) = a.iter().chain(&b).find(|&&v| !(v > 0.0) || !v.is_finite()) {
            return Err(FlowError::Domain(format!(
                "coefficient {bad} is not positive and finite"
            )));
        }
        Ok(Self { a, b })
    }

    /// `dr² + λ² f² ds²`.
    pub fn from_warping(f: &[f64], lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(FlowError::Domain(format!("warp scale must be positive, got {lambda}")));
        }
        if let Some(bad) = f.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
            return Err(FlowError::Domain(format!("warping value {bad} is not positive")));
        }
        Self::new(vec![1.0; f.len()], f.iter().map(|&v| lambda * lambda * v * v).collect())
    }

    /// `dr² + λ² f(r)² ds²` with `f` evaluated on the `n_r`-point grid.
    pub fn from_fn(n_r: usize, lambda: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = 2.0 * PI / n_r as f64;
        let values: Vec<f64> = (0..n_r).map(|j| f(j as f64 * h)).collect();
        Self::from_warping(&values, lambda)
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn n_r(&self) -> usize {
        self.a.len()
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n_r() as f64
    }

    /// Both coefficients multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.a.iter().map(|v| v * factor).collect(),
            self.b.iter().map(|v| v * factor).collect(),
        )
    }

    /// Length of an r-loop at fixed s, measured exactly as the sampled graph
    /// measures it (midpoint-interpolated `a`).
    pub fn r_circumference(&self) -> f64 {
        let n = self.n_r();
        let h = self.spacing();
        (0..n)
            .map(|j| (0.5 * (self.a[j] + self.a[(j + 1) % n])).sqrt() * h)
            .sum()
    }

    fn area_elements(&self) -> Vec<f64> {
        let h = self.spacing();
        self.a
            .iter()
            .zip(&self.b)
            .map(|(a, b)| (a * b).sqrt() * h * 2.0 * PI)
            .collect()
    }

    pub fn area(&self) -> f64 {
        self.area_elements().iter().sum()
    }

    /// `Σ K dA`; zero up to rounding on any torus.
    pub fn total_curvature(&self) -> f64 {
        gauss_curvature(self)
            .iter()
            .zip(self.area_elements())
            .map(|(k, da)| k * da)
            .sum()
    }

    /// Graph sample on the `n_r × n_s` grid.
    pub fn sample(&self, n_s: usize) -> Result<RiemannianSample> {
        Ok(sample_diagonal_torus(&self.a, &self.b, n_s)?)
    }

    fn flat_state(&self) -> Vec<f64> {
        self.a.iter().chain(&self.b).copied().collect()
    }
}

impl FlowState for WarpedSurfaceMetric {
    fn coefficients(&self) -> Vec<f64> {
        self.flat_state()
    }

    fn curvature_norm(&self) -> f64 {
        sup_norm(&gauss_curvature(self))
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().map(|k| k.abs()).fold(0.0, f64::max)
}

fn curvature_of(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let h = 2.0 * PI / n as f64;
    let root: Vec<f64> = a.iter().zip(b).map(|(a, b)| (a * b).sqrt()).collect();
    // flux[j] lives at j + 1/2
    let flux: Vec<f64> = (0..n)
        .map(|j| {
            let k = (j + 1) % n;
            (b[k] - b[j]) / (h * 0.5 * (root[j] + root[k]))
        })
        .collect();
    (0..n)
        .map(|j| {
            let prev = flux[(j + n - 1) % n];
            -(flux[j] - prev) / (2.0 * h * root[j])
        })
        .collect()
}

pub fn gauss_curvature(m: &WarpedSurfaceMetric) -> Vec<f64> {
    curvature_of(&m.a, &m.b)
}

/// Largest step the explicit scheme accepts for this state:
/// `h² / (8 max(1, K_max))`.
pub fn stable_dt(m: &WarpedSurfaceMetric) -> f64 {
    let h = m.spacing();
    h * h / (8.0 * m.curvature_norm().max(1.0))
}

fn ricci_rhs(y: &[f64]) -> Vec<f64> {
    let n = y.len() / 2;
    let (a, b) = y.split_at(n);
    let k = curvature_of(a, b);
    let mut out = Vec::with_capacity(2 * n);
    out.extend(a.iter().zip(&k).map(|(a, k)| -2.0 * k * a));
    out.extend(b.iter().zip(&k).map(|(b, k)| -2.0 * k * b));
    out
}

/// Flow `∂a = -2Ka`, `∂b = -2Kb`, recording exactly at the requested times
/// (ascending, nonnegative). Time 0 is always recorded first.
pub fn integrate_warped_surface_at(
    m0: &WarpedSurfaceMetric,
    times: &[f64],
    dt: f64,
) -> Result<FlowTrace<WarpedSurfaceMetric>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(FlowError::Domain(format!("time step must be positive, got {dt}")));
    }
    if times.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
        return Err(FlowError::Domain("output times must be nonnegative and finite".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(FlowError::Domain("output times must be ascending".into()));
    }
    let n = m0.n_r();
    let h_r = m0.spacing();
    let mut trace = FlowTrace::start(m0.clone());
    let mut y = m0.flat_state();
    let mut now = 0.0;
    for &target in times.iter().filter(|&&t| t > 0.0) {
        if target <= now {
            continue;
        }
        let (steps, h) = substeps(now, target, dt);
        for k in 0..steps {
            let t = now + k as f64 * h;
            let kmax = sup_norm(&curvature_of(&y[..n], &y[n..]));
            if kmax > BLOWUP {
                return Err(FlowError::Aborted {
                    t,
                    reason: format!("curvature blowup, K_max = {kmax:e}"),
                });
            }
            let budget = h_r * h_r / (8.0 * kmax.max(1.0));
            if h > budget * (1.0 + 1e-12) {
                return Err(FlowError::Unstable { t, dt: h, budget });
            }
            y = rk4_step(&y, h, ricci_rhs);
            if let Some(bad) = y.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
                return Err(FlowError::Aborted {
                    t: t + h,
                    reason: format!("coefficient {bad} left the positive range"),
                });
            }
        }
        now = target;
        let (a, b) = y.split_at(n);
        trace.push(
            target,
            WarpedSurfaceMetric {
                a: a.to_vec(),
                b: b.to_vec(),
            },
        );
    }
    Ok(trace)
}

/// Records taken over `[0, T]` on at most this many equal intervals.
pub const DEFAULT_RECORDS: usize = 200;

/// Flow over `[0, T]`, recording on an even grid of at most
/// [`DEFAULT_RECORDS`] intervals (fewer when `T/dt` is smaller).
pub fn integrate_warped_surface(
    m0: &WarpedSurfaceMetric,
    t_end: f64,
    dt: f64,
) -> Result<FlowTrace<WarpedSurfaceMetric>> {
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(FlowError::Domain(format!("horizon must be nonnegative, got {t_end}")));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(FlowError::Domain(format!("time step must be positive, got {dt}")));
    }
    let (total, _) = substeps(0.0, t_end, dt);
    let records = total.min(DEFAULT_RECORDS);
    let times: Vec<f64> = (1..=records)
        .map(|k| {
            if k == records {
                t_end
            } else {
                t_end * k as f64 / records as f64
            }
        })
        .collect();
    integrate_warped_surface_at(m0, &times, dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bumpy(n: usize) -> WarpedSurfaceMetric {
        WarpedSurfaceMetric::from_fn(n, 1.0, |r| 2.0 + r.cos()).unwrap()
    }

    #[test]
    fn constant_warp_is_flat() {
        let m = WarpedSurfaceMetric::from_fn(32, 0.3, |_| 1.7).unwrap();
        assert!(gauss_curvature(&m).iter().all(|&k| k == 0.0));
    }

    #[test]
    fn reduces_to_minus_f_second_over_f() {
        for n in [64, 128] {
            let m = bumpy(n);
            let k = gauss_curvature(&m);
            let h = m.spacing();
            for j in 0..n {
                let f = |i: usize| 2.0 + ((i % n) as f64 * h).cos();
                let lap = (f(j + 1) - 2.0 * f(j) + f(j + n - 1)) / (h * h);
                assert!((k[j] + lap / f(j)).abs() < 1e-10);
            }
            // second order against the analytic K(0) = 1/3
            assert!((k[0] - 1.0 / 3.0).abs() < h * h);
        }
    }

    #[test]
    fn gauss_bonnet_on_a_general_diagonal_metric() {
        let n = 48;
        let h = 2.0 * PI / n as f64;
        let a: Vec<f64> = (0..n).map(|j| 1.5 + (2.0 * j as f64 * h).sin()).collect();
        let b: Vec<f64> = (0..n).map(|j| 2.0 + (j as f64 * h).cos() * 0.9).collect();
        let m = WarpedSurfaceMetric::new(a, b).unwrap();
        assert!(m.total_curvature().abs() < 1e-12 * m.area());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(WarpedSurfaceMetric::new(vec![1.0; 8], vec![1.0; 8]).is_err());
        assert!(WarpedSurfaceMetric::new(vec![1.0; 16], vec![1.0; 17]).is_err());
        assert!(WarpedSurfaceMetric::from_fn(16, 1.0, |r| r.cos()).is_err());
        let m = bumpy(32);
        assert!(matches!(
            integrate_warped_surface(&m, 0.1, 1.0),
            Err(FlowError::Unstable { .. })
        ));
    }

    #[test]
    fn flat_data_is_stationary() {
        let m = WarpedSurfaceMetric::from_fn(32, 1.0, |_| 1.0).unwrap();
        let tr = integrate_warped_surface(&m, 0.5, stable_dt(&m)).unwrap();
        assert!(tr.states.iter().all(|s| *s == m));
        assert!(tr.k_max.iter().all(|&k| k == 0.0));
    }

    #[test]
    fn records_requested_times_exactly() {
        let m = bumpy(32);
        let times = [0.0, 0.01, 0.05, 0.125];
        let tr = integrate_warped_surface_at(&m, &times, stable_dt(&m)).unwrap();
        assert_eq!(tr.times, times);
        assert!(tr.index_of(0.05).is_some());
        assert!(tr.index_of(0.06).is_none());
    }

    #[test]
    fn ratio_of_coefficients_is_preserved() {
        let m = bumpy(32);
        let tr = integrate_warped_surface(&m, 0.2, stable_dt(&m)).unwrap();
        let last = tr.last();
        for j in 0..32 {
            let r0 = m.b()[j] / m.a()[j];
            let r1 = last.b()[j] / last.a()[j];
            assert!((r0 - r1).abs() < 1e-12 * r0);
        }
    }
}
