//! Ricci flow on the two explicit families, and the curvature-controlled
//! bound monitors evaluated on the resulting traces.

mod monitors;
mod nil;
mod warped;

pub use monitors::{
    check_ball_containment, check_lipschitz_equivalence, check_metric_equivalence_bounds, containment_radius,
    BoundParams, DistancePair, MonitorRecord,
};
pub use nil::{
    integrate_nil, integrate_nil_fixed, nil_curvature_norm, nil_residual_report, nil_ricci_derivative,
    nil_sectional_curvatures, nil_similarity_solution, paper_nil_closed_form, NilClosedForm, NilMetric, ResidualReport,
};
pub use warped::{
    gauss_curvature, integrate_warped_surface, integrate_warped_surface_at, stable_dt, WarpedSurfaceMetric,
    MIN_RADIAL_POINTS,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::MetricError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("integration aborted at t = {t}: {reason}")]
    Aborted { t: f64, reason: String },
    #[error("time step {dt} exceeds the stability budget {budget} at t = {t}")]
    Unstable { t: f64, dt: f64, budget: f64 },
    #[error("time {0} is not a recorded trace time")]
    NotRecorded(f64),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

pub type Result<T> = std::result::Result<T, FlowError>;

/// A metric state whose evolution is diagonal in a fixed frame.
pub trait FlowState: Clone {
    /// Diagonal coefficients in a fixed order. Monitors compare these
    /// component-wise between times.
    fn coefficients(&self) -> Vec<f64>;
    /// Sup-norm of the curvature.
    fn curvature_norm(&self) -> f64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub k_max: Vec<f64>,
    /// Declared curvature bound; `None` means monitors use the running max.
    pub c0: Option<f64>,
}

/// Recorded times within this distance of a query are treated as equal.
const TIME_MATCH: f64 = 1e-12;

impl<S: FlowState> FlowTrace<S> {
    pub(crate) fn start(state: S) -> Self {
        let k = state.curvature_norm();
        Self {
            times: vec![0.0],
            states: vec![state],
            k_max: vec![k],
            c0: None,
        }
    }

    pub(crate) fn push(&mut self, t: f64, state: S) {
        self.k_max.push(state.curvature_norm());
        self.times.push(t);
        self.states.push(state);
    }

    pub fn with_declared_bound(mut self, c0: f64) -> Self {
        self.c0 = Some(c0);
        self
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &S {
        self.states.last().expect("a trace always holds its initial state")
    }

    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = self.times.partition_point(|&s| s < t - TIME_MATCH);
        (k < self.times.len() && (self.times[k] - t).abs() <= TIME_MATCH).then_some(k)
    }

    pub fn state_at(&self, t: f64) -> Result<&S> {
        self.index_of(t)
            .map(|k| &self.states[k])
            .ok_or(FlowError::NotRecorded(t))
    }

    /// Largest recorded curvature norm over all times.
    pub fn max_k(&self) -> f64 {
        self.k_max.iter().copied().fold(0.0, f64::max)
    }

    /// Largest recorded curvature norm on the closed interval.
    pub fn max_k_between(&self, t0: f64, t1: f64) -> f64 {
        let (lo, hi) = (t0.min(t1) - TIME_MATCH, t0.max(t1) + TIME_MATCH);
        self.times
            .iter()
            .zip(&self.k_max)
            .filter(|(&t, _)| t >= lo && t <= hi)
            .map(|(_, &k)| k)
            .fold(0.0, f64::max)
    }

    /// The declared bound, or the running max when none was declared.
    pub fn effective_c0(&self) -> f64 {
        self.c0.unwrap_or_else(|| self.max_k())
    }

    /// Indices where a declared bound is exceeded.
    pub fn curvature_violations(&self) -> Vec<usize> {
        match self.c0 {
            None => Vec::new(),
            Some(c0) => (0..self.len()).filter(|&k| self.k_max[k] > c0).collect(),
        }
    }

    /// CSV rows: `time,<coefficients…>,K_max`.
    pub fn to_csv(&self, coefficient_names: &[&str]) -> String {
        let mut out = String::from("time");
        for name in coefficient_names {
            out.push(',');
            out.push_str(name);
        }
        out.push_str(",K_max\n");
        for ((t, s), k) in self.times.iter().zip(&self.states).zip(&self.k_max) {
            out.push_str(&format!("{t:.17e}"));
            for c in s.coefficients() {
                out.push_str(&format!(",{c:.17e}"));
            }
            out.push_str(&format!(",{k:.17e}\n"));
        }
        out
    }
}

/// One classical fourth-order Runge–Kutta step.
pub(crate) fn rk4_step<F>(y: &[f64], dt: f64, mut f: F) -> Vec<f64>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(&yi, &ki)| yi + a * ki).collect() };
    let k1 = f(y);
    let k2 = f(&axpy(0.5 * dt, &k1));
    let k3 = f(&axpy(0.5 * dt, &k2));
    let k4 = f(&axpy(dt, &k3));
    (0..y.len())
        .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Split `[from, to]` into the fewest equal substeps no longer than `dt`.
pub(crate) fn substeps(from: f64, to: f64, dt: f64) -> (usize, f64) {
    let span = to - from;
    if span <= 0.0 {
        return (0, 0.0);
    }
    let n = ((span / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (n, span / n as f64)
}
