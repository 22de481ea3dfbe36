//! Left-invariant metrics `A (dz - x dy)² + B dy² + C dx²` on the
//! Heisenberg group.
//!
//! In the orthonormal Milnor frame the only structure constant is
//! `λ = sqrt(A / (BC))`. The sectional curvatures are
//!
//! ```text
//! K(dy, dx)        = -3λ²/4
//! K(dz-xdy, dy)    =  λ²/4
//! K(dz-xdy, dx)    =  λ²/4
//! ```
//!
//! so the Ricci eigenvalues are `λ²/2` on the fiber direction and `-λ²/2` on
//! the other two. The Ricci flow `∂g = -2 Ric` then reads
//!
//! ```text
//! A' = -A²/(BC),   B' = A/C,   C' = A/B.
//! ```

use serde::{Deserialize, Serialize};

use super::{rk4_step, substeps, FlowError, FlowState, FlowTrace, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NilMetric {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl NilMetric {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let m = Self { a, b, c };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("A", self.a), ("B", self.b), ("C", self.c)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(FlowError::Domain(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    fn from_slice(v: &[f64]) -> Self {
        Self {
            a: v[0],
            b: v[1],
            c: v[2],
        }
    }

    /// `λ² = A / (BC)`, the squared structure constant.
    pub fn structure_constant_sq(&self) -> f64 {
        self.a / (self.b * self.c)
    }
}

impl FlowState for NilMetric {
    fn coefficients(&self) -> Vec<f64> {
        self.as_array().to_vec()
    }

    fn curvature_norm(&self) -> f64 {
        nil_curvature_norm(self)
    }
}

pub fn nil_ricci_derivative(m: &NilMetric) -> [f64; 3] {
    let (a, b, c) = (m.a, m.b, m.c);
    [-a * a / (b * c), a / c, a / b]
}

/// Sectional curvatures of the three coordinate planes, in the order
/// `(fiber, dy)`, `(fiber, dx)`, `(dy, dx)`.
pub fn nil_sectional_curvatures(m: &NilMetric) -> [f64; 3] {
    let mu = m.structure_constant_sq();
    [0.25 * mu, 0.25 * mu, -0.75 * mu]
}

/// Largest sectional curvature magnitude, `3A / (4BC)`.
pub fn nil_curvature_norm(m: &NilMetric) -> f64 {
    nil_sectional_curvatures(m).iter().map(|k| k.abs()).fold(0.0, f64::max)
}

/// Largest `h · A/(BC)` taken in one internal step.
const STIFFNESS_CAP: f64 = 0.002;

/// RK4 integration over `[0, T]` in equal steps no longer than `dt`; every
/// step is recorded. A step is further subdivided when `dt · A/(BC)` exceeds
/// a fixed cap, so steep initial data keeps the first integrals accurate.
pub fn integrate_nil(m0: NilMetric, t_end: f64, dt: f64) -> Result<FlowTrace<NilMetric>> {
    run_nil(m0, t_end, dt, Some(STIFFNESS_CAP))
}

/// Plain RK4 in equal steps no longer than `dt`, without subdivision.
pub fn integrate_nil_fixed(m0: NilMetric, t_end: f64, dt: f64) -> Result<FlowTrace<NilMetric>> {
    run_nil(m0, t_end, dt, None)
}

fn run_nil(m0: NilMetric, t_end: f64, dt: f64, cap: Option<f64>) -> Result<FlowTrace<NilMetric>> {
    m0.validate()?;
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(FlowError::Domain(format!("horizon must be nonnegative, got {t_end}")));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(FlowError::Domain(format!("time step must be positive, got {dt}")));
    }
    let mut trace = FlowTrace::start(m0);
    let (n, h) = substeps(0.0, t_end, dt);
    let mut y = m0.as_array().to_vec();
    for k in 1..=n {
        let inner = match cap {
            Some(cap) => {
                let rate = NilMetric::from_slice(&y).structure_constant_sq();
                ((h * rate / cap).ceil() as usize).max(1)
            }
            None => 1,
        };
        let hi = h / inner as f64;
        for _ in 0..inner {
            y = rk4_step(&y, hi, |v| nil_ricci_derivative(&NilMetric::from_slice(v)).to_vec());
        }
        let t = if k == n { t_end } else { k as f64 * h };
        let m = NilMetric::from_slice(&y);
        if m.validate().is_err() {
            return Err(FlowError::Aborted {
                t,
                reason: format!("state left the positive cone: {y:?}"),
            });
        }
        trace.push(t, m);
    }
    Ok(trace)
}

/// The explicit family `A = (2t+C₁)^{-1/2}`, `B = C₂ (2t+C₁)^{1/2}`,
/// `C = C₃ (2t+C₁)^{1/2}`, evaluated as written.
pub fn paper_nil_closed_form(c1: f64, c2: f64, c3: f64, t: f64) -> Result<NilMetric> {
    let w = 2.0 * t + c1;
    if !(w > 0.0) {
        return Err(FlowError::Domain(format!("2t + C1 = {w} is not positive")));
    }
    let s = w.sqrt();
    NilMetric::new(1.0 / s, c2 * s, c3 * s)
}

/// Exact solution through any positive `m0`:
/// `u = 1 + 3A₀t/(B₀C₀)`, `A = A₀u^{-1/3}`, `B = B₀u^{1/3}`, `C = C₀u^{1/3}`.
pub fn nil_similarity_solution(m0: &NilMetric, t: f64) -> Result<NilMetric> {
    let u = 1.0 + 3.0 * m0.a * t / (m0.b * m0.c);
    if !(u > 0.0) {
        return Err(FlowError::Domain(format!(
            "t = {t} is before the solution's birth time"
        )));
    }
    let k = u.cbrt();
    NilMetric::new(m0.a / k, m0.b * k, m0.c * k)
}

/// A closed-form curve together with its exact time derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NilClosedForm {
    Paper { c1: f64, c2: f64, c3: f64 },
    Similarity { m0: NilMetric },
}

impl NilClosedForm {
    pub fn value(&self, t: f64) -> Result<NilMetric> {
        match *self {
            Self::Paper { c1, c2, c3 } => paper_nil_closed_form(c1, c2, c3, t),
            Self::Similarity { m0 } => nil_similarity_solution(&m0, t),
        }
    }

    pub fn derivative(&self, t: f64) -> Result<[f64; 3]> {
        match *self {
            Self::Paper { c1, c2, c3 } => {
                let w = 2.0 * t + c1;
                if !(w > 0.0) {
                    return Err(FlowError::Domain(format!("2t + C1 = {w} is not positive")));
                }
                let s = w.sqrt();
                Ok([-1.0 / (w * s), c2 / s, c3 / s])
            }
            Self::Similarity { m0 } => {
                let u = 1.0 + 3.0 * m0.a * t / (m0.b * m0.c);
                if !(u > 0.0) {
                    return Err(FlowError::Domain(format!(
                        "t = {t} is before the solution's birth time"
                    )));
                }
                let k = u.cbrt();
                Ok([
                    -m0.a * m0.a / (m0.b * m0.c * k.powi(4)),
                    m0.a / (m0.c * k * k),
                    m0.a / (m0.b * k * k),
                ])
            }
        }
    }

    /// `max_k |x'_k - F_k(x)| / max_k |F_k(x)|` at one time.
    pub fn residual_at(&self, t: f64) -> Result<f64> {
        let d = self.derivative(t)?;
        let f = nil_ricci_derivative(&self.value(t)?);
        let scale = f.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let err = d.iter().zip(&f).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        Ok(err / scale)
    }

    /// Largest relative residual over `samples + 1` equally spaced times
    /// in `[0, t_end]`.
    pub fn max_residual(&self, t_end: f64, samples: usize) -> Result<f64> {
        let samples = samples.max(1);
        (0..=samples)
            .map(|j| self.residual_at(t_end * j as f64 / samples as f64))
            .try_fold(0.0f64, |acc, r| Ok(acc.max(r?)))
    }
}

/// Residual threshold below which a closed form counts as an exact solution.
pub const RESIDUAL_ZERO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub t_end: f64,
    pub samples: usize,
    pub paper_residual_at_zero: f64,
    pub paper_residual: f64,
    /// Worst time for the paper's family.
    pub paper_worst_t: f64,
    /// Similarity solution through the paper's `t = 0` state.
    pub similarity_residual: f64,
    /// Which form solves the implemented system: `"similarity"`, `"paper"`,
    /// `"both"` or `"none"`.
    pub residual_zero_form: String,
}

/// Compare the paper's family and the similarity solution (started at the
/// same `t = 0` state) against the implemented system on `[0, t_end]`.
pub fn nil_residual_report(c1: f64, c2: f64, c3: f64, t_end: f64, samples: usize) -> Result<ResidualReport> {
    let paper = NilClosedForm::Paper { c1, c2, c3 };
    let m0 = paper.value(0.0)?;
    let sim = NilClosedForm::Similarity { m0 };
    let samples = samples.max(1);
    let mut paper_residual = 0.0f64;
    let mut paper_worst_t = 0.0;
    for j in 0..=samples {
        let t = t_end * j as f64 / samples as f64;
        let r = paper.residual_at(t)?;
        if r > paper_residual {
            paper_residual = r;
            paper_worst_t = t;
        }
    }
    let similarity_residual = sim.max_residual(t_end, samples)?;
    let residual_zero_form = match (paper_residual <= RESIDUAL_ZERO, similarity_residual <= RESIDUAL_ZERO) {
        (true, true) => "both",
        (true, false) => "paper",
        (false, true) => "similarity",
        (false, false) => "none",
    }
    .to_string();
    Ok(ResidualReport {
        c1,
        c2,
        c3,
        t_end,
        samples,
        paper_residual_at_zero: paper.residual_at(0.0)?,
        paper_residual,
        paper_worst_t,
        similarity_residual,
        residual_zero_form,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_at_unit_metric() {
        let m = NilMetric::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(nil_ricci_derivative(&m), [-1.0, 1.0, 1.0]);
        assert_eq!(nil_curvature_norm(&m), 0.75);
    }

    #[test]
    fn curvature_norm_vanishes_in_flat_limit() {
        for s in [1e2, 1e4, 1e8] {
            let m = NilMetric::new(1.0, s, s).unwrap();
            assert!(nil_curvature_norm(&m) <= 1.0 / (s * s));
        }
        // Ricci eigenvalues from the sectional curvatures match the ODE
        let m = NilMetric::new(0.7, 1.3, 2.1).unwrap();
        let [k12, k13, k23] = nil_sectional_curvatures(&m);
        let ric = [k12 + k13, k12 + k23, k13 + k23];
        let d = nil_ricci_derivative(&m);
        for (i, coef) in [m.a, m.b, m.c].into_iter().enumerate() {
            assert!((d[i] + 2.0 * ric[i] * coef).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(NilMetric::new(0.0, 1.0, 1.0).is_err());
        assert!(NilMetric::new(1.0, f64::NAN, 1.0).is_err());
        assert!(paper_nil_closed_form(-1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn zero_horizon_keeps_only_initial_state() {
        let m0 = NilMetric::new(1.0, 2.0, 3.0).unwrap();
        let tr = integrate_nil(m0, 0.0, 1e-3).unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.states[0], m0);
    }

    #[test]
    fn paper_form_substitution() {
        assert_eq!(
            paper_nil_closed_form(1.0, 1.0, 1.0, 0.0).unwrap(),
            NilMetric::new(1.0, 1.0, 1.0).unwrap()
        );
        assert_eq!(paper_nil_closed_form(1.0, 1.0, 1.0, 1.5).unwrap().a, 0.5);
    }

    #[test]
    fn similarity_solution_has_zero_residual_for_generic_data() {
        for m0 in [(1.0, 3f64.sqrt(), 3f64.sqrt()), (0.3, 2.0, 5.0), (4.0, 0.5, 0.7)] {
            let m0 = NilMetric::new(m0.0, m0.1, m0.2).unwrap();
            let r = NilClosedForm::Similarity { m0 }.max_residual(2.0, 64).unwrap();
            assert!(r < 1e-14, "residual {r}");
        }
    }

    #[test]
    fn residual_report_for_unit_constants() {
        let r = nil_residual_report(1.0, 1.0, 1.0, 1.0, 100).unwrap();
        assert_eq!(r.paper_residual_at_zero, 0.0);
        // at t = 1: A' = -3^{-3/2} while -A²/(BC) = -1/9
        assert!(r.paper_residual > 0.1);
        assert_eq!(r.residual_zero_form, "similarity");
    }
}
