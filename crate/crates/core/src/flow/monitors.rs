//! Quantitative consequences of a curvature bound, checked on traces.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{FlowError, FlowState, FlowTrace, Result};
use crate::metric::RiemannianSample;
use crate::report::Assertion;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub c0: f64,
    pub delta: f64,
    /// `log(1+δ) / (2 C0)`.
    pub eta: f64,
    pub horizon: f64,
    /// Relative slack on the exponential ratio bounds (0 = exact).
    pub rel_tol: f64,
}

impl BoundParams {
    pub fn new(c0: f64, delta: f64, horizon: f64) -> Result<Self> {
        if !(c0 >= 0.0) || !c0.is_finite() {
            return Err(FlowError::Domain(format!("C0 must be nonnegative, got {c0}")));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(FlowError::Domain(format!("delta must be positive, got {delta}")));
        }
        let eta = if c0 == 0.0 {
            f64::INFINITY
        } else {
            delta.ln_1p() / (2.0 * c0)
        };
        Ok(Self {
            c0,
            delta,
            eta,
            horizon,
            rel_tol: 0.0,
        })
    }

    /// Parameters taking `C0` from the trace's declared bound or running max.
    pub fn for_trace<S: FlowState>(trace: &FlowTrace<S>, delta: f64) -> Result<Self> {
        Self::new(trace.effective_c0(), delta, *trace.times.last().unwrap_or(&0.0))
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn r_of_t(&self, t: f64) -> f64 {
        containment_radius(t)
    }
}

/// `r(t) = 1 / (1 + sqrt(e^{2t} - 1))`.
pub fn containment_radius(t: f64) -> f64 {
    1.0 / (1.0 + (2.0 * t).exp_m1().max(0.0).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorRecord {
    pub name: String,
    pub t0: f64,
    pub t: f64,
    pub assertions: Vec<Assertion>,
    pub values: BTreeMap<String, f64>,
}

impl MonitorRecord {
    fn new(name: &str, t0: f64, t: f64) -> Self {
        Self {
            name: name.to_string(),
            t0,
            t,
            assertions: Vec::new(),
            values: BTreeMap::new(),
        }
    }

    fn value(&mut self, key: &str, v: f64) {
        self.values.insert(key.to_string(), v);
    }

    pub fn pass(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    /// Smallest margin across the record's assertions.
    pub fn min_margin(&self) -> f64 {
        self.assertions.iter().map(|a| a.margin).fold(f64::INFINITY, f64::min)
    }
}

/// Distances between the same vertex pairs at two times.
#[derive(Debug, Clone, Copy)]
pub struct DistancePair<'a> {
    pub before: &'a [f64],
    pub after: &'a [f64],
    /// Additive discretization allowance.
    pub slack: f64,
}

fn coefficient_ratios<S: FlowState>(from: &S, to: &S) -> (f64, f64) {
    from.coefficients()
        .iter()
        .zip(to.coefficients())
        .map(|(g0, g1)| g1 / g0)
        .fold((f64::INFINITY, 0.0), |(lo, hi), r| (lo.min(r), hi.max(r)))
}

/// Coefficient ratio bounds, the short-time δ-closeness and, when
/// distances are supplied, the distance-change bound between `t0` and `t`.
pub fn check_metric_equivalence_bounds<S: FlowState>(
    trace: &FlowTrace<S>,
    params: &BoundParams,
    t0: f64,
    t: f64,
    distances: Option<DistancePair<'_>>,
) -> Result<MonitorRecord> {
    let s0 = trace.state_at(t0)?;
    let s1 = trace.state_at(t)?;
    let k = trace.max_k_between(t0, t);
    if k > params.c0 {
        return Err(FlowError::Hypothesis(format!(
            "K_max = {k} exceeds C0 = {} on [{}, {}]",
            params.c0,
            t0.min(t),
            t0.max(t)
        )));
    }
    let gap = (t - t0).abs();
    let growth = (2.0 * params.c0 * gap).exp();
    let (lo, hi) = coefficient_ratios(s0, s1);
    let mut rec = MonitorRecord::new("metric_equivalence", t0, t);
    rec.value("c0", params.c0);
    rec.value("ratio_min", lo);
    rec.value("ratio_max", hi);
    let tol = 1.0 + params.rel_tol;
    rec.assertions
        .push(Assertion::ge("ratio_lower", lo, 1.0 / (growth * tol)));
    rec.assertions.push(Assertion::le("ratio_upper", hi, growth * tol));
    if gap < params.eta {
        let dev = (1.0 - lo).max(hi - 1.0);
        rec.value("deviation", dev);
        rec.assertions.push(Assertion::le("delta_close", dev, params.delta));
    }
    if let Some(d) = distances {
        if d.before.len() != d.after.len() {
            return Err(FlowError::Domain("distance arrays differ in length".into()));
        }
        let root = (growth - 1.0).sqrt();
        let excess = d
            .before
            .iter()
            .zip(d.after)
            .map(|(d0, d1)| (d1 - d0).abs() - root * d0)
            .fold(f64::NEG_INFINITY, f64::max);
        rec.value("distance_excess", excess);
        rec.assertions
            .push(Assertion::le("distance_change", excess, d.slack).with_context(format!("sqrt(delta) = {root}")));
    }
    Ok(rec)
}

/// Largest `d_check(v)` over vertices with `d_ball(v) < radius`; 0 if none.
fn ball_reach(d_ball: &[f64], d_check: &[f64], radius: f64) -> f64 {
    d_ball
        .iter()
        .zip(d_check)
        .filter(|(&b, _)| b < radius)
        .map(|(_, &c)| c)
        .fold(0.0, f64::max)
}

/// Both inclusions `B_t(p, r(t)ρ) ⊂ B_0(p, ρ)` and `B_0(p, r(t)ρ) ⊂ B_t(p, ρ)`
/// on sampled balls, with the inner radius shrunk by the grid slack.
pub fn check_ball_containment<S, F>(
    trace: &FlowTrace<S>,
    sampler: F,
    basepoint: usize,
    rho: f64,
    t: f64,
) -> Result<MonitorRecord>
where
    S: FlowState,
    F: Fn(&S) -> Result<RiemannianSample>,
{
    if !(rho > 0.0) {
        return Err(FlowError::Domain(format!("radius must be positive, got {rho}")));
    }
    let k = trace.max_k_between(0.0, t);
    if k > 1.0 {
        return Err(FlowError::Hypothesis(format!("K_max = {k} exceeds 1 on [0, {t}]")));
    }
    let g0 = sampler(trace.state_at(0.0)?)?;
    let g1 = sampler(trace.state_at(t)?)?;
    if !g0.same_grid(&g1) {
        return Err(FlowError::Domain("samples at the two times differ in grid".into()));
    }
    let d0 = g0.distances_from(basepoint)?;
    let d1 = g1.distances_from(basepoint)?;
    let slack = g0.grid_slack().max(g1.grid_slack());
    let r = containment_radius(t);
    let inner = r * rho - slack;
    let mut rec = MonitorRecord::new("ball_containment", 0.0, t);
    rec.value("r", r);
    rec.value("rho", rho);
    rec.value("inner_radius", inner);
    rec.value("grid_slack", slack);
    rec.assertions.push(Assertion::lt(
        "later_ball_inside_initial",
        ball_reach(&d1, &d0, inner),
        rho,
    ));
    rec.assertions.push(Assertion::lt(
        "initial_ball_inside_later",
        ball_reach(&d0, &d1, inner),
        rho,
    ));
    Ok(rec)
}

/// From `|∂g/∂t| <= C g` (checked on consecutive records) conclude
/// `e^{-C't} g(0) <= g(t) <= e^{C't} g(0)` with `C' = 2C` at every record.
pub fn check_lipschitz_equivalence<S: FlowState>(trace: &FlowTrace<S>, c: f64) -> Result<MonitorRecord> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(FlowError::Domain(format!(
            "derivative bound must be nonnegative, got {c}"
        )));
    }
    let coeffs: Vec<Vec<f64>> = trace.states.iter().map(FlowState::coefficients).collect();
    let mut rate = 0.0f64;
    for k in 1..trace.len() {
        let dt = trace.times[k] - trace.times[k - 1];
        if dt <= 0.0 {
            continue;
        }
        for (g0, g1) in coeffs[k - 1].iter().zip(&coeffs[k]) {
            rate = rate.max((g1 / g0).ln().abs() / dt);
        }
    }
    if rate > c * (1.0 + 1e-9) {
        return Err(FlowError::Hypothesis(format!(
            "observed log-derivative {rate} exceeds C = {c}"
        )));
    }
    let c_prime = 2.0 * c;
    let mut lower_margin = f64::INFINITY;
    let mut upper_margin = f64::INFINITY;
    let mut worst = (1.0f64, 1.0f64, 1.0f64, 1.0f64);
    for (k, &t) in trace.times.iter().enumerate() {
        let bound = (c_prime * t).exp();
        for (g0, g1) in coeffs[0].iter().zip(&coeffs[k]) {
            let ratio = g1 / g0;
            if ratio - 1.0 / bound < lower_margin {
                lower_margin = ratio - 1.0 / bound;
                worst.0 = ratio;
                worst.1 = 1.0 / bound;
            }
            if bound - ratio < upper_margin {
                upper_margin = bound - ratio;
                worst.2 = ratio;
                worst.3 = bound;
            }
        }
    }
    let mut rec = MonitorRecord::new("lipschitz_equivalence", 0.0, *trace.times.last().unwrap_or(&0.0));
    rec.value("c", c);
    rec.value("c_prime", c_prime);
    rec.value("observed_rate", rate);
    rec.assertions.push(Assertion::ge("lower", worst.0, worst.1));
    rec.assertions.push(Assertion::le("upper", worst.2, worst.3));
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::super::{integrate_nil, integrate_warped_surface, stable_dt, NilMetric, WarpedSurfaceMetric};
    use super::*;

    #[test]
    fn containment_radius_values() {
        assert_eq!(containment_radius(0.0), 1.0);
        assert!((containment_radius(2f64.sqrt().ln()) - 0.5).abs() < 1e-15);
        let ts: Vec<f64> = (0..200).map(|k| k as f64 * 0.01).collect();
        assert!(ts
            .windows(2)
            .all(|w| containment_radius(w[1]) < containment_radius(w[0])));
    }

    #[test]
    fn eta_formula() {
        let p = BoundParams::new(2.0, 0.5, 1.0).unwrap();
        assert!((p.eta - 1.5f64.ln() / 4.0).abs() < 1e-16);
        assert!(BoundParams::new(0.0, 0.1, 1.0).unwrap().eta.is_infinite());
    }

    #[test]
    fn flat_trace_has_unit_ratios() {
        let m = WarpedSurfaceMetric::from_fn(32, 1.0, |_| 1.0).unwrap();
        let tr = integrate_warped_surface(&m, 0.1, stable_dt(&m)).unwrap();
        let p = BoundParams::for_trace(&tr, 0.1).unwrap();
        let rec = check_metric_equivalence_bounds(&tr, &p, 0.0, 0.1, None).unwrap();
        assert_eq!(rec.values["ratio_min"], 1.0);
        assert_eq!(rec.values["ratio_max"], 1.0);
        assert!(rec.pass());
        let lip = check_lipschitz_equivalence(&tr, 0.0).unwrap();
        assert!(lip.pass());
    }

    #[test]
    fn hypothesis_errors() {
        let m0 = NilMetric::new(1.0, 1.0, 1.0).unwrap();
        let tr = integrate_nil(m0, 0.1, 1e-2).unwrap();
        let p = BoundParams::new(0.1, 0.1, 0.1).unwrap();
        assert!(matches!(
            check_metric_equivalence_bounds(&tr, &p, 0.0, 0.1, None),
            Err(FlowError::Hypothesis(_))
        ));
        assert!(matches!(
            check_lipschitz_equivalence(&tr, 0.1),
            Err(FlowError::Hypothesis(_))
        ));
        assert!(matches!(
            check_metric_equivalence_bounds(&tr, &p, 0.0, 0.123, None),
            Err(FlowError::NotRecorded(_))
        ));
    }
}
