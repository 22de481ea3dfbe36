//! The collapsing torus `dr² + i⁻¹ f(r)² ds²` under Ricci flow.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::{config_value, linspace, merge_times, nonincreasing, AtCell, Result, ScenarioConfig, WorstCase};
use crate::flow::{
    check_ball_containment, check_lipschitz_equivalence, check_metric_equivalence_bounds, integrate_warped_surface_at,
    stable_dt, BoundParams, DistancePair, FlowError, FlowTrace, WarpedSurfaceMetric,
};
use crate::gh::{gh_upper_bound_with, PointedMap, SearchOptions};
use crate::metric::{geodesic_distances, sample_circle, sample_diagonal_torus};
use crate::report::{Assertion, CellRecord, Report};
use crate::rng::split_seed;

const NAME: &str = "collapsing_torus";

/// Record intervals laid over `[0, T]` in addition to the configured times.
const MONITOR_INTERVALS: usize = 40;

struct PerI {
    i: u64,
    records: Vec<CellRecord>,
    checks: WorstCase,
    extra: Vec<Assertion>,
    gh_at_zero: f64,
    gh_slack: f64,
    c_hat_change: f64,
    flow_slack: f64,
    skipped_containment: Vec<String>,
}

/// Every `stride`-th entry.
fn every(v: &[f64], stride: usize) -> Vec<f64> {
    v.iter().step_by(stride).copied().collect()
}

/// Torus `λ²` collapse for each `i`: GH distance to the limit circle, the
/// flow's curvature-controlled bounds, and the drift of the limit circle.
pub fn run_collapsing_torus(cfg: &ScenarioConfig) -> Result<Report> {
    cfg.validate()?;
    let runs: Vec<PerI> = cfg.i_list.par_iter().map(|&i| run_one(cfg, i)).collect::<Result<_>>()?;

    let gh_slack = runs.iter().map(|r| r.gh_slack).fold(0.0, f64::max);
    let mut report = Report::new(NAME, config_value(cfg), gh_slack);
    let max_f = cfg.f.max();
    let mut skipped = Vec::new();
    for run in &runs {
        let i = run.i as f64;
        let bound = 1.1 * PI * max_f / i.sqrt() + run.gh_slack;
        report.assert(
            Assertion::le("gh_t0_collapse_bound", run.gh_at_zero, bound).with_context(format!("i = {}", run.i)),
        );
        report.extend(run.checks.worst.values().cloned());
        report.extend(run.extra.iter().cloned());
        skipped.extend(run.skipped_containment.iter().cloned());
    }
    let labels: Vec<u64> = runs.iter().map(|r| r.i).collect();
    let gh0: Vec<f64> = runs.iter().map(|r| r.gh_at_zero).collect();
    report.extend(nonincreasing("gh_t0_nonincreasing", &labels, &gh0));

    let last = runs.last().expect("nonempty i_list");
    let ctx = format!("i = {}, t = {}", last.i, cfg.horizon());
    if cfg.f.is_constant() {
        report.assert(Assertion::le("c_hat_stationary", last.c_hat_change, last.flow_slack).with_context(ctx));
    } else {
        report
            .assert(Assertion::gt("c_hat_nonstationary", last.c_hat_change, 10.0 * last.flow_slack).with_context(ctx));
    }
    if !skipped.is_empty() {
        report.note("containment_not_applicable", skipped);
    }
    for run in runs {
        report.records.extend(run.records);
    }
    Ok(report)
}

fn run_one(cfg: &ScenarioConfig, i: u64) -> Result<PerI> {
    let lambda = (i as f64).powf(-0.5);
    let m0 = WarpedSurfaceMetric::from_fn(cfg.nr, lambda, |r| cfg.f.eval(r)).at(NAME, i, 0.0)?;
    let horizon = cfg.horizon().max(*cfg.containment_times.last().unwrap_or(&0.0));
    let times = merge_times(&[
        &cfg.t_grid,
        &cfg.containment_times,
        &linspace(horizon, MONITOR_INTERVALS),
    ]);
    let dt = cfg.dt.unwrap_or_else(|| stable_dt(&m0));
    let trace = integrate_warped_surface_at(&m0, &times, dt).at(NAME, i, 0.0)?;
    let c0 = trace.max_k();

    let mut checks = WorstCase::default();
    let mut extra = Vec::new();
    let mut skipped = Vec::new();
    pairwise_bounds(cfg, i, &trace, &mut checks)?;
    let flow_slack = distance_bounds(cfg, i, &trace, c0, &mut checks)?;

    for &t in &cfg.containment_times {
        for &rho in &cfg.rho_list {
            let ctx = format!("i = {i}, t = {t}, rho = {rho}");
            match check_ball_containment(&trace, |s| s.sample(cfg.ns), 0, rho, t) {
                Ok(rec) => checks.add_record("containment", &ctx, &rec),
                Err(FlowError::Hypothesis(why)) => skipped.push(format!("{ctx}: {why}")),
                Err(e) => return Err(e).at(NAME, i, t),
            }
        }
    }

    let lip = check_lipschitz_equivalence(&trace, 2.0 * c0).at(NAME, i, horizon)?;
    checks.add_record("lipschitz", &format!("i = {i}, C = {}", 2.0 * c0), &lip);
    let c_prime = lip.values["c_prime"];
    let c_hat0 = m0.r_circumference();
    for (&t, s) in trace.times.iter().zip(&trace.states).skip(1) {
        let ratio = s.r_circumference() / c_hat0;
        let growth = (c_prime * t).exp();
        let ctx = format!("i = {i}, t = {t}, C' = {c_prime}");
        checks.add("c_hat_lipschitz", &ctx, Assertion::ge("lower", ratio, 1.0 / growth));
        checks.add("c_hat_lipschitz", &ctx, Assertion::le("upper", ratio, growth));
    }

    let mut records = Vec::new();
    let mut gh_at_zero = f64::NAN;
    let mut gh_slack = 0.0f64;
    for (k, &t) in cfg.t_grid.iter().enumerate() {
        let state = trace.state_at(t).at(NAME, i, t)?;
        let cell = gh_cell(cfg, i, k, t, state).at(NAME, i, t)?;
        let mut rec = CellRecord::new(i as f64, t);
        rec.gh_lower = Some(cell.lower);
        rec.gh_upper = Some(cell.upper);
        rec.k_max = Some(trace.k_max[trace.index_of(t).expect("recorded")]);
        rec.values.insert("lambda".into(), lambda);
        rec.values.insert("c_hat".into(), state.r_circumference());
        rec.values.insert("c_hat_gh".into(), cell.c_hat);
        rec.values.insert("grid_slack".into(), cell.slack);
        rec.values.insert("area".into(), state.area());
        rec.values.insert("total_curvature".into(), state.total_curvature());
        if k == 0 {
            gh_at_zero = cell.upper;
            gh_slack = cell.slack;
            let bound = 1.1 * PI * cfg.f.max() * lambda + cell.slack;
            rec.margins.insert("gh_bound".into(), bound - cell.upper);
            rec.pass = cell.upper <= bound;
        }
        let ratio = state.r_circumference() / c_hat0;
        let growth = (c_prime * t).exp();
        let m = (ratio - 1.0 / growth).min(growth - ratio);
        rec.margins.insert("c_hat_lipschitz".into(), m);
        rec.pass &= m >= 0.0;
        records.push(rec);
    }
    let t_end = cfg.horizon();
    let c_hat_end = trace.state_at(t_end).at(NAME, i, t_end)?.r_circumference();
    let (gb_t, gb) = trace
        .times
        .iter()
        .zip(&trace.states)
        .map(|(&t, s)| (t, s.total_curvature().abs()))
        .fold((0.0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    extra.push(Assertion::le("gauss_bonnet", gb, 1e-4).with_context(format!("i = {i}, worst t = {gb_t}")));
    Ok(PerI {
        i,
        records,
        checks,
        extra,
        gh_at_zero,
        gh_slack,
        c_hat_change: (c_hat_end - c_hat0).abs(),
        flow_slack,
        skipped_containment: skipped,
    })
}

/// Coefficient-ratio bounds on every recorded pair, for each δ.
fn pairwise_bounds(
    cfg: &ScenarioConfig,
    i: u64,
    trace: &FlowTrace<WarpedSurfaceMetric>,
    checks: &mut WorstCase,
) -> Result<()> {
    let c0 = trace.max_k();
    for &delta in &cfg.deltas {
        let params = BoundParams::new(c0, delta, *trace.times.last().unwrap())
            .at(NAME, i, 0.0)?
            .with_rel_tol(cfg.rel_tol);
        for (a, &t0) in trace.times.iter().enumerate() {
            for &t1 in &trace.times[a + 1..] {
                let rec = check_metric_equivalence_bounds(trace, &params, t0, t1, None).at(NAME, i, t1)?;
                checks.add_record(
                    "metric_bounds",
                    &format!("i = {i}, delta = {delta}, t0 = {t0}, t = {t1}"),
                    &rec,
                );
            }
        }
    }
    Ok(())
}

/// Distance-change bound from the basepoint on full-resolution samples,
/// between `t = 0` and each configured time. Returns the flow sample's
/// grid slack at `t = 0`.
fn distance_bounds(
    cfg: &ScenarioConfig,
    i: u64,
    trace: &FlowTrace<WarpedSurfaceMetric>,
    c0: f64,
    checks: &mut WorstCase,
) -> Result<f64> {
    let s0 = trace.states[0].sample(cfg.ns).at(NAME, i, 0.0)?;
    let d0 = s0.distances_from(0).at(NAME, i, 0.0)?;
    let params = BoundParams::new(c0, cfg.deltas[0], cfg.horizon())
        .at(NAME, i, 0.0)?
        .with_rel_tol(cfg.rel_tol);
    for &t in cfg.t_grid.iter().skip(1) {
        let s1 = trace.state_at(t).and_then(|s| s.sample(cfg.ns)).at(NAME, i, t)?;
        let d1 = s1.distances_from(0).at(NAME, i, t)?;
        let pair = DistancePair {
            before: &d0,
            after: &d1,
            slack: s0.grid_slack().max(s1.grid_slack()),
        };
        let rec = check_metric_equivalence_bounds(trace, &params, 0.0, t, Some(pair)).at(NAME, i, t)?;
        if let Some(a) = rec.assertions.iter().find(|a| a.name == "distance_change") {
            checks.add("distance_bound", &format!("i = {i}, t = {t}"), a.clone());
        }
    }
    Ok(s0.grid_slack())
}

/// s-resolution of the GH sample: the s-step `λ·2π/n_s` matches the r-step
/// `2π/gh_nr`, within `[8, gh_ns]`.
pub(crate) fn fiber_points(cfg: &ScenarioConfig, i: u64) -> usize {
    let n = (cfg.gh_nr as f64 / (i as f64).sqrt()).round() as usize;
    n.clamp(8, cfg.gh_ns)
}

/// Radial index of the shortest s-circle (first one on ties).
fn thinnest_fiber(b: &[f64]) -> usize {
    (0..b.len()).fold(0, |best, j| if b[j] < b[best] { j } else { best })
}

struct GhCell {
    lower: f64,
    upper: f64,
    c_hat: f64,
    slack: f64,
}

/// GH bound between the coarse torus sample and the circle of its own
/// r-loop length, seeded with the projection and the `s = 0` section.
fn gh_cell(
    cfg: &ScenarioConfig,
    i: u64,
    t_index: usize,
    _t: f64,
    state: &WarpedSurfaceMetric,
) -> std::result::Result<GhCell, super::ModuleError> {
    let stride = cfg.nr / cfg.gh_nr;
    let a = every(state.a(), stride);
    let b = every(state.b(), stride);
    let coarse = WarpedSurfaceMetric::new(a.clone(), b.clone())?;
    let n_s = fiber_points(cfg, i);
    let sample = sample_diagonal_torus(&a, &b, n_s)?;
    let grid = sample.grid();
    let j0 = thinnest_fiber(&b);
    let torus = geodesic_distances(&sample, grid.index(&[j0, 0]))?;
    let c_hat = coarse.r_circumference();
    let circle = sample_circle(c_hat, cfg.gh_nr)?.rebase(j0)?;
    let projection: Vec<usize> = (0..torus.len()).map(|v| grid.multi_index(v)[0]).collect();
    let section: Vec<usize> = (0..cfg.gh_nr).map(|j| grid.index(&[j, 0])).collect();
    let opts = SearchOptions::new(cfg.budget, split_seed(cfg.seed, &[i, t_index as u64]))
        .with_hints(vec![PointedMap::new(projection)], vec![PointedMap::new(section)]);
    let est = gh_upper_bound_with(&torus, &circle, &opts)?;
    Ok(GhCell {
        lower: est.lower,
        upper: est.upper,
        c_hat,
        slack: sample.grid_slack(),
    })
}
