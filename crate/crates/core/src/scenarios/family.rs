//! Finite-grid content of the family-compactness statement: the continuity
//! modulus in `t` and Cauchy behavior in `i`, uniformly over a time grid.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{
    config_value, linspace, merge_times, nonincreasing, AtCell, FamilyKind, ModuleError, Result, ScenarioConfig,
    WarpSpec, WorstCase,
};
use crate::flow::{
    check_metric_equivalence_bounds, integrate_warped_surface_at, stable_dt, BoundParams, FlowTrace,
    WarpedSurfaceMetric,
};
use crate::gh::{gh_brute_force, EpsGrid};
use crate::metric::{farthest_point_sampling, sample_circle, FiniteMetricSpace};
use crate::report::{Assertion, CellRecord, Report};

const NAME: &str = "family_convergence";

/// Landmarks per space handed to the exhaustive GH oracle.
pub const LANDMARKS: usize = 4;

/// Record intervals over `[0, T]` used by the modulus check.
const MODULUS_INTERVALS: usize = 64;

/// Label for the limit space in pairwise tables.
const LIMIT: &str = "limit";

struct Member {
    i: u64,
    trace: FlowTrace<WarpedSurfaceMetric>,
    /// One landmark subspace per configured time.
    spaces: Vec<FiniteMetricSpace>,
    slack: f64,
}

#[derive(Debug, Clone, Serialize)]
struct ChainConstants {
    i: u64,
    j: String,
    t: f64,
    eps: f64,
    four_eps: f64,
    sixteen_eps: f64,
}

fn initial_metric(cfg: &ScenarioConfig, i: u64) -> crate::flow::Result<WarpedSurfaceMetric> {
    match cfg.family {
        FamilyKind::CollapsingTorus => {
            let f = cfg.f;
            WarpedSurfaceMetric::from_fn(cfg.nr, (i as f64).powf(-0.5), move |r| f.eval(r))
        }
        FamilyKind::Flat => {
            let f = WarpSpec::constant(1.0);
            WarpedSurfaceMetric::from_fn(cfg.nr, 1.0, move |r| f.eval(r))
        }
    }
}

fn build_member(cfg: &ScenarioConfig, i: u64) -> Result<Member> {
    let m0 = initial_metric(cfg, i).at(NAME, i, 0.0)?;
    let times = merge_times(&[&cfg.t_grid, &linspace(cfg.horizon(), MODULUS_INTERVALS)]);
    let dt = cfg.dt.unwrap_or_else(|| stable_dt(&m0));
    let trace = integrate_warped_surface_at(&m0, &times, dt).at(NAME, i, 0.0)?;
    let s0 = m0.sample(cfg.ns).at(NAME, i, 0.0)?;
    let n = s0.vertex_count();
    let landmarks = farthest_point_sampling(n, 0, LANDMARKS, |v| s0.distances_from(v)).at(NAME, i, 0.0)?;
    let mut spaces = Vec::with_capacity(cfg.t_grid.len());
    for &t in &cfg.t_grid {
        let state = trace.state_at(t).at(NAME, i, t)?;
        let space = landmark_space(state, cfg.ns, &landmarks).at(NAME, i, t)?;
        spaces.push(space);
    }
    Ok(Member {
        i,
        trace,
        spaces,
        slack: s0.grid_slack(),
    })
}

fn landmark_space(
    state: &WarpedSurfaceMetric,
    n_s: usize,
    landmarks: &[usize],
) -> std::result::Result<FiniteMetricSpace, ModuleError> {
    let sample = state.sample(n_s)?;
    let rows = landmarks
        .iter()
        .map(|&l| {
            let row = sample.distances_from(l)?;
            Ok(landmarks.iter().map(|&m| row[m]).collect())
        })
        .collect::<std::result::Result<Vec<Vec<f64>>, ModuleError>>()?;
    Ok(FiniteMetricSpace::new(rows, 0, 0.0)?)
}

/// The limit at each configured time: the circle of the r-loop length for
/// the collapsing family, the (unchanging) member itself for the flat one.
fn limit_spaces(cfg: &ScenarioConfig, last: &Member) -> Result<Vec<FiniteMetricSpace>> {
    match cfg.family {
        FamilyKind::Flat => Ok(last.spaces.clone()),
        FamilyKind::CollapsingTorus => cfg
            .t_grid
            .iter()
            .map(|&t| {
                let state = last.trace.state_at(t).at(NAME, last.i, t)?;
                let circle = sample_circle(state.r_circumference(), cfg.nr).at(NAME, last.i, t)?;
                let net = circle.farthest_points(LANDMARKS);
                circle.subspace(&net, 0).at(NAME, last.i, t)
            })
            .collect(),
    }
}

/// Modulus check and Cauchy bounds over `i_list` and `t_grid`.
pub fn run_family_convergence(cfg: &ScenarioConfig) -> Result<Report> {
    cfg.validate()?;
    let members: Vec<Member> = cfg
        .i_list
        .par_iter()
        .map(|&i| build_member(cfg, i))
        .collect::<Result<_>>()?;
    let limit = limit_spaces(cfg, members.last().expect("nonempty"))?;
    let slack = members.iter().map(|m| m.slack).fold(0.0, f64::max);
    let mut report = Report::new(NAME, config_value(cfg), slack);
    let grid = EpsGrid::default();

    // pairwise GH at each time: member k against every later member and the limit
    let mut eps = vec![0.0f64; members.len()];
    let mut worst: Option<ChainConstants> = None;
    let mut table = Vec::new();
    for (k, m) in members.iter().enumerate() {
        for (ti, &t) in cfg.t_grid.iter().enumerate() {
            let mut rec = CellRecord::new(m.i as f64, t);
            rec.k_max = Some(m.trace.k_max[m.trace.index_of(t).expect("recorded")]);
            let mut tail = 0.0f64;
            let mut tail_lower = 0.0f64;
            let others = members[k + 1..]
                .iter()
                .map(|o| (o.i.to_string(), &o.spaces[ti]))
                .chain(std::iter::once((LIMIT.to_string(), &limit[ti])));
            for (label, other) in others {
                let est = gh_brute_force(&m.spaces[ti], other, &grid).at(NAME, m.i, t)?;
                rec.values.insert(format!("gh_to_{label}"), est.upper);
                table.push((m.i, label.clone(), t, est.upper));
                tail_lower = tail_lower.max(est.lower);
                if est.upper > tail {
                    tail = est.upper;
                }
                if est.upper > eps[k] {
                    eps[k] = est.upper;
                }
                if worst.as_ref().is_none_or(|w| est.upper > w.eps) {
                    worst = Some(ChainConstants {
                        i: m.i,
                        j: label,
                        t,
                        eps: est.upper,
                        four_eps: 4.0 * est.upper,
                        sixteen_eps: 16.0 * est.upper,
                    });
                }
            }
            rec.gh_lower = Some(tail_lower);
            rec.gh_upper = Some(tail);
            rec.values.insert("grid_slack".into(), m.slack);
            records_push(&mut report, rec);
        }
    }
    for (k, m) in members.iter().enumerate() {
        for r in report.records.iter_mut().filter(|r| r.i == m.i as f64) {
            let margin = eps[k] - r.gh_upper.unwrap_or(0.0);
            r.margins.insert("cauchy".into(), margin);
            r.pass &= margin >= 0.0;
        }
    }
    let labels: Vec<u64> = members.iter().map(|m| m.i).collect();
    report.extend(nonincreasing("cauchy_eps_nonincreasing", &labels, &eps));
    report.note(
        "eps",
        labels
            .iter()
            .zip(&eps)
            .map(|(i, e)| (i.to_string(), *e))
            .collect::<BTreeMap<_, _>>(),
    );
    report.note("gh_table", table);
    if let Some(w) = worst {
        report.note("chain_constants", w);
    }

    let mut checks = WorstCase::default();
    let mut etas = BTreeMap::new();
    for &delta in &cfg.deltas {
        let mut pairs = 0usize;
        for m in &members {
            let params = BoundParams::for_trace(&m.trace, delta)
                .at(NAME, m.i, 0.0)?
                .with_rel_tol(cfg.rel_tol);
            etas.insert(format!("i={},delta={delta}", m.i), params.eta);
            let times = &m.trace.times;
            for (a, &t0) in times.iter().enumerate() {
                for &t1 in times[a + 1..].iter().take_while(|&&t1| t1 - t0 < params.eta) {
                    let rec = check_metric_equivalence_bounds(&m.trace, &params, t0, t1, None).at(NAME, m.i, t1)?;
                    checks.add_record(
                        &format!("modulus_delta_{delta}"),
                        &format!("i = {}, t0 = {t0}, t = {t1}, eta = {}", m.i, params.eta),
                        &rec,
                    );
                    pairs += 1;
                }
            }
        }
        report.assert(
            Assertion::gt(format!("modulus_delta_{delta}.pairs_checked"), pairs as f64, 0.0)
                .with_context("recorded pairs closer than eta"),
        );
    }
    report.extend(checks.into_assertions());
    report.note("eta", etas);
    Ok(report)
}

fn records_push(report: &mut Report, rec: CellRecord) {
    report.pass &= rec.pass;
    report.records.push(rec);
}
