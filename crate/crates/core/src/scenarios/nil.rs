//! Rescaled limits of the Nil flow `g_i(t) = g(i + t)`.
//!
//! With `φ(x, y, z) = (αx, αy, βz)`, `α² = A(i)` and `β² = 1/A(i)`, the
//! pullback of `A(dz - x dy)² + B dy² + C dx²` at time `i + t` is
//!
//! ```text
//! φ*g = A(i+t)/A(i) dz² - 2x A(i+t) A(i)^{1/2} dz dy
//!     + (B(i+t) A(i) + x² A(i+t) A(i)²) dy² + C(i+t) A(i) dx².
//! ```
//!
//! `AB` and `AC` are constant along the flow, so at `t = 0` the `dx²`, `dy²`
//! and `dz²` coefficients equal `C₃`, `C₂ + x² A(i)³` and `1`, and the cross
//! term is `2|x| A(i)^{3/2}`.

use rayon::prelude::*;
use serde::Serialize;

use super::{config_value, linspace, nonincreasing, AtCell, ModuleError, Result, ScenarioConfig, WorstCase};
use crate::flow::{
    check_metric_equivalence_bounds, integrate_nil, nil_curvature_norm, nil_residual_report, BoundParams, FlowState,
    NilClosedForm, NilMetric, ResidualReport,
};
use crate::gh::{gh_upper_bound_with, PointedMap, SearchOptions};
use crate::metric::{geodesic_distances, FiniteMetricSpace, GridSpec, RiemannianSample, Stencil};
use crate::pseudogroup::{quotient_distance, shift_generator, CoverChart, Pseudogroup};
use crate::report::{Assertion, CellRecord, Report};
use crate::rng::split_seed;

const NAME: &str = "nil_scaling";

/// Constant in the deviation bound `K (2i + C₁)^{-1/2}` at `t = 0`.
pub const DEVIATION_CONSTANT: f64 = 3.0;

/// Fiber samples per lattice period, and periods spanned by the box.
const STEPS_PER_PERIOD: usize = 4;
const PERIODS: usize = 3;

/// Default Nil step when the config leaves `dt` unset.
const NIL_DT: f64 = 1e-2;

/// Sampled times used for the residual report.
const RESIDUAL_SAMPLES: usize = 2000;

/// Coefficients of the rescaled pullback, in `(x, y, z)` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PullbackCoefficients {
    pub xx: f64,
    /// `g_yy = yy + yy_x2 · x²`.
    pub yy: f64,
    pub yy_x2: f64,
    /// Tensor entry `g_yz = yz_x · x`; the `dz dy` form coefficient is twice this.
    pub yz_x: f64,
    pub zz: f64,
}

/// Pullback of the metric `at` under the rescaling built from `reference`
/// (the state at time `i`).
pub fn pullback_coefficients(reference: &NilMetric, at: &NilMetric) -> PullbackCoefficients {
    let ai = reference.a;
    PullbackCoefficients {
        xx: at.c * ai,
        yy: at.b * ai,
        yy_x2: at.a * ai * ai,
        yz_x: -at.a * ai.sqrt(),
        zz: at.a / ai,
    }
}

impl PullbackCoefficients {
    pub fn tensor(&self, x: f64) -> Vec<f64> {
        let yz = self.yz_x * x;
        vec![
            self.xx,
            0.0,
            0.0, //
            0.0,
            self.yy + self.yy_x2 * x * x,
            yz, //
            0.0,
            yz,
            self.zz,
        ]
    }

    /// Largest coefficient deviation from `dz² + C₂ dy² + C₃ dx²` at `x`,
    /// counting the `dz dy` form coefficient `2 g_yz`.
    pub fn deviation(&self, x: f64, c2: f64, c3: f64) -> f64 {
        [
            (self.zz - 1.0).abs(),
            (self.xx - c3).abs(),
            (self.yy + self.yy_x2 * x * x - c2).abs(),
            (2.0 * self.yz_x * x).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// The paper's displayed right-hand side for `4φ*g_i(t)` at `x`, evaluated as
/// written; reported for comparison only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct DisplayRow {
    i: u64,
    t: f64,
    x: f64,
    zz: f64,
    dzdy: f64,
    yy: f64,
    xx: f64,
    deviation: f64,
    first_principles_deviation: f64,
}

fn display_row(cfg: &ScenarioConfig, i: u64, t: f64, x: f64, ours: f64) -> DisplayRow {
    let s = 2.0 * i as f64 + cfg.c1;
    let w = 2.0 * t + s;
    let ratio = w.sqrt() / s.sqrt();
    let zz = s.sqrt() / w.sqrt();
    let dzdy = -2.0 * x / w.sqrt();
    let yy = x * x / (s * w.sqrt()) + cfg.c2 * ratio;
    let xx = cfg.c3 * ratio;
    let deviation = [(zz - 1.0).abs(), dzdy.abs(), (yy - cfg.c2).abs(), (xx - cfg.c3).abs()]
        .into_iter()
        .fold(0.0, f64::max);
    DisplayRow {
        i,
        t,
        x,
        zz,
        dzdy,
        yy,
        xx,
        deviation,
        first_principles_deviation: ours,
    }
}

struct PerI {
    i: u64,
    records: Vec<CellRecord>,
    checks: WorstCase,
    display: Vec<DisplayRow>,
    gh_at_zero: f64,
    fiber_at_zero: f64,
    slack: f64,
}

/// Pullback deviations, lattice quotients and their GH distance to the flat
/// plane for each `i`.
pub fn run_nil_scaling(cfg: &ScenarioConfig) -> Result<Report> {
    cfg.validate()?;
    let i_max = *cfg.i_list.last().expect("nonempty") as f64;
    let residual =
        nil_residual_report(cfg.c1, cfg.c2, cfg.c3, i_max + cfg.horizon(), RESIDUAL_SAMPLES).at(NAME, 0, 0.0)?;
    let oracle = pick_oracle(cfg, &residual).at(NAME, 0, 0.0)?;

    let runs: Vec<PerI> = cfg
        .i_list
        .par_iter()
        .map(|&i| run_one(cfg, &oracle, i))
        .collect::<Result<_>>()?;
    let slack = runs.iter().map(|r| r.slack).fold(0.0, f64::max);
    let mut report = Report::new(NAME, config_value(cfg), slack);

    let exact = [residual.paper_residual, residual.similarity_residual]
        .iter()
        .filter(|&&r| r < 1e-10)
        .count();
    report.assert(
        Assertion::le("exactly_one_exact_closed_form", (exact as f64 - 1.0).abs(), 0.0)
            .with_context(format!("oracle = {}", residual.residual_zero_form)),
    );
    report.note("residual_report", &residual);
    report.note("oracle", oracle);

    let labels: Vec<u64> = runs.iter().map(|r| r.i).collect();
    let gh: Vec<f64> = runs.iter().map(|r| r.gh_at_zero).collect();
    let fibers: Vec<f64> = runs.iter().map(|r| r.fiber_at_zero).collect();
    report.extend(nonincreasing("plane_gh_t0_nonincreasing", &labels, &gh));
    report.extend(nonincreasing("fiber_diameter_t0_nonincreasing", &labels, &fibers));
    let mut display = Vec::new();
    for run in runs {
        report.extend(run.checks.into_assertions());
        report.records.extend(run.records);
        display.extend(run.display);
    }
    report.note("paper_display_comparison", display);
    Ok(report)
}

/// The closed form whose residual under the implemented system is zero,
/// falling back to the smaller residual.
fn pick_oracle(cfg: &ScenarioConfig, residual: &ResidualReport) -> crate::flow::Result<NilClosedForm> {
    let paper = NilClosedForm::Paper {
        c1: cfg.c1,
        c2: cfg.c2,
        c3: cfg.c3,
    };
    if residual.paper_residual < residual.similarity_residual {
        Ok(paper)
    } else {
        Ok(NilClosedForm::Similarity { m0: paper.value(0.0)? })
    }
}

fn run_one(cfg: &ScenarioConfig, oracle: &NilClosedForm, i: u64) -> Result<PerI> {
    let fi = i as f64;
    let at_i = oracle.value(fi).at(NAME, i, 0.0)?;
    let mut checks = WorstCase::default();
    integrator_checks(cfg, oracle, i, &mut checks)?;

    let period = (2.0 * fi + cfg.c1).powf(-0.5);
    let bound = DEVIATION_CONSTANT * period;
    let xs = linspace(cfg.box_size, cfg.box_points - 1);
    let mut records = Vec::new();
    let mut display = Vec::new();
    let mut gh_at_zero = f64::NAN;
    let mut fiber_at_zero = f64::NAN;
    let mut slack = 0.0f64;
    for (k, &t) in cfg.t_grid.iter().enumerate() {
        let at = oracle.value(fi + t).at(NAME, i, t)?;
        let pb = pullback_coefficients(&at_i, &at);
        let (dev, x_worst) = xs
            .iter()
            .map(|&x| (pb.deviation(x, cfg.c2, cfg.c3), x))
            .fold((0.0f64, 0.0), |acc, v| if v.0 > acc.0 { v } else { acc });
        display.push(display_row(cfg, i, t, cfg.box_size, dev));

        let lattice = lattice_cell(cfg, i, k, &pb, period).at(NAME, i, t)?;
        slack = slack.max(lattice.slack);
        let mut rec = CellRecord::new(fi, t);
        rec.gh_lower = Some(lattice.gh_lower);
        rec.gh_upper = Some(lattice.gh_upper);
        rec.k_max = Some(nil_curvature_norm(&at));
        rec.values.insert("deviation".into(), dev);
        rec.values.insert("deviation_x".into(), x_worst);
        rec.values.insert("g_zz".into(), pb.zz);
        rec.values.insert("g_xx".into(), pb.xx);
        rec.values
            .insert("g_yy".into(), pb.yy + pb.yy_x2 * cfg.box_size * cfg.box_size);
        rec.values.insert("dzdy".into(), 2.0 * pb.yz_x * cfg.box_size);
        rec.values.insert("b_ratio".into(), at.b / at_i.b);
        rec.values.insert("period".into(), period);
        rec.values.insert("consistent_period".into(), at_i.a.sqrt());
        rec.values.insert("fiber_diameter".into(), lattice.fiber_diameter);
        rec.values.insert("quotient_classes".into(), lattice.classes as f64);
        rec.values.insert("grid_slack".into(), lattice.slack);

        let ctx = format!("i = {i}, t = {t}");
        let fiber = Assertion::le("fiber_diameter", lattice.fiber_diameter, period / 2.0 + 1e-9);
        rec.margins.insert("fiber".into(), fiber.margin);
        rec.pass &= fiber.pass;
        checks.add("lattice", &ctx, fiber);
        if t == 0.0 {
            let a = Assertion::le("deviation_t0", dev, bound);
            rec.margins.insert("deviation".into(), a.margin);
            rec.pass &= a.pass;
            checks.add("pullback", &ctx, a);
            gh_at_zero = lattice.gh_upper;
            fiber_at_zero = lattice.fiber_diameter;
        } else if i == *cfg.i_list.last().expect("nonempty") {
            let ratio = Assertion::le("b_ratio_t_stability", (at.b / at_i.b - 1.0).abs(), cfg.t_stability_tol);
            let yy = pb.yy + pb.yy_x2 * cfg.box_size * cfg.box_size;
            let dy2 = Assertion::le("dy2_t_stability", (yy - cfg.c2).abs(), cfg.t_stability_tol);
            rec.margins.insert("t_stability".into(), ratio.margin.min(dy2.margin));
            rec.pass &= ratio.pass && dy2.pass;
            checks.add("pullback", &ctx, ratio);
            checks.add("pullback", &ctx, dy2);
        }
        records.push(rec);
    }
    Ok(PerI {
        i,
        records,
        checks,
        display,
        gh_at_zero,
        fiber_at_zero,
        slack,
    })
}

/// Numerical flow to `i + T` against the oracle, and the coefficient-ratio
/// bounds along the way.
fn integrator_checks(cfg: &ScenarioConfig, oracle: &NilClosedForm, i: u64, checks: &mut WorstCase) -> Result<()> {
    let t_end = i as f64 + cfg.horizon();
    let m0 = oracle.value(0.0).at(NAME, i, 0.0)?;
    let trace = integrate_nil(m0, t_end, cfg.dt.unwrap_or(NIL_DT)).at(NAME, i, 0.0)?;
    let exact = oracle.value(t_end).at(NAME, i, cfg.horizon())?;
    let err = trace
        .last()
        .coefficients()
        .iter()
        .zip(exact.coefficients())
        .map(|(n, e)| ((n - e) / e).abs())
        .fold(0.0, f64::max);
    checks.add(
        "integrator",
        &format!("i = {i}, time = {t_end}"),
        Assertion::le("matches_oracle", err, 1e-8),
    );

    let picks: Vec<usize> = linspace((trace.len() - 1) as f64, 40)
        .into_iter()
        .map(|k| k.round() as usize)
        .collect();
    for &delta in &cfg.deltas {
        let params = BoundParams::for_trace(&trace, delta)
            .at(NAME, i, 0.0)?
            .with_rel_tol(cfg.rel_tol);
        for (a, &p) in picks.iter().enumerate() {
            for &q in &picks[a + 1..] {
                let (t0, t1) = (trace.times[p], trace.times[q]);
                let rec = check_metric_equivalence_bounds(&trace, &params, t0, t1, None).at(NAME, i, t1)?;
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

struct LatticeCell {
    gh_lower: f64,
    gh_upper: f64,
    fiber_diameter: f64,
    classes: usize,
    slack: f64,
}

/// Box `[0, box]² × [-1.5p, 1.5p]` with the pullback metric, quotiented by
/// the z-translation through one period `p`, and compared with the flat
/// patch `C₃ dx² + C₂ dy²`.
fn lattice_cell(
    cfg: &ScenarioConfig,
    i: u64,
    t_index: usize,
    pb: &PullbackCoefficients,
    period: f64,
) -> std::result::Result<LatticeCell, ModuleError> {
    let n = cfg.lattice_points;
    let h = cfg.box_size / (n - 1) as f64;
    let nz = PERIODS * STEPS_PER_PERIOD + 1;
    let hz = period / STEPS_PER_PERIOD as f64;
    let grid = GridSpec {
        shape: vec![n, n, nz],
        spacing: vec![h, h, hz],
        origin: vec![0.0, 0.0, -(PERIODS as f64) * period / 2.0],
        periodic: vec![false; 3],
    };
    let sample = RiemannianSample::from_metric(grid.clone(), Stencil::Axis, |p| pb.tensor(p[0]))?;
    let slack = sample.grid_slack();
    let mid = [n / 2, n / 2, nz / 2];
    let chart = CoverChart::new(sample, grid.index(&mid))?;
    let radius = chart.radius();
    let shift = shift_generator(
        &chart,
        "z_period",
        STEPS_PER_PERIOD as i64,
        radius,
        2.0 * chart.sample().max_edge(),
    )?;
    let q = quotient_distance(&chart, &Pseudogroup::new(vec![shift]), radius / 4.0)?;

    let mut fiber_diameter = 0.0f64;
    for jx in 0..n {
        for jy in 0..n {
            let mut classes: Vec<usize> = (0..nz).map(|k| q.class_of[grid.index(&[jx, jy, k])]).collect();
            classes.sort_unstable();
            classes.dedup();
            fiber_diameter = fiber_diameter.max(q.diameter_of(&classes));
        }
    }

    let plane = flat_patch(cfg, n, h)?;
    let patch_index = |v: usize| {
        let m = grid.multi_index(v);
        m[0] * n + m[1]
    };
    let projection: Vec<usize> = q.members.iter().map(|m| patch_index(m[0])).collect();
    let section: Vec<usize> = (0..n * n)
        .map(|p| q.class_of[grid.index(&[p / n, p % n, mid[2]])])
        .collect();
    let opts = SearchOptions::new(cfg.budget, split_seed(cfg.seed, &[i, t_index as u64]))
        .with_hints(vec![PointedMap::new(projection)], vec![PointedMap::new(section)]);
    let est = gh_upper_bound_with(&q.space, &plane, &opts)?;
    Ok(LatticeCell {
        gh_lower: est.lower,
        gh_upper: est.upper,
        fiber_diameter,
        classes: q.len(),
        slack,
    })
}

fn flat_patch(cfg: &ScenarioConfig, n: usize, h: f64) -> std::result::Result<FiniteMetricSpace, ModuleError> {
    let grid = GridSpec {
        shape: vec![n, n],
        spacing: vec![h, h],
        origin: vec![0.0, 0.0],
        periodic: vec![false, false],
    };
    let base = grid.index(&[n / 2, n / 2]);
    let sample = RiemannianSample::from_metric(grid, Stencil::Axis, |_| vec![cfg.c3, 0.0, 0.0, cfg.c2])?;
    Ok(geodesic_distances(&sample, base)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pullback_at_zero_has_unit_fiber() {
        let m = NilMetric::new(0.3, 2.0, 5.0).unwrap();
        let pb = pullback_coefficients(&m, &m);
        assert_eq!(pb.zz, 1.0);
        assert!((pb.xx - 1.5).abs() < 1e-15);
        assert!((pb.yy - 0.6).abs() < 1e-15);
        assert!((pb.yz_x + 0.3 * 0.3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn display_row_at_zero() {
        let cfg = ScenarioConfig::defaults(super::super::ScenarioKind::NilScaling);
        let r = display_row(&cfg, 10, 0.0, 1.0, 0.0);
        assert_eq!(r.zz, 1.0);
        assert!((r.dzdy + 2.0 / 21f64.sqrt()).abs() < 1e-15);
    }
}
