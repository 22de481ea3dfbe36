//! Fixed-parameter verification suites behind `verify <suite>`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use rfcollapse::flow::{integrate_nil, nil_residual_report, nil_similarity_solution, NilMetric};
use rfcollapse::gh::{
    check_triangle_factor2, gh_brute_force, gh_lower_bound, gh_upper_bound_with, random_space,
    verify_metrics_close_bound, EpsGrid, SearchOptions,
};
use rfcollapse::metric::{sample_circle, shortest_path_closure, GridSpec, RiemannianSample, Stencil};
use rfcollapse::pseudogroup::{line_cover, quotient_distance, verify_quotient_isometry, Pseudogroup};
use rfcollapse::rng::stream;
use rfcollapse::{Assertion, FiniteMetricSpace, PointedMap, Report};

use crate::CliError;

/// Random pairs in the oracle-coherence suite.
pub const GH_PAIRS: usize = 100;
/// Random triples in the triangle-inequality suite.
pub const GH_TRIPLES: usize = 200;
/// Search budget for the oracle-coherence comparison.
pub const GH_BUDGET: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    GhAxioms,
    NilFlow,
    MetricsClose,
    Quotient,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::GhAxioms, Suite::NilFlow, Suite::MetricsClose, Suite::Quotient];

    pub fn name(self) -> &'static str {
        match self {
            Suite::GhAxioms => "gh-axioms",
            Suite::NilFlow => "nil-flow",
            Suite::MetricsClose => "metrics-close",
            Suite::Quotient => "quotient",
        }
    }

    pub fn run(self, seed: u64) -> Result<Report, CliError> {
        match self {
            Suite::GhAxioms => gh_axioms(seed),
            Suite::NilFlow => nil_flow(),
            Suite::MetricsClose => metrics_close(seed),
            Suite::Quotient => quotient(seed),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Suite::ALL.into_iter().find(|suite| suite.name() == s).ok_or_else(|| {
            let names: Vec<_> = Suite::ALL.iter().map(|s| s.name()).collect();
            format!("unknown suite `{s}`; expected one of {}", names.join(", "))
        })
    }
}

fn internal(e: impl fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

/// Worst instance of a family of checks plus the violation count.
struct Tally {
    name: &'static str,
    worst: Option<Assertion>,
    violations: usize,
    total: usize,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            worst: None,
            violations: 0,
            total: 0,
        }
    }

    fn add(&mut self, a: Assertion) {
        self.total += 1;
        if !a.pass {
            self.violations += 1;
        }
        if self.worst.as_ref().is_none_or(|w| a.margin < w.margin) {
            self.worst = Some(a);
        }
    }

    fn finish(self, report: &mut Report) {
        report.assert(
            Assertion::le(format!("{}.violations", self.name), self.violations as f64, 0.0)
                .with_context(format!("{} instances", self.total)),
        );
        if let Some(w) = self.worst {
            let name = format!("{}.worst", self.name);
            report.assert(Assertion { name, ..w });
        }
    }
}

fn random_size<R: Rng>(rng: &mut R) -> usize {
    rng.gen_range(1..=4)
}

/// Entrywise noise of size `amount` followed by shortest-path closure.
fn perturb<R: Rng>(rng: &mut R, x: &FiniteMetricSpace, amount: f64) -> FiniteMetricSpace {
    let n = x.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = (x.d(i, j) + rng.gen_range(-amount..=amount)).clamp(1e-3, 1.0);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    shortest_path_closure(&mut d);
    FiniteMetricSpace::new(d, x.basepoint(), 1e-12).expect("closure of a symmetric matrix is a metric")
}

/// Lower bound, exhaustive oracle and search on random pairs; the
/// universal bound; the factor-2 triangle inequality on random triples.
pub fn gh_axioms(seed: u64) -> Result<Report, CliError> {
    let grid = EpsGrid::default();
    let mut report = Report::new(
        "verify_gh_axioms",
        json!({ "seed": seed, "pairs": GH_PAIRS, "triples": GH_TRIPLES, "budget": GH_BUDGET }),
        grid.max_step(),
    );

    let pairs = (0..GH_PAIRS as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, &[1, k]);
            let (n, m) = (random_size(&mut rng), random_size(&mut rng));
            let x = random_space(&mut rng, n);
            let y = random_space(&mut rng, m);
            let lower = gh_lower_bound(&x, &y, &grid);
            let brute = gh_brute_force(&x, &y, &grid)?;
            let search = gh_upper_bound_with(&x, &y, &SearchOptions::new(GH_BUDGET, seed).with_grid(grid.clone()))?;
            Ok((k, lower, brute.upper, search.upper))
        })
        .collect::<Result<Vec<_>, rfcollapse::gh::GhError>>()
        .map_err(internal)?;
    let mut ordered = Tally::new("lower_le_brute");
    let mut agree = Tally::new("brute_eq_search");
    let mut universal = Tally::new("universal_bound");
    let cap = 2f64.sqrt() + grid.step_at(2f64.sqrt());
    for &(k, lower, brute, search) in &pairs {
        let ctx = format!("pair {k}");
        ordered.add(Assertion::le("lower_le_brute", lower, brute).with_context(ctx.clone()));
        agree.add(Assertion::le("brute_eq_search", (brute - search).abs(), 0.0).with_context(ctx.clone()));
        universal.add(Assertion::le("universal_bound", search, cap).with_context(ctx));
    }
    ordered.finish(&mut report);
    agree.finish(&mut report);
    universal.finish(&mut report);

    let triples = (0..GH_TRIPLES as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, &[2, k]);
            let n = random_size(&mut rng);
            let x1 = random_space(&mut rng, n);
            // half the triples are small perturbation chains so the
            // hypothesis d12, d23 <= 1/2 is actually exercised
            let (x2, x3) = if k % 2 == 0 {
                let x2 = perturb(&mut rng, &x1, 0.2);
                let x3 = perturb(&mut rng, &x2, 0.2);
                (x2, x3)
            } else {
                let m = random_size(&mut rng);
                let l = random_size(&mut rng);
                (random_space(&mut rng, m), random_space(&mut rng, l))
            };
            check_triangle_factor2(&x1, &x2, &x3, &grid).map(|r| (k, r))
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(internal)?;
    let mut triangle = Tally::new("triangle_factor2");
    let mut met = 0usize;
    for (k, r) in &triples {
        if r.hypothesis_met {
            met += 1;
            triangle.add(Assertion::le("triangle_factor2", r.d13, r.sum_bound).with_context(format!("triple {k}")));
        }
    }
    triangle.finish(&mut report);
    report.assert(
        Assertion::gt("triangle_hypothesis_met", met as f64, 0.0)
            .with_context(format!("{met} of {GH_TRIPLES} triples satisfy d12, d23 <= 1/2")),
    );
    Ok(report)
}

/// The similarity solution and the first integrals of the Nil system, and
/// the residual comparison of the two closed forms.
pub fn nil_flow() -> Result<Report, CliError> {
    let m0 = NilMetric::new(1.0, 3f64.sqrt(), 3f64.sqrt()).map_err(internal)?;
    let mut report = Report::new(
        "verify_nil_flow",
        json!({ "a0": 1.0, "b0": m0.b, "c0": m0.c, "t": 1.0, "dt": 1e-3 }),
        0.0,
    );
    let trace = integrate_nil(m0, 1.0, 1e-3).map_err(internal)?;
    let a1 = trace.last().a;
    report.assert(
        Assertion::le("a_at_one", (a1 - 2f64.powf(-1.0 / 3.0)).abs(), 1e-8).with_context(format!("A(1) = {a1}")),
    );
    let mut oracle_err = 0.0f64;
    let mut drift = [0.0f64; 3];
    for (&t, m) in trace.times.iter().zip(&trace.states) {
        let exact = nil_similarity_solution(&m0, t).map_err(internal)?;
        for (num, ex) in [(m.a, exact.a), (m.b, exact.b), (m.c, exact.c)] {
            oracle_err = oracle_err.max((num / ex - 1.0).abs());
        }
        let integrals = [
            m.a * m.b / (m0.a * m0.b),
            m.a * m.c / (m0.a * m0.c),
            (m.b / m.c) / (m0.b / m0.c),
        ];
        for (d, q) in drift.iter_mut().zip(integrals) {
            *d = d.max((q - 1.0).abs());
        }
    }
    report.assert(Assertion::le("similarity_rel_err", oracle_err, 1e-8));
    for (name, d) in ["drift_ab", "drift_ac", "drift_b_over_c"].into_iter().zip(drift) {
        report.assert(Assertion::le(name, d, 1e-9));
    }
    let residuals = nil_residual_report(1.0, 1.0, 1.0, 1.0, 1000).map_err(internal)?;
    let exact = [residuals.paper_residual, residuals.similarity_residual]
        .iter()
        .filter(|&&r| r < 1e-10)
        .count();
    report.assert(
        Assertion::le("exactly_one_exact_form", (exact as f64 - 1.0).abs(), 0.0)
            .with_context(format!("oracle: {}", residuals.residual_zero_form)),
    );
    report.note("residual_report", &residuals);
    report.note("a_at_one", a1);
    Ok(report)
}

fn circle_sample(n: usize, coefficient: impl Fn(f64) -> f64) -> Result<RiemannianSample, CliError> {
    let grid = GridSpec {
        shape: vec![n],
        spacing: vec![2.0 * PI / n as f64],
        origin: vec![0.0],
        periodic: vec![true],
    };
    RiemannianSample::from_metric(grid, Stencil::Axis, |x| vec![coefficient(x[0])]).map_err(internal)
}

/// Conformal perturbations `(1+δ)^{cos x} dx²` of the round circle.
pub fn metrics_close(seed: u64) -> Result<Report, CliError> {
    const POINTS: usize = 64;
    let mut report = Report::new("verify_metrics_close", json!({ "seed": seed, "points": POINTS }), 0.0);
    let base = circle_sample(POINTS, |_| 1.0)?;
    for delta in [1e-4f64, 1e-2] {
        let perturbed = circle_sample(POINTS, |x| (1.0 + delta).powf(x.cos()))?;
        let r = verify_metrics_close_bound(&base, &perturbed, delta, 2000, seed).map_err(internal)?;
        report.grid_slack = report.grid_slack.max(r.grid_slack);
        report.assert(
            Assertion::le(
                format!("metrics_close_delta_{delta}"),
                r.upper,
                r.bound + 2.0 * r.grid_slack,
            )
            .with_context(format!("bound {} + 2 x slack {}", r.bound, r.grid_slack)),
        );
    }
    Ok(report)
}

/// The line modulo 2πℤ against the 360-point circle.
pub fn quotient(seed: u64) -> Result<Report, CliError> {
    const PER_PERIOD: usize = 360;
    let (chart, shift) = line_cover(3, PER_PERIOD).map_err(internal)?;
    let q = quotient_distance(&chart, &Pseudogroup::new(vec![shift]), chart.radius() / 4.0).map_err(internal)?;
    let circle = sample_circle(2.0 * PI, PER_PERIOD).map_err(internal)?;
    let grid = EpsGrid::default();
    let step = 2.0 * PI / PER_PERIOD as f64;
    let allowance = 2.0 * step + grid.step_at(2.0 * step);
    let mut report = Report::new(
        "verify_quotient",
        json!({ "seed": seed, "per_period": PER_PERIOD }),
        step,
    );
    report.assert(Assertion::le(
        "classes",
        (q.len() as f64 - PER_PERIOD as f64).abs(),
        0.0,
    ));
    let rows: Vec<Vec<f64>> = (0..q.len()).map(|i| q.space.row(i).to_vec()).collect();
    let exact_axioms = FiniteMetricSpace::new(rows, 0, 0.0).is_ok();
    report.assert(Assertion::le(
        "pseudometric_axioms_violations",
        if exact_axioms { 0.0 } else { 1.0 },
        0.0,
    ));
    let identity = vec![PointedMap::identity(PER_PERIOD)];
    let opts = SearchOptions::new(2000, seed).with_hints(identity.clone(), identity);
    let rec = verify_quotient_isometry(&q, &circle, allowance, &opts).map_err(internal)?;
    report.assert(Assertion::le("quotient_vs_circle", rec.estimate.upper, allowance));
    Ok(report)
}
