use std::f64::consts::PI;

use rfcollapse::flow::{integrate_warped_surface_at, stable_dt, WarpedSurfaceMetric};
use rfcollapse::gh::{EpsGrid, PointedMap, SearchOptions};
use rfcollapse::metric::{geodesic_distances, sample_circle, GridSpec, RiemannianSample, Stencil};
use rfcollapse::pseudogroup::{
    chart_preimage_ball, chart_preimage_ball_row, check_equivalence_relation, line_cover, quotient_distance,
    verify_quotient_isometry, warped_cover, CoverChart, EquivalenceWitness, LocalIsometry, Pseudogroup,
    PseudogroupError, PseudogroupSpec,
};
use rfcollapse::FiniteMetricSpace;

const STEP: f64 = 2.0 * PI / 360.0;

#[test]
fn line_mod_two_pi_is_the_circle() {
    let (chart, shift) = line_cover(3, 360).unwrap();
    assert_eq!(chart.len(), 1081);
    let group = Pseudogroup::new(vec![shift]);
    let q = quotient_distance(&chart, &group, chart.radius() / 4.0).unwrap();
    assert_eq!(q.len(), 360);
    let c = chart.center();
    assert_eq!(q.class_of[c], 0);
    assert_eq!(q.class_of[c + 270], 270);
    assert!((q.space.d(0, 270) - PI / 2.0).abs() < 1e-9);
    // exact pseudometric axioms
    let rows: Vec<Vec<f64>> = (0..q.len()).map(|i| q.space.row(i).to_vec()).collect();
    FiniteMetricSpace::new(rows, 0, 0.0).unwrap();

    let circle = sample_circle(2.0 * PI, 360).unwrap();
    let grid = EpsGrid::default();
    let opts = SearchOptions::new(2000, 1).with_hints(vec![PointedMap::identity(360)], vec![PointedMap::identity(360)]);
    let allowance = 2.0 * STEP + grid.step_at(2.0 * STEP);
    let rec = verify_quotient_isometry(&q, &circle, allowance, &opts).unwrap();
    assert!(rec.pass, "{rec:?}");
    assert!(rec.estimate.witnesses_valid(&q.space, &circle).unwrap());
}

#[test]
fn quotient_never_exceeds_cover_distance_and_is_rep_independent() {
    let (chart, shift) = line_cover(3, 36).unwrap();
    let q = quotient_distance(&chart, &Pseudogroup::new(vec![shift]), chart.radius() / 4.0).unwrap();
    for u in 0..chart.len() {
        for v in 0..chart.len() {
            assert!(q.space.d(q.class_of[u], q.class_of[v]) <= chart.d(u, v));
        }
    }
    // representatives within distance π of the center see every class at its
    // quotient distance
    let inner: Vec<usize> = (0..chart.len()).filter(|&u| chart.d(chart.center(), u) <= PI).collect();
    for &x in &inner {
        for (b, members) in q.members.iter().enumerate() {
            let best = members.iter().map(|&y| chart.d(x, y)).fold(f64::INFINITY, f64::min);
            assert_eq!(best, q.space.d(q.class_of[x], b));
        }
    }
}

#[test]
fn equivalence_checks() {
    let (chart, shift) = line_cover(3, 36).unwrap();
    let r4 = chart.radius() / 4.0;
    assert!(check_equivalence_relation(&chart, &Pseudogroup::trivial(), r4, 0.0).holds);
    assert!(check_equivalence_relation(&chart, &Pseudogroup::new(vec![shift.clone()]), r4, shift.tolerance).holds);

    // remap one vertex of the translation onto its neighbor's image
    let c = chart.center();
    let mut map = shift.map().to_vec();
    map[c] = map[c + 1];
    let bad = LocalIsometry::new(&chart, "corrupt", map, shift.radius, shift.tolerance).unwrap();
    let check = check_equivalence_relation(&chart, &Pseudogroup::new(vec![bad.clone()]), r4, bad.tolerance);
    assert!(!check.holds);
    assert_eq!(
        check.witness,
        Some(EquivalenceWitness::NotInvertible {
            generator: "corrupt".into(),
            x: c,
            y: c + 1
        })
    );
    assert!(matches!(
        quotient_distance(&chart, &Pseudogroup::new(vec![bad]), r4),
        Err(PseudogroupError::NotEquivalence(_))
    ));

    // remap onto a vertex outside the translation's image: isometry fails
    let mut map = shift.map().to_vec();
    map[c] = Some(c - 20);
    let bad = LocalIsometry::new(&chart, "far", map, shift.radius, shift.tolerance).unwrap();
    let check = check_equivalence_relation(&chart, &Pseudogroup::new(vec![bad]), r4, shift.tolerance);
    assert!(matches!(check.witness, Some(EquivalenceWitness::NotIsometric { .. })));
}

fn circle_chart(n: usize) -> CoverChart {
    let grid = GridSpec {
        shape: vec![n],
        spacing: vec![2.0 * PI / n as f64],
        origin: vec![0.0],
        periodic: vec![true],
    };
    CoverChart::new(
        RiemannianSample::from_metric(grid, Stencil::Axis, |_| vec![1.0]).unwrap(),
        0,
    )
    .unwrap()
}

#[test]
fn quotient_is_invariant_under_relabeling_by_a_generator() {
    let n = 60;
    let chart = circle_chart(n);
    let rot = LocalIsometry::from_fn(&chart, "rot", |v| Some((v + 20) % n), f64::INFINITY, 1e-9).unwrap();
    let group = Pseudogroup::new(vec![rot.clone()]);
    let q = quotient_distance(&chart, &group, PI).unwrap();
    assert_eq!(q.len(), 20);
    // the rotation is a graph automorphism, so relabeling leaves the chart
    // itself unchanged and conjugates the group
    let perm: Vec<usize> = (0..n).map(|v| rot.apply(v).unwrap()).collect();
    let relabeled = Pseudogroup::new(vec![rot.conjugate(&perm)]);
    let q2 = quotient_distance(&chart, &relabeled, PI).unwrap();
    assert_eq!(q.space, q2.space);
    // quotient is the circle of length 2π/3
    let small = sample_circle(2.0 * PI / 3.0, 20).unwrap();
    for i in 0..20 {
        for j in 0..20 {
            assert!((q.space.d(i, j) - small.d(i, j)).abs() < 1e-9);
        }
    }
}

#[test]
fn preimage_balls() {
    let (chart, _) = line_cover(3, 36).unwrap();
    let base = sample_circle(2.0 * PI, 36).unwrap();
    assert_eq!(
        chart_preimage_ball(&chart, &base, base.diameter()).unwrap().len(),
        chart.len()
    );
    let fiber = chart_preimage_ball(&chart, &base, 0.0).unwrap();
    let c = chart.center();
    assert_eq!(fiber, vec![c - 36, c, c + 36]);
    let wrong = sample_circle(2.0 * PI, 12).unwrap();
    assert!(chart_preimage_ball(&chart, &wrong, 1.0).is_err());
}

fn bumpy(n: usize, lambda: f64) -> WarpedSurfaceMetric {
    WarpedSurfaceMetric::from_fn(n, lambda, |r| 2.0 + r.cos()).unwrap()
}

#[test]
fn warped_cover_quotients() {
    let lambda = 1.0 / 8.0;
    let m = bumpy(16, lambda);
    let cover = warped_cover(m.a(), m.b(), 16, 3).unwrap();
    let chart = &cover.chart;
    let r4 = chart.radius() / 4.0;

    // deck quotient reproduces the base torus
    let torus = quotient_distance(chart, &Pseudogroup::new(vec![cover.deck.clone()]), r4).unwrap();
    let base = geodesic_distances(&cover.base, 0).unwrap();
    assert_eq!(torus.len(), base.len());
    for i in 0..base.len() {
        for j in 0..base.len() {
            assert!((torus.space.d(i, j) - base.d(i, j)).abs() < 1e-9);
        }
    }

    // the fiber action collapses onto the r-circle
    let circle_q = quotient_distance(chart, &Pseudogroup::new(cover.fiber_flow.clone()), r4).unwrap();
    assert_eq!(circle_q.len(), 16);
    let c_hat = m.r_circumference();
    let circle = sample_circle(c_hat, 16).unwrap();
    for i in 0..16 {
        for j in 0..16 {
            assert!((circle_q.space.d(i, j) - circle.d(i, j)).abs() < 1e-9);
        }
    }

    // torus against the circle of length 2π
    let slack = cover.base.grid_slack();
    let allowance = PI * 3.0 * lambda + slack;
    let proj: Vec<usize> = torus
        .members
        .iter()
        .map(|mm| cover.base.grid().multi_index(chart.projection()[mm[0]])[0])
        .collect();
    let section: Vec<usize> = (0..16).map(|j| cover.base.grid().index(&[j, 0])).collect();
    let opts = SearchOptions::new(2000, 3).with_hints(vec![PointedMap::new(proj)], vec![PointedMap::new(section)]);
    let rec = verify_quotient_isometry(&torus, &sample_circle(2.0 * PI, 16).unwrap(), allowance, &opts).unwrap();
    assert!(rec.pass, "{rec:?}");
}

#[test]
fn fiber_generators_do_not_depend_on_flow_time() {
    let m = bumpy(16, 0.5);
    let tr = integrate_warped_surface_at(&m, &[0.25], stable_dt(&m)).unwrap();
    let c0 = warped_cover(tr.states[0].a(), tr.states[0].b(), 16, 3).unwrap();
    let c1 = warped_cover(tr.states[1].a(), tr.states[1].b(), 16, 3).unwrap();
    for (g0, g1) in c0.fiber_flow.iter().zip(&c1.fiber_flow) {
        assert_eq!(g0.map(), g1.map());
    }
    assert_eq!(c0.deck.map(), c1.deck.map());
    let r4 = c1.chart.radius() / 4.0;
    let group = Pseudogroup::new(c1.fiber_flow.clone());
    assert!(check_equivalence_relation(&c1.chart, &group, r4, group.tolerance()).holds);
}

#[test]
fn warped_preimage_balls_are_monotone() {
    let m = bumpy(16, 1.0);
    let tr = integrate_warped_surface_at(&m, &[0.25], stable_dt(&m)).unwrap();
    let state = &tr.states[1];
    let cover = warped_cover(state.a(), state.b(), 16, 3).unwrap();
    let row = cover.base.distances_from(0).unwrap();
    let r_t = rfcollapse::flow::containment_radius(0.25);
    let mut prev: Vec<usize> = Vec::new();
    for radius in [0.0, r_t / 8.0, r_t / 4.0, r_t / 2.0, r_t] {
        let ball = chart_preimage_ball_row(&cover.chart, &row, radius).unwrap();
        assert!(prev.iter().all(|v| ball.binary_search(v).is_ok()));
        assert!(!ball.is_empty());
        prev = ball;
    }
}

#[test]
fn spec_round_trip() {
    let (chart, shift) = line_cover(1, 12).unwrap();
    let group = Pseudogroup::new(vec![shift]);
    let spec = PseudogroupSpec::from_group(&group);
    let text = spec.to_json();
    let back = PseudogroupSpec::from_json(&text).unwrap();
    assert_eq!(back, spec);
    assert_eq!(back.build(&chart).unwrap(), group);
    assert!(PseudogroupSpec::from_json(r#"{"generators": [], "extra": 1}"#).is_err());
    let dir = std::env::temp_dir().join(format!("rfc-spec-{}.json", std::process::id()));
    spec.write_file(&dir).unwrap();
    assert_eq!(PseudogroupSpec::read_file(&dir).unwrap(), spec);
    std::fs::remove_file(dir).ok();
}
