use std::f64::consts::PI;

use proptest::prelude::*;
use rfcollapse::metric::{
    farthest_point_sampling, geodesic_distances, read_matrix, sample_circle, sample_warped_torus, write_matrix,
    GridSpec, RiemannianSample, Stencil,
};
use rfcollapse::FiniteMetricSpace;

#[test]
fn flat_torus_axis_distances_are_exact() {
    let n = 16;
    let f = vec![1.0; n];
    let s = sample_warped_torus(&f, 1.0, n).unwrap();
    let d = geodesic_distances(&s, 0).unwrap();
    let h = 2.0 * PI / n as f64;
    // moving along either axis costs exactly one edge per step
    assert!((d.d(0, 1) - h).abs() < 1e-9);
    // path lengths are accumulated in fixed point
    assert!((d.d(0, n / 2) - PI).abs() < 1e-9);
    assert!(d.diameter() <= 2f64.sqrt() * PI + s.grid_slack());
}

#[test]
fn matrix_text_round_trips() {
    let c = sample_circle(2.0 * PI, 7).unwrap().rebase(3).unwrap();
    let mut buf = Vec::new();
    write_matrix(&c, &mut buf).unwrap();
    let back = read_matrix(buf.as_slice()).unwrap();
    assert_eq!(back.basepoint(), 3);
    for i in 0..7 {
        assert_eq!(back.row(i), c.row(i));
    }
    assert!(read_matrix("n 2 basepoint 0\n0 1\n".as_bytes()).is_err());
}

#[test]
fn farthest_points_spread_over_a_circle() {
    let c = sample_circle(8.0, 64).unwrap();
    let picked = farthest_point_sampling(64, 0, 4, |v| Ok(c.row(v).to_vec())).unwrap();
    assert_eq!(picked, vec![0, 32, 16, 48]);
}

fn line_metric(coeffs: Vec<f64>) -> RiemannianSample {
    let n = coeffs.len();
    let grid = GridSpec {
        shape: vec![n],
        spacing: vec![1.0 / n as f64],
        origin: vec![0.0],
        periodic: vec![true],
    };
    RiemannianSample::from_metric(grid, Stencil::Axis, |x| {
        let k = ((x[0] * n as f64).round() as usize) % n;
        vec![coeffs[k]]
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn geodesic_distances_form_a_metric(coeffs in prop::collection::vec(0.1f64..4.0, 3..24), base in 0usize..3) {
        let s = line_metric(coeffs);
        let d = geodesic_distances(&s, base).unwrap();
        prop_assert!(d.triangle_violation().is_none());
        for i in 0..d.len() {
            prop_assert_eq!(d.d(i, i), 0.0);
            for j in 0..d.len() {
                prop_assert_eq!(d.d(i, j), d.d(j, i));
            }
        }
    }

    #[test]
    fn circle_samples_are_exact(length in 0.1f64..20.0, n in 3usize..40) {
        let c = sample_circle(length, n).unwrap();
        let step = length / n as f64;
        for i in 0..n {
            let k = i.min(n - i);
            prop_assert!((c.d(0, i) - k as f64 * step).abs() <= 1e-12 * length);
        }
        prop_assert!((c.diameter() - (n / 2) as f64 * step).abs() <= 1e-12 * length);
    }

    #[test]
    fn subspaces_keep_distances(n in 3usize..30, pick in prop::collection::btree_set(0usize..30, 1..6)) {
        let c = sample_circle(1.0, n).unwrap();
        let idx: Vec<usize> = pick.into_iter().filter(|&i| i < n).collect();
        prop_assume!(!idx.is_empty());
        let sub: FiniteMetricSpace = c.subspace(&idx, 0).unwrap();
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                prop_assert_eq!(sub.d(a, b), c.d(i, j));
            }
        }
    }
}
