use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfcollapse::gh::{
    check_eps_approximation, gh_brute_force, gh_lower_bound, gh_upper_bound, gh_upper_bound_with, random_space,
    EpsGrid, GhError, SearchOptions,
};
use rfcollapse::metric::sample_circle;
use rfcollapse::{FiniteMetricSpace, PointedMap};

fn space(seed: u64, n: usize) -> FiniteMetricSpace {
    random_space(&mut ChaCha8Rng::seed_from_u64(seed), n)
}

#[test]
fn identical_spaces_sit_at_the_grid_floor() {
    let grid = EpsGrid::default();
    let x = space(3, 4);
    let est = gh_brute_force(&x, &x, &grid).unwrap();
    assert_eq!(est.upper, grid.min());
    assert_eq!(est.lower, 0.0);
    assert_eq!(est.witness_fwd, PointedMap::identity(4));
    assert_eq!(gh_upper_bound(&x, &x, 100, 0).unwrap().upper, grid.min());
}

#[test]
fn point_against_circle_follows_the_window() {
    // every ε-approximation from the point must cover the (1/ε - ε)-ball of
    // the circle, so ε has to reach the circle's covering radius
    let point = FiniteMetricSpace::new(vec![vec![0.0]], 0, 0.0).unwrap();
    let circle = sample_circle(1.0, 4).unwrap();
    let grid = EpsGrid::default();
    let est = gh_brute_force(&point, &circle, &grid).unwrap();
    assert!(est.upper >= 0.5 && est.lower < 0.5 + grid.step_at(0.5));
    assert!(est.witnesses_valid(&point, &circle).unwrap());
}

#[test]
fn brute_force_refuses_large_spaces() {
    let big = sample_circle(1.0, 7).unwrap();
    let err = gh_brute_force(&big, &big, &EpsGrid::default()).unwrap_err();
    assert!(matches!(err, GhError::TooLarge(7)));
}

#[test]
fn search_on_large_circles_uses_hints() {
    let x = sample_circle(6.0, 120).unwrap();
    let y = sample_circle(6.3, 120).unwrap();
    let opts = SearchOptions::new(500, 4).with_hints(vec![PointedMap::identity(120)], vec![PointedMap::identity(120)]);
    let est = gh_upper_bound_with(&x, &y, &opts).unwrap();
    assert!(est.upper <= 0.15 + EpsGrid::default().step_at(0.15), "{}", est.upper);
    assert!(est.witnesses_valid(&x, &y).unwrap());
}

fn small_pair() -> impl Strategy<Value = (u64, usize, usize)> {
    (any::<u64>(), 1usize..=4, 1usize..=4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn oracle_and_search_agree((seed, n, m) in small_pair()) {
        let x = space(seed, n);
        let y = space(seed ^ 0x5555, m);
        let grid = EpsGrid::default();
        let brute = gh_brute_force(&x, &y, &grid).unwrap();
        let search = gh_upper_bound(&x, &y, 10_000, seed).unwrap();
        prop_assert_eq!(brute.upper, search.upper);
        prop_assert!(gh_lower_bound(&x, &y, &grid) <= brute.upper);
        prop_assert!(brute.witnesses_valid(&x, &y).unwrap());
        prop_assert!(search.witnesses_valid(&x, &y).unwrap());
    }

    #[test]
    fn estimates_are_symmetric((seed, n, m) in small_pair()) {
        let x = space(seed, n);
        let y = space(seed.wrapping_add(1), m);
        let grid = EpsGrid::default();
        prop_assert_eq!(gh_brute_force(&x, &y, &grid).unwrap().upper, gh_brute_force(&y, &x, &grid).unwrap().upper);
        prop_assert_eq!(gh_upper_bound(&x, &y, 300, seed).unwrap().upper, gh_upper_bound(&y, &x, 300, seed).unwrap().upper);
    }

    #[test]
    fn constant_map_passes_beyond_root_two(seed in any::<u64>(), n in 1usize..=5, m in 1usize..=5) {
        let x = space(seed, n);
        let y = space(seed.wrapping_mul(3), m);
        // distances lie in (0, 1], so the constant map has distortion < 1
        // and nothing needs covering once 1/ε - ε <= 0
        let f = PointedMap::constant(n, y.basepoint());
        prop_assert!(check_eps_approximation(&x, &y, &f, 2f64.sqrt() * 1.0001).unwrap());
    }
}
