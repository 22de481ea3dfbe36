//! Pointed Gromov–Hausdorff approximations and distance estimates.
//!
//! A pointed map `f: (X, x0) -> (Y, y0)` is an ε-approximation when
//!
//! * every `y` with `d(y0, y) < 1/ε - ε` lies at distance `< ε` from some
//!   `f(x)` with `d(x0, x) < 1/ε`, and
//! * `|d_X(x, x') - d_Y(f x, f x')| < ε` for all `x, x'` with
//!   `d(x0, ·) < 1/ε`.
//!
//! Both windows move with ε, so feasibility is not monotone in ε and every
//! grid value is tested on its own. All comparisons are exact on stored
//! floats.

mod brute;
mod lower;
mod props;
mod search;

pub use brute::{gh_brute_force, BRUTE_FORCE_CAP};
pub use lower::gh_lower_bound;
pub use props::{
    check_associativity, check_triangle_factor2, verify_metrics_close_bound, AssociativityRecord, MetricsCloseRecord,
    TriangleRecord,
};
pub use search::{gh_upper_bound, gh_upper_bound_with, SearchOptions};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{shortest_path_closure, FiniteMetricSpace, MetricError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GhError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("brute force refused: {0} points exceeds the cap of {BRUTE_FORCE_CAP} (|Y|^|X| maps)")]
    TooLarge(usize),
    #[error("invalid epsilon grid: {0}")]
    InvalidGrid(String),
    #[error("no grid value admits approximations in both directions")]
    NoFeasibleEpsilon,
    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

pub type Result<T> = std::result::Result<T, GhError>;

/// Image array of a basepoint-preserving map between finite spaces.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointedMap {
    pub image: Vec<usize>,
}

impl PointedMap {
    pub fn new(image: Vec<usize>) -> Self {
        Self { image }
    }

    /// Index-preserving map; pointed only when both basepoints share an index.
    pub fn identity(n: usize) -> Self {
        Self {
            image: (0..n).collect(),
        }
    }

    /// Everything to `y0`.
    pub fn constant(n: usize, y0: usize) -> Self {
        Self { image: vec![y0; n] }
    }

    /// Check that this is a pointed map `x -> y`.
    pub fn validate(&self, x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Result<()> {
        if self.image.len() != x.len() {
            return Err(GhError::Usage(format!(
                "map has {} entries but the source has {} points",
                self.image.len(),
                x.len()
            )));
        }
        if let Some(&bad) = self.image.iter().find(|&&v| v >= y.len()) {
            return Err(GhError::Usage(format!(
                "image index {bad} outside a target of {} points",
                y.len()
            )));
        }
        if self.image[x.basepoint()] != y.basepoint() {
            return Err(GhError::Usage("map does not send basepoint to basepoint".into()));
        }
        Ok(())
    }
}

/// Ascending grid of candidate ε values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EpsGrid {
    values: Vec<f64>,
}

impl EpsGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(GhError::InvalidGrid("empty grid".into()));
        }
        if values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(GhError::InvalidGrid("grid values must be positive and finite".into()));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GhError::InvalidGrid("grid must be strictly ascending".into()));
        }
        Ok(Self { values })
    }

    /// `n` geometrically spaced values from `lo` to `hi`, endpoints exact.
    pub fn geometric(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(lo > 0.0) || !(hi > lo) {
            return Err(GhError::InvalidGrid(format!("bad geometric grid ({lo}, {hi}, {n})")));
        }
        let ratio = (hi / lo).ln() / (n - 1) as f64;
        let mut values: Vec<f64> = (0..n).map(|k| lo * (ratio * k as f64).exp()).collect();
        values[0] = lo;
        values[n - 1] = hi;
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("nonempty")
    }

    /// Largest gap between consecutive values (0 for a single-value grid).
    pub fn max_step(&self) -> f64 {
        self.values.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Gap ending at the first grid value `>= v` (the rounding step at `v`).
    pub fn step_at(&self, v: f64) -> f64 {
        let k = self.values.partition_point(|&g| g < v);
        match k {
            0 => self.values.get(1).map_or(0.0, |g| g - self.values[0]),
            k if k >= self.values.len() => self.max_step(),
            k => self.values[k] - self.values[k - 1],
        }
    }
}

impl Default for EpsGrid {
    /// 64 geometric values from 10⁻³ to 1.5.
    fn default() -> Self {
        Self::geometric(1e-3, 1.5, 64).expect("valid default grid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhEstimate {
    pub lower: f64,
    pub upper: f64,
    pub eps_grid: EpsGrid,
    pub witness_fwd: PointedMap,
    pub witness_bwd: PointedMap,
}

impl GhEstimate {
    /// Re-verify both witnesses at `upper`.
    pub fn witnesses_valid(&self, x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Result<bool> {
        Ok(self.lower <= self.upper
            && check_eps_approximation(x, y, &self.witness_fwd, self.upper)?
            && check_eps_approximation(y, x, &self.witness_bwd, self.upper)?)
    }
}

/// Whether `f` is an ε-pointed Gromov–Hausdorff approximation `x -> y`.
pub fn check_eps_approximation(x: &FiniteMetricSpace, y: &FiniteMetricSpace, f: &PointedMap, eps: f64) -> Result<bool> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(GhError::Usage(format!("epsilon must be positive, got {eps}")));
    }
    f.validate(x, y)?;
    let ball = x.ball_indices(x.basepoint(), 1.0 / eps);
    Ok(passes(x, y, &f.image, eps, &ball))
}

/// Core predicate; `ball` must be the open `1/eps` ball about `x0`.
pub(crate) fn passes(x: &FiniteMetricSpace, y: &FiniteMetricSpace, image: &[usize], eps: f64, ball: &[usize]) -> bool {
    for (i, &a) in ball.iter().enumerate() {
        let xa = x.row(a);
        let ya = y.row(image[a]);
        for &b in &ball[i + 1..] {
            if !((xa[b] - ya[image[b]]).abs() < eps) {
                return false;
            }
        }
    }
    let cover_radius = 1.0 / eps - eps;
    if cover_radius > 0.0 {
        let mut images: Vec<usize> = ball.iter().map(|&a| image[a]).collect();
        images.sort_unstable();
        images.dedup();
        let y0 = y.base_row();
        for (t, &dt) in y0.iter().enumerate() {
            if dt < cover_radius && !images.iter().any(|&v| y.d(t, v) < eps) {
                return false;
            }
        }
    }
    true
}

/// A random pointed metric space on `n` points with distances in (0, 1]:
/// uniform symmetric entries followed by shortest-path closure.
pub fn random_space<R: Rng>(rng: &mut R, n: usize) -> FiniteMetricSpace {
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = 1.0 - rng.gen::<f64>();
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    shortest_path_closure(&mut d);
    let base = rng.gen_range(0..n);
    FiniteMetricSpace::new(d, base, 1e-12).expect("closure is a metric")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::sample_circle;

    fn point() -> FiniteMetricSpace {
        FiniteMetricSpace::new(vec![vec![0.0]], 0, 0.0).unwrap()
    }

    #[test]
    fn identity_always_passes() {
        let c = sample_circle(2.0 * std::f64::consts::PI, 30).unwrap();
        for eps in [1e-3, 0.1, 0.7, 1.0, 3.0] {
            assert!(check_eps_approximation(&c, &c, &PointedMap::identity(30), eps).unwrap());
        }
    }

    #[test]
    fn circle_to_point_windows() {
        let c = sample_circle(2.0 * std::f64::consts::PI, 360).unwrap();
        let f = PointedMap::constant(360, 0);
        let p = point();
        assert!(!check_eps_approximation(&c, &p, &f, 1.0).unwrap());
        assert!(check_eps_approximation(&c, &p, &f, 2.0).unwrap());
    }

    #[test]
    fn large_eps_with_constant_maps() {
        let mut rng = crate::rng::stream(11, &[]);
        for _ in 0..50 {
            let x = random_space(&mut rng, 5);
            let y = random_space(&mut rng, 4);
            let f = PointedMap::constant(5, y.basepoint());
            assert!(check_eps_approximation(&x, &y, &f, 2f64.sqrt()).unwrap());
            assert!(check_eps_approximation(&x, &y, &f, 1.5).unwrap());
        }
    }

    #[test]
    fn usage_errors() {
        let c = sample_circle(1.0, 4).unwrap();
        assert!(check_eps_approximation(&c, &c, &PointedMap::identity(3), 0.5).is_err());
        assert!(check_eps_approximation(&c, &c, &PointedMap::new(vec![1, 1, 1, 1]), 0.5).is_err());
        assert!(check_eps_approximation(&c, &c, &PointedMap::new(vec![0, 9, 1, 1]), 0.5).is_err());
        assert!(check_eps_approximation(&c, &c, &PointedMap::identity(4), 0.0).is_err());
    }

    #[test]
    fn default_grid_shape() {
        let g = EpsGrid::default();
        assert_eq!(g.len(), 64);
        assert_eq!(g.min(), 1e-3);
        assert_eq!(g.max(), 1.5);
        assert!(g.step_at(2f64.sqrt()) > 1.5 - 2f64.sqrt());
        assert!(EpsGrid::new(vec![0.2, 0.1]).is_err());
        assert!(EpsGrid::new(vec![]).is_err());
        assert!(EpsGrid::new(vec![0.0, 0.1]).is_err());
    }

    #[test]
    fn random_spaces_are_metrics() {
        let mut rng = crate::rng::stream(5, &[]);
        for n in 1..=4 {
            let x = random_space(&mut rng, n);
            x.validate().unwrap();
            assert!(x.diameter() <= 1.0);
        }
    }
}
