//! Pointed finite metric spaces.
//!
//! A [`FiniteMetricSpace`] is a dense distance matrix with a basepoint. Spaces
//! built from grid samples come out of [`sample::geodesic_distances`] and are
//! exact shortest-path metrics; hand-built spaces go through
//! [`FiniteMetricSpace::new`], which checks every axiom.

mod io;
pub mod sample;

pub use io::{read_matrix, read_matrix_file, write_matrix, write_matrix_file};
pub use sample::{geodesic_distances, sample_diagonal_torus, sample_warped_torus, GridSpec, RiemannianSample, Stencil};

use thiserror::Error;

/// Hard cap on dense spaces: n² doubles at 4096 points is 128 MiB.
pub const MAX_POINTS: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("index {index} out of range for a space of {n} points")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("invalid distance matrix: {0}")]
    InvalidMatrix(String),
    #[error("{n} points exceeds the dense-space cap of {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("edge {from}->{to} has invalid length {length}")]
    InvalidEdge { from: usize, to: usize, length: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, MetricError>;

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    n: usize,
    dist: Vec<f64>,
    basepoint: usize,
    labels: Option<Vec<Vec<f64>>>,
    tol_tri: f64,
}

impl FiniteMetricSpace {
    /// Build from rows, checking symmetry, zero diagonal, finiteness,
    /// nonnegativity and the triangle inequality up to `tol_tri`.
    pub fn new(rows: Vec<Vec<f64>>, basepoint: usize, tol_tri: f64) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(MetricError::InvalidMatrix("empty space".into()));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(MetricError::InvalidMatrix("matrix is not square".into()));
        }
        let dist: Vec<f64> = rows.into_iter().flatten().collect();
        let space = Self::from_flat(n, dist, basepoint, tol_tri)?;
        space.validate()?;
        Ok(space)
    }

    /// Build from a row-major matrix without the O(n³) triangle check.
    /// Cheap invariants are still enforced.
    pub(crate) fn from_flat(n: usize, dist: Vec<f64>, basepoint: usize, tol_tri: f64) -> Result<Self> {
        if n == 0 {
            return Err(MetricError::InvalidMatrix("empty space".into()));
        }
        if n > MAX_POINTS {
            return Err(MetricError::TooLarge { n, cap: MAX_POINTS });
        }
        if dist.len() != n * n {
            return Err(MetricError::InvalidMatrix(format!(
                "expected {} entries, got {}",
                n * n,
                dist.len()
            )));
        }
        if basepoint >= n {
            return Err(MetricError::IndexOutOfRange { index: basepoint, n });
        }
        Ok(Self {
            n,
            dist,
            basepoint,
            labels: None,
            tol_tri,
        })
    }

    /// Full axiom check.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            if self.d(i, i) != 0.0 {
                return Err(MetricError::InvalidMatrix(format!("d({i},{i}) != 0")));
            }
            for j in 0..n {
                let v = self.d(i, j);
                if !v.is_finite() || v < 0.0 {
                    return Err(MetricError::InvalidMatrix(format!("d({i},{j}) = {v}")));
                }
                if v != self.d(j, i) {
                    return Err(MetricError::InvalidMatrix(format!("d({i},{j}) != d({j},{i})")));
                }
            }
        }
        if let Some((i, j, k)) = self.triangle_violation() {
            return Err(MetricError::InvalidMatrix(format!(
                "triangle inequality fails for ({i},{j},{k})"
            )));
        }
        Ok(())
    }

    /// First triple with `d(i,k) > d(i,j) + d(j,k) + tol_tri`, if any.
    pub fn triangle_violation(&self) -> Option<(usize, usize, usize)> {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                let dij = self.d(i, j);
                let row_j = self.row(j);
                for (k, &djk) in row_j.iter().enumerate() {
                    if self.d(i, k) > dij + djk + self.tol_tri {
                        return Some((i, j, k));
                    }
                }
            }
        }
        None
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn basepoint(&self) -> usize {
        self.basepoint
    }

    pub fn tol_tri(&self) -> f64 {
        self.tol_tri
    }

    pub fn labels(&self) -> Option<&[Vec<f64>]> {
        self.labels.as_deref()
    }

    pub fn with_labels(mut self, labels: Vec<Vec<f64>>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(MetricError::InvalidMatrix(format!(
                "{} labels for {} points",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Distances from the basepoint.
    pub fn base_row(&self) -> &[f64] {
        self.row(self.basepoint)
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Largest distance from the basepoint.
    pub fn radius(&self) -> f64 {
        self.base_row().iter().copied().fold(0.0, f64::max)
    }

    /// `sup { d(x0, x) : d(x0, x) < bound }`, zero when only the basepoint qualifies.
    pub fn eccentricity_below(&self, bound: f64) -> f64 {
        self.base_row()
            .iter()
            .copied()
            .filter(|&d| d < bound)
            .fold(0.0, f64::max)
    }

    /// Same distances, new basepoint.
    pub fn rebase(&self, new_basepoint: usize) -> Result<Self> {
        if new_basepoint >= self.n {
            return Err(MetricError::IndexOutOfRange {
                index: new_basepoint,
                n: self.n,
            });
        }
        let mut out = self.clone();
        out.basepoint = new_basepoint;
        Ok(out)
    }

    /// Indices `q` with `d(center, q) < radius`, ascending.
    pub fn ball_indices(&self, center: usize, radius: f64) -> Vec<usize> {
        self.row(center)
            .iter()
            .enumerate()
            .filter(|(_, &d)| d < radius)
            .map(|(q, _)| q)
            .collect()
    }

    /// The open ball `B(center, radius)` as a space pointed at `center`.
    pub fn metric_ball(&self, center: usize, radius: f64) -> Result<Self> {
        if center >= self.n {
            return Err(MetricError::IndexOutOfRange {
                index: center,
                n: self.n,
            });
        }
        if !(radius > 0.0) {
            return Err(MetricError::Domain(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        let idx = self.ball_indices(center, radius);
        let base = idx.binary_search(&center).expect("center lies in its own ball");
        self.subspace(&idx, base)
    }

    /// Restriction to `indices` (in the given order), pointed at `indices[basepoint]`.
    pub fn subspace(&self, indices: &[usize], basepoint: usize) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n) {
            return Err(MetricError::IndexOutOfRange { index: bad, n: self.n });
        }
        let m = indices.len();
        let mut dist = Vec::with_capacity(m * m);
        for &i in indices {
            let row = self.row(i);
            dist.extend(indices.iter().map(|&j| row[j]));
        }
        let mut out = Self::from_flat(m, dist, basepoint, self.tol_tri)?;
        if let Some(labels) = &self.labels {
            out.labels = Some(indices.iter().map(|&i| labels[i].clone()).collect());
        }
        Ok(out)
    }

    /// Greedy farthest-point net of `k` points starting at the basepoint.
    /// Ties go to the lowest index.
    pub fn farthest_points(&self, k: usize) -> Vec<usize> {
        farthest_point_sampling(self.n, self.basepoint, k, |i| Ok(self.row(i).to_vec()))
            .expect("dense rows are infallible")
    }
}

/// Farthest-point sampling over any space whose rows can be produced on demand
/// (e.g. single-source shortest paths on a large grid).
pub fn farthest_point_sampling<F>(n: usize, start: usize, k: usize, mut row_of: F) -> Result<Vec<usize>>
where
    F: FnMut(usize) -> Result<Vec<f64>>,
{
    let k = k.min(n);
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut chosen = vec![start];
    let mut nearest = row_of(start)?;
    while chosen.len() < k {
        let mut best = None::<(usize, f64)>;
        for (i, &d) in nearest.iter().enumerate() {
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        let (next, _) = best.expect("n > 0");
        chosen.push(next);
        let row = row_of(next)?;
        for (a, b) in nearest.iter_mut().zip(row) {
            *a = a.min(b);
        }
    }
    Ok(chosen)
}

/// Floyd–Warshall closure of a symmetric matrix, in place. Rounding in the
/// relaxation can break exact symmetry, so the smaller entry of each pair is
/// kept afterwards.
pub fn shortest_path_closure(d: &mut [Vec<f64>]) {
    let n = d.len();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let v = d[i][j].min(d[j][i]);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
}

/// Evenly spaced points on a circle of circumference `length`, pointed at 0.
pub fn sample_circle(length: f64, n: usize) -> Result<FiniteMetricSpace> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(MetricError::Domain(format!(
            "circumference must be positive, got {length}"
        )));
    }
    if n < 3 {
        return Err(MetricError::Domain(format!("a circle sample needs n >= 3, got {n}")));
    }
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let k = i.abs_diff(j);
            let steps = k.min(n - k);
            dist[i * n + j] = steps as f64 * length / n as f64;
        }
    }
    let labels = (0..n).map(|i| vec![i as f64 * length / n as f64]).collect();
    FiniteMetricSpace::from_flat(n, dist, 0, 0.0)?.with_labels(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn two_points(d: f64) -> FiniteMetricSpace {
        FiniteMetricSpace::new(vec![vec![0.0, d], vec![d, 0.0]], 0, 0.0).unwrap()
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(FiniteMetricSpace::new(vec![], 0, 0.0).is_err());
        assert!(FiniteMetricSpace::new(vec![vec![0.0, 1.0], vec![2.0, 0.0]], 0, 0.0).is_err());
        assert!(FiniteMetricSpace::new(vec![vec![1.0]], 0, 0.0).is_err());
        assert!(FiniteMetricSpace::new(vec![vec![0.0]], 1, 0.0).is_err());
        let bad_tri = vec![vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 1.0], vec![3.0, 1.0, 0.0]];
        assert!(FiniteMetricSpace::new(bad_tri.clone(), 0, 0.0).is_err());
        assert!(FiniteMetricSpace::new(bad_tri, 0, 1.0).is_ok());
    }

    #[test]
    fn circle_distances() {
        let c = sample_circle(2.0 * PI, 8).unwrap();
        assert_eq!(c.d(0, 4), PI);
        assert_eq!(c.d(0, 1), 2.0 * PI / 8.0);
        for k in 0..8 {
            assert_eq!(c.d(0, k), k.min(8 - k) as f64 * 2.0 * PI / 8.0);
        }
        c.validate().unwrap();
        assert!(sample_circle(1.0, 2).is_err());
        assert!(sample_circle(-1.0, 5).is_err());
    }

    #[test]
    fn ball_is_strict_and_contains_center() {
        let c = sample_circle(2.0 * PI, 360).unwrap();
        let ball = c.metric_ball(0, PI / 2.0).unwrap();
        assert_eq!(ball.len(), 179);
        assert_eq!(ball.d(ball.basepoint(), ball.basepoint()), 0.0);
        let whole = c.metric_ball(17, 10.0).unwrap();
        assert_eq!(whole.len(), 360);
        assert_eq!(whole.basepoint(), 17);
        let tiny = c.metric_ball(5, 1e-9).unwrap();
        assert_eq!(tiny.len(), 1);
        assert!(c.metric_ball(0, 0.0).is_err());
        assert!(c.metric_ball(0, -1.0).is_err());
    }

    #[test]
    fn rebase_round_trip() {
        let c = sample_circle(3.0, 6).unwrap();
        assert_eq!(c.rebase(0).unwrap(), c);
        assert_eq!(c.rebase(4).unwrap().rebase(0).unwrap(), c);
        assert!(c.rebase(6).is_err());
    }

    #[test]
    fn eccentricity_window() {
        let x = two_points(1.0);
        assert_eq!(x.eccentricity_below(1.0), 0.0);
        assert_eq!(x.eccentricity_below(1.5), 1.0);
        assert_eq!(x.radius(), 1.0);
    }

    #[test]
    fn farthest_points_spread() {
        let c = sample_circle(2.0 * PI, 12).unwrap();
        assert_eq!(c.farthest_points(3), vec![0, 6, 3]);
    }
}
