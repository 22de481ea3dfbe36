//! Grid samples of Riemannian metrics and their graph-geodesic distances.
//!
//! Edge lengths are evaluated once per undirected edge with the metric tensor
//! taken at the edge midpoint. Shortest paths run on lengths rounded to a
//! fixed-point lattice of 2⁻³⁶, so every path length is an exact integer sum:
//! the resulting matrices are exactly symmetric, satisfy the triangle
//! inequality with zero tolerance, and do not depend on summation order or on
//! how sources are scheduled across threads.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use rayon::prelude::*;

use super::{FiniteMetricSpace, MetricError, Result, MAX_POINTS};

const FIXED_SCALE: f64 = (1u64 << 36) as f64;
const FIXED_MAX: u64 = 1 << 53;

/// Neighbor stencil of the sampling graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// Unit steps along each axis: 2 neighbors in 1D, 4 in 2D, 6 in 3D.
    Axis,
    /// 2D only: axis steps plus both diagonals (8 neighbors).
    Diagonal,
}

impl Stencil {
    /// Worst-case ratio of stencil path length to straight-line length for a
    /// flat metric on a square grid.
    pub fn anisotropy(self, dim: usize) -> f64 {
        match (self, dim) {
            (_, 1) => 1.0,
            (Stencil::Diagonal, _) => (4.0 - 2.0 * 2f64.sqrt()).sqrt(),
            (Stencil::Axis, d) => (d as f64).sqrt(),
        }
    }

    fn forward_offsets(self, dim: usize) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        for axis in 0..dim {
            let mut o = vec![0; dim];
            o[axis] = 1;
            out.push(o);
        }
        if self == Stencil::Diagonal && dim == 2 {
            out.push(vec![1, 1]);
            out.push(vec![1, -1]);
        }
        out
    }
}

/// Axis-aligned grid layout: `origin + index * spacing` per axis, row-major
/// with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub shape: Vec<usize>,
    pub spacing: Vec<f64>,
    pub origin: Vec<f64>,
    pub periodic: Vec<bool>,
}

impl GridSpec {
    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn multi_index(&self, mut v: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            out[axis] = v % self.shape[axis];
            v /= self.shape[axis];
        }
        out
    }

    pub fn coords(&self, v: usize) -> Vec<f64> {
        self.multi_index(v)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.origin[a] + i as f64 * self.spacing[a])
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim();
        if !(1..=3).contains(&d) {
            return Err(MetricError::Domain(format!("grid dimension {d} not in 1..=3")));
        }
        if self.spacing.len() != d || self.origin.len() != d || self.periodic.len() != d {
            return Err(MetricError::Domain("grid axis arrays disagree in length".into()));
        }
        if self.shape.iter().any(|&n| n < 2) {
            return Err(MetricError::Domain("every grid axis needs at least 2 vertices".into()));
        }
        if self.spacing.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return Err(MetricError::Domain("grid spacing must be positive".into()));
        }
        Ok(())
    }
}

/// A weighted grid graph realizing a sampled Riemannian metric.
#[derive(Debug, Clone, PartialEq)]
pub struct RiemannianSample {
    grid: GridSpec,
    stencil: Stencil,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    lengths: Vec<f64>,
}

impl RiemannianSample {
    /// Sample `metric` (a row-major `dim×dim` symmetric tensor evaluated at
    /// physical coordinates) at every edge midpoint of the grid.
    pub fn from_metric<F>(grid: GridSpec, stencil: Stencil, metric: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        grid.validate()?;
        if stencil == Stencil::Diagonal && grid.dim() != 2 {
            return Err(MetricError::Domain("the diagonal stencil is 2D only".into()));
        }
        let n = grid.vertex_count();
        if n > u32::MAX as usize {
            return Err(MetricError::TooLarge {
                n,
                cap: u32::MAX as usize,
            });
        }
        let dim = grid.dim();
        let offs = stencil.forward_offsets(dim);
        let mut adj: Vec<Vec<(u32, f64)>> = vec![Vec::with_capacity(2 * offs.len()); n];
        let mut mid = vec![0.0; dim];
        let mut disp = vec![0.0; dim];
        for v in 0..n {
            let base = grid.multi_index(v);
            'offsets: for off in &offs {
                let mut target = vec![0usize; dim];
                for a in 0..dim {
                    let raw = base[a] as i64 + off[a];
                    let na = grid.shape[a] as i64;
                    target[a] = if (0..na).contains(&raw) {
                        raw as usize
                    } else if grid.periodic[a] {
                        raw.rem_euclid(na) as usize
                    } else {
                        continue 'offsets;
                    };
                    disp[a] = off[a] as f64 * grid.spacing[a];
                    mid[a] = grid.origin[a] + (base[a] as f64 + 0.5 * off[a] as f64) * grid.spacing[a];
                }
                let g = metric(&mid);
                let mut sq = 0.0;
                for i in 0..dim {
                    for j in 0..dim {
                        sq += g[i * dim + j] * disp[i] * disp[j];
                    }
                }
                let len = sq.sqrt();
                let w = grid.index(&target);
                if !len.is_finite() || !(len > 0.0) {
                    return Err(MetricError::InvalidEdge {
                        from: v,
                        to: w,
                        length: len,
                    });
                }
                adj[v].push((w as u32, len));
                adj[w].push((v as u32, len));
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut lengths = Vec::new();
        offsets.push(0);
        for list in adj {
            for (t, l) in list {
                targets.push(t);
                lengths.push(l);
            }
            offsets.push(targets.len());
        }
        Ok(Self {
            grid,
            stencil,
            offsets,
            targets,
            lengths,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn stencil(&self) -> Stencil {
        self.stencil
    }

    pub fn vertex_count(&self) -> usize {
        self.grid.vertex_count()
    }

    pub fn coords(&self, v: usize) -> Vec<f64> {
        self.grid.coords(v)
    }

    /// Outgoing `(target, length)` pairs of `v`.
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[v]..self.offsets[v + 1];
        self.targets[range.clone()]
            .iter()
            .zip(&self.lengths[range])
            .map(|(&t, &l)| (t as usize, l))
    }

    /// Edge lengths in adjacency order (each undirected edge appears twice).
    pub fn edge_lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Length of the edge `from -> to`, if present.
    pub fn edge_length(&self, from: usize, to: usize) -> Option<f64> {
        self.neighbors(from).find(|&(t, _)| t == to).map(|(_, l)| l)
    }

    pub fn max_edge(&self) -> f64 {
        self.lengths.iter().copied().fold(0.0, f64::max)
    }

    /// Same grid, stencil and topology.
    pub fn same_grid(&self, other: &Self) -> bool {
        self.grid == other.grid
            && self.stencil == other.stencil
            && self.offsets == other.offsets
            && self.targets == other.targets
    }

    /// Absolute discretization budget: one stencil cell at the largest edge,
    /// inflated by the stencil anisotropy.
    pub fn grid_slack(&self) -> f64 {
        self.max_edge() * self.stencil.anisotropy(self.grid.dim())
    }

    fn fixed_lengths(&self) -> Vec<u64> {
        self.lengths
            .iter()
            .map(|&l| ((l * FIXED_SCALE).round() as u64).max(1))
            .collect()
    }

    fn dijkstra_fixed(&self, fixed: &[u64], source: usize) -> Result<Vec<u64>> {
        let n = self.vertex_count();
        let mut dist = vec![u64::MAX; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0;
        heap.push(Reverse((0u64, source as u32)));
        while let Some(Reverse((d, v))) = heap.pop() {
            let v = v as usize;
            if d > dist[v] {
                continue;
            }
            for e in self.offsets[v]..self.offsets[v + 1] {
                let nd = d + fixed[e];
                let t = self.targets[e] as usize;
                if nd < dist[t] {
                    dist[t] = nd;
                    heap.push(Reverse((nd, t as u32)));
                }
            }
        }
        if let Some(&bad) = dist.iter().find(|&&d| d >= FIXED_MAX) {
            if bad == u64::MAX {
                return Err(MetricError::Domain("sample graph is disconnected".into()));
            }
            return Err(MetricError::Domain("path length exceeds the fixed-point range".into()));
        }
        Ok(dist)
    }

    /// Graph-geodesic distances from one vertex to every vertex. Works on
    /// grids of any size.
    pub fn distances_from(&self, source: usize) -> Result<Vec<f64>> {
        let n = self.vertex_count();
        if source >= n {
            return Err(MetricError::IndexOutOfRange { index: source, n });
        }
        let fixed = self.fixed_lengths();
        Ok(self
            .dijkstra_fixed(&fixed, source)?
            .into_iter()
            .map(|d| d as f64 / FIXED_SCALE)
            .collect())
    }
}

/// All-pairs graph-geodesic distances, pointed at `basepoint`. Sources are
/// processed in parallel; the output is independent of the schedule.
pub fn geodesic_distances(sample: &RiemannianSample, basepoint: usize) -> Result<FiniteMetricSpace> {
    let n = sample.vertex_count();
    if n > MAX_POINTS {
        return Err(MetricError::TooLarge { n, cap: MAX_POINTS });
    }
    if basepoint >= n {
        return Err(MetricError::IndexOutOfRange { index: basepoint, n });
    }
    let fixed = sample.fixed_lengths();
    let rows: Vec<Vec<u64>> = (0..n)
        .into_par_iter()
        .map(|s| sample.dijkstra_fixed(&fixed, s))
        .collect::<Result<_>>()?;
    let dist = rows.into_iter().flatten().map(|d| d as f64 / FIXED_SCALE).collect();
    let labels = (0..n).map(|v| sample.coords(v)).collect();
    FiniteMetricSpace::from_flat(n, dist, basepoint, 0.0)?.with_labels(labels)
}

/// Linear interpolation of a periodic array sampled at `0, h, 2h, …`.
pub(crate) fn periodic_interp(values: &[f64], position: f64) -> f64 {
    let n = values.len();
    let mut p = position;
    let pr = p.round();
    if (p - pr).abs() < 1e-9 {
        p = pr;
    }
    let j = p.floor();
    let frac = p - j;
    let j0 = (j as i64).rem_euclid(n as i64) as usize;
    let j1 = (j0 + 1) % n;
    if frac == 0.0 {
        values[j0]
    } else {
        values[j0] + frac * (values[j1] - values[j0])
    }
}

/// Sample `a(r) dr² + b(r) ds²` on the periodic grid `[0,2π)²` with the
/// 8-neighbor stencil. `a` and `b` are given on the r-grid; their values at
/// half-integer r-positions are linear interpolants.
pub fn sample_diagonal_torus(a: &[f64], b: &[f64], n_s: usize) -> Result<RiemannianSample> {
    let n_r = a.len();
    if b.len() != n_r {
        return Err(MetricError::Domain("coefficient arrays differ in length".into()));
    }
    if n_r < 8 || n_s < 8 {
        return Err(MetricError::Domain(format!(
            "grid {n_r}x{n_s} is below the 8x8 minimum"
        )));
    }
    if a.iter().chain(b).any(|&c| !(c > 0.0) || !c.is_finite()) {
        return Err(MetricError::Domain("metric coefficients must be positive".into()));
    }
    let hr = 2.0 * PI / n_r as f64;
    let hs = 2.0 * PI / n_s as f64;
    let grid = GridSpec {
        shape: vec![n_r, n_s],
        spacing: vec![hr, hs],
        origin: vec![0.0, 0.0],
        periodic: vec![true, true],
    };
    RiemannianSample::from_metric(grid, Stencil::Diagonal, |x| {
        let p = x[0] / hr;
        vec![periodic_interp(a, p), 0.0, 0.0, periodic_interp(b, p)]
    })
}

/// Sample `dr² + λ² f(r)² ds²` where `f` is given on an `n_r`-point r-grid.
pub fn sample_warped_torus(f: &[f64], lambda: f64, n_s: usize) -> Result<RiemannianSample> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(MetricError::Domain(format!(
            "warp scale must be positive, got {lambda}"
        )));
    }
    if f.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(MetricError::Domain("warping function must be positive".into()));
    }
    let a = vec![1.0; f.len()];
    let b: Vec<f64> = f.iter().map(|&v| lambda * lambda * v * v).collect();
    sample_diagonal_torus(&a, &b, n_s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_torus(n: usize) -> RiemannianSample {
        sample_warped_torus(&vec![1.0; n], 1.0, n).unwrap()
    }

    #[test]
    fn flat_torus_edges_and_axis_paths() {
        let n = 64;
        let s = flat_torus(n);
        let h = 2.0 * PI / n as f64;
        let v00 = s.grid().index(&[0, 0]);
        let v10 = s.grid().index(&[1, 0]);
        let v01 = s.grid().index(&[0, 1]);
        assert_eq!(s.edge_length(v00, v10), Some(h));
        assert_eq!(s.edge_length(v00, v01), Some(h));
        // wraparound edges carry the same length
        let vlast = s.grid().index(&[n - 1, 0]);
        assert_eq!(s.edge_length(vlast, v00), Some(h));
        let row = s.distances_from(v00).unwrap();
        assert!((row[v10] - 1.0 / 64.0 * 2.0 * PI).abs() < 1e-10);
        let half = s.grid().index(&[n / 2, 0]);
        assert!((row[half] - PI).abs() / PI < 0.01);
    }

    #[test]
    fn warp_scales_only_the_fiber() {
        let n = 16;
        let s1 = sample_warped_torus(&vec![1.0; n], 1.0, n).unwrap();
        let s2 = sample_warped_torus(&vec![1.0; n], 0.1, n).unwrap();
        let v = s1.grid().index(&[3, 3]);
        let vr = s1.grid().index(&[4, 3]);
        let vs = s1.grid().index(&[3, 4]);
        assert_eq!(s1.edge_length(v, vr), s2.edge_length(v, vr));
        let ratio = s2.edge_length(v, vs).unwrap() / s1.edge_length(v, vs).unwrap();
        assert!((ratio - 0.1).abs() < 1e-15);
    }

    #[test]
    fn warped_fiber_edge_at_r0() {
        let (nr, ns) = (64, 32);
        let f: Vec<f64> = (0..nr).map(|j| 2.0 + (j as f64 * 2.0 * PI / nr as f64).cos()).collect();
        let s = sample_warped_torus(&f, 1.0, ns).unwrap();
        let v = s.grid().index(&[0, 0]);
        let w = s.grid().index(&[0, 1]);
        let expect = 3.0 * 2.0 * PI / ns as f64;
        let h = 2.0 * PI / nr as f64;
        assert!((s.edge_length(v, w).unwrap() - expect).abs() <= h * h);
    }

    #[test]
    fn bad_inputs() {
        assert!(sample_warped_torus(&[1.0; 16], 0.0, 16).is_err());
        assert!(sample_warped_torus(&[-1.0; 16], 1.0, 16).is_err());
        assert!(sample_warped_torus(&[1.0; 4], 1.0, 16).is_err());
        let grid = GridSpec {
            shape: vec![4],
            spacing: vec![1.0],
            origin: vec![0.0],
            periodic: vec![false],
        };
        let err = RiemannianSample::from_metric(grid, Stencil::Axis, |_| vec![f64::NAN]);
        assert!(matches!(err, Err(MetricError::InvalidEdge { .. })));
    }

    #[test]
    fn all_pairs_is_an_exact_metric() {
        let f: Vec<f64> = (0..12).map(|j| 2.0 + (j as f64 * 2.0 * PI / 12.0).cos()).collect();
        let s = sample_warped_torus(&f, 0.7, 10).unwrap();
        let x = geodesic_distances(&s, 0).unwrap();
        assert_eq!(x.tol_tri(), 0.0);
        x.validate().unwrap();
        assert_eq!(x.labels().unwrap().len(), 120);
    }

    #[test]
    fn anisotropy_factor() {
        let a = Stencil::Diagonal.anisotropy(2);
        assert!((a - 1.0824).abs() < 1e-4);
        assert_eq!(Stencil::Axis.anisotropy(1), 1.0);
    }

    #[test]
    fn interp_is_exact_on_constants() {
        let v = vec![0.3; 7];
        for k in 0..50 {
            assert_eq!(periodic_interp(&v, k as f64 * 0.37 - 3.0), 0.3);
        }
        let w: Vec<f64> = (0..4).map(|i| i as f64).collect();
        assert_eq!(periodic_interp(&w, 1.5), 1.5);
        assert_eq!(periodic_interp(&w, 3.5), 1.5);
        assert_eq!(periodic_interp(&w, -1.0), 3.0);
    }
}
