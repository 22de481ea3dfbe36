//! Local isometry actions on sampled covers and their quotient spaces.
//!
//! A [`CoverChart`] is a sampled piece of a universal cover with dense
//! distances and a projection to a base sample. A [`LocalIsometry`] is a
//! partial vertex map; its domain is exactly the set of vertices whose image
//! exists in the chart and lies within its radius of the chart center.
//! [`quotient_distance`] groups vertices into orbits and takes the minimum
//! cover distance over representatives.

mod covers;
mod spec;

pub use covers::{line_cover, shift_generator, warped_cover, WarpedCover};
pub use spec::{GeneratorSpec, PseudogroupSpec};

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gh::{gh_upper_bound_with, GhError, GhEstimate, SearchOptions};
use crate::metric::{geodesic_distances, FiniteMetricSpace, MetricError, RiemannianSample};

/// Longest generator word used when closing orbits.
pub const MAX_WORD_LENGTH: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PseudogroupError {
    #[error("invalid input: {0}")]
    Usage(String),
    #[error("not an equivalence relation: {0}")]
    NotEquivalence(EquivalenceWitness),
    #[error("spec file: {0}")]
    Spec(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Gh(#[from] GhError),
}

pub type Result<T> = std::result::Result<T, PseudogroupError>;

/// A sampled chart of a cover with its projection to a base sample.
#[derive(Debug, Clone)]
pub struct CoverChart {
    sample: RiemannianSample,
    distances: FiniteMetricSpace,
    projection: Vec<usize>,
    base_size: usize,
    center: usize,
}

impl CoverChart {
    /// A chart that is its own base (identity projection).
    pub fn new(sample: RiemannianSample, center: usize) -> Result<Self> {
        let n = sample.vertex_count();
        let distances = geodesic_distances(&sample, center)?;
        Ok(Self {
            sample,
            distances,
            projection: (0..n).collect(),
            base_size: n,
            center,
        })
    }

    /// Attach a projection to `base`; every cover edge must project to a
    /// base edge of the same length within `tol`.
    pub fn with_projection(mut self, projection: Vec<usize>, base: &RiemannianSample, tol: f64) -> Result<Self> {
        if projection.len() != self.len() {
            return Err(PseudogroupError::Usage(format!(
                "projection has {} entries for {} cover vertices",
                projection.len(),
                self.len()
            )));
        }
        let m = base.vertex_count();
        if let Some(&bad) = projection.iter().find(|&&p| p >= m) {
            return Err(PseudogroupError::Usage(format!(
                "projection target {bad} out of range for {m} base vertices"
            )));
        }
        for u in 0..self.len() {
            for (v, len) in self.sample.neighbors(u) {
                let ok = base
                    .edge_length(projection[u], projection[v])
                    .is_some_and(|l| (l - len).abs() <= tol);
                if !ok {
                    return Err(PseudogroupError::Usage(format!(
                        "cover edge {u}->{v} does not project isometrically"
                    )));
                }
            }
        }
        self.projection = projection;
        self.base_size = m;
        Ok(self)
    }

    pub fn sample(&self) -> &RiemannianSample {
        &self.sample
    }

    pub fn distances(&self) -> &FiniteMetricSpace {
        &self.distances
    }

    pub fn projection(&self) -> &[usize] {
        &self.projection
    }

    pub fn base_size(&self) -> usize {
        self.base_size
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn len(&self) -> usize {
        self.projection.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projection.is_empty()
    }

    pub fn d(&self, u: usize, v: usize) -> f64 {
        self.distances.d(u, v)
    }

    /// Largest distance from the center, i.e. the chart's radius.
    pub fn radius(&self) -> f64 {
        self.distances.radius()
    }
}

/// A partial vertex map of a chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalIsometry {
    pub name: String,
    map: Vec<Option<usize>>,
    pub radius: f64,
    pub tolerance: f64,
    /// Metadata only: whether the map belongs to a continuous family.
    pub continuous: bool,
}

impl LocalIsometry {
    /// Checks shape and the radius condition. Distortion is checked by
    /// [`check_equivalence_relation`].
    pub fn new(
        chart: &CoverChart,
        name: impl Into<String>,
        map: Vec<Option<usize>>,
        radius: f64,
        tolerance: f64,
    ) -> Result<Self> {
        let name = name.into();
        if map.len() != chart.len() {
            return Err(PseudogroupError::Usage(format!(
                "generator {name} has {} entries for {} vertices",
                map.len(),
                chart.len()
            )));
        }
        if !(radius > 0.0) || !(tolerance >= 0.0) {
            return Err(PseudogroupError::Usage(format!(
                "generator {name}: radius and tolerance must be positive"
            )));
        }
        for (u, image) in map.iter().enumerate() {
            if let Some(w) = *image {
                if w >= chart.len() {
                    return Err(PseudogroupError::Usage(format!(
                        "generator {name} maps {u} to missing vertex {w}"
                    )));
                }
                if chart.d(chart.center(), w) > radius {
                    return Err(PseudogroupError::Usage(format!(
                        "generator {name} maps {u} outside the radius-{radius} ball"
                    )));
                }
            }
        }
        Ok(Self {
            name,
            map,
            radius,
            tolerance,
            continuous: false,
        })
    }

    /// Build from a vertex function; the domain is every vertex whose image
    /// exists and lies within `radius` of the center.
    pub fn from_fn<F>(chart: &CoverChart, name: impl Into<String>, f: F, radius: f64, tolerance: f64) -> Result<Self>
    where
        F: Fn(usize) -> Option<usize>,
    {
        let map = (0..chart.len())
            .map(|u| f(u).filter(|&w| w < chart.len() && chart.d(chart.center(), w) <= radius))
            .collect();
        Self::new(chart, name, map, radius, tolerance)
    }

    pub fn identity(chart: &CoverChart) -> Self {
        Self {
            name: "id".into(),
            map: (0..chart.len()).map(Some).collect(),
            radius: f64::INFINITY,
            tolerance: 0.0,
            continuous: true,
        }
    }

    pub fn with_continuous(mut self, continuous: bool) -> Self {
        self.continuous = continuous;
        self
    }

    pub fn apply(&self, v: usize) -> Option<usize> {
        self.map.get(v).copied().flatten()
    }

    pub fn map(&self) -> &[Option<usize>] {
        &self.map
    }

    pub fn domain(&self) -> impl Iterator<Item = usize> + '_ {
        self.map.iter().enumerate().filter_map(|(u, w)| w.map(|_| u))
    }

    /// The partial inverse, or the first pair of domain points sharing an
    /// image.
    pub fn inverse(&self) -> std::result::Result<Self, (usize, usize)> {
        let mut inv: Vec<Option<usize>> = vec![None; self.map.len()];
        for (u, image) in self.map.iter().enumerate() {
            if let Some(w) = *image {
                if let Some(prev) = inv[w] {
                    return Err((prev, u));
                }
                inv[w] = Some(u);
            }
        }
        Ok(Self {
            name: format!("{}^-1", self.name),
            map: inv,
            ..self.clone()
        })
    }

    /// Relabel the chart vertices by a permutation `perm` (old -> new).
    pub fn conjugate(&self, perm: &[usize]) -> Self {
        let mut map = vec![None; self.map.len()];
        for (u, image) in self.map.iter().enumerate() {
            map[perm[u]] = image.map(|w| perm[w]);
        }
        Self { map, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pseudogroup {
    pub generators: Vec<LocalIsometry>,
}

impl Pseudogroup {
    pub fn new(generators: Vec<LocalIsometry>) -> Self {
        Self { generators }
    }

    /// Only the identity.
    pub fn trivial() -> Self {
        Self { generators: Vec::new() }
    }

    /// Largest generator tolerance (0 for the trivial group).
    pub fn tolerance(&self) -> f64 {
        self.generators.iter().map(|g| g.tolerance).fold(0.0, f64::max)
    }

    /// Generators followed by their inverses, where defined.
    fn symmetric(&self) -> Vec<LocalIsometry> {
        let mut out = self.generators.clone();
        out.extend(self.generators.iter().filter_map(|g| g.inverse().ok()));
        out
    }
}

/// First counterexample found by [`check_equivalence_relation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Error)]
pub enum EquivalenceWitness {
    #[error("generator {generator} sends {x} and {y} to the same vertex")]
    NotInvertible { generator: String, x: usize, y: usize },
    #[error("generator {generator} distorts edge {from}->{to} by {distortion}")]
    NotIsometric {
        generator: String,
        from: usize,
        to: usize,
        distortion: f64,
    },
    #[error("{second} after {first} distorts edge {from}->{to} by {distortion}")]
    CompositionNotIsometric {
        first: String,
        second: String,
        from: usize,
        to: usize,
        distortion: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceCheck {
    pub holds: bool,
    pub region_size: usize,
    pub witness: Option<EquivalenceWitness>,
}

fn edge_distortion(
    chart: &CoverChart,
    u: usize,
    v: usize,
    len: f64,
    f: impl Fn(usize) -> Option<usize>,
) -> Option<f64> {
    let (fu, fv) = (f(u)?, f(v)?);
    Some((chart.d(fu, fv) - len).abs())
}

/// Check that `x ~ γx` is an equivalence relation on the closed ball of
/// `region_radius` about the center: generators are injective and
/// isometric there (symmetry via inverses), and pairwise compositions stay
/// isometric (transitivity). Reflexivity holds through the identity.
pub fn check_equivalence_relation(
    chart: &CoverChart,
    group: &Pseudogroup,
    region_radius: f64,
    tol: f64,
) -> EquivalenceCheck {
    let region: Vec<usize> = (0..chart.len())
        .filter(|&u| chart.d(chart.center(), u) <= region_radius)
        .collect();
    let fail = |w: EquivalenceWitness| EquivalenceCheck {
        holds: false,
        region_size: region.len(),
        witness: Some(w),
    };
    let mut in_region = vec![false; chart.len()];
    for &u in &region {
        in_region[u] = true;
    }
    for g in &group.generators {
        let mut seen: Vec<Option<usize>> = vec![None; chart.len()];
        for u in g.domain() {
            let w = g.apply(u).expect("domain point");
            if let Some(prev) = seen[w] {
                if in_region[prev] || in_region[u] {
                    return fail(EquivalenceWitness::NotInvertible {
                        generator: g.name.clone(),
                        x: prev,
                        y: u,
                    });
                }
            }
            seen[w] = Some(u);
        }
        for &u in &region {
            for (v, len) in chart.sample().neighbors(u) {
                if let Some(dist) = edge_distortion(chart, u, v, len, |x| g.apply(x)) {
                    if dist > tol {
                        return fail(EquivalenceWitness::NotIsometric {
                            generator: g.name.clone(),
                            from: u,
                            to: v,
                            distortion: dist,
                        });
                    }
                }
            }
        }
    }
    let sym = group.symmetric();
    for g in &sym {
        for h in &sym {
            for &u in &region {
                for (v, len) in chart.sample().neighbors(u) {
                    let composed = |x: usize| g.apply(x).and_then(|y| h.apply(y));
                    if let Some(dist) = edge_distortion(chart, u, v, len, composed) {
                        if dist > 2.0 * tol {
                            return fail(EquivalenceWitness::CompositionNotIsometric {
                                first: g.name.clone(),
                                second: h.name.clone(),
                                from: u,
                                to: v,
                                distortion: dist,
                            });
                        }
                    }
                }
            }
        }
    }
    EquivalenceCheck {
        holds: true,
        region_size: region.len(),
        witness: None,
    }
}

/// Quotient of a chart by orbit classes.
#[derive(Debug, Clone)]
pub struct QuotientSpace {
    pub space: FiniteMetricSpace,
    /// Cover vertex -> class index.
    pub class_of: Vec<usize>,
    /// Class index -> member vertices (ascending).
    pub members: Vec<Vec<usize>>,
}

impl QuotientSpace {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Largest quotient distance among a set of classes.
    pub fn diameter_of(&self, classes: &[usize]) -> f64 {
        let mut d = 0.0f64;
        for (k, &a) in classes.iter().enumerate() {
            for &b in &classes[k + 1..] {
                d = d.max(self.space.d(a, b));
            }
        }
        d
    }
}

/// Orbit classes by breadth-first closure under the symmetric generators,
/// words of length at most [`MAX_WORD_LENGTH`].
fn orbit_classes(chart: &CoverChart, group: &Pseudogroup) -> Vec<Vec<usize>> {
    let sym = group.symmetric();
    let n = chart.len();
    let mut class_of = vec![usize::MAX; n];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for seed in 0..n {
        if class_of[seed] != usize::MAX {
            continue;
        }
        let id = classes.len();
        let mut members = vec![seed];
        class_of[seed] = id;
        let mut queue = VecDeque::from([(seed, 0usize)]);
        while let Some((v, depth)) = queue.pop_front() {
            if depth == MAX_WORD_LENGTH {
                continue;
            }
            for g in &sym {
                if let Some(w) = g.apply(v) {
                    if class_of[w] == usize::MAX {
                        class_of[w] = id;
                        members.push(w);
                        queue.push_back((w, depth + 1));
                    }
                }
            }
        }
        members.sort_unstable();
        classes.push(members);
    }
    // order classes by their smallest base point, then smallest vertex
    let proj = chart.projection();
    classes.sort_by_key(|m| (m.iter().map(|&v| proj[v]).min().unwrap(), m[0]));
    classes
}

/// `d̄([x],[y]) = min d(x', y')` over sampled orbit representatives.
/// Refuses when the equivalence check fails on the quarter-radius ball
/// `region_radius`.
pub fn quotient_distance(chart: &CoverChart, group: &Pseudogroup, region_radius: f64) -> Result<QuotientSpace> {
    let tol = group.tolerance();
    let check = check_equivalence_relation(chart, group, region_radius, tol);
    if let Some(w) = check.witness {
        return Err(PseudogroupError::NotEquivalence(w));
    }
    let members = orbit_classes(chart, group);
    let k = members.len();
    let mut class_of = vec![0; chart.len()];
    for (c, m) in members.iter().enumerate() {
        for &v in m {
            class_of[v] = c;
        }
    }
    let rows: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|a| {
            (0..k)
                .map(|b| {
                    if a == b {
                        return 0.0;
                    }
                    let mut best = f64::INFINITY;
                    for &u in &members[a] {
                        let row = chart.distances().row(u);
                        for &v in &members[b] {
                            best = best.min(row[v]);
                        }
                    }
                    best
                })
                .collect()
        })
        .collect();
    // a min over a symmetric matrix is symmetric; the rows agree exactly
    let space = FiniteMetricSpace::new(rows, class_of[chart.center()], 2.0 * tol)?;
    let space = match chart.distances().labels() {
        Some(labels) => {
            let reps = members.iter().map(|m| labels[m[0]].clone()).collect();
            space.with_labels(reps)?
        }
        None => space,
    };
    Ok(QuotientSpace {
        space,
        class_of,
        members,
    })
}

/// Cover vertices whose projection lies in the closed base ball of `radius`
/// about the base space's basepoint.
pub fn chart_preimage_ball(chart: &CoverChart, base: &FiniteMetricSpace, radius: f64) -> Result<Vec<usize>> {
    if base.len() != chart.base_size() {
        return Err(PseudogroupError::Usage(format!(
            "base space has {} points, projection expects {}",
            base.len(),
            chart.base_size()
        )));
    }
    chart_preimage_ball_row(chart, base.base_row(), radius)
}

/// As [`chart_preimage_ball`], from one row of base distances.
pub fn chart_preimage_ball_row(chart: &CoverChart, base_row: &[f64], radius: f64) -> Result<Vec<usize>> {
    if base_row.len() != chart.base_size() {
        return Err(PseudogroupError::Usage(format!(
            "base row has {} entries, projection expects {}",
            base_row.len(),
            chart.base_size()
        )));
    }
    Ok((0..chart.len())
        .filter(|&u| base_row[chart.projection()[u]] <= radius)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotientIsometryRecord {
    pub estimate: GhEstimate,
    pub allowance: f64,
    pub margin: f64,
    pub pass: bool,
}

/// GH upper bound between a quotient and a reference, asserted against an
/// allowance (grid slack plus sampling slack).
pub fn verify_quotient_isometry(
    q: &QuotientSpace,
    reference: &FiniteMetricSpace,
    allowance: f64,
    opts: &SearchOptions,
) -> Result<QuotientIsometryRecord> {
    let estimate = gh_upper_bound_with(&q.space, reference, opts)?;
    let margin = allowance - estimate.upper;
    Ok(QuotientIsometryRecord {
        estimate,
        allowance,
        margin,
        pass: margin >= 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{GridSpec, Stencil};

    fn segment(n: usize, h: f64) -> CoverChart {
        let grid = GridSpec {
            shape: vec![n],
            spacing: vec![h],
            origin: vec![0.0],
            periodic: vec![false],
        };
        let s = RiemannianSample::from_metric(grid, Stencil::Axis, |_| vec![1.0]).unwrap();
        CoverChart::new(s, n / 2).unwrap()
    }

    #[test]
    fn trivial_group_quotient_is_the_chart() {
        let c = segment(9, 0.5);
        let q = quotient_distance(&c, &Pseudogroup::trivial(), 1.0).unwrap();
        assert_eq!(q.len(), 9);
        for u in 0..9 {
            assert_eq!(q.space.row(q.class_of[u]), c.distances().row(u));
        }
        assert_eq!(q.space.basepoint(), 4);
    }

    #[test]
    fn inverse_detects_collisions() {
        let c = segment(5, 1.0);
        let g = LocalIsometry::new(&c, "g", vec![Some(1), Some(1), None, None, None], 10.0, 0.0).unwrap();
        assert_eq!(g.inverse(), Err((0, 1)));
        let h = LocalIsometry::new(&c, "h", vec![Some(1), Some(2), None, None, None], 10.0, 0.0).unwrap();
        let hi = h.inverse().unwrap();
        assert_eq!(hi.apply(2), Some(1));
        assert_eq!(hi.apply(0), None);
    }

    #[test]
    fn radius_condition_enforced() {
        let c = segment(9, 1.0);
        assert!(LocalIsometry::new(&c, "far", vec![Some(0); 9], 1.0, 0.0).is_err());
        let g = LocalIsometry::from_fn(&c, "shift", |u| Some(u + 1), 2.0, 0.0).unwrap();
        // center 4: images 2..=6 allowed, so preimages 1..=5
        assert_eq!(g.domain().collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
    }
}
