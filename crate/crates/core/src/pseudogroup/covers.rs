//! Explicit universal-cover charts for the worked examples.

use std::f64::consts::PI;

use super::{CoverChart, LocalIsometry, PseudogroupError, Result};
use crate::metric::{sample_diagonal_torus, GridSpec, RiemannianSample, Stencil};

fn circle_sample(n: usize) -> Result<RiemannianSample> {
    let grid = GridSpec {
        shape: vec![n],
        spacing: vec![2.0 * PI / n as f64],
        origin: vec![0.0],
        periodic: vec![true],
    };
    Ok(RiemannianSample::from_metric(grid, Stencil::Axis, |_| vec![1.0])?)
}

/// The segment `[-periods·π, periods·π]` of the real line sampled at step
/// `2π/per_period`, projecting onto the `per_period`-point circle of length
/// 2π. Returns the chart and the translation by 2π.
pub fn line_cover(periods: usize, per_period: usize) -> Result<(CoverChart, LocalIsometry)> {
    if periods == 0 || per_period < 3 || !(periods * per_period).is_multiple_of(2) {
        return Err(PseudogroupError::Usage(format!(
            "need periods >= 1, per_period >= 3 and an even step count, got {periods} x {per_period}"
        )));
    }
    let steps = periods * per_period;
    let h = 2.0 * PI / per_period as f64;
    let grid = GridSpec {
        shape: vec![steps + 1],
        spacing: vec![h],
        origin: vec![-(periods as f64) * PI],
        periodic: vec![false],
    };
    let sample = RiemannianSample::from_metric(grid, Stencil::Axis, |_| vec![1.0])?;
    let mid = steps / 2;
    let projection = (0..=steps)
        .map(|k| (k as i64 - mid as i64).rem_euclid(per_period as i64) as usize)
        .collect();
    let base = circle_sample(per_period)?;
    let chart = CoverChart::new(sample, mid)?.with_projection(projection, &base, 1e-12)?;
    let radius = chart.radius();
    let shift = shift_generator(&chart, "translate_2pi", per_period as i64, radius, 2.0 * h)?;
    Ok((chart, shift))
}

/// Translation of a chart's last grid axis by `shift` vertices, with every
/// other axis fixed.
pub fn shift_generator(
    chart: &CoverChart,
    name: &str,
    shift: i64,
    radius: f64,
    tolerance: f64,
) -> Result<LocalIsometry> {
    let grid = chart.sample().grid().clone();
    let last = grid.dim() - 1;
    let len = grid.shape[last] as i64;
    LocalIsometry::from_fn(
        chart,
        name,
        |v| {
            let mut m = grid.multi_index(v);
            let k = m[last] as i64 + shift;
            if !(0..len).contains(&k) {
                return None;
            }
            m[last] = k as usize;
            Some(grid.index(&m))
        },
        radius,
        tolerance,
    )
}

/// A chart of the cover `S¹ × ℝ` of the torus `a dr² + b ds²`.
#[derive(Debug, Clone)]
pub struct WarpedCover {
    pub chart: CoverChart,
    /// Deck translation `s̃ -> s̃ + 2π`.
    pub deck: LocalIsometry,
    /// Sampled one-parameter group `s̃ -> s̃ + 2^k·h_s`, for each `k` with a
    /// shift shorter than the chart.
    pub fiber_flow: Vec<LocalIsometry>,
    /// Base torus sample the chart projects to.
    pub base: RiemannianSample,
}

/// The r-periodic strip `[0,2π) × [-periods·π, periods·π]` carrying the
/// pulled-back metric, with the diagonal stencil of the base torus sample.
pub fn warped_cover(a: &[f64], b: &[f64], n_s: usize, periods: usize) -> Result<WarpedCover> {
    if periods == 0 || !(periods * n_s).is_multiple_of(2) {
        return Err(PseudogroupError::Usage(format!(
            "need periods >= 1 and an even s-step count, got {periods} x {n_s}"
        )));
    }
    let base = sample_diagonal_torus(a, b, n_s)?;
    let n_r = a.len();
    let steps = periods * n_s;
    let hr = 2.0 * PI / n_r as f64;
    let hs = 2.0 * PI / n_s as f64;
    let grid = GridSpec {
        shape: vec![n_r, steps + 1],
        spacing: vec![hr, hs],
        origin: vec![0.0, -(periods as f64) * PI],
        periodic: vec![true, false],
    };
    let sample = RiemannianSample::from_metric(grid.clone(), Stencil::Diagonal, |x| {
        let p = x[0] / hr;
        vec![
            crate::metric::sample::periodic_interp(a, p),
            0.0,
            0.0,
            crate::metric::sample::periodic_interp(b, p),
        ]
    })?;
    let mid = steps / 2;
    let projection = (0..grid.vertex_count())
        .map(|v| {
            let m = grid.multi_index(v);
            let s = (m[1] as i64 - mid as i64).rem_euclid(n_s as i64) as usize;
            base.grid().index(&[m[0], s])
        })
        .collect();
    let center = grid.index(&[0, mid]);
    let chart = CoverChart::new(sample, center)?.with_projection(projection, &base, 1e-12)?;
    let radius = chart.radius();
    let tol = 2.0 * base.max_edge();
    let deck = shift_generator(&chart, "deck", n_s as i64, radius, tol)?;
    let mut fiber_flow = Vec::new();
    let mut shift = 1usize;
    while shift <= steps {
        let g = shift_generator(&chart, &format!("fiber_{shift}"), shift as i64, radius, tol)?;
        fiber_flow.push(g.with_continuous(true));
        shift *= 2;
    }
    Ok(WarpedCover {
        chart,
        deck,
        fiber_flow,
        base,
    })
}
