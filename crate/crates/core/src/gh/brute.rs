//! Exhaustive oracle: every pointed map in both directions at every grid ε.
//!
//! Deliberately naive. It shares only the predicate with the search in
//! `search.rs` and is the reference the search is tested against.

use super::{check_eps_approximation, EpsGrid, GhError, GhEstimate, PointedMap, Result};
use crate::metric::FiniteMetricSpace;

/// Largest space the oracle accepts (6^6 maps per direction).
pub const BRUTE_FORCE_CAP: usize = 6;

/// All pointed maps `x -> y` in lexicographic order of the image array.
fn pointed_maps(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> impl Iterator<Item = PointedMap> {
    let n = x.len();
    let m = y.len();
    let x0 = x.basepoint();
    let y0 = y.basepoint();
    let free: Vec<usize> = (0..n).filter(|&i| i != x0).collect();
    let total = (m as u64).pow(free.len() as u32);
    (0..total).map(move |mut code| {
        let mut image = vec![y0; n];
        // most significant digit is the lowest free index
        for &i in free.iter().rev() {
            image[i] = (code % m as u64) as usize;
            code /= m as u64;
        }
        PointedMap::new(image)
    })
}

fn first_passing(x: &FiniteMetricSpace, y: &FiniteMetricSpace, eps: f64) -> Result<Option<PointedMap>> {
    for f in pointed_maps(x, y) {
        if check_eps_approximation(x, y, &f, eps)? {
            return Ok(Some(f));
        }
    }
    Ok(None)
}

/// Smallest grid ε admitting approximations both ways, with lexicographically
/// smallest witnesses. `lower` is the grid value just below `upper` (shown
/// infeasible by exhaustion), or 0 when `upper` is the first grid value.
pub fn gh_brute_force(x: &FiniteMetricSpace, y: &FiniteMetricSpace, grid: &EpsGrid) -> Result<GhEstimate> {
    let biggest = x.len().max(y.len());
    if biggest > BRUTE_FORCE_CAP {
        return Err(GhError::TooLarge(biggest));
    }
    for (k, &eps) in grid.values().iter().enumerate() {
        let Some(fwd) = first_passing(x, y, eps)? else { continue };
        let Some(bwd) = first_passing(y, x, eps)? else { continue };
        return Ok(GhEstimate {
            lower: if k == 0 { 0.0 } else { grid.values()[k - 1] },
            upper: eps,
            eps_grid: grid.clone(),
            witness_fwd: fwd,
            witness_bwd: bwd,
        });
    }
    Err(GhError::NoFeasibleEpsilon)
}
