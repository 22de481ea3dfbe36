use super::EpsGrid;
use crate::metric::FiniteMetricSpace;

/// Necessary condition for ε-feasibility: pairs `(x0, x)` in the `1/ε` ball
/// must keep distortion below ε, so `ecc_X(1/ε) - ε <= rad_Y`, and the same
/// with the roles swapped.
fn necessary_condition(x: &FiniteMetricSpace, y: &FiniteMetricSpace, eps: f64) -> bool {
    let r = 1.0 / eps;
    x.eccentricity_below(r) - eps <= y.radius() && y.eccentricity_below(r) - eps <= x.radius()
}

/// Largest grid ε whose predecessors all violate the necessary condition;
/// 0 when the first grid value already satisfies it.
pub fn gh_lower_bound(x: &FiniteMetricSpace, y: &FiniteMetricSpace, grid: &EpsGrid) -> f64 {
    for (k, &eps) in grid.values().iter().enumerate() {
        if necessary_condition(x, y, eps) {
            return if k == 0 { 0.0 } else { eps };
        }
    }
    grid.max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::sample_circle;

    #[test]
    fn equal_spaces_give_zero() {
        let c = sample_circle(5.0, 9).unwrap();
        assert_eq!(gh_lower_bound(&c, &c, &EpsGrid::default()), 0.0);
    }

    #[test]
    fn circle_against_point() {
        let c = sample_circle(2.0 * std::f64::consts::PI, 360).unwrap();
        let p = FiniteMetricSpace::new(vec![vec![0.0]], 0, 0.0).unwrap();
        let grid = EpsGrid::default();
        let lb = gh_lower_bound(&c, &p, &grid);
        assert!((lb - 1.0).abs() <= grid.step_at(1.0), "lb = {lb}");
        // every grid value below the bound violates the condition
        for &e in grid.values().iter().filter(|&&e| e < lb) {
            assert!(!necessary_condition(&c, &p, e));
        }
    }
}
