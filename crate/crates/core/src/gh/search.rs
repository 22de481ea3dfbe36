//! Search-based upper bound.
//!
//! For each grid ε (ascending, starting at the necessary-condition lower
//! bound) the search looks for a passing map in each direction:
//!
//! 1. if the in-ball map space has at most `budget` elements it is
//!    enumerated by backtracking, which is exact and returns the
//!    lexicographically smallest passing map;
//! 2. otherwise seeded candidates (identity, constant, greedy
//!    distance-profile, caller hints) are checked;
//! 3. failing that, simulated annealing over single-point reassignments runs
//!    for `budget` iterations on the violation count.
//!
//! Each direction at each ε is a pure function of (source, target, ε, grid
//! index, seed, budget, hints), so swapping the arguments and the hints
//! reproduces the same upper bound.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{gh_lower_bound, passes, EpsGrid, GhError, GhEstimate, PointedMap, Result};
use crate::metric::FiniteMetricSpace;
use crate::rng;

/// Number of landmark points the greedy initialization matches against.
const GREEDY_ANCHORS: usize = 8;

#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub budget: u64,
    pub seed: u64,
    pub grid: EpsGrid,
    /// Extra starting maps `x -> y`.
    pub hints_fwd: Vec<PointedMap>,
    /// Extra starting maps `y -> x`.
    pub hints_bwd: Vec<PointedMap>,
}

impl SearchOptions {
    pub fn new(budget: u64, seed: u64) -> Self {
        Self {
            budget,
            seed,
            grid: EpsGrid::default(),
            hints_fwd: Vec::new(),
            hints_bwd: Vec::new(),
        }
    }

    pub fn with_grid(mut self, grid: EpsGrid) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_hints(mut self, fwd: Vec<PointedMap>, bwd: Vec<PointedMap>) -> Self {
        self.hints_fwd = fwd;
        self.hints_bwd = bwd;
        self
    }

    /// Options for the mirrored problem `(y, x)`.
    pub fn mirrored(&self) -> Self {
        Self {
            hints_fwd: self.hints_bwd.clone(),
            hints_bwd: self.hints_fwd.clone(),
            ..self.clone()
        }
    }
}

/// Upper bound with the default grid and no hints.
pub fn gh_upper_bound(x: &FiniteMetricSpace, y: &FiniteMetricSpace, budget: u64, seed: u64) -> Result<GhEstimate> {
    gh_upper_bound_with(x, y, &SearchOptions::new(budget, seed))
}

pub fn gh_upper_bound_with(x: &FiniteMetricSpace, y: &FiniteMetricSpace, opts: &SearchOptions) -> Result<GhEstimate> {
    if opts.budget == 0 {
        return Err(GhError::Usage("search budget must be at least 1".into()));
    }
    for h in &opts.hints_fwd {
        h.validate(x, y)?;
    }
    for h in &opts.hints_bwd {
        h.validate(y, x)?;
    }
    let grid = &opts.grid;
    let lower = gh_lower_bound(x, y, grid);
    let fwd_seeds = candidates(x, y, &opts.hints_fwd);
    let bwd_seeds = candidates(y, x, &opts.hints_bwd);
    let start = grid.values().partition_point(|&e| e < lower);
    for (k, &eps) in grid.values().iter().enumerate().skip(start) {
        let Some(fwd) = find_map(x, y, eps, k, &fwd_seeds, opts) else {
            continue;
        };
        let Some(bwd) = find_map(y, x, eps, k, &bwd_seeds, opts) else {
            continue;
        };
        return Ok(GhEstimate {
            lower,
            upper: eps,
            eps_grid: grid.clone(),
            witness_fwd: PointedMap::new(fwd),
            witness_bwd: PointedMap::new(bwd),
        });
    }
    Err(GhError::NoFeasibleEpsilon)
}

fn candidates(x: &FiniteMetricSpace, y: &FiniteMetricSpace, hints: &[PointedMap]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = hints.iter().map(|h| h.image.clone()).collect();
    if x.len() == y.len() && x.basepoint() == y.basepoint() {
        out.push((0..x.len()).collect());
    }
    out.push(vec![y.basepoint(); x.len()]);
    out.push(greedy_profile_map(x, y));
    out
}

/// Match landmarks first, then every other point, each to the target that
/// best reproduces its distances to the already-placed landmarks.
fn greedy_profile_map(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Vec<usize> {
    let anchors = x.farthest_points(GREEDY_ANCHORS.min(x.len()));
    let mut image = vec![y.basepoint(); x.len()];
    let mut placed: Vec<usize> = vec![x.basepoint()];
    let best_target = |p: usize, placed: &[usize], image: &[usize]| -> usize {
        let mut best = (f64::INFINITY, 0);
        for t in 0..y.len() {
            let err = placed
                .iter()
                .map(|&a| (x.d(p, a) - y.d(t, image[a])).abs())
                .fold(0.0, f64::max);
            if err < best.0 {
                best = (err, t);
            }
        }
        best.1
    };
    for &a in anchors.iter().skip(1) {
        image[a] = best_target(a, &placed, &image);
        placed.push(a);
    }
    for p in 0..x.len() {
        if !placed.contains(&p) {
            image[p] = best_target(p, &placed, &image);
        }
    }
    image
}

fn find_map(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    eps: f64,
    grid_index: usize,
    seeds: &[Vec<usize>],
    opts: &SearchOptions,
) -> Option<Vec<usize>> {
    let ball = x.ball_indices(x.basepoint(), 1.0 / eps);
    let free: Vec<usize> = ball.iter().copied().filter(|&a| a != x.basepoint()).collect();
    let space = (y.len() as f64).powi(free.len() as i32);
    if space <= opts.budget as f64 {
        return enumerate(x, y, eps, &ball, &free);
    }
    let passing = seeds.iter().filter(|s| passes(x, y, s, eps, &ball)).min();
    if let Some(p) = passing {
        return Some(p.clone());
    }
    let mut rng = rng::stream(opts.seed, &[grid_index as u64]);
    let start = seeds
        .iter()
        .min_by_key(|s| Anneal::new(x, y, eps, &ball, (*s).clone()).energy())
        .expect("at least the constant seed")
        .clone();
    Anneal::new(x, y, eps, &ball, start).run(&free, opts.budget, &mut rng)
}

/// Backtracking over in-ball points in index order, smallest target first.
/// Points outside the ball are sent to index 0 (they are unconstrained).
fn enumerate(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    eps: f64,
    ball: &[usize],
    free: &[usize],
) -> Option<Vec<usize>> {
    let mut image = vec![0; x.len()];
    image[x.basepoint()] = y.basepoint();
    let mut fixed = vec![x.basepoint()];

    fn go(
        depth: usize,
        x: &FiniteMetricSpace,
        y: &FiniteMetricSpace,
        eps: f64,
        ball: &[usize],
        free: &[usize],
        image: &mut Vec<usize>,
        fixed: &mut Vec<usize>,
    ) -> bool {
        if depth == free.len() {
            return passes(x, y, image, eps, ball);
        }
        let p = free[depth];
        for t in 0..y.len() {
            let ok = fixed.iter().all(|&a| (x.d(p, a) - y.d(t, image[a])).abs() < eps);
            if !ok {
                continue;
            }
            image[p] = t;
            fixed.push(p);
            if go(depth + 1, x, y, eps, ball, free, image, fixed) {
                return true;
            }
            fixed.pop();
        }
        image[p] = 0;
        false
    }

    go(0, x, y, eps, ball, free, &mut image, &mut fixed).then_some(image)
}

/// Violation-count annealer: energy is the number of in-ball pairs with
/// distortion `>= eps` plus the number of uncovered target points.
struct Anneal<'a> {
    x: &'a FiniteMetricSpace,
    y: &'a FiniteMetricSpace,
    eps: f64,
    ball: &'a [usize],
    targets: Vec<usize>,
    image: Vec<usize>,
    cover_count: Vec<u32>,
    uncovered: usize,
    bad_pairs: usize,
}

impl<'a> Anneal<'a> {
    fn new(x: &'a FiniteMetricSpace, y: &'a FiniteMetricSpace, eps: f64, ball: &'a [usize], image: Vec<usize>) -> Self {
        let cover_radius = 1.0 / eps - eps;
        let targets: Vec<usize> = if cover_radius > 0.0 {
            (0..y.len()).filter(|&t| y.d(y.basepoint(), t) < cover_radius).collect()
        } else {
            Vec::new()
        };
        let mut bad_pairs = 0;
        for (i, &a) in ball.iter().enumerate() {
            for &b in &ball[i + 1..] {
                if !((x.d(a, b) - y.d(image[a], image[b])).abs() < eps) {
                    bad_pairs += 1;
                }
            }
        }
        let cover_count: Vec<u32> = targets
            .iter()
            .map(|&t| ball.iter().filter(|&&a| y.d(t, image[a]) < eps).count() as u32)
            .collect();
        let uncovered = cover_count.iter().filter(|&&c| c == 0).count();
        Self {
            x,
            y,
            eps,
            ball,
            targets,
            image,
            cover_count,
            uncovered,
            bad_pairs,
        }
    }

    fn energy(&self) -> usize {
        self.bad_pairs + self.uncovered
    }

    fn delta(&self, p: usize, to: usize) -> (i64, i64) {
        let from = self.image[p];
        let mut dpair = 0i64;
        for &b in self.ball {
            if b == p {
                continue;
            }
            let dx = self.x.d(p, b);
            let yb = self.image[b];
            let old_bad = !((dx - self.y.d(from, yb)).abs() < self.eps);
            let new_bad = !((dx - self.y.d(to, yb)).abs() < self.eps);
            dpair += new_bad as i64 - old_bad as i64;
        }
        let mut dcover = 0i64;
        for (ti, &t) in self.targets.iter().enumerate() {
            let was = self.y.d(t, from) < self.eps;
            let now = self.y.d(t, to) < self.eps;
            let c = self.cover_count[ti];
            if was && !now && c == 1 {
                dcover += 1;
            } else if !was && now && c == 0 {
                dcover -= 1;
            }
        }
        (dpair, dcover)
    }

    fn apply(&mut self, p: usize, to: usize, (dpair, dcover): (i64, i64)) {
        let from = self.image[p];
        for (ti, &t) in self.targets.iter().enumerate() {
            let was = self.y.d(t, from) < self.eps;
            let now = self.y.d(t, to) < self.eps;
            match (was, now) {
                (true, false) => self.cover_count[ti] -= 1,
                (false, true) => self.cover_count[ti] += 1,
                _ => {}
            }
        }
        self.image[p] = to;
        self.bad_pairs = (self.bad_pairs as i64 + dpair) as usize;
        self.uncovered = (self.uncovered as i64 + dcover) as usize;
    }

    fn run(mut self, free: &[usize], budget: u64, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
        if self.energy() == 0 {
            return Some(self.image);
        }
        if free.is_empty() {
            return None;
        }
        let (t0, t1) = (1.0f64, 0.02f64);
        for it in 0..budget {
            let temp = t0 * (t1 / t0).powf(it as f64 / budget as f64);
            let p = free[rng.gen_range(0..free.len())];
            let to = if rng.gen_bool(0.5) {
                rng.gen_range(0..self.y.len())
            } else {
                // aim at the distance profile of a random already-mapped ball point
                let b = self.ball[rng.gen_range(0..self.ball.len())];
                let want = self.x.d(p, b);
                let yb = self.image[b];
                (0..self.y.len())
                    .min_by(|&s, &t| {
                        let es = (self.y.d(s, yb) - want).abs();
                        let et = (self.y.d(t, yb) - want).abs();
                        es.total_cmp(&et)
                    })
                    .expect("nonempty target")
            };
            if to == self.image[p] {
                continue;
            }
            let d = self.delta(p, to);
            let total = d.0 + d.1;
            if total <= 0 || rng.gen::<f64>() < (-(total as f64) / temp).exp() {
                self.apply(p, to, d);
                if self.energy() == 0 {
                    return Some(self.image);
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gh::{check_eps_approximation, gh_brute_force, random_space};
    use crate::metric::sample_circle;
    use std::f64::consts::PI;

    #[test]
    fn identity_seed_hits_grid_minimum() {
        let c = sample_circle(2.0 * PI, 50).unwrap();
        let e = gh_upper_bound(&c, &c, 100, 0).unwrap();
        assert_eq!(e.upper, EpsGrid::default().min());
        assert!(e.witnesses_valid(&c, &c).unwrap());
    }

    #[test]
    fn greedy_matches_rotated_circle() {
        let c = sample_circle(2.0 * PI, 60).unwrap();
        let rotated = c.rebase(17).unwrap();
        let e = gh_upper_bound(&c, &rotated, 50, 3).unwrap();
        assert_eq!(e.upper, EpsGrid::default().min());
    }

    #[test]
    fn agrees_with_oracle_on_small_spaces() {
        let mut r = rng::stream(42, &[]);
        let grid = EpsGrid::default();
        for _ in 0..30 {
            let nx = r.gen_range(1..=4);
            let ny = r.gen_range(1..=4);
            let x = random_space(&mut r, nx);
            let y = random_space(&mut r, ny);
            let brute = gh_brute_force(&x, &y, &grid).unwrap();
            let search = gh_upper_bound(&x, &y, 10_000, 9).unwrap();
            assert_eq!(brute.upper, search.upper);
            assert_eq!(brute.witness_fwd, search.witness_fwd);
            assert!(search.lower <= search.upper);
        }
    }

    #[test]
    fn annealing_recovers_a_shuffled_isometry() {
        let c = sample_circle(2.0 * PI, 40).unwrap();
        let opts = SearchOptions::new(20_000, 1);
        let x = &c;
        let eps = 0.05;
        let ball = x.ball_indices(x.basepoint(), 1.0 / eps);
        let free: Vec<usize> = ball.iter().copied().filter(|&a| a != 0).collect();
        let mut start: Vec<usize> = (0..40).collect();
        start.swap(5, 9);
        start.swap(11, 30);
        let mut r = rng::stream(opts.seed, &[0]);
        let found = Anneal::new(x, x, eps, &ball, start)
            .run(&free, opts.budget, &mut r)
            .unwrap();
        assert!(check_eps_approximation(x, x, &PointedMap::new(found), eps).unwrap());
    }

    #[test]
    fn zero_budget_is_rejected() {
        let c = sample_circle(1.0, 4).unwrap();
        assert!(gh_upper_bound(&c, &c, 0, 0).is_err());
    }
}
