//! End-to-end experiments on the two collapsing examples and on the
//! family-convergence statement, each producing a [`Report`].
//!
//! Every scenario splits into independent per-`i` jobs run on the rayon
//! pool. Jobs draw randomness only through [`crate::rng::split_seed`] keyed by
//! `(i, t index)`, and results are merged in `i_list` order, so a report does
//! not depend on the number of threads.

mod config;
mod family;
mod nil;
mod torus;

pub use config::{ConfigError, FamilyKind, RawConfig, ScenarioConfig, ScenarioKind, WarpSpec, WarpSpecInput};
pub use family::run_family_convergence;
pub use nil::{pullback_coefficients, run_nil_scaling, PullbackCoefficients};
pub use torus::run_collapsing_torus;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::flow::{FlowError, MonitorRecord};
use crate::gh::GhError;
use crate::metric::MetricError;
use crate::pseudogroup::PseudogroupError;
use crate::report::{Assertion, Report};

#[derive(Debug, Error)]
pub enum ModuleError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Gh(#[from] GhError),
    #[error(transparent)]
    Pseudogroup(#[from] PseudogroupError),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("{scenario} failed at i = {i}, t = {t}: {source}")]
    Cell {
        scenario: &'static str,
        i: u64,
        t: f64,
        #[source]
        source: ModuleError,
    },
}

pub type Result<T> = std::result::Result<T, ScenarioError>;

/// Attach `(i, t)` context to a module error.
pub(crate) trait AtCell<T> {
    fn at(self, scenario: &'static str, i: u64, t: f64) -> Result<T>;
}

impl<T, E: Into<ModuleError>> AtCell<T> for std::result::Result<T, E> {
    fn at(self, scenario: &'static str, i: u64, t: f64) -> Result<T> {
        self.map_err(|e| ScenarioError::Cell {
            scenario,
            i,
            t,
            source: e.into(),
        })
    }
}

/// Run the scenario a configuration names.
pub fn run(cfg: &ScenarioConfig) -> Result<Report> {
    cfg.validate()?;
    match cfg.scenario {
        ScenarioKind::CollapsingTorus => run_collapsing_torus(cfg),
        ScenarioKind::NilScaling => run_nil_scaling(cfg),
        ScenarioKind::FamilyConvergence => run_family_convergence(cfg),
    }
}

pub(crate) fn config_value(cfg: &ScenarioConfig) -> serde_json::Value {
    serde_json::to_value(cfg).expect("config serializes")
}

/// Sorted union of time lists, merging values closer than 1e-12.
pub(crate) fn merge_times(lists: &[&[f64]]) -> Vec<f64> {
    let mut all: Vec<f64> = lists.iter().flat_map(|l| l.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|b, a| (*b - *a).abs() <= 1e-12);
    all
}

pub(crate) fn linspace(t_end: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals)
        .map(|k| {
            if k == intervals {
                t_end
            } else {
                t_end * k as f64 / intervals as f64
            }
        })
        .collect()
}

/// Keeps, per assertion name, the instance with the smallest margin, so a
/// monitor swept over many time pairs contributes one line per bound.
#[derive(Debug, Default)]
pub(crate) struct WorstCase {
    worst: BTreeMap<String, Assertion>,
}

impl WorstCase {
    pub fn add(&mut self, prefix: &str, context: &str, a: Assertion) {
        let name = format!("{prefix}.{}", a.name);
        let keep = match self.worst.get(&name) {
            None => true,
            Some(old) => (a.margin < old.margin) || (old.pass && !a.pass),
        };
        if keep {
            let ctx = if a.context.is_empty() {
                context.to_string()
            } else {
                format!("{context}; {}", a.context)
            };
            self.worst
                .insert(name.clone(), Assertion { name, ..a }.with_context(ctx));
        }
    }

    pub fn add_record(&mut self, prefix: &str, context: &str, rec: &MonitorRecord) {
        for a in &rec.assertions {
            self.add(prefix, context, a.clone());
        }
    }

    pub fn into_assertions(self) -> impl Iterator<Item = Assertion> {
        self.worst.into_values()
    }
}

/// `ys` nonincreasing along `labels`, one assertion per consecutive pair.
pub(crate) fn nonincreasing(name: &str, labels: &[u64], ys: &[f64]) -> Vec<Assertion> {
    labels
        .windows(2)
        .zip(ys.windows(2))
        .map(|(l, y)| Assertion::le(name, y[1], y[0]).with_context(format!("i = {} vs i = {}", l[1], l[0])))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_union() {
        let t = merge_times(&[&[0.0, 0.5], &[0.25, 0.5 + 1e-14], &linspace(0.5, 2)]);
        assert_eq!(t, vec![0.0, 0.25, 0.5]);
    }

    #[test]
    fn worst_case_keeps_smallest_margin() {
        let mut w = WorstCase::default();
        w.add("m", "a", Assertion::le("x", 1.0, 3.0));
        w.add("m", "b", Assertion::le("x", 2.0, 3.0));
        w.add("m", "c", Assertion::le("x", 0.0, 3.0));
        let out: Vec<_> = w.into_assertions().collect();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].name, "m.x");
        assert_eq!(out[0].context, "b");
    }
}
