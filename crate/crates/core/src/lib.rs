//! Finite-scale machinery for studying Ricci flow on collapsing sequences.
//!
//! The crate is organised bottom-up:
//!
//! * [`metric`]: pointed finite metric spaces and graph-geodesic sampling of
//!   Riemannian metrics on periodic grids.
//! * [`gh`]: pointed Gromov–Hausdorff approximations, an exhaustive oracle,
//!   a search-based upper bound and a necessary-condition lower bound.
//! * [`flow`]: Ricci flow of left-invariant Nil metrics and of diagonal
//!   warped metrics on the 2-torus, plus the curvature-controlled bound
//!   monitors.
//! * [`pseudogroup`]: local isometry actions on sampled covers and their
//!   quotient metric spaces.
//! * [`scenarios`]: end-to-end collapse experiments producing [`report::Report`]s.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod flow;
pub mod gh;
pub mod metric;
pub mod pseudogroup;
pub mod report;
pub mod rng;
pub mod scenarios;

pub use flow::{FlowTrace, NilMetric, WarpedSurfaceMetric};
pub use gh::{EpsGrid, GhEstimate, PointedMap};
pub use metric::{FiniteMetricSpace, RiemannianSample};
pub use report::{Assertion, Report};
pub use scenarios::ScenarioConfig;
