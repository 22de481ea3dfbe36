//! Scenario configuration: a sparse user-facing form with per-scenario
//! defaults, resolved into a complete, validated [`ScenarioConfig`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    CollapsingTorus,
    NilScaling,
    FamilyConvergence,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::CollapsingTorus => "collapsing_torus",
            Self::NilScaling => "nil_scaling",
            Self::FamilyConvergence => "family_convergence",
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "collapsing_torus" => Ok(Self::CollapsingTorus),
            "nil_scaling" => Ok(Self::NilScaling),
            "family_convergence" => Ok(Self::FamilyConvergence),
            other => Err(ConfigError::new("scenario", format!("unknown scenario `{other}`"))),
        }
    }
}

/// Which torus family `family_convergence` runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// `dr² + i⁻¹ f² ds²`.
    CollapsingTorus,
    /// `dr² + ds²` for every `i`.
    Flat,
}

/// Warping function `f(r) = offset + amplitude · cos(frequency · r)`.
///
/// Textual form: `"2+cos"`, `"2+0.5cos"`, `"1.5+0.25cos3"`, or a constant
/// such as `"1"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarpSpec {
    pub offset: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "one_u32")]
    pub frequency: u32,
}

fn one_u32() -> u32 {
    1
}

impl WarpSpec {
    pub const BUMPY: Self = Self {
        offset: 2.0,
        amplitude: 1.0,
        frequency: 1,
    };

    pub fn constant(offset: f64) -> Self {
        Self {
            offset,
            amplitude: 0.0,
            frequency: 1,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.offset + self.amplitude * (self.frequency as f64 * r).cos()
    }

    pub fn max(&self) -> f64 {
        self.offset + self.amplitude.abs()
    }

    pub fn is_constant(&self) -> bool {
        self.amplitude == 0.0
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !(self.offset - self.amplitude.abs() > 0.0) || !self.offset.is_finite() || !self.amplitude.is_finite() {
            return Err(ConfigError::new("f", "warping function must stay positive"));
        }
        if self.frequency == 0 {
            return Err(ConfigError::new("f.frequency", "must be at least 1"));
        }
        Ok(())
    }
}

impl fmt::Display for WarpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_constant() {
            return write!(f, "{}", self.offset);
        }
        write!(f, "{}+{}cos", self.offset, self.amplitude)?;
        if self.frequency != 1 {
            write!(f, "{}", self.frequency)?;
        }
        Ok(())
    }
}

impl FromStr for WarpSpec {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        let bad = || ConfigError::new("f", format!("cannot parse warping function `{s}`"));
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let spec = match compact.split_once('+') {
            None => Self::constant(compact.parse().map_err(|_| bad())?),
            Some((offset, rest)) => {
                let offset: f64 = offset.parse().map_err(|_| bad())?;
                let (amp, freq) = rest.split_once("cos").ok_or_else(bad)?;
                let amplitude = if amp.is_empty() {
                    1.0
                } else {
                    amp.trim_end_matches('*').parse().map_err(|_| bad())?
                };
                let freq = freq
                    .trim_start_matches('(')
                    .trim_end_matches("r)")
                    .trim_end_matches('r');
                let frequency = if freq.is_empty() {
                    1
                } else {
                    freq.parse().map_err(|_| bad())?
                };
                Self {
                    offset,
                    amplitude,
                    frequency,
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    /// Dotted path of the offending field.
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// The sparse form read from a config file; absent fields take the
/// scenario's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub scenario: String,
    pub i_list: Option<Vec<u64>>,
    pub t_grid: Option<Vec<f64>>,
    pub nr: Option<usize>,
    pub ns: Option<usize>,
    pub gh_nr: Option<usize>,
    pub gh_ns: Option<usize>,
    pub dt: Option<f64>,
    pub f: Option<WarpSpecInput>,
    pub family: Option<FamilyKind>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub box_size: Option<f64>,
    pub box_points: Option<usize>,
    pub lattice_points: Option<usize>,
    pub deltas: Option<Vec<f64>>,
    pub rho_list: Option<Vec<f64>>,
    pub containment_times: Option<Vec<f64>>,
    pub rel_tol: Option<f64>,
    pub t_stability_tol: Option<f64>,
    pub seed: Option<u64>,
    pub budget: Option<u64>,
}

/// `f` may be given as a string (`"2+cos"`) or as a table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WarpSpecInput {
    Text(#[serde(with = "warp_text")] WarpSpec),
    Table(WarpSpec),
}

mod warp_text {
    use super::WarpSpec;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(w: &WarpSpec, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&w.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<WarpSpec, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

impl WarpSpecInput {
    pub fn spec(self) -> WarpSpec {
        match self {
            Self::Text(w) | Self::Table(w) => w,
        }
    }
}

/// A complete, validated scenario configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub i_list: Vec<u64>,
    pub t_grid: Vec<f64>,
    /// Flow and monitor resolution.
    pub nr: usize,
    pub ns: usize,
    /// r-resolution of the samples handed to GH searches.
    pub gh_nr: usize,
    /// Cap on their s-resolution; the torus scenario uses `gh_nr/√i` points
    /// so that r- and s-steps agree.
    pub gh_ns: usize,
    /// Flow step; `None` takes the stability budget of the initial data.
    pub dt: Option<f64>,
    pub f: WarpSpec,
    pub family: FamilyKind,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Side of the evaluation box `[0, box_size]³`.
    pub box_size: f64,
    /// Evaluation points per box axis.
    pub box_points: usize,
    /// Sample points per (x, y) axis of the lattice box.
    pub lattice_points: usize,
    pub deltas: Vec<f64>,
    pub rho_list: Vec<f64>,
    pub containment_times: Vec<f64>,
    /// Relative slack on the coefficient-ratio bounds.
    pub rel_tol: f64,
    /// Allowed dy² deviation at the largest `i` for `t > 0`.
    pub t_stability_tol: f64,
    pub seed: u64,
    /// GH search budget per direction and grid value.
    pub budget: u64,
}

impl ScenarioConfig {
    /// Defaults for a scenario.
    pub fn defaults(kind: ScenarioKind) -> Self {
        let base = Self {
            scenario: kind,
            i_list: vec![1, 4, 16, 64],
            t_grid: vec![0.0, 0.125, 0.25, 0.375, 0.5],
            nr: 256,
            ns: 256,
            gh_nr: 64,
            gh_ns: 32,
            dt: None,
            f: WarpSpec::BUMPY,
            family: FamilyKind::CollapsingTorus,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            box_size: 1.0,
            box_points: 21,
            lattice_points: 7,
            deltas: vec![0.05, 0.1],
            rho_list: vec![0.5, 1.0],
            containment_times: vec![0.1, 0.25],
            rel_tol: 1e-3,
            t_stability_tol: 2e-3,
            seed: 0,
            budget: 2000,
        };
        match kind {
            ScenarioKind::CollapsingTorus => Self {
                gh_ns: 64,
                budget: 20_000,
                ..base
            },
            ScenarioKind::NilScaling => Self {
                i_list: vec![10, 100, 1000],
                t_grid: vec![0.0, 1.0],
                ..base
            },
            ScenarioKind::FamilyConvergence => Self {
                i_list: vec![16, 64, 256],
                nr: 128,
                ns: 128,
                gh_nr: 32,
                gh_ns: 32,
                ..base
            },
        }
    }

    /// Apply defaults to a sparse config and validate the result.
    pub fn resolve(raw: RawConfig) -> Result<Self, ConfigError> {
        let kind: ScenarioKind = raw.scenario.parse()?;
        let d = Self::defaults(kind);
        let cfg = Self {
            scenario: kind,
            i_list: raw.i_list.unwrap_or(d.i_list),
            t_grid: raw.t_grid.unwrap_or(d.t_grid),
            nr: raw.nr.unwrap_or(d.nr),
            ns: raw.ns.unwrap_or(d.ns),
            gh_nr: raw.gh_nr.unwrap_or(d.gh_nr),
            gh_ns: raw.gh_ns.unwrap_or(d.gh_ns),
            dt: raw.dt.or(d.dt),
            f: raw.f.map(WarpSpecInput::spec).unwrap_or(d.f),
            family: raw.family.unwrap_or(d.family),
            c1: raw.c1.unwrap_or(d.c1),
            c2: raw.c2.unwrap_or(d.c2),
            c3: raw.c3.unwrap_or(d.c3),
            box_size: raw.box_size.unwrap_or(d.box_size),
            box_points: raw.box_points.unwrap_or(d.box_points),
            lattice_points: raw.lattice_points.unwrap_or(d.lattice_points),
            deltas: raw.deltas.unwrap_or(d.deltas),
            rho_list: raw.rho_list.unwrap_or(d.rho_list),
            containment_times: raw.containment_times.unwrap_or(d.containment_times),
            rel_tol: raw.rel_tol.unwrap_or(d.rel_tol),
            t_stability_tol: raw.t_stability_tol.unwrap_or(d.t_stability_tol),
            seed: raw.seed.unwrap_or(d.seed),
            budget: raw.budget.unwrap_or(d.budget),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fully explicit raw form; `resolve(cfg.to_raw())` gives back `cfg`.
    pub fn to_raw(&self) -> RawConfig {
        RawConfig {
            scenario: self.scenario.name().to_string(),
            i_list: Some(self.i_list.clone()),
            t_grid: Some(self.t_grid.clone()),
            nr: Some(self.nr),
            ns: Some(self.ns),
            gh_nr: Some(self.gh_nr),
            gh_ns: Some(self.gh_ns),
            dt: self.dt,
            f: Some(WarpSpecInput::Text(self.f)),
            family: Some(self.family),
            c1: Some(self.c1),
            c2: Some(self.c2),
            c3: Some(self.c3),
            box_size: Some(self.box_size),
            box_points: Some(self.box_points),
            lattice_points: Some(self.lattice_points),
            deltas: Some(self.deltas.clone()),
            rho_list: Some(self.rho_list.clone()),
            containment_times: Some(self.containment_times.clone()),
            rel_tol: Some(self.rel_tol),
            t_stability_tol: Some(self.t_stability_tol),
            seed: Some(self.seed),
            budget: Some(self.budget),
        }
    }

    /// Horizon of the flow: the last time in `t_grid`.
    pub fn horizon(&self) -> f64 {
        *self.t_grid.last().unwrap_or(&0.0)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |field: &str, msg: &str| Err(ConfigError::new(field, msg));
        if self.i_list.is_empty() {
            return err("i_list", "must be nonempty");
        }
        if self.i_list.contains(&0) || self.i_list.windows(2).any(|w| w[1] <= w[0]) {
            return err("i_list", "must be strictly ascending positive integers");
        }
        check_times("t_grid", &self.t_grid)?;
        if self.t_grid[0] != 0.0 {
            return err("t_grid", "must start at 0");
        }
        check_times("containment_times", &self.containment_times)?;
        if self.nr < 16 || self.ns < 8 {
            return err("nr", "need nr >= 16 and ns >= 8");
        }
        if self.gh_nr < 16 || self.gh_ns < 8 {
            return err("gh_nr", "need gh_nr >= 16 and gh_ns >= 8");
        }
        if !self.nr.is_multiple_of(self.gh_nr) {
            return err("gh_nr", "must divide nr");
        }
        if self.gh_nr * self.gh_ns > crate::metric::MAX_POINTS {
            return err("gh_ns", "gh_nr * gh_ns exceeds the dense-space cap");
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return err("dt", "must be positive");
            }
        }
        self.f.validate()?;
        for (field, v) in [
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("box_size", self.box_size),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return err(field, "must be positive");
            }
        }
        if self.box_points < 2 {
            return err("box_points", "must be at least 2");
        }
        if self.lattice_points < 2 || self.lattice_points.pow(2) * 13 > crate::metric::MAX_POINTS {
            return err("lattice_points", "must be between 2 and the dense-space cap");
        }
        if self.deltas.is_empty() || self.deltas.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return err("deltas", "must be nonempty and positive");
        }
        if self.rho_list.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return err("rho_list", "must be positive");
        }
        if !(self.rel_tol >= 0.0) || !(self.t_stability_tol > 0.0) {
            return err("rel_tol", "tolerances must be nonnegative");
        }
        if self.budget == 0 {
            return err("budget", "must be positive");
        }
        Ok(())
    }
}

fn check_times(field: &str, times: &[f64]) -> Result<(), ConfigError> {
    if times.is_empty() {
        return Err(ConfigError::new(field, "must be nonempty"));
    }
    if times.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ConfigError::new(field, "must be strictly ascending nonnegative times"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warp_spec_text() {
        assert_eq!("2+cos".parse::<WarpSpec>().unwrap(), WarpSpec::BUMPY);
        assert_eq!("2 + cos(r)".parse::<WarpSpec>().unwrap(), WarpSpec::BUMPY);
        let w: WarpSpec = "1.5+0.25cos3".parse().unwrap();
        assert_eq!((w.offset, w.amplitude, w.frequency), (1.5, 0.25, 3));
        assert_eq!(w.to_string().parse::<WarpSpec>().unwrap(), w);
        assert!("1".parse::<WarpSpec>().unwrap().is_constant());
        assert!("1+cos".parse::<WarpSpec>().is_err());
        assert!("banana".parse::<WarpSpec>().is_err());
    }

    #[test]
    fn defaults_and_validation() {
        let raw = RawConfig {
            scenario: "collapsing_torus".into(),
            ..Default::default()
        };
        let cfg = ScenarioConfig::resolve(raw.clone()).unwrap();
        assert_eq!(cfg.i_list, vec![1, 4, 16, 64]);
        assert_eq!(cfg.nr, 256);
        let e = ScenarioConfig::resolve(RawConfig {
            i_list: Some(vec![]),
            ..raw.clone()
        })
        .unwrap_err();
        assert_eq!(e.field, "i_list");
        let e = ScenarioConfig::resolve(RawConfig {
            scenario: "nope".into(),
            ..raw
        })
        .unwrap_err();
        assert_eq!(e.field, "scenario");
    }
}
