//! JSON generator files: vertex-map arrays with domain radii and tolerances.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CoverChart, LocalIsometry, Pseudogroup, PseudogroupError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub name: String,
    /// `map[v]` is the image of vertex `v`, or `null` outside the domain.
    pub map: Vec<Option<usize>>,
    pub radius: f64,
    pub tolerance: f64,
    #[serde(default)]
    pub continuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PseudogroupSpec {
    pub generators: Vec<GeneratorSpec>,
}

impl PseudogroupSpec {
    pub fn from_group(group: &Pseudogroup) -> Self {
        Self {
            generators: group
                .generators
                .iter()
                .map(|g| GeneratorSpec {
                    name: g.name.clone(),
                    map: g.map().to_vec(),
                    radius: g.radius,
                    tolerance: g.tolerance,
                    continuous: g.continuous,
                })
                .collect(),
        }
    }

    /// Validate every generator against `chart`.
    pub fn build(&self, chart: &CoverChart) -> Result<Pseudogroup> {
        let generators = self
            .generators
            .iter()
            .map(|g| {
                LocalIsometry::new(chart, g.name.clone(), g.map.clone(), g.radius, g.tolerance)
                    .map(|l| l.with_continuous(g.continuous))
            })
            .collect::<Result<_>>()?;
        Ok(Pseudogroup::new(generators))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| PseudogroupError::Spec(e.to_string()))
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| PseudogroupError::Spec(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| PseudogroupError::Spec(format!("{}: {e}", path.display())))
    }
}
