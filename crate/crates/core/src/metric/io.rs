//! Distance-matrix text format.
//!
//! ```text
//! n <count> basepoint <index>
//! <n floats>
//! ...
//! ```
//!
//! Values are written with 17 significant digits, which round-trips every
//! finite `f64` exactly.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{FiniteMetricSpace, MetricError, Result};

pub fn write_matrix<W: Write>(space: &FiniteMetricSpace, mut out: W) -> Result<()> {
    let io = |e: std::io::Error| MetricError::Io(e.to_string());
    writeln!(out, "n {} basepoint {}", space.len(), space.basepoint()).map_err(io)?;
    for i in 0..space.len() {
        let line: Vec<String> = space.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", line.join(" ")).map_err(io)?;
    }
    Ok(())
}

pub fn read_matrix<R: Read>(input: R) -> Result<FiniteMetricSpace> {
    let mut lines = BufReader::new(input).lines();
    let header = lines
        .next()
        .ok_or_else(|| MetricError::Parse("missing header".into()))?
        .map_err(|e| MetricError::Io(e.to_string()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let (n, base) = match parts.as_slice() {
        ["n", n, "basepoint", b] => (
            n.parse::<usize>()
                .map_err(|e| MetricError::Parse(format!("point count: {e}")))?,
            b.parse::<usize>()
                .map_err(|e| MetricError::Parse(format!("basepoint: {e}")))?,
        ),
        _ => {
            return Err(MetricError::Parse(format!(
                "header must read `n <count> basepoint <index>`, got `{header}`"
            )))
        }
    };
    let mut rows = Vec::with_capacity(n);
    for line in lines {
        let line = line.map_err(|e| MetricError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| MetricError::Parse(format!("`{t}`: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != n {
            return Err(MetricError::Parse(format!(
                "row {} has {} entries, expected {n}",
                rows.len(),
                row.len()
            )));
        }
        rows.push(row);
    }
    if rows.len() != n {
        return Err(MetricError::Parse(format!("expected {n} rows, found {}", rows.len())));
    }
    FiniteMetricSpace::new(rows, base, 0.0)
}

pub fn write_matrix_file(space: &FiniteMetricSpace, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| MetricError::Io(e.to_string()))?;
    write_matrix(space, std::io::BufWriter::new(file))
}

pub fn read_matrix_file(path: impl AsRef<Path>) -> Result<FiniteMetricSpace> {
    let file = fs::File::open(path).map_err(|e| MetricError::Io(e.to_string()))?;
    read_matrix(file)
}
