//! Power-system case ingestion, susceptance-based Laplacian construction,
//! and the periodic phase-error metric.
//!
//! Case files use the MATPOWER text format: a `mpc.bus = [...]` table (one
//! row per bus) and a `mpc.branch = [...]` table with columns
//! `fbus tbus r x b rateA rateB rateC ratio angle status ...`. Branch
//! resistance/reactance is converted to admittance
//! `g = r / (r² + x²)`, `b = -x / (r² + x²)`; parallel branches aggregate by
//! admittance addition. Transformer tap ratios and shunt elements are
//! ignored, and bus voltage magnitudes are treated as 1.0 per-unit by the
//! measurement model.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measurement::AcPowerFlowModel;
use crate::spectral::SpectralBasis;

/// One aggregated transmission line between two buses (0-based indices).
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// Line conductance, per-unit siemens.
    pub conductance: f64,
    /// Signed line susceptance, per-unit siemens; inductive lines are
    /// negative under this convention.
    pub susceptance: f64,
}

/// Parsed power network.
#[derive(Debug, Clone)]
pub struct PowerCase {
    n_buses: usize,
    lines: Vec<Line>,
    voltage_magnitudes: Vec<f64>,
    conductance: DMatrix<f64>,
    susceptance: DMatrix<f64>,
}

impl PowerCase {
    pub fn n_buses(&self) -> usize {
        self.n_buses
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    /// Per-unit voltage magnitudes from the bus table. The measurement model
    /// fixes them to 1.0; they are kept for inspection only.
    pub fn voltage_magnitudes(&self) -> &[f64] {
        &self.voltage_magnitudes
    }

    /// Symmetric bus conductance matrix (zero diagonal).
    pub fn conductance(&self) -> &DMatrix<f64> {
        &self.conductance
    }

    /// Symmetric signed bus susceptance matrix (zero diagonal).
    pub fn susceptance(&self) -> &DMatrix<f64> {
        &self.susceptance
    }

    /// Loads a MATPOWER-format case file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses MATPOWER-format case text.
    pub fn parse(text: &str) -> Result<Self> {
        let bus_rows = extract_table(text, "mpc.bus")?;
        let branch_rows = extract_table(text, "mpc.branch")?;
        if bus_rows.is_empty() {
            return Err(Error::ParseError { line: 0, message: "empty bus table".into() });
        }
        let n = bus_rows.len();
        let mut index_of = std::collections::HashMap::new();
        let mut voltage_magnitudes = Vec::with_capacity(n);
        for (row, (line_no, fields)) in bus_rows.iter().enumerate() {
            if fields.is_empty() {
                return Err(Error::ParseError { line: *line_no, message: "empty bus row".into() });
            }
            let id = fields[0] as i64;
            if index_of.insert(id, row).is_some() {
                return Err(Error::ParseError {
                    line: *line_no,
                    message: format!("duplicate bus id {id}"),
                });
            }
            voltage_magnitudes.push(fields.get(7).copied().unwrap_or(1.0));
        }

        let mut conductance = DMatrix::zeros(n, n);
        let mut susceptance = DMatrix::zeros(n, n);
        for (line_no, fields) in &branch_rows {
            if fields.len() < 4 {
                return Err(Error::ParseError {
                    line: *line_no,
                    message: "branch row needs at least fbus, tbus, r, x".into(),
                });
            }
            // Column 11 is the branch status flag when present.
            if fields.len() >= 11 && fields[10] == 0.0 {
                continue;
            }
            let f = *index_of.get(&(fields[0] as i64)).ok_or(Error::ParseError {
                line: *line_no,
                message: format!("unknown from-bus {}", fields[0]),
            })?;
            let t = *index_of.get(&(fields[1] as i64)).ok_or(Error::ParseError {
                line: *line_no,
                message: format!("unknown to-bus {}", fields[1]),
            })?;
            if f == t {
                return Err(Error::ParseError {
                    line: *line_no,
                    message: "branch endpoints must be distinct".into(),
                });
            }
            let r = fields[2];
            let x = fields[3];
            let denom = r * r + x * x;
            if denom == 0.0 {
                return Err(Error::ParseError {
                    line: *line_no,
                    message: "branch with zero impedance".into(),
                });
            }
            let g = r / denom;
            let b = -x / denom;
            conductance[(f, t)] += g;
            conductance[(t, f)] += g;
            susceptance[(f, t)] += b;
            susceptance[(t, f)] += b;
        }

        let mut lines = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if conductance[(i, j)] != 0.0 || susceptance[(i, j)] != 0.0 {
                    lines.push(Line {
                        from: i,
                        to: j,
                        conductance: conductance[(i, j)],
                        susceptance: susceptance[(i, j)],
                    });
                }
            }
        }

        let case = Self { n_buses: n, lines, voltage_magnitudes, conductance, susceptance };
        if !case.is_connected() {
            return Err(Error::DisconnectedNetwork);
        }
        Ok(case)
    }

    fn is_connected(&self) -> bool {
        let n = self.n_buses;
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for (v, visited) in seen.iter_mut().enumerate() {
                if !*visited
                    && (self.susceptance[(u, v)] != 0.0 || self.conductance[(u, v)] != 0.0)
                {
                    *visited = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }

    /// Bundled 118-bus transmission test network.
    pub fn bundled_118() -> Self {
        Self::parse(include_str!("../data/case118.m")).expect("bundled 118-bus case is valid")
    }

    /// Bundled 57-bus transmission test network.
    pub fn bundled_57() -> Self {
        Self::parse(include_str!("../data/case57.m")).expect("bundled 57-bus case is valid")
    }

    /// Documented 3-bus toy case used in tests and examples.
    pub fn bundled_toy3() -> Self {
        Self::parse(include_str!("../data/case3.m")).expect("bundled 3-bus case is valid")
    }

    /// Laplacian built from line susceptances: the graph Laplacian whose
    /// edge weights are the negated signed susceptances (positive for
    /// inductive lines). Fails with `InvalidSusceptanceSign` if the result
    /// is not positive semidefinite, which indicates case data with the
    /// opposite sign convention.
    pub fn susceptance_laplacian(&self) -> Result<DMatrix<f64>> {
        let weights = -self.susceptance.clone();
        let lap = crate::graph::build_laplacian(&weights);
        let eigen = lap
            .clone()
            .try_symmetric_eigen(1e-13, 10_000)
            .ok_or(Error::DecompositionFailure)?;
        let max = eigen.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        let min = eigen.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
        if min < -1e-8 * max.abs().max(1.0) {
            return Err(Error::InvalidSusceptanceSign { min_eigenvalue: min });
        }
        Ok(lap)
    }

    /// Spectral basis of the susceptance Laplacian.
    pub fn spectral_basis(&self) -> Result<SpectralBasis> {
        SpectralBasis::new(&self.susceptance_laplacian()?)
    }

    /// Active-power measurement model over this network.
    pub fn ac_model(&self, basis: Arc<SpectralBasis>) -> AcPowerFlowModel {
        AcPowerFlowModel::new(self.conductance.clone(), self.susceptance.clone(), basis)
    }
}

/// Extracts the numeric rows of `name = [ ... ];` from MATPOWER text.
fn extract_table(text: &str, name: &str) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rows = Vec::new();
    let mut inside = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('%').next().unwrap_or("").trim();
        if !inside {
            if let Some(rest) = line.strip_prefix(name) {
                let rest = rest.trim_start();
                if rest.starts_with('=') {
                    inside = true;
                }
            }
            continue;
        }
        if line.starts_with("];") || line == "]" {
            return Ok(rows);
        }
        let cleaned = line.trim_end_matches(';').trim();
        if cleaned.is_empty() {
            continue;
        }
        let fields: Vec<f64> = cleaned
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| Error::ParseError {
                    line: line_no,
                    message: format!("bad numeric field '{tok}'"),
                })
            })
            .collect::<Result<_>>()?;
        rows.push((line_no, fields));
    }
    if inside {
        return Err(Error::ParseError {
            line: 0,
            message: format!("unterminated {name} table"),
        });
    }
    Err(Error::ParseError { line: 0, message: format!("missing {name} table") })
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(e: f64) -> f64 {
    let wrapped = e - (2.0 * PI) * ((e + PI) / (2.0 * PI)).floor();
    // Guard the boundary: floating error can land exactly on π.
    if wrapped >= PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

/// Normalized squared periodic error of a phase estimate, in rad²:
/// `(1/N) Σ_n wrap(truth_n - estimate_n)²`. Bounded by π² per trial.
pub fn nmspe(truth: &DVector<f64>, estimate: &DVector<f64>) -> f64 {
    assert_eq!(truth.len(), estimate.len(), "phase vectors must have equal length");
    let n = truth.len();
    let mut acc = 0.0;
    for i in 0..n {
        let e = wrap_angle(truth[i] - estimate[i]);
        acc += e * e;
    }
    acc / n as f64
}

/// Smoothness level for which phases stay inside `(-π, π)` with probability
/// at least `1 - p_exceed`, using a Gaussian tail bound with a union over
/// buses on the phase variances `β Σ_{j≥2} V_ij² / λ_j`.
pub fn calibrate_beta(basis: &SpectralBasis, p_exceed: f64) -> Result<f64> {
    if !(0.0 < p_exceed && p_exceed < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "exceedance probability must be in (0, 1), got {p_exceed}"
        )));
    }
    let n = basis.n();
    let mut max_scale: f64 = 0.0;
    for i in 0..n {
        let mut s = 0.0;
        for j in 1..n {
            let vij = basis.eigenvectors()[(i, j)];
            s += vij * vij / basis.eigenvalues()[j];
        }
        max_scale = max_scale.max(s);
    }
    let normal = Normal::standard();
    let z = normal.inverse_cdf(1.0 - p_exceed / (2.0 * n as f64));
    Ok(PI * PI / (z * z * max_scale))
}
