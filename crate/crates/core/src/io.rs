//! Interchange formats: JSON schemas for states, measurements, and counts,
//! plus the small CSV dialect used for curve data.
//!
//! Every schema is a plain serde struct with a fixed field order, and floats
//! are rendered by the standard shortest-round-trip formatter, so identical
//! inputs always serialize to identical bytes. Conversions into the typed
//! domain objects validate what serde cannot: basis ordering, matrix shape,
//! and physicality.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use num_complex::Complex64;

use crate::counts::CountRecord;
use crate::fitstats::DataPoint;
use crate::qstate::{ComplexMatrix, DensityMatrix, StateError};
use crate::tomo::{MeasurementSet, ProbabilityRecord, TomoError};

/// Row/column labels for the two supported dimensions, in index order.
const PAIR_BASIS_LABELS: [&str; 4] = ["HH", "HV", "VH", "VV"];
const QUBIT_BASIS_LABELS: [&str; 2] = ["H", "V"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    BadShape(String),
    #[error("csv line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Tomo(#[from] TomoError),
}

/// A density matrix as real and imaginary grids with an explicit basis, so
/// files are self-describing and index conventions cannot silently drift.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityMatrixJson {
    pub basis: Vec<String>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl DensityMatrixJson {
    pub fn from_state(rho: &DensityMatrix) -> Self {
        let n = rho.dim();
        let labels: &[&str] = if n == 2 {
            &QUBIT_BASIS_LABELS
        } else {
            &PAIR_BASIS_LABELS
        };
        let m = rho.matrix();
        DensityMatrixJson {
            basis: labels.iter().map(|s| s.to_string()).collect(),
            re: (0..n)
                .map(|r| (0..n).map(|c| m.get(r, c).re).collect())
                .collect(),
            im: (0..n)
                .map(|r| (0..n).map(|c| m.get(r, c).im).collect())
                .collect(),
        }
    }

    pub fn to_state(&self) -> Result<DensityMatrix, IoError> {
        let n = self.basis.len();
        let expected: &[&str] = match n {
            2 => &QUBIT_BASIS_LABELS,
            4 => &PAIR_BASIS_LABELS,
            other => {
                return Err(IoError::BadShape(format!(
                    "basis has {other} labels; expected 2 or 4"
                )))
            }
        };
        if self.basis != expected {
            return Err(IoError::BadShape(format!(
                "basis {:?} must be exactly {:?}",
                self.basis, expected
            )));
        }
        for (name, grid) in [("re", &self.re), ("im", &self.im)] {
            if grid.len() != n || grid.iter().any(|row| row.len() != n) {
                return Err(IoError::BadShape(format!(
                    "{name} grid must be {n} x {n}"
                )));
            }
        }
        let mut m = ComplexMatrix::zeros(n);
        for r in 0..n {
            for c in 0..n {
                m.set(r, c, Complex64::new(self.re[r][c], self.im[r][c]));
            }
        }
        Ok(DensityMatrix::new(m)?)
    }
}

/// A set of probability records, the reconstruction input format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasurementSetJson {
    pub measurements: Vec<ProbabilityRecord>,
}

impl MeasurementSetJson {
    pub fn from_set(ms: &MeasurementSet) -> Self {
        MeasurementSetJson {
            measurements: ms.records().to_vec(),
        }
    }

    pub fn to_set(&self) -> Result<MeasurementSet, IoError> {
        Ok(MeasurementSet::new(self.measurements.clone())?)
    }
}

/// Raw histogram counts, the output of an acquisition or the synthesizer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountsJson {
    pub records: Vec<CountRecord>,
}

pub fn parse_density_matrix(text: &str) -> Result<DensityMatrix, IoError> {
    serde_json::from_str::<DensityMatrixJson>(text)?.to_state()
}

pub fn parse_measurements(text: &str) -> Result<MeasurementSet, IoError> {
    serde_json::from_str::<MeasurementSetJson>(text)?.to_set()
}

pub fn parse_counts(text: &str) -> Result<Vec<CountRecord>, IoError> {
    Ok(serde_json::from_str::<CountsJson>(text)?.records)
}

/// Reads `theta_rad,y,sigma` CSV: a mandatory header line followed by one point per
/// line. Blank lines are ignored.
pub fn read_points_csv(text: &str) -> Result<Vec<DataPoint>, IoError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(IoError::Csv {
        line: 1,
        reason: "empty input".into(),
    })?;
    let normalized: Vec<String> = header
        .split(',')
        .map(|h| h.trim().to_ascii_lowercase())
        .collect();
    if normalized != ["theta_rad", "y", "sigma"] {
        return Err(IoError::Csv {
            line: 1,
            reason: format!("header must be theta_rad,y,sigma; got {header:?}"),
        });
    }
    let mut points = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(IoError::Csv {
                line: i + 1,
                reason: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let mut parsed = [0.0; 3];
        for (slot, field) in parsed.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|_| IoError::Csv {
                line: i + 1,
                reason: format!("cannot parse {field:?} as a number"),
            })?;
        }
        points.push(DataPoint {
            x: parsed[0],
            y: parsed[1],
            sigma: parsed[2],
        });
    }
    Ok(points)
}

/// Renders two-column CSV with the given header names.
pub fn write_xy_csv(headers: [&str; 2], rows: &[(f64, f64)]) -> String {
    let mut out = format!("{},{}\n", headers[0], headers[1]);
    for (x, y) in rows {
        out.push_str(&format!("{x},{y}\n"));
    }
    out
}
