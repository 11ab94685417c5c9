//! Column standardization with optional ln(1+x) long-tail transform.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::Tensor;

use super::DomainError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnStat {
    pub name: String,
    pub is_log: bool,
    pub mean: f64,
    pub sd: f64,
}

/// Per-column transform parameters; applying them to new data reproduces the
/// fitted standardization exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnStats {
    pub columns: Vec<ColumnStat>,
}

impl ColumnStats {
    /// Applies the stored transform: ln(1+x) on log columns, then z-scoring.
    pub fn apply(&self, matrix: &Tensor) -> Result<Tensor, DomainError> {
        self.check_width(matrix)?;
        let cols = self.columns.len();
        let mut out = matrix.clone();
        for row in 0..matrix.shape()[0] {
            for (c, stat) in self.columns.iter().enumerate() {
                let raw = matrix.at2(row, c);
                if !raw.is_finite() {
                    return Err(DomainError::NonFinite { column: c, row });
                }
                let v = if stat.is_log {
                    if raw < 0.0 {
                        return Err(DomainError::NegativeInLogColumn { column: c, value: raw });
                    }
                    raw.ln_1p()
                } else {
                    raw
                };
                out.data_mut()[row * cols + c] = (v - stat.mean) / stat.sd;
            }
        }
        Ok(out)
    }

    /// Inverts `apply`.
    pub fn invert(&self, matrix: &Tensor) -> Result<Tensor, DomainError> {
        self.check_width(matrix)?;
        let cols = self.columns.len();
        let mut out = matrix.clone();
        for row in 0..matrix.shape()[0] {
            for (c, stat) in self.columns.iter().enumerate() {
                let z = matrix.at2(row, c);
                let v = z * stat.sd + stat.mean;
                out.data_mut()[row * cols + c] = if stat.is_log { v.exp_m1() } else { v };
            }
        }
        Ok(out)
    }

    fn check_width(&self, matrix: &Tensor) -> Result<(), DomainError> {
        if matrix.rank() != 2 || matrix.shape()[1] != self.columns.len() {
            return Err(DomainError::Invalid {
                what: "matrix",
                detail: format!(
                    "expected {} columns, got shape {:?}",
                    self.columns.len(),
                    matrix.shape()
                ),
            });
        }
        Ok(())
    }
}

/// Centers and scales every column to unit variance, applying ln(1+x) first
/// to the listed long-tail columns. Constant columns keep sd = 1.
pub fn standardize_features(
    matrix: &Tensor,
    names: &[String],
    long_tail_columns: &[usize],
) -> Result<(Tensor, ColumnStats), DomainError> {
    if matrix.rank() != 2 {
        return Err(DomainError::Invalid {
            what: "matrix",
            detail: format!("expected 2-D, got shape {:?}", matrix.shape()),
        });
    }
    let (rows, cols) = (matrix.shape()[0], matrix.shape()[1]);
    if names.len() != cols {
        return Err(DomainError::Invalid {
            what: "column names",
            detail: format!("{} names for {} columns", names.len(), cols),
        });
    }
    let log_set: HashSet<usize> = long_tail_columns.iter().copied().collect();

    let mut stats = Vec::with_capacity(cols);
    for c in 0..cols {
        let is_log = log_set.contains(&c);
        let mut vals = Vec::with_capacity(rows);
        for row in 0..rows {
            let raw = matrix.at2(row, c);
            if !raw.is_finite() {
                return Err(DomainError::NonFinite { column: c, row });
            }
            if is_log && raw < 0.0 {
                return Err(DomainError::NegativeInLogColumn { column: c, value: raw });
            }
            vals.push(if is_log { raw.ln_1p() } else { raw });
        }
        let mean = vals.iter().sum::<f64>() / rows as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / rows as f64;
        let sd = if var.sqrt() < 1e-12 { 1.0 } else { var.sqrt() };
        stats.push(ColumnStat {
            name: names[c].clone(),
            is_log,
            mean,
            sd,
        });
    }
    let stats = ColumnStats { columns: stats };
    let standardized = stats.apply(matrix)?;
    Ok((standardized, stats))
}
