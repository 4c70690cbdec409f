use thiserror::Error;

use super::types::FitnessMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitnessError {
    #[error("non-finite raw fitness at [{robot}][{task}]")]
    NonFiniteInput { robot: usize, task: usize },
    #[error("ragged fitness matrix: row {row} has {found} entries, expected {expected}")]
    Ragged { row: usize, expected: usize, found: usize },
}

/// Value given to every robot when a task's raw scores are all equal.
pub const DEGENERATE_FITNESS: f64 = 0.5;

/// Min-max normalizes each task column across robots into `[0, 1]`.
///
/// A column whose entries are all equal carries no preference and maps to
/// [`DEGENERATE_FITNESS`].
pub fn normalize_fitness(raw: &[Vec<f64>]) -> Result<FitnessMatrix, FitnessError> {
    let m = raw.first().map_or(0, Vec::len);
    for (i, row) in raw.iter().enumerate() {
        if row.len() != m {
            return Err(FitnessError::Ragged { row: i, expected: m, found: row.len() });
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(FitnessError::NonFiniteInput { robot: i, task: j });
        }
    }
    let mut out = vec![vec![0.0; m]; raw.len()];
    for j in 0..m {
        let (lo, hi) = raw
            .iter()
            .map(|row| row[j])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let span = hi - lo;
        for (i, row) in raw.iter().enumerate() {
            out[i][j] = if span > 0.0 {
                ((row[j] - lo) / span).clamp(0.0, 1.0)
            } else {
                DEGENERATE_FITNESS
            };
        }
    }
    Ok(FitnessMatrix::from_rows(out))
}
