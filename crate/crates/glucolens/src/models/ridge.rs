//! Ridge regression solved in closed form on centered data.

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Linear model with L2-shrunk weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub alpha: f64,
}

/// Solve a symmetric positive (semi-)definite system by Gaussian
/// elimination with partial pivoting; `SingularSystem` when a pivot
/// vanishes relative to the matrix scale.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, ModelError> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter().map(|v| v.abs()))
        .fold(0.0f64, f64::max)
        .max(1e-300);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        if a[pivot_row][col].abs() < 1e-12 * scale {
            return Err(ModelError::SingularSystem);
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut sum = b[col];
        for k in (col + 1)..n {
            sum -= a[col][k] * x[k];
        }
        x[col] = sum / a[col][col];
    }
    Ok(x)
}

impl RidgeModel {
    /// Fit by solving `(XᵀX + alpha·I)w = Xᵀy` on centered columns; the
    /// intercept absorbs the means so it is never penalized.
    pub fn fit(x: &[Vec<f64>], y: &[f64], alpha: f64) -> Result<Self, ModelError> {
        if x.is_empty() || y.is_empty() {
            return Err(ModelError::EmptyData);
        }
        if x.len() != y.len() {
            return Err(ModelError::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        if alpha < 0.0 || !alpha.is_finite() {
            return Err(ModelError::InvalidHyper {
                detail: format!("alpha {alpha} must be finite and >= 0"),
            });
        }
        let n = x.len();
        let p = x[0].len();
        if x.iter().any(|row| row.len() != p) {
            return Err(ModelError::DimensionMismatch {
                expected: p,
                found: x.iter().map(Vec::len).find(|&l| l != p).unwrap_or(p),
            });
        }

        let mut x_mean = vec![0.0; p];
        for row in x {
            for (m, v) in x_mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut x_mean {
            *m /= n as f64;
        }
        let y_mean = y.iter().sum::<f64>() / n as f64;

        // Gram matrix of the centered design plus the ridge diagonal.
        let mut gram = vec![vec![0.0; p]; p];
        let mut xty = vec![0.0; p];
        for (row, &yi) in x.iter().zip(y) {
            let centered: Vec<f64> = row.iter().zip(&x_mean).map(|(v, m)| v - m).collect();
            let yc = yi - y_mean;
            for i in 0..p {
                xty[i] += centered[i] * yc;
                for j in i..p {
                    gram[i][j] += centered[i] * centered[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                gram[i][j] = gram[j][i];
            }
            gram[i][i] += alpha;
        }

        let weights = solve(gram, xty)?;
        let intercept = y_mean
            - weights
                .iter()
                .zip(&x_mean)
                .map(|(w, m)| w * m)
                .sum::<f64>();
        Ok(Self {
            weights,
            intercept,
            alpha,
        })
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64, ModelError> {
        if row.len() != self.weights.len() {
            return Err(ModelError::DimensionMismatch {
                expected: self.weights.len(),
                found: row.len(),
            });
        }
        Ok(self.intercept
            + self
                .weights
                .iter()
                .zip(row)
                .map(|(w, v)| w * v)
                .sum::<f64>())
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
        x.iter().map(|row| self.predict_row(row)).collect()
    }
}
