//! Ordinary least squares with intercept.

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::linalg::lstsq_min_norm;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearRegression {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LinearRegression {
    /// Columns and target are centred, the slope vector is the minimum-norm
    /// least squares solution, and the intercept restores the means. A
    /// constant column therefore gets coefficient 0.
    pub fn fit(x: &Array2<f64>, y: &[f64]) -> Result<Self> {
        let n = x.nrows();
        if n == 0 || y.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        if n != y.len() {
            return Err(Error::LengthMismatch(n, y.len()));
        }
        let x_mean = x.mean_axis(Axis(0)).expect("non-empty");
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let xc = x - &x_mean;
        let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
        let coefficients = lstsq_min_norm(&xc, &yc)?;
        let intercept = y_mean - coefficients.iter().zip(x_mean.iter()).map(|(b, m)| b * m).sum::<f64>();
        Ok(LinearRegression {
            intercept,
            coefficients,
        })
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }
}
