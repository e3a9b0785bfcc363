//! Least squares helpers backed by nalgebra's SVD.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;

use crate::error::{Error, Result};

/// Minimum-norm least squares solution of `x · β ≈ y`.
///
/// Singular values below `max(rows, cols) · ε · σ_max` are treated as zero,
/// which gives the pseudo-inverse solution for rank-deficient designs.
pub fn lstsq_min_norm(x: &Array2<f64>, y: &[f64]) -> Result<Vec<f64>> {
    let (n, p) = x.dim();
    if n != y.len() {
        return Err(Error::LengthMismatch(n, y.len()));
    }
    if n == 0 {
        return Err(Error::EmptyMatrix);
    }
    if p == 0 {
        return Ok(Vec::new());
    }
    let a = DMatrix::from_fn(n, p, |i, j| x[[i, j]]);
    let b = DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return Ok(vec![0.0; p]);
    }
    let eps = n.max(p) as f64 * f64::EPSILON * sigma_max;
    let beta = svd
        .solve(&b, eps)
        .map_err(|e| Error::InvalidConfig(format!("SVD solve failed: {e}")))?;
    Ok(beta.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn exact_system() {
        let x = array![[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]];
        let y = [1.0, 4.0, 3.0];
        let b = lstsq_min_norm(&x, &y).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-12 && (b[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_columns_split_evenly() {
        let x = array![[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        let y = [2.0, 4.0, 6.0];
        let b = lstsq_min_norm(&x, &y).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-10 && (b[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_matrix() {
        let x = Array2::zeros((3, 2));
        assert_eq!(lstsq_min_norm(&x, &[1.0, 2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }
}
