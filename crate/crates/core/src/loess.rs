//! Local polynomial regression with tricube neighborhood weights.
//!
//! The neighborhood of an evaluation point is the `span` nearest abscissae
//! (a contiguous window of the sorted input; on equal distance the earlier
//! index is kept). The bandwidth is the distance to the farthest point in
//! the window. When `span` exceeds the number of points the bandwidth grows
//! by `(span - n) / 2` average spacings, as in the original STL smoother.

use crate::error::{Error, Result};

/// Smooth `y` at every abscissa.
pub fn loess_smooth(
    x: &[f64],
    y: &[f64],
    span: usize,
    degree: usize,
    weights: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let smoother = Loess::new(x, y, span, degree, weights)?;
    x.iter().map(|&x0| smoother.fit_at(x0)).collect()
}

/// A validated loess problem that can be evaluated at arbitrary points,
/// including outside the data range.
#[derive(Debug, Clone, Copy)]
pub struct Loess<'a> {
    x: &'a [f64],
    y: &'a [f64],
    weights: Option<&'a [f64]>,
    span: usize,
    degree: usize,
}

impl<'a> Loess<'a> {
    pub fn new(
        x: &'a [f64],
        y: &'a [f64],
        span: usize,
        degree: usize,
        weights: Option<&'a [f64]>,
    ) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch(x.len(), y.len()));
        }
        if let Some(w) = weights {
            if w.len() != x.len() {
                return Err(Error::LengthMismatch(x.len(), w.len()));
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidSpan("robustness weights must be finite and >= 0".into()));
            }
        }
        if !(1..=2).contains(&degree) {
            return Err(Error::InvalidSpan(format!("degree {degree} not in {{1, 2}}")));
        }
        if span < degree + 1 {
            return Err(Error::InvalidSpan(format!(
                "span {span} must contain at least {} points for degree {degree}",
                degree + 1
            )));
        }
        if x.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpan("abscissae must be finite and strictly increasing".into()));
        }
        Ok(Loess {
            x,
            y,
            weights,
            span,
            degree,
        })
    }

    pub fn fit_at(&self, x0: f64) -> Result<f64> {
        let (x, n) = (self.x, self.x.len());
        let q = self.span.min(n);
        let mut left = 0;
        while left + q < n && x0 - x[left] > x[left + q] - x0 {
            left += 1;
        }
        let right = left + q;
        let mut h = (x0 - x[left]).max(x[right - 1] - x0);
        if self.span > n {
            let spacing = if n > 1 { (x[n - 1] - x[0]) / (n - 1) as f64 } else { 1.0 };
            h += (self.span - n) as f64 / 2.0 * spacing;
        }

        let mut w = Vec::with_capacity(q);
        for j in left..right {
            let d = (x[j] - x0).abs();
            let base = if h > 0.0 {
                tricube(d / h)
            } else if d == 0.0 {
                1.0
            } else {
                0.0
            };
            let rw = self.weights.map_or(1.0, |r| r[j]);
            w.push(base * rw);
        }
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegenerateFit(x0));
        }
        let xs = &x[left..right];
        let ys = &self.y[left..right];
        let range = x[n - 1] - x[0];

        if self.degree == 2 {
            if let Some(v) = local_quadratic(xs, ys, &w, x0, h.max(f64::MIN_POSITIVE)) {
                return Ok(v);
            }
        }
        Ok(local_linear(xs, ys, &w, total, x0, range))
    }
}

pub fn tricube(u: f64) -> f64 {
    let u = u.abs();
    if u >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u * u;
        t * t * t
    }
}

/// Weighted linear fit; falls back to the weighted mean when the weighted
/// spread of the abscissae is negligible.
fn local_linear(xs: &[f64], ys: &[f64], w: &[f64], total: f64, x0: f64, range: f64) -> f64 {
    let xbar: f64 = xs.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / total;
    let ybar: f64 = ys.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / total;
    let sxx: f64 = xs.iter().zip(w).map(|(x, w)| w * (x - xbar).powi(2)).sum::<f64>() / total;
    if sxx.sqrt() > 1e-3 * range {
        let sxy: f64 = xs
            .iter()
            .zip(ys)
            .zip(w)
            .map(|((x, y), w)| w * (x - xbar) * (y - ybar))
            .sum::<f64>()
            / total;
        ybar + sxy / sxx * (x0 - xbar)
    } else {
        ybar
    }
}

/// Weighted quadratic fit in scaled local coordinates; `None` if singular.
fn local_quadratic(xs: &[f64], ys: &[f64], w: &[f64], x0: f64, h: f64) -> Option<f64> {
    let mut a = [[0.0f64; 4]; 3];
    for ((&x, &y), &wi) in xs.iter().zip(ys).zip(w) {
        let u = (x - x0) / h;
        let basis = [1.0, u, u * u];
        for r in 0..3 {
            for c in 0..3 {
                a[r][c] += wi * basis[r] * basis[c];
            }
            a[r][3] += wi * basis[r] * y;
        }
    }
    let scale = a[0][0];
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-10 * scale {
            return None;
        }
        a.swap(col, pivot);
        for r in 0..3 {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..4 {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Some(a[0][3] / a[0][0])
}
