//! Independent reference implementations used by the integration tests.
//!
//! Everything here is written from the textbook definitions with plain loops
//! and dense Gaussian elimination, sharing no code with the library.

#![allow(dead_code)]

use eventcast_core::panel::{PanelDataset, YearMonth};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Solve `a · x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Ordinary least squares with intercept via the normal equations
/// `(ZᵀZ) β = Zᵀy`, `Z = [1 | X]`. Returns (intercept, coefficients).
pub fn ols_normal_equations(x: &[Vec<f64>], y: &[f64]) -> (f64, Vec<f64>) {
    let p = x[0].len() + 1;
    let mut ztz = vec![vec![0.0; p]; p];
    let mut zty = vec![0.0; p];
    for (row, &yi) in x.iter().zip(y) {
        let z: Vec<f64> = std::iter::once(1.0).chain(row.iter().copied()).collect();
        for i in 0..p {
            zty[i] += z[i] * yi;
            for j in 0..p {
                ztz[i][j] += z[i] * z[j];
            }
        }
    }
    let beta = gauss_solve(ztz, zty).expect("full-rank design");
    (beta[0], beta[1..].to_vec())
}

pub fn to_array(rows: &[Vec<f64>]) -> Array2<f64> {
    let p = rows.first().map_or(0, |r| r.len());
    Array2::from_shape_fn((rows.len(), p), |(i, j)| rows[i][j])
}

pub fn tricube(u: f64) -> f64 {
    let u = u.abs();
    if u >= 1.0 {
        0.0
    } else {
        (1.0 - u * u * u).powi(3)
    }
}

/// Degree-1 loess with every point in the neighbourhood: at each x0 the
/// bandwidth is the distance to the farthest point, the local weights are
/// tricube × robustness, and the 2×2 weighted normal equations are solved.
pub fn full_span_loess(x: &[f64], y: &[f64], robustness: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&x0| {
            let h = x.iter().map(|xi| (xi - x0).abs()).fold(0.0, f64::max);
            let w: Vec<f64> = x
                .iter()
                .zip(robustness)
                .map(|(xi, r)| tricube((xi - x0) / h) * r)
                .collect();
            let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..x.len() {
                s0 += w[i];
                s1 += w[i] * x[i];
                s2 += w[i] * x[i] * x[i];
                t0 += w[i] * y[i];
                t1 += w[i] * x[i] * y[i];
            }
            let c = gauss_solve(vec![vec![s0, s1], vec![s1, s2]], vec![t0, t1]).unwrap();
            c[0] + c[1] * x0
        })
        .collect()
}

fn sse(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m) * (x - m)).sum()
}

/// Best first split by exhaustive search: every feature, every midpoint
/// between consecutive distinct values. Returns (feature, threshold, gain);
/// the earliest candidate wins among gains within `1e-9` relative.
pub fn brute_force_split(x: &[Vec<f64>], y: &[f64], min_leaf: usize) -> Option<(usize, f64, f64)> {
    let total = sse(y);
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x[0].len() {
        let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let thr = (w[0] + w[1]) / 2.0;
            let (left, right): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| x[i][f] <= thr);
            if left.len() < min_leaf || right.len() < min_leaf {
                continue;
            }
            let yl: Vec<f64> = left.iter().map(|&i| y[i]).collect();
            let yr: Vec<f64> = right.iter().map(|&i| y[i]).collect();
            let gain = total - sse(&yl) - sse(&yr);
            if best.is_none_or(|b| gain > b.2 * (1.0 + 1e-9) + 1e-12) {
                best = Some((f, thr, gain));
            }
        }
    }
    best.filter(|b| b.2 > 1e-12 * total.max(1e-300))
}

/// Second-best gain among every candidate split of a different
/// (feature, threshold), used to detect near-ties.
pub fn split_gains(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let total = sse(y);
    let mut gains = Vec::new();
    for f in 0..x[0].len() {
        let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let thr = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<f64>, Vec<f64>) = (0..y.len()).map(|i| (x[i][f] <= thr, y[i])).fold(
                (Vec::new(), Vec::new()),
                |(mut l, mut r), (left, v)| {
                    if left {
                        l.push(v)
                    } else {
                        r.push(v)
                    }
                    (l, r)
                },
            );
            gains.push(total - sse(&l) - sse(&r));
        }
    }
    gains.sort_by(|a, b| b.total_cmp(a));
    gains
}

/// Bisquare robustness weight of one residual given 6·median|r|.
pub fn bisquare(r: f64, h: f64) -> f64 {
    let u = (r / h).abs();
    if u < 1.0 {
        (1.0 - u * u).powi(2)
    } else {
        0.0
    }
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Simple regression of `r` on `x` by closed-form covariance / variance;
/// returns mean absolute fit error.
pub fn simple_regression_mae(r: &[f64], x: &[f64]) -> f64 {
    let n = r.len() as f64;
    let (mr, mx) = (r.iter().sum::<f64>() / n, x.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(r).map(|(a, b)| (a - mx) * (b - mr)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = mr - b * mx;
    r.iter().zip(x).map(|(ri, xi)| (ri - a - b * xi).abs()).sum::<f64>() / n
}

/// Random panel with integer NE counts and the given investment codes.
pub fn random_panel(seed: u64, n_districts: usize, n_months: usize, codes: &[&str]) -> PanelDataset {
    let mut g = rng(seed);
    let ne = Array2::from_shape_fn((n_districts, n_months), |_| {
        if g.random_bool(0.6) {
            0
        } else {
            g.random_range(1..6u32)
        }
    });
    let mut inv = BTreeMap::new();
    for c in codes {
        inv.insert(
            c.to_string(),
            Array2::from_shape_fn((n_districts, n_months), |_| (g.random_range(0..4u32) as f64) * 0.5),
        );
    }
    let ids = (1..=n_districts as u64).map(|i| i * 10).collect();
    PanelDataset::new(ids, YearMonth::new(2004, 1).unwrap(), ne, inv).unwrap()
}
