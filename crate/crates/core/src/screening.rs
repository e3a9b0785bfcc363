//! Single-variable lag screening against a decomposition residual.
//!
//! Each `(code, lag)` pair is fitted on its own: residual_t ≈ a + b·x(t − lag),
//! with x the group-mean investment series. All pairs share one month window
//! (residual defined and t ≥ largest lag) so their errors are comparable.
//! The baseline is the same regression with b = 0, i.e. the intercept-only
//! fit, so an uninformative regressor scores a gain of exactly 0.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::panel::PanelDataset;
use crate::Execution;

#[derive(Debug, Clone, PartialEq)]
pub struct LagScreenEntry {
    pub code: String,
    pub lag: usize,
    pub intercept: f64,
    pub slope: f64,
    pub model_mae: f64,
    pub model_mse: f64,
    /// (baseline − model) / baseline × 100.
    pub pct_gain: f64,
}

impl LagScreenEntry {
    pub fn name(&self) -> String {
        crate::features::dl_name(&self.code, self.lag)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagScreenResult {
    /// Mean |residual| over every month where the residual is defined.
    pub decomposition_mae: f64,
    /// Intercept-only MAE over the shared window.
    pub baseline_mae: f64,
    /// Variance of the residual over the shared window.
    pub baseline_mse: f64,
    /// Month indices of the shared window.
    pub months: Vec<usize>,
    /// Sorted by model MAE, then code, then lag.
    pub ranking: Vec<LagScreenEntry>,
}

impl LagScreenResult {
    pub fn top(&self, k: usize) -> &[LagScreenEntry] {
        &self.ranking[..k.min(self.ranking.len())]
    }
}

/// Month-by-month mean of every investment series over the panel's districts.
pub fn group_mean_investments(panel: &PanelDataset) -> BTreeMap<String, Vec<f64>> {
    let nd = panel.n_districts().max(1) as f64;
    panel
        .investments()
        .iter()
        .map(|(code, m)| {
            let means = (0..panel.n_months())
                .map(|t| m.column(t).sum() / nd)
                .collect();
            (code.clone(), means)
        })
        .collect()
}

pub fn screen_lags(
    residual: &[Option<f64>],
    investments: &BTreeMap<String, Vec<f64>>,
    codes: &[String],
    lags: RangeInclusive<usize>,
    exec: Execution,
) -> Result<LagScreenResult> {
    if lags.is_empty() || *lags.start() == 0 {
        return Err(Error::InvalidConfig(format!("lags {lags:?} must be a non-empty range of positive months")));
    }
    for code in codes {
        let series = investments
            .get(code)
            .ok_or_else(|| Error::UnknownCode(code.clone()))?;
        if series.len() != residual.len() {
            return Err(Error::LengthMismatch(series.len(), residual.len()));
        }
    }
    let max_lag = *lags.end();
    let defined: Vec<f64> = residual.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::NoAlignedMonths);
    }
    let decomposition_mae = defined.iter().map(|r| r.abs()).sum::<f64>() / defined.len() as f64;

    let months: Vec<usize> = (max_lag..residual.len())
        .filter(|&t| residual[t].is_some())
        .collect();
    if months.is_empty() {
        return Err(Error::NoAlignedMonths);
    }
    let r: Vec<f64> = months.iter().map(|&t| residual[t].unwrap()).collect();
    let n = r.len() as f64;
    let r_mean = r.iter().sum::<f64>() / n;
    let baseline_mae = r.iter().map(|v| (v - r_mean).abs()).sum::<f64>() / n;
    let baseline_mse = r.iter().map(|v| (v - r_mean).powi(2)).sum::<f64>() / n;

    let pairs: Vec<(&String, usize)> = codes
        .iter()
        .flat_map(|c| lags.clone().map(move |l| (c, l)))
        .collect();
    let mut ranking = exec.map(pairs.len(), |i| {
        let (code, lag) = pairs[i];
        let x: Vec<f64> = months.iter().map(|&t| investments[code][t - lag]).collect();
        let (intercept, slope) = simple_ols(&x, &r, r_mean);
        let (mut abs, mut sq) = (0.0, 0.0);
        for (xi, ri) in x.iter().zip(&r) {
            let e = ri - (intercept + slope * xi);
            abs += e.abs();
            sq += e * e;
        }
        let model_mae = abs / n;
        let pct_gain = if baseline_mae > 0.0 {
            (baseline_mae - model_mae) / baseline_mae * 100.0
        } else {
            0.0
        };
        LagScreenEntry {
            code: code.clone(),
            lag,
            intercept,
            slope,
            model_mae,
            model_mse: sq / n,
            pct_gain,
        }
    });
    ranking.sort_by(|a, b| {
        a.model_mae
            .total_cmp(&b.model_mae)
            .then_with(|| a.code.cmp(&b.code))
            .then_with(|| a.lag.cmp(&b.lag))
    });
    Ok(LagScreenResult {
        decomposition_mae,
        baseline_mae,
        baseline_mse,
        months,
        ranking,
    })
}

/// Least squares line through (x, y); a constant regressor yields slope 0.
fn simple_ols(x: &[f64], y: &[f64], y_mean: f64) -> (f64, f64) {
    let n = x.len() as f64;
    let x_mean = x.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - x_mean).powi(2)).sum();
    let scale: f64 = x.iter().map(|v| v * v).sum::<f64>();
    if sxx <= 1e-14 * scale || sxx == 0.0 {
        return (y_mean, 0.0);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - x_mean) * (b - y_mean)).sum();
    let slope = sxy / sxx;
    (y_mean - slope * x_mean, slope)
}
