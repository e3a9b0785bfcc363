//! Group-level monthly mean series (MMANE) and its decomposition into
//! trend, seasonal and residual components.
//!
//! Classical decomposition follows the textbook moving-average procedure;
//! STL follows the inner/outer loop structure of Cleveland et al. with
//! locally linear loess in every smoothing step.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grouping::GroupLabel;
use crate::loess::Loess;
use crate::panel::{PanelDataset, YearMonth};

pub const PERIOD: usize = 12;

/// Month-by-month mean NE over a group's districts.
#[derive(Debug, Clone, PartialEq)]
pub struct MmaneSeries {
    pub values: Vec<f64>,
    pub group: Option<GroupLabel>,
    pub start: YearMonth,
}

impl MmaneSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Value at month `t`, zero for months before the series start.
    pub fn at_or_zero(&self, t: isize) -> f64 {
        if t < 0 {
            0.0
        } else {
            self.values.get(t as usize).copied().unwrap_or(0.0)
        }
    }
}

pub fn mmane_series(group_panel: &PanelDataset) -> Result<MmaneSeries> {
    let nd = group_panel.n_districts();
    if nd == 0 {
        return Err(Error::EmptyGroup("(no districts)".into()));
    }
    let values = (0..group_panel.n_months())
        .map(|t| {
            let total: u64 = group_panel.ne().column(t).iter().map(|&v| v as u64).sum();
            total as f64 / nd as f64
        })
        .collect();
    Ok(MmaneSeries {
        values,
        group: None,
        start: group_panel.start(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Additive,
    Multiplicative,
    Stl,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Additive, Method::Multiplicative, Method::Stl];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Additive => "additive",
            Method::Multiplicative => "multiplicative",
            Method::Stl => "stl",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "additive" => Ok(Method::Additive),
            "multiplicative" => Ok(Method::Multiplicative),
            "stl" => Ok(Method::Stl),
            other => Err(Error::InvalidConfig(format!("unknown decomposition method `{other}`"))),
        }
    }
}

/// Trend, seasonal and residual components of one series.
///
/// `trend` and `residual` are `None` where a classical moving average is
/// undefined (the first and last half period). `residual` is always the
/// remainder of `observed` after the fitted part, so [`reconstruct`] returns
/// `observed` exactly whenever the fit is within a factor of two of the
/// observation (the subtraction is then exact).
///
/// [`reconstruct`]: SeriesDecomposition::reconstruct
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesDecomposition {
    pub method: Method,
    pub period: usize,
    pub observed: Vec<f64>,
    pub trend: Vec<Option<f64>>,
    pub seasonal: Vec<f64>,
    pub residual: Vec<Option<f64>>,
    /// Final robustness weights of an STL fit.
    pub robustness_weights: Option<Vec<f64>>,
}

impl SeriesDecomposition {
    /// The `period` seasonal indices, by position modulo the period.
    pub fn seasonal_indices(&self) -> &[f64] {
        &self.seasonal[..self.period.min(self.seasonal.len())]
    }

    /// `(trend + seasonal) + residual`, or `(trend · seasonal) · residual`
    /// for the multiplicative method; `None` where the trend is undefined.
    pub fn reconstruct(&self, t: usize) -> Option<f64> {
        let (tr, r) = (self.trend[t]?, self.residual[t]?);
        Some(match self.method {
            Method::Multiplicative => (tr * self.seasonal[t]) * r,
            _ => (tr + self.seasonal[t]) + r,
        })
    }

    pub fn defined_months(&self) -> impl Iterator<Item = usize> + '_ {
        self.trend
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_some())
            .map(|(i, _)| i)
    }
}

/// Centered moving average of order `period` (2×period for even periods).
fn centered_moving_average(y: &[f64], period: usize) -> Vec<Option<f64>> {
    let n = y.len();
    let half = period / 2;
    let mut out = vec![None; n];
    for t in half..n.saturating_sub(half) {
        let v = if period % 2 == 0 {
            let inner: f64 = y[t + 1 - half..t + half].iter().sum();
            (0.5 * y[t - half] + inner + 0.5 * y[t + half]) / period as f64
        } else {
            y[t - half..=t + half].iter().sum::<f64>() / period as f64
        };
        out[t] = Some(v);
    }
    out
}

pub fn classical_decompose(
    series: &MmaneSeries,
    method: Method,
    period: usize,
) -> Result<SeriesDecomposition> {
    classical_decompose_values(&series.values, method, period)
}

pub fn classical_decompose_values(
    y: &[f64],
    method: Method,
    period: usize,
) -> Result<SeriesDecomposition> {
    let multiplicative = match method {
        Method::Additive => false,
        Method::Multiplicative => true,
        Method::Stl => {
            return Err(Error::InvalidConfig("use stl_decompose for STL".into()));
        }
    };
    if period < 2 {
        return Err(Error::InvalidConfig(format!("period {period} < 2")));
    }
    if y.len() < 2 * period {
        return Err(Error::SeriesTooShort {
            needed: 2 * period,
            got: y.len(),
        });
    }
    if multiplicative {
        if let Some((index, &value)) = y.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NonPositiveSeries { index, value });
        }
    }

    let trend = centered_moving_average(y, period);
    let mut sums = vec![0.0; period];
    let mut counts = vec![0usize; period];
    for (t, tr) in trend.iter().enumerate() {
        if let Some(tr) = tr {
            let detrended = if multiplicative { y[t] / tr } else { y[t] - tr };
            sums[t % period] += detrended;
            counts[t % period] += 1;
        }
    }
    let mut indices: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let centre = indices.iter().sum::<f64>() / period as f64;
    for v in &mut indices {
        if multiplicative {
            *v /= centre;
        } else {
            *v -= centre;
        }
    }

    let seasonal: Vec<f64> = (0..y.len()).map(|t| indices[t % period]).collect();
    let residual = trend
        .iter()
        .enumerate()
        .map(|(t, tr)| {
            tr.map(|tr| {
                if multiplicative {
                    y[t] / (tr * seasonal[t])
                } else {
                    y[t] - (tr + seasonal[t])
                }
            })
        })
        .collect();
    Ok(SeriesDecomposition {
        method,
        period,
        observed: y.to_vec(),
        trend,
        seasonal,
        residual,
        robustness_weights: None,
    })
}

/// STL parameters: period, loess spans (odd, ≥ 3) and loop counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StlParams {
    pub period: usize,
    pub seasonal_span: usize,
    pub trend_span: usize,
    pub low_pass_span: usize,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
}

impl StlParams {
    /// Standard defaults for a period: n_s = 7, n_l = next odd ≥ period,
    /// n_t = next odd ≥ 1.5·period / (1 − 1.5 / n_s), 2 inner and 1 outer pass.
    pub fn for_period(period: usize) -> Self {
        let seasonal_span = 7;
        let trend = (1.5 * period as f64 / (1.0 - 1.5 / seasonal_span as f64)).ceil() as usize;
        StlParams {
            period,
            seasonal_span,
            trend_span: next_odd(trend),
            low_pass_span: next_odd(period),
            inner_iterations: 2,
            outer_iterations: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.period < 2 {
            return Err(Error::InvalidSpan(format!("period {} < 2", self.period)));
        }
        for (name, span) in [
            ("seasonal", self.seasonal_span),
            ("trend", self.trend_span),
            ("low-pass", self.low_pass_span),
        ] {
            if span < 3 || span % 2 == 0 {
                return Err(Error::InvalidSpan(format!("{name} span {span} must be odd and >= 3")));
            }
        }
        if self.inner_iterations == 0 {
            return Err(Error::InvalidSpan("inner iterations must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for StlParams {
    fn default() -> Self {
        StlParams::for_period(PERIOD)
    }
}

fn next_odd(v: usize) -> usize {
    if v % 2 == 0 {
        v + 1
    } else {
        v
    }
}

pub fn stl_decompose(series: &MmaneSeries, params: &StlParams) -> Result<SeriesDecomposition> {
    stl_decompose_values(&series.values, params)
}

pub fn stl_decompose_values(y: &[f64], params: &StlParams) -> Result<SeriesDecomposition> {
    params.validate()?;
    let n = y.len();
    let np = params.period;
    if n < 2 * np {
        return Err(Error::SeriesTooShort { needed: 2 * np, got: n });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("series contains non-finite values".into()));
    }

    let mut trend = vec![0.0; n];
    let mut seasonal = vec![0.0; n];
    let mut weights = vec![1.0; n];
    let mut robust = false;
    let mut pass = 0;
    loop {
        let rw = robust.then_some(weights.as_slice());
        for _ in 0..params.inner_iterations {
            inner_pass(y, params, rw, &mut trend, &mut seasonal)?;
        }
        pass += 1;
        if pass > params.outer_iterations {
            break;
        }
        let fit: Vec<f64> = trend.iter().zip(&seasonal).map(|(t, s)| t + s).collect();
        weights = robustness_weights(y, &fit);
        robust = true;
    }

    let residual = (0..n).map(|t| Some(y[t] - (trend[t] + seasonal[t]))).collect();
    Ok(SeriesDecomposition {
        method: Method::Stl,
        period: np,
        observed: y.to_vec(),
        trend: trend.into_iter().map(Some).collect(),
        seasonal,
        residual,
        robustness_weights: Some(weights),
    })
}

fn inner_pass(
    y: &[f64],
    p: &StlParams,
    rw: Option<&[f64]>,
    trend: &mut [f64],
    seasonal: &mut [f64],
) -> Result<()> {
    let n = y.len();
    let np = p.period;
    let detrended: Vec<f64> = y.iter().zip(trend.iter()).map(|(a, b)| a - b).collect();
    let cycle = cycle_subseries(&detrended, np, p.seasonal_span, rw)?;

    let low = moving_average(&moving_average(&moving_average(&cycle, np), np), 3);
    debug_assert_eq!(low.len(), n);
    let xs = index_axis(n);
    let low = smooth_with_fallback(&xs, &low, p.low_pass_span, None)?;

    for t in 0..n {
        seasonal[t] = cycle[np + t] - low[t];
    }
    let deseasonal: Vec<f64> = y.iter().zip(seasonal.iter()).map(|(a, b)| a - b).collect();
    let smoothed = smooth_with_fallback(&xs, &deseasonal, p.trend_span, rw)?;
    trend.copy_from_slice(&smoothed);
    Ok(())
}

fn index_axis(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64).collect()
}

/// Loess at every point; a point whose neighborhood carries no weight keeps
/// its input value.
fn smooth_with_fallback(x: &[f64], y: &[f64], span: usize, rw: Option<&[f64]>) -> Result<Vec<f64>> {
    let l = Loess::new(x, y, span, 1, rw)?;
    x.iter()
        .zip(y)
        .map(|(&x0, &y0)| match l.fit_at(x0) {
            Err(Error::DegenerateFit(_)) => Ok(y0),
            other => other,
        })
        .collect()
}

/// Smooths each cycle-subseries and extends it one period on either side.
/// Output has length n + 2·period; index `period + t` aligns with month `t`.
fn cycle_subseries(y: &[f64], np: usize, span: usize, rw: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = y.len();
    let mut out = vec![0.0; n + 2 * np];
    for j in 0..np {
        let ys: Vec<f64> = y.iter().skip(j).step_by(np).copied().collect();
        let ws: Option<Vec<f64>> = rw.map(|w| w.iter().skip(j).step_by(np).copied().collect());
        let k = ys.len();
        let xs = index_axis(k);
        let l = Loess::new(&xs, &ys, span, 1, ws.as_deref())?;
        for m in 0..k + 2 {
            let fallback = ys[m.saturating_sub(1).min(k - 1)];
            let v = match l.fit_at(m as f64) {
                Ok(v) => v,
                Err(Error::DegenerateFit(_)) => fallback,
                Err(e) => return Err(e),
            };
            out[m * np + j] = v;
        }
    }
    Ok(out)
}

fn moving_average(y: &[f64], len: usize) -> Vec<f64> {
    y.windows(len)
        .map(|w| w.iter().sum::<f64>() / len as f64)
        .collect()
}

/// Bisquare weights on |residual| / (6 · median |residual|).
pub fn robustness_weights(y: &[f64], fit: &[f64]) -> Vec<f64> {
    let r: Vec<f64> = y.iter().zip(fit).map(|(a, b)| (a - b).abs()).collect();
    let mut sorted = r.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let h = 6.0 * median;
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if h <= 1e-12 * scale {
        // Residuals are rounding noise: no point is an outlier.
        return vec![1.0; n];
    }
    r.iter()
        .map(|&ri| {
            let u = ri / h;
            if u < 1.0 {
                let t = 1.0 - u * u;
                t * t
            } else {
                0.0
            }
        })
        .collect()
}

/// Mean absolute error of the decomposition over months with a defined trend.
///
/// Multiplicative fits are measured as |observed − trend·seasonal| so every
/// method is compared in events/month.
pub fn decomposition_mae(decomp: &SeriesDecomposition) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for t in decomp.defined_months() {
        let err = match decomp.method {
            Method::Multiplicative => {
                decomp.observed[t] - decomp.trend[t].unwrap() * decomp.seasonal[t]
            }
            _ => decomp.residual[t].unwrap(),
        };
        total += err.abs();
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}
