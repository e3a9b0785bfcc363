//! Leakage-free feature matrices.
//!
//! Every row is keyed by (district, month t) and only reads panel values at
//! months before t; references before the first month are imputed with 0.
//! Column order, for every variant:
//!
//! | block | columns |
//! |-------|---------|
//! | TRI   | `NE_lag_1` … `NE_lag_12`, `mmane_trend_3`, `mmane_mean_12`, `mmane_mean_6`, `mmane_mean_3`, `mmane_mean_1`, `month`, `year` |
//! | ID    | `district_id` (V2, V4, V5) |
//! | SID   | `<code>-<lag>` per selected pair, default `A6-6`, `B9-4` (V3, V4, V5) |
//! | A2    | `A2_lag_12` (V5) |

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ndarray::Array2;

use crate::decomposition::MmaneSeries;
use crate::error::{Error, Result};
use crate::panel::PanelDataset;

pub const MAX_LAG: usize = 12;
pub const TRI_WIDTH: usize = MAX_LAG + 1 + 4 + 2;
const TRAILING_WINDOWS: [usize; 4] = [12, 6, 3, 1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    V1,
    V2,
    V3,
    V4,
    V5,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::V1, Variant::V2, Variant::V3, Variant::V4, Variant::V5];

    pub fn has_id(self) -> bool {
        matches!(self, Variant::V2 | Variant::V4 | Variant::V5)
    }

    pub fn has_sid(self) -> bool {
        matches!(self, Variant::V3 | Variant::V4 | Variant::V5)
    }

    pub fn has_a2(self) -> bool {
        self == Variant::V5
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::V1 => "V1",
            Variant::V2 => "V2",
            Variant::V3 => "V3",
            Variant::V4 => "V4",
            Variant::V5 => "V5",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown variant `{s}`")))
    }
}

/// A selected lagged investment feature, e.g. `A6-6`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LaggedCode {
    pub code: String,
    pub lag: usize,
}

impl LaggedCode {
    pub fn new(code: impl Into<String>, lag: usize) -> Self {
        LaggedCode { code: code.into(), lag }
    }

    pub fn column_name(&self) -> String {
        dl_name(&self.code, self.lag)
    }
}

impl FromStr for LaggedCode {
    type Err = Error;

    /// Accepts `A6-6` or `A6:6`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (code, lag) = s
            .rsplit_once(['-', ':'])
            .ok_or_else(|| Error::InvalidConfig(format!("lagged code `{s}` is not CODE-LAG")))?;
        let lag: usize = lag
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad lag in `{s}`")))?;
        if !(1..=MAX_LAG).contains(&lag) {
            return Err(Error::InvalidConfig(format!("lag {lag} in `{s}` not in 1..=12")));
        }
        Ok(LaggedCode::new(code, lag))
    }
}

impl fmt::Display for LaggedCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.code, self.lag)
    }
}

pub fn default_sid() -> Vec<LaggedCode> {
    vec![LaggedCode::new("A6", 6), LaggedCode::new("B9", 4)]
}

pub const A2_COLUMN: &str = "A2_lag_12";
pub const DISTRICT_COLUMN: &str = "district_id";

pub fn dl_name(code: &str, lag: usize) -> String {
    format!("{code}-{lag}")
}

pub fn tri_columns() -> Vec<String> {
    let mut cols: Vec<String> = (1..=MAX_LAG).map(|m| format!("NE_lag_{m}")).collect();
    cols.push("mmane_trend_3".into());
    cols.extend(TRAILING_WINDOWS.iter().map(|k| format!("mmane_mean_{k}")));
    cols.push("month".into());
    cols.push("year".into());
    cols
}

pub fn variant_columns(variant: Variant, sid: &[LaggedCode]) -> Vec<String> {
    let mut cols = tri_columns();
    if variant.has_id() {
        cols.push(DISTRICT_COLUMN.into());
    }
    if variant.has_sid() {
        cols.extend(sid.iter().map(LaggedCode::column_name));
    }
    if variant.has_a2() {
        cols.push(A2_COLUMN.into());
    }
    cols
}

fn check_month(panel: &PanelDataset, t: usize) -> Result<()> {
    if t >= panel.n_months() {
        return Err(Error::InvalidConfig(format!(
            "month index {t} outside panel of {} months",
            panel.n_months()
        )));
    }
    Ok(())
}

fn fill_tri(panel: &PanelDataset, mmane: &MmaneSeries, row: usize, t: usize, out: &mut [f64]) {
    let ne = panel.ne_series(row);
    for m in 1..=MAX_LAG {
        out[m - 1] = if t >= m { ne[t - m] as f64 } else { 0.0 };
    }
    let t = t as isize;
    out[MAX_LAG] = mmane.at_or_zero(t - 3) - mmane.at_or_zero(t - 1);
    for (i, &k) in TRAILING_WINDOWS.iter().enumerate() {
        let sum: f64 = (1..=k as isize).map(|j| mmane.at_or_zero(t - j)).sum();
        out[MAX_LAG + 1 + i] = sum / k as f64;
    }
    let ym = panel.month_at(t as usize);
    out[MAX_LAG + 5] = ym.month as f64;
    out[MAX_LAG + 6] = ym.year as f64;
}

/// Time-related features of one (district, month).
pub fn build_tri(
    group_panel: &PanelDataset,
    mmane: &MmaneSeries,
    district: u64,
    t: usize,
) -> Result<Vec<(String, f64)>> {
    let row = group_panel.district_index(district)?;
    check_month(group_panel, t)?;
    let mut values = vec![0.0; TRI_WIDTH];
    fill_tri(group_panel, mmane, row, t, &mut values);
    Ok(tri_columns().into_iter().zip(values).collect())
}

/// `code-m` = investment(code, district, t − m) for each lag, zero before month 0.
pub fn build_dl(
    panel: &PanelDataset,
    code: &str,
    district: u64,
    t: usize,
    lags: impl IntoIterator<Item = usize>,
) -> Result<Vec<(String, f64)>> {
    let series = panel.investment(code)?;
    let row = panel.district_index(district)?;
    check_month(panel, t)?;
    Ok(lags
        .into_iter()
        .map(|m| {
            let v = if t >= m { series[[row, t - m]] } else { 0.0 };
            (dl_name(code, m), v)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowKey {
    pub district: u64,
    pub month: usize,
}

/// Named feature columns over (district, month) rows with the NE target.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub variant: Variant,
    pub columns: Vec<String>,
    pub keys: Vec<RowKey>,
    pub values: Array2<f64>,
    pub target: Vec<f64>,
}

impl FeatureMatrix {
    /// Unkeyed matrix from raw rows, for models used outside the panel pipeline.
    pub fn from_rows(columns: Vec<String>, rows: &[Vec<f64>], target: Vec<f64>) -> Result<Self> {
        if rows.len() != target.len() {
            return Err(Error::LengthMismatch(rows.len(), target.len()));
        }
        let p = columns.len();
        let mut values = Array2::zeros((rows.len(), p));
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::LengthMismatch(r.len(), p));
            }
            for (j, v) in r.iter().enumerate() {
                values[[i, j]] = *v;
            }
        }
        let keys = (0..rows.len()).map(|i| RowKey { district: 0, month: i }).collect();
        Ok(FeatureMatrix {
            variant: Variant::V1,
            columns,
            keys,
            values,
            target,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.keys.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Rows whose month index lies in `months`.
    pub fn select_months(&self, months: std::ops::Range<usize>) -> FeatureMatrix {
        let rows: Vec<usize> = self
            .keys
            .iter()
            .enumerate()
            .filter(|(_, k)| months.contains(&k.month))
            .map(|(i, _)| i)
            .collect();
        self.select_rows(&rows)
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            variant: self.variant,
            columns: self.columns.clone(),
            keys: rows.iter().map(|&i| self.keys[i]).collect(),
            values: self.values.select(ndarray::Axis(0), rows),
            target: rows.iter().map(|&i| self.target[i]).collect(),
        }
    }

    /// CSV: `district,month_index,<feature columns…>,target`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["district".to_string(), "month_index".to_string()];
        header.extend(self.columns.iter().cloned());
        header.push("target".into());
        w.write_record(&header)?;
        let mut rec = Vec::with_capacity(header.len());
        for (i, key) in self.keys.iter().enumerate() {
            rec.clear();
            rec.push(key.district.to_string());
            rec.push(key.month.to_string());
            rec.extend(self.values.row(i).iter().map(|v| v.to_string()));
            rec.push(self.target[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<writer>", e))?;
        Ok(())
    }
}

/// One row per (district, month) of `group_panel`, ordered by district id
/// then month, with the columns of `variant`.
pub fn assemble_variant(
    group_panel: &PanelDataset,
    mmane: &MmaneSeries,
    variant: Variant,
    sid: &[LaggedCode],
) -> Result<FeatureMatrix> {
    if mmane.len() != group_panel.n_months() {
        return Err(Error::LengthMismatch(mmane.len(), group_panel.n_months()));
    }
    let sid_series = if variant.has_sid() {
        sid.iter()
            .map(|s| {
                if !(1..=MAX_LAG).contains(&s.lag) {
                    return Err(Error::InvalidConfig(format!("lag {} in {s}", s.lag)));
                }
                Ok((group_panel.investment(&s.code)?, s.lag))
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let a2 = if variant.has_a2() {
        Some(group_panel.investment("A2")?)
    } else {
        None
    };

    let columns = variant_columns(variant, sid);
    let p = columns.len();
    let nm = group_panel.n_months();
    let mut order: Vec<usize> = (0..group_panel.n_districts()).collect();
    order.sort_by_key(|&r| group_panel.district_ids()[r]);

    let n = order.len() * nm;
    let mut values = Array2::<f64>::zeros((n, p));
    let mut keys = Vec::with_capacity(n);
    let mut target = Vec::with_capacity(n);
    for (slot, &r) in order.iter().enumerate() {
        let district = group_panel.district_ids()[r];
        for t in 0..nm {
            let i = slot * nm + t;
            let mut row = values.row_mut(i);
            let out = row.as_slice_mut().expect("row-major");
            fill_tri(group_panel, mmane, r, t, &mut out[..TRI_WIDTH]);
            let mut c = TRI_WIDTH;
            if variant.has_id() {
                out[c] = district as f64;
                c += 1;
            }
            for (series, lag) in &sid_series {
                out[c] = if t >= *lag { series[[r, t - lag]] } else { 0.0 };
                c += 1;
            }
            if let Some(a2) = a2 {
                out[c] = if t >= MAX_LAG { a2[[r, t - MAX_LAG]] } else { 0.0 };
            }
            keys.push(RowKey { district, month: t });
            target.push(group_panel.ne()[[r, t]] as f64);
        }
    }
    Ok(FeatureMatrix {
        variant,
        columns,
        keys,
        values,
        target,
    })
}
