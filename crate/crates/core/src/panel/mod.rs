//! The district × month panel every other stage consumes.

mod io;
mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::grouping::{GroupAssignment, GroupLabel};

pub use io::{load_panel, read_panel, save_panel, write_panel, InvestmentColumns, Schema};
pub use synth::{generate_synthetic, silent_districts, PlantedSignal, SynthConfig};

/// Calendar month anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    /// 1..=12
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidConfig(format!("month {month} out of range 1..=12")));
        }
        Ok(YearMonth { year, month })
    }

    /// Months elapsed since year 0, January.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ordinal: i64) -> Self {
        YearMonth {
            year: ordinal.div_euclid(12) as i32,
            month: ordinal.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn plus_months(self, months: usize) -> Self {
        Self::from_ordinal(self.ordinal() + months as i64)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{:02}", self.year, self.month)
    }
}

impl std::str::FromStr for YearMonth {
    type Err = Error;

    /// `YYYY-MM`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("`{s}` is not YYYY-MM"));
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        YearMonth::new(y.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?)
    }
}

/// Rectangular district × month panel of NE counts and investment series.
///
/// Immutable once built; rows follow `district_ids` order, columns are
/// consecutive months starting at `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    district_ids: Vec<u64>,
    start: YearMonth,
    ne: Array2<u32>,
    investments: BTreeMap<String, Array2<f64>>,
}

impl PanelDataset {
    pub fn new(
        district_ids: Vec<u64>,
        start: YearMonth,
        ne: Array2<u32>,
        investments: BTreeMap<String, Array2<f64>>,
    ) -> Result<Self> {
        if !(1..=12).contains(&start.month) {
            return Err(Error::InvalidPanel(format!("start month {}", start.month)));
        }
        let shape = (district_ids.len(), ne.ncols());
        if ne.nrows() != shape.0 {
            return Err(Error::InvalidPanel(format!(
                "NE matrix has {} rows for {} districts",
                ne.nrows(),
                shape.0
            )));
        }
        let mut seen = BTreeSet::new();
        for &id in &district_ids {
            if !seen.insert(id) {
                return Err(Error::InvalidPanel(format!("duplicate district id {id}")));
            }
        }
        for (code, m) in &investments {
            if m.dim() != shape {
                return Err(Error::InvalidPanel(format!(
                    "investment `{code}` is {:?}, expected {:?}",
                    m.dim(),
                    shape
                )));
            }
            if let Some(v) = m.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidPanel(format!(
                    "investment `{code}` has invalid value {v}"
                )));
            }
        }
        Ok(PanelDataset {
            district_ids,
            start,
            ne,
            investments,
        })
    }

    pub fn district_ids(&self) -> &[u64] {
        &self.district_ids
    }

    pub fn n_districts(&self) -> usize {
        self.district_ids.len()
    }

    pub fn n_months(&self) -> usize {
        self.ne.ncols()
    }

    pub fn start(&self) -> YearMonth {
        self.start
    }

    pub fn ne(&self) -> &Array2<u32> {
        &self.ne
    }

    pub fn investments(&self) -> &BTreeMap<String, Array2<f64>> {
        &self.investments
    }

    pub fn investment(&self, code: &str) -> Result<&Array2<f64>> {
        self.investments
            .get(code)
            .ok_or_else(|| Error::UnknownCode(code.to_string()))
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.investments.keys().map(String::as_str)
    }

    pub fn district_index(&self, district: u64) -> Result<usize> {
        self.district_ids
            .iter()
            .position(|&d| d == district)
            .ok_or(Error::UnknownDistrict(district))
    }

    pub fn ne_series(&self, district_index: usize) -> ArrayView1<'_, u32> {
        self.ne.row(district_index)
    }

    /// Calendar month of month index `t`.
    pub fn month_at(&self, t: usize) -> YearMonth {
        self.start.plus_months(t)
    }

    /// Sub-panel with the given row indices, month axis unchanged.
    pub fn select_districts(&self, rows: &[usize]) -> PanelDataset {
        let ids = rows.iter().map(|&r| self.district_ids[r]).collect();
        let ne = self.ne.select(ndarray::Axis(0), rows);
        let investments = self
            .investments
            .iter()
            .map(|(c, m)| (c.clone(), m.select(ndarray::Axis(0), rows)))
            .collect();
        PanelDataset {
            district_ids: ids,
            start: self.start,
            ne,
            investments,
        }
    }

    /// Copy with one NE cell replaced. Used for perturbation checks.
    pub fn with_ne(&self, district_index: usize, t: usize, value: u32) -> PanelDataset {
        let mut out = self.clone();
        out.ne[[district_index, t]] = value;
        out
    }

    /// Copy with one investment cell replaced.
    pub fn with_investment(
        &self,
        code: &str,
        district_index: usize,
        t: usize,
        value: f64,
    ) -> Result<PanelDataset> {
        let mut out = self.clone();
        let m = out
            .investments
            .get_mut(code)
            .ok_or_else(|| Error::UnknownCode(code.to_string()))?;
        m[[district_index, t]] = value;
        Ok(out)
    }
}

/// Sub-panel holding exactly the districts labelled `label`.
pub fn slice_group(
    dataset: &PanelDataset,
    assignment: &GroupAssignment,
    label: GroupLabel,
) -> Result<PanelDataset> {
    let mut rows = Vec::new();
    for (&district, _) in assignment.labels() {
        dataset.district_index(district)?;
    }
    for (i, &d) in dataset.district_ids().iter().enumerate() {
        if assignment.label(d) == Some(label) {
            rows.push(i);
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyGroup(label.to_string()));
    }
    Ok(dataset.select_districts(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny() -> PanelDataset {
        PanelDataset::new(
            vec![1, 2],
            YearMonth::new(2004, 1).unwrap(),
            array![[0, 1], [2, 0]],
            BTreeMap::new(),
        )
        .unwrap()
    }

    #[test]
    fn year_month_arithmetic() {
        let ym = YearMonth::new(2004, 11).unwrap();
        assert_eq!(ym.plus_months(2), YearMonth::new(2005, 1).unwrap());
        assert_eq!(YearMonth::from_ordinal(ym.ordinal()), ym);
        assert!(YearMonth::new(2004, 13).is_err());
    }

    #[test]
    fn rejects_duplicate_ids() {
        let err = PanelDataset::new(
            vec![1, 1],
            YearMonth::new(2004, 1).unwrap(),
            array![[0], [0]],
            BTreeMap::new(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn rejects_ragged_investment() {
        let mut inv = BTreeMap::new();
        inv.insert("A1".to_string(), Array2::zeros((2, 3)));
        let err = PanelDataset::new(
            vec![1, 2],
            YearMonth::new(2004, 1).unwrap(),
            array![[0, 1], [2, 0]],
            inv,
        );
        assert!(err.is_err());
    }

    #[test]
    fn slice_by_label() {
        let p = tiny();
        let a = GroupAssignment::from_panel(&p, (0.0, 2.0));
        // ANE: d1 = 0.5, d2 = 1.0; both B.
        let b = slice_group(&p, &a, GroupLabel::B).unwrap();
        assert_eq!(b.district_ids(), &[1, 2]);
        assert!(matches!(
            slice_group(&p, &a, GroupLabel::C),
            Err(Error::EmptyGroup(_))
        ));
    }

    #[test]
    fn slice_single_district_group() {
        let p = PanelDataset::new(
            vec![1, 2],
            YearMonth::new(2004, 1).unwrap(),
            array![[0, 0], [2, 0]],
            BTreeMap::new(),
        )
        .unwrap();
        let a = GroupAssignment::from_panel(&p, (0.0, 2.0));
        let g = slice_group(&p, &a, GroupLabel::A).unwrap();
        assert_eq!(g.district_ids(), &[1]);
        assert_eq!(g.n_months(), 2);
    }
}
