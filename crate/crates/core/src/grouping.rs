//! Activity groups by all-time average NE (ANE).
//!
//! A: ANE = 0 (silent districts), B: 0 < ANE ≤ upper, C: ANE > upper.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::panel::PanelDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroupLabel {
    A,
    B,
    C,
}

impl GroupLabel {
    pub const ALL: [GroupLabel; 3] = [GroupLabel::A, GroupLabel::B, GroupLabel::C];

    pub fn as_str(self) -> &'static str {
        match self {
            GroupLabel::A => "A",
            GroupLabel::B => "B",
            GroupLabel::C => "C",
        }
    }
}

impl fmt::Display for GroupLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroupLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(GroupLabel::A),
            "B" | "b" => Ok(GroupLabel::B),
            "C" | "c" => Ok(GroupLabel::C),
            other => Err(Error::UnknownGroup(other.to_string())),
        }
    }
}

/// Default `(lower, upper)` ANE thresholds.
pub const DEFAULT_THRESHOLDS: (f64, f64) = (0.0, 2.0);

#[derive(Debug, Clone, PartialEq)]
pub struct GroupAssignment {
    ane: BTreeMap<u64, f64>,
    labels: BTreeMap<u64, GroupLabel>,
    thresholds: (f64, f64),
    zero_share: BTreeMap<GroupLabel, f64>,
}

impl GroupAssignment {
    /// ANE, labels and zero shares (for non-empty groups) in one pass.
    pub fn from_panel(dataset: &PanelDataset, thresholds: (f64, f64)) -> Self {
        let ane = compute_ane(dataset);
        let mut a = assign_groups(&ane, thresholds);
        a.zero_share = GroupLabel::ALL
            .into_iter()
            .filter_map(|g| zero_share(dataset, &a, g).ok().map(|z| (g, z)))
            .collect();
        a
    }

    pub fn ane(&self) -> &BTreeMap<u64, f64> {
        &self.ane
    }

    pub fn labels(&self) -> &BTreeMap<u64, GroupLabel> {
        &self.labels
    }

    pub fn label(&self, district: u64) -> Option<GroupLabel> {
        self.labels.get(&district).copied()
    }

    pub fn thresholds(&self) -> (f64, f64) {
        self.thresholds
    }

    /// Zero shares computed by [`GroupAssignment::from_panel`]; empty after
    /// a bare [`assign_groups`].
    pub fn zero_shares(&self) -> &BTreeMap<GroupLabel, f64> {
        &self.zero_share
    }

    pub fn members(&self, label: GroupLabel) -> Vec<u64> {
        self.labels
            .iter()
            .filter(|(_, &l)| l == label)
            .map(|(&d, _)| d)
            .collect()
    }

    pub fn count(&self, label: GroupLabel) -> usize {
        self.labels.values().filter(|&&l| l == label).count()
    }
}

/// Mean NE over all months, per district.
pub fn compute_ane(dataset: &PanelDataset) -> BTreeMap<u64, f64> {
    let n = dataset.n_months() as f64;
    dataset
        .district_ids()
        .iter()
        .enumerate()
        .map(|(r, &d)| {
            let total: u64 = dataset.ne_series(r).iter().map(|&v| v as u64).sum();
            (d, total as f64 / n)
        })
        .collect()
}

/// ANE is an integer total over a positive month count, so `== lower` is
/// an exact test; the upper bound is inclusive for B.
pub fn assign_groups(ane: &BTreeMap<u64, f64>, thresholds: (f64, f64)) -> GroupAssignment {
    let (lower, upper) = thresholds;
    let labels = ane
        .iter()
        .map(|(&d, &v)| {
            let label = if v <= lower {
                GroupLabel::A
            } else if v <= upper {
                GroupLabel::B
            } else {
                GroupLabel::C
            };
            (d, label)
        })
        .collect();
    GroupAssignment {
        ane: ane.clone(),
        labels,
        thresholds,
        zero_share: BTreeMap::new(),
    }
}

/// Fraction of (district, month) cells with NE = 0 within one group.
pub fn zero_share(
    dataset: &PanelDataset,
    assignment: &GroupAssignment,
    label: GroupLabel,
) -> Result<f64> {
    let mut zeros = 0usize;
    let mut total = 0usize;
    for (r, &d) in dataset.district_ids().iter().enumerate() {
        if assignment.label(d) == Some(label) {
            let row = dataset.ne_series(r);
            zeros += row.iter().filter(|&&v| v == 0).count();
            total += row.len();
        }
    }
    if total == 0 {
        return Err(Error::EmptyGroup(label.to_string()));
    }
    Ok(zeros as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    /// The point-mass bin for ANE exactly 0.
    pub zero: bool,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Histogram of ANE: a dedicated exact-zero bin followed by uniform bins
/// `[k·w, (k+1)·w)` covering positive values up to the maximum.
pub fn ane_histogram(ane: &BTreeMap<u64, f64>, bin_width: f64) -> Result<Vec<HistogramBin>> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::InvalidConfig(format!("bin width {bin_width}")));
    }
    let zeros = ane.values().filter(|&&v| v == 0.0).count();
    let mut bins = vec![HistogramBin {
        zero: true,
        lower: 0.0,
        upper: 0.0,
        count: zeros,
    }];
    let max = ane.values().copied().fold(0.0, f64::max);
    if max > 0.0 {
        let n_bins = (max / bin_width).floor() as usize + 1;
        let mut counts = vec![0usize; n_bins];
        for &v in ane.values().filter(|&&v| v > 0.0) {
            counts[((v / bin_width).floor() as usize).min(n_bins - 1)] += 1;
        }
        bins.extend(counts.into_iter().enumerate().map(|(k, count)| HistogramBin {
            zero: false,
            lower: k as f64 * bin_width,
            upper: (k + 1) as f64 * bin_width,
            count,
        }));
    }
    Ok(bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::YearMonth;
    use ndarray::array;

    fn panel(ne: ndarray::Array2<u32>) -> PanelDataset {
        let ids = (1..=ne.nrows() as u64).collect();
        PanelDataset::new(ids, YearMonth { year: 2004, month: 1 }, ne, Default::default()).unwrap()
    }

    #[test]
    fn ane_values() {
        let p = panel(array![[1, 2, 3], [0, 0, 0]]);
        let ane = compute_ane(&p);
        assert_eq!(ane[&1], 2.0);
        assert_eq!(ane[&2], 0.0);
    }

    #[test]
    fn boundaries() {
        let ane: BTreeMap<u64, f64> = [(1, 0.0), (2, 2.0), (3, 2.0000001), (4, 1e-9)].into();
        let a = assign_groups(&ane, DEFAULT_THRESHOLDS);
        assert_eq!(a.label(1), Some(GroupLabel::A));
        assert_eq!(a.label(2), Some(GroupLabel::B));
        assert_eq!(a.label(3), Some(GroupLabel::C));
        assert_eq!(a.label(4), Some(GroupLabel::B));
    }

    #[test]
    fn zero_share_examples() {
        let p = panel(array![[0, 0, 3, 0], [0, 0, 0, 0]]);
        let a = GroupAssignment::from_panel(&p, DEFAULT_THRESHOLDS);
        assert_eq!(zero_share(&p, &a, GroupLabel::B).unwrap(), 0.75);
        assert_eq!(zero_share(&p, &a, GroupLabel::A).unwrap(), 1.0);
        assert!(zero_share(&p, &a, GroupLabel::C).is_err());
        assert_eq!(a.zero_shares().len(), 2);
    }

    #[test]
    fn histogram_zero_bin() {
        let ane: BTreeMap<u64, f64> = [(1, 0.0), (2, 0.5), (3, 0.5)].into();
        let h = ane_histogram(&ane, 1.0).unwrap();
        assert_eq!(h.len(), 2);
        assert!(h[0].zero && h[0].count == 1);
        assert_eq!((h[1].lower, h[1].upper, h[1].count), (0.0, 1.0, 2));

        let all_zero: BTreeMap<u64, f64> = [(1, 0.0), (2, 0.0)].into();
        let h = ane_histogram(&all_zero, 0.5).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h[0].count, 2);
        assert!(ane_histogram(&ane, 0.0).is_err());
    }

    #[test]
    fn histogram_edge_value_lands_in_last_bin() {
        let ane: BTreeMap<u64, f64> = [(1, 2.0), (2, 0.1)].into();
        let h = ane_histogram(&ane, 1.0).unwrap();
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 2);
        assert_eq!(h.last().unwrap().lower, 2.0);
    }

    #[test]
    fn labels_parse() {
        assert_eq!("B".parse::<GroupLabel>().unwrap(), GroupLabel::B);
        assert!("D".parse::<GroupLabel>().is_err());
    }
}
