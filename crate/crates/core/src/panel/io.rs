//! Long-format CSV reading and writing: one row per district-month.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{PanelDataset, YearMonth};
use crate::error::{Error, Result};

/// Which CSV columns hold which roles.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub district: String,
    pub year: String,
    pub month: String,
    pub ne: String,
    pub investments: InvestmentColumns,
    pub delimiter: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InvestmentColumns {
    /// Every header that looks like `A<k>` or `B<k>`.
    Detect,
    /// Explicit `(header, code)` pairs.
    Explicit(Vec<(String, String)>),
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            district: "district_id".into(),
            year: "year".into(),
            month: "month".into(),
            ne: "ne".into(),
            investments: InvestmentColumns::Detect,
            delimiter: b',',
        }
    }
}

/// True for codes of the form `A<digits>` / `B<digits>`.
pub(crate) fn is_investment_code(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some('A' | 'B'))
        && s.len() > 1
        && chars.all(|c| c.is_ascii_digit())
}

pub fn load_panel(path: impl AsRef<Path>, schema: &Schema) -> Result<PanelDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_panel(file, schema)
}

struct Cell {
    ne: u32,
    inv: Vec<f64>,
}

pub fn read_panel<R: Read>(reader: R, schema: &Schema) -> Result<PanelDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (c_d, c_y, c_m, c_ne) = (
        col(&schema.district)?,
        col(&schema.year)?,
        col(&schema.month)?,
        col(&schema.ne)?,
    );
    let inv_cols: Vec<(usize, String)> = match &schema.investments {
        InvestmentColumns::Detect => headers
            .iter()
            .enumerate()
            .filter(|(_, h)| is_investment_code(h))
            .map(|(i, h)| (i, h.to_string()))
            .collect(),
        InvestmentColumns::Explicit(pairs) => pairs
            .iter()
            .map(|(h, code)| Ok((col(h)?, code.clone())))
            .collect::<Result<_>>()?,
    };

    let mut cells: BTreeMap<u64, BTreeMap<i64, Cell>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| rec.get(i).unwrap_or("");
        let parse_err = |i: usize| Error::Parse {
            row,
            column: headers.get(i).unwrap_or("").to_string(),
            value: field(i).to_string(),
        };
        let district: u64 = field(c_d).parse().map_err(|_| parse_err(c_d))?;
        let year: i32 = field(c_y).parse().map_err(|_| parse_err(c_y))?;
        let month: u32 = field(c_m).parse().map_err(|_| parse_err(c_m))?;
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidMonth { row, month });
        }
        let ne: i64 = field(c_ne).parse().map_err(|_| parse_err(c_ne))?;
        if ne < 0 {
            return Err(Error::NegativeNe { row, value: ne });
        }
        let ne = u32::try_from(ne).map_err(|_| parse_err(c_ne))?;
        let mut inv = Vec::with_capacity(inv_cols.len());
        for (i, code) in &inv_cols {
            let v: f64 = field(*i).parse().map_err(|_| parse_err(*i))?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInvestment {
                    row,
                    code: code.clone(),
                    value: v,
                });
            }
            inv.push(v);
        }
        let ord = YearMonth { year, month }.ordinal();
        if cells
            .entry(district)
            .or_default()
            .insert(ord, Cell { ne, inv })
            .is_some()
        {
            return Err(Error::DuplicateCell {
                row,
                district,
                year,
                month,
            });
        }
    }

    if cells.is_empty() {
        return Err(Error::InvalidPanel("no data rows".into()));
    }
    let first = cells.values().filter_map(|m| m.keys().next()).min().copied().unwrap();
    let last = cells.values().filter_map(|m| m.keys().last()).max().copied().unwrap();
    let n_months = (last - first + 1) as usize;
    let ids: Vec<u64> = cells.keys().copied().collect();
    let mut ne = Array2::<u32>::zeros((ids.len(), n_months));
    let mut inv: Vec<Array2<f64>> = inv_cols
        .iter()
        .map(|_| Array2::zeros((ids.len(), n_months)))
        .collect();
    for (r, (&district, months)) in cells.iter().enumerate() {
        for t in 0..n_months {
            let ord = first + t as i64;
            let cell = months.get(&ord).ok_or_else(|| {
                let ym = YearMonth::from_ordinal(ord);
                Error::NonContiguous {
                    district,
                    year: ym.year,
                    month: ym.month,
                }
            })?;
            ne[[r, t]] = cell.ne;
            for (k, v) in cell.inv.iter().enumerate() {
                inv[k][[r, t]] = *v;
            }
        }
    }
    let mut investments = BTreeMap::new();
    for ((_, code), m) in inv_cols.into_iter().zip(inv) {
        if investments.insert(code.clone(), m).is_some() {
            return Err(Error::InvalidConfig(format!("investment code `{code}` mapped twice")));
        }
    }
    PanelDataset::new(ids, YearMonth::from_ordinal(first), ne, investments)
}

pub fn save_panel(path: impl AsRef<Path>, panel: &PanelDataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_panel(&mut w, panel)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes with the default schema's header names.
pub fn write_panel<W: Write>(writer: W, panel: &PanelDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let codes: Vec<&str> = panel.codes().collect();
    let mut header = vec!["district_id", "year", "month", "ne"];
    header.extend(codes.iter().copied());
    w.write_record(&header)?;
    let inv: Vec<&Array2<f64>> = panel.investments().values().collect();
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for (r, id) in panel.district_ids().iter().enumerate() {
        for t in 0..panel.n_months() {
            let ym = panel.month_at(t);
            record.clear();
            record.push(id.to_string());
            record.push(ym.year.to_string());
            record.push(ym.month.to_string());
            record.push(panel.ne()[[r, t]].to_string());
            record.extend(inv.iter().map(|m| m[[r, t]].to_string()));
            w.write_record(&record)?;
        }
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}
