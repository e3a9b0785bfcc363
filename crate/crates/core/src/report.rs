//! Result tables and plot-data series.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::decomposition::SeriesDecomposition;
use crate::error::{Error, Result};
use crate::evaluation::{GridResult, TracePoint};
use crate::features::Variant;
use crate::grouping::{GroupLabel, HistogramBin};
use crate::models::{top_importances, ModelKind};
use crate::panel::YearMonth;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableCell {
    pub value: f64,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub task: usize,
    pub variant: Variant,
    /// One cell per model in [`ReportTable::models`].
    pub mse: Vec<TableCell>,
    pub mae: Vec<TableCell>,
}

impl TableRow {
    pub fn name(&self) -> String {
        format!("T{}{}", self.task, self.variant)
    }
}

/// Rows T{task}V{variant}; MSE columns then MAE columns, one per model.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub group: GroupLabel,
    pub models: Vec<ModelKind>,
    pub rows: Vec<TableRow>,
}

/// Table of one group. Every (task, variant, model) combination that occurs
/// anywhere in the group's results must be present.
pub fn report_table(results: &[GridResult], group: GroupLabel) -> Result<ReportTable> {
    let mine: Vec<&GridResult> = results.iter().filter(|r| r.group == group).collect();
    if mine.is_empty() {
        return Err(Error::IncompleteGrid(format!("no results for group {group}")));
    }
    let tasks: BTreeSet<usize> = mine.iter().map(|r| r.task).collect();
    let variants: BTreeSet<Variant> = mine.iter().map(|r| r.variant).collect();
    let models: BTreeSet<ModelKind> = mine.iter().map(|r| r.model).collect();
    let index: BTreeMap<_, &GridResult> = mine.iter().map(|r| ((r.task, r.variant, r.model), *r)).collect();
    let mut rows = Vec::new();
    for &task in &tasks {
        for &variant in &variants {
            let mut mse = Vec::new();
            let mut mae = Vec::new();
            for &model in &models {
                let r = index.get(&(task, variant, model)).ok_or_else(|| {
                    Error::IncompleteGrid(format!("missing {group} T{task} {variant} {model}"))
                })?;
                mse.push(TableCell { value: r.mse, best: r.best_mse });
                mae.push(TableCell { value: r.mae, best: r.best_mae });
            }
            rows.push(TableRow { task, variant, mse, mae });
        }
    }
    Ok(ReportTable {
        group,
        models: models.into_iter().collect(),
        rows,
    })
}

impl ReportTable {
    fn header(&self) -> Vec<String> {
        let mut h = vec!["task".to_string()];
        h.extend(self.models.iter().map(|m| format!("mse_{m}")));
        h.extend(self.models.iter().map(|m| format!("mae_{m}")));
        h
    }

    /// CSV with the best models of each metric listed in `best_mse` /
    /// `best_mae` (`;`-separated).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = self.header();
        header.push("best_mse".into());
        header.push("best_mae".into());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.name()];
            rec.extend(row.mse.iter().map(|c| c.value.to_string()));
            rec.extend(row.mae.iter().map(|c| c.value.to_string()));
            let best = |cells: &[TableCell]| {
                cells
                    .iter()
                    .zip(&self.models)
                    .filter(|(c, _)| c.best)
                    .map(|(_, m)| m.to_string())
                    .collect::<Vec<_>>()
                    .join(";")
            };
            rec.push(best(&row.mse));
            rec.push(best(&row.mae));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<writer>", e))?;
        Ok(())
    }

    /// Fixed-width text; best cells carry a trailing `*`.
    pub fn to_text(&self) -> String {
        let header = self.header();
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|row| {
                let mut cells = vec![row.name()];
                for c in row.mse.iter().chain(&row.mae) {
                    cells.push(format!("{:.3}{}", c.value, if c.best { "*" } else { " " }));
                }
                cells
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|j| body.iter().map(|r| r[j].len()).chain([header[j].len()]).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let _ = writeln!(out, "group {}", self.group);
        let line = |cells: &[String], out: &mut String| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(j, (c, w))| if j == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&header, &mut out);
        for r in &body {
            line(r, &mut out);
        }
        out
    }
}

pub fn write_histogram<W: Write>(bins: &[HistogramBin], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["lower", "upper", "zero_bin", "count"])?;
    for b in bins {
        w.write_record([
            b.lower.to_string(),
            b.upper.to_string(),
            (b.zero as u8).to_string(),
            b.count.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// `month,observed,trend,seasonal,residual`; undefined values are empty.
pub fn write_components<W: Write>(decomp: &SeriesDecomposition, start: YearMonth, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["month", "observed", "trend", "seasonal", "residual"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for t in 0..decomp.observed.len() {
        w.write_record([
            start.plus_months(t).to_string(),
            decomp.observed[t].to_string(),
            opt(decomp.trend[t]),
            decomp.seasonal[t].to_string(),
            opt(decomp.residual[t]),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// Observed vs predicted monthly means for one (group, task, variant).
#[derive(Debug, Clone, PartialEq)]
pub struct Fig3Row {
    pub month: usize,
    pub observed: f64,
    /// Per fitted model, in model order.
    pub predicted: Vec<(ModelKind, f64)>,
}

pub fn prediction_traces(
    results: &[GridResult],
    group: GroupLabel,
    task: usize,
    variant: Variant,
) -> Result<Vec<Fig3Row>> {
    let cell: Vec<&GridResult> = results
        .iter()
        .filter(|r| r.group == group && r.task == task && r.variant == variant && r.model != ModelKind::Zero)
        .collect();
    let missing = || Error::MissingResult(format!("{group} T{task} {variant}"));
    if cell.is_empty() || cell.iter().any(|r| r.trace.is_empty()) {
        return Err(missing());
    }
    let months: Vec<(usize, f64)> = cell[0].trace.iter().map(|p| (p.month, p.observed)).collect();
    months
        .iter()
        .enumerate()
        .map(|(i, &(month, observed))| {
            let predicted = cell
                .iter()
                .map(|r| match r.trace.get(i) {
                    Some(p) if p.month == month => Ok((r.model, p.predicted)),
                    _ => Err(missing()),
                })
                .collect::<Result<_>>()?;
            Ok(Fig3Row { month, observed, predicted })
        })
        .collect()
}

pub fn write_traces_plot<W: Write>(rows: &[Fig3Row], start: YearMonth, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["month".to_string(), "observed_mean".to_string()];
    if let Some(first) = rows.first() {
        header.extend(first.predicted.iter().map(|(m, _)| m.to_string()));
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![start.plus_months(r.month).to_string(), r.observed.to_string()];
        rec.extend(r.predicted.iter().map(|(_, v)| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// Top-`k` forest importances of every task at `variant`, descending.
pub fn importance_bars(
    results: &[GridResult],
    group: GroupLabel,
    variant: Variant,
    k: usize,
) -> Result<Vec<(usize, String, f64)>> {
    let mut out = Vec::new();
    let mut found = false;
    for r in results
        .iter()
        .filter(|r| r.group == group && r.variant == variant && r.model == ModelKind::RandomForest)
    {
        let Some(imp) = &r.importances else { continue };
        found = true;
        out.extend(top_importances(imp, k).into_iter().map(|(f, v)| (r.task, f, v)));
    }
    if !found {
        return Err(Error::MissingResult(format!("{group} {variant} forest importances")));
    }
    Ok(out)
}

pub fn write_importance_bars<W: Write>(bars: &[(usize, String, f64)], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["task", "rank", "feature", "importance"])?;
    let mut rank = 0;
    let mut last_task = None;
    for (task, feature, value) in bars {
        if last_task != Some(*task) {
            rank = 0;
            last_task = Some(*task);
        }
        rank += 1;
        w.write_record([format!("T{task}"), rank.to_string(), feature.clone(), value.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// Every trace point of every result: `group,task,variant,model,month,observed,predicted`.
pub fn write_traces<W: Write>(results: &[GridResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["group", "task", "variant", "model", "month_index", "observed", "predicted"])?;
    for r in results {
        for p in &r.trace {
            w.write_record([
                r.group.to_string(),
                format!("T{}", r.task),
                r.variant.to_string(),
                r.model.to_string(),
                p.month.to_string(),
                p.observed.to_string(),
                p.predicted.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// Every forest importance: `group,task,variant,feature,importance`.
pub fn write_importances<W: Write>(results: &[GridResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["group", "task", "variant", "feature", "importance"])?;
    for r in results {
        for (f, v) in r.importances.iter().flatten() {
            w.write_record([
                r.group.to_string(),
                format!("T{}", r.task),
                r.variant.to_string(),
                f.clone(),
                v.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

type CellKey = (GroupLabel, usize, Variant);

fn parse_task(s: &str, row: usize) -> Result<usize> {
    s.strip_prefix('T')
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse { row, column: "task".into(), value: s.into() })
}

fn parse_field<T: std::str::FromStr>(s: &str, row: usize, column: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        row,
        column: column.into(),
        value: s.into(),
    })
}

fn records<R: Read>(reader: R, header: &[&str]) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let h = rdr.headers()?.clone();
    let idx: Vec<usize> = header
        .iter()
        .map(|name| h.iter().position(|x| x == *name).ok_or_else(|| Error::MissingColumn(name.to_string())))
        .collect::<Result<_>>()?;
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            Ok((i + 2, idx.iter().map(|&j| rec.get(j).unwrap_or("").to_string()).collect()))
        })
        .collect()
}

/// Inverse of [`write_traces`].
pub fn read_traces<R: Read>(reader: R) -> Result<BTreeMap<(CellKey, ModelKind), Vec<TracePoint>>> {
    let mut out: BTreeMap<_, Vec<TracePoint>> = BTreeMap::new();
    let cols = ["group", "task", "variant", "model", "month_index", "observed", "predicted"];
    for (row, f) in records(reader, &cols)? {
        let key = (
            (parse_field(&f[0], row, "group")?, parse_task(&f[1], row)?, parse_field(&f[2], row, "variant")?),
            parse_field(&f[3], row, "model")?,
        );
        out.entry(key).or_default().push(TracePoint {
            month: parse_field(&f[4], row, "month_index")?,
            observed: parse_field(&f[5], row, "observed")?,
            predicted: parse_field(&f[6], row, "predicted")?,
        });
    }
    Ok(out)
}

/// Inverse of [`write_importances`].
pub fn read_importances<R: Read>(reader: R) -> Result<BTreeMap<CellKey, Vec<(String, f64)>>> {
    let mut out: BTreeMap<_, Vec<(String, f64)>> = BTreeMap::new();
    for (row, f) in records(reader, &["group", "task", "variant", "feature", "importance"])? {
        let key = (parse_field(&f[0], row, "group")?, parse_task(&f[1], row)?, parse_field(&f[2], row, "variant")?);
        out.entry(key)
            .or_default()
            .push((f[3].clone(), parse_field(&f[4], row, "importance")?));
    }
    Ok(out)
}

/// Re-attach traces and importances read from disk to parsed results.
pub fn attach_details(
    results: &mut [GridResult],
    traces: &BTreeMap<(CellKey, ModelKind), Vec<TracePoint>>,
    importances: &BTreeMap<CellKey, Vec<(String, f64)>>,
) {
    for r in results.iter_mut() {
        let key = (r.group, r.task, r.variant);
        if let Some(t) = traces.get(&(key, r.model)) {
            r.trace = t.clone();
        }
        if r.model == ModelKind::RandomForest {
            r.importances = importances.get(&key).cloned();
        }
    }
}
