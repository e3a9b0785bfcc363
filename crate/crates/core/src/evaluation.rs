//! Train/test tasks over whole calendar years, the model grid, and error
//! metrics.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::ops::Range;

use crate::decomposition::{mmane_series, MmaneSeries};
use crate::error::{Error, Result};
use crate::features::{assemble_variant, default_sid, FeatureMatrix, LaggedCode, Variant};
use crate::grouping::{GroupAssignment, GroupLabel};
use crate::models::{self, BoostingParams, ForestParams, ModelKind, ModelSpec};
use crate::panel::{slice_group, PanelDataset, YearMonth};
use crate::seed::{derive, label};
use crate::Execution;

const MONTHS_PER_YEAR: usize = 12;

/// One train/test split expressed as month-index ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    /// 1-based task number.
    pub task: usize,
    /// 0-based year indices relative to the panel start.
    pub train_years: Range<usize>,
    pub test_years: Range<usize>,
    pub train: Range<usize>,
    pub test: Range<usize>,
    pub train_start: YearMonth,
    pub test_start: YearMonth,
}

impl SplitPlan {
    pub fn name(&self) -> String {
        format!("T{}", self.task)
    }
}

/// Expanding-window tasks: task k trains on years 1..=k and tests on year
/// k+1; a final task trains on the second-to-last year alone and tests on the
/// last. With seven years this yields T1..T7.
pub fn make_splits(start: YearMonth, n_months: usize) -> Result<Vec<SplitPlan>> {
    let n_years = n_months / MONTHS_PER_YEAR;
    if n_years < 2 {
        return Err(Error::TooFewYears { needed: 2, months: n_months });
    }
    if n_months % MONTHS_PER_YEAR != 0 {
        return Err(Error::InvalidPanel(format!(
            "{n_months} months is not a whole number of years"
        )));
    }
    let plan = |task: usize, train_years: Range<usize>, test_years: Range<usize>| SplitPlan {
        task,
        train: train_years.start * 12..train_years.end * 12,
        test: test_years.start * 12..test_years.end * 12,
        train_start: start.plus_months(train_years.start * 12),
        test_start: start.plus_months(test_years.start * 12),
        train_years,
        test_years,
    };
    let mut splits: Vec<SplitPlan> = (1..n_years).map(|k| plan(k, 0..k, k..k + 1)).collect();
    if n_years >= 3 {
        splits.push(plan(n_years, n_years - 2..n_years - 1, n_years - 1..n_years));
    }
    Ok(splits)
}

fn check_lengths(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.len() != yhat.len() || y.is_empty() {
        return Err(Error::LengthMismatch(y.len(), yhat.len()));
    }
    Ok(())
}

pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_lengths(y, yhat)?;
    let total: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum();
    Ok(total / y.len() as f64)
}

pub fn mse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_lengths(y, yhat)?;
    let total: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(total / y.len() as f64)
}

/// Which districts the MMANE features average over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MmaneScope {
    /// The district's own group.
    #[default]
    Group,
    /// Every district in the panel.
    All,
}

impl std::str::FromStr for MmaneScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "group" => Ok(MmaneScope::Group),
            "all" => Ok(MmaneScope::All),
            other => Err(Error::InvalidConfig(format!("unknown mmane scope `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridConfig {
    pub groups: Vec<GroupLabel>,
    /// 1-based task numbers; `None` runs every task.
    pub tasks: Option<Vec<usize>>,
    pub variants: Vec<Variant>,
    pub sid: Vec<LaggedCode>,
    pub models: Vec<ModelSpec>,
    pub base_seed: u64,
    pub mmane_scope: MmaneScope,
    pub exec: Execution,
}

impl GridConfig {
    pub fn new(base_seed: u64) -> Self {
        GridConfig {
            groups: vec![GroupLabel::B, GroupLabel::C],
            tasks: None,
            variants: Variant::ALL.to_vec(),
            sid: default_sid(),
            models: default_models(),
            base_seed,
            mmane_scope: MmaneScope::Group,
            exec: Execution::default(),
        }
    }
}

/// LR, GB, RF and the zero baseline with default hyperparameters.
pub fn default_models() -> Vec<ModelSpec> {
    vec![
        ModelSpec::Linear,
        ModelSpec::GradientBoosting(BoostingParams::default()),
        ModelSpec::RandomForest(ForestParams::default()),
        ModelSpec::Zero,
    ]
}

/// Mean observed and predicted NE over the test districts in one month.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub month: usize,
    pub observed: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub group: GroupLabel,
    pub task: usize,
    pub variant: Variant,
    pub model: ModelKind,
    pub n_train: usize,
    pub n_test: usize,
    pub mae: f64,
    pub mse: f64,
    pub best_mae: bool,
    pub best_mse: bool,
    /// Forest models only.
    pub importances: Option<Vec<(String, f64)>>,
    pub trace: Vec<TracePoint>,
    /// Fingerprint of every learned parameter.
    pub fingerprint: u64,
}

impl GridResult {
    pub fn cell(&self) -> (GroupLabel, usize, Variant, ModelKind) {
        (self.group, self.task, self.variant, self.model)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellFailure {
    pub group: GroupLabel,
    pub task: usize,
    pub variant: Variant,
    pub model: Option<ModelKind>,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct GridOutcome {
    pub results: Vec<GridResult>,
    pub failures: Vec<CellFailure>,
}

impl fmt::Display for CellFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} T{} {}", self.group, self.task, self.variant)?;
        if let Some(m) = self.model {
            write!(f, " {m}")?;
        }
        write!(f, ": {}", self.message)
    }
}

/// Seed of one grid cell; independent of execution order.
pub fn cell_seed(base: u64, group: GroupLabel, task: usize, variant: Variant, model: ModelKind) -> u64 {
    derive(
        base,
        &[label(group.as_str()), task as u64, label(variant.as_str()), label(model.as_str())],
    )
}

/// Feature matrices of one group for every requested variant.
pub fn group_features(
    panel: &PanelDataset,
    assignment: &GroupAssignment,
    group: GroupLabel,
    variants: &[Variant],
    sid: &[LaggedCode],
    scope: MmaneScope,
) -> Result<Vec<FeatureMatrix>> {
    let sub = slice_group(panel, assignment, group)?;
    let mmane: MmaneSeries = match scope {
        MmaneScope::Group => {
            let mut m = mmane_series(&sub)?;
            m.group = Some(group);
            m
        }
        MmaneScope::All => mmane_series(panel)?,
    };
    variants
        .iter()
        .map(|&v| assemble_variant(&sub, &mmane, v, sid))
        .collect()
}

fn trace(test: &FeatureMatrix, predictions: &[f64]) -> Vec<TracePoint> {
    let mut by_month: BTreeMap<usize, (f64, f64, usize)> = BTreeMap::new();
    for (i, key) in test.keys.iter().enumerate() {
        let e = by_month.entry(key.month).or_insert((0.0, 0.0, 0));
        e.0 += test.target[i];
        e.1 += predictions[i];
        e.2 += 1;
    }
    by_month
        .into_iter()
        .map(|(month, (o, p, n))| TracePoint {
            month,
            observed: o / n as f64,
            predicted: p / n as f64,
        })
        .collect()
}

fn evaluate_cell(
    matrix: &FeatureMatrix,
    split: &SplitPlan,
    spec: &ModelSpec,
    seed: u64,
    exec: Execution,
) -> Result<GridResult> {
    let train = matrix.select_months(split.train.clone());
    let test = matrix.select_months(split.test.clone());
    if test.n_rows() == 0 {
        return Err(Error::InvalidPanel("no test rows".into()));
    }
    let model = models::fit(&spec.with_seed(seed), &train, exec)?;
    let predictions = models::predict(&model, &test)?;
    let importances = match model.kind {
        ModelKind::RandomForest => Some(models::feature_importances(&model)?),
        _ => None,
    };
    let result = GridResult {
        group: GroupLabel::A,
        task: split.task,
        variant: matrix.variant,
        model: model.kind,
        n_train: train.n_rows(),
        n_test: test.n_rows(),
        mae: mae(&test.target, &predictions)?,
        mse: mse(&test.target, &predictions)?,
        best_mae: false,
        best_mse: false,
        importances,
        trace: trace(&test, &predictions),
        fingerprint: model.fingerprint(),
    };
    Ok(result)
}

/// Fit and score every (group, task, variant, model) cell.
///
/// Cells run on `cfg.exec`; results are sorted by (group, task, variant,
/// model) and carry per-(group, task, variant) best flags, so the outcome is
/// identical for any degree of parallelism. Failing cells are reported in
/// `failures` instead of aborting the grid.
pub fn run_grid(panel: &PanelDataset, assignment: &GroupAssignment, cfg: &GridConfig) -> Result<GridOutcome> {
    for spec in &cfg.models {
        spec.validate()?;
    }
    let all_splits = make_splits(panel.start(), panel.n_months())?;
    let splits: Vec<SplitPlan> = match &cfg.tasks {
        None => all_splits,
        Some(tasks) => tasks
            .iter()
            .map(|&t| {
                all_splits
                    .iter()
                    .find(|s| s.task == t)
                    .cloned()
                    .ok_or_else(|| Error::InvalidConfig(format!("task T{t} does not exist for this panel")))
            })
            .collect::<Result<_>>()?,
    };
    for &g in &cfg.groups {
        if assignment.count(g) == 0 {
            return Err(Error::EmptyGroup(g.to_string()));
        }
    }

    cfg.exec.install(|| {
        let mut failures = Vec::new();
        let pairs: Vec<(GroupLabel, Variant)> = cfg
            .groups
            .iter()
            .flat_map(|&g| cfg.variants.iter().map(move |&v| (g, v)))
            .collect();
        let built = cfg.exec.map(pairs.len(), |i| {
            let (g, v) = pairs[i];
            group_features(panel, assignment, g, &[v], &cfg.sid, cfg.mmane_scope).map(|mut m| m.remove(0))
        });
        let mut matrices: Vec<(GroupLabel, FeatureMatrix)> = Vec::new();
        for ((g, v), b) in pairs.into_iter().zip(built) {
            match b {
                Ok(m) => matrices.push((g, m)),
                Err(e) => failures.extend(splits.iter().map(|s| CellFailure {
                    group: g,
                    task: s.task,
                    variant: v,
                    model: None,
                    message: e.to_string(),
                })),
            }
        }

        let mut cells = Vec::new();
        for (fi, (g, m)) in matrices.iter().enumerate() {
            for si in 0..splits.len() {
                for mi in 0..cfg.models.len() {
                    cells.push((fi, *g, m.variant, si, mi));
                }
            }
        }
        let evaluated = cfg.exec.map(cells.len(), |c| {
            let (fi, g, _, si, mi) = cells[c];
            let matrix = &matrices[fi].1;
            let split = &splits[si];
            let spec = &cfg.models[mi];
            let seed = cell_seed(cfg.base_seed, g, split.task, matrix.variant, spec.kind());
            evaluate_cell(matrix, split, spec, seed, cfg.exec).map(|mut r| {
                r.group = g;
                r
            })
        });

        let mut results = Vec::with_capacity(cells.len());
        for (c, outcome) in evaluated.into_iter().enumerate() {
            let (_, g, variant, si, mi) = cells[c];
            match outcome {
                Ok(r) => results.push(r),
                Err(e) => failures.push(CellFailure {
                    group: g,
                    task: splits[si].task,
                    variant,
                    model: Some(cfg.models[mi].kind()),
                    message: e.to_string(),
                }),
            }
        }
        results.sort_by_key(|r| r.cell());
        flag_best(&mut results);
        failures.sort_by(|a, b| (a.group, a.task, a.variant, a.model).cmp(&(b.group, b.task, b.variant, b.model)));
        Ok(GridOutcome { results, failures })
    })
}

/// Set best flags per (group, task, variant) and metric; ties are all flagged.
pub fn flag_best(results: &mut [GridResult]) {
    let mut best: BTreeMap<(GroupLabel, usize, Variant), (f64, f64)> = BTreeMap::new();
    for r in results.iter() {
        let e = best
            .entry((r.group, r.task, r.variant))
            .or_insert((f64::INFINITY, f64::INFINITY));
        e.0 = e.0.min(r.mae);
        e.1 = e.1.min(r.mse);
    }
    for r in results.iter_mut() {
        let (m, s) = best[&(r.group, r.task, r.variant)];
        r.best_mae = r.mae == m;
        r.best_mse = r.mse == s;
    }
}

const RESULT_HEADER: [&str; 10] = [
    "group", "task", "variant", "model", "n_train", "n_test", "mae", "mse", "best_mae", "best_mse",
];

/// Results as CSV, one row per cell, floats in shortest round-trip form.
pub fn write_results<W: Write>(results: &[GridResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RESULT_HEADER)?;
    for r in results {
        w.write_record([
            r.group.to_string(),
            format!("T{}", r.task),
            r.variant.to_string(),
            r.model.to_string(),
            r.n_train.to_string(),
            r.n_test.to_string(),
            r.mae.to_string(),
            r.mse.to_string(),
            (r.best_mae as u8).to_string(),
            (r.best_mse as u8).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// Inverse of [`write_results`]; importances and traces are not part of the
/// results file and come back empty.
pub fn read_results<R: Read>(reader: R) -> Result<Vec<GridResult>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    for h in RESULT_HEADER {
        if !headers.iter().any(|x| x == h) {
            return Err(Error::MissingColumn(h.to_string()));
        }
    }
    let idx = |name: &str| headers.iter().position(|h| h == name).unwrap_or(0);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let field = |name: &str| rec.get(idx(name)).unwrap_or("").to_string();
        let parse_err = |name: &str| Error::Parse {
            row,
            column: name.to_string(),
            value: field(name),
        };
        let num = |name: &str| field(name).parse::<f64>().map_err(|_| parse_err(name));
        let count = |name: &str| field(name).parse::<usize>().map_err(|_| parse_err(name));
        let flag = |name: &str| match field(name).as_str() {
            "1" => Ok(true),
            "0" => Ok(false),
            _ => Err(parse_err(name)),
        };
        let task = field("task")
            .strip_prefix('T')
            .and_then(|t| t.parse::<usize>().ok())
            .ok_or_else(|| parse_err("task"))?;
        out.push(GridResult {
            group: field("group").parse().map_err(|_| parse_err("group"))?,
            task,
            variant: field("variant").parse().map_err(|_| parse_err("variant"))?,
            model: field("model").parse().map_err(|_| parse_err("model"))?,
            n_train: count("n_train")?,
            n_test: count("n_test")?,
            mae: num("mae")?,
            mse: num("mse")?,
            best_mae: flag("best_mae")?,
            best_mse: flag("best_mse")?,
            importances: None,
            trace: Vec::new(),
            fingerprint: 0,
        });
    }
    Ok(out)
}

pub fn write_failures<W: Write>(failures: &[CellFailure], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["group", "task", "variant", "model", "error"])?;
    for f in failures {
        w.write_record([
            f.group.to_string(),
            format!("T{}", f.task),
            f.variant.to_string(),
            f.model.map(|m| m.to_string()).unwrap_or_default(),
            f.message.clone(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}
