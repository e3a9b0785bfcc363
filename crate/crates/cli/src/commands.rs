use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use eventcast_core::decomposition::{
    classical_decompose, decomposition_mae, mmane_series, stl_decompose, Method, StlParams, PERIOD,
};
use eventcast_core::evaluation::{self, GridConfig, MmaneScope};
use eventcast_core::features::{assemble_variant, LaggedCode};
use eventcast_core::grouping::{ane_histogram, zero_share, GroupAssignment, GroupLabel};
use eventcast_core::models::{BoostingParams, ForestParams, ModelKind, ModelSpec};
use eventcast_core::panel::{
    generate_synthetic, load_panel, save_panel, slice_group, PanelDataset, PlantedSignal, Schema, SynthConfig,
};
use eventcast_core::report;
use eventcast_core::screening::{group_mean_investments, screen_lags};
use eventcast_core::Execution;

use crate::{
    Cmd, DecomposeArgs, FeatureSetArgs, FeaturesArgs, GroupArgs, GroupingArgs, ModelArgs, PlotdataArgs, RunArgs,
    ScreenArgs, SynthArgs,
};

pub fn dispatch(cmd: Cmd) -> Result<ExitCode> {
    match cmd {
        Cmd::Synth(a) => synth(a),
        Cmd::Group(a) => group(a),
        Cmd::Decompose(a) => decompose(a),
        Cmd::Screen(a) => screen(a),
        Cmd::Features(a) => features(a),
        Cmd::Run(a) => run(a),
        Cmd::Plotdata(a) => plotdata(a),
    }
    .map(|ok| if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn load(path: &Path) -> Result<PanelDataset> {
    load_panel(path, &Schema::default()).with_context(|| format!("loading panel {}", path.display()))
}

fn assignment(panel: &PanelDataset, g: &GroupingArgs) -> Result<GroupAssignment> {
    if !(g.ane_low >= 0.0 && g.ane_high > g.ane_low) {
        bail!("group thresholds must satisfy 0 <= ane-low < ane-high");
    }
    Ok(GroupAssignment::from_panel(panel, (g.ane_low, g.ane_high)))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn out_file(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    let p = dir.join(name);
    let w = create(&p)?;
    Ok((p, w))
}

fn synth(a: SynthArgs) -> Result<bool> {
    let mut cfg = SynthConfig {
        seed: a.seed,
        n_districts: a.districts,
        n_months: a.months,
        start: a.start,
        ..SynthConfig::default()
    };
    macro_rules! set {
        ($($field:ident <- $arg:expr),*) => { $(if let Some(v) = $arg { cfg.$field = v; })* };
    }
    set!(
        silent_fraction <- a.silent_fraction,
        base_log_rate <- a.base_log_rate,
        district_spread <- a.district_spread,
        trend_slope <- a.trend_slope,
        seasonal_amplitude <- a.seasonal_amplitude,
        investment_codes <- a.codes,
        investment_rate <- a.investment_rate,
        investment_shock <- a.investment_shock
    );
    if let Some(plants) = a.plant {
        cfg.planted_signals = plants
            .iter()
            .map(|p| {
                let (lagged, coef) = p
                    .split_once('=')
                    .ok_or_else(|| anyhow!("planted signal `{p}` is not CODE-LAG=COEFFICIENT"))?;
                let lagged: LaggedCode = lagged.parse()?;
                Ok(PlantedSignal {
                    code: lagged.code,
                    lag: lagged.lag,
                    coefficient: coef.trim().parse().with_context(|| format!("coefficient in `{p}`"))?,
                })
            })
            .collect::<Result<_>>()?;
    }
    let panel = generate_synthetic(&cfg)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    save_panel(&a.out, &panel)?;
    println!(
        "wrote {} ({} districts x {} months)",
        a.out.display(),
        panel.n_districts(),
        panel.n_months()
    );
    Ok(true)
}

fn group(a: GroupArgs) -> Result<bool> {
    let panel = load(&a.input)?;
    let asg = assignment(&panel, &a.grouping)?;

    let (p, mut w) = out_file(&a.out_dir, "assignment.csv")?;
    writeln!(w, "district_id,ane,group")?;
    for (id, ane) in asg.ane() {
        writeln!(w, "{id},{ane},{}", asg.labels()[id])?;
    }
    w.flush()?;
    println!("wrote {}", p.display());

    let (p, mut w) = out_file(&a.out_dir, "group_summary.csv")?;
    writeln!(w, "group,n_districts,zero_share,mean_ane")?;
    for g in GroupLabel::ALL {
        let members = asg.members(g);
        if members.is_empty() {
            writeln!(w, "{g},0,,")?;
            continue;
        }
        let share = zero_share(&panel, &asg, g)?;
        let mean = members.iter().map(|d| asg.ane()[d]).sum::<f64>() / members.len() as f64;
        writeln!(w, "{g},{},{share},{mean}", members.len())?;
    }
    w.flush()?;
    println!("wrote {}", p.display());

    let (p, w) = out_file(&a.out_dir, "ane_histogram.csv")?;
    report::write_histogram(&ane_histogram(asg.ane(), a.bin_width)?, w)?;
    println!("wrote {}", p.display());
    Ok(true)
}

fn stl_params(a: &crate::StlArgs) -> StlParams {
    StlParams {
        period: PERIOD,
        seasonal_span: a.stl_seasonal,
        trend_span: a.stl_trend,
        low_pass_span: a.stl_low_pass,
        inner_iterations: a.stl_inner,
        outer_iterations: a.stl_outer,
    }
}

fn decompose(a: DecomposeArgs) -> Result<bool> {
    let panel = load(&a.input)?;
    let asg = assignment(&panel, &a.grouping)?;
    let params = stl_params(&a.stl);
    params.validate()?;

    let mut summary = Vec::new();
    for &g in &a.groups {
        let sub = slice_group(&panel, &asg, g)?;
        let series = mmane_series(&sub)?;
        let mut maes = Vec::new();
        for &m in &a.methods {
            let d = match m {
                Method::Stl => stl_decompose(&series, &params),
                _ => classical_decompose(&series, m, PERIOD),
            };
            match d {
                Ok(d) => {
                    let (p, w) = out_file(&a.out_dir, &format!("components_{g}_{m}.csv"))?;
                    report::write_components(&d, panel.start(), w)?;
                    println!("wrote {}", p.display());
                    maes.push((m, Some(decomposition_mae(&d))));
                }
                Err(e) => {
                    eprintln!("warning: group {g}, {m}: {e}");
                    maes.push((m, None));
                }
            }
        }
        summary.push((g, series.mean(), maes));
    }

    let (p, mut w) = out_file(&a.out_dir, "decomposition_mae.csv")?;
    let header: Vec<String> = a.methods.iter().map(|m| format!("mae_{m}")).collect();
    writeln!(w, "group,avg_mmane,{}", header.join(","))?;
    for (g, mean, maes) in summary {
        let cells: Vec<String> = maes
            .iter()
            .map(|(_, v)| v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into()))
            .collect();
        writeln!(w, "{g},{mean},{}", cells.join(","))?;
    }
    w.flush()?;
    println!("wrote {}", p.display());
    Ok(true)
}

fn screen(a: ScreenArgs) -> Result<bool> {
    let panel = load(&a.input)?;
    let asg = assignment(&panel, &a.grouping)?;
    let codes: Vec<String> = match a.codes {
        Some(c) => c,
        None => panel.codes().map(str::to_string).collect(),
    };
    let (p, mut w) = out_file(&a.out_dir, "screening.csv")?;
    writeln!(w, "group,rank,code,lag,baseline_mae,model_mae,pct_gain,decomposition_mae")?;
    for &g in &a.groups {
        let sub = slice_group(&panel, &asg, g)?;
        let decomp = classical_decompose(&mmane_series(&sub)?, Method::Additive, PERIOD)?;
        let result = screen_lags(
            &decomp.residual,
            &group_mean_investments(&sub),
            &codes,
            1..=a.max_lag,
            Execution::default(),
        )
        .with_context(|| format!("screening group {g}"))?;
        let entries = match a.top {
            Some(k) => result.top(k),
            None => &result.ranking[..],
        };
        for (i, e) in entries.iter().enumerate() {
            writeln!(
                w,
                "{g},{},{},{},{},{},{},{}",
                i + 1,
                e.code,
                e.lag,
                result.baseline_mae,
                e.model_mae,
                e.pct_gain,
                result.decomposition_mae
            )?;
        }
    }
    w.flush()?;
    println!("wrote {}", p.display());
    Ok(true)
}

fn group_mmane(panel: &PanelDataset, sub: &PanelDataset, scope: MmaneScope) -> Result<eventcast_core::decomposition::MmaneSeries> {
    Ok(match scope {
        MmaneScope::Group => mmane_series(sub)?,
        MmaneScope::All => mmane_series(panel)?,
    })
}

fn features(a: FeaturesArgs) -> Result<bool> {
    let panel = load(&a.input)?;
    let asg = assignment(&panel, &a.grouping)?;
    let sub = slice_group(&panel, &asg, a.group)?;
    let mmane = group_mmane(&panel, &sub, a.features.mmane_scope)?;
    let fm = assemble_variant(&sub, &mmane, a.variant, &a.features.sid)?;
    fm.write_csv(create(&a.out)?)?;
    println!("wrote {} ({} rows x {} features)", a.out.display(), fm.n_rows(), fm.n_cols());
    Ok(true)
}

fn depth(d: usize) -> Option<usize> {
    (d > 0).then_some(d)
}

fn model_specs(kinds: &[ModelKind], m: &ModelArgs) -> Vec<ModelSpec> {
    let forest = ForestParams {
        n_trees: m.rf_trees,
        max_depth: depth(m.rf_max_depth),
        min_samples_leaf: m.rf_min_leaf,
        bootstrap: m.rf_bootstrap,
        max_features: m.rf_max_features,
        seed: 0,
    };
    let boosting = BoostingParams {
        n_stages: m.gb_stages,
        learning_rate: m.gb_learning_rate,
        max_depth: depth(m.gb_max_depth),
        min_samples_leaf: m.gb_min_leaf,
        seed: 0,
    };
    let mut kinds = kinds.to_vec();
    kinds.sort();
    kinds.dedup();
    kinds
        .into_iter()
        .map(|k| match k {
            ModelKind::Linear => ModelSpec::Linear,
            ModelKind::GradientBoosting => ModelSpec::GradientBoosting(boosting),
            ModelKind::RandomForest => ModelSpec::RandomForest(forest),
            ModelKind::Zero => ModelSpec::Zero,
        })
        .collect()
}

fn parse_task(s: &str) -> Result<usize> {
    s.trim()
        .trim_start_matches(['T', 't'])
        .parse()
        .map_err(|_| anyhow!("task `{s}` is not of the form T<n>"))
}

fn grid_config(a: &RunArgs, fs: &FeatureSetArgs) -> Result<GridConfig> {
    let mut cfg = GridConfig::new(a.seed);
    cfg.groups = a.groups.clone();
    cfg.tasks = a
        .tasks
        .as_ref()
        .map(|ts| ts.iter().map(|t| parse_task(t)).collect::<Result<Vec<_>>>())
        .transpose()?;
    cfg.variants = a.variants.clone();
    cfg.sid = fs.sid.clone();
    cfg.mmane_scope = fs.mmane_scope;
    cfg.models = model_specs(&a.models, &a.model);
    cfg.exec = Execution::from_jobs(a.jobs);
    Ok(cfg)
}

fn run(a: RunArgs) -> Result<bool> {
    let panel = load(&a.input)?;
    let asg = assignment(&panel, &a.grouping)?;
    let cfg = grid_config(&a, &a.features)?;
    let outcome = evaluation::run_grid(&panel, &asg, &cfg)?;
    let dir = &a.out_dir;

    let (p, w) = out_file(dir, "results.csv")?;
    evaluation::write_results(&outcome.results, w)?;
    println!("wrote {} ({} rows)", p.display(), outcome.results.len());
    let (_, w) = out_file(dir, "traces.csv")?;
    report::write_traces(&outcome.results, w)?;
    let (_, w) = out_file(dir, "importances.csv")?;
    report::write_importances(&outcome.results, w)?;
    let (p, w) = out_file(dir, "errors.csv")?;
    evaluation::write_failures(&outcome.failures, w)?;

    for &g in &cfg.groups {
        match report::report_table(&outcome.results, g) {
            Ok(table) => {
                let (_, w) = out_file(dir, &format!("table_{g}.csv"))?;
                table.write_csv(w)?;
                let (_, mut w) = out_file(dir, &format!("table_{g}.txt"))?;
                w.write_all(table.to_text().as_bytes())?;
                w.flush()?;
            }
            Err(e) => eprintln!("warning: no table for group {g}: {e}"),
        }
    }
    if outcome.failures.is_empty() {
        return Ok(true);
    }
    for f in &outcome.failures {
        eprintln!("cell failed: {f}");
    }
    eprintln!("{} cell(s) failed; see {}", outcome.failures.len(), p.display());
    Ok(false)
}

fn plotdata(a: PlotdataArgs) -> Result<bool> {
    let panel = load(&a.input)?;
    let asg = assignment(&panel, &a.grouping)?;
    let dir = &a.out_dir;

    let (p, w) = out_file(dir, "fig1_ane_histogram.csv")?;
    report::write_histogram(&ane_histogram(asg.ane(), a.bin_width)?, w)?;
    println!("wrote {}", p.display());
    for &g in &a.groups {
        let sub = slice_group(&panel, &asg, g)?;
        let d = classical_decompose(&mmane_series(&sub)?, Method::Additive, PERIOD)?;
        let (p, w) = out_file(dir, &format!("fig2_components_{g}.csv"))?;
        report::write_components(&d, panel.start(), w)?;
        println!("wrote {}", p.display());
    }

    let Some(rdir) = &a.results_dir else {
        return Ok(true);
    };
    let open = |name: &str| {
        let p = rdir.join(name);
        File::open(&p).with_context(|| format!("opening {}", p.display()))
    };
    let mut results = evaluation::read_results(open("results.csv")?)?;
    let traces = report::read_traces(open("traces.csv")?)?;
    let importances = report::read_importances(open("importances.csv")?)?;
    report::attach_details(&mut results, &traces, &importances);

    let task = parse_task(&a.trace_task)?;
    for &g in &a.groups {
        let rows = report::prediction_traces(&results, g, task, a.trace_variant)?;
        let (p, w) = out_file(dir, &format!("fig3_traces_{g}_T{task}{}.csv", a.trace_variant))?;
        report::write_traces_plot(&rows, panel.start(), w)?;
        println!("wrote {}", p.display());

        let bars = report::importance_bars(&results, g, a.importance_variant, a.top)?;
        let (p, w) = out_file(dir, &format!("fig4_importance_{g}_{}.csv", a.importance_variant))?;
        report::write_importance_bars(&bars, w)?;
        println!("wrote {}", p.display());
    }
    Ok(true)
}
