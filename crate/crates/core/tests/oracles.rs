mod common;

use common::*;
use eventcast_core::decomposition::{
    classical_decompose_values, robustness_weights, stl_decompose_values, Method, StlParams,
};
use eventcast_core::evaluation::{mae, mse};
use eventcast_core::features::{assemble_variant, build_dl, build_tri, LaggedCode, Variant};
use eventcast_core::decomposition::mmane_series;
use eventcast_core::grouping::{ane_histogram, compute_ane};
use eventcast_core::loess::loess_smooth;
use eventcast_core::models::{
    fit_tree, BoostingParams, GradientBoosting, LinearRegression, Node, RegressionTree, TreeParams,
};
use eventcast_core::screening::screen_lags;
use eventcast_core::Execution;
use rand::Rng;
use std::collections::BTreeMap;

#[test]
fn linear_regression_matches_normal_equations() {
    for seed in 0..50 {
        let mut g = rng(seed);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..5).map(|_| g.random_range(-3.0..3.0)).collect())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| 0.7 - 1.3 * r[0] + 2.0 * r[2] + 0.4 * r[4] + g.random_range(-0.5..0.5))
            .collect();
        let lr = LinearRegression::fit(&to_array(&rows), &y).unwrap();
        let (b0, b) = ols_normal_equations(&rows, &y);
        assert!((lr.intercept - b0).abs() < 1e-8, "seed {seed}: {} vs {b0}", lr.intercept);
        for (a, o) in lr.coefficients.iter().zip(&b) {
            assert!((a - o).abs() < 1e-8, "seed {seed}: {a} vs {o}");
        }
    }
}

#[test]
fn cart_root_split_matches_brute_force() {
    let mut checked = 0;
    let mut seed = 0;
    while checked < 20 {
        seed += 1;
        let mut g = rng(1000 + seed);
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|_| vec![g.random_range(0..6) as f64, g.random_range(-2.0..2.0)])
            .collect();
        let y: Vec<f64> = (0..12).map(|_| g.random_range(0.0..10.0)).collect();
        let gains = split_gains(&rows, &y);
        if gains.len() > 1 && (gains[0] - gains[1]).abs() <= 1e-9 * gains[0] {
            continue;
        }
        let oracle = brute_force_split(&rows, &y, 1).unwrap();
        let tree = fit_tree(&to_array(&rows), &y, TreeParams::default());
        match *tree.root() {
            Node::Split { feature, threshold, gain, .. } => {
                assert_eq!(feature, oracle.0, "seed {seed}");
                assert!((threshold - oracle.1).abs() < 1e-12, "seed {seed}: {threshold} vs {}", oracle.1);
                assert!((gain - oracle.2).abs() < 1e-9 * oracle.2.max(1.0));
            }
            Node::Leaf { .. } => panic!("seed {seed}: no split"),
        }
        checked += 1;
    }
}

#[test]
fn cart_respects_min_samples_leaf() {
    let mut g = rng(77);
    let rows: Vec<Vec<f64>> = (0..40).map(|_| vec![g.random_range(0.0..1.0)]).collect();
    let y: Vec<f64> = rows.iter().map(|r| if r[0] > 0.95 { 100.0 } else { 0.0 }).collect();
    let tree = RegressionTree::fit(&to_array(&rows), &y, TreeParams { max_depth: None, min_samples_leaf: 5 });
    for n in tree.nodes() {
        if let Node::Leaf { n_samples, .. } = n {
            assert!(*n_samples >= 5);
        }
    }
    let oracle = brute_force_split(&rows, &y, 5).unwrap();
    if let Node::Split { threshold, .. } = *tree.root() {
        assert!((threshold - oracle.1).abs() < 1e-12);
    }
}

#[test]
fn boosting_loss_matches_recomputed_mse() {
    let mut g = rng(5);
    let rows: Vec<Vec<f64>> = (0..60).map(|_| vec![g.random_range(0.0..1.0), g.random_range(0.0..1.0)]).collect();
    let y: Vec<f64> = rows.iter().map(|r| (6.0 * r[0]).sin() + r[1]).collect();
    let x = to_array(&rows);
    let params = BoostingParams { n_stages: 20, ..BoostingParams::default() };
    let gb = GradientBoosting::fit(&x, &y, &params);
    let preds: Vec<f64> = rows.iter().map(|r| gb.predict_row(r)).collect();
    let direct: f64 = y.iter().zip(&preds).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64;
    let last = *gb.train_loss().last().unwrap();
    assert!((direct - last).abs() < 1e-12 * direct.max(1.0), "{direct} vs {last}");
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    assert!((gb.init() - mean).abs() < 1e-15);
}

#[test]
fn loess_full_span_matches_weighted_normal_equations() {
    for seed in 0..20 {
        let mut g = rng(200 + seed);
        let mut x: Vec<f64> = (0..20).map(|_| g.random_range(0.0..10.0)).collect();
        x.sort_by(f64::total_cmp);
        x.dedup();
        let y: Vec<f64> = x.iter().map(|_| g.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = x.iter().map(|_| g.random_range(0.2..1.0)).collect();
        let got = loess_smooth(&x, &y, x.len(), 1, Some(&w)).unwrap();
        let want = full_span_loess(&x, &y, &w);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-8, "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn stl_outlier_weights_match_hand_bisquare() {
    let y: Vec<f64> = (0..84)
        .map(|t| {
            let base = 5.0 + 0.02 * t as f64 + (t as f64 * std::f64::consts::PI / 6.0).sin();
            if t == 40 { base * 10.0 } else { base }
        })
        .collect();
    let d = stl_decompose_values(&y, &StlParams::default()).unwrap();
    let w = d.robustness_weights.clone().unwrap();
    // The final weights come from the residuals of the fit that preceded the
    // last pass; recompute them from the same fit by hand.
    let fit: Vec<f64> = (0..84).map(|t| d.trend[t].unwrap() + d.seasonal[t]).collect();
    let again = robustness_weights(&y, &fit);
    let r: Vec<f64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
    let h = 6.0 * median(&r.iter().map(|v| v.abs()).collect::<Vec<_>>());
    for (t, &ri) in r.iter().enumerate() {
        assert!((again[t] - bisquare(ri, h)).abs() < 1e-12);
    }
    assert!(w[40] < 0.1, "outlier weight {}", w[40]);
    assert!(median(&w) > 0.9);
}

#[test]
fn classical_additive_recovers_analytic_components() {
    let s = [1.5, 0.8, -0.3, -1.2, -2.0, -0.5, 0.4, 1.1, 0.9, -0.2, -0.6, 0.1];
    let mean: f64 = s.iter().sum::<f64>() / 12.0;
    let s: Vec<f64> = s.iter().map(|v| v - mean).collect();
    let y: Vec<f64> = (0..60).map(|t| 3.0 + 0.1 * t as f64 + s[t % 12]).collect();
    let d = classical_decompose_values(&y, Method::Additive, 12).unwrap();
    for (i, v) in d.seasonal_indices().iter().enumerate() {
        assert!((v - s[i]).abs() < 1e-9);
    }
    for t in d.defined_months() {
        assert!(d.residual[t].unwrap().abs() < 1e-9);
        assert!((d.trend[t].unwrap() - (3.0 + 0.1 * t as f64)).abs() < 1e-9);
    }
    assert_eq!(d.defined_months().count(), 48);
}

#[test]
fn metrics_match_elementwise_loop() {
    let mut g = rng(9);
    for _ in 0..20 {
        let n = g.random_range(1..50);
        let y: Vec<f64> = (0..n).map(|_| g.random_range(-5.0..5.0)).collect();
        let p: Vec<f64> = (0..n).map(|_| g.random_range(-5.0..5.0)).collect();
        let (mut a, mut s) = (0.0, 0.0);
        for i in 0..n {
            a += (y[i] - p[i]).abs();
            s += (y[i] - p[i]) * (y[i] - p[i]);
        }
        assert!((mae(&y, &p).unwrap() - a / n as f64).abs() < 1e-12);
        assert!((mse(&y, &p).unwrap() - s / n as f64).abs() < 1e-12);
    }
}

#[test]
fn distributed_lags_are_direct_lookups() {
    let panel = random_panel(3, 8, 36, &["A6", "B9"]);
    let inv = panel.investment("A6").unwrap();
    let mut g = rng(4);
    for _ in 0..20 {
        let d = g.random_range(0..8);
        let t = g.random_range(0..36);
        let id = panel.district_ids()[d];
        let got = build_dl(&panel, "A6", id, t, [4]).unwrap();
        let want = if t >= 4 { inv[[d, t - 4]] } else { 0.0 };
        assert_eq!(got, vec![("A6-4".to_string(), want)]);
    }
}

#[test]
fn tri_trailing_means_by_hand() {
    let panel = random_panel(8, 5, 30, &[]);
    let mmane = mmane_series(&panel).unwrap();
    let id = panel.district_ids()[2];
    for t in [0usize, 1, 5, 13, 29] {
        let tri: BTreeMap<String, f64> = build_tri(&panel, &mmane, id, t).unwrap().into_iter().collect();
        let m = |k: isize| if t as isize - k >= 0 { mmane.values[t - k as usize] } else { 0.0 };
        for k in [1, 3, 6, 12] {
            let want: f64 = (1..=k).map(|j| m(j)).sum::<f64>() / k as f64;
            assert!((tri[&format!("mmane_mean_{k}")] - want).abs() < 1e-12, "t={t} k={k}");
        }
        assert!((tri["mmane_trend_3"] - (m(3) - m(1))).abs() < 1e-12);
        for lag in 1..=12usize {
            let want = if t >= lag { panel.ne()[[2, t - lag]] as f64 } else { 0.0 };
            assert_eq!(tri[&format!("NE_lag_{lag}")], want);
        }
    }
}

#[test]
fn variant_matrix_rows_match_direct_builders() {
    let panel = random_panel(21, 6, 24, &["A2", "A6", "B9"]);
    let mmane = mmane_series(&panel).unwrap();
    let sid = vec![LaggedCode::new("A6", 6), LaggedCode::new("B9", 4)];
    let fm = assemble_variant(&panel, &mmane, Variant::V5, &sid).unwrap();
    assert_eq!(fm.n_rows(), 6 * 24);
    for (i, key) in fm.keys.iter().enumerate().step_by(7) {
        let tri = build_tri(&panel, &mmane, key.district, key.month).unwrap();
        for (name, v) in tri {
            assert_eq!(fm.values[[i, fm.column_index(&name).unwrap()]], v, "{name}");
        }
        let a6 = build_dl(&panel, "A6", key.district, key.month, [6]).unwrap();
        assert_eq!(fm.values[[i, fm.column_index("A6-6").unwrap()]], a6[0].1);
        let a2 = build_dl(&panel, "A2", key.district, key.month, [12]).unwrap();
        assert_eq!(fm.values[[i, fm.column_index("A2_lag_12").unwrap()]], a2[0].1);
        assert_eq!(fm.values[[i, fm.column_index("district_id").unwrap()]], key.district as f64);
        let d = panel.district_index(key.district).unwrap();
        assert_eq!(fm.target[i], panel.ne()[[d, key.month]] as f64);
    }
}

#[test]
fn screening_matches_exhaustive_simple_regressions() {
    let mut g = rng(12);
    let n = 84;
    let mut inv = BTreeMap::new();
    for code in ["A3", "A6", "B9"] {
        inv.insert(code.to_string(), (0..n).map(|_| g.random_range(0.0..2.0)).collect::<Vec<f64>>());
    }
    let a6 = inv["A6"].clone();
    let residual: Vec<Option<f64>> = (0..n)
        .map(|t| {
            if !(6..n - 6).contains(&t) {
                return None;
            }
            Some(0.5 * a6[t - 6] + g.random_range(-0.05..0.05))
        })
        .collect();
    let codes: Vec<String> = inv.keys().cloned().collect();
    let res = screen_lags(&residual, &inv, &codes, 1..=12, Execution::Sequential).unwrap();
    let months: Vec<usize> = (12..n).filter(|&t| residual[t].is_some()).collect();
    let r: Vec<f64> = months.iter().map(|&t| residual[t].unwrap()).collect();
    let mut oracle: Vec<(f64, String, usize)> = Vec::new();
    for code in &codes {
        for lag in 1..=12 {
            let x: Vec<f64> = months.iter().map(|&t| inv[code][t - lag]).collect();
            oracle.push((simple_regression_mae(&r, &x), code.clone(), lag));
        }
    }
    oracle.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    assert_eq!(res.ranking.len(), oracle.len());
    assert_eq!((res.ranking[0].code.as_str(), res.ranking[0].lag), ("A6", 6));
    for (e, o) in res.ranking.iter().zip(&oracle) {
        assert!((e.model_mae - o.0).abs() < 1e-12, "{} {}", e.name(), o.1);
    }
}

#[test]
fn histogram_counts_sum_to_districts() {
    for seed in 0..5 {
        let panel = random_panel(seed, 37, 24, &[]);
        let ane = compute_ane(&panel);
        let bins = ane_histogram(&ane, 0.25).unwrap();
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), 37);
        for (id, a) in &ane {
            let d = panel.district_index(*id).unwrap();
            let want = panel.ne_series(d).iter().map(|&v| v as f64).sum::<f64>() / 24.0;
            assert!((a - want).abs() < 1e-12);
        }
    }
}
