mod common;

use std::collections::BTreeMap;

use common::*;
use jointgibbs::data::{Dataset, MetaOverride};
use jointgibbs::diagnostics::SubsetSpec;
use jointgibbs::graph::{monitor_from_json, GraphOptions};
use jointgibbs::postprocess::{
    emit_plot_data, get_mi_dat, kernel_density, pred_df, predict, MiOptions, PlotKind, PredictOptions, PredictType,
};
use jointgibbs::sampler::McmcSamples;
use proptest::prelude::*;
use rand::Rng;

fn with_imps() -> GraphOptions {
    GraphOptions {
        monitor: monitor_from_json(&serde_json::json!({"analysis_main": true, "imps": true})).unwrap(),
        ..Default::default()
    }
}

fn linear_data(n: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let x1: Vec<f64> = (0..n).map(|_| 5.0 + normal(&mut r)).collect();
    let x2: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
    let y: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * x1[i] - x2[i] + normal(&mut r)).collect();
    let x1m: Vec<f64> = x1.iter().enumerate().map(|(i, v)| if i % 4 == 0 { f64::NAN } else { *v }).collect();
    let g: Vec<Option<&str>> = (0..n)
        .map(|i| if i % 7 == 3 { None } else if r.random::<f64>() < 0.5 { Some("a") } else { Some("b") })
        .collect();
    Dataset::new(vec![numeric("y", &y), numeric("x1", &x1m), numeric("x2", &x2), categorical("g", &g)]).unwrap()
}

#[test]
fn link_on_original_data_reproduces_eta() {
    let ds = linear_data(60, 1);
    let complete: Vec<usize> = (0..60).filter(|i| i % 4 != 0).collect();
    let (_, s) = fit("y ~ x1 + x2", &ds, &GraphOptions::default(), &settings(50, 40, 2));
    let g = graph("y ~ x1 + x2", &ds, &GraphOptions::default());
    let cols = ds.columns();
    let keep = |c: usize| -> Vec<Option<f64>> {
        let v = cols[c].numeric_values().unwrap();
        complete.iter().map(|&i| v[i]).collect()
    };
    let nd = Dataset::new(vec![
        jointgibbs::data::Column::numeric("y", keep(0)),
        jointgibbs::data::Column::numeric("x1", keep(1)),
        jointgibbs::data::Column::numeric("x2", keep(2)),
    ])
    .unwrap();
    let opts = PredictOptions { pred_type: PredictType::Link, ..Default::default() };
    let p = predict(&s, &g, &nd, &opts).unwrap();

    let (b0, b1, b2) = (s.require("(Intercept)").unwrap(), s.require("x1").unwrap(), s.require("x2").unwrap());
    let x1 = keep(1);
    let x2 = keep(2);
    let mut worst = 0.0f64;
    for r in 0..complete.len() {
        let mut sum = 0.0;
        for c in 0..s.n_chains() {
            for d in 0..s.n_draws() {
                sum += s.value(c, d, b0) + s.value(c, d, b1) * x1[r].unwrap() + s.value(c, d, b2) * x2[r].unwrap();
            }
        }
        let eta = sum / (s.n_chains() * s.n_draws()) as f64;
        worst = worst.max((eta - p.fit[r][0]).abs());
        assert!(p.lo[r][0] <= p.hi[r][0]);
    }
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn predict_rejects_missing_covariates() {
    let ds = linear_data(40, 3);
    let (_, s) = fit("y ~ x1 + x2", &ds, &GraphOptions::default(), &settings(20, 10, 1));
    let g = graph("y ~ x1 + x2", &ds, &GraphOptions::default());
    let err = predict(&s, &g, &ds, &PredictOptions::default()).unwrap_err();
    assert!(err.to_string().contains("x1"), "{err}");
    let prob = PredictOptions { pred_type: PredictType::Prob, ..Default::default() };
    let nd = pred_df(&g, &ds, "~ x2", 5, &BTreeMap::new()).unwrap();
    assert!(predict(&s, &g, &nd, &prob).is_err());
}

/// Samples holding hand-set coefficients of a fitted graph.
fn fixed_draws(s: &McmcSamples, values: &[(&str, Vec<f64>)]) -> McmcSamples {
    let keep: Vec<usize> = (0..values[0].1.len()).collect();
    let mut out = s.subset(&(0..s.n_nodes()).collect::<Vec<_>>(), &keep, &[0]);
    let width = out.n_nodes();
    for (name, v) in values {
        let i = out.require(name).unwrap();
        for (d, x) in v.iter().enumerate() {
            out.chains[0][d * width + i] = *x;
        }
    }
    out
}

#[test]
fn logistic_response_at_zero_is_one_half() {
    let mut r = rng(4);
    let x: Vec<f64> = (0..80).map(|_| normal(&mut r)).collect();
    let y: Vec<Option<&str>> = x.iter().map(|v| Some(if *v + normal(&mut r) > 0.0 { "1" } else { "0" })).collect();
    let ds = Dataset::new(vec![categorical("y", &y), numeric("x", &x)]).unwrap();
    let mut opts = GraphOptions::default();
    opts.meta_overrides.insert(
        "y".into(),
        MetaOverride { levels: Some(vec!["0".into(), "1".into()]), ..Default::default() },
    );
    let (_, s) = fit("y ~ x", &ds, &opts, &settings(20, 5, 1));
    let g = graph("y ~ x", &ds, &opts);
    let s = fixed_draws(&s, &[("(Intercept)", vec![0.0; 3]), ("x", vec![0.0; 3])]);
    let nd = pred_df(&g, &ds, "~ x", 7, &BTreeMap::new()).unwrap();
    let resp = PredictOptions { pred_type: PredictType::Response, ..Default::default() };
    let p = predict(&s, &g, &nd, &resp).unwrap();
    assert!(p.fit.iter().all(|f| (f[0] - 0.5).abs() < 1e-15));

    let prob = PredictOptions { pred_type: PredictType::Prob, ..Default::default() };
    let p = predict(&s, &g, &nd, &prob).unwrap();
    assert_eq!(p.labels, vec!["0", "1"]);
    let class = PredictOptions { pred_type: PredictType::Class, ..Default::default() };
    let c = predict(&s, &g, &nd, &class).unwrap();
    // exact tie goes to the first category
    assert!(c.class.unwrap().iter().all(|l| l == "0"));
    assert!(p.fit.iter().all(|f| (f[0] + f[1] - 1.0).abs() < 1e-12));
}

#[test]
fn gaussian_link_equals_response_and_single_draw_is_degenerate() {
    let ds = linear_data(50, 5);
    let (_, s) = fit("y ~ x2", &ds, &GraphOptions::default(), &settings(20, 30, 1));
    let g = graph("y ~ x2", &ds, &GraphOptions::default());
    let nd = pred_df(&g, &ds, "~ x2", 9, &BTreeMap::new()).unwrap();
    let link = predict(&s, &g, &nd, &PredictOptions::default()).unwrap();
    let resp = PredictOptions { pred_type: PredictType::Response, ..Default::default() };
    let resp = predict(&s, &g, &nd, &resp).unwrap();
    assert_eq!(link.fit, resp.fit);
    assert_eq!(link.lo, resp.lo);

    let one = s.subset(&(0..s.n_nodes()).collect::<Vec<_>>(), &[0], &[0]);
    let p = predict(&one, &g, &nd, &PredictOptions::default()).unwrap();
    for r in 0..nd.n_rows() {
        assert_eq!(p.lo[r][0], p.fit[r][0]);
        assert_eq!(p.hi[r][0], p.fit[r][0]);
    }
    let table = p.table().unwrap();
    assert!(table.column("fit").is_some() && table.column("2.5%").is_some() && table.column("97.5%").is_some());
}

#[test]
fn pred_df_grid_and_overrides() {
    let mut r = rng(6);
    let age: Vec<f64> = (0..40).map(|i| if i == 0 { 1.0 } else if i == 1 { 50.0 } else { r.random_range(1.0..50.0) }).collect();
    let height: Vec<f64> = (0..40).map(|_| 150.0 + 30.0 * r.random::<f64>()).collect();
    let y: Vec<f64> = (0..40).map(|_| normal(&mut r)).collect();
    let ds = Dataset::new(vec![numeric("y", &y), numeric("age", &age), numeric("HEIGHT_M", &height)]).unwrap();
    let g = graph("y ~ age + HEIGHT_M", &ds, &GraphOptions::default());

    let nd = pred_df(&g, &ds, "~ age", 100, &BTreeMap::new()).unwrap();
    assert_eq!(nd.n_rows(), 100);
    let a = nd.require("age").unwrap().numeric_values().unwrap();
    assert_eq!(a[0], Some(1.0));
    assert_eq!(a[99], Some(50.0));
    let h = nd.require("HEIGHT_M").unwrap().numeric_values().unwrap();
    let mut sorted = height.clone();
    sorted.sort_by(f64::total_cmp);
    let med = 0.5 * (sorted[19] + sorted[20]);
    assert!(h.iter().all(|v| *v == Some(med)));

    let over = BTreeMap::from([("HEIGHT_M".to_string(), vec!["160".to_string(), "175".to_string()])]);
    let nd = pred_df(&g, &ds, "~ age", 100, &over).unwrap();
    assert_eq!(nd.n_rows(), 200);
    let h = nd.require("HEIGHT_M").unwrap().numeric_values().unwrap();
    assert_eq!(h.iter().filter(|v| **v == Some(175.0)).count(), 100);

    let flat = Dataset::new(vec![numeric("y", &y), numeric("age", &[3.0; 40]), numeric("HEIGHT_M", &height)]).unwrap();
    let g = graph("y ~ age + HEIGHT_M", &flat, &GraphOptions::default());
    assert_eq!(pred_df(&g, &flat, "~ age", 100, &BTreeMap::new()).unwrap().n_rows(), 1);
    assert!(pred_df(&g, &flat, "~ nope", 100, &BTreeMap::new()).is_err());
}

#[test]
fn get_mi_dat_with_no_copies() {
    let ds = linear_data(40, 7);
    let (_, s) = fit("y ~ x1 + x2 + g", &ds, &with_imps(), &settings(20, 20, 1));
    let g = graph("y ~ x1 + x2 + g", &ds, &with_imps());
    let opts = MiOptions { m: 0, ..Default::default() };
    let st = get_mi_dat(&s, &g, &ds, &opts).unwrap();
    assert_eq!(st.data.n_rows(), 40);
    let st = get_mi_dat(&s, &g, &ds, &MiOptions { include: false, ..opts }).unwrap();
    assert_eq!(st.data.n_rows(), 0);

    let (_, plain) = fit("y ~ x1 + x2 + g", &ds, &GraphOptions::default(), &settings(20, 20, 1));
    let opts = MiOptions { m: 2, minspace: 1, ..Default::default() };
    assert!(get_mi_dat(&plain, &g, &ds, &opts).is_err());
    let opts = MiOptions { m: 5, minspace: 10, ..Default::default() };
    assert!(get_mi_dat(&s, &g, &ds, &opts).is_err());
}

#[test]
fn get_mi_dat_fills_verbatim() {
    let ds = linear_data(50, 8);
    let (_, s) = fit("y ~ x1 + x2 + g", &ds, &with_imps(), &settings(20, 60, 3));
    let g = graph("y ~ x1 + x2 + g", &ds, &with_imps());
    let opts = MiOptions { m: 4, minspace: 10, seed: 11, ..Default::default() };
    let st = get_mi_dat(&s, &g, &ds, &opts).unwrap();
    assert_eq!(st.data.n_rows(), 250);
    assert_eq!(st.picks.len(), 4);
    let imp = st.data.require("Imputation_").unwrap().numeric_values().unwrap();
    let x1 = st.data.require("x1").unwrap().numeric_values().unwrap();
    let gcol = st.data.require("g").unwrap();
    let orig_x1 = ds.require("x1").unwrap().numeric_values().unwrap();
    let orig_g = ds.require("g").unwrap();
    for (k, pick) in st.picks.iter().enumerate() {
        let d = s.meta.iterations.iter().position(|&i| i == pick.iteration).unwrap();
        for r in 0..50 {
            let row = (k + 1) * 50 + r;
            assert_eq!(imp[row], Some((k + 1) as f64));
            match orig_x1[r] {
                Some(v) => assert_eq!(x1[row], Some(v)),
                None => {
                    let node = s.require(&format!("imp_x1[{}]", r + 1)).unwrap();
                    assert_eq!(x1[row], Some(s.value(pick.chain - 1, d, node)));
                }
            }
            match orig_g.label(r) {
                Some(l) => assert_eq!(gcol.label(row), Some(l)),
                None => {
                    let node = s.require(&format!("imp_g[{}]", r + 1)).unwrap();
                    let code = s.value(pick.chain - 1, d, node) as usize;
                    assert_eq!(gcol.label(row).as_deref(), Some(g.meta("g").unwrap().levels[code - 1].as_str()));
                }
            }
        }
    }
}

#[test]
fn trace_rows_and_density_mass() {
    let s = McmcSamples::from_draws(&["a"], vec![11, 12, 13], &[vec![vec![1.0, 2.0, 3.0]], vec![vec![0.5, 1.5, 1.0]]]).unwrap();
    let t = emit_plot_data(&s, PlotKind::Trace, &SubsetSpec::default(), None).unwrap();
    assert_eq!(t.csv.lines().count(), 1 + 6);
    assert_eq!(t.csv.lines().nth(1), Some("1,11,a,1"));

    let mut r = rng(9);
    let x: Vec<f64> = (0..500).map(|_| normal(&mut r)).collect();
    let d = kernel_density(&x, 512);
    assert_eq!(d.len(), 512);
    let mass: f64 = d.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
    assert!((mass - 1.0).abs() < 0.01, "{mass}");
    let dens = emit_plot_data(&s, PlotKind::Density, &SubsetSpec::default(), None).unwrap();
    assert_eq!(dens.csv.lines().count(), 1 + 2 * 512);
    assert_eq!(dens.header["points"], 512);
}

#[test]
fn imp_distr_series() {
    let ds = linear_data(40, 10);
    let (_, s) = fit("y ~ x1 + x2 + g", &ds, &with_imps(), &settings(20, 30, 1));
    let g = graph("y ~ x1 + x2 + g", &ds, &with_imps());
    let st = get_mi_dat(&s, &g, &ds, &MiOptions { m: 2, minspace: 5, ..Default::default() }).unwrap();
    let p = emit_plot_data(&s, PlotKind::ImpDistr, &SubsetSpec::default(), Some((&st, &g))).unwrap();
    let sources = |var: &str| -> Vec<String> {
        let mut v: Vec<String> = p
            .csv
            .lines()
            .skip(1)
            .filter(|l| l.starts_with(&format!("{var},")))
            .map(|l| l.split(',').nth(1).unwrap().to_string())
            .collect();
        v.dedup();
        v
    };
    assert_eq!(sources("x2"), vec!["observed"]);
    assert_eq!(sources("x1"), vec!["observed", "imputation_1", "imputation_2"]);
    assert_eq!(sources("g"), vec!["observed", "imputation_1", "imputation_2"]);
    let dir = tempfile::tempdir().unwrap();
    p.write(&dir.path().join("imp")).unwrap();
    let side = std::fs::read_to_string(dir.path().join("imp.json")).unwrap();
    assert_eq!(side.lines().count(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pred_df_size(len in 1usize..30, k in 1usize..4) {
        let ds = linear_data(30, 12);
        let g = graph("y ~ x1 + x2 + g", &ds, &GraphOptions::default());
        let over = BTreeMap::from([
            ("x1".to_string(), (0..k).map(|i| i.to_string()).collect::<Vec<_>>()),
        ]);
        let nd = pred_df(&g, &ds, "~ x2", len, &over).unwrap();
        prop_assert_eq!(nd.n_rows(), len * k);
        let nd = pred_df(&g, &ds, "~ x2 + g", len, &over).unwrap();
        prop_assert_eq!(nd.n_rows(), len * k * 2);
    }

    #[test]
    fn mi_picks_respect_minspace(seed in 0u64..10_000) {
        let draws: Vec<Vec<Vec<f64>>> = (0..2).map(|c| vec![(0..10).map(|i| (c * 10 + i) as f64).collect()]).collect();
        let mut s = McmcSamples::from_draws(&["imp_x[1]"], (1..=10).collect(), &draws).unwrap();
        s.meta.nodes[0].group = jointgibbs::graph::NodeGroup::Imps;
        s.meta.nodes[0].model = "x".into();
        s.meta.nodes[0].rows = vec![0];
        let xs = [f64::NAN, 1.3, 2.7, 0.4, 5.1, 3.3, 2.2, 4.8];
        let ys = [1.0, 2.0, 3.0, 0.5, 2.5, 1.5, 0.1, 0.9];
        let ds = Dataset::new(vec![numeric("y", &ys), numeric("x", &xs)]).unwrap();
        let g = graph("y ~ x", &ds, &GraphOptions::default());
        let st = get_mi_dat(&s, &g, &ds, &MiOptions { m: 2, minspace: 3, seed, ..Default::default() }).unwrap();
        let (a, b) = (st.picks[0], st.picks[1]);
        prop_assert!(a.iteration.abs_diff(b.iteration) >= 3);
        let x = st.data.require("x").unwrap().numeric_values().unwrap();
        for (k, p) in st.picks.iter().enumerate() {
            prop_assert_eq!(x[(k + 1) * 8], Some(((p.chain - 1) * 10 + p.iteration - 1) as f64));
        }
    }
}
