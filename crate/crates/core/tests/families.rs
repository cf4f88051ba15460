mod common;

use common::*;
use jointgibbs::data::{Dataset, DeclaredType, MetaOverride};
use jointgibbs::graph::GraphOptions;
use rand::Rng;

#[test]
fn linear_model_matches_least_squares() {
    let mut r = rng(1);
    let n = 300;
    let x1: Vec<f64> = (0..n).map(|_| 10.0 + 2.0 * normal(&mut r)).collect();
    let x2: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
    let y: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * x1[i] - 2.0 * x2[i] + normal(&mut r)).collect();
    let ds = Dataset::new(vec![numeric("y", &y), numeric("x1", &x1), numeric("x2", &x2)]).unwrap();
    let (_, s) = fit("y ~ x1 + x2", &ds, &GraphOptions::default(), &settings(100, 2000, 3));
    let design: Vec<Vec<f64>> = (0..n).map(|i| vec![1.0, x1[i], x2[i]]).collect();
    let b = ols(&design, &y);
    for (name, want) in ["(Intercept)", "x1", "x2"].iter().zip(&b) {
        let got = post_mean(&s, name);
        assert!((got - want).abs() < 4.0 * post_sd(&s, name) / (4000f64).sqrt() + 0.02, "{name}: {got} vs {want}");
    }
    assert!((post_mean(&s, "sigma_y") - 1.0).abs() < 0.1);
}

#[test]
fn logistic_with_missing_continuous_covariate() {
    let mut r = rng(2);
    let n = 400;
    let x: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
    let y: Vec<Option<&str>> = (0..n)
        .map(|i| {
            let p = 1.0 / (1.0 + (-(0.3 + 1.2 * x[i])).exp());
            Some(if r.random::<f64>() < p { "yes" } else { "no" })
        })
        .collect();
    let xm: Vec<f64> = x.iter().enumerate().map(|(i, v)| if i % 5 == 0 { f64::NAN } else { *v }).collect();
    let ds = Dataset::new(vec![categorical("y", &y), numeric("x", &xm)]).unwrap();
    let (_, s) = fit("y ~ x", &ds, &GraphOptions::default(), &settings(300, 1500, 4));
    let b = post_mean(&s, "x");
    assert!((b - 1.2).abs() < 0.4, "{b}");
}

fn simple_x(n: usize, seed: u64) -> (rand_chacha::ChaCha20Rng, Vec<f64>) {
    let mut r = rng(seed);
    let x = (0..n).map(|_| normal(&mut r)).collect();
    (r, x)
}

fn with_missing(x: &[f64], every: usize) -> Vec<f64> {
    x.iter().enumerate().map(|(i, v)| if i % every == 1 { f64::NAN } else { *v }).collect()
}

fn levels(opts: &mut GraphOptions, var: &str, lv: &[&str], ordered: bool) {
    opts.meta_overrides.insert(
        var.to_string(),
        MetaOverride {
            vtype: ordered.then_some(DeclaredType::Ordered),
            levels: Some(lv.iter().map(|s| s.to_string()).collect()),
            ..Default::default()
        },
    );
}

fn opts_model(resp: &str, t: &str) -> GraphOptions {
    GraphOptions {
        models: [(resp.to_string(), t.parse().unwrap())].into(),
        ..Default::default()
    }
}

#[test]
fn poisson_regression() {
    let (mut r, x) = simple_x(400, 5);
    let y: Vec<f64> = x
        .iter()
        .map(|v| {
            let lam = (0.5 + 0.7 * v).exp();
            rand_distr::Distribution::sample(&rand_distr::Poisson::new(lam).unwrap(), &mut r)
        })
        .collect();
    let ds = Dataset::new(vec![numeric("y", &y), numeric("x", &with_missing(&x, 7))]).unwrap();
    let (_, s) = fit("y ~ x", &ds, &opts_model("y", "glm_poisson_log"), &settings(300, 1500, 1));
    assert!((post_mean(&s, "x") - 0.7).abs() < 0.15);
    assert!((post_mean(&s, "(Intercept)") - 0.5).abs() < 0.15);
}

#[test]
fn gamma_regression() {
    let (mut r, x) = simple_x(400, 6);
    // mean exp(1 + 0.5 x), shape 4
    let y: Vec<f64> = x
        .iter()
        .map(|v| {
            // mean mu and variance 1 / tau with tau = 4
            let mu = (1.0 + 0.5 * v).exp();
            let tau = 4.0;
            rand_distr::Distribution::sample(&rand_distr::Gamma::new(mu * mu * tau, 1.0 / (mu * tau)).unwrap(), &mut r)
        })
        .collect();
    let ds = Dataset::new(vec![numeric("y", &y), numeric("x", &x)]).unwrap();
    let (_, s) = fit("y ~ x", &ds, &opts_model("y", "glm_gamma_log"), &settings(500, 1500, 2));
    assert!((post_mean(&s, "x") - 0.5).abs() < 0.1, "{}", post_mean(&s, "x"));
}

#[test]
fn beta_and_lognormal_regression() {
    let (mut r, x) = simple_x(400, 7);
    let yb: Vec<f64> = x
        .iter()
        .map(|v| {
            let mu = 1.0 / (1.0 + (-(0.2 + 0.8 * v)).exp());
            let tau = 20.0;
            rand_distr::Distribution::sample(&rand_distr::Beta::new(mu * tau, (1.0 - mu) * tau).unwrap(), &mut r)
        })
        .collect();
    let ds = Dataset::new(vec![numeric("y", &yb), numeric("x", &x)]).unwrap();
    let (_, s) = fit("y ~ x", &ds, &opts_model("y", "betareg"), &settings(500, 1500, 3));
    assert!((post_mean(&s, "x") - 0.8).abs() < 0.12, "{}", post_mean(&s, "x"));
    assert!(s.node_index("tau_y").is_some());

    let yl: Vec<f64> = x.iter().map(|v| (1.0 + 0.4 * v + 0.5 * normal(&mut r)).exp()).collect();
    let ds = Dataset::new(vec![numeric("y", &yl), numeric("x", &x)]).unwrap();
    let (_, s) = fit("y ~ x", &ds, &opts_model("y", "lognorm"), &settings(100, 1500, 3));
    assert!((post_mean(&s, "x") - 0.4).abs() < 0.08);
    assert!((post_mean(&s, "sigma_y") - 0.5).abs() < 0.06);
}

fn ordinal_sample(r: &mut rand_chacha::ChaCha20Rng, eta: f64, gamma: &[f64]) -> usize {
    let u: f64 = r.random();
    for (k, g) in gamma.iter().enumerate() {
        if u < 1.0 / (1.0 + (-(g - eta)).exp()) {
            return k;
        }
    }
    gamma.len()
}

#[test]
fn cumulative_logit_analysis_model() {
    let (mut r, x) = simple_x(500, 8);
    let gamma = [-1.0, 0.5, 1.5];
    let labels = ["a", "b", "c", "d"];
    let y: Vec<Option<&str>> = x.iter().map(|v| Some(labels[ordinal_sample(&mut r, 1.0 * v, &gamma)])).collect();
    let ds = Dataset::new(vec![categorical("y", &y), numeric("x", &x)]).unwrap();
    let mut opts = opts_model("y", "clm");
    levels(&mut opts, "y", &labels, true);
    let (_, s) = fit("y ~ x", &ds, &opts, &settings(500, 2000, 4));
    assert!((post_mean(&s, "x") - 1.0).abs() < 0.2, "{}", post_mean(&s, "x"));
    for (k, g) in gamma.iter().enumerate() {
        let got = post_mean(&s, &format!("gamma_y[{}]", k + 1));
        assert!((got - g).abs() < 0.3, "gamma {k}: {got}");
    }
}

#[test]
fn multinomial_analysis_model() {
    let (mut r, x) = simple_x(600, 9);
    let labels = ["a", "b", "c"];
    let y: Vec<Option<&str>> = x
        .iter()
        .map(|v| {
            let e = [0.0, 0.5 + 1.0 * v, -0.5 - 1.0 * v];
            let w: Vec<f64> = e.iter().map(|z| z.exp()).collect();
            let mut u = r.random::<f64>() * w.iter().sum::<f64>();
            let mut k = 2;
            for (i, wi) in w.iter().enumerate() {
                if u < *wi {
                    k = i;
                    break;
                }
                u -= wi;
            }
            Some(labels[k])
        })
        .collect();
    let ds = Dataset::new(vec![categorical("y", &y), numeric("x", &x)]).unwrap();
    let mut opts = GraphOptions::default();
    levels(&mut opts, "y", &labels, false);
    let (_, s) = fit("y ~ x", &ds, &opts, &settings(500, 1500, 5));
    assert!((post_mean(&s, "yb: x") - 1.0).abs() < 0.3, "{:?}", s.node_names());
    assert!((post_mean(&s, "yc: x") + 1.0).abs() < 0.3);
}

#[test]
fn weibull_survival_model() {
    let (mut r, x) = simple_x(500, 10);
    let shape = 1.5;
    let mut time = Vec::new();
    let mut status = Vec::new();
    for v in &x {
        // log r = -(0.5 + 0.6 x)
        let rate = (-(0.5 + 0.6 * v)).exp();
        let u: f64 = r.random();
        let t = (-u.ln()).powf(1.0 / shape) / rate;
        let c = 3.0 + 5.0 * r.random::<f64>();
        time.push(t.min(c));
        status.push(if t <= c { 1.0 } else { 0.0 });
    }
    let ds = Dataset::new(vec![numeric("time", &time), numeric("status", &status), numeric("x", &x)]).unwrap();
    let (_, s) = fit("Surv(time, status) ~ x", &ds, &GraphOptions::default(), &settings(500, 1500, 6));
    assert!((post_mean(&s, "x") - 0.6).abs() < 0.12, "{}", post_mean(&s, "x"));
    assert!((post_mean(&s, "shape_time") - shape).abs() < 0.2);
}

fn grouped(n_groups: usize, per: usize, seed: u64) -> (rand_chacha::ChaCha20Rng, Vec<f64>, Vec<f64>, Vec<String>) {
    let mut r = rng(seed);
    let mut x = Vec::new();
    let mut b = Vec::new();
    let mut id = Vec::new();
    for g in 0..n_groups {
        let bg = normal(&mut r);
        for _ in 0..per {
            x.push(normal(&mut r));
            b.push(bg);
            id.push(format!("g{g}"));
        }
    }
    (r, x, b, id)
}

#[test]
fn linear_mixed_model_variance() {
    let (mut r, x, b, id) = grouped(80, 6, 11);
    let y: Vec<f64> = (0..x.len()).map(|i| 2.0 + x[i] + 1.5 * b[i] + 0.5 * normal(&mut r)).collect();
    let ids: Vec<Option<&str>> = id.iter().map(|s| Some(s.as_str())).collect();
    let ds = Dataset::new(vec![numeric("y", &y), numeric("x", &x), categorical("id", &ids)]).unwrap();
    let (_, s) = fit("y ~ x + (1 | id)", &ds, &GraphOptions::default(), &settings(200, 2000, 7));
    let d = post_mean(&s, "D_y_id[1,1]");
    assert!((d - 2.25).abs() < 0.8, "{d}");
    assert!((post_mean(&s, "x") - 1.0).abs() < 0.06);
}

#[test]
fn logistic_mixed_model_runs() {
    let (mut r, x, b, id) = grouped(60, 8, 12);
    let y: Vec<Option<&str>> = (0..x.len())
        .map(|i| {
            let p = 1.0 / (1.0 + (-(x[i] + b[i])).exp());
            Some(if r.random::<f64>() < p { "1" } else { "0" })
        })
        .collect();
    let ids: Vec<Option<&str>> = id.iter().map(|s| Some(s.as_str())).collect();
    let ds = Dataset::new(vec![categorical("y", &y), numeric("x", &x), categorical("id", &ids)]).unwrap();
    let mut opts = GraphOptions::default();
    levels(&mut opts, "y", &["0", "1"], false);
    let (_, s) = fit("y ~ x + (1 | id)", &ds, &opts, &settings(300, 1000, 8));
    assert!((post_mean(&s, "x") - 1.0).abs() < 0.35, "{}", post_mean(&s, "x"));
    assert!(post_mean(&s, "D_y_id[1,1]") > 0.3);
}

#[test]
fn categorical_covariates_are_imputed() {
    let mut r = rng(13);
    let n = 300;
    let lv = ["low", "mid", "high"];
    let mut g3 = Vec::new();
    let mut bin = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let a = r.random_range(0..3);
        let b = r.random_range(0..2);
        y.push(a as f64 + 2.0 * b as f64 + normal(&mut r));
        g3.push((i % 6 != 2).then_some(lv[a]));
        bin.push((i % 5 != 3).then_some(["no", "yes"][b]));
    }
    let ds = Dataset::new(vec![numeric("y", &y), categorical("g3", &g3), categorical("bin", &bin)]).unwrap();
    let mut opts = GraphOptions::default();
    levels(&mut opts, "g3", &lv, false);
    levels(&mut opts, "bin", &["no", "yes"], false);
    opts.monitor = jointgibbs::graph::monitor_from_json(&serde_json::json!({"imps": true, "other_models": true})).unwrap();
    let (engine, s) = fit("y ~ g3 + bin", &ds, &opts, &settings(200, 1000, 9));
    let types = engine.graph.model_types();
    assert_eq!(types[1], ("bin".to_string(), "glm_binomial_logit".to_string()));
    assert_eq!(types[2], ("g3".to_string(), "mlogit".to_string()));
    assert!((post_mean(&s, "binyes") - 2.0).abs() < 0.3);
    let imp: Vec<usize> = (0..s.n_nodes()).filter(|&i| s.meta.nodes[i].name.starts_with("imp_g3")).collect();
    assert_eq!(imp.len(), 50);
    for i in imp {
        assert!(s.pooled(i).iter().all(|v| [1.0, 2.0, 3.0].contains(v)));
    }
}

#[test]
fn level2_covariate_and_function_terms() {
    let (mut r, x, b, id) = grouped(50, 5, 14);
    let z: Vec<f64> = (0..x.len()).map(|i| (1.0 + b[i] * 0.3).abs() + 0.5).collect();
    let y: Vec<f64> = (0..x.len()).map(|i| x[i] + z[i].ln() + b[i] + 0.5 * normal(&mut r)).collect();
    let zm: Vec<f64> = (0..x.len()).map(|i| if (i / 5) % 4 == 0 { f64::NAN } else { z[i] }).collect();
    let ids: Vec<Option<&str>> = id.iter().map(|s| Some(s.as_str())).collect();
    let ds = Dataset::new(vec![numeric("y", &y), numeric("x", &x), numeric("z", &zm), categorical("id", &ids)]).unwrap();
    let mut opts = opts_model("z", "lognorm");
    opts.monitor = jointgibbs::graph::monitor_from_json(&serde_json::json!({"imps": true})).unwrap();
    let (_, s) = fit("y ~ x + log(z) + (1 | id)", &ds, &opts, &settings(200, 500, 15));
    let imps: Vec<&str> = s.node_names().into_iter().filter(|n| n.starts_with("imp_z")).collect();
    assert_eq!(imps.len(), 13);
    assert!(imps[0].starts_with("imp_z[id="));
    let i = s.node_index(imps[0]).unwrap();
    assert!(s.pooled(i).iter().all(|v| *v > 0.0));
}

#[test]
fn truncated_imputation_and_ridge() {
    let (mut r, x) = simple_x(200, 16);
    let y: Vec<f64> = x.iter().map(|v| v + normal(&mut r)).collect();
    let xm = with_missing(&x, 4);
    let ds = Dataset::new(vec![numeric("y", &y), numeric("x", &xm)]).unwrap();
    let opts = GraphOptions {
        trunc: [("x".to_string(), jointgibbs::graph::Trunc { lower: Some(-0.5), upper: Some(0.5) })].into(),
        shrinkage: jointgibbs::graph::ShrinkageSpec::All(jointgibbs::graph::Shrinkage::Ridge),
        monitor: jointgibbs::graph::monitor_from_json(&serde_json::json!({"imps": true})).unwrap(),
        ..Default::default()
    };
    let (_, s) = fit("y ~ x", &ds, &opts, &settings(100, 500, 17));
    for (i, n) in s.meta.nodes.iter().enumerate() {
        if n.name.starts_with("imp_x") {
            assert!(s.pooled(i).iter().all(|v| (-0.5..=0.5).contains(v)));
        }
    }
}
