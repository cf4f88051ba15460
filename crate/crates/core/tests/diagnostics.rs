use jointgibbs::diagnostics::{
    batch_means_se, gelman_rubin, mc_error, psrf, summarize, tail_probability, SubsetSpec,
};
use jointgibbs::sampler::McmcSamples;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn one_node(chains: &[Vec<f64>]) -> McmcSamples {
    let n = chains[0].len();
    let draws: Vec<Vec<Vec<f64>>> = chains.iter().map(|c| vec![c.clone()]).collect();
    McmcSamples::from_draws(&["x"], (101..101 + n).collect(), &draws).unwrap()
}

fn iid(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn ar1(n: usize, rho: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = 0.0;
    (0..n)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            x = rho * x + (1.0 - rho * rho).sqrt() * e;
            x
        })
        .collect()
}

/// Within- and between-chain variances computed directly.
fn w_and_b(chains: &[Vec<f64>]) -> (f64, f64) {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let vars: Vec<f64> = chains
        .iter()
        .zip(&means)
        .map(|(c, m)| c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0))
        .collect();
    let m = chains.len() as f64;
    let grand = means.iter().sum::<f64>() / m;
    let b = n * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (m - 1.0);
    (vars.iter().sum::<f64>() / m, b)
}

#[test]
fn pooled_mean_and_excluded_chain() {
    let s = one_node(&[vec![1.0, 2.0, 3.0], vec![3.0, 4.0, 5.0]]);
    let all = summarize(&s, &SubsetSpec::default()).unwrap();
    assert!((all.nodes[0].mean - 3.0).abs() < 1e-12);
    let sub = SubsetSpec { exclude_chains: vec![2], ..Default::default() };
    let one = summarize(&s, &sub).unwrap();
    assert!((one.nodes[0].mean - 2.0).abs() < 1e-12);
    assert_eq!(one.meta.n_chains, 1);
}

#[test]
fn quantiles_of_standard_normal() {
    let s = one_node(&[iid(10_000, 1)]);
    let sm = summarize(&s, &SubsetSpec::default()).unwrap();
    assert!((sm.nodes[0].quantile_lo + 1.96).abs() < 0.1);
    assert!((sm.nodes[0].quantile_hi - 1.96).abs() < 0.1);
    assert!(sm.nodes[0].gr_point.is_none());
}

#[test]
fn subset_window_and_thin() {
    let s = one_node(&[(0..10).map(f64::from).collect(), (0..10).map(f64::from).collect()]);
    let sub = SubsetSpec { start: Some(103), end: Some(108), thin: Some(2), ..Default::default() };
    let r = sub.apply(&s).unwrap();
    assert_eq!(r.meta.iterations, vec![103, 105, 107]);
    assert_eq!(r.chain_draws(0, 0), vec![2.0, 4.0, 6.0]);
    assert!(SubsetSpec { start: Some(50), ..Default::default() }.apply(&s).is_err());
    assert!(SubsetSpec { start: Some(108), end: Some(103), ..Default::default() }.apply(&s).is_err());
    assert!(SubsetSpec { exclude_chains: vec![3], ..Default::default() }.apply(&s).is_err());
    assert!(SubsetSpec { exclude_chains: vec![1, 2], ..Default::default() }.apply(&s).is_err());
}

#[test]
fn unknown_node_is_rejected() {
    let s = one_node(&[vec![1.0, 2.0], vec![2.0, 3.0]]);
    let nodes = serde_json::from_str(r#"{"other": ["nope"]}"#).unwrap();
    let sub = SubsetSpec { nodes: Some(nodes), ..Default::default() };
    assert!(summarize(&s, &sub).is_err());
    let nodes = serde_json::from_str(r#"{"analysis_main": false, "imps": true}"#).unwrap();
    let sub = SubsetSpec { nodes: Some(nodes), ..Default::default() };
    assert!(summarize(&s, &sub).is_err());
}

#[test]
fn tail_probability_examples() {
    assert_eq!(tail_probability(&[-1.0, 2.0, 3.0, 4.0]), 0.5);
    assert_eq!(tail_probability(&[0.5, 2.0, 3.0]), 0.0);
    assert_eq!(tail_probability(&[-2.0, -1.0, 1.0, 2.0]), 1.0);
}

#[test]
fn gelman_rubin_hand_example() {
    let chains = vec![vec![1.0, 2.0, 3.0, 4.0], vec![2.0, 3.0, 4.0, 5.0]];
    let (w, b) = w_and_b(&chains);
    assert!((w - 5.0 / 3.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
    let (n, m) = (4.0, 2.0);
    let r2 = (n - 1.0) / n + (1.0 + 1.0 / m) * b / (n * w);
    let p = psrf(&chains, 0.95).unwrap();
    assert!((p.uncorrected - r2.sqrt()).abs() < 1e-12);
    assert!((p.w - w).abs() < 1e-12 && (p.b - b).abs() < 1e-12);
}

#[test]
fn gelman_rubin_iid_chains() {
    let s = one_node(&[iid(10_000, 2), iid(10_000, 3)]);
    let r = gelman_rubin(&s, &SubsetSpec::default(), 0.95, false).unwrap();
    // sampling noise can put the point estimate marginally below one
    let p = r[0].point.unwrap();
    assert!((0.999..=1.02).contains(&p), "{p}");
    assert!(r[0].upper.unwrap() >= p);
    let single = one_node(&[iid(100, 2)]);
    assert!(gelman_rubin(&single, &SubsetSpec::default(), 0.95, false).is_err());
}

#[test]
fn constant_chains_are_reported_per_node() {
    let s = one_node(&[vec![1.0; 50], vec![1.0; 50]]);
    let r = gelman_rubin(&s, &SubsetSpec::default(), 0.95, false).unwrap();
    assert!(r[0].point.is_none() && r[0].error.is_some());
    let m = mc_error(&s, &SubsetSpec::default()).unwrap();
    assert!(m.nodes[0].ratio.is_none() && !m.nodes[0].flagged);
}

#[test]
fn mc_error_iid() {
    let s = one_node(&[iid(10_000, 4)]);
    let r = mc_error(&s, &SubsetSpec::default()).unwrap();
    let n = &r.nodes[0];
    assert!((n.mcse - 0.01).abs() < 0.003, "{}", n.mcse);
    assert!((n.ratio.unwrap() - 0.01).abs() < 0.003);
    assert!(!n.flagged);
}

#[test]
fn mc_error_halving_the_sample() {
    let s = one_node(&[iid(40_000, 5)]);
    let full = mc_error(&s, &SubsetSpec::default()).unwrap().nodes[0].mcse;
    let half = SubsetSpec { end: Some(100 + 20_000), ..Default::default() };
    let half = mc_error(&s, &half).unwrap().nodes[0].mcse;
    let r = half / full;
    assert!((r / 2f64.sqrt() - 1.0).abs() < 0.25, "{r}");
}

#[test]
fn mc_error_needs_two_batches() {
    let s = one_node(&[vec![1.0]]);
    assert!(mc_error(&s, &SubsetSpec::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn tail_probability_is_symmetric(x in prop::collection::vec(-5.0f64..5.0, 1..50)) {
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert_eq!(tail_probability(&x), tail_probability(&neg));
        let t = tail_probability(&x);
        prop_assert!((0.0..=1.0).contains(&t));
    }

    #[test]
    fn summary_ignores_chain_order(seed in 0u64..1000, n in 20usize..60) {
        let a = iid(n, seed);
        let b = iid(n, seed + 1);
        let c = iid(n, seed + 2);
        let s1 = summarize(&one_node(&[a.clone(), b.clone(), c.clone()]), &SubsetSpec::default()).unwrap();
        let s2 = summarize(&one_node(&[c, a, b]), &SubsetSpec::default()).unwrap();
        let (x, y) = (&s1.nodes[0], &s2.nodes[0]);
        prop_assert!((x.mean - y.mean).abs() < 1e-12);
        prop_assert!((x.sd - y.sd).abs() < 1e-12);
        prop_assert_eq!(x.quantile_lo, y.quantile_lo);
        prop_assert_eq!(x.quantile_hi, y.quantile_hi);
        prop_assert!(x.quantile_lo <= x.quantile_hi);
        prop_assert!((x.gr_point.unwrap() - y.gr_point.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn duplicated_chains_have_no_between_variance(seed in 0u64..1000, n in 5usize..200) {
        let a = iid(n, seed);
        let p = psrf(&[a.clone(), a], 0.95).unwrap();
        let nf = n as f64;
        prop_assert!(p.b.abs() < 1e-12);
        prop_assert!((p.point - ((nf - 1.0) / nf).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn thinning_reduces_batch_inflation(rho in 0.3f64..0.95, thin in 2usize..10, seed in 0u64..100) {
        let x = ar1(20_000, rho, seed);
        let thinned: Vec<f64> = x.iter().step_by(thin).copied().collect();
        let infl = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let sd = (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
            batch_means_se(v).unwrap() / (sd / (v.len() as f64).sqrt())
        };
        prop_assert!(infl(&thinned) <= infl(&x) * 1.05, "{} vs {}", infl(&thinned), infl(&x));
    }
}
