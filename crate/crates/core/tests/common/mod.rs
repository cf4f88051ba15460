#![allow(dead_code)]

use jointgibbs::data::{Column, Dataset};
use jointgibbs::formula::parse_formula;
use jointgibbs::graph::{build_model_graph, GraphOptions, ModelGraph};
use jointgibbs::sampler::{run_engine, Engine, McmcSamples, McmcSettings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn normal(r: &mut ChaCha20Rng) -> f64 {
    r.sample(StandardNormal)
}

pub fn numeric(name: &str, v: &[f64]) -> Column {
    Column::numeric(name, v.iter().map(|x| (!x.is_nan()).then_some(*x)).collect())
}

pub fn categorical(name: &str, v: &[Option<&str>]) -> Column {
    Column::categorical(name, v)
}

pub fn graph(formula: &str, ds: &Dataset, opts: &GraphOptions) -> ModelGraph {
    let f = parse_formula(formula).expect("formula parses");
    build_model_graph(&[f], ds, opts).expect("graph builds")
}

pub fn fit(formula: &str, ds: &Dataset, opts: &GraphOptions, settings: &McmcSettings) -> (Engine, McmcSamples) {
    let g = graph(formula, ds, opts);
    let engine = Engine::new(&g, ds).expect("engine compiles");
    let s = run_engine(&engine, settings).expect("sampler runs");
    (engine, s)
}

pub fn settings(n_adapt: usize, n_iter: usize, seed: u64) -> McmcSettings {
    McmcSettings {
        n_chains: 2,
        n_adapt,
        n_iter,
        seed,
        ..Default::default()
    }
}

pub fn post_mean(s: &McmcSamples, node: &str) -> f64 {
    let i = s.node_index(node).unwrap_or_else(|| panic!("no node {node}: {:?}", s.node_names()));
    let d = s.pooled(i);
    d.iter().sum::<f64>() / d.len() as f64
}

pub fn post_sd(s: &McmcSamples, node: &str) -> f64 {
    let i = s.require(node).unwrap();
    let d = s.pooled(i);
    let m = d.iter().sum::<f64>() / d.len() as f64;
    (d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (d.len() - 1) as f64).sqrt()
}

/// Ordinary least squares by the normal equations.
pub fn ols(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut a = nalgebra::DMatrix::<f64>::zeros(p, p);
    let mut b = nalgebra::DVector::<f64>::zeros(p);
    for (row, yi) in x.iter().zip(y) {
        for i in 0..p {
            b[i] += row[i] * yi;
            for j in 0..p {
                a[(i, j)] += row[i] * row[j];
            }
        }
    }
    a.lu().solve(&b).unwrap().iter().copied().collect()
}
