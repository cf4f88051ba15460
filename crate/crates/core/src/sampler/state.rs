//! Per-chain state and initial values.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::graph::{Family, Link};

use super::engine::{CompiledModel, Engine, ImpKind};
use super::linalg::std_normal;
use super::mh::Adaptive;

/// User-supplied initial values of one chain, by name.
pub type Inits = BTreeMap<String, Vec<f64>>;

#[derive(Clone, Debug)]
pub struct ModelState {
    /// Coefficients on the sampling scale, `n_lp` blocks of `p`.
    pub beta: Vec<f64>,
    /// Shared precision of the coefficients under ridge shrinkage.
    pub ridge: f64,
    pub tau: f64,
    pub gamma1: f64,
    pub delta: Vec<f64>,
    /// Thresholds implied by `gamma1` and `delta`.
    pub gamma: Vec<f64>,
    pub shape: f64,
    /// Random effects, row-major `groups x q`.
    pub b: Vec<f64>,
    pub inv_d: DMatrix<f64>,
    pub rinv_d: Vec<f64>,
    /// Current design values, row-major `units x p`.
    pub x: Vec<f64>,
}

impl ModelState {
    pub fn thresholds(&self) -> &[f64] {
        &self.gamma
    }

    pub fn set_thresholds(&mut self) {
        self.gamma.clear();
        if self.gamma1.is_nan() {
            return;
        }
        let mut g = self.gamma1;
        self.gamma.push(g);
        for d in &self.delta {
            g += d.exp();
            self.gamma.push(g);
        }
    }
}

#[derive(Clone, Debug)]
pub struct Steps {
    pub beta: Vec<Adaptive>,
    pub tau: Adaptive,
    pub gamma1: Adaptive,
    pub delta: Vec<Adaptive>,
    pub shape: Adaptive,
    pub b: Vec<Adaptive>,
}

#[derive(Clone, Debug)]
pub struct ChainState {
    pub chain: usize,
    pub values: Vec<Vec<f64>>,
    pub models: Vec<ModelState>,
    pub steps: Vec<Steps>,
    pub imp_steps: Vec<Adaptive>,
    pub rng: ChaCha20Rng,
}

fn observed(engine: &Engine, cm: &CompiledModel) -> Vec<f64> {
    cm.design
        .unit_rows
        .iter()
        .map(|&r| engine.data[cm.var][r])
        .filter(|x| !x.is_nan())
        .collect()
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if x.is_empty() {
        return (0.0, 1.0);
    }
    let m = x.iter().sum::<f64>() / n;
    let v = if x.len() > 1 {
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        1.0
    };
    (m, if v > 0.0 { v } else { 1.0 })
}

fn link_of(link: Link, mu: f64) -> f64 {
    match link {
        Link::Identity => mu,
        Link::Logit => (mu / (1.0 - mu)).ln(),
        Link::Probit => Normal::standard().inverse_cdf(mu),
        Link::Log => mu.ln(),
        Link::Cloglog => (-(1.0 - mu).ln()).ln(),
        Link::Inverse => 1.0 / mu,
    }
}

/// Links whose linear predictor is constrained by the family's support;
/// their coefficients start without jitter.
fn restricted(cm: &CompiledModel) -> bool {
    matches!(
        (cm.family, cm.link),
        (Family::Gamma | Family::Poisson, Link::Identity | Link::Inverse)
            | (Family::Binomial, Link::Log)
            | (Family::Gaussian, Link::Inverse)
    )
}

fn init_model(engine: &Engine, cm: &CompiledModel, rng: &mut ChaCha20Rng) -> ModelState {
    let y = observed(engine, cm);
    let p = cm.p;
    let mut beta = vec![0.0; cm.n_coef()];
    let jitter = !restricted(cm);
    if jitter {
        for b in beta.iter_mut() {
            *b = 0.1 * std_normal(rng);
        }
    }
    let (mean, _) = mean_var(&y);
    let mut gamma1 = f64::NAN;
    let mut delta = Vec::new();
    let counts = |k: usize| -> Vec<f64> {
        let mut c = vec![0.5; k];
        for v in &y {
            c[*v as usize] += 1.0;
        }
        c
    };
    let intercept: Option<Vec<f64>> = match cm.family {
        Family::Gaussian => {
            let mu = match cm.link {
                Link::Log | Link::Inverse if mean <= 0.0 => 1.0,
                _ => mean,
            };
            Some(vec![link_of(cm.link, mu)])
        }
        Family::Lognormal => {
            let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
            Some(vec![mean_var(&ly).0])
        }
        Family::Gamma => Some(vec![link_of(cm.link, mean.max(1e-8))]),
        Family::Beta => {
            let mu = mean.clamp(0.01, 0.99);
            Some(vec![link_of(Link::Logit, mu)])
        }
        Family::Poisson => Some(vec![link_of(cm.link, mean.max(0.5))]),
        Family::Binomial => {
            let r = cm.ref_cat.unwrap_or(0);
            let n1 = y.iter().filter(|v| **v as usize != r).count() as f64;
            let pr = ((n1 + 0.5) / (y.len() as f64 + 1.0)).clamp(0.05, 0.95);
            Some(vec![link_of(cm.link, pr)])
        }
        Family::Multinomial => {
            let c = counts(cm.n_cat);
            let r = cm.ref_cat.unwrap_or(0);
            Some(cm.lp_cats.iter().map(|&k| (c[k] / c[r]).ln()).collect())
        }
        Family::Ordinal => {
            let c = counts(cm.n_cat);
            let total: f64 = c.iter().sum();
            let mut cum = 0.0;
            let mut g = Vec::new();
            for ck in &c[..cm.n_cat - 1] {
                cum += ck;
                let q = cum / total;
                g.push((q / (1.0 - q)).ln() + 0.1 * std_normal(rng));
            }
            gamma1 = g[0];
            for w in g.windows(2) {
                delta.push((w[1] - w[0]).max(0.05).ln());
            }
            None
        }
        Family::Weibull => Some(vec![mean.max(1e-8).ln()]),
    };
    let has_intercept = cm.design.columns.first().is_some_and(|c| c.is_intercept());
    if let (Some(ic), true) = (intercept, has_intercept) {
        for (k, v) in ic.into_iter().enumerate() {
            beta[k * p] = v + if jitter { 0.1 * std_normal(rng) } else { 0.0 };
        }
    }
    let (q, n_groups) = cm.ranef.as_ref().map_or((0, 0), |r| (r.q, r.n_groups()));
    let mut ms = ModelState {
        ridge: 1.0,
        beta,
        tau: 1.0,
        gamma1,
        delta,
        gamma: Vec::new(),
        shape: 1.0,
        b: vec![0.0; q * n_groups],
        inv_d: DMatrix::identity(q, q),
        rinv_d: vec![1.0; q],
        x: cm.design.values.clone(),
    };
    ms.set_thresholds();
    ms
}

fn steps_for(cm: &CompiledModel) -> Steps {
    let n_groups = cm.ranef.as_ref().map_or(0, |r| r.n_groups());
    Steps {
        beta: vec![Adaptive::new(0.1); cm.n_coef()],
        tau: Adaptive::new(0.3),
        gamma1: Adaptive::new(0.1),
        delta: vec![Adaptive::new(0.1); cm.n_cat.saturating_sub(2)],
        shape: Adaptive::new(0.1),
        b: vec![Adaptive::new(0.3); n_groups],
    }
}

/// Starting value inside the support and truncation bounds.
fn fit_support(x: f64, kind: ImpKind, trunc: Option<crate::graph::Trunc>) -> f64 {
    let mut v = match kind {
        ImpKind::Positive if x <= 0.0 => 1e-3,
        ImpKind::Unit => x.clamp(1e-3, 1.0 - 1e-3),
        ImpKind::Count => x.round().max(0.0),
        _ => x,
    };
    if let Some(tr) = trunc {
        if !tr.contains(v) {
            v = match (tr.lower, tr.upper) {
                (Some(l), Some(u)) => 0.5 * (l + u),
                (Some(l), None) => l + (l.abs() * 0.1).max(1e-3),
                (None, Some(u)) => u - (u.abs() * 0.1).max(1e-3),
                (None, None) => v,
            };
        }
    }
    v
}

/// Continuous values start at the observed mean plus jitter, categorical
/// values are drawn from the observed frequencies.
fn init_imputations(engine: &Engine, values: &mut [Vec<f64>], rng: &mut ChaCha20Rng) {
    for t in &engine.imps {
        let observed: Vec<f64> = match (&engine.grouping, t.group) {
            (Some(g), Some(_)) => g.rows.iter().map(|r| engine.data[t.var][r[0]]).collect(),
            _ => engine.data[t.var].clone(),
        }
        .into_iter()
        .filter(|x| !x.is_nan())
        .collect();
        let v = match t.kind {
            ImpKind::Categorical(k) => match observed.choose(rng) {
                Some(v) => *v,
                None => rng.random_range(0..k) as f64,
            },
            kind => {
                let (mean, var) = mean_var(&observed);
                let z = 0.1 * std_normal(rng);
                let x = match kind {
                    ImpKind::Positive if mean > 0.0 => mean * z.exp(),
                    _ => mean + z * var.sqrt(),
                };
                fit_support(x, kind, t.trunc)
            }
        };
        for &r in &t.rows {
            values[t.var][r] = v;
        }
    }
}

/// Names accepted in user initial values.
pub fn init_names(engine: &Engine) -> Vec<String> {
    let mut out = vec!["beta".to_string(), "alpha".to_string()];
    for cm in &engine.models {
        let n = cm.name();
        let pre = if cm.sm.is_analysis() { "beta" } else { "alpha" };
        out.push(format!("{pre}_{n}"));
        if cm.model_type.has_precision() {
            out.push(format!("tau_{n}"));
        }
        if cm.family == Family::Ordinal {
            out.push(format!("gamma_{n}"));
        }
        if cm.family == Family::Weibull {
            out.push(format!("shape_{n}"));
        }
    }
    for m in &engine.vt.metas {
        if m.is_incomplete() && engine.imps.iter().any(|t| engine.vt.metas[t.var].name == m.name) {
            out.push(format!("imp_{}", m.name));
        }
    }
    out
}

fn apply_inits(engine: &Engine, st: &mut ChainState, inits: &Inits) -> Result<()> {
    let known = init_names(engine);
    let bad = |msg: String| Error::Config(format!("initial values of chain {}: {msg}", st.chain + 1));
    for (name, v) in inits {
        if !known.contains(name) {
            return Err(bad(format!("unknown parameter '{name}'")));
        }
        let check_len = |n: usize| {
            if v.len() == n {
                Ok(())
            } else {
                Err(bad(format!("'{name}' needs {n} values, got {}", v.len())))
            }
        };
        if name == "beta" || name == "alpha" {
            let analysis = name == "beta";
            let ms: Vec<usize> = (0..engine.models.len())
                .filter(|&m| engine.models[m].sm.is_analysis() == analysis)
                .collect();
            check_len(ms.iter().map(|&m| engine.models[m].n_coef()).sum())?;
            let mut off = 0;
            for m in ms {
                let n = engine.models[m].n_coef();
                st.models[m].beta.copy_from_slice(&v[off..off + n]);
                off += n;
            }
            continue;
        }
        if let Some(var) = name.strip_prefix("imp_") {
            let vi = engine.vt.require(var)?;
            let ts: Vec<usize> = (0..engine.imps.len()).filter(|&t| engine.imps[t].var == vi).collect();
            check_len(ts.len())?;
            for (t, x) in ts.into_iter().zip(v) {
                let target = &engine.imps[t];
                let x = match target.kind {
                    ImpKind::Categorical(k) => {
                        if x.fract() != 0.0 || *x < 1.0 || *x > k as f64 {
                            return Err(bad(format!("'{name}' must hold category numbers 1 to {k}")));
                        }
                        x - 1.0
                    }
                    _ => *x,
                };
                for &r in &target.rows {
                    st.values[vi][r] = x;
                }
            }
            continue;
        }
        let (prefix, resp) = name.split_once('_').expect("known names contain '_'");
        let m = engine.models.iter().position(|c| c.name() == resp).expect("known model");
        let cm = &engine.models[m];
        let ms = &mut st.models[m];
        match prefix {
            "beta" | "alpha" => {
                check_len(cm.n_coef())?;
                ms.beta.copy_from_slice(v);
            }
            "tau" => {
                check_len(1)?;
                if v[0] <= 0.0 {
                    return Err(bad(format!("'{name}' must be positive")));
                }
                ms.tau = v[0];
            }
            "shape" => {
                check_len(1)?;
                if v[0] <= 0.0 {
                    return Err(bad(format!("'{name}' must be positive")));
                }
                ms.shape = v[0];
            }
            "gamma" => {
                check_len(cm.n_cat - 1)?;
                if v.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(bad(format!("'{name}' must be increasing")));
                }
                ms.gamma1 = v[0];
                ms.delta = v.windows(2).map(|w| (w[1] - w[0]).ln()).collect();
                ms.set_thresholds();
            }
            _ => unreachable!(),
        }
    }
    Ok(())
}

/// Initial state of chain `chain`; every chain has its own random stream.
pub fn init_chain(engine: &Engine, chain: usize, seed: u64, inits: Option<&Inits>) -> Result<ChainState> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    let mut values = engine.data.clone();
    init_imputations(engine, &mut values, &mut rng);
    let models = engine.models.iter().map(|cm| init_model(engine, cm, &mut rng)).collect();
    let steps = engine.models.iter().map(steps_for).collect();
    let imp_steps = engine
        .imps
        .iter()
        .map(|t| Adaptive::new(if t.kind == ImpKind::Real { 0.5 } else { 0.2 }))
        .collect();
    let mut st = ChainState {
        chain,
        values,
        models,
        steps,
        imp_steps,
        rng,
    };
    if let Some(i) = inits {
        apply_inits(engine, &mut st, i)?;
    }
    for t in &engine.imps {
        if let Some(tr) = t.trunc {
            if !tr.contains(st.values[t.var][t.rows[0]]) {
                return Err(Error::Config(format!(
                    "initial value of '{}' lies outside its truncation bounds",
                    engine.vt.metas[t.var].name
                )));
            }
        }
    }
    for (m, cm) in engine.models.iter().enumerate() {
        let p = cm.p;
        for (d, &j) in cm.design.dynamic.iter().enumerate() {
            let col = &cm.design.columns[j];
            for &u in &cm.design.affected[d] {
                let row = cm.design.unit_rows[u];
                st.models[m].x[u * p + j] = col.value(&st.values, row, &engine.vt, &engine.graph.registry);
            }
        }
    }
    let mut buf = vec![0.0; engine.models.iter().map(|c| c.n_lp).max().unwrap_or(1)];
    for (m, cm) in engine.models.iter().enumerate() {
        let ll: f64 = (0..cm.n_units()).map(|u| engine.unit_loglik_fresh(m, &st, u, &mut buf)).sum();
        if !ll.is_finite() {
            return Err(Error::Sampler {
                chain: chain + 1,
                iteration: 0,
                node: cm.name().to_string(),
                message: "initial values have zero likelihood".into(),
            });
        }
    }
    Ok(st)
}
