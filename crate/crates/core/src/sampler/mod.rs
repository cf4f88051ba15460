//! Metropolis-within-Gibbs sampler for the joint model.

pub mod density;
mod engine;
mod linalg;
mod mh;
mod nodes;
mod state;
mod store;
mod sweep;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::ModelGraph;

pub use engine::{CompiledModel, Engine, ImpKind, ImpTarget, Ranef};
pub use linalg::{mvn_canonical, wishart};
pub use mh::{accept, Adaptive, CHECK_WINDOW, TARGET_ACCEPTANCE};
pub use nodes::{all_nodes, data_scale, node_values, select_nodes, NodeInfo, NodeSource};
pub use state::{init_chain, init_names, ChainState, Inits, ModelState};
pub use store::{CompleteCases, McmcSamples, MissInfo, MissingCount, ModelInfo, SampleMeta, ScaleEntry};

/// Environment variable that sets the number of worker threads.
pub const THREADS_ENV: &str = "JOINTGIBBS_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcSettings {
    pub n_chains: usize,
    pub n_adapt: usize,
    pub n_iter: usize,
    pub thin: usize,
    pub seed: u64,
    /// Initial values per chain.
    pub inits: Option<Vec<Inits>>,
    /// Worker threads; falls back to the environment, then to one per core.
    pub threads: Option<usize>,
}

impl Default for McmcSettings {
    fn default() -> Self {
        McmcSettings {
            n_chains: 3,
            n_adapt: 100,
            n_iter: 0,
            thin: 1,
            seed: 1,
            inits: None,
            threads: None,
        }
    }
}

impl McmcSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 {
            return Err(Error::Config("n_chains must be at least 1".into()));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if let Some(i) = &self.inits {
            if i.len() != self.n_chains {
                return Err(Error::Config(format!(
                    "inits given for {} chains, but n_chains is {}",
                    i.len(),
                    self.n_chains
                )));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }

    /// Iteration numbers that are stored: after adaptation, every `thin`-th.
    pub fn stored_iterations(&self) -> Vec<usize> {
        (self.n_adapt + 1..=self.n_adapt + self.n_iter)
            .filter(|t| (t - self.n_adapt) % self.thin == 0)
            .collect()
    }

    fn thread_count(&self) -> Result<Option<usize>> {
        if let Some(t) = self.threads {
            return Ok(Some(t));
        }
        match std::env::var(THREADS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(Some(n)),
                _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
            },
            Err(_) => Ok(None),
        }
    }
}

fn model_info(engine: &Engine) -> Vec<ModelInfo> {
    engine
        .models
        .iter()
        .map(|cm| ModelInfo {
            response: cm.name().to_string(),
            model_type: cm.model_type.to_string(),
            role: cm.sm.role,
            level: cm.sm.level.clone(),
            n_units: cm.n_units(),
            n_missing: engine.vt.metas[cm.var].n_missing,
            group: cm.sm.group.clone(),
            n_groups: cm.ranef.as_ref().map(|r| r.n_groups()),
        })
        .collect()
}

fn scaling_table(engine: &Engine) -> Vec<ScaleEntry> {
    let mut out = Vec::new();
    for cm in &engine.models {
        for col in &cm.design.columns {
            if let Some(s) = col.scale {
                out.push(ScaleEntry {
                    model: cm.name().to_string(),
                    column: col.name.clone(),
                    mean: s.mean,
                    sd: s.sd,
                });
            }
        }
    }
    out
}

fn miss_info(engine: &Engine) -> MissInfo {
    let pct = |n: usize, total: usize| if total == 0 { 0.0 } else { 100.0 * n as f64 / total as f64 };
    let mut info = MissInfo::default();
    let mut levels: Vec<(String, Vec<usize>, usize)> = Vec::new();
    let lvlone: Vec<usize> = (0..engine.data.len()).filter(|&v| !engine.vt.metas[v].is_level2()).collect();
    levels.push((crate::data::LVLONE.to_string(), lvlone, engine.n_rows));
    if let Some(g) = &engine.grouping {
        let l2: Vec<usize> = (0..engine.data.len()).filter(|&v| engine.vt.metas[v].is_level2()).collect();
        levels.push((g.var.clone(), l2, g.n_groups()));
    }
    for (level, vars, total) in &levels {
        let units: Vec<usize> = match (&engine.grouping, level.as_str() == crate::data::LVLONE) {
            (Some(g), false) => g.rows.iter().map(|r| r[0]).collect(),
            _ => (0..engine.n_rows).collect(),
        };
        let n = units.iter().filter(|&&r| vars.iter().all(|&v| !engine.data[v][r].is_nan())).count();
        info.complete_cases.push(CompleteCases { level: level.clone(), n, percent: pct(n, *total) });
        for &v in vars {
            let meta = &engine.vt.metas[v];
            info.missing.push(MissingCount {
                variable: meta.name.clone(),
                level: level.clone(),
                n_missing: meta.n_missing,
                percent: pct(meta.n_missing, *total),
            });
        }
        if level.as_str() != crate::data::LVLONE {
            info.missing.push(MissingCount { variable: level.clone(), level: level.clone(), n_missing: 0, percent: 0.0 });
        }
    }
    info
}

/// Acceptance rates outside [0.1, 0.7] over the last adaptation window.
fn acceptance_warnings(engine: &Engine, st: &ChainState) -> Vec<String> {
    let mut out = Vec::new();
    let off = |a: &Adaptive| a.window_rate().is_some_and(|r| !(0.1..=0.7).contains(&r));
    for (m, cm) in engine.models.iter().enumerate() {
        let s = &st.steps[m];
        let mut n = s.beta.iter().filter(|a| off(a)).count();
        n += s.delta.iter().filter(|a| off(a)).count() + s.b.iter().filter(|a| off(a)).count();
        n += [&s.tau, &s.gamma1, &s.shape].iter().filter(|a| off(a)).count();
        if n > 0 {
            out.push(format!(
                "chain {}: {n} Metropolis update(s) in the model for '{}' ended adaptation with an acceptance rate outside [0.1, 0.7]",
                st.chain + 1,
                cm.name()
            ));
        }
    }
    let n = st.imp_steps.iter().filter(|a| off(a)).count();
    if n > 0 {
        out.push(format!(
            "chain {}: {n} imputation update(s) ended adaptation with an acceptance rate outside [0.1, 0.7]",
            st.chain + 1
        ));
    }
    out
}

fn run_chain(engine: &Engine, settings: &McmcSettings, sources: &[NodeSource], chain: usize) -> Result<(Vec<f64>, Vec<String>)> {
    let inits = settings.inits.as_ref().map(|i| &i[chain]);
    let mut st = init_chain(engine, chain, settings.seed, inits)?;
    let total = settings.n_adapt + settings.n_iter;
    let mut out = Vec::with_capacity(settings.stored_iterations().len() * sources.len());
    let mut warnings = Vec::new();
    for it in 1..=total {
        engine.sweep(&mut st, it, settings.n_adapt)?;
        if it == settings.n_adapt {
            warnings = acceptance_warnings(engine, &st);
        }
        if it > settings.n_adapt && (it - settings.n_adapt) % settings.thin == 0 {
            node_values(engine, &st, sources, &mut out);
        }
    }
    Ok((out, warnings))
}

/// Runs all chains of a compiled model. Chains run in parallel; each has
/// its own random stream, so results do not depend on the thread count.
pub fn run_engine(engine: &Engine, settings: &McmcSettings) -> Result<McmcSamples> {
    settings.validate()?;
    let selected = select_nodes(engine, &engine.graph.monitor)?;
    let (infos, sources): (Vec<NodeInfo>, Vec<NodeSource>) = selected.into_iter().unzip();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = settings.thread_count()? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))?;
    let results: Vec<Result<(Vec<f64>, Vec<String>)>> = pool.install(|| {
        (0..settings.n_chains)
            .into_par_iter()
            .map(|c| run_chain(engine, settings, &sources, c))
            .collect()
    });
    let mut chains = Vec::with_capacity(settings.n_chains);
    let mut warnings = engine.warnings.clone();
    for r in results {
        let (draws, w) = r?;
        chains.push(draws);
        warnings.extend(w);
    }
    for w in &warnings[engine.warnings.len()..] {
        log::warn!("{w}");
    }
    Ok(McmcSamples {
        meta: SampleMeta {
            nodes: infos,
            iterations: settings.stored_iterations(),
            n_chains: settings.n_chains,
            n_adapt: settings.n_adapt,
            n_iter: settings.n_iter,
            thin: settings.thin,
            seed: settings.seed,
            n_obs: engine.n_rows,
            models: model_info(engine),
            scaling: scaling_table(engine),
            missinfo: miss_info(engine),
            warnings,
        },
        chains,
    })
}

/// Compiles the model against the data and samples from the posterior.
pub fn run_mcmc(graph: &ModelGraph, ds: &Dataset, settings: &McmcSettings) -> Result<McmcSamples> {
    let engine = Engine::new(graph, ds)?;
    run_engine(&engine, settings)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n_adapt: usize, n_iter: usize, thin: usize) -> Vec<usize> {
        McmcSettings { n_adapt, n_iter, thin, ..Default::default() }.stored_iterations()
    }

    #[test]
    fn iteration_labels() {
        assert_eq!(labels(100, 100, 1), (101..=200).collect::<Vec<_>>());
        assert_eq!(labels(10, 100, 1), (11..=110).collect::<Vec<_>>());
        assert_eq!(labels(100, 500, 10), (110..=600).step_by(10).collect::<Vec<_>>());
        assert!(labels(100, 0, 1).is_empty());
    }

    #[test]
    fn settings_validation() {
        assert!(McmcSettings { thin: 0, ..Default::default() }.validate().is_err());
        assert!(McmcSettings { n_chains: 0, ..Default::default() }.validate().is_err());
        let s = McmcSettings { n_chains: 2, inits: Some(vec![Inits::new()]), ..Default::default() };
        assert!(s.validate().is_err());
    }
}
