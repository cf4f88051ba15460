//! Posterior summaries, convergence and precision criteria.

mod stats;
mod text;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::graph::{resolve_monitor, MonitorSet, NodeGroup};
use crate::sampler::{McmcSamples, MissInfo};

pub use stats::{batch_means_se, mean, psrf, quantile, sd, tail_probability, variance, Psrf};
pub use text::{gelman_rubin_text, mc_error_text, summary_text};

/// MCSE to posterior sd ratio above which a node is flagged.
pub const MCSE_RATIO_LIMIT: f64 = 0.05;

/// Which part of the stored sample to use.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubsetSpec {
    /// First iteration (by label) to keep.
    pub start: Option<usize>,
    /// Last iteration (by label) to keep.
    pub end: Option<usize>,
    /// Keep every `thin`-th stored draw within the window.
    pub thin: Option<usize>,
    /// 1-based chain numbers to drop.
    pub exclude_chains: Vec<usize>,
    /// Node selection with the monitor keywords, plus `other` for names.
    /// All stored analysis-model parameters when absent.
    pub nodes: Option<BTreeMap<String, Value>>,
}

impl SubsetSpec {
    /// Restricts `samples` to the selected iterations, chains and nodes.
    pub fn apply(&self, samples: &McmcSamples) -> Result<McmcSamples> {
        let its = &samples.meta.iterations;
        let (first, last) = match (its.first(), its.last()) {
            (Some(&f), Some(&l)) => (f, l),
            _ => return Err(Error::Diagnostics("the sample contains no stored iterations".into())),
        };
        let start = self.start.unwrap_or(first);
        let end = self.end.unwrap_or(last);
        if start > end {
            return Err(Error::Diagnostics(format!("start ({start}) is after end ({end})")));
        }
        if start < first || end > last {
            return Err(Error::Diagnostics(format!(
                "iterations {start}:{end} are outside the stored range {first}:{last}"
            )));
        }
        let thin = self.thin.unwrap_or(1);
        if thin == 0 {
            return Err(Error::Diagnostics("thin must be at least 1".into()));
        }
        let draws: Vec<usize> = (0..its.len())
            .filter(|&d| its[d] >= start && its[d] <= end)
            .enumerate()
            .filter(|(k, _)| k % thin == 0)
            .map(|(_, d)| d)
            .collect();
        for &c in &self.exclude_chains {
            if c == 0 || c > samples.n_chains() {
                return Err(Error::Diagnostics(format!(
                    "cannot exclude chain {c}: the sample has {} chain(s)",
                    samples.n_chains()
                )));
            }
        }
        let chains: Vec<usize> = (0..samples.n_chains())
            .filter(|c| !self.exclude_chains.contains(&(c + 1)))
            .collect();
        if chains.is_empty() {
            return Err(Error::Diagnostics("every chain is excluded".into()));
        }
        let nodes = self.select(samples)?;
        let mut out = samples.subset(&nodes, &draws, &chains);
        out.meta.thin = samples.meta.thin * thin;
        Ok(out)
    }

    fn select(&self, samples: &McmcSamples) -> Result<Vec<usize>> {
        let set = match &self.nodes {
            Some(map) => resolve_monitor(map)?,
            None => MonitorSet::analysis_main(),
        };
        let names = samples.node_names();
        for name in &set.other {
            if !names.contains(&name.as_str()) {
                return Err(Error::Diagnostics(format!("node '{name}' was not monitored")));
            }
        }
        let chosen: Vec<usize> = samples
            .meta
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| set.contains(n.group) || set.other.contains(&n.name))
            .map(|(i, _)| i)
            .collect();
        if !chosen.is_empty() {
            return Ok(chosen);
        }
        if self.nodes.is_none() && samples.n_nodes() > 0 {
            return Ok((0..samples.n_nodes()).collect());
        }
        Err(Error::Diagnostics("the selection contains no stored node".into()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SummaryOptions {
    /// Lower and upper quantile.
    pub probs: (f64, f64),
    /// Include complete-case and missing-value tables.
    pub missinfo: bool,
    pub confidence: f64,
    pub autoburnin: bool,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        SummaryOptions {
            probs: (0.025, 0.975),
            missinfo: false,
            confidence: 0.95,
            autoburnin: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSummary {
    pub name: String,
    pub group: NodeGroup,
    pub model: String,
    pub mean: f64,
    pub sd: f64,
    pub quantile_lo: f64,
    pub quantile_hi: f64,
    /// Absent for parameters restricted to be positive.
    pub tail_prob: Option<f64>,
    pub gr_point: Option<f64>,
    pub gr_upper: Option<f64>,
    pub mcse_sd_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryMeta {
    pub first_iteration: usize,
    pub last_iteration: usize,
    pub sample_size_per_chain: usize,
    pub thin: usize,
    pub n_chains: usize,
    pub n_obs: usize,
    /// Grouping variable and number of groups.
    pub groups: Vec<(String, usize)>,
    /// Analysis model types, in sampling order.
    pub analysis_types: Vec<String>,
    pub probs: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub nodes: Vec<NodeSummary>,
    pub meta: SummaryMeta,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub missinfo: Option<MissInfo>,
    pub warnings: Vec<String>,
}

fn positive_only(n: &crate::sampler::NodeInfo) -> bool {
    use NodeGroup::*;
    match n.group {
        SigmaMain | SigmaOther | TauMain | TauMainBeta | TauOther | ShapeMain | RinvDMain | RinvDOther => true,
        DMain | DOther | InvDMain | InvDOther => {
            let idx = n.name.rsplit('[').next().unwrap_or("").trim_end_matches(']');
            idx.split(',').collect::<Vec<_>>().windows(2).all(|w| w[0] == w[1])
        }
        _ => false,
    }
}

fn chains_of(samples: &McmcSamples, node: usize, autoburnin: bool) -> Vec<Vec<f64>> {
    (0..samples.n_chains())
        .map(|c| {
            let d = samples.chain_draws(c, node);
            if autoburnin {
                d[d.len() / 2..].to_vec()
            } else {
                d
            }
        })
        .collect()
}

fn summary_meta(s: &McmcSamples, probs: (f64, f64)) -> SummaryMeta {
    let its = &s.meta.iterations;
    SummaryMeta {
        first_iteration: its.first().copied().unwrap_or(0),
        last_iteration: its.last().copied().unwrap_or(0),
        sample_size_per_chain: its.len(),
        thin: s.meta.thin,
        n_chains: s.n_chains(),
        n_obs: s.meta.n_obs,
        groups: s
            .meta
            .models
            .iter()
            .filter_map(|m| Some((m.group.clone()?, m.n_groups?)))
            .fold(Vec::new(), |mut acc, g| {
                if !acc.contains(&g) {
                    acc.push(g);
                }
                acc
            }),
        analysis_types: s
            .meta
            .models
            .iter()
            .filter(|m| m.role == crate::graph::Role::Analysis)
            .map(|m| m.model_type.clone())
            .collect(),
        probs,
    }
}

/// Posterior summary of the selected nodes, all retained chains pooled.
pub fn summarize(samples: &McmcSamples, subset: &SubsetSpec) -> Result<PosteriorSummary> {
    summarize_with(samples, subset, &SummaryOptions::default())
}

pub fn summarize_with(samples: &McmcSamples, subset: &SubsetSpec, opts: &SummaryOptions) -> Result<PosteriorSummary> {
    let (lo, hi) = opts.probs;
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        return Err(Error::Diagnostics(format!("invalid quantile probabilities ({lo}, {hi})")));
    }
    let s = subset.apply(samples)?;
    if s.n_draws() < 2 {
        return Err(Error::Diagnostics("a summary needs at least two retained iterations".into()));
    }
    let mut warnings = Vec::new();
    let mut nodes = Vec::with_capacity(s.n_nodes());
    for (i, info) in s.meta.nodes.iter().enumerate() {
        let pooled = s.pooled(i);
        let mut sorted = pooled.clone();
        sorted.sort_by(f64::total_cmp);
        let sdv = sd(&pooled);
        let (gr_point, gr_upper) = if s.n_chains() > 1 {
            match psrf(&chains_of(&s, i, opts.autoburnin), opts.confidence) {
                Ok(p) => (Some(p.point), Some(p.upper)),
                Err(_) => (None, None),
            }
        } else {
            (None, None)
        };
        let ratio = match batch_means_se(&pooled) {
            Ok(se) if sdv > 0.0 => Some(se / sdv),
            _ => None,
        };
        nodes.push(NodeSummary {
            name: info.name.clone(),
            group: info.group,
            model: info.model.clone(),
            mean: mean(&pooled),
            sd: sdv,
            quantile_lo: quantile(&sorted, lo),
            quantile_hi: quantile(&sorted, hi),
            tail_prob: (!positive_only(info)).then(|| tail_probability(&pooled)),
            gr_point,
            gr_upper,
            mcse_sd_ratio: ratio,
        });
    }
    if s.n_chains() == 1 {
        warnings.push("the Gelman-Rubin criterion needs at least two chains".into());
    }
    Ok(PosteriorSummary {
        nodes,
        meta: summary_meta(&s, opts.probs),
        missinfo: opts.missinfo.then(|| s.meta.missinfo.clone()),
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodePsrf {
    pub name: String,
    pub point: Option<f64>,
    pub upper: Option<f64>,
    /// Why the criterion is undefined for this node.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Gelman-Rubin criterion per selected node.
pub fn gelman_rubin(samples: &McmcSamples, subset: &SubsetSpec, confidence: f64, autoburnin: bool) -> Result<Vec<NodePsrf>> {
    let s = subset.apply(samples)?;
    if s.n_chains() < 2 {
        return Err(Error::Diagnostics("the Gelman-Rubin criterion needs at least two chains".into()));
    }
    if !(0.0..1.0).contains(&confidence) {
        return Err(Error::Diagnostics(format!("confidence must be in [0, 1), got {confidence}")));
    }
    Ok(s.meta
        .nodes
        .iter()
        .enumerate()
        .map(|(i, info)| match psrf(&chains_of(&s, i, autoburnin), confidence) {
            Ok(p) => NodePsrf { name: info.name.clone(), point: Some(p.point), upper: Some(p.upper), error: None },
            Err(e) => NodePsrf { name: info.name.clone(), point: None, upper: None, error: Some(e.to_string()) },
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeMcError {
    pub name: String,
    pub est: f64,
    pub mcse: f64,
    pub sd: f64,
    /// `mcse / sd`; absent when the posterior sd is zero.
    pub ratio: Option<f64>,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McErrorReport {
    pub nodes: Vec<NodeMcError>,
    pub warnings: Vec<String>,
}

/// Monte Carlo error of the posterior mean per selected node, chains pooled.
pub fn mc_error(samples: &McmcSamples, subset: &SubsetSpec) -> Result<McErrorReport> {
    let s = subset.apply(samples)?;
    let total = s.n_draws() * s.n_chains();
    let mut warnings = Vec::new();
    if total < 100 {
        warnings.push(format!("only {total} draws are retained; the Monte Carlo error is unreliable"));
    }
    let mut nodes = Vec::with_capacity(s.n_nodes());
    for (i, info) in s.meta.nodes.iter().enumerate() {
        let pooled = s.pooled(i);
        let mcse = batch_means_se(&pooled)?;
        let sdv = sd(&pooled);
        let ratio = (sdv > 0.0).then(|| mcse / sdv);
        nodes.push(NodeMcError {
            name: info.name.clone(),
            est: mean(&pooled),
            mcse,
            sd: sdv,
            ratio,
            flagged: ratio.is_some_and(|r| r > MCSE_RATIO_LIMIT),
        });
    }
    let flagged = nodes.iter().filter(|n| n.flagged).count();
    if flagged > 0 {
        warnings.push(format!(
            "{flagged} node(s) have a Monte Carlo error above {}% of the posterior sd",
            MCSE_RATIO_LIMIT * 100.0
        ));
    }
    Ok(McErrorReport { nodes, warnings })
}
