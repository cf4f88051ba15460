//! Data behind trace, density, Monte Carlo error and imputation plots.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::diagnostics::{mc_error, quantile, sd, SubsetSpec, MCSE_RATIO_LIMIT};
use crate::error::{Error, Result};
use crate::graph::ModelGraph;
use crate::sampler::McmcSamples;

use super::impute::ImputedStack;

pub const DENSITY_POINTS: usize = 512;
/// The density grid extends this many bandwidths beyond the data.
const DENSITY_CUT: f64 = 3.0;
const HISTOGRAM_BINS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Trace,
    Density,
    McseRatio,
    ImpDistr,
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "trace" => PlotKind::Trace,
            "density" => PlotKind::Density,
            "mcse_ratio" => PlotKind::McseRatio,
            "imp_distr" => PlotKind::ImpDistr,
            _ => return Err(Error::Config(format!("unknown plot kind '{s}'"))),
        })
    }
}

/// A long-format CSV table with a JSON description.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotData {
    pub kind: PlotKind,
    pub header: serde_json::Value,
    pub csv: String,
}

impl PlotData {
    /// Writes `<stem>.csv` and the one-line `<stem>.json` sidecar.
    pub fn write(&self, stem: &Path) -> Result<()> {
        std::fs::write(stem.with_extension("csv"), &self.csv)?;
        std::fs::write(stem.with_extension("json"), format!("{}\n", serde_json::to_string(&self.header)?))?;
        Ok(())
    }
}

fn csv_table(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(format!("cannot write CSV: {e}")))?;
    String::from_utf8(bytes).map_err(|_| Error::Data("CSV output is not valid UTF-8".into()))
}

/// Rule-of-thumb bandwidth `0.9 min(sd, IQR/1.34) n^(-1/5)`.
pub fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let s = sd(sorted);
    let iqr = (quantile(sorted, 0.75) - quantile(sorted, 0.25)) / 1.34;
    let mut lo = s.min(iqr);
    if !(lo > 0.0) {
        lo = if s > 0.0 {
            s
        } else if sorted[0] != 0.0 {
            sorted[0].abs()
        } else {
            1.0
        };
    }
    0.9 * lo * n.powf(-0.2)
}

/// Gaussian kernel density estimate on an evenly spaced grid.
pub fn kernel_density(x: &[f64], points: usize) -> Vec<(f64, f64)> {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = silverman_bandwidth(&sorted);
    let lo = sorted[0] - DENSITY_CUT * h;
    let hi = sorted[sorted.len() - 1] + DENSITY_CUT * h;
    let step = (hi - lo) / (points - 1) as f64;
    let norm = 1.0 / (x.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    (0..points)
        .map(|i| {
            let g = lo + step * i as f64;
            let d: f64 = x.iter().map(|v| (-0.5 * ((g - v) / h).powi(2)).exp()).sum();
            (g, d * norm)
        })
        .collect()
}

fn trace(s: &McmcSamples) -> Result<String> {
    let rows = (0..s.n_chains()).flat_map(move |c| {
        (0..s.n_draws()).flat_map(move |d| {
            (0..s.n_nodes()).map(move |n| {
                vec![
                    (c + 1).to_string(),
                    s.meta.iterations[d].to_string(),
                    s.meta.nodes[n].name.clone(),
                    s.value(c, d, n).to_string(),
                ]
            })
        })
    });
    csv_table(&["chain", "iteration", "node", "value"], rows)
}

fn density(s: &McmcSamples) -> Result<String> {
    let mut rows = Vec::new();
    for n in 0..s.n_nodes() {
        for c in 0..s.n_chains() {
            let draws = s.chain_draws(c, n);
            if draws.is_empty() {
                continue;
            }
            for (x, d) in kernel_density(&draws, DENSITY_POINTS) {
                rows.push(vec![s.meta.nodes[n].name.clone(), (c + 1).to_string(), x.to_string(), d.to_string()]);
            }
        }
    }
    csv_table(&["node", "chain", "x", "density"], rows.into_iter())
}

fn mcse_ratio(samples: &McmcSamples, subset: &SubsetSpec) -> Result<String> {
    let r = mc_error(samples, subset)?;
    let rows = r.nodes.into_iter().map(|n| {
        vec![
            n.name,
            n.ratio.map(|v| v.to_string()).unwrap_or_else(|| "NA".into()),
            MCSE_RATIO_LIMIT.to_string(),
        ]
    });
    csv_table(&["node", "ratio", "limit"], rows)
}

/// Observed values against each completed copy: category proportions for
/// categorical variables, histogram densities on shared bins otherwise.
/// Only imputed cells enter the per-imputation series.
pub fn imp_distr(mi: &ImputedStack, graph: &ModelGraph, vars: &[String]) -> Result<String> {
    let data = &mi.data;
    let imp = data.require("Imputation_")?.numeric_values()?;
    let rownr = data.require(".rownr")?.numeric_values()?;
    let n_imp = imp.iter().flatten().fold(0.0f64, |a, &b| a.max(b)) as usize;
    let mut rows = Vec::new();
    for var in vars {
        let meta = graph
            .meta(var)
            .ok_or_else(|| Error::Config(format!("'{var}' is not a variable of the model")))?;
        let col = data.require(var)?;
        // missingness is read off the original data (imputation 0)
        let n = rownr.iter().flatten().fold(0.0f64, |a, &b| a.max(b)) as usize;
        let mut originally_missing = vec![false; n];
        let has_original = imp.contains(&Some(0.0));
        if !has_original && mi.imputed.contains(var) {
            return Err(Error::Config("imputation plots need the original data in the stack (include = true)".into()));
        }
        for r in 0..data.n_rows() {
            if imp[r] == Some(0.0) {
                originally_missing[rownr[r].unwrap() as usize - 1] = col.is_missing(r);
            }
        }
        let series = |k: usize| -> Vec<usize> {
            (0..data.n_rows())
                .filter(|&r| {
                    imp[r] == Some(k as f64) && {
                        let i = rownr[r].unwrap() as usize - 1;
                        if k == 0 { !col.is_missing(r) } else { originally_missing[i] }
                    }
                })
                .collect()
        };
        let mut groups: Vec<(String, Vec<usize>)> = vec![("observed".into(), series(0))];
        if mi.imputed.contains(var) {
            for k in 1..=n_imp {
                groups.push((format!("imputation_{k}"), series(k)));
            }
        }
        if meta.vtype.is_categorical() {
            for (source, rs) in &groups {
                let labels: Vec<String> = rs.iter().filter_map(|&r| col.label(r)).collect();
                for level in &meta.levels {
                    let count = labels.iter().filter(|l| *l == level).count();
                    let prop = if labels.is_empty() { 0.0 } else { count as f64 / labels.len() as f64 };
                    rows.push(vec![var.clone(), source.clone(), level.clone(), String::new(), String::new(), prop.to_string()]);
                }
            }
        } else {
            let values = col.numeric_values()?;
            let all: Vec<f64> = groups.iter().flat_map(|(_, rs)| rs.iter().filter_map(|&r| values[r])).collect();
            if all.is_empty() {
                continue;
            }
            let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let width = if hi > lo { (hi - lo) / HISTOGRAM_BINS as f64 } else { 1.0 };
            for (source, rs) in &groups {
                let v: Vec<f64> = rs.iter().filter_map(|&r| values[r]).collect();
                let mut counts = [0usize; HISTOGRAM_BINS];
                for x in &v {
                    let b = (((x - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
                    counts[b] += 1;
                }
                for (b, c) in counts.iter().enumerate() {
                    let dens = if v.is_empty() { 0.0 } else { *c as f64 / (v.len() as f64 * width) };
                    let a = lo + width * b as f64;
                    rows.push(vec![
                        var.clone(),
                        source.clone(),
                        format!("{}", a + 0.5 * width),
                        a.to_string(),
                        (a + width).to_string(),
                        dens.to_string(),
                    ]);
                }
            }
        }
    }
    csv_table(&["variable", "source", "value", "bin_lo", "bin_hi", "density"], rows.into_iter())
}

/// Plot data of the selected nodes. `imp_distr` needs a completed-data
/// stack and the model graph.
pub fn emit_plot_data(
    samples: &McmcSamples,
    kind: PlotKind,
    subset: &SubsetSpec,
    mi: Option<(&ImputedStack, &ModelGraph)>,
) -> Result<PlotData> {
    let (csv, header) = match kind {
        PlotKind::ImpDistr => {
            let (mi, graph) = mi.ok_or_else(|| Error::Config("imp_distr needs imputed datasets".into()))?;
            let vars: Vec<String> = graph
                .metas
                .iter()
                .filter(|m| mi.data.has(&m.name))
                .map(|m| m.name.clone())
                .collect();
            let csv = imp_distr(mi, graph, &vars)?;
            (csv, json!({"kind": "imp_distr", "variables": vars, "picks": mi.picks, "bins": HISTOGRAM_BINS}))
        }
        PlotKind::McseRatio => {
            let csv = mcse_ratio(samples, subset)?;
            (csv, json!({"kind": "mcse_ratio", "limit": MCSE_RATIO_LIMIT}))
        }
        PlotKind::Trace | PlotKind::Density => {
            let s = subset.apply(samples)?;
            let nodes: Vec<&str> = s.node_names();
            if kind == PlotKind::Trace {
                (trace(&s)?, json!({"kind": "trace", "nodes": nodes, "n_chains": s.n_chains(), "iterations": [s.meta.iterations.first(), s.meta.iterations.last()]}))
            } else {
                (density(&s)?, json!({"kind": "density", "nodes": nodes, "kernel": "gaussian", "bandwidth": "silverman", "points": DENSITY_POINTS}))
            }
        }
    };
    Ok(PlotData { kind, header, csv })
}

/// Plot data for an imputation comparison without the sample store.
pub fn imp_distr_data(mi: &ImputedStack, graph: &ModelGraph, vars: &[String]) -> Result<PlotData> {
    let csv = imp_distr(mi, graph, vars)?;
    Ok(PlotData {
        kind: PlotKind::ImpDistr,
        header: json!({"kind": "imp_distr", "variables": vars, "picks": mi.picks, "bins": HISTOGRAM_BINS}),
        csv,
    })
}
