//! Stored draws: one CSV file per chain plus a JSON description.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Role;

use super::nodes::NodeInfo;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub response: String,
    pub model_type: String,
    pub role: Role,
    pub level: String,
    pub n_units: usize,
    pub n_missing: usize,
    #[serde(default)]
    pub group: Option<String>,
    #[serde(default)]
    pub n_groups: Option<usize>,
}

/// Centering and scaling applied to a design column while sampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleEntry {
    pub model: String,
    pub column: String,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompleteCases {
    pub level: String,
    pub n: usize,
    pub percent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissingCount {
    pub variable: String,
    pub level: String,
    pub n_missing: usize,
    pub percent: f64,
}

/// Complete cases per level and missing values per variable.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MissInfo {
    pub complete_cases: Vec<CompleteCases>,
    pub missing: Vec<MissingCount>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub nodes: Vec<NodeInfo>,
    pub iterations: Vec<usize>,
    pub n_chains: usize,
    pub n_adapt: usize,
    pub n_iter: usize,
    pub thin: usize,
    pub seed: u64,
    pub n_obs: usize,
    pub models: Vec<ModelInfo>,
    #[serde(default)]
    pub scaling: Vec<ScaleEntry>,
    #[serde(default)]
    pub missinfo: MissInfo,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Posterior draws of the recorded nodes for every chain.
#[derive(Clone, Debug, PartialEq)]
pub struct McmcSamples {
    pub meta: SampleMeta,
    /// Per chain, row-major `iterations x nodes`.
    pub chains: Vec<Vec<f64>>,
}

impl McmcSamples {
    /// Samples from raw draws, `draws[chain][node][draw]`. Nodes are
    /// labelled as analysis-model coefficients.
    pub fn from_draws(names: &[&str], iterations: Vec<usize>, draws: &[Vec<Vec<f64>>]) -> Result<McmcSamples> {
        let n = iterations.len();
        for c in draws {
            if c.len() != names.len() || c.iter().any(|d| d.len() != n) {
                return Err(Error::Diagnostics("draws do not match the node names and iterations".into()));
            }
        }
        let thin = match iterations.as_slice() {
            [a, b, ..] if b > a => b - a,
            _ => 1,
        };
        let nodes = names
            .iter()
            .map(|name| NodeInfo {
                name: name.to_string(),
                group: crate::graph::NodeGroup::Betas,
                model: String::new(),
                label: name.to_string(),
                rows: Vec::new(),
            })
            .collect();
        let chains = draws
            .iter()
            .map(|c| (0..n).flat_map(|d| c.iter().map(move |node| node[d])).collect())
            .collect();
        Ok(McmcSamples {
            meta: SampleMeta {
                nodes,
                n_adapt: iterations.first().map_or(0, |f| f.saturating_sub(thin)),
                n_iter: n * thin,
                iterations,
                n_chains: draws.len(),
                thin,
                seed: 0,
                n_obs: 0,
                models: Vec::new(),
                scaling: Vec::new(),
                missinfo: MissInfo::default(),
                warnings: Vec::new(),
            },
            chains,
        })
    }

    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn n_draws(&self) -> usize {
        self.meta.iterations.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.meta.nodes.len()
    }

    pub fn node_names(&self) -> Vec<&str> {
        self.meta.nodes.iter().map(|n| n.name.as_str()).collect()
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.meta.nodes.iter().position(|n| n.name == name)
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.node_index(name)
            .ok_or_else(|| Error::Diagnostics(format!("node '{name}' was not recorded")))
    }

    pub fn value(&self, chain: usize, draw: usize, node: usize) -> f64 {
        self.chains[chain][draw * self.n_nodes() + node]
    }

    /// Draws of one node in one chain.
    pub fn chain_draws(&self, chain: usize, node: usize) -> Vec<f64> {
        let n = self.n_nodes();
        self.chains[chain].iter().skip(node).step_by(n).copied().collect()
    }

    /// Draws of one node, chains concatenated.
    pub fn pooled(&self, node: usize) -> Vec<f64> {
        (0..self.n_chains()).flat_map(|c| self.chain_draws(c, node)).collect()
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("samples_meta.json"), serde_json::to_string_pretty(&self.meta)?)?;
        for (c, data) in self.chains.iter().enumerate() {
            let mut w = csv::Writer::from_path(dir.join(format!("chain_{}.csv", c + 1)))?;
            let mut header = vec!["iteration".to_string()];
            header.extend(self.meta.nodes.iter().map(|n| n.name.clone()));
            w.write_record(&header)?;
            for (d, it) in self.meta.iterations.iter().enumerate() {
                let mut rec = vec![it.to_string()];
                rec.extend(
                    data[d * self.n_nodes()..(d + 1) * self.n_nodes()]
                        .iter()
                        .map(|v| v.to_string()),
                );
                w.write_record(&rec)?;
            }
            w.flush()?;
        }
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<McmcSamples> {
        let meta: SampleMeta = serde_json::from_str(&fs::read_to_string(dir.join("samples_meta.json"))?)?;
        let mut chains = Vec::with_capacity(meta.n_chains);
        for c in 0..meta.n_chains {
            let mut r = csv::Reader::from_path(dir.join(format!("chain_{}.csv", c + 1)))?;
            let header = r.headers()?.clone();
            if header.len() != meta.nodes.len() + 1
                || header.iter().skip(1).zip(&meta.nodes).any(|(h, n)| h != n.name)
            {
                return Err(Error::Diagnostics(format!("chain {} does not match the sample description", c + 1)));
            }
            let mut data = Vec::with_capacity(meta.iterations.len() * meta.nodes.len());
            let mut rows = 0;
            for rec in r.records() {
                let rec = rec?;
                for f in rec.iter().skip(1) {
                    data.push(f.parse::<f64>().map_err(|_| {
                        Error::Diagnostics(format!("invalid number '{f}' in chain {}", c + 1))
                    })?);
                }
                rows += 1;
            }
            if rows != meta.iterations.len() {
                return Err(Error::Diagnostics(format!("chain {} has {rows} draws, expected {}", c + 1, meta.iterations.len())));
            }
            chains.push(data);
        }
        Ok(McmcSamples { meta, chains })
    }

    /// Draws restricted to some nodes, iterations and chains.
    pub fn subset(&self, nodes: &[usize], draws: &[usize], chains: &[usize]) -> McmcSamples {
        let mut meta = self.meta.clone();
        meta.nodes = nodes.iter().map(|&i| self.meta.nodes[i].clone()).collect();
        meta.iterations = draws.iter().map(|&d| self.meta.iterations[d]).collect();
        meta.n_chains = chains.len();
        let out = chains
            .iter()
            .map(|&c| {
                let mut v = Vec::with_capacity(nodes.len() * draws.len());
                for &d in draws {
                    for &n in nodes {
                        v.push(self.value(c, d, n));
                    }
                }
                v
            })
            .collect();
        McmcSamples { meta, chains: out }
    }
}
