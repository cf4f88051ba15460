//! Completed datasets from stored imputed values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Column, ColumnData, Dataset};
use crate::error::{Error, Result};
use crate::graph::{ModelGraph, NodeGroup};
use crate::sampler::McmcSamples;

pub const DEFAULT_MINSPACE: usize = 50;
const MAX_ATTEMPTS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiOptions {
    pub m: usize,
    /// Add the original data as imputation 0.
    pub include: bool,
    /// First iteration (by label) that may be used.
    pub start: Option<usize>,
    /// Minimum distance in iterations between chosen iterations.
    pub minspace: usize,
    pub seed: u64,
}

impl Default for MiOptions {
    fn default() -> Self {
        MiOptions { m: 10, include: true, start: None, minspace: DEFAULT_MINSPACE, seed: 1 }
    }
}

/// Chain (1-based) and iteration a completed copy was taken from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pick {
    pub chain: usize,
    pub iteration: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImputedStack {
    /// Columns `Imputation_`, `.id`, `.rownr`, then the data columns.
    pub data: Dataset,
    pub picks: Vec<Pick>,
    /// Variables with filled cells.
    pub imputed: Vec<String>,
}

/// Iterations at least `minspace` apart, chosen one at a time uniformly
/// from those still allowed; restarts when the choice runs into a dead end.
fn choose_iterations(eligible: &[usize], m: usize, minspace: usize, rng: &mut ChaCha20Rng) -> Result<Vec<usize>> {
    let mut greedy = 0;
    let mut last: Option<usize> = None;
    for &it in eligible {
        if last.is_none_or(|l| it - l >= minspace) {
            greedy += 1;
            last = Some(it);
        }
    }
    if greedy < m {
        return Err(Error::Config(format!(
            "cannot choose {m} iterations at least {minspace} apart from {} eligible iterations",
            eligible.len()
        )));
    }
    for _ in 0..MAX_ATTEMPTS {
        let mut chosen: Vec<usize> = Vec::with_capacity(m);
        while chosen.len() < m {
            let allowed: Vec<usize> = eligible
                .iter()
                .copied()
                .filter(|&it| chosen.iter().all(|&c| it.abs_diff(c) >= minspace.max(1)))
                .collect();
            if allowed.is_empty() {
                break;
            }
            chosen.push(allowed[rng.random_range(0..allowed.len())]);
        }
        if chosen.len() == m {
            return Ok(chosen);
        }
    }
    Err(Error::Config(format!(
        "no set of {m} iterations at least {minspace} apart was found in {MAX_ATTEMPTS} attempts"
    )))
}

fn fill(col: &Column, rows: &[usize], value: f64) -> Result<Column> {
    let mut out = col.clone();
    match &mut out.data {
        ColumnData::Numeric(v) => {
            for &r in rows {
                v[r] = Some(value);
            }
        }
        ColumnData::Categorical { .. } => {
            return Err(Error::Data(format!("'{}' is categorical in the data but continuous in the model", col.name)))
        }
    }
    Ok(out)
}

/// Restores the category order of `orig` in a rebuilt categorical column.
fn keep_order(orig: &Column, col: &mut Column) {
    if let (ColumnData::Categorical { levels: old, .. }, ColumnData::Categorical { codes, levels }) = (&orig.data, &mut col.data) {
        let mut order = old.clone();
        for l in levels.iter() {
            if !order.contains(l) {
                order.push(l.clone());
            }
        }
        for c in codes.iter_mut().flatten() {
            *c = order.iter().position(|l| *l == levels[*c]).unwrap();
        }
        *levels = order;
    }
}

fn fill_label(col: &Column, rows: &[usize], label: &str) -> Result<Column> {
    if col.is_numeric() {
        let v = label
            .parse::<f64>()
            .map_err(|_| Error::Data(format!("category '{label}' of '{}' is not numeric", col.name)))?;
        return fill(col, rows, v);
    }
    let values: Vec<Option<String>> = (0..col.len())
        .map(|r| if rows.contains(&r) { Some(label.to_string()) } else { col.label(r) })
        .collect();
    let mut out = Column::categorical(&col.name, &values);
    keep_order(col, &mut out);
    Ok(out)
}

fn with_ids(data: &Dataset, imputation: usize) -> Vec<Column> {
    let n = data.n_rows();
    let mut cols = vec![
        Column::numeric("Imputation_", vec![Some(imputation as f64); n]),
        // unique over the stacked table
        Column::numeric(".id", (0..n).map(|r| Some((imputation * n + r + 1) as f64)).collect()),
        Column::numeric(".rownr", (0..n).map(|r| Some((r + 1) as f64)).collect()),
    ];
    cols.extend(data.columns().iter().cloned());
    cols
}

fn stack(parts: Vec<Vec<Column>>) -> Result<Dataset> {
    let Some(first) = parts.first() else {
        return Dataset::new(Vec::new());
    };
    let mut out = Vec::with_capacity(first.len());
    for j in 0..first.len() {
        let name = &first[j].name;
        let numeric = parts.iter().all(|p| p[j].is_numeric());
        out.push(if numeric {
            Column::numeric(name, parts.iter().flat_map(|p| p[j].numeric_values().unwrap().to_vec()).collect())
        } else {
            let labels: Vec<Option<String>> = parts.iter().flat_map(|p| (0..p[j].len()).map(|r| p[j].label(r))).collect();
            let mut col = Column::categorical(name, &labels);
            keep_order(&first[j], &mut col);
            col
        });
    }
    Dataset::new(out)
}

/// `m` completed copies of `data`, each filled with the imputed values of
/// one randomly chosen chain and iteration, stacked below the original
/// data when `include` is set.
pub fn get_mi_dat(samples: &McmcSamples, graph: &ModelGraph, data: &Dataset, opts: &MiOptions) -> Result<ImputedStack> {
    let imps: Vec<usize> = (0..samples.n_nodes())
        .filter(|&i| samples.meta.nodes[i].group == NodeGroup::Imps)
        .collect();
    let needs = !graph.incomplete().is_empty();
    if opts.m > 0 && needs && imps.is_empty() {
        return Err(Error::Config("imputed values were not monitored; fit with monitor imps = true".into()));
    }
    let its = &samples.meta.iterations;
    let start = opts.start.unwrap_or(0);
    let eligible: Vec<usize> = its.iter().copied().filter(|&it| it >= start).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
    let chosen = if opts.m == 0 { Vec::new() } else { choose_iterations(&eligible, opts.m, opts.minspace, &mut rng)? };
    let picks: Vec<Pick> = chosen
        .iter()
        .map(|&iteration| Pick { chain: rng.random_range(0..samples.n_chains()) + 1, iteration })
        .collect();

    let mut imputed: Vec<String> = Vec::new();
    for &i in &imps {
        let var = &samples.meta.nodes[i].model;
        if !imputed.contains(var) {
            imputed.push(var.clone());
        }
    }
    let mut parts = Vec::new();
    if opts.include {
        parts.push(with_ids(data, 0));
    }
    for (k, pick) in picks.iter().enumerate() {
        let draw = its.iter().position(|&it| it == pick.iteration).expect("eligible iteration");
        let mut cols: Vec<Column> = data.columns().to_vec();
        for &i in &imps {
            let node = &samples.meta.nodes[i];
            let j = cols
                .iter()
                .position(|c| c.name == node.model)
                .ok_or_else(|| Error::Data(format!("data has no column '{}'", node.model)))?;
            let value = samples.value(pick.chain - 1, draw, i);
            let meta = graph.meta(&node.model);
            cols[j] = match meta {
                Some(m) if m.vtype.is_categorical() => {
                    let code = value.round() as usize;
                    let label = m.levels.get(code.wrapping_sub(1)).ok_or_else(|| {
                        Error::Data(format!("stored category {value} of '{}' is out of range", node.model))
                    })?;
                    fill_label(&cols[j], &node.rows, label)?
                }
                _ => fill(&cols[j], &node.rows, value)?,
            };
        }
        parts.push(with_ids(&Dataset::new(cols)?, k + 1));
    }
    Ok(ImputedStack { data: stack(parts)?, picks, imputed })
}
