//! Posterior predictions for new data.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{category_codes, ColumnData, Dataset};
use crate::diagnostics::{mean, quantile, SubsetSpec};
use crate::error::{Error, Result};
use crate::graph::{term_columns, DesignColumn, Family, ModelGraph, NodeGroup, SubModel, VarTable};
use crate::sampler::density::{cumulative_probs, log_sum_exp, sigmoid};
use crate::sampler::McmcSamples;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictType {
    Link,
    Lp,
    Response,
    Prob,
    Class,
}

impl FromStr for PredictType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "link" => PredictType::Link,
            "lp" => PredictType::Lp,
            "response" => PredictType::Response,
            "prob" => PredictType::Prob,
            "class" => PredictType::Class,
            _ => return Err(Error::Config(format!("unknown prediction type '{s}'"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictOptions {
    pub pred_type: PredictType,
    pub quantiles: (f64, f64),
    /// Response of the analysis model to predict; the first by default.
    pub outcome: Option<String>,
    pub subset: SubsetSpec,
}

impl Default for PredictOptions {
    fn default() -> Self {
        PredictOptions {
            pred_type: PredictType::Link,
            quantiles: (0.025, 0.975),
            outcome: None,
            subset: SubsetSpec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionResult {
    pub pred_type: PredictType,
    pub outcome: String,
    /// One entry per predicted quantity: `fit` for scalar types, category
    /// labels for probabilities.
    pub labels: Vec<String>,
    /// `rows x labels`: posterior mean and quantiles.
    pub fit: Vec<Vec<f64>>,
    pub lo: Vec<Vec<f64>>,
    pub hi: Vec<Vec<f64>>,
    /// Category with the largest mean probability, for `class`.
    pub class: Option<Vec<String>>,
    pub newdata: Dataset,
    pub quantiles: (f64, f64),
}

impl PredictionResult {
    /// `newdata` with the predictions appended as columns.
    pub fn table(&self) -> Result<Dataset> {
        let mut cols = self.newdata.columns().to_vec();
        let qname = |p: f64| format!("{}%", (p * 1000.0).round() / 10.0);
        if let Some(class) = &self.class {
            let labels: Vec<Option<&str>> = class.iter().map(|c| Some(c.as_str())).collect();
            cols.push(crate::data::Column::categorical("class", &labels));
        }
        for (k, label) in self.labels.iter().enumerate() {
            let prefix = if self.labels.len() == 1 { String::new() } else { format!("{label}.") };
            for (name, m) in [
                ("fit".to_string(), &self.fit),
                (qname(self.quantiles.0), &self.lo),
                (qname(self.quantiles.1), &self.hi),
            ] {
                let v = m.iter().map(|row| Some(row[k])).collect();
                cols.push(crate::data::Column::numeric(&format!("{prefix}{name}"), v));
            }
        }
        Dataset::new(cols)
    }
}

/// Everything needed to evaluate one analysis model on new rows.
struct Predictor<'a> {
    sm: &'a SubModel,
    family: Family,
    columns: Vec<DesignColumn>,
    /// Category labels of a categorical outcome.
    levels: Vec<String>,
    reference: usize,
    /// Node index per coefficient, `lp x columns`.
    coef: Vec<usize>,
    n_lp: usize,
    /// Threshold node indices of a cumulative logit model.
    gamma: Vec<usize>,
}

fn analysis_model<'a>(graph: &'a ModelGraph, outcome: Option<&str>) -> Result<&'a SubModel> {
    match outcome {
        None => graph
            .analysis()
            .next()
            .ok_or_else(|| Error::Model("the model has no analysis model".into())),
        Some(o) => graph
            .analysis()
            .find(|s| s.name() == o)
            .ok_or_else(|| Error::Config(format!("'{o}' is not the response of an analysis model"))),
    }
}

impl<'a> Predictor<'a> {
    fn new(graph: &'a ModelGraph, vt: &VarTable, samples: &McmcSamples, outcome: Option<&str>) -> Result<Self> {
        let sm = analysis_model(graph, outcome)?;
        let family = sm.model_type.family();
        let mut columns = Vec::new();
        if sm.intercept {
            columns.push(DesignColumn::intercept());
        }
        columns.extend(term_columns(&sm.terms, vt)?);
        let resp = sm.name();
        let (levels, reference) = match family {
            Family::Binomial | Family::Ordinal | Family::Multinomial => {
                let meta = graph
                    .meta(resp)
                    .ok_or_else(|| Error::Model(format!("no description of '{resp}'")))?;
                (meta.levels.clone(), graph.refcat_index(resp).unwrap_or(0))
            }
            _ => (Vec::new(), 0),
        };
        let lp_labels: Vec<Option<String>> = if family == Family::Multinomial {
            (0..levels.len())
                .filter(|&c| c != reference)
                .map(|c| Some(format!("{resp}{}", levels[c])))
                .collect()
        } else {
            vec![None]
        };
        let find = |group: NodeGroup, label: &str| {
            samples
                .meta
                .nodes
                .iter()
                .position(|n| n.group == group && n.model == resp && n.label == label)
                .ok_or_else(|| {
                    Error::Diagnostics(format!("parameter '{label}' of the model for '{resp}' was not monitored"))
                })
        };
        let mut coef = Vec::new();
        for lp in &lp_labels {
            for c in &columns {
                let label = match lp {
                    Some(p) => format!("{p}: {}", c.name),
                    None => c.name.clone(),
                };
                coef.push(find(NodeGroup::Betas, &label)?);
            }
        }
        let gamma = if family == Family::Ordinal {
            (1..levels.len())
                .map(|k| find(NodeGroup::GammaMain, &format!("gamma_{resp}[{k}]")))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        Ok(Predictor { sm, family, columns, levels, reference, coef, n_lp: lp_labels.len(), gamma })
    }

    fn is_categorical(&self) -> bool {
        matches!(self.family, Family::Binomial | Family::Ordinal | Family::Multinomial)
    }

    /// Category probabilities in level order.
    fn probs(&self, etas: &[f64], gamma: &[f64]) -> Vec<f64> {
        match self.family {
            Family::Binomial => {
                let p = self.sm.model_type.link().inverse(etas[0]);
                let mut out = vec![p; 2];
                out[self.reference] = 1.0 - p;
                out
            }
            Family::Ordinal => cumulative_probs(etas[0], gamma),
            _ => {
                let mut full = Vec::with_capacity(self.levels.len());
                let mut it = etas.iter();
                for c in 0..self.levels.len() {
                    full.push(if c == self.reference { 0.0 } else { *it.next().unwrap() });
                }
                let lse = log_sum_exp(&full);
                full.iter().map(|e| (e - lse).exp()).collect()
            }
        }
    }

    fn response(&self, eta: f64) -> f64 {
        match self.family {
            Family::Lognormal | Family::Weibull => eta.exp(),
            Family::Beta => sigmoid(eta),
            _ => self.sm.model_type.link().inverse(eta),
        }
    }
}

/// Model variables of `newdata`, as indices/values like the sampler uses.
fn newdata_values(vt: &VarTable, newdata: &Dataset, needed: &[usize]) -> Result<Vec<Vec<f64>>> {
    let n = newdata.n_rows();
    let mut out = vec![vec![f64::NAN; n]; vt.len()];
    for &v in needed {
        let meta = &vt.metas[v];
        let col = newdata
            .column(&meta.name)
            .ok_or_else(|| Error::Data(format!("newdata has no column '{}'", meta.name)))?;
        out[v] = if meta.vtype.is_categorical() {
            category_codes(col, meta)?
                .into_iter()
                .map(|c| c.map_or(f64::NAN, |c| c as f64))
                .collect()
        } else {
            match &col.data {
                ColumnData::Numeric(x) => x.iter().map(|x| x.unwrap_or(f64::NAN)).collect(),
                ColumnData::Categorical { .. } => {
                    return Err(Error::Data(format!("column '{}' of newdata is not numeric", meta.name)))
                }
            }
        };
    }
    Ok(out)
}

/// Predictions of an analysis model at the rows of `newdata`. Random
/// effects are set to zero.
pub fn predict(samples: &McmcSamples, graph: &ModelGraph, newdata: &Dataset, opts: &PredictOptions) -> Result<PredictionResult> {
    let (qlo, qhi) = opts.quantiles;
    if !(0.0..=1.0).contains(&qlo) || !(0.0..=1.0).contains(&qhi) || qlo > qhi {
        return Err(Error::Config(format!("invalid quantiles ({qlo}, {qhi})")));
    }
    let vt = VarTable::new(graph);
    let pred = Predictor::new(graph, &vt, samples, opts.outcome.as_deref())?;
    let ty = opts.pred_type;
    if matches!(ty, PredictType::Prob | PredictType::Class) && !pred.is_categorical() {
        return Err(Error::Config(format!(
            "prediction type '{}' needs a categorical outcome",
            if ty == PredictType::Prob { "prob" } else { "class" }
        )));
    }

    let mut needed: Vec<usize> = pred.columns.iter().flat_map(|c| c.deps.iter().copied()).collect();
    needed.sort_unstable();
    needed.dedup();
    let values = newdata_values(&vt, newdata, &needed)?;
    let n = newdata.n_rows();
    for r in 0..n {
        if let Some(&v) = needed.iter().find(|&&v| values[v][r].is_nan()) {
            return Err(Error::Data(format!(
                "row {} of newdata has a missing value in '{}'",
                r + 1,
                vt.metas[v].name
            )));
        }
    }
    let p = pred.columns.len();
    let x: Vec<f64> = (0..n)
        .flat_map(|r| {
            pred.columns
                .iter()
                .map(|c| c.raw(&values, r, &vt, &graph.registry))
                .collect::<Vec<_>>()
        })
        .collect();

    let mut keep = opts.subset.clone();
    let mut names: Vec<serde_json::Value> = pred
        .coef
        .iter()
        .chain(&pred.gamma)
        .map(|&i| serde_json::Value::String(samples.meta.nodes[i].name.clone()))
        .collect();
    names.dedup();
    keep.nodes = Some(BTreeMap::from([
        ("analysis_main".to_string(), serde_json::Value::Bool(false)),
        ("other".to_string(), serde_json::Value::Array(names)),
    ]));
    let s = keep.apply(samples)?;
    let idx = |i: usize| s.node_index(&samples.meta.nodes[i].name).expect("selected node");
    let coef: Vec<usize> = pred.coef.iter().map(|&i| idx(i)).collect();
    let gamma_idx: Vec<usize> = pred.gamma.iter().map(|&i| idx(i)).collect();

    let categorical_out = matches!(ty, PredictType::Prob | PredictType::Class)
        || (ty == PredictType::Response && pred.family != Family::Binomial && pred.is_categorical());
    let labels: Vec<String> = if categorical_out {
        pred.levels.clone()
    } else if matches!(ty, PredictType::Link | PredictType::Lp) && pred.n_lp > 1 {
        (0..pred.levels.len())
            .filter(|&c| c != pred.reference)
            .map(|c| pred.levels[c].clone())
            .collect()
    } else {
        vec!["fit".to_string()]
    };
    let n_out = labels.len();
    let total = s.n_draws() * s.n_chains();
    // draws[row][label] -> values over draws
    let mut draws = vec![vec![Vec::with_capacity(total); n_out]; n];
    let mut beta = vec![0.0; coef.len()];
    let mut gamma = vec![0.0; gamma_idx.len()];
    let mut etas = vec![0.0; pred.n_lp];
    for c in 0..s.n_chains() {
        for d in 0..s.n_draws() {
            for (b, &i) in beta.iter_mut().zip(&coef) {
                *b = s.value(c, d, i);
            }
            for (g, &i) in gamma.iter_mut().zip(&gamma_idx) {
                *g = s.value(c, d, i);
            }
            for r in 0..n {
                let xr = &x[r * p..(r + 1) * p];
                for (k, e) in etas.iter_mut().enumerate() {
                    *e = xr.iter().zip(&beta[k * p..(k + 1) * p]).map(|(a, b)| a * b).sum();
                }
                if categorical_out {
                    for (k, pr) in pred.probs(&etas, &gamma).into_iter().enumerate() {
                        draws[r][k].push(pr);
                    }
                } else if ty == PredictType::Response {
                    draws[r][0].push(pred.response(etas[0]));
                } else {
                    for (k, e) in etas.iter().enumerate() {
                        draws[r][k].push(*e);
                    }
                }
            }
        }
    }

    let mut fit = Vec::with_capacity(n);
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for row in draws.iter_mut() {
        let mut f = Vec::with_capacity(n_out);
        let mut l = Vec::with_capacity(n_out);
        let mut h = Vec::with_capacity(n_out);
        for v in row.iter_mut() {
            f.push(mean(v));
            v.sort_by(f64::total_cmp);
            l.push(quantile(v, qlo));
            h.push(quantile(v, qhi));
        }
        fit.push(f);
        lo.push(l);
        hi.push(h);
    }
    let class = (ty == PredictType::Class).then(|| {
        fit.iter()
            .map(|f| {
                let mut best = 0;
                for (k, v) in f.iter().enumerate() {
                    if *v > f[best] {
                        best = k;
                    }
                }
                pred.levels[best].clone()
            })
            .collect()
    });
    Ok(PredictionResult {
        pred_type: ty,
        outcome: pred.sm.name().to_string(),
        labels,
        fit,
        lo,
        hi,
        class,
        newdata: newdata.clone(),
        quantiles: opts.quantiles,
    })
}
