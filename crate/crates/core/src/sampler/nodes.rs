//! Named quantities recorded from the chain state, on the data scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Family, MonitorSet, NodeGroup};

use super::engine::{Engine, ImpKind};
use super::state::ChainState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub name: String,
    pub group: NodeGroup,
    /// Response of the sub-model the node belongs to; the variable for
    /// imputed values.
    pub model: String,
    /// Row label within the sub-model's table.
    pub label: String,
    /// 0-based data rows sharing an imputed value.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rows: Vec<usize>,
}

#[derive(Clone, Copy, Debug)]
pub enum NodeSource {
    Coef { m: usize, idx: usize },
    Sigma(usize),
    Tau(usize),
    Gamma { m: usize, k: usize },
    Delta { m: usize, k: usize },
    Shape(usize),
    D { m: usize, i: usize, j: usize },
    InvD { m: usize, i: usize, j: usize },
    RinvD { m: usize, j: usize },
    B { m: usize, g: usize, l: usize },
    Imp(usize),
}

/// Every quantity that can be recorded, in a fixed order: sub-models in
/// sampling order, then imputed values.
pub fn all_nodes(engine: &Engine) -> Vec<(NodeInfo, NodeSource)> {
    use NodeGroup::*;
    let mut out = Vec::new();
    let single = engine.n_analysis() == 1;
    for (m, cm) in engine.models.iter().enumerate() {
        let main = cm.sm.is_analysis();
        let resp = cm.name().to_string();
        let pick = |a: NodeGroup, o: NodeGroup| if main { a } else { o };
        let mut push = |name: String, group: NodeGroup, label: String, src: NodeSource| {
            out.push((
                NodeInfo {
                    name,
                    group,
                    model: resp.clone(),
                    label,
                    rows: Vec::new(),
                },
                src,
            ))
        };
        for (idx, col) in cm.coef_labels().into_iter().enumerate() {
            let label = if cm.family == Family::Multinomial {
                let cat = cm.lp_cats[idx / cm.p];
                format!("{resp}{}: {col}", engine.vt.metas[cm.var].levels[cat])
            } else {
                col
            };
            let name = match (main, single) {
                (true, true) => label.clone(),
                (true, false) => format!("beta_{resp}[{label}]"),
                (false, _) => format!("alpha_{resp}[{label}]"),
            };
            push(name, pick(Betas, Alphas), label, NodeSource::Coef { m, idx });
        }
        if matches!(cm.family, Family::Gaussian | Family::Lognormal) {
            push(format!("sigma_{resp}"), pick(SigmaMain, SigmaOther), "sigma".into(), NodeSource::Sigma(m));
        }
        if cm.model_type.has_precision() {
            let g = match (main, cm.family) {
                (true, Family::Beta) => TauMainBeta,
                (true, _) => TauMain,
                (false, _) => TauOther,
            };
            push(format!("tau_{resp}"), g, "tau".into(), NodeSource::Tau(m));
        }
        if cm.family == Family::Ordinal {
            for k in 0..cm.n_cat - 1 {
                let label = format!("gamma_{resp}[{}]", k + 1);
                push(label.clone(), pick(GammaMain, GammaOther), label, NodeSource::Gamma { m, k });
            }
            for k in 0..cm.n_cat.saturating_sub(2) {
                let label = format!("delta_{resp}[{}]", k + 1);
                push(label.clone(), pick(DeltaMain, DeltaOther), label, NodeSource::Delta { m, k });
            }
        }
        if cm.family == Family::Weibull {
            push(format!("shape_{resp}"), ShapeMain, "shape".into(), NodeSource::Shape(m));
        }
        if let Some(r) = &cm.ranef {
            let grp = cm.sm.group.clone().unwrap_or_default();
            for j in 0..r.q {
                for i in 0..=j {
                    let label = format!("D_{resp}_{grp}[{},{}]", i + 1, j + 1);
                    push(label.clone(), pick(DMain, DOther), label, NodeSource::D { m, i, j });
                }
            }
            for j in 0..r.q {
                for i in 0..=j {
                    let label = format!("invD_{resp}_{grp}[{},{}]", i + 1, j + 1);
                    push(label.clone(), pick(InvDMain, InvDOther), label, NodeSource::InvD { m, i, j });
                }
            }
            for j in 0..r.q {
                let label = format!("RinvD_{resp}_{grp}[{},{}]", j + 1, j + 1);
                push(label.clone(), pick(RinvDMain, RinvDOther), label, NodeSource::RinvD { m, j });
            }
            for g in 0..r.n_groups() {
                for l in 0..r.q {
                    let label = format!("b_{resp}_{grp}[{},{}]", g + 1, l + 1);
                    push(label.clone(), pick(RanefMain, RanefOther), label, NodeSource::B { m, g, l });
                }
            }
        }
    }
    for (t, target) in engine.imps.iter().enumerate() {
        let var = &engine.vt.metas[target.var].name;
        let label = match (target.group, &engine.grouping) {
            (Some(g), Some(grp)) => format!("{}={}", grp.var, grp.labels[g]),
            _ => (target.rows[0] + 1).to_string(),
        };
        out.push((
            NodeInfo {
                name: format!("imp_{var}[{label}]"),
                group: NodeGroup::Imps,
                model: var.clone(),
                label,
                rows: target.rows.clone(),
            },
            NodeSource::Imp(t),
        ));
    }
    out
}

/// Nodes selected by a monitor set. Explicitly named nodes must exist.
pub fn select_nodes(engine: &Engine, monitor: &MonitorSet) -> Result<Vec<(NodeInfo, NodeSource)>> {
    let all = all_nodes(engine);
    for name in &monitor.other {
        if !all.iter().any(|(n, _)| &n.name == name) {
            return Err(Error::Config(format!("unknown node '{name}' in monitor 'other'")));
        }
    }
    Ok(all
        .into_iter()
        .filter(|(n, _)| monitor.contains(n.group) || monitor.other.contains(&n.name))
        .collect())
}

/// Coefficients and thresholds of sub-model `m` on the data scale.
pub fn data_scale(engine: &Engine, st: &ChainState, m: usize) -> (Vec<f64>, Vec<f64>) {
    let cm = &engine.models[m];
    let ms = &st.models[m];
    let p = cm.p;
    let mut coef = ms.beta.clone();
    let mut gamma = ms.thresholds().to_vec();
    for k in 0..cm.n_lp {
        let mut shift = 0.0;
        for (j, col) in cm.design.columns.iter().enumerate() {
            if let Some(s) = col.scale {
                let b = ms.beta[k * p + j] / s.sd;
                coef[k * p + j] = b;
                shift += b * s.mean;
            }
        }
        if cm.design.columns.first().is_some_and(|c| c.is_intercept()) {
            coef[k * p] -= shift;
        } else if cm.family == Family::Ordinal {
            for g in gamma.iter_mut() {
                *g += shift;
            }
        }
    }
    (coef, gamma)
}

/// Values of `sources` in the current state.
pub fn node_values(engine: &Engine, st: &ChainState, sources: &[NodeSource], out: &mut Vec<f64>) {
    let mut cache: Vec<Option<(Vec<f64>, Vec<f64>)>> = vec![None; engine.models.len()];
    let mut dmat: Vec<Option<nalgebra::DMatrix<f64>>> = vec![None; engine.models.len()];
    for src in sources {
        let v = match *src {
            NodeSource::Coef { m, idx } => {
                cache[m].get_or_insert_with(|| data_scale(engine, st, m)).0[idx]
            }
            NodeSource::Gamma { m, k } => {
                cache[m].get_or_insert_with(|| data_scale(engine, st, m)).1[k]
            }
            NodeSource::Sigma(m) => 1.0 / st.models[m].tau.sqrt(),
            NodeSource::Tau(m) => st.models[m].tau,
            NodeSource::Delta { m, k } => st.models[m].delta[k],
            NodeSource::Shape(m) => st.models[m].shape,
            NodeSource::D { m, i, j } => {
                let d = dmat[m].get_or_insert_with(|| {
                    st.models[m]
                        .inv_d
                        .clone()
                        .try_inverse()
                        .unwrap_or_else(|| nalgebra::DMatrix::from_element(1, 1, f64::NAN))
                });
                d.get((i, j)).copied().unwrap_or(f64::NAN)
            }
            NodeSource::InvD { m, i, j } => st.models[m].inv_d[(i, j)],
            NodeSource::RinvD { m, j } => st.models[m].rinv_d[j],
            NodeSource::B { m, g, l } => {
                let q = engine.models[m].ranef.as_ref().map_or(1, |r| r.q);
                st.models[m].b[g * q + l]
            }
            NodeSource::Imp(t) => {
                let target = &engine.imps[t];
                let x = st.values[target.var][target.rows[0]];
                match target.kind {
                    ImpKind::Categorical(_) => x + 1.0,
                    _ => x,
                }
            }
        };
        out.push(v);
    }
}
